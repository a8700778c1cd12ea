//! folhe-core: a numerical laboratory for transverse Hermitian-Einstein
//! geometry on flat foliated tori.
//!
//! The crate is organized bottom-up:
//! - [`exact`]: integer/rational/radical arithmetic (mode admissibility and
//!   the flat-connection moduli example are exact-irrationality questions);
//! - [`exterior`]: constant-coefficient exterior algebra, Gram matrices,
//!   Hodge star;
//! - [`model`]: the flat foliated-torus geometry, admissible Fourier modes,
//!   and the collocation grid;
//! - [`field`]: finite-mode basic (p,q)-fields with Dolbeault operators,
//!   Lefschetz/contraction, wedge products, and integration;
//! - [`bundle`]: explicit Hermitian bundles from line-bundle factors, Chern
//!   connections, curvature, degree/slope, Chern forms;
//! - [`solver`]: the perturbed-equation continuity method with Newton-Krylov
//!   correction, blow-up detection, and destabilizer extraction;
//! - [`stability`]: slope stability verdicts, filtrations, and section
//!   kernels for the desk-scale bundle class;
//! - [`moduli`]: the exact flat U(1) moduli example on the 3-torus;
//! - [`instanton`]: the anti-self-duality-type residuals for trace-free
//!   Hermitian-Einstein connections;
//! - [`config`] / [`suite`]: declarative model/bundle files and the built-in
//!   verification batteries used by the CLI.

pub mod config;
pub mod exact;
pub mod exterior;
pub mod field;
pub mod instanton;
pub mod model;
pub mod moduli;
pub mod bundle;
pub mod par;
pub mod solver;
pub mod stability;
pub mod suite;
