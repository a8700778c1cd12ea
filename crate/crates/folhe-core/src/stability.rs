//! Slope stability verdicts, filtrations, and section kernels for the
//! bundle class built from line factors and extension classes.
//!
//! In this class every saturated subsheaf that can realize the maximal slope
//! is spanned by a β-invariant subset of factors (a subset S is invariant
//! when no β entry maps a factor in S to one outside), so stability reduces
//! to an exact enumeration over the 2^r subset lattice. Polystability
//! additionally requires the extension data to be cohomologically trivial,
//! i.e. the harmonic (zero-mode) part of β must vanish.

use crate::bundle::BundleSpec;
use crate::exterior::C;
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("unsupported input for this check: {0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub rank: usize,
    pub degree: f64,
    pub slope: f64,
    pub stable: bool,
    pub semistable: bool,
    pub polystable: bool,
    /// an invariant subset of maximal slope violation, if any
    pub destabilizing_subset: Option<Vec<usize>>,
    pub max_proper_slope: f64,
}

const SLOPE_TOL: f64 = 1e-9;

/// Does β have a nonzero (i,j) entry?
fn beta_entry_nonzero(bundle: &BundleSpec) -> Vec<bool> {
    let r = bundle.rank();
    let mut nz = vec![false; r * r];
    for comp in 0..bundle.beta.n_comps() {
        for i in 0..r {
            for j in 0..r {
                if bundle
                    .beta
                    .slice(comp, i, j)
                    .iter()
                    .any(|c| c.norm() > 1e-14)
                {
                    nz[i * r + j] = true;
                }
            }
        }
    }
    nz
}

/// S (bitmask over factor indices) is invariant iff no β entry maps into S
/// from outside: β_{ij} ≠ 0 with i ∉ S, j ∈ S is forbidden.
fn subset_invariant(nz: &[bool], r: usize, mask: u32) -> bool {
    for j in 0..r {
        if mask & (1 << j) == 0 {
            continue;
        }
        for i in 0..r {
            if mask & (1 << i) == 0 && nz[i * r + j] {
                return false;
            }
        }
    }
    true
}

/// Degree of the subsheaf spanned by a factor subset (β preserves it, and β
/// does not contribute to the degree).
pub fn subset_degree(bundle: &BundleSpec, subset: &[usize]) -> f64 {
    subset.iter().map(|&i| factor_degree(bundle, i)).sum()
}

pub fn subset_slope(bundle: &BundleSpec, subset: &[usize]) -> f64 {
    subset_degree(bundle, subset) / subset.len() as f64
}

/// Degree of one line factor: the diagonal entry of the background curvature
/// paired with ω^{n-1}.
pub fn factor_degree(bundle: &BundleSpec, i: usize) -> f64 {
    use crate::field::BasicField;
    let r = bundle.rank();
    let mut pi_mat = DMatrix::from_element(r, r, C::new(0.0, 0.0));
    pi_mat[(i, i)] = C::new(1.0, 0.0);
    let pi = BasicField::constant(&bundle.model, &pi_mat);
    // f_diag is diagonal and constant; π f_diag π picks the factor
    let n = bundle.model.n;
    let picked = pi
        .wedge(&bundle.f_diag)
        .expect("wedge")
        .wedge(&pi)
        .expect("wedge")
        .trace();
    let wpow = BasicField::omega_pow(&bundle.model, n - 1);
    let v = picked
        .wedge(&wpow)
        .expect("wedge")
        .integrate()
        .expect("top degree");
    (v * C::new(0.0, 1.0 / (2.0 * std::f64::consts::PI))).re
}

fn mask_to_vec(mask: u32, r: usize) -> Vec<usize> {
    (0..r).filter(|i| mask & (1 << i) != 0).collect()
}

/// Exact stability verdict by enumeration over invariant factor subsets.
pub fn stability_verdict(bundle: &BundleSpec) -> StabilityReport {
    let r = bundle.rank();
    assert!(r <= 20, "subset enumeration is exponential in the rank");
    let mu = bundle.slope();
    let degree = bundle.degree();
    let nz = beta_entry_nonzero(bundle);
    let mut stable = r >= 1;
    let mut semistable = true;
    let mut destab: Option<Vec<usize>> = None;
    let mut max_proper = f64::NEG_INFINITY;
    for mask in 1..((1u32 << r) - 1).max(1) {
        if r == 1 {
            break;
        }
        if !subset_invariant(&nz, r, mask) {
            continue;
        }
        let subset = mask_to_vec(mask, r);
        let mus = subset_slope(bundle, &subset);
        if mus > max_proper {
            max_proper = mus;
        }
        if mus > mu + SLOPE_TOL {
            semistable = false;
            stable = false;
            let better = match &destab {
                None => true,
                Some(cur) => {
                    let cur_mu = subset_slope(bundle, cur);
                    mus > cur_mu + SLOPE_TOL
                        || ((mus - cur_mu).abs() <= SLOPE_TOL && subset.len() > cur.len())
                }
            };
            if better {
                destab = Some(subset.clone());
            }
        } else if mus >= mu - SLOPE_TOL {
            stable = false;
        }
    }
    if max_proper == f64::NEG_INFINITY {
        max_proper = mu;
    }
    // polystable: semistable and the harmonic part of every extension class
    // vanishes (then E is isomorphic to the split sum of its equal-slope
    // factors)
    let mut harmonic_trivial = true;
    for comp in 0..bundle.beta.n_comps() {
        if bundle.beta.mean_matrix(comp).iter().any(|c| c.norm() > 1e-12) {
            harmonic_trivial = false;
        }
    }
    let polystable = semistable && harmonic_trivial;
    StabilityReport {
        rank: r,
        degree,
        slope: mu,
        stable,
        semistable,
        polystable,
        destabilizing_subset: destab,
        max_proper_slope: max_proper,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FiltrationLayer {
    pub factors: Vec<usize>,
    pub rank: usize,
    pub degree: f64,
    pub slope: f64,
}

/// Harder-Narasimhan filtration by greedy extraction: at each stage take the
/// invariant subset (within the remaining quotient) of maximal slope, ties
/// broken by maximal rank. Slopes come out strictly decreasing.
pub fn harder_narasimhan(bundle: &BundleSpec) -> Vec<FiltrationLayer> {
    let r = bundle.rank();
    let nz = beta_entry_nonzero(bundle);
    let mut remaining: u32 = (1 << r) - 1;
    let mut layers = Vec::new();
    while remaining != 0 {
        let rem_vec = mask_to_vec(remaining, r);
        let mut best: Option<(f64, usize, u32)> = None; // (slope, size, mask)
        // enumerate nonempty submasks of `remaining`
        let mut sub = remaining;
        loop {
            // invariance within the quotient: β must not map from the
            // remaining complement into sub (maps into already-extracted
            // layers are quotient-trivial)
            let mut ok = true;
            'outer: for &j in &rem_vec {
                if sub & (1 << j) == 0 {
                    continue;
                }
                for &i in &rem_vec {
                    if sub & (1 << i) == 0 && nz[i * r + j] {
                        ok = false;
                        break 'outer;
                    }
                }
            }
            if ok {
                let subset = mask_to_vec(sub, r);
                let mus = subset_slope(bundle, &subset);
                let sz = subset.len();
                let better = match best {
                    None => true,
                    Some((bmu, bsz, _)) => {
                        mus > bmu + SLOPE_TOL || ((mus - bmu).abs() <= SLOPE_TOL && sz > bsz)
                    }
                };
                if better {
                    best = Some((mus, sz, sub));
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & remaining;
            if sub == 0 {
                break;
            }
        }
        let (mus, _, mask) = best.expect("the full remaining set is always invariant");
        let factors = mask_to_vec(mask, r);
        layers.push(FiltrationLayer {
            rank: factors.len(),
            degree: subset_degree(bundle, &factors),
            slope: mus,
            factors,
        });
        remaining &= !mask;
    }
    layers
}

/// Jordan-Hölder refinement: split each (semistable) Harder-Narasimhan layer
/// into minimal invariant pieces of the same slope.
pub fn jordan_holder(bundle: &BundleSpec) -> Vec<FiltrationLayer> {
    let r = bundle.rank();
    let nz = beta_entry_nonzero(bundle);
    let hn = harder_narasimhan(bundle);
    let mut out = Vec::new();
    for layer in hn {
        let mut remaining: u32 = layer.factors.iter().map(|&i| 1u32 << i).sum();
        while remaining != 0 {
            let rem_vec = mask_to_vec(remaining, r);
            // smallest invariant subset of the layer slope
            let mut best: Option<(usize, u32)> = None;
            let mut sub = remaining;
            loop {
                let mut ok = true;
                'outer: for &j in &rem_vec {
                    if sub & (1 << j) == 0 {
                        continue;
                    }
                    for &i in &rem_vec {
                        if sub & (1 << i) == 0 && nz[i * r + j] {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
                if ok && sub != 0 {
                    let subset = mask_to_vec(sub, r);
                    if (subset_slope(bundle, &subset) - layer.slope).abs() <= SLOPE_TOL {
                        let sz = subset.len();
                        let better = match best {
                            None => true,
                            Some((bsz, _)) => sz < bsz,
                        };
                        if better {
                            best = Some((sz, sub));
                        }
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & remaining;
                if sub == 0 {
                    break;
                }
            }
            let (_, mask) = best.expect("layer itself qualifies");
            let factors = mask_to_vec(mask, r);
            out.push(FiltrationLayer {
                rank: factors.len(),
                degree: subset_degree(bundle, &factors),
                slope: layer.slope,
                factors,
            });
            remaining &= !mask;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingReport {
    /// dim H⁰(E) from the numerical kernel of the truncated ∂̄_E operator
    pub h0_dim: usize,
    pub smallest_nonkernel_singular_value: f64,
}

/// Dimension of the space of global holomorphic sections, by SVD of the
/// truncated ∂̄_E matrix on Fourier modes. Supported only for bundles whose
/// factors are all flat (zero Chern vector, optionally rationally twisted);
/// curved factors have no Fourier-representable sections.
pub fn vanishing_check(bundle: &BundleSpec) -> Result<VanishingReport, StabilityError> {
    let model = &bundle.model;
    let n = model.n;
    let r = bundle.rank();
    for f in &bundle.factors {
        if f.c.iter().any(|&c| c != 0) {
            return Err(StabilityError::Unsupported(
                "sections of factors with nonzero Chern vector are not Fourier-representable"
                    .into(),
            ));
        }
    }
    // columns: admissible modes × components; rows: (0,1) outputs
    let modes = &model.modes;
    let adm: Vec<usize> = (0..modes.box_len).filter(|&b| modes.admissible[b]).collect();
    let cols = adm.len() * r;
    let rows = adm.len() * r * n;
    let mut m = DMatrix::<C>::zeros(rows, cols);
    let two_pi_i = C::new(0.0, 2.0 * std::f64::consts::PI);
    // ∂̄ (diagonal in modes, with the factor twist shifting the frequency)
    for (ci, &b) in adm.iter().enumerate() {
        let kap = modes.kappa(b);
        for i in 0..r {
            let col = ci * r + i;
            for a in 0..n {
                // k01 with twist: ((κ_{2a}+θ_{2a}) + i(κ_{2a+1}+θ_{2a+1}))/2
                let (t0, t1) = match &bundle.factors[i].twist {
                    Some(t) => (t[2 * a].to_f64(), t[2 * a + 1].to_f64()),
                    None => (0.0, 0.0),
                };
                let k01 = C::new(
                    (kap[2 * a] as f64 + t0) / 2.0,
                    (kap[2 * a + 1] as f64 + t1) / 2.0,
                );
                let row = (ci * n + a) * r + i;
                m[(row, col)] += two_pi_i * k01;
            }
        }
    }
    // β coupling: (β v)_i = Σ_j β_{ij} v_j, convolving modes
    for comp in 0..n {
        for i in 0..r {
            for j in 0..r {
                let sl = bundle.beta.slice(comp, i, j);
                for (bk, v) in sl.iter().enumerate() {
                    if v.norm() < 1e-15 {
                        continue;
                    }
                    let kb = modes.kappa(bk);
                    for (cj, &b) in adm.iter().enumerate() {
                        let kap = modes.kappa(b);
                        let sum: Vec<i64> = kap.iter().zip(kb.iter()).map(|(a, c)| a + c).collect();
                        if let Some(idx) = modes.index_of(&sum) {
                            if modes.admissible[idx] {
                                let ri = adm.binary_search(&idx).expect("admissible index");
                                let row = (ri * n + comp) * r + i;
                                let col = cj * r + j;
                                m[(row, col)] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let smax = sv.last().cloned().unwrap_or(0.0).max(1.0);
    let tol = 1e-8 * smax;
    let h0 = sv.iter().take_while(|&&s| s < tol).count();
    let first_nonkernel = sv.iter().find(|&&s| s >= tol).cloned().unwrap_or(0.0);
    Ok(VanishingReport {
        h0_dim: h0,
        smallest_nonkernel_singular_value: first_nonkernel,
    })
}
