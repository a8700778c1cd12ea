//! Hermitian bundles built from explicit line-bundle factors and extension
//! classes, with their Chern connections.
//!
//! A bundle is E = (⊕_i L_i, ∂̄₀ + β): each factor L_i is a flat-metric line
//! bundle with integer Chern vector c_i ∈ Z^n (curvature π Σ_a c_a dz^a∧dz̄^a,
//! i.e. -2πi Σ_a c_a dx^{2a}∧dx^{2a+1}), optionally twisted by a rational flat
//! connection; β is an off-diagonal End-valued (0,1) form deforming the
//! holomorphic structure. Off-diagonal data is only allowed between factors
//! with equal Chern vector and twist — exactly the blocks where Hom(L_j, L_i)
//! is trivial and therefore Fourier-representable in the basic calculus. All
//! endomorphism-valued operations preserve this block structure, so the whole
//! metric flow stays inside the representable class.

use crate::exact::Ratio;
use crate::exterior::{CBasis, C};
use crate::field::{BasicField, FieldError};
use crate::model::FoliatedTorusModel;
use nalgebra::DMatrix;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("factor Chern vector must have one entry per complex dimension")]
    ChernDimension,
    #[error("extension class indices out of range or on the diagonal")]
    BadIndices,
    #[error("extension classes are only supported between factors with equal Chern vector and twist")]
    FactorMismatch,
    #[error("extension class mode outside the cutoff box or not basic")]
    BadMode,
    #[error("holomorphic structure is not integrable: ∂̄β + β∧β ≠ 0")]
    NotIntegrable,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// One line-bundle factor: integer Chern vector plus an optional rational
/// flat twist θ ∈ Q^{2n} (connection d + 2πi θ·dx).
#[derive(Clone, Debug, PartialEq)]
pub struct LineFactor {
    pub c: Vec<i64>,
    pub twist: Option<Vec<Ratio>>,
}

impl LineFactor {
    pub fn new(c: Vec<i64>) -> Self {
        LineFactor { c, twist: None }
    }
}

/// An entry of the deforming (0,1) form: β_{row,col} as a list of Fourier
/// modes, each with its n components in the dz̄ coframe.
#[derive(Clone, Debug)]
pub struct ExtClass {
    pub row: usize,
    pub col: usize,
    pub modes: Vec<(Vec<i64>, Vec<C>)>,
}

impl ExtClass {
    /// Constant class a·dz̄^0 in entry (row, col).
    pub fn constant(row: usize, col: usize, n: usize, a: C) -> Self {
        let mut comps = vec![C::new(0.0, 0.0); n];
        comps[0] = a;
        ExtClass {
            row,
            col,
            modes: vec![(vec![0; 2 * n], comps)],
        }
    }
}

/// A bundle with its background Hermitian metric (the flat diagonal one) and
/// Chern connection data.
pub struct BundleSpec {
    pub model: Arc<FoliatedTorusModel>,
    pub factors: Vec<LineFactor>,
    pub ext: Vec<ExtClass>,
    /// deforming (0,1) endomorphism form
    pub beta: BasicField,
    /// background curvature of ⊕L_i: constant diagonal (1,1)
    pub f_diag: BasicField,
}

impl BundleSpec {
    pub fn new(
        model: &Arc<FoliatedTorusModel>,
        factors: Vec<LineFactor>,
        ext: Vec<ExtClass>,
    ) -> Result<Self, BundleError> {
        let n = model.n;
        let r = factors.len();
        assert!(r >= 1);
        for f in &factors {
            if f.c.len() != n {
                return Err(BundleError::ChernDimension);
            }
        }
        let mut beta = BasicField::zero(model, 0, 1, r);
        for e in &ext {
            if e.row == e.col || e.row >= r || e.col >= r {
                return Err(BundleError::BadIndices);
            }
            if factors[e.row].c != factors[e.col].c || factors[e.row].twist != factors[e.col].twist
            {
                return Err(BundleError::FactorMismatch);
            }
            for (kap, comps) in &e.modes {
                assert_eq!(comps.len(), n);
                let idx = model.modes.index_of(kap).ok_or(BundleError::BadMode)?;
                if !model.modes.admissible[idx] {
                    return Err(BundleError::BadMode);
                }
                for (a, v) in comps.iter().enumerate() {
                    beta.slice_mut(a, e.row, e.col)[idx] += *v;
                }
            }
        }
        // integrability of the deformed holomorphic structure
        let (_, dbar_beta) = beta.dolbeault();
        let scale = 1.0 + beta.linf_coeff_norm();
        if n >= 2 {
            let bb = beta.wedge(&beta)?;
            if dbar_beta.add(&bb).linf_coeff_norm() > 1e-10 * scale {
                return Err(BundleError::NotIntegrable);
            }
        } else if dbar_beta.linf_coeff_norm() > 1e-10 * scale {
            return Err(BundleError::NotIntegrable);
        }

        // background curvature: F₀ = π Σ_i Σ_a c_{i,a} dz^a ∧ dz̄^a E_{ii}
        let mut f_diag = BasicField::zero(model, 1, 1, r);
        let z = model.modes.zero_index();
        for (i, fac) in factors.iter().enumerate() {
            for a in 0..n {
                let comp = model.algebra.basis_index(
                    1,
                    1,
                    CBasis {
                        i_mask: 1 << a,
                        j_mask: 1 << a,
                    },
                );
                f_diag.slice_mut(comp, i, i)[z] +=
                    C::new(std::f64::consts::PI * fac.c[a] as f64, 0.0);
            }
        }

        Ok(BundleSpec {
            model: model.clone(),
            factors,
            ext,
            beta,
            f_diag,
        })
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// Which endomorphism entries are representable (equal factor data).
    pub fn block_mask(&self) -> Vec<bool> {
        let r = self.rank();
        let mut m = vec![false; r * r];
        for i in 0..r {
            for j in 0..r {
                m[i * r + j] =
                    self.factors[i].c == self.factors[j].c && self.factors[i].twist == self.factors[j].twist;
            }
        }
        m
    }

    /// Zero out endomorphism entries between unequal factors (cleanup after
    /// pointwise nonlinear maps; mathematically those entries are exactly
    /// zero throughout the flow).
    pub fn project_blocks(&self, f: &mut BasicField) {
        let mask = self.block_mask();
        let r = self.rank();
        for comp in 0..f.n_comps() {
            for i in 0..r {
                for j in 0..r {
                    if !mask[i * r + j] {
                        for v in f.slice_mut(comp, i, j) {
                            *v = C::new(0.0, 0.0);
                        }
                    }
                }
            }
        }
    }

    /// Deformed Dolbeault operator on endomorphism-valued (p,q)-fields:
    /// ∂̄_E a = ∂̄a + β∧a - (-1)^{p+q} a∧β.
    pub fn dbar_e(&self, a: &BasicField) -> BasicField {
        let (_, mut out) = a.dolbeault();
        let sgn = if (a.p + a.q) % 2 == 0 { 1.0 } else { -1.0 };
        let ba = self.beta.wedge(a).expect("degree overflow in dbar_e");
        let ab = a.wedge(&self.beta).expect("degree overflow in dbar_e");
        out = out.add(&ba).sub(&ab.scale(C::new(sgn, 0.0)));
        out
    }

    /// (1,0) part of the background Chern connection on endomorphisms:
    /// ∂_E a = ∂a - (β*∧a - (-1)^{p+q} a∧β*).
    pub fn del_e(&self, a: &BasicField) -> BasicField {
        let (mut out, _) = a.dolbeault();
        let bstar = self.beta.adjoint();
        let sgn = if (a.p + a.q) % 2 == 0 { 1.0 } else { -1.0 };
        let ba = bstar.wedge(a).expect("degree overflow in del_e");
        let ab = a.wedge(&bstar).expect("degree overflow in del_e");
        out = out.sub(&ba).add(&ab.scale(C::new(sgn, 0.0)));
        out
    }

    /// Curvature of the background metric: F₀ plus the β contributions
    /// ∂β - ∂̄β* - β∧β* - β*∧β (the (1,1) part; the model class keeps the
    /// other bidegrees zero).
    pub fn curvature_background(&self) -> BasicField {
        let bstar = self.beta.adjoint();
        let (del_b, _) = self.beta.dolbeault();
        let (_, dbar_bs) = bstar.dolbeault();
        let bbs = self.beta.wedge(&bstar).expect("wedge");
        let bsb = bstar.wedge(&self.beta).expect("wedge");
        self.f_diag
            .add(&del_b)
            .sub(&dbar_bs)
            .sub(&bbs)
            .sub(&bsb)
    }

    /// Curvature of the metric h = h₀·e^s (s Hermitian, block-structured):
    /// F_h = F_{h₀} + ∂̄_E (e^{-s} ∂_E e^s).
    pub fn curvature(&self, s: &BasicField) -> BasicField {
        assert_eq!((s.p, s.q, s.rank), (0, 0, self.rank()));
        let sg = s.to_grid();
        let mut f = sg.map_hermitian(f64::exp).to_modes();
        let mut finv = sg.map_hermitian(|x| (-x).exp()).to_modes();
        self.project_blocks(&mut f);
        self.project_blocks(&mut finv);
        let d0f = self.del_e(&f);
        let gamma = finv.wedge(&d0f).expect("wedge");
        self.curvature_background().add(&self.dbar_e(&gamma))
    }

    /// Mean curvature K(h) = iΛ F_h, a Hermitian (0,0) endomorphism field.
    pub fn mean_curvature(&self, s: &BasicField) -> BasicField {
        self.curvature(s).contract().scale(C::new(0.0, 1.0))
    }

    /// Mean curvature of the background metric.
    pub fn k0(&self) -> BasicField {
        self.curvature_background()
            .contract()
            .scale(C::new(0.0, 1.0))
    }

    /// deg E = (i/2π) ∫ tr F ∧ ω^{n-1} ∧ χ.
    pub fn degree(&self) -> f64 {
        degree_of_curvature(&self.curvature_background())
    }

    pub fn slope(&self) -> f64 {
        self.degree() / self.rank() as f64
    }

    /// The Einstein constant γ with iΛF = γ·Id: γ = 2πμ / ((n-1)!·Vol).
    pub fn einstein_factor(&self) -> f64 {
        let n = self.model.n;
        let fact: f64 = (1..n).product::<usize>() as f64;
        2.0 * std::f64::consts::PI * self.slope() / (fact * self.model.volume)
    }

    /// First Chern form c₁ = (i/2π) tr F at the background metric.
    pub fn chern_c1(&self) -> BasicField {
        self.curvature_background()
            .trace()
            .scale(C::new(0.0, 1.0 / (2.0 * std::f64::consts::PI)))
    }

    /// Second Chern form c₂ = -(1/8π²)((tr F)² - tr(F∧F)).
    pub fn chern_c2(&self) -> BasicField {
        let f = self.curvature_background();
        let tr = f.trace();
        let tr2 = tr.wedge(&tr).expect("wedge");
        let ff = f.wedge(&f).expect("wedge").trace();
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        tr2.sub(&ff).scale(C::new(-1.0 / (8.0 * pi2), 0.0))
    }

    /// ∫ (2r·c₂ - (r-1)·c₁²) ∧ ω^{n-2} ∧ χ — nonnegative for semistable
    /// bundles, zero iff projectively flat. Needs n ≥ 2.
    pub fn bogomolov_integral(&self) -> Result<f64, FieldError> {
        let n = self.model.n;
        if n < 2 {
            return Err(FieldError::DegreeOverflow);
        }
        let r = self.rank() as f64;
        let c1 = self.chern_c1();
        let c2 = self.chern_c2();
        let c1sq = c1.wedge(&c1)?;
        let combo = c2.scale(C::new(2.0 * r, 0.0)).sub(&c1sq.scale(C::new(r - 1.0, 0.0)));
        let wpow = BasicField::omega_pow(&self.model, n - 2);
        let v = combo.wedge(&wpow)?.integrate()?;
        Ok(v.re)
    }

    /// Dual bundle: negated Chern data, β ↦ -βᵀ.
    pub fn dual(&self) -> BundleSpec {
        let factors = self
            .factors
            .iter()
            .map(|f| LineFactor {
                c: f.c.iter().map(|x| -x).collect(),
                twist: f
                    .twist
                    .as_ref()
                    .map(|t| t.iter().map(|q| -*q).collect()),
            })
            .collect();
        let ext = self
            .ext
            .iter()
            .map(|e| ExtClass {
                row: e.col,
                col: e.row,
                modes: e
                    .modes
                    .iter()
                    .map(|(k, v)| (k.clone(), v.iter().map(|c| -c).collect()))
                    .collect(),
            })
            .collect();
        BundleSpec::new(&self.model, factors, ext).expect("dual of a valid bundle is valid")
    }

    /// Tensor with a line factor: shifts every Chern vector and twist.
    pub fn tensor_line(&self, l: &LineFactor) -> BundleSpec {
        let factors = self
            .factors
            .iter()
            .map(|f| LineFactor {
                c: f.c.iter().zip(l.c.iter()).map(|(a, b)| a + b).collect(),
                twist: match (&f.twist, &l.twist) {
                    (None, None) => None,
                    (a, b) => {
                        let za = vec![Ratio::from_int(0); 2 * self.model.n];
                        let ta = a.clone().unwrap_or_else(|| za.clone());
                        let tb = b.clone().unwrap_or(za);
                        Some(ta.iter().zip(tb.iter()).map(|(x, y)| *x + *y).collect())
                    }
                },
            })
            .collect();
        BundleSpec::new(&self.model, factors, self.ext.clone()).expect("valid tensor")
    }

    pub fn direct_sum(&self, other: &BundleSpec) -> BundleSpec {
        assert!(Arc::ptr_eq(&self.model, &other.model));
        let mut factors = self.factors.clone();
        factors.extend(other.factors.clone());
        let mut ext = self.ext.clone();
        let shift = self.rank();
        ext.extend(other.ext.iter().map(|e| ExtClass {
            row: e.row + shift,
            col: e.col + shift,
            modes: e.modes.clone(),
        }));
        BundleSpec::new(&self.model, factors, ext).expect("valid direct sum")
    }

    /// Degree of the subsheaf cut out by a projection-valued section π,
    /// by Gauss-Codazzi: deg = (i/2π) ∫ tr(πFπ + ∂̄_Eπ ∧ (∂̄_Eπ)*) ∧ ω^{n-1} ∧ χ
    /// (the second term subtracts the second-fundamental-form contribution).
    pub fn subbundle_degree(&self, pi: &BasicField) -> f64 {
        let f = self.curvature_background();
        let pfp = pi.wedge(&f).expect("wedge").wedge(pi).expect("wedge");
        let a = self.dbar_e(pi);
        let aas = a.wedge(&a.adjoint()).expect("wedge");
        let total = pfp.add(&aas).trace();
        let wpow = BasicField::omega_pow(&self.model, self.model.n - 1);
        let v = total
            .wedge(&wpow)
            .expect("wedge")
            .integrate()
            .expect("top degree");
        (v * C::new(0.0, 1.0 / (2.0 * std::f64::consts::PI))).re
    }

    /// Replace β by u⁻¹βu for a constant gauge transformation. Only valid
    /// when u respects the block structure (e.g. all factors equal).
    pub fn conjugated(&self, u: &DMatrix<C>) -> BundleSpec {
        let r = self.rank();
        assert_eq!((u.nrows(), u.ncols()), (r, r));
        let uinv = u.clone().try_inverse().expect("gauge must be invertible");
        let mask = self.block_mask();
        for i in 0..r {
            for j in 0..r {
                if !mask[i * r + j] {
                    assert!(
                        u[(i, j)].norm() < 1e-14,
                        "gauge transformation must preserve the block structure"
                    );
                }
            }
        }
        let ufield = BasicField::constant(&self.model, u);
        let uinvfield = BasicField::constant(&self.model, &uinv);
        let beta = uinvfield
            .wedge(&self.beta)
            .and_then(|x| x.wedge(&ufield))
            .expect("wedge");
        BundleSpec {
            model: self.model.clone(),
            factors: self.factors.clone(),
            ext: self.ext.clone(),
            beta,
            f_diag: self.f_diag.clone(),
        }
    }
}

/// deg = (i/2π) ∫ tr F ∧ ω^{n-1} ∧ χ for any endomorphism-valued curvature.
pub fn degree_of_curvature(f: &BasicField) -> f64 {
    let n = f.model.n;
    let tr = f.trace();
    let wpow = BasicField::omega_pow(&f.model, n - 1);
    let v = tr.wedge(&wpow).expect("wedge").integrate().expect("top degree");
    (v * C::new(0.0, 1.0 / (2.0 * std::f64::consts::PI))).re
}
