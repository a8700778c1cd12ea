//! Instanton-type residuals on the full foliated torus.
//!
//! The transverse calculus only sees the 2n transverse coordinates; the
//! instanton equation *F = -Ω∧F lives on all d of them, with the Hodge star
//! of the product metric diag(g_t, g_leaf) (g_leaf scaled so the leaf volume
//! is the declared one) and Ω = ω^{n-2}/(n-2)! ∧ χ. This module carries a
//! small real-coframe mode representation for exactly that purpose, plus the
//! Yang-Mills residual d_A(*F).

use crate::bundle::BundleSpec;
use crate::exterior::{wedge_sign, ConstForm, Mask, RealMetricAlgebra, C};
use crate::field::BasicField;
use crate::model::FoliatedTorusModel;
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::sync::Arc;

const ZC: C = C::new(0.0, 0.0);

/// Endomorphism-valued form over the full d real coframe directions, with
/// transverse Fourier modes. Coefficients per coframe mask are laid out
/// `[(i*r + j)*box_len + mode]`.
pub struct RealModeForm {
    pub model: Arc<FoliatedTorusModel>,
    pub degree: usize,
    pub rank: usize,
    pub terms: BTreeMap<Mask, Vec<C>>,
}

impl RealModeForm {
    pub fn zero(model: &Arc<FoliatedTorusModel>, degree: usize, rank: usize) -> Self {
        RealModeForm {
            model: model.clone(),
            degree,
            rank,
            terms: BTreeMap::new(),
        }
    }

    fn arr_len(&self) -> usize {
        self.rank * self.rank * self.model.modes.box_len
    }

    fn entry(&mut self, mask: Mask) -> &mut Vec<C> {
        let len = self.arr_len();
        self.terms.entry(mask).or_insert_with(|| vec![ZC; len])
    }

    /// Expand a transverse (p,q)-field into the real coframe.
    pub fn from_basic(f: &BasicField) -> Self {
        let model = f.model.clone();
        let n = model.n;
        let bl = model.modes.box_len;
        let r = f.rank;
        let mut out = RealModeForm::zero(&model, f.p + f.q, r);
        for comp in 0..f.n_comps() {
            let b = model.algebra.bases[f.p][f.q][comp];
            let real = crate::exterior::cbasis_to_real(b, n);
            for (mask, coeff) in &real.terms {
                let arr = out.entry(*mask);
                for i in 0..r {
                    for j in 0..r {
                        let src = f.slice(comp, i, j);
                        let base = (i * r + j) * bl;
                        for bx in 0..bl {
                            arr[base + bx] += coeff * src[bx];
                        }
                    }
                }
            }
        }
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| v.iter().any(|c| c.norm_sqr() != 0.0));
    }

    pub fn add(&self, o: &RealModeForm) -> RealModeForm {
        assert_eq!((self.degree, self.rank), (o.degree, o.rank));
        let mut out = RealModeForm {
            model: self.model.clone(),
            degree: self.degree,
            rank: self.rank,
            terms: self.terms.clone(),
        };
        for (mask, arr) in &o.terms {
            let e = out.entry(*mask);
            for (a, b) in e.iter_mut().zip(arr.iter()) {
                *a += b;
            }
        }
        out.prune();
        out
    }

    pub fn scale(&self, c: C) -> RealModeForm {
        let mut out = RealModeForm {
            model: self.model.clone(),
            degree: self.degree,
            rank: self.rank,
            terms: self.terms.clone(),
        };
        for arr in out.terms.values_mut() {
            for v in arr.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Hodge star in the full metric algebra.
    pub fn star(&self, alg: &RealMetricAlgebra) -> RealModeForm {
        let d = self.model.d;
        let mut out = RealModeForm::zero(&self.model, d - self.degree, self.rank);
        let len = self.arr_len();
        for (mask, arr) in &self.terms {
            let st = alg.star_form(&ConstForm::basis(*mask));
            for (tmask, coeff) in &st.terms {
                let e = out.entry(*tmask);
                for idx in 0..len {
                    e[idx] += coeff * arr[idx];
                }
            }
        }
        out.prune();
        out
    }

    /// Wedge by a constant form from the left.
    pub fn wedge_const_left(&self, c: &ConstForm, c_degree: usize) -> RealModeForm {
        let mut out = RealModeForm::zero(&self.model, self.degree + c_degree, self.rank);
        let len = self.arr_len();
        for (cm, cv) in &c.terms {
            for (fm, arr) in &self.terms {
                if let Some(s) = wedge_sign(*cm, *fm) {
                    let e = out.entry(cm | fm);
                    let factor = cv * s;
                    for idx in 0..len {
                        e[idx] += factor * arr[idx];
                    }
                }
            }
        }
        out.prune();
        out
    }

    /// Exterior derivative: mode-wise, only transverse directions carry
    /// frequencies.
    pub fn d(&self) -> RealModeForm {
        let model = &self.model;
        let e = 2 * model.n;
        let bl = model.modes.box_len;
        let r = self.rank;
        let two_pi_i = C::new(0.0, 2.0 * std::f64::consts::PI);
        let mut out = RealModeForm::zero(model, self.degree + 1, r);
        for (mask, arr) in &self.terms {
            for j in 0..e {
                let jm: Mask = 1 << j;
                if let Some(s) = wedge_sign(jm, *mask) {
                    let ent = out.entry(jm | mask);
                    for bx in 0..bl {
                        let kap_j = {
                            // coordinate j frequency of this box index
                            let kap = model.modes.kappa(bx);
                            kap[j] as f64
                        };
                        if kap_j == 0.0 {
                            continue;
                        }
                        let factor = two_pi_i * kap_j * s;
                        for i in 0..r {
                            for l in 0..r {
                                let base = (i * r + l) * bl;
                                ent[base + bx] += factor * arr[base + bx];
                            }
                        }
                    }
                }
            }
        }
        out.prune();
        out
    }

    /// Wedge with matrix multiplication, through the dealiased grid.
    pub fn wedge(&self, o: &RealModeForm) -> RealModeForm {
        assert_eq!(self.rank, o.rank);
        let model = &self.model;
        let r = self.rank;
        let bl = model.modes.box_len;
        let gl = model.grid.grid_len;
        let to_grids = |f: &RealModeForm| -> BTreeMap<Mask, Vec<C>> {
            let mut m = BTreeMap::new();
            for (mask, arr) in &f.terms {
                let mut g = vec![ZC; r * r * gl];
                for i in 0..r {
                    for j in 0..r {
                        let line = model.grid.to_grid(&arr[(i * r + j) * bl..(i * r + j + 1) * bl]);
                        for (gx, v) in line.iter().enumerate() {
                            g[(i * r + j) * gl + gx] = *v;
                        }
                    }
                }
                m.insert(*mask, g);
            }
            m
        };
        let ga = to_grids(self);
        let gb = to_grids(o);
        let mut acc: BTreeMap<Mask, Vec<C>> = BTreeMap::new();
        for (ma, arra) in &ga {
            for (mb, arrb) in &gb {
                if let Some(s) = wedge_sign(*ma, *mb) {
                    let e = acc
                        .entry(ma | mb)
                        .or_insert_with(|| vec![ZC; r * r * gl]);
                    for i in 0..r {
                        for l in 0..r {
                            for j in 0..r {
                                let a = &arra[(i * r + j) * gl..(i * r + j + 1) * gl];
                                let b = &arrb[(j * r + l) * gl..(j * r + l + 1) * gl];
                                let o = &mut e[(i * r + l) * gl..(i * r + l + 1) * gl];
                                for gx in 0..gl {
                                    o[gx] += s * a[gx] * b[gx];
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut out = RealModeForm::zero(model, self.degree + o.degree, r);
        for (mask, g) in acc {
            let ent = out.entry(mask);
            for i in 0..r {
                for j in 0..r {
                    let modes = model.grid.from_grid(&g[(i * r + j) * gl..(i * r + j + 1) * gl], &model.modes);
                    ent[(i * r + j) * bl..(i * r + j + 1) * bl].copy_from_slice(&modes);
                }
            }
        }
        out.prune();
        out
    }

    /// L² norm with the full-metric Gram pairing (Parseval).
    pub fn l2_norm(&self, alg: &RealMetricAlgebra) -> f64 {
        let mut acc = 0.0f64;
        let len = self.arr_len();
        for (ma, arra) in &self.terms {
            for (mb, arrb) in &self.terms {
                let g = alg.inner(&ConstForm::basis(*ma), &ConstForm::basis(*mb));
                if g.norm_sqr() == 0.0 {
                    continue;
                }
                let mut s = ZC;
                for idx in 0..len {
                    s += arra[idx] * arrb[idx].conj();
                }
                acc += (g * s).re;
            }
        }
        (acc * self.model.volume).max(0.0).sqrt()
    }
}

/// The full product-metric exterior algebra: transverse block g_t, leaf block
/// scaled so the leaf volume comes out right.
pub fn full_metric_algebra(model: &FoliatedTorusModel) -> RealMetricAlgebra {
    let d = model.d;
    let tn = 2 * model.n;
    let m = model.m;
    let mut g = DMatrix::<f64>::identity(d, d);
    for i in 0..tn {
        for j in 0..tn {
            g[(i, j)] = model.g_t[(i, j)];
        }
    }
    let leaf_scale = model.leaf_volume.powf(2.0 / m as f64);
    for i in tn..d {
        g[(i, i)] = leaf_scale;
    }
    RealMetricAlgebra::new(&g)
}

/// Ω = ω^{n-2}/(n-2)! ∧ χ as a constant real form (χ is the leafwise volume
/// form, integrating to the declared leaf volume).
pub fn omega_instanton_form(model: &FoliatedTorusModel) -> ConstForm {
    let n = model.n;
    assert!(n >= 2, "the instanton form needs n ≥ 2");
    // ω in the real transverse coframe: ω_{ij} = (Jᵀ g)_{ij}
    let tn = 2 * n;
    let mut jmat = DMatrix::<f64>::zeros(tn, tn);
    for a in 0..n {
        jmat[(2 * a + 1, 2 * a)] = 1.0;
        jmat[(2 * a, 2 * a + 1)] = -1.0;
    }
    let omega_mat = jmat.transpose() * &model.g_t;
    let mut omega = ConstForm::zero();
    for i in 0..tn {
        for j in (i + 1)..tn {
            let v = omega_mat[(i, j)];
            if v != 0.0 {
                omega.add_term((1 << i) | (1 << j), C::new(v, 0.0));
            }
        }
    }
    let fact: f64 = (1..=(n - 2)).product::<usize>().max(1) as f64;
    let mut w = omega.wedge_pow(n - 2).scale(C::new(1.0 / fact, 0.0));
    // χ = leaf_volume · dx^{2n} ∧ … ∧ dx^{d-1}
    let mut chi_mask: Mask = 0;
    for j in tn..model.d {
        chi_mask |= 1 << j;
    }
    let mut chi = ConstForm::zero();
    chi.add_term(chi_mask, C::new(model.leaf_volume, 0.0));
    w = w.wedge(&chi);
    w
}

/// ‖*F + Ω∧F‖_{L²} at the metric h₀e^s.
pub fn instanton_residual(bundle: &BundleSpec, s: &BasicField) -> f64 {
    let model = &bundle.model;
    let alg = full_metric_algebra(model);
    let omega = omega_instanton_form(model);
    let f = RealModeForm::from_basic(&bundle.curvature(s));
    let lhs = f.star(&alg).add(&f.wedge_const_left(&omega, model.d - 2 - 2));
    lhs.l2_norm(&alg)
}

/// ‖d_A(*F)‖_{L²}: the Yang-Mills residual. The diagonal background
/// connection acts trivially on representable endomorphism blocks, so only
/// the representable connection change a = β - β* + f⁻¹∂_E f contributes a
/// commutator term.
pub fn yang_mills_residual(bundle: &BundleSpec, s: &BasicField) -> f64 {
    let model = &bundle.model;
    let alg = full_metric_algebra(model);
    let f2 = bundle.curvature(s);
    let g = RealModeForm::from_basic(&f2).star(&alg); // (d-2)-form
    let dg = g.d();
    // connection change
    let sg = s.to_grid();
    let mut fpos = sg.map_hermitian(f64::exp).to_modes();
    let mut fneg = sg.map_hermitian(|x| (-x).exp()).to_modes();
    bundle.project_blocks(&mut fpos);
    bundle.project_blocks(&mut fneg);
    let gamma = fneg.wedge(&bundle.del_e(&fpos)).expect("wedge");
    let a = RealModeForm::from_basic(&bundle.beta)
        .add(&RealModeForm::from_basic(&bundle.beta.adjoint()).scale(C::new(-1.0, 0.0)))
        .add(&RealModeForm::from_basic(&gamma));
    // graded commutator of a 1-form with the (d-2)-form star-curvature
    let sign = if (model.d - 2) % 2 == 0 { -1.0 } else { 1.0 };
    let comm = a.wedge(&g).add(&g.wedge(&a).scale(C::new(-sign, 0.0)));
    dg.add(&comm).l2_norm(&alg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::LineFactor;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t4s1(cutoff: usize) -> Arc<FoliatedTorusModel> {
        FoliatedTorusModel::product(2, 1, 1.0, cutoff)
    }

    fn bundle2(m: &Arc<FoliatedTorusModel>, c1: [i64; 2], c2: [i64; 2]) -> BundleSpec {
        BundleSpec::new(
            m,
            vec![LineFactor::new(c1.to_vec()), LineFactor::new(c2.to_vec())],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn exterior_d_squares_to_zero() {
        let m = t4s1(2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = BasicField::random(&m, 1, 0, 2, &mut rng, 1.0, 0.4, false);
        let rf = RealModeForm::from_basic(&f);
        let dd = rf.d().d();
        let alg = full_metric_algebra(&m);
        assert!(dd.l2_norm(&alg) < 1e-10);
    }

    #[test]
    fn trace_free_transverse_he_is_instanton() {
        // L((1,-1)) ⊕ L((-1,1)): tr F = 0 and iΛF = 0, curvature constant —
        // the instanton equation holds identically and the connection is
        // Yang-Mills
        let m = t4s1(2);
        let e = bundle2(&m, [1, -1], [-1, 1]);
        assert_relative_eq!(e.degree(), 0.0, epsilon = 1e-12);
        let z = BasicField::zero(&m, 0, 0, 2);
        assert!(e.k0().linf_coeff_norm() < 1e-10);
        assert!(instanton_residual(&e, &z) < 1e-12);
        assert!(yang_mills_residual(&e, &z) < 1e-12);
    }

    #[test]
    fn trace_part_breaks_the_instanton_equation() {
        // L((1,0)) ⊕ L((0,1)) is transverse Hermitian-Einstein but has
        // tr F ≠ 0: the residual is exactly ‖2(*F-part)‖ = 4π
        let m = t4s1(2);
        let e = bundle2(&m, [1, 0], [0, 1]);
        let z = BasicField::zero(&m, 0, 0, 2);
        let res = instanton_residual(&e, &z);
        assert_relative_eq!(res, 4.0 * std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn non_primitive_curvature_fails_too() {
        // iΛF = diag(4π, 0): neither primitive nor Einstein
        let m = t4s1(2);
        let e = bundle2(&m, [2, 0], [0, 0]);
        let z = BasicField::zero(&m, 0, 0, 2);
        assert!(instanton_residual(&e, &z) > 1.0);
    }

    #[test]
    fn leaf_volume_scaling() {
        // doubling the leaf volume scales ‖·‖² linearly and χ linearly;
        // the instanton identity must survive the rescaling
        let m = FoliatedTorusModel::new(2, 1, None, 2.0, None, 2).unwrap();
        let e = bundle2(&m, [1, -1], [-1, 1]);
        let z = BasicField::zero(&m, 0, 0, 2);
        assert!(instanton_residual(&e, &z) < 1e-12);
    }
}
