//! Constant-coefficient exterior algebra on the coordinate coframe of a flat
//! torus.
//!
//! Basis covectors dx^0..dx^{d-1} are indexed by bits of a `u32` mask, so a
//! degree-p basis form is a mask with p bits set. Everything here is a small
//! dense linear-algebra precomputation: wedge structure constants, Gram
//! matrices induced by a constant metric, and the Hodge star. The complex
//! (p,q) coframe dz^a = dx^{2a} + i dx^{2a+1} is expanded over the real basis
//! once and reused by the field calculus.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

pub type Mask = u32;
pub type C = Complex64;

/// Sign of e_a ∧ e_b as a reordering of e_{a∪b}; None if the masks overlap.
pub fn wedge_sign(a: Mask, b: Mask) -> Option<f64> {
    if a & b != 0 {
        return None;
    }
    // count inversions: pairs (i in a, j in b) with i > j
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
}

/// All masks of the given degree over d slots, in increasing numeric order.
pub fn masks_of_degree(d: usize, p: usize) -> Vec<Mask> {
    (0u32..(1 << d))
        .filter(|m| m.count_ones() as usize == p)
        .collect()
}

/// A constant form with complex coefficients over real-coframe basis masks.
/// Not necessarily homogeneous; degrees mix freely under wedge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstForm {
    pub terms: BTreeMap<Mask, C>,
}

impl ConstForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(m: Mask) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(m, C::new(1.0, 0.0));
        ConstForm { terms }
    }

    pub fn scalar(c: C) -> Self {
        let mut terms = BTreeMap::new();
        if c.norm_sqr() != 0.0 {
            terms.insert(0, c);
        }
        ConstForm { terms }
    }

    pub fn add_term(&mut self, m: Mask, c: C) {
        let e = self.terms.entry(m).or_insert(C::new(0.0, 0.0));
        *e += c;
        if e.norm_sqr() == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, c: C) -> Self {
        let mut out = ConstForm::zero();
        for (m, v) in &self.terms {
            out.add_term(*m, v * c);
        }
        out
    }

    pub fn add(&self, o: &ConstForm) -> Self {
        let mut out = self.clone();
        for (m, v) in &o.terms {
            out.add_term(*m, *v);
        }
        out
    }

    pub fn wedge(&self, o: &ConstForm) -> Self {
        let mut out = ConstForm::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                if let Some(s) = wedge_sign(*ma, *mb) {
                    out.add_term(ma | mb, ca * cb * s);
                }
            }
        }
        out
    }

    pub fn wedge_pow(&self, k: usize) -> Self {
        let mut out = ConstForm::scalar(C::new(1.0, 0.0));
        for _ in 0..k {
            out = out.wedge(self);
        }
        out
    }

    pub fn coeff(&self, m: Mask) -> C {
        self.terms.get(&m).copied().unwrap_or(C::new(0.0, 0.0))
    }
}

/// Gram entry ⟨e_A, e_B⟩ for real basis p-forms: det of the g⁻¹ submatrix.
fn gram_real_entry(g_inv: &DMatrix<f64>, a: Mask, b: Mask) -> f64 {
    let ai: Vec<usize> = (0..32).filter(|i| a & (1 << i) != 0).collect();
    let bi: Vec<usize> = (0..32).filter(|i| b & (1 << i) != 0).collect();
    if ai.len() != bi.len() {
        return 0.0;
    }
    let p = ai.len();
    if p == 0 {
        return 1.0;
    }
    let sub = DMatrix::from_fn(p, p, |r, c| g_inv[(ai[r], bi[c])]);
    sub.determinant()
}

/// Constant-metric data for the full d-dimensional exterior algebra: Gram
/// matrices per degree and the Hodge star.
pub struct RealMetricAlgebra {
    pub d: usize,
    pub sqrt_det_g: f64,
    /// per degree p: basis masks in order
    pub masks: Vec<Vec<Mask>>,
    /// per degree p: index of a mask within `masks[p]`
    pub mask_index: Vec<BTreeMap<Mask, usize>>,
    /// per degree p: real Gram matrix G[i][j] = ⟨e_i, e_j⟩
    pub gram: Vec<DMatrix<f64>>,
    /// per degree p: star of basis element i as a ConstForm of degree d-p
    pub star: Vec<Vec<ConstForm>>,
}

impl RealMetricAlgebra {
    pub fn new(g: &DMatrix<f64>) -> Self {
        let d = g.nrows();
        assert!(d <= 16, "dimension too large for mask representation");
        let g_inv = g.clone().try_inverse().expect("metric not invertible");
        let det_g = g.determinant();
        assert!(det_g > 0.0, "metric not positive definite");
        let sqrt_det_g = det_g.sqrt();
        let full: Mask = (1u32 << d) - 1;

        let mut masks = Vec::with_capacity(d + 1);
        let mut mask_index = Vec::with_capacity(d + 1);
        let mut gram = Vec::with_capacity(d + 1);
        let mut star = Vec::with_capacity(d + 1);
        for p in 0..=d {
            let ms = masks_of_degree(d, p);
            let idx: BTreeMap<Mask, usize> =
                ms.iter().enumerate().map(|(i, m)| (*m, i)).collect();
            let np = ms.len();
            let gr = DMatrix::from_fn(np, np, |i, j| gram_real_entry(&g_inv, ms[i], ms[j]));
            // *e_A = Σ_C ⟨e_C, e_A⟩ √det(g) sgn(C, C̄) e_{C̄}
            let mut st = Vec::with_capacity(np);
            for (ia, _) in ms.iter().enumerate() {
                let mut out = ConstForm::zero();
                for (ic, mc) in ms.iter().enumerate() {
                    let comp = full & !mc;
                    if let Some(s) = wedge_sign(*mc, comp) {
                        let coeff = gr[(ic, ia)] * sqrt_det_g * s;
                        if coeff != 0.0 {
                            out.add_term(comp, C::new(coeff, 0.0));
                        }
                    }
                }
                st.push(out);
            }
            masks.push(ms);
            mask_index.push(idx);
            gram.push(gr);
            star.push(st);
        }
        RealMetricAlgebra {
            d,
            sqrt_det_g,
            masks,
            mask_index,
            gram,
            star,
        }
    }

    /// Hodge star of a (possibly inhomogeneous) constant form, extended
    /// C-linearly.
    pub fn star_form(&self, a: &ConstForm) -> ConstForm {
        let mut out = ConstForm::zero();
        for (m, c) in &a.terms {
            let p = m.count_ones() as usize;
            let i = self.mask_index[p][m];
            out = out.add(&self.star[p][i].scale(*c));
        }
        out
    }

    /// Hermitian inner product of two homogeneous-degree constant forms
    /// (conjugation on the second argument).
    pub fn inner(&self, a: &ConstForm, b: &ConstForm) -> C {
        let mut out = C::new(0.0, 0.0);
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                let pa = ma.count_ones() as usize;
                if pa != mb.count_ones() as usize {
                    continue;
                }
                let i = self.mask_index[pa][ma];
                let j = self.mask_index[pa][mb];
                out += ca * cb.conj() * self.gram[pa][(i, j)];
            }
        }
        out
    }
}

/// A complex (p,q) coframe basis element dz^I ∧ dz̄^J, with I, J masks over n
/// holomorphic slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CBasis {
    pub i_mask: Mask,
    pub j_mask: Mask,
}

/// Real-coframe expansion of dz^I ∧ dz̄^J with dz^a = dx^{2a} + i dx^{2a+1}.
pub fn cbasis_to_real(b: CBasis, n: usize) -> ConstForm {
    let mut out = ConstForm::scalar(C::new(1.0, 0.0));
    for a in 0..n {
        if b.i_mask & (1 << a) != 0 {
            let mut dz = ConstForm::basis(1 << (2 * a));
            dz.add_term(1 << (2 * a + 1), C::new(0.0, 1.0));
            out = out.wedge(&dz);
        }
    }
    for a in 0..n {
        if b.j_mask & (1 << a) != 0 {
            let mut dzb = ConstForm::basis(1 << (2 * a));
            dzb.add_term(1 << (2 * a + 1), C::new(0.0, -1.0));
            out = out.wedge(&dzb);
        }
    }
    out
}

/// Wedge of two complex basis elements: sign and resulting element, or None
/// if an index repeats. The sign accounts for moving dz factors of the second
/// element past dz̄ factors of the first.
pub fn cbasis_wedge(a: CBasis, b: CBasis) -> Option<(f64, CBasis)> {
    if a.i_mask & b.i_mask != 0 || a.j_mask & b.j_mask != 0 {
        return None;
    }
    let qa = a.j_mask.count_ones();
    let pb = b.i_mask.count_ones();
    let s_cross = if (qa * pb) % 2 == 0 { 1.0 } else { -1.0 };
    let s_i = wedge_sign(a.i_mask, b.i_mask)?;
    let s_j = wedge_sign(a.j_mask, b.j_mask)?;
    Some((
        s_cross * s_i * s_j,
        CBasis {
            i_mask: a.i_mask | b.i_mask,
            j_mask: a.j_mask | b.j_mask,
        },
    ))
}

/// Decompose a constant real-coframe form of homogeneous total degree r over
/// the transverse coordinates into complex (p,q) components: returns, for
/// each (p,q) with p+q=r, the coefficient vector over `bases[(p,q)]` order.
/// Implemented by solving the change-of-basis linear system once per call;
/// callers cache.
pub fn real_to_cbasis(
    form: &ConstForm,
    r: usize,
    n: usize,
    bases_pq: &[(usize, usize, Vec<CBasis>)],
) -> Vec<(usize, usize, Vec<C>)> {
    // assemble all complex basis elements of total degree r and their real
    // expansions; solve for coefficients over real masks
    let real_masks = masks_of_degree(2 * n, r);
    let idx: BTreeMap<Mask, usize> = real_masks.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut cols: Vec<DVector<C>> = Vec::new();
    let mut col_owner: Vec<(usize, usize)> = Vec::new(); // (which pq-block, index within)
    for (bi, (_, _, basis)) in bases_pq.iter().enumerate() {
        for (k, cb) in basis.iter().enumerate() {
            let rf = cbasis_to_real(*cb, n);
            let mut v = DVector::from_element(real_masks.len(), C::new(0.0, 0.0));
            for (m, c) in &rf.terms {
                v[idx[m]] = *c;
            }
            cols.push(v);
            col_owner.push((bi, k));
        }
    }
    let ncols = cols.len();
    assert_eq!(ncols, real_masks.len(), "complex basis must span degree {r}");
    let mat = DMatrix::from_fn(real_masks.len(), ncols, |i, j| cols[j][i]);
    let mut rhs = DVector::from_element(real_masks.len(), C::new(0.0, 0.0));
    for (m, c) in &form.terms {
        assert_eq!(m.count_ones() as usize, r, "inhomogeneous form");
        rhs[idx[m]] = *c;
    }
    let sol = mat
        .lu()
        .solve(&rhs)
        .expect("complex coframe change of basis is invertible");
    let mut out: Vec<(usize, usize, Vec<C>)> = bases_pq
        .iter()
        .map(|(p, q, basis)| (*p, *q, vec![C::new(0.0, 0.0); basis.len()]))
        .collect();
    for (j, (bi, k)) in col_owner.iter().enumerate() {
        out[*bi].2[*k] = sol[j];
    }
    out
}
