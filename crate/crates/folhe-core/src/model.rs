//! The flat foliated-torus geometry and everything precomputable from it:
//! the complex coframe algebra (Gram matrices, Lefschetz/contraction, basic
//! Hodge star), the admissible Fourier-mode set, and the collocation grid
//! with its FFT plans.
//!
//! Model class: coordinates x ∈ [0,1)^d on the torus with the first 2n
//! coordinates transverse and the last m along the leaves; the complex
//! structure is the standard one pairing transverse coordinates (z^a =
//! x^{2a} + i x^{2a+1}); the transverse metric g is an arbitrary constant
//! J-compatible SPD matrix; the leafwise volume form integrates to
//! `leaf_volume`. The foliation itself enters only through its declared
//! integer dependency lattice: a mode k ∈ Z^d is admissible (i.e. the
//! function e^{2πik·x} is invariant along the leaves) iff k annihilates every
//! generator. Irrational slopes are never compared in floating point.

use crate::exact::integer_kernel;
use crate::exterior::{
    cbasis_to_real, cbasis_wedge, masks_of_degree, real_to_cbasis, CBasis, ConstForm,
    RealMetricAlgebra, C,
};
use crate::par;
use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: d must equal 2n + m")]
    DimensionMismatch,
    #[error("transverse metric must be symmetric positive definite")]
    MetricNotSpd,
    #[error("transverse metric must commute with the complex structure")]
    MetricNotCompatible,
    #[error("dependency lattice admits modes with leaf components; the declared foliation is not transverse to the coordinate leaves")]
    LeafModesAdmissible,
    #[error("leaf volume must be positive")]
    BadLeafVolume,
    #[error("cutoff must be at least 1")]
    BadCutoff,
}

/// Precomputed linear algebra of the complex (p,q) coframe.
pub struct FormAlgebra {
    pub n: usize,
    /// bases[p][q]: ordered basis of Λ^{p,q}
    pub bases: Vec<Vec<Vec<CBasis>>>,
    index: Vec<Vec<BTreeMap<CBasis, usize>>>,
    /// Hermitian Gram matrices: gram[p][q][(i,j)] = ⟨e_i, e_j⟩
    pub gram: Vec<Vec<DMatrix<C>>>,
    /// Lefschetz: (p,q) -> (p+1,q+1) coefficient matrix (empty if out of range)
    pub lef: Vec<Vec<DMatrix<C>>>,
    /// Contraction (adjoint of Lefschetz): (p,q) -> (p-1,q-1)
    pub contract: Vec<Vec<DMatrix<C>>>,
    /// Basic (transverse) Hodge star: (p,q) -> (n-q,n-p)
    pub star_b: Vec<Vec<DMatrix<C>>>,
    /// Complex conjugation (p,q) -> (q,p): index permutation with sign
    pub conj_map: Vec<Vec<Vec<(usize, f64)>>>,
    /// ω in the (1,1) basis
    pub omega_c: DVector<C>,
    /// ω^k/1 in the (k,k) basis, k = 0..=n
    pub omega_pow: Vec<DVector<C>>,
    /// dz^{1..n} ∧ dz̄^{1..n} = top_factor · dx^0∧..∧dx^{2n-1}
    pub top_factor: C,
    /// transverse real metric algebra
    pub real_t: RealMetricAlgebra,
}

impl FormAlgebra {
    pub fn dim(&self, p: usize, q: usize) -> usize {
        self.bases[p][q].len()
    }

    pub fn basis_index(&self, p: usize, q: usize, b: CBasis) -> usize {
        self.index[p][q][&b]
    }

    fn new(n: usize, g_t: &DMatrix<f64>) -> Result<Self, ModelError> {
        let real_t = RealMetricAlgebra::new(g_t);
        let mut bases = Vec::with_capacity(n + 1);
        let mut index = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut row = Vec::with_capacity(n + 1);
            let mut irow = Vec::with_capacity(n + 1);
            for q in 0..=n {
                let mut b: Vec<CBasis> = Vec::new();
                for im in masks_of_degree(n, p) {
                    for jm in masks_of_degree(n, q) {
                        b.push(CBasis {
                            i_mask: im,
                            j_mask: jm,
                        });
                    }
                }
                b.sort();
                let idx: BTreeMap<CBasis, usize> =
                    b.iter().enumerate().map(|(i, e)| (*e, i)).collect();
                row.push(b);
                irow.push(idx);
            }
            bases.push(row);
            index.push(irow);
        }

        // real expansions, cached
        let real_of: Vec<Vec<Vec<ConstForm>>> = (0..=n)
            .map(|p| {
                (0..=n)
                    .map(|q| {
                        bases[p][q]
                            .iter()
                            .map(|b| cbasis_to_real(*b, n))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        // Gram matrices via the real metric algebra (Hermitian extension)
        let mut gram = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut row = Vec::with_capacity(n + 1);
            for q in 0..=n {
                let k = bases[p][q].len();
                let m = DMatrix::from_fn(k, k, |i, j| {
                    real_t.inner(&real_of[p][q][i], &real_of[p][q][j])
                });
                row.push(m);
            }
            gram.push(row);
        }

        // ω from g: ω(e_i, e_j) = g(J e_i, e_j), J the standard pairing
        let two_n = 2 * n;
        let mut jmat = DMatrix::<f64>::zeros(two_n, two_n);
        for a in 0..n {
            jmat[(2 * a + 1, 2 * a)] = 1.0;
            jmat[(2 * a, 2 * a + 1)] = -1.0;
        }
        // J-compatibility: Jᵀ g J = g
        let gj = jmat.transpose() * g_t * &jmat;
        if (&gj - g_t).norm() > 1e-12 * g_t.norm() {
            return Err(ModelError::MetricNotCompatible);
        }
        let omega_mat = jmat.transpose() * g_t; // ω_{ij} = Σ_k J_{ki} g_{kj}
        let mut omega_real = ConstForm::zero();
        for i in 0..two_n {
            for j in (i + 1)..two_n {
                let v = omega_mat[(i, j)];
                if v != 0.0 {
                    omega_real.add_term((1 << i) | (1 << j), C::new(v, 0.0));
                }
            }
        }
        // decompose ω over complex degree-2 components; must be pure (1,1)
        let deg2_blocks: Vec<(usize, usize, Vec<CBasis>)> = (0..=2usize)
            .filter(|p| *p <= n && 2 - *p <= n)
            .map(|p| (p, 2 - p, bases[p][2 - p].clone()))
            .collect();
        let comps = real_to_cbasis(&omega_real, 2, n, &deg2_blocks);
        let mut omega_c = DVector::from_element(bases[1][1].len(), C::new(0.0, 0.0));
        for (p, q, v) in comps {
            if p == 1 && q == 1 {
                for (i, c) in v.iter().enumerate() {
                    omega_c[i] = *c;
                }
            } else {
                assert!(
                    v.iter().all(|c| c.norm() < 1e-12),
                    "Kähler form has a non-(1,1) component"
                );
            }
        }

        // Lefschetz matrices L: (p,q) -> (p+1,q+1), wedge by ω on the left
        let mut lef: Vec<Vec<DMatrix<C>>> = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut row = Vec::with_capacity(n + 1);
            for q in 0..=n {
                if p + 1 > n || q + 1 > n {
                    row.push(DMatrix::zeros(0, bases[p][q].len()));
                    continue;
                }
                let rows = bases[p + 1][q + 1].len();
                let cols = bases[p][q].len();
                let mut m = DMatrix::<C>::zeros(rows, cols);
                for (jc, b) in bases[p][q].iter().enumerate() {
                    for (iw, w) in bases[1][1].iter().enumerate() {
                        if let Some((s, t)) = cbasis_wedge(*w, *b) {
                            let ir = index[p + 1][q + 1][&t];
                            m[(ir, jc)] += omega_c[iw] * s;
                        }
                    }
                }
                row.push(m);
            }
            lef.push(row);
        }

        // Contraction Λ = adjoint of L: with ⟨α,β⟩ = β^H M α, M = conj(Gram),
        // Λ = M_{p,q}^{-1} L^H M_{p+1,q+1}
        let mut contract: Vec<Vec<DMatrix<C>>> = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut row = Vec::with_capacity(n + 1);
            for q in 0..=n {
                if p == 0 || q == 0 {
                    row.push(DMatrix::zeros(0, bases[p][q].len()));
                    continue;
                }
                let m_lo = gram[p - 1][q - 1].map(|c| c.conj());
                let m_hi = gram[p][q].map(|c| c.conj());
                let l = &lef[p - 1][q - 1];
                let m_lo_inv = m_lo
                    .try_inverse()
                    .expect("Gram matrix must be invertible");
                row.push(m_lo_inv * l.adjoint() * m_hi);
            }
            contract.push(row);
        }

        // Basic Hodge star: expand to the real transverse coframe, star,
        // decompose back; output lands in (n-q, n-p)
        let mut star_b: Vec<Vec<DMatrix<C>>> = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut row = Vec::with_capacity(n + 1);
            for q in 0..=n {
                let tp = n - q;
                let tq = n - p;
                let rows = bases[tp][tq].len();
                let cols = bases[p][q].len();
                let mut m = DMatrix::<C>::zeros(rows, cols);
                let out_deg = 2 * n - p - q;
                let blocks: Vec<(usize, usize, Vec<CBasis>)> = (0..=out_deg)
                    .filter(|pp| *pp <= n && out_deg - *pp <= n)
                    .map(|pp| (pp, out_deg - pp, bases[pp][out_deg - pp].clone()))
                    .collect();
                for (jc, _) in bases[p][q].iter().enumerate() {
                    let st = real_t.star_form(&real_of[p][q][jc]);
                    if st.terms.is_empty() {
                        continue;
                    }
                    let comps = real_to_cbasis(&st, out_deg, n, &blocks);
                    for (pp, qq, v) in comps {
                        if pp == tp && qq == tq {
                            for (ir, c) in v.iter().enumerate() {
                                m[(ir, jc)] = *c;
                            }
                        } else {
                            assert!(
                                v.iter().all(|c| c.norm() < 1e-10),
                                "star of a (p,q) form left the expected bidegree"
                            );
                        }
                    }
                }
                row.push(m);
            }
            star_b.push(row);
        }

        // conjugation: (p,q) -> (q,p), dz^I∧dz̄^J ↦ (-1)^{pq} dz^J∧dz̄^I
        let mut conj_map: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let mut row = Vec::with_capacity(n + 1);
            for q in 0..=n {
                let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
                let mut v = Vec::with_capacity(bases[p][q].len());
                for b in &bases[p][q] {
                    let t = CBasis {
                        i_mask: b.j_mask,
                        j_mask: b.i_mask,
                    };
                    v.push((index[q][p][&t], sign));
                }
                row.push(v);
            }
            conj_map.push(row);
        }

        // ω^k coefficient vectors via repeated Lefschetz on the scalar 1
        let mut omega_pow = Vec::with_capacity(n + 1);
        let mut cur = DVector::from_element(1, C::new(1.0, 0.0));
        omega_pow.push(cur.clone());
        for k in 0..n {
            cur = &lef[k][k] * cur;
            omega_pow.push(cur.clone());
        }

        let full: CBasis = CBasis {
            i_mask: (1 << n) - 1,
            j_mask: (1 << n) - 1,
        };
        let top_real = cbasis_to_real(full, n);
        let top_factor = top_real.coeff(((1u32 << (2 * n)) - 1) as u32);

        Ok(FormAlgebra {
            n,
            bases,
            index,
            gram,
            lef,
            contract,
            star_b,
            conj_map,
            omega_c,
            omega_pow,
            top_factor,
            real_t,
        })
    }
}

/// Admissible Fourier modes ‖k‖_∞ ≤ N arranged in a dense box over the 2n
/// effective (transverse) coordinates, with an admissibility mask.
pub struct ModeSet {
    pub e: usize,
    pub cutoff: usize,
    pub side: usize,
    pub box_len: usize,
    pub admissible: Vec<bool>,
    /// (1,0)-components of each mode in the holomorphic coframe, n per slot
    pub k10: Vec<C>,
    /// symbol of the flat scalar operator iΛ∂̄∂ per mode
    pub lambda: Vec<f64>,
    /// flat index of the negated mode
    pub neg: Vec<usize>,
    pub n_admissible: usize,
}

impl ModeSet {
    pub fn kappa(&self, idx: usize) -> Vec<i64> {
        let nn = self.cutoff as i64;
        let mut out = vec![0i64; self.e];
        let mut rem = idx;
        for a in (0..self.e).rev() {
            out[a] = (rem % self.side) as i64 - nn;
            rem /= self.side;
        }
        out
    }

    pub fn index_of(&self, kappa: &[i64]) -> Option<usize> {
        let nn = self.cutoff as i64;
        let mut idx = 0usize;
        for &k in kappa {
            if k < -nn || k > nn {
                return None;
            }
            idx = idx * self.side + (k + nn) as usize;
        }
        Some(idx)
    }

    pub fn zero_index(&self) -> usize {
        self.index_of(&vec![0; self.e]).unwrap()
    }
}

/// Collocation grid over the effective coordinates with FFT plans. Grid side
/// 3N+2 makes quadratic products of cutoff-N fields alias-free after
/// truncation back to the mode box (two-thirds-style dealiasing).
pub struct GridPlan {
    pub e: usize,
    pub m: usize,
    pub grid_len: usize,
    /// box flat index -> grid flat index (mode wrapped mod m per axis)
    pub scatter: Vec<usize>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl GridPlan {
    fn new(modes: &ModeSet) -> Self {
        let e = modes.e;
        let m = 3 * modes.cutoff + 2;
        let grid_len = m.pow(e as u32);
        let mut scatter = Vec::with_capacity(modes.box_len);
        for b in 0..modes.box_len {
            let kap = modes.kappa(b);
            let mut g = 0usize;
            for &k in &kap {
                g = g * m + (k.rem_euclid(m as i64)) as usize;
            }
            scatter.push(g);
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft_fwd = planner.plan_fft_forward(m);
        let fft_inv = planner.plan_fft_inverse(m);
        GridPlan {
            e,
            m,
            grid_len,
            scatter,
            fft_fwd,
            fft_inv,
        }
    }

    /// FFT along every axis, in place. `data` is row-major with e axes of
    /// length m. Uses last-axis transforms plus axis rotations so every pass
    /// works on contiguous lines.
    fn fft_all_axes(&self, data: &mut Vec<C>, inverse: bool) {
        let m = self.m;
        let l = self.grid_len / m;
        let fft = if inverse {
            self.fft_inv.clone()
        } else {
            self.fft_fwd.clone()
        };
        let mut buf = vec![C::new(0.0, 0.0); self.grid_len];
        for _ in 0..self.e {
            // lines along the last axis are contiguous chunks of length m
            let lines_per_chunk = 64usize;
            par::for_each_chunk_mut(data, m * lines_per_chunk, |_, chunk| {
                fft.process(chunk);
            });
            // rotate last axis to the front: out[j*l + r] = in[r*m + j]
            {
                let src: &[C] = data;
                par::for_each_chunk_mut(&mut buf, l, |off, chunk| {
                    let j = off / l;
                    for (r, v) in chunk.iter_mut().enumerate() {
                        *v = src[r * m + j];
                    }
                });
            }
            std::mem::swap(data, &mut buf);
        }
    }

    /// Spectral box -> values on the collocation grid.
    pub fn to_grid(&self, box_vals: &[C]) -> Vec<C> {
        let mut g = vec![C::new(0.0, 0.0); self.grid_len];
        for (b, &gi) in self.scatter.iter().enumerate() {
            let v = box_vals[b];
            if v.norm_sqr() != 0.0 {
                g[gi] += v;
            }
        }
        self.fft_all_axes(&mut g, true);
        g
    }

    /// Grid values -> spectral box, truncated to admissible modes.
    pub fn from_grid(&self, grid: &[C], modes: &ModeSet) -> Vec<C> {
        let mut g = grid.to_vec();
        self.fft_all_axes(&mut g, false);
        let scale = 1.0 / self.grid_len as f64;
        let mut out = vec![C::new(0.0, 0.0); modes.box_len];
        for (b, &gi) in self.scatter.iter().enumerate() {
            if modes.admissible[b] {
                out[b] = g[gi] * scale;
            }
        }
        out
    }
}

/// The flat foliated-torus model: geometry plus all precomputed plumbing.
pub struct FoliatedTorusModel {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub cutoff: usize,
    pub g_t: DMatrix<f64>,
    pub leaf_volume: f64,
    pub dep_generators: Vec<Vec<i128>>,
    pub algebra: FormAlgebra,
    pub modes: ModeSet,
    pub grid: GridPlan,
    /// ∫ ω^n/n! ∧ χ
    pub volume: f64,
    /// human-readable description of the foliation directions, for reports
    pub xi_desc: Option<String>,
}

impl FoliatedTorusModel {
    /// Build a model. `dep_generators = None` declares the foliation to be
    /// exactly the coordinate leaf torus (generators e_{2n}..e_{d-1});
    /// explicit generators encode the rational relations of the foliation
    /// directions.
    pub fn new(
        n: usize,
        m: usize,
        g_t: Option<DMatrix<f64>>,
        leaf_volume: f64,
        dep_generators: Option<Vec<Vec<i128>>>,
        cutoff: usize,
    ) -> Result<Arc<Self>, ModelError> {
        par::init_threads();
        let d = 2 * n + m;
        if cutoff < 1 {
            return Err(ModelError::BadCutoff);
        }
        if leaf_volume <= 0.0 {
            return Err(ModelError::BadLeafVolume);
        }
        let g_t = g_t.unwrap_or_else(|| DMatrix::identity(2 * n, 2 * n));
        if g_t.nrows() != 2 * n || g_t.ncols() != 2 * n {
            return Err(ModelError::DimensionMismatch);
        }
        if (&g_t - g_t.transpose()).norm() > 1e-12 * g_t.norm() {
            return Err(ModelError::MetricNotSpd);
        }
        if g_t.clone().cholesky().is_none() {
            return Err(ModelError::MetricNotSpd);
        }
        let dep_generators = dep_generators.unwrap_or_else(|| {
            (2 * n..d)
                .map(|i| {
                    let mut v = vec![0i128; d];
                    v[i] = 1;
                    v
                })
                .collect()
        });
        for gvec in &dep_generators {
            if gvec.len() != d {
                return Err(ModelError::DimensionMismatch);
            }
        }
        // the admissible lattice must not contain leaf components, otherwise
        // the coordinate-split calculus does not represent basic functions
        let kernel = integer_kernel(&dep_generators, d);
        if kernel.iter().any(|v| v[2 * n..].iter().any(|&x| x != 0)) {
            return Err(ModelError::LeafModesAdmissible);
        }

        let algebra = FormAlgebra::new(n, &g_t)?;

        // mode box over the 2n transverse coordinates
        let e = 2 * n;
        let side = 2 * cutoff + 1;
        let box_len = side.pow(e as u32);
        let mut admissible = vec![false; box_len];
        let mut k10 = vec![C::new(0.0, 0.0); box_len * n];
        let mut lambda = vec![0.0f64; box_len];
        let mut neg = vec![0usize; box_len];
        let mut n_admissible = 0usize;
        let tmp = ModeSet {
            e,
            cutoff,
            side,
            box_len,
            admissible: vec![],
            k10: vec![],
            lambda: vec![],
            neg: vec![],
            n_admissible: 0,
        };
        for b in 0..box_len {
            let kap = tmp.kappa(b);
            let mut kfull = vec![0i64; d];
            kfull[..e].copy_from_slice(&kap);
            let adm = dep_generators.iter().all(|gvec| {
                kfull
                    .iter()
                    .zip(gvec.iter())
                    .map(|(&a, &b)| a as i128 * b)
                    .sum::<i128>()
                    == 0
            });
            admissible[b] = adm;
            if adm {
                n_admissible += 1;
            }
            for a in 0..n {
                k10[b * n + a] = C::new(kap[2 * a] as f64 / 2.0, -(kap[2 * a + 1] as f64) / 2.0);
            }
            let nkap: Vec<i64> = kap.iter().map(|&x| -x).collect();
            neg[b] = tmp.index_of(&nkap).unwrap();
            // symbol of iΛ∂̄∂ on this mode, computed through the algebra
            if n >= 1 {
                let dim11 = algebra.dim(1, 1);
                let mut w = DVector::from_element(dim11, C::new(0.0, 0.0));
                let two_pi_i = C::new(0.0, 2.0 * std::f64::consts::PI);
                for a in 0..n {
                    let va = two_pi_i * k10[b * n + a];
                    for bb in 0..n {
                        let vb = two_pi_i * k10[b * n + bb].conj();
                        // ∂̄(∂ e_k): wedge dz̄^bb from the left onto dz^a
                        let (s, t) = cbasis_wedge(
                            CBasis {
                                i_mask: 0,
                                j_mask: 1 << bb,
                            },
                            CBasis {
                                i_mask: 1 << a,
                                j_mask: 0,
                            },
                        )
                        .unwrap();
                        let ir = algebra.basis_index(1, 1, t);
                        w[ir] += vb * va * s;
                    }
                }
                let contracted = &algebra.contract[1][1] * w;
                let lam = C::new(0.0, 1.0) * contracted[0];
                debug_assert!(lam.im.abs() < 1e-9 * (1.0 + lam.re.abs()));
                lambda[b] = lam.re;
            }
        }
        let modes = ModeSet {
            e,
            cutoff,
            side,
            box_len,
            admissible,
            k10,
            lambda,
            neg,
            n_admissible,
        };
        let grid = GridPlan::new(&modes);
        let volume = g_t.determinant().sqrt() * leaf_volume;
        Ok(Arc::new(FoliatedTorusModel {
            d,
            n,
            m,
            cutoff,
            g_t,
            leaf_volume,
            dep_generators,
            algebra,
            modes,
            grid,
            volume,
            xi_desc: None,
        }))
    }

    /// Is the full-dimension integer mode basic (invariant along the
    /// foliation)? Decided exactly through the declared dependency lattice.
    pub fn is_admissible(&self, k: &[i64]) -> bool {
        assert_eq!(k.len(), self.d);
        self.dep_generators.iter().all(|gvec| {
            k.iter()
                .zip(gvec.iter())
                .map(|(&a, &b)| a as i128 * b)
                .sum::<i128>()
                == 0
        })
    }

    /// Convenience: the product model T^{2n} × T^m with unit metric. Total
    /// volume is leaf_volume.
    pub fn product(n: usize, m: usize, leaf_volume: f64, cutoff: usize) -> Arc<Self> {
        Self::new(n, m, None, leaf_volume, None, cutoff).expect("valid product model")
    }
}

/// Real 2n×2n J-compatible metric from a Hermitian n×n matrix h = s + i t
/// (s symmetric, t skew): every compatible transverse metric arises this way,
/// and the result is SPD iff h is positive definite.
pub fn metric_from_hermitian(s: &DMatrix<f64>, t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    assert_eq!((s.ncols(), t.nrows(), t.ncols()), (n, n, n));
    let mut g = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            g[(2 * a, 2 * b)] = s[(a, b)];
            g[(2 * a + 1, 2 * b + 1)] = s[(a, b)];
            g[(2 * a, 2 * b + 1)] = t[(a, b)];
            g[(2 * a + 1, 2 * b)] = -t[(a, b)];
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn admissibility_product_and_irrational() {
        // T² × S¹, foliation = last coordinate circle
        let m = FoliatedTorusModel::product(1, 1, 1.0, 4);
        assert!(m.is_admissible(&[3, -2, 0]));
        assert!(!m.is_admissible(&[3, -2, 1]));
        assert!(m.is_admissible(&[0, 0, 0]));
        assert_eq!(m.modes.n_admissible, 9 * 9);

        // T³ with rationally independent foliation direction: generators
        // e0,e1,e2 declare full independence, so only k = 0 is basic
        let gens = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        let m3 = FoliatedTorusModel::new(1, 1, None, 1.0, Some(gens), 4).unwrap();
        assert!(!m3.is_admissible(&[1, 0, 0]));
        assert!(m3.is_admissible(&[0, 0, 0]));
        assert_eq!(m3.modes.n_admissible, 1);
    }

    #[test]
    fn leaf_modes_rejected() {
        // a dependency lattice that fails to kill leaf modes must be refused
        let gens = vec![vec![1, 0, 0]];
        assert!(matches!(
            FoliatedTorusModel::new(1, 1, None, 1.0, Some(gens), 2),
            Err(ModelError::LeafModesAdmissible)
        ));
    }

    #[test]
    fn scalar_symbol_flat() {
        // unit metric on T²×S¹: iΛ∂̄∂ e_k = 2π²|k|² e_k
        let m = FoliatedTorusModel::product(1, 1, 1.0, 4);
        let idx = m.modes.index_of(&[2, -1]).unwrap();
        assert_relative_eq!(
            m.modes.lambda[idx],
            2.0 * std::f64::consts::PI.powi(2) * 5.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(m.modes.lambda[m.modes.zero_index()], 0.0, epsilon = 1e-12);
        // symbol positive away from 0
        for b in 0..m.modes.box_len {
            if b != m.modes.zero_index() {
                assert!(m.modes.lambda[b] > 0.0);
            }
        }
    }

    #[test]
    fn contraction_of_omega_is_n() {
        for n in 1..=2usize {
            let m = FoliatedTorusModel::product(n, 1, 1.0, 2);
            let lam_omega = &m.algebra.contract[1][1] * &m.algebra.omega_c;
            assert_relative_eq!(lam_omega[0].re, n as f64, epsilon = 1e-12);
            assert_relative_eq!(lam_omega[0].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_roundtrip() {
        let m = FoliatedTorusModel::product(1, 1, 1.0, 3);
        let mut box_vals = vec![C::new(0.0, 0.0); m.modes.box_len];
        // populate admissible modes with arbitrary values
        for b in 0..m.modes.box_len {
            if m.modes.admissible[b] {
                let kap = m.modes.kappa(b);
                box_vals[b] = C::new(kap[0] as f64 * 0.3 + 1.0, kap[1] as f64 * 0.2 - 0.5);
            }
        }
        let g = m.grid.to_grid(&box_vals);
        let back = m.grid.from_grid(&g, &m.modes);
        for b in 0..m.modes.box_len {
            assert_relative_eq!(back[b].re, box_vals[b].re, epsilon = 1e-12);
            assert_relative_eq!(back[b].im, box_vals[b].im, epsilon = 1e-12);
        }
    }

    #[test]
    fn top_factor_n1() {
        let m = FoliatedTorusModel::product(1, 1, 1.0, 2);
        // dz ∧ dz̄ = -2i dx⁰∧dx¹
        assert_relative_eq!(m.algebra.top_factor.im, -2.0, epsilon = 1e-14);
        assert_relative_eq!(m.algebra.top_factor.re, 0.0, epsilon = 1e-14);
    }
}
