//! The perturbed-equation continuity method.
//!
//! For each ε along a geometric schedule we solve
//!     K(h₀e^s) - γ·Id + ε·s = 0
//! for the Hermitian endomorphism s = log f, warm-starting from the previous
//! step. The correction is an inexact Newton method: the exact Fréchet
//! derivative (through the Daleckii-Krein derivative of the pointwise matrix
//! exponential) is inverted by preconditioned GMRES. A bounded path down to
//! the target ε is the convergence certificate; unbounded growth of ‖s‖ is
//! the blow-up certificate, from which a destabilizing projection is
//! extracted by spectral thresholding of the renormalized metric.

use crate::bundle::BundleSpec;
use crate::exterior::C;
use crate::field::{BasicField, GridField};
use nalgebra::DMatrix;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton iteration failed to converge at ε = {0}")]
    NewtonStalled(f64),
    #[error("continuity schedule exhausted without a verdict")]
    ScheduleExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "CONVERGED")]
    Converged,
    #[serde(rename = "BLOWUP")]
    Blowup,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Converged => write!(f, "CONVERGED"),
            Verdict::Blowup => write!(f, "BLOWUP"),
            Verdict::Inconclusive => write!(f, "INCONCLUSIVE"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub eps_start: f64,
    pub eps_target: f64,
    /// geometric schedule factor in (0,1)
    pub ratio: f64,
    /// Newton stopping tolerance, relative to the problem scale
    pub newton_tol: f64,
    pub newton_max: usize,
    pub gmres_max: usize,
    /// ‖log f‖_{L²} level that (together with positive fitted growth)
    /// certifies blow-up
    pub blowup_norm: f64,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_start: 1.0,
            eps_target: 1e-6,
            ratio: 0.5,
            newton_tol: 1e-11,
            newton_max: 40,
            gmres_max: 200,
            blowup_norm: 50.0,
            max_steps: 200,
        }
    }
}

/// Everything recorded at one accepted continuity step.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub eps: f64,
    /// m_ε = sup-norm of log f (pointwise Frobenius)
    pub sup_log: f64,
    pub l2_log: f64,
    /// sup |K(h) - γ·Id| at this step (the unperturbed defect)
    pub he_residual_sup: f64,
    /// L² norm of the full perturbed-equation residual after Newton
    pub residual_l2: f64,
    pub newton_iters: usize,
    /// max over grid points of ½P(|s|²) + ε|s|² - |K⁰||s| (must stay ≤ tol)
    pub estimate_violation: f64,
    /// m_ε - max|K⁰|/ε (must stay ≤ tol)
    pub mean_bound_violation: f64,
}

#[derive(Serialize)]
pub struct PathTrace {
    pub verdict: Verdict,
    pub gamma: f64,
    pub eps_final: f64,
    pub steps: Vec<StepRecord>,
    /// fitted d log‖s‖ / d log(1/ε) over the last accepted steps
    pub growth_rate: f64,
    #[serde(skip)]
    pub final_s: BasicField,
}

/// The residual of the perturbed equation: K(h₀e^s) - γ·Id + ε·s.
pub fn residual(bundle: &BundleSpec, gamma: f64, eps: f64, s: &BasicField) -> BasicField {
    let gid = BasicField::constant(
        &bundle.model,
        &DMatrix::from_diagonal_element(bundle.rank(), bundle.rank(), C::new(gamma, 0.0)),
    );
    bundle
        .mean_curvature(s)
        .sub(&gid)
        .add(&s.scale(C::new(eps, 0.0)))
}

/// Starting metric for the path: s₁ = -(K⁰ - γ·Id). For constant mean
/// curvature backgrounds this solves the ε = 1 equation exactly; otherwise
/// it is the warm start that the first Newton solve polishes.
pub fn initial_metric(bundle: &BundleSpec, gamma: f64) -> BasicField {
    let gid = BasicField::constant(
        &bundle.model,
        &DMatrix::from_diagonal_element(bundle.rank(), bundle.rank(), C::new(gamma, 0.0)),
    );
    let mut s = bundle.k0().sub(&gid).scale(C::new(-1.0, 0.0)).hermitize();
    bundle.project_blocks(&mut s);
    s
}

fn dexp_factor(li: f64, lj: f64) -> f64 {
    if (li - lj).abs() < 1e-9 {
        (0.5 * (li + lj)).exp()
    } else {
        (li.exp() - lj.exp()) / (li - lj)
    }
}

/// Derivative of the pointwise matrix exponential at s in direction η
/// (Daleckii-Krein divided differences in the eigenbasis of s).
fn dexp(s_grid: &GridField, eta: &BasicField) -> BasicField {
    s_grid
        .zip_matrices(&eta.to_grid(), |sm, em| {
            let h = (sm + sm.adjoint()) * C::new(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let u = &eig.eigenvectors;
            let et = u.adjoint() * em * u;
            let r = sm.nrows();
            let mut out = et;
            for i in 0..r {
                for j in 0..r {
                    out[(i, j)] *= dexp_factor(eig.eigenvalues[i], eig.eigenvalues[j]);
                }
            }
            u * out * u.adjoint()
        })
        .to_modes()
}

/// Mode-diagonal preconditioner: divide by (λ_k + ε), the symbol of the
/// dominant P + ε part of the linearization.
fn precondition(f: &BasicField, eps: f64) -> BasicField {
    let mut out = f.clone();
    let bl = f.box_len();
    let lam = f.model.modes.lambda.clone();
    for i in 0..f.rank {
        for j in 0..f.rank {
            let s = out.slice_mut(0, i, j);
            for b in 0..bl {
                s[b] /= C::new(lam[b] + eps, 0.0);
            }
        }
    }
    out
}

/// Full (unrestarted) GMRES with right preconditioning; returns the solution
/// and the achieved relative residual.
fn gmres<A, M>(apply: A, precond: M, b: &BasicField, tol_rel: f64, maxit: usize) -> (BasicField, f64)
where
    A: Fn(&BasicField) -> BasicField,
    M: Fn(&BasicField) -> BasicField,
{
    let beta = b.l2_norm();
    if beta == 0.0 {
        return (b.scale(C::new(0.0, 0.0)), 0.0);
    }
    let mut basis: Vec<BasicField> = vec![b.scale(C::new(1.0 / beta, 0.0))];
    let maxit = maxit.max(1);
    let mut h = DMatrix::<C>::zeros(maxit + 1, maxit);
    let mut rel = 1.0f64;
    let mut y_best: Option<nalgebra::DVector<C>> = None;
    let mut m_used = 0usize;
    for m in 0..maxit {
        let mut w = apply(&precond(&basis[m]));
        // modified Gram-Schmidt
        for i in 0..=m {
            let hij = w.l2_inner(&basis[i]);
            h[(i, m)] = hij;
            w = w.sub(&basis[i].scale(hij));
        }
        let wn = w.l2_norm();
        h[(m + 1, m)] = C::new(wn, 0.0);
        // small least squares ‖βe₁ - H y‖
        let hm = h.view((0, 0), (m + 2, m + 1)).into_owned();
        let mut rhs = nalgebra::DVector::<C>::zeros(m + 2);
        rhs[0] = C::new(beta, 0.0);
        let svd = hm.clone().svd(true, true);
        let y = svd.solve(&rhs, 1e-14).expect("least squares");
        let res = (&hm * &y - &rhs).norm();
        rel = res / beta;
        y_best = Some(y);
        m_used = m + 1;
        if rel <= tol_rel || wn < 1e-14 * beta {
            break;
        }
        basis.push(w.scale(C::new(1.0 / wn, 0.0)));
    }
    let y = y_best.expect("at least one iteration");
    let mut u = b.scale(C::new(0.0, 0.0));
    for i in 0..m_used {
        u = u.add(&basis[i].scale(y[i]));
    }
    (precond(&u), rel)
}

/// One Newton solve of the ε-equation from a warm start. Returns the
/// solution, iteration count, and final residual L² norm.
pub fn newton_at_eps(
    bundle: &BundleSpec,
    gamma: f64,
    eps: f64,
    s0: &BasicField,
    opts: &SolveOptions,
) -> Result<(BasicField, usize, f64), SolverError> {
    let scale = 1.0 + bundle.k0().max_pointwise_norm() + gamma.abs();
    let tol = opts.newton_tol * scale;
    let mut s = s0.clone();
    bundle.project_blocks(&mut s);
    let mut r = residual(bundle, gamma, eps, &s);
    let mut rnorm = r.l2_norm();
    for it in 0..opts.newton_max {
        if rnorm <= tol {
            return Ok((s, it, rnorm));
        }
        // cache the pointwise exponential data at the current iterate
        let s_grid = s.to_grid();
        let s_neg_grid = s_grid.map_matrices(|m| -m);
        let mut f = s_grid.map_hermitian(f64::exp).to_modes();
        let mut finv = s_grid.map_hermitian(|x| (-x).exp()).to_modes();
        bundle.project_blocks(&mut f);
        bundle.project_blocks(&mut finv);
        let d0f = bundle.del_e(&f);
        // the exact derivative of the discretized residual: both exp(s) and
        // exp(-s) are differentiated through the pointwise exponential
        let jac = |eta: &BasicField| -> BasicField {
            let mut df = dexp(&s_grid, eta);
            bundle.project_blocks(&mut df);
            let mut dfinv = dexp(&s_neg_grid, &eta.scale(C::new(-1.0, 0.0)));
            bundle.project_blocks(&mut dfinv);
            let t1 = dfinv.wedge(&d0f).expect("wedge");
            let t2 = finv.wedge(&bundle.del_e(&df)).expect("wedge");
            let dk = bundle
                .dbar_e(&t1.add(&t2))
                .contract()
                .scale(C::new(0.0, 1.0));
            dk.add(&eta.scale(C::new(eps, 0.0)))
        };
        // inexact Newton forcing: tighter as the residual shrinks
        let forcing = (rnorm / scale).min(1e-3).max(1e-10);
        let (delta, _) = gmres(
            jac,
            |v| precondition(v, eps),
            &r.scale(C::new(-1.0, 0.0)),
            forcing,
            opts.gmres_max,
        );
        // backtracking on the residual norm
        let mut t = 1.0f64;
        let mut accepted = false;
        for _ in 0..12 {
            let mut s_try = s.add(&delta.scale(C::new(t, 0.0))).hermitize();
            bundle.project_blocks(&mut s_try);
            let r_try = residual(bundle, gamma, eps, &s_try);
            let rn_try = r_try.l2_norm();
            if rn_try < (1.0 - 0.1 * t) * rnorm {
                s = s_try;
                r = r_try;
                rnorm = rn_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(SolverError::NewtonStalled(eps));
        }
    }
    if rnorm <= tol {
        Ok((s, opts.newton_max, rnorm))
    } else {
        Err(SolverError::NewtonStalled(eps))
    }
}

fn make_record(
    bundle: &BundleSpec,
    gamma: f64,
    eps: f64,
    s: &BasicField,
    newton_iters: usize,
    residual_l2: f64,
    k0_sup: f64,
) -> StepRecord {
    let sup_log = s.max_pointwise_norm();
    let l2_log = s.l2_norm();
    let gid = BasicField::constant(
        &bundle.model,
        &DMatrix::from_diagonal_element(bundle.rank(), bundle.rank(), C::new(gamma, 0.0)),
    );
    let he = bundle.mean_curvature(s).sub(&gid);
    let he_residual_sup = he.max_pointwise_norm();
    // pointwise estimate ½P(|s|²) + ε|s|² ≤ |K⁰||s|
    let u = s.wedge(s).expect("wedge").trace(); // tr s² = |s|_F² pointwise
    let pu = crate::field::p_operator_flat(&u);
    let gu = u.to_grid();
    let gpu = pu.to_grid();
    let gk0 = bundle.k0().to_grid().pointwise_norm_sq();
    let mut viol = f64::NEG_INFINITY;
    let gl = bundle.model.grid.grid_len;
    for g in 0..gl {
        let usq = gu.values[g].re.max(0.0);
        let lhs = 0.5 * gpu.values[g].re + eps * usq;
        let rhs = gk0[g].max(0.0).sqrt() * usq.sqrt();
        viol = viol.max(lhs - rhs);
    }
    StepRecord {
        eps,
        sup_log,
        l2_log,
        he_residual_sup,
        residual_l2,
        newton_iters,
        estimate_violation: viol,
        mean_bound_violation: sup_log - k0_sup / eps,
    }
}

fn fitted_growth(steps: &[StepRecord]) -> f64 {
    // least-squares slope of ln‖s‖_{L²} against ln(1/ε), last ≤5 points
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .rev()
        .take(5)
        .filter(|r| r.l2_log > 0.0)
        .map(|r| ((1.0 / r.eps).ln(), r.l2_log.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-30 {
        0.0
    } else {
        (n * sxy - sx * sy) / den
    }
}

/// Run the continuity path. The schedule is geometric from `eps_start` to
/// `eps_target`; on Newton failure the step shrinks (ratio → √ratio). The
/// path ends with CONVERGED (target reached), BLOWUP (norm level crossed with
/// positive fitted growth), or INCONCLUSIVE (schedule exhausted).
pub fn trace_path(bundle: &BundleSpec, opts: &SolveOptions) -> Result<PathTrace, SolverError> {
    let gamma = bundle.einstein_factor();
    let k0_sup = bundle.k0().max_pointwise_norm();
    let mut s = initial_metric(bundle, gamma);
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut eps = opts.eps_start;
    let mut ratio = opts.ratio;
    let mut pending = eps;
    for _ in 0..opts.max_steps {
        match newton_at_eps(bundle, gamma, pending, &s, opts) {
            Ok((s_new, iters, rl2)) => {
                s = s_new;
                eps = pending;
                steps.push(make_record(bundle, gamma, eps, &s, iters, rl2, k0_sup));
                let growth = fitted_growth(&steps);
                if steps.last().unwrap().l2_log > opts.blowup_norm && growth > 0.0 {
                    return Ok(PathTrace {
                        verdict: Verdict::Blowup,
                        gamma,
                        eps_final: eps,
                        steps,
                        growth_rate: growth,
                        final_s: s,
                    });
                }
                if eps <= opts.eps_target {
                    let growth = fitted_growth(&steps);
                    return Ok(PathTrace {
                        verdict: Verdict::Converged,
                        gamma,
                        eps_final: eps,
                        steps,
                        growth_rate: growth,
                        final_s: s,
                    });
                }
                pending = (eps * ratio).max(opts.eps_target);
            }
            Err(_) => {
                // shrink the schedule step and retry from the last good state
                ratio = ratio.sqrt();
                if ratio > 0.999 {
                    let growth = fitted_growth(&steps);
                    return Ok(PathTrace {
                        verdict: Verdict::Inconclusive,
                        gamma,
                        eps_final: eps,
                        steps,
                        growth_rate: growth,
                        final_s: s,
                    });
                }
                pending = (eps * ratio).max(opts.eps_target);
            }
        }
    }
    let growth = fitted_growth(&steps);
    Ok(PathTrace {
        verdict: Verdict::Inconclusive,
        gamma,
        eps_final: eps,
        steps,
        growth_rate: growth,
        final_s: s,
    })
}

/// A destabilizing projection recovered from a blown-up path, with its
/// certificate numbers.
#[derive(Serialize)]
pub struct Destabilizer {
    #[serde(skip)]
    pub pi: BasicField,
    pub rank_trace: f64,
    pub rank: i64,
    pub projection_residual: f64,
    pub hermitian_residual: f64,
    pub weak_holomorphy_residual: f64,
    pub degree: f64,
    pub slope: f64,
}

/// Extract the destabilizer by spectral thresholding: eigenvalues of the
/// final log f split into a top group (surviving renormalization e^{s-M})
/// and the rest; π projects onto the rest. The threshold is the midpoint of
/// the largest gap in the pooled eigenvalue distribution.
pub fn extract_destabilizer(bundle: &BundleSpec, trace: &PathTrace) -> Option<Destabilizer> {
    let r = bundle.rank();
    if r < 2 {
        return None;
    }
    let s_grid = trace.final_s.to_grid();
    // pool all pointwise eigenvalues
    let mut eigs: Vec<f64> = Vec::new();
    let rr = r * r;
    for start in (0..s_grid.values.len()).step_by(rr) {
        let m = DMatrix::from_fn(r, r, |i, j| s_grid.values[start + i * r + j]);
        let h = (&m + m.adjoint()) * C::new(0.5, 0.0);
        for v in h.symmetric_eigen().eigenvalues.iter() {
            eigs.push(*v);
        }
    }
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let spread = eigs.last().unwrap() - eigs.first().unwrap();
    if spread < 1e-6 {
        return None; // no spectral separation: nothing blew up directionally
    }
    let mut best_gap = 0.0;
    let mut tau = 0.0;
    for w in eigs.windows(2) {
        let gap = w[1] - w[0];
        if gap > best_gap {
            best_gap = gap;
            tau = 0.5 * (w[0] + w[1]);
        }
    }
    let mut pi = s_grid
        .map_matrices(|m| {
            let h = (m + m.adjoint()) * C::new(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let proj = eig.eigenvalues.map(|l| {
                if l < tau {
                    C::new(1.0, 0.0)
                } else {
                    C::new(0.0, 0.0)
                }
            });
            &eig.eigenvectors * DMatrix::from_diagonal(&proj) * eig.eigenvectors.adjoint()
        })
        .to_modes();
    bundle.project_blocks(&mut pi);
    let proj_res = pi.wedge(&pi).expect("wedge").sub(&pi).max_pointwise_norm();
    let herm_res = pi.sub(&pi.adjoint()).max_pointwise_norm();
    let idm = BasicField::identity(&bundle.model, r);
    let weak = idm
        .sub(&pi)
        .wedge(&bundle.dbar_e(&pi))
        .expect("wedge")
        .l2_norm();
    // rank from the normalized trace integral
    let n = bundle.model.n;
    let fact: f64 = (1..=n).product::<usize>() as f64;
    let wn = BasicField::omega_pow(&bundle.model, n);
    let tr_int = pi
        .trace()
        .wedge(&wn)
        .expect("wedge")
        .integrate()
        .expect("top");
    let rank_trace = tr_int.re / (fact * bundle.model.volume);
    let rank = rank_trace.round() as i64;
    let degree = bundle.subbundle_degree(&pi);
    let slope = if rank > 0 { degree / rank as f64 } else { 0.0 };
    Some(Destabilizer {
        pi,
        rank_trace,
        rank,
        projection_residual: proj_res,
        hermitian_residual: herm_res,
        weak_holomorphy_residual: weak,
        degree,
        slope,
    })
}

/// Renormalization exponent M_ε = largest pointwise eigenvalue of log f.
pub fn renormalization_exponent(s: &BasicField) -> f64 {
    let g = s.to_grid();
    let r = s.rank;
    let mut m = f64::NEG_INFINITY;
    for start in (0..g.values.len()).step_by(r * r) {
        let mat = DMatrix::from_fn(r, r, |i, j| g.values[start + i * r + j]);
        let h = (&mat + mat.adjoint()) * C::new(0.5, 0.0);
        for v in h.symmetric_eigen().eigenvalues.iter() {
            m = m.max(*v);
        }
    }
    m
}

/// Convenience for tests and the scalar sanity check: the model used by most
/// solver tests.
pub fn gamma_id(model: &Arc<crate::model::FoliatedTorusModel>, rank: usize, gamma: f64) -> BasicField {
    BasicField::constant(
        model,
        &DMatrix::from_diagonal_element(rank, rank, C::new(gamma, 0.0)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{ExtClass, LineFactor};
    use crate::model::FoliatedTorusModel;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t2s1(cutoff: usize) -> Arc<FoliatedTorusModel> {
        FoliatedTorusModel::product(1, 1, 1.0, cutoff)
    }

    #[test]
    fn initial_metric_solves_eps_one_for_constant_background() {
        let m = t2s1(4);
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![1]), LineFactor::new(vec![0])],
            vec![],
        )
        .unwrap();
        let gamma = e.einstein_factor();
        let s1 = initial_metric(&e, gamma);
        let r = residual(&e, gamma, 1.0, &s1);
        assert!(r.l2_norm() < 1e-10);
    }

    #[test]
    fn scalar_reduction_matches_linear_equation() {
        // rank 1 trivial line: the equation for s = φ reduces to
        // P(φ) + εφ = -(K⁰ - γ) = 0, and for a perturbed start Newton must
        // land on φ = (P+ε)⁻¹(0) = 0
        let m = t2s1(4);
        let e = BundleSpec::new(&m, vec![LineFactor::new(vec![0])], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = BasicField::random(&m, 0, 0, 1, &mut rng, 0.3, 0.5, true);
        let opts = SolveOptions::default();
        let (s, _, _) = newton_at_eps(&e, 0.0, 0.25, &s0, &opts).unwrap();
        assert!(s.l2_norm() < 1e-9);
        // and with a forced right-hand side through a nonzero γ offset the
        // solution is the constant -(K⁰-γ)/ε... K⁰ = 0 here, γ = 0.8:
        let (s2, _, _) = newton_at_eps(&e, 0.8, 0.25, &s0, &opts).unwrap();
        let z = m.modes.zero_index();
        assert_relative_eq!(s2.slice(0, 0, 0)[z].re, 0.8 / 0.25, epsilon = 1e-9);
    }

    #[test]
    fn linearization_consistency() {
        // finite-difference check of the Fréchet derivative used by Newton:
        // ‖R(s+tη) - R(s) - t·J(η)‖ = O(t²)
        let m = t2s1(3);
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![0]), LineFactor::new(vec![0])],
            vec![ExtClass::constant(0, 1, 1, C::new(0.5, 0.2))],
        )
        .unwrap();
        let gamma = e.einstein_factor();
        let eps = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = BasicField::random(&m, 0, 0, 2, &mut rng, 0.2, 0.6, true);
        let eta = BasicField::random(&m, 0, 0, 2, &mut rng, 1.0, 0.6, true);
        // J(η) assembled exactly as in newton_at_eps
        let s_grid = s.to_grid();
        let s_neg_grid = s_grid.map_matrices(|m| -m);
        let f = s_grid.map_hermitian(f64::exp).to_modes();
        let finv = s_grid.map_hermitian(|x| (-x).exp()).to_modes();
        let d0f = e.del_e(&f);
        let _ = &finv;
        let jac = |eta: &BasicField| -> BasicField {
            let df = dexp(&s_grid, eta);
            let dfinv = dexp(&s_neg_grid, &eta.scale(C::new(-1.0, 0.0)));
            let t1 = dfinv.wedge(&d0f).unwrap();
            let t2 = finv.wedge(&e.del_e(&df)).unwrap();
            let dk = e.dbar_e(&t1.add(&t2)).contract().scale(C::new(0.0, 1.0));
            dk.add(&eta.scale(C::new(eps, 0.0)))
        };
        let j_eta = jac(&eta);
        let r0 = residual(&e, gamma, eps, &s);
        let errs: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&t| {
                let st = s.add(&eta.scale(C::new(t, 0.0)));
                let rt = residual(&e, gamma, eps, &st);
                rt.sub(&r0).sub(&j_eta.scale(C::new(t, 0.0))).l2_norm()
            })
            .collect();
        // halving t must quarter the error (second-order remainder only)
        assert!(errs[1] < 0.3 * errs[0] + 1e-12, "{errs:?}");
        assert!(errs[2] < 0.3 * errs[1] + 1e-12, "{errs:?}");
    }

    #[test]
    fn newton_quadratic_convergence() {
        // residual norms along the Newton iteration from a rough start decay
        // at least quadratically once in the basin
        let m = t2s1(3);
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![0]), LineFactor::new(vec![0])],
            vec![ExtClass::constant(0, 1, 1, C::new(0.6, -0.1))],
        )
        .unwrap();
        let gamma = e.einstein_factor();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s0 = BasicField::random(&m, 0, 0, 2, &mut rng, 0.3, 0.6, true);
        let opts = SolveOptions {
            newton_tol: 1e-13,
            ..Default::default()
        };
        let (s, iters, rfin) = newton_at_eps(&e, gamma, 0.5, &s0, &opts).unwrap();
        assert!(iters <= 12, "took {iters} iterations");
        assert!(rfin < 1e-11);
        assert!(s.is_hermitian(1e-10));
    }

    #[test]
    fn unstable_split_path_blows_up_at_linear_rate() {
        let m = t2s1(3);
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![1]), LineFactor::new(vec![0])],
            vec![],
        )
        .unwrap();
        let trace = trace_path(&e, &SolveOptions::default()).unwrap();
        assert_eq!(trace.verdict, Verdict::Blowup);
        // split constant case: s(ε) = -(K⁰-γ)/ε exactly, so m_ε·ε is the
        // constant |K⁰-γ| = π√2 and the fitted growth is 1
        assert_relative_eq!(trace.growth_rate, 1.0, epsilon = 1e-6);
        let last = trace.steps.last().unwrap();
        let expect = std::f64::consts::PI * 2.0f64.sqrt() / last.eps;
        assert_relative_eq!(last.sup_log, expect, epsilon = 1e-6 * expect);
        // estimates hold with sharp equality margins
        for st in &trace.steps {
            assert!(st.mean_bound_violation <= 1e-6);
            assert!(st.estimate_violation <= 1e-8);
        }
    }

    #[test]
    fn polystable_trivial_ext_path_converges() {
        // gauge-trivial non-constant β: genuinely non-constant solve that
        // must converge with bounded s
        let m = t2s1(4);
        let mut comps = vec![C::new(0.0, 0.0); 1];
        comps[0] = C::new(0.5, 0.3);
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![0]), LineFactor::new(vec![0])],
            vec![ExtClass {
                row: 0,
                col: 1,
                modes: vec![(vec![1, 0], comps)],
            }],
        )
        .unwrap();
        let trace = trace_path(&e, &SolveOptions::default()).unwrap();
        assert_eq!(trace.verdict, Verdict::Converged);
        let last = trace.steps.last().unwrap();
        assert!(last.he_residual_sup < 1e-6, "HE defect {}", last.he_residual_sup);
        assert!(last.sup_log < 10.0);
        for st in &trace.steps {
            assert!(st.estimate_violation <= 1e-8, "estimate violated: {}", st.estimate_violation);
            assert!(st.mean_bound_violation <= 1e-6);
        }
    }

    #[test]
    fn destabilizer_of_split_bundle() {
        let m = t2s1(3);
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![2]), LineFactor::new(vec![0])],
            vec![],
        )
        .unwrap();
        let trace = trace_path(&e, &SolveOptions::default()).unwrap();
        assert_eq!(trace.verdict, Verdict::Blowup);
        let d = extract_destabilizer(&e, &trace).unwrap();
        assert!(d.projection_residual < 1e-6);
        assert!(d.hermitian_residual < 1e-6);
        assert!(d.weak_holomorphy_residual < 1e-4);
        assert_eq!(d.rank, 1);
        assert!((d.rank_trace - 1.0).abs() < 1e-3);
        assert_relative_eq!(d.degree, 2.0, epsilon = 1e-6);
        assert!(d.slope >= e.slope() - 1e-6);
    }

    #[test]
    fn gauge_covariance_of_the_path() {
        // conjugating β by a constant unitary conjugates the solution: the
        // recorded scalars (norms, residuals) agree along the whole path
        let m = t2s1(3);
        let mk = |a: C| {
            BundleSpec::new(
                &m,
                vec![LineFactor::new(vec![0]), LineFactor::new(vec![0])],
                vec![ExtClass::constant(0, 1, 1, a)],
            )
            .unwrap()
        };
        let e = mk(C::new(0.4, 0.2));
        let th = 0.61f64;
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[
                C::new(th.cos(), 0.0),
                C::new(-th.sin(), 0.0),
                C::new(th.sin(), 0.0),
                C::new(th.cos(), 0.0),
            ],
        );
        let e2 = e.conjugated(&u);
        let opts = SolveOptions {
            eps_target: 1e-3,
            ..Default::default()
        };
        let t1 = trace_path(&e, &opts).unwrap();
        let t2 = trace_path(&e2, &opts).unwrap();
        assert_eq!(t1.verdict, t2.verdict);
        assert_eq!(t1.steps.len(), t2.steps.len());
        for (a, b) in t1.steps.iter().zip(t2.steps.iter()) {
            assert_relative_eq!(a.sup_log, b.sup_log, epsilon = 1e-7, max_relative = 1e-7);
            assert_relative_eq!(a.l2_log, b.l2_log, epsilon = 1e-7, max_relative = 1e-7);
        }
    }
}
