//! Prebuilt check batteries shared by the command-line front-end and the
//! integration suite: kernel exactness, degree metric-independence, the
//! convergence/blow-up dichotomy battery, and the Einstein-factor line check.

use crate::bundle::{degree_of_curvature, BundleSpec, ExtClass, LineFactor};
use crate::exterior::C;
use crate::field::{p_operator_flat, BasicField};
use crate::model::FoliatedTorusModel;
use crate::solver::{
    extract_destabilizer, gamma_id, trace_path, Destabilizer, PathTrace, SolveOptions,
    SolverError, Verdict,
};
use crate::stability::{stability_verdict, StabilityReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

/// Worst defects over a randomized battery of exactness and adjointness
/// checks for the transverse calculus.
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub samples: usize,
    /// max ‖∂̄²f‖ over random endomorphism-valued functions
    pub dbar_sq_max: f64,
    /// max |∫ d_B α ∧ χ| over random forms of total transverse degree 2n-1
    pub stokes_max: f64,
    /// relative self-adjointness defect of P = iΛ∂̄∂
    pub p_adjoint_rel_max: f64,
    /// relative L/Λ adjointness defect
    pub lefschetz_adjoint_rel_max: f64,
}

impl KernelReport {
    pub fn passes(&self) -> bool {
        self.dbar_sq_max < 1e-13
            && self.stokes_max < 1e-13
            && self.p_adjoint_rel_max < 1e-11
            && self.lefschetz_adjoint_rel_max < 1e-11
    }
}

pub fn kernel_check(model: &Arc<FoliatedTorusModel>, samples: usize, seed: u64) -> KernelReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n;
    let mut rep = KernelReport {
        samples,
        dbar_sq_max: 0.0,
        stokes_max: 0.0,
        p_adjoint_rel_max: 0.0,
        lefschetz_adjoint_rel_max: 0.0,
    };
    let rel = |a: C, b: C| (a - b).norm() / (a.norm() + b.norm() + f64::MIN_POSITIVE);
    for _ in 0..samples {
        // ∂̄² (trivial by degree when n = 1, still exercised)
        let f = BasicField::random(model, 0, 0, 2, &mut rng, 1.0, 0.3, false);
        let (_, db) = f.dolbeault();
        if n >= 2 {
            let (_, db2) = db.dolbeault();
            rep.dbar_sq_max = rep.dbar_sq_max.max(db2.linf_coeff_norm());
        }
        // basic Stokes on both degree-(2n-1) bidegrees
        let a = BasicField::random(model, n - 1, n, 1, &mut rng, 1.0, 0.3, false);
        let (da, _) = a.dolbeault();
        rep.stokes_max = rep.stokes_max.max(da.integrate().expect("(n,n)").norm());
        let b = BasicField::random(model, n, n - 1, 1, &mut rng, 1.0, 0.3, false);
        let (_, dbb) = b.dolbeault();
        rep.stokes_max = rep.stokes_max.max(dbb.integrate().expect("(n,n)").norm());
        // P self-adjointness
        let u = BasicField::random(model, 0, 0, 1, &mut rng, 1.0, 0.3, false);
        let v = BasicField::random(model, 0, 0, 1, &mut rng, 1.0, 0.3, false);
        let lhs = p_operator_flat(&u).l2_inner(&v);
        let rhs = u.l2_inner(&p_operator_flat(&v));
        rep.p_adjoint_rel_max = rep.p_adjoint_rel_max.max(rel(lhs, rhs));
        // ⟨Lα, β⟩ = ⟨α, Λβ⟩
        let x = BasicField::random(model, 0, 0, 1, &mut rng, 1.0, 0.3, false);
        let y = BasicField::random(model, 1, 1, 1, &mut rng, 1.0, 0.3, false);
        let lhs = x.lefschetz().expect("n ≥ 1").l2_inner(&y);
        let rhs = x.l2_inner(&y.contract());
        rep.lefschetz_adjoint_rel_max = rep.lefschetz_adjoint_rel_max.max(rel(lhs, rhs));
    }
    rep
}

/// Max |deg(F_{h·e^s}) − deg| over random endomorphism + conformal changes of
/// the bundle metric, cycling through a small pool of bundles.
pub fn degree_independence(
    model: &Arc<FoliatedTorusModel>,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n;
    let c = |v: i64| {
        let mut cs = vec![0i64; n];
        cs[0] = v;
        cs
    };
    let pool: Vec<BundleSpec> = vec![
        BundleSpec::new(
            model,
            vec![LineFactor::new(c(1)), LineFactor::new(c(0))],
            vec![],
        )
        .unwrap(),
        BundleSpec::new(
            model,
            vec![
                LineFactor::new(c(2)),
                LineFactor::new(c(-1)),
                LineFactor::new(c(0)),
            ],
            vec![],
        )
        .unwrap(),
        BundleSpec::new(
            model,
            vec![LineFactor::new(c(0)), LineFactor::new(c(0))],
            vec![ExtClass::constant(0, 1, n, C::new(1.0, 0.0))],
        )
        .unwrap(),
    ];
    let mut worst = 0.0f64;
    for t in 0..trials {
        let bundle = &pool[t % pool.len()];
        let r = bundle.rank();
        // endomorphism change plus a conformal factor on the diagonal
        let mut s = BasicField::random(model, 0, 0, r, &mut rng, 0.3, 0.5, true);
        let psi = BasicField::random(model, 0, 0, 1, &mut rng, 0.3, 0.5, true);
        for i in 0..r {
            let src = psi.slice(0, 0, 0).to_vec();
            let dst = s.slice_mut(0, i, i);
            for (d, v) in dst.iter_mut().zip(src.iter()) {
                *d += v;
            }
        }
        let dev = (degree_of_curvature(&bundle.curvature(&s)) - bundle.degree()).abs();
        worst = worst.max(dev);
    }
    worst
}

/// The dichotomy battery: four polystable bundles that must CONVERGE and
/// four unstable ones that must BLOW UP, all rank ≤ 3 on an n = 1 model.
pub fn dichotomy_battery(model: &Arc<FoliatedTorusModel>) -> Vec<(String, BundleSpec)> {
    assert_eq!(model.n, 1, "the battery lives on a transverse torus");
    let l = |v: i64| LineFactor::new(vec![v]);
    let mk = |factors: Vec<LineFactor>, ext: Vec<ExtClass>| {
        BundleSpec::new(model, factors, ext).expect("battery bundle")
    };
    // a gauge-trivially split extension: the class is ∂̄-exact (single
    // nonzero mode), so the bundle is isomorphic to O ⊕ O
    let mut trivial_ext = ExtClass::constant(0, 1, 1, C::new(0.0, 0.0));
    trivial_ext.modes = vec![(vec![1, 0], vec![C::new(0.7, 0.3)])];
    vec![
        ("sum_0_0".into(), mk(vec![l(0), l(0)], vec![])),
        ("sum_1_1".into(), mk(vec![l(1), l(1)], vec![])),
        (
            "sum_m1_m1_m1".into(),
            mk(vec![l(-1), l(-1), l(-1)], vec![]),
        ),
        (
            "split_ext_0_0".into(),
            mk(vec![l(0), l(0)], vec![trivial_ext]),
        ),
        ("sum_1_0".into(), mk(vec![l(1), l(0)], vec![])),
        ("sum_2_0".into(), mk(vec![l(2), l(0)], vec![])),
        (
            "sum_1_0_m1".into(),
            mk(vec![l(1), l(0), l(-1)], vec![]),
        ),
        (
            "ext_destabilized".into(),
            mk(
                vec![l(1), l(0), l(0)],
                vec![ExtClass::constant(1, 2, 1, C::new(1.0, 0.0))],
            ),
        ),
    ]
}

/// One battery case, solved and cross-examined.
#[derive(Serialize)]
pub struct DichotomyOutcome {
    pub name: String,
    pub rank: usize,
    pub degree: f64,
    pub slope: f64,
    pub stability: StabilityReport,
    pub expected: Verdict,
    pub solver: Verdict,
    pub agree: bool,
    pub trace: PathTrace,
    pub destabilizer: Option<Destabilizer>,
}

pub fn run_dichotomy_case(
    name: &str,
    bundle: &BundleSpec,
    opts: &SolveOptions,
) -> Result<DichotomyOutcome, SolverError> {
    let stability = stability_verdict(bundle);
    let expected = if stability.polystable {
        Verdict::Converged
    } else {
        Verdict::Blowup
    };
    let trace = trace_path(bundle, opts)?;
    let destabilizer = if trace.verdict == Verdict::Blowup {
        extract_destabilizer(bundle, &trace)
    } else {
        None
    };
    Ok(DichotomyOutcome {
        name: name.to_string(),
        rank: bundle.rank(),
        degree: bundle.degree(),
        slope: bundle.slope(),
        agree: trace.verdict == expected,
        expected,
        solver: trace.verdict,
        stability,
        trace,
        destabilizer,
    })
}

/// Einstein-factor check on the c = 1 line bundle over the unit-volume
/// n = 1 product model: solve, then measure sup |iΛF − γ| pointwise.
#[derive(Serialize)]
pub struct EinsteinLineOutcome {
    pub gamma: f64,
    pub sup_deviation: f64,
    pub verdict: Verdict,
}

pub fn einstein_line_check(cutoff: usize) -> Result<EinsteinLineOutcome, SolverError> {
    let model = FoliatedTorusModel::product(1, 1, 1.0, cutoff);
    let bundle = BundleSpec::new(&model, vec![LineFactor::new(vec![1])], vec![]).unwrap();
    let trace = trace_path(&bundle, &SolveOptions::default())?;
    let mc = bundle.mean_curvature(&trace.final_s);
    let dev = mc
        .sub(&gamma_id(&model, 1, trace.gamma))
        .max_pointwise_norm();
    Ok(EinsteinLineOutcome {
        gamma: trace.gamma,
        sup_deviation: dev,
        verdict: trace.verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_battery_is_clean() {
        for n in 1..=2usize {
            let m = FoliatedTorusModel::product(n, 1, 1.0, 2);
            let rep = kernel_check(&m, 10, 7);
            assert!(rep.passes(), "{rep:?}");
        }
    }

    #[test]
    fn degree_survives_metric_changes() {
        let m = FoliatedTorusModel::product(1, 1, 1.0, 3);
        assert!(degree_independence(&m, 6, 99) < 1e-10);
    }

    #[test]
    fn battery_stability_pattern() {
        let m = FoliatedTorusModel::product(1, 1, 1.0, 3);
        let battery = dichotomy_battery(&m);
        assert_eq!(battery.len(), 8);
        let poly: Vec<bool> = battery
            .iter()
            .map(|(_, b)| stability_verdict(b).polystable)
            .collect();
        assert_eq!(poly, vec![true, true, true, true, false, false, false, false]);
    }

    #[test]
    fn einstein_line_small() {
        let out = einstein_line_check(3).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert!((out.gamma - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(out.sup_deviation < 1e-8, "dev = {}", out.sup_deviation);
    }

    #[test]
    fn one_case_each_way() {
        let m = FoliatedTorusModel::product(1, 1, 1.0, 3);
        let battery = dichotomy_battery(&m);
        let opts = SolveOptions {
            eps_target: 1e-4,
            ..SolveOptions::default()
        };
        let conv = run_dichotomy_case(&battery[3].0, &battery[3].1, &opts).unwrap();
        assert!(conv.agree, "{:?} vs {:?}", conv.solver, conv.expected);
        let blow = run_dichotomy_case(&battery[4].0, &battery[4].1, &opts).unwrap();
        assert!(blow.agree, "{:?} vs {:?}", blow.solver, blow.expected);
        assert!(blow.destabilizer.is_some());
    }
}
