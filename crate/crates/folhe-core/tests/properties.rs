//! Randomized structural invariants of the calculus and the bundle algebra.

use folhe_core::bundle::{BundleSpec, LineFactor};
use folhe_core::field::{p_operator_flat, BasicField};
use folhe_core::model::FoliatedTorusModel;
use folhe_core::moduli::{basic_gauge_lattice, parse_xi, DualPoint, TransverseModuli};
use folhe_core::stability::{harder_narasimhan, stability_verdict};
use folhe_core::exact::{Ratio, SqrtExt};
use nalgebra::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

type C = Complex<f64>;

fn model1() -> Arc<FoliatedTorusModel> {
    FoliatedTorusModel::product(1, 1, 1.0, 2)
}

fn model2() -> Arc<FoliatedTorusModel> {
    FoliatedTorusModel::product(2, 1, 1.0, 1)
}

fn rand_field(
    m: &Arc<FoliatedTorusModel>,
    p: usize,
    q: usize,
    r: usize,
    seed: u64,
    hermitian: bool,
) -> BasicField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BasicField::random(m, p, q, r, &mut rng, 1.0, 0.3, hermitian)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adjoint_is_an_involution(seed in 0u64..1000, p in 0usize..2, q in 0usize..2) {
        let m = model2();
        let a = rand_field(&m, p, q, 2, seed, false);
        let aa = a.adjoint().adjoint();
        prop_assert!(aa.sub(&a).linf_coeff_norm() < 1e-12);
    }

    #[test]
    fn inner_product_conjugate_symmetric(seed in 0u64..1000) {
        let m = model1();
        let a = rand_field(&m, 0, 1, 2, seed, false);
        let b = rand_field(&m, 0, 1, 2, seed.wrapping_add(1), false);
        let lhs = a.l2_inner(&b);
        let rhs = b.l2_inner(&a).conj();
        prop_assert!((lhs - rhs).norm() < 1e-11 * (1.0 + lhs.norm()));
    }

    #[test]
    fn scalar_wedge_graded_commutes(seed in 0u64..1000) {
        let m = model2();
        let a = rand_field(&m, 1, 0, 1, seed, false);
        let b = rand_field(&m, 0, 1, 1, seed.wrapping_add(7), false);
        // degree-1 forms with scalar values anticommute
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        prop_assert!(ab.add(&ba).linf_coeff_norm() < 1e-11 * (1.0 + ab.linf_coeff_norm()));
    }

    #[test]
    fn laplacian_is_positive(seed in 0u64..1000) {
        let m = model1();
        let f = rand_field(&m, 0, 0, 1, seed, true);
        let e = p_operator_flat(&f).l2_inner(&f);
        prop_assert!(e.im.abs() < 1e-10 * (1.0 + e.re.abs()));
        prop_assert!(e.re > -1e-12);
    }

    #[test]
    fn degree_is_additive(c1 in -3i64..4, c2 in -3i64..4, c3 in -3i64..4) {
        let m = model1();
        let a = BundleSpec::new(&m, vec![LineFactor::new(vec![c1])], vec![]).unwrap();
        let b = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![c2]), LineFactor::new(vec![c3])],
            vec![],
        )
        .unwrap();
        let s = a.direct_sum(&b);
        prop_assert!((s.degree() - a.degree() - b.degree()).abs() < 1e-10);
        // the dual flips the sign
        prop_assert!((s.dual().degree() + s.degree()).abs() < 1e-10);
    }

    #[test]
    fn tensoring_by_a_line_shifts_slope(c in -2i64..3, t in -2i64..3) {
        let m = model1();
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![c]), LineFactor::new(vec![c])],
            vec![],
        )
        .unwrap();
        let twisted = e.tensor_line(&LineFactor::new(vec![t]));
        prop_assert!((twisted.slope() - e.slope() - t as f64).abs() < 1e-10);
    }

    #[test]
    fn hn_layers_partition_and_slopes_decrease(cs in proptest::collection::vec(-2i64..3, 2..4)) {
        let m = model1();
        let e = BundleSpec::new(
            &m,
            cs.iter().map(|&c| LineFactor::new(vec![c])).collect(),
            vec![],
        )
        .unwrap();
        let layers = harder_narasimhan(&e);
        let total: usize = layers.iter().map(|l| l.rank).sum();
        prop_assert_eq!(total, e.rank());
        for w in layers.windows(2) {
            prop_assert!(w[0].slope > w[1].slope - 1e-9);
        }
        // stability verdict is consistent: one layer ⟺ semistable
        let rep = stability_verdict(&e);
        prop_assert_eq!(layers.len() == 1, rep.semistable);
    }

    #[test]
    fn basic_gauge_equivalence_is_an_equivalence(
        a in proptest::collection::vec(-5i128..6, 3),
        b in proptest::collection::vec(-5i128..6, 3),
    ) {
        let xi = parse_xi("1,sqrt2,sqrt3").unwrap();
        let tm = TransverseModuli::new(xi).unwrap();
        let mk = |v: &Vec<i128>| DualPoint {
            y: v.iter().map(|&x| SqrtExt::from_int(x)).collect(),
        };
        let (pa, pb) = (mk(&a), mk(&b));
        prop_assert!(tm.basic_gauge_equivalent(&pa, &pa));
        prop_assert_eq!(
            tm.basic_gauge_equivalent(&pa, &pb),
            tm.basic_gauge_equivalent(&pb, &pa)
        );
        // with fully independent ξ the only basic gauge move is the identity
        prop_assert_eq!(tm.basic_gauge_equivalent(&pa, &pb), a == b);
    }

    #[test]
    fn gauge_lattice_rank_matches_rational_rank(p in 1i128..4, q in 1i128..4) {
        // ξ = (p, q, sqrt2): one rational relation among the radicands
        let xi = vec![
            SqrtExt::from_ratio(Ratio::from_int(p)),
            SqrtExt::from_ratio(Ratio::from_int(q)),
            SqrtExt::sqrt_term(Ratio::from_int(1), 2),
        ];
        let lat = basic_gauge_lattice(&xi);
        prop_assert_eq!(lat.len(), 1);
        // the single generator is ±(q, -p, 0)/gcd
        let g = &lat[0];
        prop_assert_eq!(g[2], 0);
        prop_assert_eq!(g[0] * p + g[1] * q, 0);
    }

    #[test]
    fn curvature_type_and_degree_survive_metric_changes(seed in 0u64..1000) {
        let m = model1();
        let e = BundleSpec::new(
            &m,
            vec![LineFactor::new(vec![1]), LineFactor::new(vec![0])],
            vec![],
        )
        .unwrap();
        let s = rand_field(&m, 0, 0, 2, seed, true).scale(C::new(0.3, 0.0));
        let f = e.curvature(&s);
        prop_assert_eq!((f.p, f.q), (1, 1));
        // at s = 0 the curvature is the background one
        let f0 = e.curvature(&BasicField::zero(&m, 0, 0, 2));
        prop_assert!(f0.sub(&e.curvature_background()).linf_coeff_norm() < 1e-12);
        // and the degree never moves
        prop_assert!((folhe_core::bundle::degree_of_curvature(&f) - e.degree()).abs() < 1e-10);
    }
}
