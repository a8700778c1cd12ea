//! Flat U(1) moduli of the foliated 3-torus, in exact arithmetic.
//!
//! Basic flat connections a = Σ y_j dx^j (constant y with y·ξ = 0, where ξ
//! is the foliation direction) are basic-gauge equivalent iff y' - y is an
//! integer vector orthogonal to ξ. The transverse moduli space is therefore
//! ξ⊥/L_ξ with L_ξ = Z³ ∩ ξ⊥: a torus exactly when L_ξ has full rank 2
//! (rational foliation), and non-Hausdorff/non-compact when the rank drops —
//! which is a statement about exact integer relations among the components
//! of ξ, never a floating-point question. Components of ξ live in the real
//! quadratic extension field Q(√n₁, √n₂, …).

use crate::exact::{integer_kernel, Ratio, SqrtExt};
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModuliError {
    #[error("point is not transverse: y·ξ ≠ 0")]
    NotBasic,
    #[error("foliation is rational: the transverse moduli space is a compact dual torus")]
    CompactCase,
    #[error("cannot parse '{0}' as a rational-times-square-root expression")]
    Parse(String),
    #[error("direction vector must have exactly 3 components")]
    Dimension,
}

/// A flat-connection parameter point y ∈ R³ with exact coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPoint {
    pub y: Vec<SqrtExt>,
}

impl DualPoint {
    pub fn sub(&self, other: &DualPoint) -> Vec<SqrtExt> {
        self.y
            .iter()
            .zip(other.y.iter())
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Squared Euclidean norm, exact in the extension field.
    pub fn norm_sq(v: &[SqrtExt]) -> SqrtExt {
        let mut acc = SqrtExt::zero();
        for x in v {
            acc = &acc + &(x * x);
        }
        acc
    }
}

fn dot(a: &[SqrtExt], b: &[SqrtExt]) -> SqrtExt {
    let mut acc = SqrtExt::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = &acc + &(x * y);
    }
    acc
}

/// Plain gauge equivalence on the full dual torus: integer difference.
pub fn gauge_equivalent(a: &DualPoint, b: &DualPoint) -> bool {
    a.sub(b).iter().all(|d| d.as_integer().is_some())
}

/// The exact lattice L_ξ = {m ∈ Z³ : m·ξ = 0}, computed from the integer
/// relations among the rational coordinates of ξ over its radical basis.
pub fn basic_gauge_lattice(xi: &[SqrtExt]) -> Vec<Vec<i128>> {
    let d = xi.len();
    // collect all radicands appearing in ξ
    let mut rads: Vec<i128> = Vec::new();
    for x in xi {
        for r in x.terms.keys() {
            if !rads.contains(r) {
                rads.push(*r);
            }
        }
    }
    rads.sort();
    // m·ξ = 0 ⟺ Σ_i m_i q_{iρ} = 0 for every radicand ρ; scale each row of
    // rationals to integers by the common denominator
    let mut rows: Vec<Vec<i128>> = Vec::new();
    for rho in &rads {
        let qs: Vec<Ratio> = xi
            .iter()
            .map(|x| x.terms.get(rho).copied().unwrap_or(Ratio::new(0, 1)))
            .collect();
        let mut den: i128 = 1;
        for q in &qs {
            den = den / gcd_i128(den, q.den()) * q.den();
        }
        rows.push(qs.iter().map(|q| q.num() * (den / q.den())).collect());
    }
    integer_kernel(&rows, d)
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// The transverse moduli problem for one foliation direction.
pub struct TransverseModuli {
    pub xi: Vec<SqrtExt>,
    pub lattice: Vec<Vec<i128>>,
}

impl TransverseModuli {
    pub fn new(xi: Vec<SqrtExt>) -> Result<Self, ModuliError> {
        if xi.len() != 3 {
            return Err(ModuliError::Dimension);
        }
        let lattice = basic_gauge_lattice(&xi);
        Ok(TransverseModuli { xi, lattice })
    }

    pub fn lattice_rank(&self) -> usize {
        self.lattice.len()
    }

    /// Compact dual torus ⟺ the basic gauge lattice has the full transverse
    /// rank 2.
    pub fn is_compact(&self) -> bool {
        self.lattice_rank() == 2
    }

    /// Validate that a point is a basic connection parameter (y ⊥ ξ).
    pub fn check_basic(&self, p: &DualPoint) -> Result<(), ModuliError> {
        if dot(&p.y, &self.xi).is_zero() {
            Ok(())
        } else {
            Err(ModuliError::NotBasic)
        }
    }

    /// Exact basic-gauge equivalence: the difference must be an integer
    /// vector annihilating ξ.
    pub fn basic_gauge_equivalent(&self, a: &DualPoint, b: &DualPoint) -> bool {
        let d = a.sub(b);
        let ints: Option<Vec<i128>> = d.iter().map(|x| x.as_integer()).collect();
        match ints {
            None => false,
            Some(m) => {
                let mdotxi = dot(
                    &m.iter().map(|&k| SqrtExt::from_int(k)).collect::<Vec<_>>(),
                    &self.xi,
                );
                mdotxi.is_zero()
            }
        }
    }
}

/// An exact witness that the transverse moduli space is non-compact: the
/// gauge lattice is rank-deficient and an explicit arithmetic progression of
/// transverse points is pairwise inequivalent with strictly growing norm.
#[derive(Serialize)]
pub struct NoncompactnessCertificate {
    pub xi_display: Vec<String>,
    pub lattice_rank: usize,
    pub direction_display: Vec<String>,
    pub points: usize,
    pub pairwise_inequivalent: bool,
    pub norms_strictly_increasing: bool,
    pub valid: bool,
}

/// Build the certificate for a foliation direction ξ on T³: points
/// y_j = j·v with v = (ξ₂, -ξ₁, 0) ∈ ξ⊥. Errors with `CompactCase` when the
/// lattice has rank 2 (the moduli space is an honest dual 2-torus).
pub fn noncompactness_certificate(
    xi: &[SqrtExt],
    count: usize,
) -> Result<NoncompactnessCertificate, ModuliError> {
    if xi.len() != 3 {
        return Err(ModuliError::Dimension);
    }
    let tm = TransverseModuli::new(xi.to_vec())?;
    if tm.is_compact() {
        return Err(ModuliError::CompactCase);
    }
    // v ⊥ ξ by construction; rotate coordinates if the first choice is zero
    let candidates = [
        vec![xi[1].clone(), -&xi[0], SqrtExt::zero()],
        vec![xi[2].clone(), SqrtExt::zero(), -&xi[0]],
        vec![SqrtExt::zero(), xi[2].clone(), -&xi[1]],
    ];
    let v = candidates
        .iter()
        .find(|v| !v.iter().all(|c| c.is_zero()))
        .cloned()
        .expect("ξ ≠ 0");
    debug_assert!(dot(&v, xi).is_zero());
    let points: Vec<DualPoint> = (0..count)
        .map(|j| DualPoint {
            y: v.iter()
                .map(|c| c.scale(Ratio::from_int(j as i128)))
                .collect(),
        })
        .collect();
    for p in &points {
        tm.check_basic(p)?;
    }
    let mut pairwise = true;
    for i in 0..count {
        for j in (i + 1)..count {
            if tm.basic_gauge_equivalent(&points[i], &points[j]) {
                pairwise = false;
            }
        }
    }
    let mut increasing = true;
    let mut prev = SqrtExt::zero();
    for p in points.iter().skip(1) {
        let ns = DualPoint::norm_sq(&p.sub(&points[0]));
        if (&ns - &prev).sign() != Ordering::Greater {
            increasing = false;
        }
        prev = ns;
    }
    let valid = pairwise && increasing && tm.lattice_rank() < 2;
    Ok(NoncompactnessCertificate {
        xi_display: xi.iter().map(|x| format!("{x}")).collect(),
        lattice_rank: tm.lattice_rank(),
        direction_display: v.iter().map(|x| format!("{x}")).collect(),
        points: count,
        pairwise_inequivalent: pairwise,
        norms_strictly_increasing: increasing,
        valid,
    })
}

/// Parse one component: `a/b`, `n`, `sqrtN`, `a/b*sqrtN`, with optional
/// leading minus.
pub fn parse_sqrt_expr(s: &str) -> Result<SqrtExt, ModuliError> {
    let s = s.trim();
    let err = || ModuliError::Parse(s.to_string());
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, s),
    };
    let parse_ratio = |t: &str| -> Result<Ratio, ModuliError> {
        let t = t.trim();
        if let Some((a, b)) = t.split_once('/') {
            let num: i128 = a.trim().parse().map_err(|_| err())?;
            let den: i128 = b.trim().parse().map_err(|_| err())?;
            if den == 0 {
                return Err(err());
            }
            Ok(Ratio::new(num, den))
        } else {
            let n: i128 = t.parse().map_err(|_| err())?;
            Ok(Ratio::from_int(n))
        }
    };
    let val = if let Some(pos) = body.find("sqrt") {
        let coeff_str = body[..pos].trim().trim_end_matches('*').trim();
        let coeff = if coeff_str.is_empty() {
            Ratio::from_int(1)
        } else {
            parse_ratio(coeff_str)?
        };
        let rad: i128 = body[pos + 4..].trim().parse().map_err(|_| err())?;
        if rad <= 0 {
            return Err(err());
        }
        SqrtExt::sqrt_term(coeff, rad)
    } else {
        SqrtExt::from_ratio(parse_ratio(body)?)
    };
    Ok(if neg { -&val } else { val })
}

/// Parse a comma-separated direction like `1,sqrt2,sqrt3` or `0,0,1`.
pub fn parse_xi(s: &str) -> Result<Vec<SqrtExt>, ModuliError> {
    s.split(',').map(parse_sqrt_expr).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xi_irr() -> Vec<SqrtExt> {
        parse_xi("1,sqrt2,sqrt3").unwrap()
    }

    #[test]
    fn parser_roundtrip() {
        assert_eq!(parse_sqrt_expr("3").unwrap(), SqrtExt::from_int(3));
        assert_eq!(
            parse_sqrt_expr("-1/2").unwrap(),
            SqrtExt::from_ratio(Ratio::new(-1, 2))
        );
        assert_eq!(
            parse_sqrt_expr("sqrt2").unwrap(),
            SqrtExt::sqrt_term(Ratio::from_int(1), 2)
        );
        assert_eq!(
            parse_sqrt_expr("3/4*sqrt5").unwrap(),
            SqrtExt::sqrt_term(Ratio::new(3, 4), 5)
        );
        assert!(parse_sqrt_expr("sqrt-1").is_err());
        assert!(parse_sqrt_expr("abc").is_err());
    }

    #[test]
    fn lattice_ranks() {
        // fully irrational: no relations at all
        let tm = TransverseModuli::new(xi_irr()).unwrap();
        assert_eq!(tm.lattice_rank(), 0);
        assert!(!tm.is_compact());
        // one rational relation: ξ = (1, sqrt2, 0) keeps e₃
        let tm = TransverseModuli::new(parse_xi("1,sqrt2,0").unwrap()).unwrap();
        assert_eq!(tm.lattice_rank(), 1);
        assert_eq!(tm.lattice[0], vec![0, 0, 1]);
        // regular foliation: rank 2, compact dual torus
        let tm = TransverseModuli::new(parse_xi("0,0,1").unwrap()).unwrap();
        assert_eq!(tm.lattice_rank(), 2);
        assert!(tm.is_compact());
        // rational slope is still compact: ξ = (2,3,6)
        let tm = TransverseModuli::new(parse_xi("2,3,6").unwrap()).unwrap();
        assert!(tm.is_compact());
    }

    #[test]
    fn regular_foliation_equivalences() {
        let tm = TransverseModuli::new(parse_xi("0,0,1").unwrap()).unwrap();
        let a = DualPoint {
            y: vec![
                SqrtExt::from_ratio(Ratio::new(1, 2)),
                SqrtExt::from_ratio(Ratio::new(1, 3)),
                SqrtExt::zero(),
            ],
        };
        tm.check_basic(&a).unwrap();
        let mut b = a.clone();
        b.y[0] = &b.y[0] + &SqrtExt::from_int(1);
        b.y[1] = &b.y[1] - &SqrtExt::from_int(2);
        assert!(tm.basic_gauge_equivalent(&a, &b));
        // non-integer shift: inequivalent
        let mut c = a.clone();
        c.y[0] = &c.y[0] + &SqrtExt::from_ratio(Ratio::new(1, 5));
        assert!(!tm.basic_gauge_equivalent(&a, &c));
        // leaf-direction point is not basic
        let bad = DualPoint {
            y: vec![SqrtExt::zero(), SqrtExt::zero(), SqrtExt::from_int(1)],
        };
        assert!(matches!(tm.check_basic(&bad), Err(ModuliError::NotBasic)));
        // compact case refuses a noncompactness certificate
        assert!(matches!(
            noncompactness_certificate(&parse_xi("0,0,1").unwrap(), 5),
            Err(ModuliError::CompactCase)
        ));
    }

    #[test]
    fn irrational_certificate() {
        let cert = noncompactness_certificate(&xi_irr(), 10).unwrap();
        assert!(cert.valid);
        assert_eq!(cert.lattice_rank, 0);
        assert!(cert.pairwise_inequivalent);
        assert!(cert.norms_strictly_increasing);
        // partial relations (rank 1) still give a certificate
        let cert = noncompactness_certificate(&parse_xi("1,sqrt2,0").unwrap(), 10).unwrap();
        assert!(cert.valid);
        assert_eq!(cert.lattice_rank, 1);
    }

    #[test]
    fn exact_distances() {
        // ‖y_2 - y_0‖² = 4(ξ₁² + ξ₂²) exactly, for ξ = (1,√2,√3): 4(1+2) = 12
        let xi = xi_irr();
        let v = vec![xi[1].clone(), -&xi[0], SqrtExt::zero()];
        let p0 = DualPoint {
            y: v.iter().map(|c| c.scale(Ratio::from_int(0))).collect(),
        };
        let p2 = DualPoint {
            y: v.iter().map(|c| c.scale(Ratio::from_int(2))).collect(),
        };
        let ns = DualPoint::norm_sq(&p2.sub(&p0));
        assert_eq!(ns.as_integer(), Some(12));
    }

    #[test]
    fn plain_gauge_on_full_torus() {
        let a = DualPoint {
            y: vec![
                SqrtExt::from_ratio(Ratio::new(2, 7)),
                SqrtExt::zero(),
                SqrtExt::from_int(0),
            ],
        };
        let mut b = a.clone();
        b.y[2] = SqrtExt::from_int(4);
        assert!(gauge_equivalent(&a, &b));
        b.y[1] = SqrtExt::sqrt_term(Ratio::from_int(1), 2);
        assert!(!gauge_equivalent(&a, &b));
    }
}
