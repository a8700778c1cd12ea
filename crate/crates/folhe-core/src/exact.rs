//! Exact arithmetic: rationals, real quadratic radicals, and integer lattice
//! kernels.
//!
//! Admissibility of Fourier modes and gauge equivalence in the flat-connection
//! moduli example are exact-irrationality statements; they are decided here
//! with integer/rational arithmetic only, never with floating point.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Rational number with i128 numerator/denominator, always kept reduced with
/// a positive denominator. Panics on overflow, which is acceptable at desk
/// scale (inputs are small integers).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: i128,
    den: i128,
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num, den).max(1);
        let sign = if den < 0 { -1 } else { 1 };
        Ratio {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn from_int(n: i128) -> Self {
        Ratio { num: n, den: 1 }
    }

    pub fn num(&self) -> i128 {
        self.num
    }
    pub fn den(&self) -> i128 {
        self.den
    }
    pub fn is_zero(&self) -> bool {
        self.num == 0
    }
    pub fn is_integer(&self) -> bool {
        self.den == 1
    }
    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
    pub fn recip(&self) -> Ratio {
        assert!(self.num != 0, "division by zero");
        Ratio::new(self.den, self.num)
    }
    pub fn abs(&self) -> Ratio {
        Ratio {
            num: self.num.abs(),
            den: self.den,
        }
    }
}

impl Add for Ratio {
    type Output = Ratio;
    fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }
}
impl Sub for Ratio {
    type Output = Ratio;
    fn sub(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }
}
impl Mul for Ratio {
    type Output = Ratio;
    fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }
}
impl Neg for Ratio {
    type Output = Ratio;
    fn neg(self) -> Ratio {
        Ratio {
            num: -self.num,
            den: self.den,
        }
    }
}
impl PartialOrd for Ratio {
    fn partial_cmp(&self, o: &Ratio) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Ratio {
    fn cmp(&self, o: &Ratio) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}
impl fmt::Debug for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}
impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Strip the square part of a positive integer: returns (s, r) with n = s²·r
/// and r squarefree.
fn squarefree_split(n: i128) -> (i128, i128) {
    assert!(n > 0);
    let mut s = 1i128;
    let mut r = n;
    let mut p = 2i128;
    while p * p <= r {
        while r % (p * p) == 0 {
            r /= p * p;
            s *= p;
        }
        p += 1;
    }
    (s, r)
}

/// Element of the real field Q(√2, √3, √5, ...): a finite rational
/// combination of square roots of squarefree positive integers. The radicand
/// 1 carries the rational part. Square roots of distinct squarefree integers
/// are linearly independent over Q, so equality and the zero test are exact
/// coefficient comparisons.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct SqrtExt {
    /// squarefree radicand -> rational coefficient (no zero coefficients kept)
    pub terms: BTreeMap<i128, Ratio>,
}

impl SqrtExt {
    pub fn zero() -> Self {
        SqrtExt::default()
    }

    pub fn from_ratio(q: Ratio) -> Self {
        let mut t = BTreeMap::new();
        if !q.is_zero() {
            t.insert(1, q);
        }
        SqrtExt { terms: t }
    }

    pub fn from_int(n: i128) -> Self {
        Self::from_ratio(Ratio::from_int(n))
    }

    /// q·√n for any positive integer n (the square part is folded into q).
    pub fn sqrt_term(q: Ratio, n: i128) -> Self {
        assert!(n > 0, "radicand must be positive");
        let (s, r) = squarefree_split(n);
        let coeff = q * Ratio::from_int(s);
        let mut t = BTreeMap::new();
        if !coeff.is_zero() {
            t.insert(r, coeff);
        }
        SqrtExt { terms: t }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exactly a rational number? Returns it if so.
    pub fn as_ratio(&self) -> Option<Ratio> {
        match self.terms.len() {
            0 => Some(Ratio::ZERO),
            1 => self.terms.get(&1).copied(),
            _ => None,
        }
    }

    /// Exactly an integer? Returns it if so.
    pub fn as_integer(&self) -> Option<i128> {
        self.as_ratio()
            .filter(|q| q.is_integer())
            .map(|q| q.num())
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(r, q)| q.to_f64() * (*r as f64).sqrt())
            .sum()
    }

    pub fn scale(&self, q: Ratio) -> Self {
        if q.is_zero() {
            return SqrtExt::zero();
        }
        SqrtExt {
            terms: self.terms.iter().map(|(r, c)| (*r, *c * q)).collect(),
        }
    }

    /// Exact sign when decidable by coefficient structure alone; otherwise a
    /// floating evaluation with a safety margin. Panics if the value is
    /// nonzero but numerically indistinguishable from zero — never reached
    /// for the small radicands used here.
    pub fn sign(&self) -> Ordering {
        if self.terms.is_empty() {
            return Ordering::Equal;
        }
        if self.terms.values().all(|q| q > &Ratio::ZERO) {
            return Ordering::Greater;
        }
        if self.terms.values().all(|q| q < &Ratio::ZERO) {
            return Ordering::Less;
        }
        let v = self.to_f64();
        assert!(
            v.abs() > 1e-9,
            "sign of radical expression numerically indeterminate"
        );
        if v > 0.0 {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

impl Add for &SqrtExt {
    type Output = SqrtExt;
    fn add(self, o: &SqrtExt) -> SqrtExt {
        let mut t = self.terms.clone();
        for (r, q) in &o.terms {
            let e = t.entry(*r).or_insert(Ratio::ZERO);
            *e = *e + *q;
            if e.is_zero() {
                t.remove(r);
            }
        }
        SqrtExt { terms: t }
    }
}
impl Sub for &SqrtExt {
    type Output = SqrtExt;
    fn sub(self, o: &SqrtExt) -> SqrtExt {
        self + &o.neg()
    }
}
impl Neg for &SqrtExt {
    type Output = SqrtExt;
    fn neg(self) -> SqrtExt {
        SqrtExt {
            terms: self.terms.iter().map(|(r, q)| (*r, -*q)).collect(),
        }
    }
}
impl Mul for &SqrtExt {
    type Output = SqrtExt;
    fn mul(self, o: &SqrtExt) -> SqrtExt {
        // √r·√s = g·√(rs/g²) with g = gcd(r,s); r, s squarefree keeps rs/g²
        // squarefree.
        let mut out = SqrtExt::zero();
        for (r, a) in &self.terms {
            for (s, b) in &o.terms {
                let g = gcd(*r, *s);
                let rad = (r / g) * (s / g);
                let coeff = *a * *b * Ratio::from_int(g);
                let mut term = BTreeMap::new();
                if !coeff.is_zero() {
                    term.insert(rad, coeff);
                }
                out = &out + &SqrtExt { terms: term };
            }
        }
        out
    }
}

impl fmt::Debug for SqrtExt {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(r, q)| {
                if *r == 1 {
                    format!("{q}")
                } else {
                    format!("{q}*sqrt{r}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}
impl fmt::Display for SqrtExt {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Basis of the rational kernel {x ∈ Q^d : M x = 0} of an integer matrix,
/// returned as primitive integer vectors (denominators cleared, content
/// divided out). Plain fraction-free Gaussian elimination.
pub fn integer_kernel(rows: &[Vec<i128>], d: usize) -> Vec<Vec<i128>> {
    let mut m: Vec<Vec<Ratio>> = rows
        .iter()
        .map(|r| {
            assert_eq!(r.len(), d);
            r.iter().map(|&x| Ratio::from_int(x)).collect()
        })
        .collect();
    let nrows = m.len();
    let mut pivot_col_of_row = Vec::new();
    let mut row = 0;
    for col in 0..d {
        let Some(pr) = (row..nrows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, pr);
        let inv = m[row][col].recip();
        for c in 0..d {
            m[row][c] = m[row][c] * inv;
        }
        for r in 0..nrows {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col];
                for c in 0..d {
                    m[r][c] = m[r][c] - factor * m[row][c];
                }
            }
        }
        pivot_col_of_row.push(col);
        row += 1;
        if row == nrows {
            break;
        }
    }
    let pivot_cols: Vec<usize> = pivot_col_of_row.clone();
    let free_cols: Vec<usize> = (0..d).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = Vec::new();
    for &fc in &free_cols {
        let mut v = vec![Ratio::ZERO; d];
        v[fc] = Ratio::ONE;
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -m[r][fc];
        }
        // clear denominators, divide out content
        let mut den: i128 = 1;
        for x in &v {
            den = den / gcd(den, x.den()) * x.den();
        }
        let mut iv: Vec<i128> = v.iter().map(|x| x.num() * (den / x.den())).collect();
        let mut content = 0;
        for &x in &iv {
            content = gcd(content, x);
        }
        if content > 1 {
            for x in &mut iv {
                *x /= content;
            }
        }
        basis.push(iv);
    }
    basis
}

/// Rank of the lattice spanned by integer vectors (rational row rank).
pub fn lattice_rank(rows: &[Vec<i128>], d: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    d - integer_kernel(rows, d).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_basics() {
        let a = Ratio::new(2, 4);
        assert_eq!(a, Ratio::new(1, 2));
        assert_eq!(a + a, Ratio::ONE);
        assert_eq!(Ratio::new(1, 3) * Ratio::new(3, 5), Ratio::new(1, 5));
        assert!(Ratio::new(-1, 2) < Ratio::ZERO);
        assert_eq!(Ratio::new(5, -10), Ratio::new(-1, 2));
    }

    #[test]
    fn squarefree() {
        assert_eq!(squarefree_split(12), (2, 3));
        assert_eq!(squarefree_split(49), (7, 1));
        assert_eq!(squarefree_split(30), (1, 30));
    }

    #[test]
    fn sqrt_ext_arith() {
        let s2 = SqrtExt::sqrt_term(Ratio::ONE, 2);
        let s3 = SqrtExt::sqrt_term(Ratio::ONE, 3);
        let s6 = &s2 * &s3;
        assert_eq!(s6, SqrtExt::sqrt_term(Ratio::ONE, 6));
        // (√2)² = 2
        assert_eq!(&s2 * &s2, SqrtExt::from_int(2));
        // √8 = 2√2
        assert_eq!(
            SqrtExt::sqrt_term(Ratio::ONE, 8),
            s2.scale(Ratio::from_int(2))
        );
        // 1 + √2 - √2 = 1
        let one = SqrtExt::from_int(1);
        assert_eq!(&(&one + &s2) - &s2, one);
        assert!((&s2 - &s3).sign() == Ordering::Less);
        assert_eq!(SqrtExt::from_int(7).as_integer(), Some(7));
        assert_eq!(s2.as_integer(), None);
    }

    #[test]
    fn kernel_of_identity_like() {
        // generators e0,e1,e2 in Z^3: kernel is trivial
        let gens = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        assert!(integer_kernel(&gens, 3).is_empty());
        // single generator e2: kernel spanned by e0,e1
        let k = integer_kernel(&[vec![0, 0, 1]], 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_eq!(v[2], 0);
        }
        // relation (1,1,1): kernel rank 2, each vector sums to 0
        let k = integer_kernel(&[vec![1, 1, 1]], 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_eq!(v.iter().sum::<i128>(), 0);
        }
        assert_eq!(lattice_rank(&[vec![0, 0, 1], vec![0, 0, 2]], 3), 1);
    }
}
