//! Exact integer polynomials and L-polynomials.
//!
//! Coefficients are arbitrary precision; there is no floating point here.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The constant field size `q = 4`.
pub const Q: u64 = 4;

/// Dense integer polynomial, coefficient `i` multiplies `T^i`. Trailing zero
/// coefficients are trimmed, so the zero polynomial has no coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ZPoly {
    coeffs: Vec<BigInt>,
}

impl ZPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> ZPoly {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        ZPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> ZPoly {
        ZPoly::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn one() -> ZPoly {
        ZPoly::from_i64(&[1])
    }

    pub fn zero() -> ZPoly {
        ZPoly { coeffs: vec![] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Coefficient of `T^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn mul(&self, other: &ZPoly) -> ZPoly {
        mul_poly(self, other)
    }

    pub fn pow(&self, e: u32) -> ZPoly {
        (0..e).fold(ZPoly::one(), |acc, _| acc.mul(self))
    }

    pub fn eval(&self, t: &BigInt) -> BigInt {
        eval_at(self, t)
    }
}

impl fmt::Debug for ZPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Renders in the `1+3T+4T^2` style.
impl fmt::Display for ZPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { "-" } else { "+" })?;
            }
            first = false;
            let show_coeff = i == 0 || !abs.is_one();
            if show_coeff {
                write!(f, "{abs}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "T")?,
                _ => write!(f, "T^{i}")?,
            }
        }
        Ok(())
    }
}

pub fn mul_poly(a: &ZPoly, b: &ZPoly) -> ZPoly {
    if a.is_zero() || b.is_zero() {
        return ZPoly::zero();
    }
    let mut out = vec![BigInt::zero(); a.coeffs.len() + b.coeffs.len() - 1];
    for (i, x) in a.coeffs.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.coeffs.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    ZPoly::new(out)
}

pub fn add_poly(a: &ZPoly, b: &ZPoly) -> ZPoly {
    let n = a.coeffs.len().max(b.coeffs.len());
    ZPoly::new((0..n).map(|i| a.coeff(i) + b.coeff(i)).collect())
}

pub fn sub_poly(a: &ZPoly, b: &ZPoly) -> ZPoly {
    let n = a.coeffs.len().max(b.coeffs.len());
    ZPoly::new((0..n).map(|i| a.coeff(i) - b.coeff(i)).collect())
}

/// Exact quotient `n / d` over `Z[T]`; any non-integral step or non-zero
/// remainder is an error.
pub fn exact_div(n: &ZPoly, d: &ZPoly) -> Result<ZPoly> {
    let dd = d
        .degree()
        .ok_or_else(|| Error::Domain("division by the zero polynomial".into()))?;
    let Some(nd) = n.degree() else {
        return Ok(ZPoly::zero());
    };
    if nd < dd {
        return Err(Error::NonExactDivision(format!(
            "deg {nd} numerator below deg {dd} divisor"
        )));
    }
    let lead = &d.coeffs[dd];
    let mut rem = n.coeffs.clone();
    let mut quot = vec![BigInt::zero(); nd - dd + 1];
    for i in (0..=nd - dd).rev() {
        let top = &rem[i + dd];
        if top.is_zero() {
            continue;
        }
        let (q, r) = top.div_rem(lead);
        if !r.is_zero() {
            return Err(Error::NonExactDivision(format!(
                "({n}) / ({d}): coefficient {top} not divisible by {lead}"
            )));
        }
        for (j, dc) in d.coeffs.iter().enumerate() {
            rem[i + j] -= &q * dc;
        }
        quot[i] = q;
    }
    if rem.iter().any(|c| !c.is_zero()) {
        return Err(Error::NonExactDivision(format!(
            "({n}) / ({d}) leaves a non-zero remainder"
        )));
    }
    Ok(ZPoly::new(quot))
}

pub fn eval_at(p: &ZPoly, t: &BigInt) -> BigInt {
    p.coeffs
        .iter()
        .rev()
        .fold(BigInt::zero(), |acc, c| acc * t + c)
}

/// Degree of `p mod 2`, `None` when every coefficient is even.
pub fn mod2_degree(p: &ZPoly) -> Option<usize> {
    p.coeffs.iter().rposition(|c| c.is_odd())
}

/// Square root in `Z[T]` of a polynomial with constant term 1, if it is a
/// perfect square.
pub fn sqrt_poly(p: &ZPoly) -> Option<ZPoly> {
    let d = p.degree()?;
    if d % 2 != 0 || !p.coeffs[0].is_one() {
        return None;
    }
    let h = d / 2;
    let mut r = vec![BigInt::one()];
    for i in 1..=h {
        // p_i = 2 r_i + sum_{j=1}^{i-1} r_j r_{i-j}
        let mut s = p.coeff(i);
        for j in 1..i {
            s -= &r[j] * &r[i - j];
        }
        let (q, rem) = s.div_rem(&BigInt::from(2));
        if !rem.is_zero() {
            return None;
        }
        r.push(q);
    }
    let r = ZPoly::new(r);
    (r.mul(&r) == *p).then_some(r)
}

/// Numerator of a zeta function over `F_q`: `a_0 = 1`, degree `2g`, and the
/// functional equation `a_{2g-i} = q^{g-i} a_i`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LPolyJson", into = "LPolyJson")]
pub struct LPoly {
    g: usize,
    q: u64,
    poly: ZPoly,
}

/// Wire format: `{"g":9,"coeffs":["1","3",...]}` with decimal strings.
#[derive(Serialize, Deserialize)]
struct LPolyJson {
    g: usize,
    coeffs: Vec<String>,
}

impl From<LPoly> for LPolyJson {
    fn from(l: LPoly) -> Self {
        LPolyJson {
            g: l.g,
            coeffs: (0..=2 * l.g).map(|i| l.poly.coeff(i).to_string()).collect(),
        }
    }
}

impl TryFrom<LPolyJson> for LPoly {
    type Error = Error;
    fn try_from(j: LPolyJson) -> Result<Self> {
        let coeffs = j
            .coeffs
            .iter()
            .map(|s| {
                s.parse::<BigInt>()
                    .map_err(|e| Error::Parse(format!("coefficient {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let l = LPoly::new(ZPoly::new(coeffs), Q)?;
        if l.g != j.g {
            return Err(Error::Parse(format!("declared g={} but degree gives {}", j.g, l.g)));
        }
        Ok(l)
    }
}

impl fmt::Debug for LPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LPoly(g={}, {})", self.g, self.poly)
    }
}

impl fmt::Display for LPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.poly)
    }
}

impl LPoly {
    /// Validates the L-polynomial invariants.
    pub fn new(poly: ZPoly, q: u64) -> Result<LPoly> {
        let deg = poly
            .degree()
            .ok_or_else(|| Error::Domain("zero polynomial is not an L-polynomial".into()))?;
        if !poly.coeff(0).is_one() {
            return Err(Error::Domain(format!("a_0 must be 1 in {poly}")));
        }
        if deg % 2 != 0 {
            return Err(Error::Domain(format!("odd degree {deg} in {poly}")));
        }
        let l = LPoly { g: deg / 2, q, poly };
        if let Some(i) = l.functional_equation_defect() {
            return Err(Error::Domain(format!(
                "functional equation fails at index {i} in {}",
                l.poly
            )));
        }
        Ok(l)
    }

    /// The constant polynomial 1 (genus zero).
    pub fn one(q: u64) -> LPoly {
        LPoly { g: 0, q, poly: ZPoly::one() }
    }

    pub fn genus(&self) -> usize {
        self.g
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn poly(&self) -> &ZPoly {
        &self.poly
    }

    pub fn into_poly(self) -> ZPoly {
        self.poly
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.poly.coeff(i)
    }

    /// First index `i <= g` with `a_{2g-i} != q^{g-i} a_i`.
    pub fn functional_equation_defect(&self) -> Option<usize> {
        let q = BigInt::from(self.q);
        (0..=self.g).find(|&i| {
            let lhs = self.poly.coeff(2 * self.g - i);
            let rhs = num_traits::pow(q.clone(), self.g - i) * self.poly.coeff(i);
            lhs != rhs
        })
    }

    /// Re-derives `a_{g+1} .. a_{2g}` from `a_0 .. a_g`.
    pub fn complete(&self) -> LPoly {
        complete_functional_equation(&self.poly, self.g, self.q)
    }

    /// Power sums `S_1 .. S_r` of the inverse roots.
    pub fn power_sums(&self, r: usize) -> Vec<BigInt> {
        power_sums(&self.poly, r)
    }

    /// Number of degree-one places over `F_{q^k}`: `q^k + 1 - S_k`.
    pub fn place_count(&self, k: usize) -> BigInt {
        let s = self.power_sums(k);
        num_traits::pow(BigInt::from(self.q), k) + 1 - &s[k - 1]
    }
}

fn complete_functional_equation(p: &ZPoly, g: usize, q: u64) -> LPoly {
    let qb = BigInt::from(q);
    let mut c: Vec<BigInt> = (0..=2 * g).map(|i| p.coeff(i)).collect();
    for i in 0..g {
        c[2 * g - i] = num_traits::pow(qb.clone(), g - i) * &c[i];
    }
    LPoly { g, q, poly: ZPoly::new(c) }
}

/// Forward Newton identities: `S_i = -i a_i - sum_{j<i} S_j a_{i-j}`.
pub fn power_sums(p: &ZPoly, r: usize) -> Vec<BigInt> {
    let mut s: Vec<BigInt> = Vec::with_capacity(r);
    for i in 1..=r {
        let mut v = -BigInt::from(i) * p.coeff(i);
        for j in 1..i {
            v -= &s[j - 1] * p.coeff(i - j);
        }
        s.push(v);
    }
    s
}

/// Rebuilds an L-polynomial of genus `g` from `S_1 .. S_g`:
/// `i a_i = -sum_{j=1..i} S_j a_{i-j}`, then the functional equation.
pub fn from_power_sums(s: &[BigInt], g: usize, q: u64) -> Result<LPoly> {
    if s.len() < g {
        return Err(Error::Precondition(format!(
            "need {g} power sums, have {}",
            s.len()
        )));
    }
    let mut a: Vec<BigInt> = vec![BigInt::one()];
    for i in 1..=g {
        let mut acc = BigInt::zero();
        for j in 1..=i {
            acc -= &s[j - 1] * &a[i - j];
        }
        let (quot, rem) = acc.div_rem(&BigInt::from(i));
        if !rem.is_zero() {
            return Err(Error::NonIntegralCoefficient { index: i });
        }
        a.push(quot);
    }
    Ok(complete_functional_equation(&ZPoly::new(a), g, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lt2() -> ZPoly {
        ZPoly::from_i64(&[1, 3, 4])
    }

    #[test]
    fn square_of_lt2() {
        assert_eq!(lt2().mul(&lt2()), ZPoly::from_i64(&[1, 6, 17, 24, 16]));
        assert_eq!(lt2().mul(&ZPoly::one()), lt2());
    }

    #[test]
    fn exact_div_examples() {
        let cube = lt2().pow(3);
        assert_eq!(exact_div(&cube, &lt2()).unwrap(), lt2().pow(2));
        let lt4 = ZPoly::from_i64(&[1, -1, 4]).pow(2).mul(&lt2().pow(7));
        let lt3 = lt2().pow(3);
        let quotient = ZPoly::from_i64(&[1, -1, 4]).pow(2).mul(&lt2().pow(4));
        assert_eq!(exact_div(&lt4, &lt3).unwrap(), quotient);
        assert!(matches!(
            exact_div(&ZPoly::from_i64(&[1, 1]), &ZPoly::from_i64(&[1, 2])),
            Err(Error::NonExactDivision(_))
        ));
    }

    #[test]
    fn newton_reconstruction_examples() {
        let l = from_power_sums(&[BigInt::from(-3)], 1, Q).unwrap();
        assert_eq!(l.poly(), &lt2());
        assert_eq!(from_power_sums(&[], 0, Q).unwrap(), LPoly::one(Q));
        // power sums of (1+3T+4T^2)^3 computed by expanding the product of
        // roots: S_j = 3 (alpha^j + beta^j) with alpha+beta=-3, alpha beta=4.
        let pair = |j: usize| -> i64 {
            let (mut p0, mut p1) = (2i64, -3i64);
            for _ in 1..j {
                let p2 = -3 * p1 - 4 * p0;
                p0 = p1;
                p1 = p2;
            }
            if j == 0 {
                2
            } else {
                p1
            }
        };
        let s: Vec<BigInt> = (1..=3).map(|j| BigInt::from(3 * pair(j))).collect();
        assert_eq!(s, vec![BigInt::from(-9), BigInt::from(3), BigInt::from(27)]);
        let l = from_power_sums(&s, 3, Q).unwrap();
        assert_eq!(l.poly(), &lt2().pow(3));
    }

    #[test]
    fn newton_detects_inexact_counts() {
        // S_1 = -3, S_2 = 2 gives 2 a_2 = -(S_1 a_1 + S_2) = -(9 + 2) = -11.
        let s = [BigInt::from(-3), BigInt::from(2)];
        assert!(matches!(
            from_power_sums(&s, 2, Q),
            Err(Error::NonIntegralCoefficient { index: 2 })
        ));
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval_at(&lt2(), &BigInt::from(1)), BigInt::from(8));
        let lt4 = ZPoly::from_i64(&[1, -1, 4]).pow(2).mul(&lt2().pow(7));
        assert_eq!(eval_at(&lt4, &BigInt::from(1)), BigInt::from(33554432u64));
        assert_eq!(eval_at(&lt4, &BigInt::from(0)), BigInt::from(1));
    }

    #[test]
    fn mod2_examples() {
        assert_eq!(mod2_degree(&lt2()), Some(1));
        let lt4 = ZPoly::from_i64(&[1, -1, 4]).pow(2).mul(&lt2().pow(7));
        assert_eq!(mod2_degree(&lt4), Some(9));
        assert_eq!(mod2_degree(&ZPoly::one()), Some(0));
        assert_eq!(mod2_degree(&ZPoly::from_i64(&[2, 4])), None);
    }

    #[test]
    fn display_style() {
        assert_eq!(ZPoly::from_i64(&[1, -1, 4]).to_string(), "1-T+4T^2");
        assert_eq!(ZPoly::from_i64(&[1, 2, 1, 8, 16]).to_string(), "1+2T+T^2+8T^3+16T^4");
    }

    #[test]
    fn lpoly_json_round_trip_and_validation() {
        let l = LPoly::new(lt2(), Q).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, r#"{"g":1,"coeffs":["1","3","4"]}"#);
        assert_eq!(serde_json::from_str::<LPoly>(&s).unwrap(), l);
        assert!(serde_json::from_str::<LPoly>(r#"{"g":1,"coeffs":["1","3","5"]}"#).is_err());
        assert!(LPoly::new(ZPoly::from_i64(&[4, 2, 1, 8, 16]), Q).is_err());
    }

    #[test]
    fn sqrt_poly_examples() {
        assert_eq!(sqrt_poly(&lt2().pow(2)), Some(lt2()));
        assert_eq!(sqrt_poly(&lt2()), None);
    }

    fn printed_polys() -> Vec<ZPoly> {
        let a = lt2();
        let b = ZPoly::from_i64(&[1, -1, 4]);
        let c = ZPoly::from_i64(&[1, 1, 4]);
        let d = ZPoly::from_i64(&[1, 2, 1, 8, 16]);
        vec![
            a.clone(),
            a.pow(3),
            b.pow(2).mul(&a.pow(7)),
            b.pow(4).mul(&a.pow(11)).mul(&c.pow(2)).mul(&d.pow(2)),
        ]
    }

    #[test]
    fn power_sum_round_trip_on_printed_polynomials() {
        for p in printed_polys() {
            let l = LPoly::new(p.clone(), Q).unwrap();
            let g = l.genus();
            let s = l.power_sums(g);
            assert_eq!(from_power_sums(&s, g, Q).unwrap(), l);
            assert_eq!(l.complete(), l);
            assert_eq!(l.coeff(2 * g), num_traits::pow(BigInt::from(Q), g));
        }
    }

    fn small_poly() -> impl Strategy<Value = ZPoly> {
        proptest::collection::vec(-50i64..50, 1..8).prop_map(|v| ZPoly::from_i64(&v))
    }

    proptest! {
        #[test]
        fn div_inverts_mul(a in small_poly(), b in small_poly()) {
            prop_assume!(!b.is_zero());
            let n = mul_poly(&a, &b);
            prop_assert_eq!(exact_div(&n, &b).unwrap(), a);
        }

        #[test]
        fn completion_is_idempotent(head in proptest::collection::vec(-20i64..20, 0..5)) {
            let mut c = vec![1i64];
            c.extend(head);
            let g = c.len() - 1;
            let l = complete_functional_equation(&ZPoly::from_i64(&c), g, Q);
            prop_assert_eq!(l.complete(), l.clone());
            prop_assert_eq!(l.functional_equation_defect(), None);
        }
    }
}
