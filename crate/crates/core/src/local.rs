//! Places above a single rational base place, found by expanding every
//! layer as a Laurent series in a local uniformizer.
//!
//! A branch carries the series of all variables resolved so far. Each
//! Artin-Schreier layer is reduced until the right-hand side is either
//! integral (split or inert) or has a pole of odd order (ramified). Ramified
//! layers change the uniformizer; everything computed so far is substituted.
//! Only places of degree one are followed, so inert layers are pruned.

use serde::Serialize;

use crate::curve::{Const, CurveSpec, Domain, Program};
use crate::error::{Error, Result};
use crate::gf2m::{Elem, Field};

/// Precision of a series that is known exactly.
pub const EXACT: i64 = i64::MAX / 4;

fn clamp(p: i64) -> i64 {
    p.min(EXACT)
}

/// `sum coeffs[i] s^(val + i) + O(s^prec)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentSeries {
    val: i64,
    coeffs: Vec<Elem>,
    prec: i64,
}

impl LaurentSeries {
    pub fn new(val: i64, mut coeffs: Vec<Elem>, prec: i64) -> Self {
        let room = prec.saturating_sub(val);
        if room <= 0 {
            coeffs.clear();
        } else if (coeffs.len() as i64) > room {
            coeffs.truncate(room as usize);
        }
        let lead = coeffs.iter().position(|c| !c.is_zero());
        match lead {
            None => LaurentSeries { val: prec, coeffs: Vec::new(), prec },
            Some(i) => {
                let last = coeffs.iter().rposition(|c| !c.is_zero()).expect("nonzero");
                coeffs.truncate(last + 1);
                coeffs.drain(..i);
                LaurentSeries { val: val + i as i64, coeffs, prec }
            }
        }
    }

    pub fn exact(val: i64, coeffs: Vec<Elem>) -> Self {
        Self::new(val, coeffs, EXACT)
    }

    pub fn monomial(c: Elem, deg: i64) -> Self {
        Self::exact(deg, vec![c])
    }

    pub fn constant(c: Elem) -> Self {
        Self::monomial(c, 0)
    }

    /// Valuation, or `prec` when no nonzero term is known.
    pub fn val(&self) -> i64 {
        self.val
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        self.prec >= EXACT
    }

    /// No nonzero coefficient below `prec`.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, deg: i64) -> Elem {
        let i = deg - self.val;
        if i < 0 || i >= self.coeffs.len() as i64 {
            Elem::ZERO
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn leading(&self) -> Option<Elem> {
        self.coeffs.first().copied()
    }

    fn with_prec(mut self, prec: i64) -> Self {
        if prec < self.prec {
            self = Self::new(self.val, self.coeffs, prec);
        }
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        if self.is_zero() {
            return other.clone().with_prec(prec);
        }
        if other.is_zero() {
            return self.clone().with_prec(prec);
        }
        let val = self.val.min(other.val);
        let top = (self.val + self.coeffs.len() as i64)
            .max(other.val + other.coeffs.len() as i64)
            .min(prec);
        let len = (top - val).max(0) as usize;
        let mut c = vec![Elem::ZERO; len];
        for (s, off) in [(self, self.val - val), (other, other.val - val)] {
            for (i, &x) in s.coeffs.iter().enumerate() {
                let j = off as usize + i;
                if j < len {
                    c[j] += x;
                }
            }
        }
        Self::new(val, c, prec)
    }

    pub fn mul(&self, other: &Self, f: &Field, cap: usize) -> Self {
        let (va, vb) = (self.val, other.val);
        let mut prec = clamp((self.prec.saturating_add(vb)).min(other.prec.saturating_add(va)));
        if self.is_zero() || other.is_zero() {
            return Self::new(prec, Vec::new(), prec);
        }
        let val = va + vb;
        let full = self.coeffs.len() + other.coeffs.len() - 1;
        if !(prec >= EXACT && full <= cap) {
            prec = prec.min(val + cap as i64);
        }
        let len = full.min((prec - val).max(0) as usize);
        let mut c = vec![Elem::ZERO; len];
        for (i, &a) in self.coeffs.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate().take(len - i) {
                c[i + j] += f.mul(a, b);
            }
        }
        Self::new(val, c, prec)
    }

    /// Squaring is additive in characteristic 2, so the error term squares too.
    pub fn square(&self, f: &Field, cap: usize) -> Self {
        let mut prec = if self.is_exact() { EXACT } else { clamp(2 * self.prec) };
        if self.is_zero() {
            return Self::new(prec, Vec::new(), prec);
        }
        let val = 2 * self.val;
        let full = 2 * self.coeffs.len() - 1;
        if !(prec >= EXACT && full <= cap) {
            prec = prec.min(val + cap as i64);
        }
        let mut c = vec![Elem::ZERO; full];
        for (i, &a) in self.coeffs.iter().enumerate() {
            c[2 * i] = f.square(a);
        }
        Self::new(val, c, prec)
    }

    pub fn invert(&self, f: &Field, cap: usize) -> Result<Self> {
        if self.is_zero() {
            return Err(if self.is_exact() {
                Error::Domain("inverse of the zero series".into())
            } else {
                Error::InsufficientPrecision(format!("series is zero to O(s^{})", self.prec))
            });
        }
        let v = self.val;
        if self.is_exact() && self.coeffs.len() == 1 {
            return Ok(Self::monomial(f.invert(self.coeffs[0])?, -v));
        }
        let rel = if self.is_exact() { cap } else { ((self.prec - v) as usize).min(cap) };
        let g0inv = f.invert(self.coeffs[0])?;
        let mut b = vec![Elem::ZERO; rel];
        b[0] = g0inv;
        for n in 1..rel {
            let mut acc = Elem::ZERO;
            for i in 1..=n.min(self.coeffs.len() - 1) {
                acc += f.mul(self.coeffs[i], b[n - i]);
            }
            b[n] = f.mul(acc, g0inv);
        }
        Ok(Self::new(-v, b, -v + rel as i64))
    }

    pub fn pow(&self, e: u64, f: &Field, cap: usize) -> Self {
        let mut acc = Self::constant(Elem::ONE);
        for bit in (0..64 - e.leading_zeros()).rev() {
            acc = acc.square(f, cap);
            if e >> bit & 1 == 1 {
                acc = acc.mul(self, f, cap);
            }
        }
        acc
    }

    /// Formal derivative.
    pub fn derivative(&self) -> Self {
        let c: Vec<Elem> = (0..self.coeffs.len())
            .map(|i| {
                if (self.val + i as i64).rem_euclid(2) == 1 {
                    self.coeffs[i]
                } else {
                    Elem::ZERO
                }
            })
            .collect();
        let prec = if self.is_exact() { EXACT } else { self.prec - 1 };
        Self::new(self.val - 1, c, prec)
    }

    /// `self(sub)` for a substitution of positive valuation.
    pub fn compose(&self, sub: &Self, f: &Field, cap: usize) -> Result<Self> {
        let vs = sub.val;
        if sub.is_zero() || vs <= 0 {
            return Err(Error::Precondition("substitution must have positive valuation".into()));
        }
        if self.is_zero() {
            let p = if self.is_exact() { EXACT } else { clamp(self.prec.saturating_mul(vs)) };
            return Ok(Self::new(p, Vec::new(), p));
        }
        let v = self.val;
        let mut acc = Self::new(0, Vec::new(), EXACT);
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(sub, f, cap).add(&Self::constant(c));
        }
        if !self.is_exact() {
            // O(s^(prec - v)) of the power-series part
            let tail = (self.prec - v).saturating_mul(vs);
            acc = acc.with_prec(tail);
        }
        let shift = if v >= 0 {
            sub.pow(v as u64, f, cap)
        } else {
            sub.pow((-v) as u64, f, cap).invert(f, cap)?
        };
        Ok(acc.mul(&shift, f, cap))
    }
}

/// Series evaluation of a layer program, truncated to a relative length.
pub struct SeriesDomain<'a> {
    pub field: &'a Field,
    pub cap: usize,
}

impl Domain for SeriesDomain<'_> {
    type Value = LaurentSeries;
    type Error = Error;
    fn constant(&self, c: Const) -> LaurentSeries {
        LaurentSeries::constant(c.resolve(self.field))
    }
    fn add(&self, a: &LaurentSeries, b: &LaurentSeries) -> LaurentSeries {
        a.add(b)
    }
    fn mul(&self, a: &LaurentSeries, b: &LaurentSeries) -> LaurentSeries {
        a.mul(b, self.field, self.cap)
    }
    fn square(&self, a: &LaurentSeries) -> LaurentSeries {
        a.square(self.field, self.cap)
    }
    fn invert(&self, a: &LaurentSeries) -> Result<LaurentSeries> {
        a.invert(self.field, self.cap)
    }
}

/// Outcome of reducing `y^2 + y = r` at a place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AsReduction {
    /// `r` has a pole of odd order `m` with leading coefficient `c`.
    Ramified { r: LaurentSeries, shift: LaurentSeries, m: i64, c: Elem },
    /// `r` is integral with constant term of absolute trace zero.
    Split { r: LaurentSeries, shift: LaurentSeries, c0: Elem },
    Inert,
}

/// Removes even-order poles by `y -> y + h`, accumulating `h` into `shift`.
pub fn as_reduce(r: &LaurentSeries, f: &Field, cap: usize) -> Result<AsReduction> {
    let mut r = r.clone();
    let mut shift = LaurentSeries::new(0, Vec::new(), EXACT);
    loop {
        if r.is_zero() {
            if r.prec > 0 {
                return Ok(AsReduction::Split { r, shift, c0: Elem::ZERO });
            }
            return Err(Error::InsufficientPrecision(format!(
                "layer value is zero to O(s^{})",
                r.prec
            )));
        }
        let v = r.val;
        if v >= 0 {
            break;
        }
        let c = r.leading().expect("nonzero");
        if v % 2 != 0 {
            return Ok(AsReduction::Ramified { r, shift, m: -v, c });
        }
        let h = LaurentSeries::monomial(f.sqrt(c), v / 2);
        r = r.add(&h.square(f, cap)).add(&h);
        shift = shift.add(&h);
    }
    if r.prec <= 0 {
        return Err(Error::InsufficientPrecision("constant term of layer value unknown".into()));
    }
    let c0 = r.coeff(0);
    if f.abs_trace(c0) == 0 {
        Ok(AsReduction::Split { r, shift, c0 })
    } else {
        Ok(AsReduction::Inert)
    }
}

/// Both roots of `y^2 + y = r` for integral `r` with `Tr(r(0)) = 0`.
pub fn split_roots(r: &LaurentSeries, f: &Field) -> Result<[LaurentSeries; 2]> {
    debug_assert!(r.is_zero() || r.val >= 0);
    let p = r.prec;
    let len = p.max(1).min(EXACT) as usize;
    if r.is_exact() {
        return Err(Error::Precondition("split_roots needs a truncated series".into()));
    }
    let y0 = f
        .solve_as(r.coeff(0))
        .ok_or_else(|| Error::Internal("split layer with nonzero trace".into()))?;
    let mut y = vec![Elem::ZERO; len];
    y[0] = y0;
    for n in 1..len {
        let mut v = r.coeff(n as i64);
        if n % 2 == 0 {
            v += f.square(y[n / 2]);
        }
        y[n] = v;
    }
    let a = LaurentSeries::new(0, y.clone(), p);
    y[0] += Elem::ONE;
    Ok([a, LaurentSeries::new(0, y, p)])
}

/// Finds the unit `W` with `s = sigma^2 W(sigma)` for a ramified layer
/// `y^2 + y = c s^-m U(s)`, normalised so that `y = sqrt(c) sigma^-m`.
fn ramified_substitution(
    r: &LaurentSeries,
    m: i64,
    c: Elem,
    f: &Field,
    cap: usize,
) -> Result<LaurentSeries> {
    let d = f.sqrt(c);
    let cinv = f.invert(c)?;
    let u = r
        .mul(&LaurentSeries::monomial(cinv, m), f, cap)
        .with_prec(r.prec + m);
    let du = u.derivative();
    // A = 1 + sigma^m / d
    let a = LaurentSeries::constant(Elem::ONE).add(&LaurentSeries::monomial(f.invert(d)?, m));
    let sig2 = LaurentSeries::monomial(Elem::ONE, 2);
    let mut w = LaurentSeries::constant(Elem::ONE);
    let mut correct: i64 = 1;
    for _ in 0..64 {
        let s = sig2.mul(&w, f, cap);
        let phi = w
            .pow(m as u64, f, cap)
            .mul(&a, f, cap)
            .add(&u.compose(&s, f, cap)?);
        let dphi = w
            .pow((m - 1) as u64, f, cap)
            .mul(&a, f, cap)
            .add(&sig2.mul(&du.compose(&s, f, cap)?, f, cap));
        let delta = phi.mul(&dphi.invert(f, cap)?, f, cap);
        let next = (2 * correct).min(phi.prec).min(delta.prec);
        let nw = w.add(&delta.with_prec(next));
        if next <= correct {
            return Ok(LaurentSeries::new(0, w.coeffs, correct));
        }
        correct = next;
        w = LaurentSeries::exact(nw.val, nw.coeffs);
    }
    Err(Error::Internal("Newton iteration did not stabilise".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Split,
    Ramified,
}

/// A degree-one place above the base place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalPlace {
    /// Ramification index over the base.
    pub e: u64,
    pub layers: Vec<LayerKind>,
}

/// The base place to expand around.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Seed {
    Finite(Elem),
    Infinity,
}

impl Seed {
    /// The base variable as a series in the base uniformizer.
    pub fn series(self) -> LaurentSeries {
        match self {
            Seed::Finite(a) => LaurentSeries::exact(0, vec![a, Elem::ONE]),
            Seed::Infinity => LaurentSeries::monomial(Elem::ONE, -1),
        }
    }
}

struct Branch {
    vals: Vec<LaurentSeries>,
    e: u64,
    kinds: Vec<LayerKind>,
}

/// A place of residue degree two: the branch at `layer` (0-based) was inert.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InertPlace {
    pub layer: usize,
    pub e: u64,
}

/// Everything found above one base place.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fiber {
    pub places: Vec<LocalPlace>,
    pub inert: Vec<InertPlace>,
    /// Relative precision the expansion succeeded at.
    pub cap: usize,
}

impl Fiber {
    /// `sum e f` over the places above the base place, with each inert place
    /// standing for `2^(layers - layer)` sheets. Always `2^layers`.
    pub fn degree(&self, layers: usize) -> u64 {
        self.places.iter().map(|p| p.e).sum::<u64>()
            + self
                .inert
                .iter()
                .map(|i| i.e << (layers - i.layer))
                .sum::<u64>()
    }
}

fn resolve_with_cap(f: &Field, programs: &[Program], seed: Seed, cap: usize) -> Result<Fiber> {
    let dom = SeriesDomain { field: f, cap };
    let mut branches = vec![Branch { vals: vec![seed.series()], e: 1, kinds: Vec::new() }];
    let mut inert = Vec::new();
    for (layer, prog) in programs.iter().enumerate() {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for b in branches {
            let r = prog.eval(&dom, &b.vals)?;
            match as_reduce(&r, f, cap)? {
                AsReduction::Inert => inert.push(InertPlace { layer, e: b.e }),
                AsReduction::Split { r, shift, .. } => {
                    for y in split_roots(&r, f)? {
                        let mut vals = b.vals.clone();
                        vals.push(y.add(&shift));
                        let mut kinds = b.kinds.clone();
                        kinds.push(LayerKind::Split);
                        next.push(Branch { vals, e: b.e, kinds });
                    }
                }
                AsReduction::Ramified { r, shift, m, c } => {
                    let w = ramified_substitution(&r, m, c, f, cap)?;
                    let sub = LaurentSeries::monomial(Elem::ONE, 2).mul(&w, f, cap);
                    let mut vals = b
                        .vals
                        .iter()
                        .map(|v| v.compose(&sub, f, cap))
                        .collect::<Result<Vec<_>>>()?;
                    let y = LaurentSeries::monomial(f.sqrt(c), -m).add(&shift.compose(&sub, f, cap)?);
                    vals.push(y);
                    let mut kinds = b.kinds;
                    kinds.push(LayerKind::Ramified);
                    next.push(Branch { vals, e: b.e * 2, kinds });
                }
            }
        }
        branches = next;
    }
    Ok(Fiber {
        places: branches
            .into_iter()
            .map(|b| LocalPlace { e: b.e, layers: b.kinds })
            .collect(),
        inert,
        cap,
    })
}

/// Starting relative precision for a curve with `layers` layers.
pub fn initial_cap(layers: usize) -> usize {
    8 * layers + 16
}

const MAX_DOUBLINGS: u32 = 6;

/// Expands above `seed` starting at relative precision `cap`, doubling it
/// whenever a layer cannot be classified.
pub fn resolve_fiber_from(
    f: &Field,
    programs: &[Program],
    seed: Seed,
    mut cap: usize,
) -> Result<Fiber> {
    let mut last = None;
    for _ in 0..=MAX_DOUBLINGS {
        match resolve_with_cap(f, programs, seed, cap) {
            Err(Error::InsufficientPrecision(msg)) => {
                last = Some(msg);
                cap *= 2;
            }
            other => return other,
        }
    }
    Err(Error::Internal(format!(
        "precision exhausted at cap {}: {}",
        cap / 2,
        last.unwrap_or_default()
    )))
}

pub fn resolve_fiber(f: &Field, programs: &[Program], seed: Seed) -> Result<Fiber> {
    resolve_fiber_from(f, programs, seed, initial_cap(programs.len()))
}

/// Number of degree-one places above `seed`.
pub fn count_fiber(f: &Field, programs: &[Program], seed: Seed) -> Result<u64> {
    resolve_fiber(f, programs, seed).map(|fib| fib.places.len() as u64)
}

pub const BAD_SEEDS: [Seed; 3] = [Seed::Finite(Elem::ZERO), Seed::Finite(Elem::ONE), Seed::Infinity];

/// Fibers above `0`, `1` and infinity of the base.
pub fn resolve_bad_fibers(curve: &CurveSpec, f: &Field) -> Result<Vec<(Seed, Fiber)>> {
    let programs = curve.programs()?;
    BAD_SEEDS
        .into_iter()
        .map(|s| Ok((s, resolve_fiber(f, &programs, s)?)))
        .collect()
}

/// Degree-one places above `0`, `1` and infinity of the base.
pub fn resolve_bad(curve: &CurveSpec, f: &Field) -> Result<u64> {
    Ok(resolve_bad_fibers(curve, f)?
        .iter()
        .map(|(_, fib)| fib.places.len() as u64)
        .sum())
}

/// Multiset of ramification indices over the bad base places, as sorted
/// `(e, count)` pairs.
pub fn ram_profile(curve: &CurveSpec, f: &Field) -> Result<Vec<(u64, usize)>> {
    let mut hist = std::collections::BTreeMap::new();
    for (_, fib) in resolve_bad_fibers(curve, f)? {
        for p in fib.places {
            *hist.entry(p.e).or_insert(0) += 1;
        }
    }
    Ok(hist.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{quotient_curve, tower_level, Variant};
    use crate::gf2m::make_field;

    fn e(x: u64) -> Elem {
        Elem(x)
    }

    #[test]
    fn normalisation_and_precision() {
        let s = LaurentSeries::new(-2, vec![e(0), e(1), e(0), e(3), e(5)], 1);
        assert_eq!((s.val(), s.prec()), (-1, 1));
        assert_eq!(s.coeff(-1), e(1));
        assert_eq!(s.coeff(0), e(0));
        assert_eq!(s.coeff(1), e(0));
    }

    #[test]
    fn inverse_round_trip() {
        let f = make_field(3).unwrap();
        let a = LaurentSeries::new(-1, vec![e(5), e(7), e(1), e(33)], 20);
        let ai = a.invert(&f, 64).unwrap();
        let one = a.mul(&ai, &f, 64);
        assert_eq!(one.val(), 0);
        assert_eq!(one.prec(), 21);
        assert_eq!(one.coeff(0), Elem::ONE);
        for d in 1..one.prec() {
            assert_eq!(one.coeff(d), Elem::ZERO, "deg {d}");
        }
    }

    #[test]
    fn exact_geometric_series() {
        let f = make_field(1).unwrap();
        // 1/(1+s) = 1 + s + s^2 + ... truncated at the cap
        let g = LaurentSeries::exact(0, vec![Elem::ONE, Elem::ONE]).invert(&f, 10).unwrap();
        assert_eq!(g.prec(), 10);
        assert!((0..10).all(|d| g.coeff(d) == Elem::ONE));
    }

    #[test]
    fn square_doubles_absolute_precision() {
        let f = make_field(2).unwrap();
        let a = LaurentSeries::new(0, vec![e(3), e(2)], 5);
        let sq = a.square(&f, 64);
        assert_eq!(sq.prec(), 10);
        let prod = a.mul(&a, &f, 64);
        assert_eq!(prod.prec(), 5);
        for d in 0..5 {
            assert_eq!(sq.coeff(d), prod.coeff(d));
        }
        assert_eq!(sq.coeff(2), f.square(e(2)));
    }

    #[test]
    fn compose_matches_direct_substitution() {
        let f = make_field(2).unwrap();
        // (1 + s)^-1 at s = sigma^2 (1 + sigma) equals 1/(1 + sigma^2 + sigma^3)
        let g = LaurentSeries::exact(0, vec![Elem::ONE, Elem::ONE]).invert(&f, 40).unwrap();
        let sub = LaurentSeries::exact(2, vec![Elem::ONE, Elem::ONE]);
        let lhs = g.compose(&sub, &f, 40).unwrap();
        let rhs = LaurentSeries::exact(0, vec![Elem::ONE, Elem::ZERO, Elem::ONE, Elem::ONE])
            .invert(&f, 40)
            .unwrap();
        let p = lhs.prec().min(rhs.prec());
        assert!(p >= 40);
        for d in 0..p {
            assert_eq!(lhs.coeff(d), rhs.coeff(d), "deg {d}");
        }
    }

    #[test]
    fn ramified_root_satisfies_layer() {
        let f = make_field(2).unwrap();
        let cap = 48;
        // y^2 + y = gamma s^-3 (1 + s + gamma s^2)
        let c = f.gamma();
        let r = LaurentSeries::new(-3, vec![c, c, f.mul(c, c)], 30);
        let w = ramified_substitution(&r, 3, c, &f, cap).unwrap();
        let sub = LaurentSeries::monomial(Elem::ONE, 2).mul(&w, &f, cap);
        let lhs = {
            let y = LaurentSeries::monomial(f.sqrt(c), -3);
            y.square(&f, cap).add(&y)
        };
        let rhs = r.compose(&sub, &f, cap).unwrap();
        let diff = lhs.add(&rhs);
        assert!(diff.is_zero(), "{diff:?}");
        assert!(diff.prec() > 20, "{}", diff.prec());
    }

    #[test]
    fn t1_has_one_bad_place_per_seed() {
        let f = make_field(2).unwrap();
        let t1 = tower_level(1).unwrap();
        assert_eq!(resolve_bad(&t1, &f).unwrap(), 3);
        assert_eq!(ram_profile(&t1, &f).unwrap(), vec![(1, 3)]);
    }

    #[test]
    fn t2_bad_places_over_f4() {
        let f = make_field(1).unwrap();
        let t2 = tower_level(2).unwrap();
        let fibers = resolve_bad_fibers(&t2, &f).unwrap();
        let counts: Vec<usize> = fibers.iter().map(|(_, fib)| fib.places.len()).collect();
        assert_eq!(counts, vec![2, 1, 1]);
        assert_eq!(resolve_bad(&t2, &f).unwrap(), 4);
        assert_eq!(ram_profile(&t2, &f).unwrap(), vec![(1, 2), (2, 2)]);
    }

    #[test]
    fn degree_bookkeeping() {
        for k in 1..=3 {
            let f = make_field(k).unwrap();
            for c in [
                tower_level(3).unwrap(),
                tower_level(5).unwrap(),
                quotient_curve(5, Variant::U0).unwrap(),
                quotient_curve(5, Variant::U1).unwrap(),
                crate::curve::shifted_quotient(6, &[1]).unwrap(),
            ] {
                for (s, fib) in resolve_bad_fibers(&c, &f).unwrap() {
                    assert_eq!(fib.degree(c.layers.len()), 1 << c.layers.len(), "{} {s:?} k={k}", c.id);
                }
            }
        }
    }

    #[test]
    fn doubling_precision_changes_nothing() {
        let f = make_field(2).unwrap();
        let c = quotient_curve(5, Variant::U0).unwrap();
        let progs = c.programs().unwrap();
        for s in BAD_SEEDS {
            let a = resolve_fiber(&f, &progs, s).unwrap();
            let b = resolve_fiber_from(&f, &progs, s, 4 * a.cap).unwrap();
            assert_eq!(a.places, b.places);
            assert_eq!(a.inert, b.inert);
        }
    }

    #[test]
    fn quotient_fibers_resolve() {
        let f = make_field(2).unwrap();
        for v in [Variant::U0, Variant::U1] {
            let q = quotient_curve(5, v).unwrap();
            resolve_bad(&q, &f).unwrap();
        }
    }

    #[test]
    fn split_roots_solve_equation() {
        let f = make_field(3).unwrap();
        let r = LaurentSeries::new(0, vec![Elem::ZERO, e(9), e(17), e(40), e(2)], 12);
        for y in split_roots(&r, &f).unwrap() {
            let lhs = y.square(&f, 64).add(&y);
            let d = lhs.add(&r);
            assert!(d.is_zero() && d.prec() == 12);
        }
    }
}
