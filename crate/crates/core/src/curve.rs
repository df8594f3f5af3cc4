//! Curve descriptors for the tower, its Klein-four quotients and their
//! shifted variants, together with the closed-form genus and dimension
//! formulas and the Deuring-Shafarevich identity.
//!
//! Every curve here is a chain of Artin-Schreier layers `y^2 + y = rhs` over
//! a rational base variable. Right-hand sides are [`RationalExpr`] trees over
//! the base variable, earlier layer variables and the `F_4` constants.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2m::{make_field, Elem, Field};

/// `F_4` constants, resolved per field at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Const {
    Zero,
    One,
    Gamma,
    GammaPlusOne,
}

impl Const {
    pub fn resolve(self, field: &Field) -> Elem {
        match self {
            Const::Zero => Elem::ZERO,
            Const::One => Elem::ONE,
            Const::Gamma => field.gamma(),
            Const::GammaPlusOne => field.gamma() + Elem::ONE,
        }
    }

    fn token(self) -> &'static str {
        match self {
            Const::Zero => "0",
            Const::One => "1",
            Const::Gamma => "gamma",
            Const::GammaPlusOne => "gamma+1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RationalExpr {
    Const(Const),
    Var(String),
    Add(Box<RationalExpr>, Box<RationalExpr>),
    Mul(Box<RationalExpr>, Box<RationalExpr>),
    Inv(Box<RationalExpr>),
    Square(Box<RationalExpr>),
}

pub mod build {
    //! Terse constructors for expression trees.
    use super::{Const, RationalExpr};

    pub fn var(name: &str) -> RationalExpr {
        RationalExpr::Var(name.to_string())
    }
    pub fn one() -> RationalExpr {
        RationalExpr::Const(Const::One)
    }
    pub fn gamma() -> RationalExpr {
        RationalExpr::Const(Const::Gamma)
    }
    pub fn add(a: RationalExpr, b: RationalExpr) -> RationalExpr {
        RationalExpr::Add(Box::new(a), Box::new(b))
    }
    pub fn mul(a: RationalExpr, b: RationalExpr) -> RationalExpr {
        RationalExpr::Mul(Box::new(a), Box::new(b))
    }
    pub fn inv(a: RationalExpr) -> RationalExpr {
        RationalExpr::Inv(Box::new(a))
    }
    pub fn sq(a: RationalExpr) -> RationalExpr {
        RationalExpr::Square(Box::new(a))
    }
}

impl RationalExpr {
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            RationalExpr::Const(_) => {}
            RationalExpr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            RationalExpr::Add(a, b) | RationalExpr::Mul(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            RationalExpr::Inv(a) | RationalExpr::Square(a) => a.vars(out),
        }
    }

    /// Parses the prefix form produced by `Display`, e.g.
    /// `(mul (sq x1) (inv (add x1 1)))`.
    pub fn parse(s: &str) -> Result<RationalExpr> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let mut pos = 0;
        let e = parse_tokens(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!("trailing tokens in {s:?}")));
        }
        Ok(e)
    }
}

fn parse_tokens(tokens: &[&str], pos: &mut usize) -> Result<RationalExpr> {
    let tok = *tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    match tok {
        "(" => {
            let op = *tokens
                .get(*pos)
                .ok_or_else(|| Error::Parse("missing operator".into()))?;
            *pos += 1;
            let arity = match op {
                "add" | "mul" => 2,
                "inv" | "sq" => 1,
                other => return Err(Error::Parse(format!("unknown operator {other:?}"))),
            };
            let mut args = Vec::with_capacity(arity);
            for _ in 0..arity {
                args.push(parse_tokens(tokens, pos)?);
            }
            if tokens.get(*pos) != Some(&")") {
                return Err(Error::Parse(format!("expected ')' after {op}")));
            }
            *pos += 1;
            let mut it = args.into_iter();
            let a = Box::new(it.next().expect("arity"));
            Ok(match op {
                "add" => RationalExpr::Add(a, Box::new(it.next().expect("arity"))),
                "mul" => RationalExpr::Mul(a, Box::new(it.next().expect("arity"))),
                "inv" => RationalExpr::Inv(a),
                _ => RationalExpr::Square(a),
            })
        }
        ")" => Err(Error::Parse("unexpected ')'".into())),
        "0" => Ok(RationalExpr::Const(Const::Zero)),
        "1" => Ok(RationalExpr::Const(Const::One)),
        "gamma" => Ok(RationalExpr::Const(Const::Gamma)),
        "gamma+1" => Ok(RationalExpr::Const(Const::GammaPlusOne)),
        name => Ok(RationalExpr::Var(name.to_string())),
    }
}

impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalExpr::Const(c) => write!(f, "{}", c.token()),
            RationalExpr::Var(v) => write!(f, "{v}"),
            RationalExpr::Add(a, b) => write!(f, "(add {a} {b})"),
            RationalExpr::Mul(a, b) => write!(f, "(mul {a} {b})"),
            RationalExpr::Inv(a) => write!(f, "(inv {a})"),
            RationalExpr::Square(a) => write!(f, "(sq {a})"),
        }
    }
}

impl Serialize for RationalExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RationalExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        RationalExpr::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Straight-line form of an expression with variables resolved to indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Const(Const),
    Var(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Square(usize),
    Inv(usize),
}

#[derive(Clone, Debug)]
pub struct Program {
    pub ops: Vec<Op>,
}

/// A value domain a [`Program`] can be evaluated in.
pub trait Domain {
    type Value: Clone;
    type Error;
    fn constant(&self, c: Const) -> Self::Value;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn square(&self, a: &Self::Value) -> Self::Value;
    fn invert(&self, a: &Self::Value) -> std::result::Result<Self::Value, Self::Error>;
}

impl Program {
    pub fn compile(expr: &RationalExpr, vars: &[String]) -> Result<Program> {
        let index: HashMap<&str, usize> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let mut ops = Vec::new();
        fn go(
            e: &RationalExpr,
            index: &HashMap<&str, usize>,
            ops: &mut Vec<Op>,
        ) -> Result<usize> {
            let op = match e {
                RationalExpr::Const(c) => Op::Const(*c),
                RationalExpr::Var(v) => Op::Var(*index.get(v.as_str()).ok_or_else(|| {
                    Error::Precondition(format!("variable {v} not in scope"))
                })?),
                RationalExpr::Add(a, b) => {
                    let (a, b) = (go(a, index, ops)?, go(b, index, ops)?);
                    Op::Add(a, b)
                }
                RationalExpr::Mul(a, b) => {
                    let (a, b) = (go(a, index, ops)?, go(b, index, ops)?);
                    Op::Mul(a, b)
                }
                RationalExpr::Square(a) => Op::Square(go(a, index, ops)?),
                RationalExpr::Inv(a) => Op::Inv(go(a, index, ops)?),
            };
            ops.push(op);
            Ok(ops.len() - 1)
        }
        go(expr, &index, &mut ops)?;
        Ok(Program { ops })
    }

    pub fn eval<D: Domain>(
        &self,
        dom: &D,
        vars: &[D::Value],
    ) -> std::result::Result<D::Value, D::Error> {
        let mut vals: Vec<D::Value> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Const(c) => dom.constant(c),
                Op::Var(i) => vars[i].clone(),
                Op::Add(a, b) => dom.add(&vals[a], &vals[b]),
                Op::Mul(a, b) => dom.mul(&vals[a], &vals[b]),
                Op::Square(a) => dom.square(&vals[a]),
                Op::Inv(a) => dom.invert(&vals[a])?,
            };
            vals.push(v);
        }
        Ok(vals.pop().expect("non-empty program"))
    }
}

/// Evaluation at a finite point; division by zero is reported as a pole.
pub struct PointDomain<'a>(pub &'a Field);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pole;

impl Domain for PointDomain<'_> {
    type Value = Elem;
    type Error = Pole;
    fn constant(&self, c: Const) -> Elem {
        c.resolve(self.0)
    }
    fn add(&self, a: &Elem, b: &Elem) -> Elem {
        *a + *b
    }
    fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        self.0.mul(*a, *b)
    }
    fn square(&self, a: &Elem) -> Elem {
        self.0.square(*a)
    }
    fn invert(&self, a: &Elem) -> std::result::Result<Elem, Pole> {
        self.0.invert(*a).map_err(|_| Pole)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub var: String,
    pub rhs: RationalExpr,
}

/// A tower of Artin-Schreier layers over a rational base variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub id: String,
    pub base_var: String,
    pub layers: Vec<Layer>,
}

/// Which Klein-four quotient: `u0` uses `1 + gamma^2 x^2`, `u1` uses
/// `1 + gamma^2 x^2 + x^2` in the final denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    U0,
    U1,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::U0 => "u0",
            Variant::U1 => "u1",
        }
    }
}

impl CurveSpec {
    /// Variable names in scope order: base first, then each layer.
    pub fn var_names(&self) -> Vec<String> {
        std::iter::once(self.base_var.clone())
            .chain(self.layers.iter().map(|l| l.var.clone()))
            .collect()
    }

    /// Checks that each layer only references earlier variables.
    pub fn validate(&self) -> Result<()> {
        self.programs().map(|_| ())
    }

    /// One compiled program per layer, with variable `i` the `i`-th entry of
    /// [`CurveSpec::var_names`].
    pub fn programs(&self) -> Result<Vec<Program>> {
        let names = self.var_names();
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(Error::Precondition(format!("duplicate variable {n} in {}", self.id)));
            }
        }
        self.layers
            .iter()
            .enumerate()
            .map(|(j, layer)| Program::compile(&layer.rhs, &names[..=j]))
            .collect()
    }

    /// Upper bound on the number of points above one base value.
    pub fn branch_width(&self) -> u64 {
        1u64 << self.layers.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("curve serializes")
    }
}

fn x(i: u32) -> String {
    format!("x{i}")
}

/// `x^2 / (x + 1)`, the reduced form of `x^3 / (x^2 + x)`.
pub fn tower_rhs(prev: &str) -> RationalExpr {
    use build::*;
    mul(sq(var(prev)), inv(add(var(prev), one())))
}

/// `x^4 / ((x + 1)(1 + gamma^2 x^2))` for `u0`, and the `u1` twin with
/// `1 + gamma^2 x^2 + x^2`.
pub fn quotient_rhs(xv: &str, variant: Variant) -> RationalExpr {
    use build::*;
    let x2 = || sq(var(xv));
    let mut d = add(one(), mul(sq(gamma()), x2()));
    if variant == Variant::U1 {
        d = add(d, x2());
    }
    mul(sq(x2()), inv(mul(add(var(xv), one()), d)))
}

/// Level `n` of the tower: `x_j^2 + x_j = x_{j-1}^2 / (x_{j-1} + 1)`.
pub fn tower_level(n: u32) -> Result<CurveSpec> {
    if n == 0 {
        return Err(Error::Precondition("tower level starts at n = 1".into()));
    }
    Ok(CurveSpec {
        id: format!("T{n}"),
        base_var: x(1),
        layers: (2..=n)
            .map(|j| Layer { var: x(j), rhs: tower_rhs(&x(j - 1)) })
            .collect(),
    })
}

/// The quotient of `C_n` by `<tau>` (`u0`) or `<sigma tau>` (`u1`):
/// `F_4(x_1, .., x_{n-2}, u)`.
pub fn quotient_curve(n: u32, variant: Variant) -> Result<CurveSpec> {
    shifted_quotient_with(n, variant, &[])
}

/// `F_4(x_{j+1}, .., x_{n-2}, u + 1/x_j)` for `shifts = [j]`; the new
/// generator satisfies `w^2 + w = 1/(x_{j+1}^2 + x_{j+1}) + rhs_u(x_{n-2})`.
pub fn shifted_quotient(n: u32, shifts: &[u32]) -> Result<CurveSpec> {
    shifted_quotient_with(n, Variant::U0, shifts)
}

pub fn shifted_quotient_with(n: u32, variant: Variant, shifts: &[u32]) -> Result<CurveSpec> {
    use build::*;
    if n < 3 {
        return Err(Error::Precondition(format!("quotient curves need n >= 3, got {n}")));
    }
    let top = n - 2;
    match shifts {
        [] => Ok(CurveSpec {
            id: format!("Q{n}{}", variant.tag()),
            base_var: x(1),
            layers: (2..=top)
                .map(|j| Layer { var: x(j), rhs: tower_rhs(&x(j - 1)) })
                .chain(std::iter::once(Layer {
                    var: "u".into(),
                    rhs: quotient_rhs(&x(top), variant),
                }))
                .collect(),
        }),
        [j] => {
            let j = *j;
            if j == 0 || j + 1 > top {
                return Err(Error::MalformedShift(format!(
                    "shift 1/x{j} needs 1 <= j <= {} for n = {n}",
                    top.saturating_sub(1)
                )));
            }
            let b = x(j + 1);
            let shift = inv(add(sq(var(&b)), var(&b)));
            Ok(CurveSpec {
                id: format!("Q{n}{}s{j}", variant.tag()),
                base_var: b,
                layers: (j + 2..=top)
                    .map(|i| Layer { var: x(i), rhs: tower_rhs(&x(i - 1)) })
                    .chain(std::iter::once(Layer {
                        var: "u".into(),
                        rhs: add(shift, quotient_rhs(&x(top), variant)),
                    }))
                    .collect(),
            })
        }
        more => Err(Error::MalformedShift(format!(
            "at most one shift index is supported, got {more:?}"
        ))),
    }
}

/// Builds a curve from its canonical id (`T4`, `Q5u0`, `Q6u1`, `Q6u0s1`).
pub fn curve_from_id(id: &str) -> Result<CurveSpec> {
    let bad = || Error::Parse(format!("unknown curve id {id:?}"));
    if let Some(rest) = id.strip_prefix('T') {
        return tower_level(rest.parse().map_err(|_| bad())?);
    }
    let rest = id.strip_prefix('Q').ok_or_else(bad)?;
    let pos = rest.find('u').ok_or_else(bad)?;
    let n: u32 = rest[..pos].parse().map_err(|_| bad())?;
    let tail = &rest[pos..];
    let (variant, tail) = if let Some(t) = tail.strip_prefix("u0") {
        (Variant::U0, t)
    } else if let Some(t) = tail.strip_prefix("u1") {
        (Variant::U1, t)
    } else {
        return Err(bad());
    };
    if tail.is_empty() {
        return quotient_curve(n, variant);
    }
    let j: u32 = tail.strip_prefix('s').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    shifted_quotient_with(n, variant, &[j])
}

/// Genus of `T_n`: `(2^{n/2} - 1)^2` for even `n`,
/// `(2^{(n+1)/2} - 1)(2^{(n-1)/2} - 1)` for odd `n`.
pub fn genus_formula(n: u32) -> u64 {
    assert!((1..=62).contains(&n), "genus formula supports 1 <= n <= 62");
    if n % 2 == 0 {
        let a = (1u64 << (n / 2)) - 1;
        a * a
    } else {
        ((1u64 << n.div_ceil(2)) - 1) * ((1u64 << (n / 2)) - 1)
    }
}

/// `dim Y_{n,1}`: `2^{n-1}` for even `n`, `2^{n-1} - 2^{(n-3)/2}` for odd `n`.
pub fn dim_y(n: u32) -> u64 {
    assert!(n >= 3, "dim_y needs n >= 3");
    if n % 2 == 0 {
        1 << (n - 1)
    } else {
        (1 << (n - 1)) - (1 << ((n - 3) / 2))
    }
}

/// Degree of `L_{Y_{n,1}}`: `2^n` for even `n`, `2^n - 2^{(n-1)/2}` for odd.
pub fn deg_ly(n: u32) -> u64 {
    assert!(n >= 3, "deg_ly needs n >= 3");
    if n % 2 == 0 {
        1 << n
    } else {
        (1 << n) - (1 << ((n - 1) / 2))
    }
}

/// Dimensions of `X_n`, `X_{n,1}` and `Y_{n,1}` from the genus formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DimChain {
    pub dim_x: i64,
    pub dim_x1: i64,
    pub dim_y: i64,
}

/// `dim X_n = (g_{n+2} + 2 g_n - g_{n+1}) / 2`.
pub fn dim_x(n: u32) -> i64 {
    assert!(n >= 1);
    let g = |i: u32| genus_formula(i) as i64;
    let twice = g(n + 2) + 2 * g(n) - g(n + 1);
    debug_assert_eq!(twice % 2, 0);
    twice / 2
}

pub fn dim_chain(n: u32) -> DimChain {
    assert!(n >= 2, "dim_chain needs n >= 2");
    let g = |i: u32| genus_formula(i) as i64;
    let dx = dim_x(n);
    let dx1 = dx + 2 * g(n - 1) - dim_x(n - 1) - g(n);
    DimChain { dim_x: dx, dim_x1: dx1, dim_y: dx1 - g(n - 1) }
}

/// A linear function `constant + slope * d` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearInD {
    pub constant: BigRational,
    pub slope: BigRational,
}

impl LinearInD {
    pub fn eval(&self, d: &BigInt) -> BigRational {
        &self.constant + &self.slope * BigRational::from_integer(d.clone())
    }
}

/// Both sides of the p-rank computation for the Galois closure of `T_n`
/// over `T_1`, as functions of the degree `d`.
#[derive(Clone, Debug)]
pub struct DsIdentity {
    pub n: u32,
    pub p: u64,
    /// `1 - d + (d/p^{n-3})(p^{n-3} - 1) + p (d/p^{n-1})(p^{n-1} - 1)`.
    pub ramification_side: LinearInD,
    /// `d (p - p^{3-n} - p^{2-n}) + 1`.
    pub closed_form: LinearInD,
}

impl DsIdentity {
    pub fn agree(&self) -> bool {
        self.ramification_side == self.closed_form
    }
}

fn rpow(p: u64, e: i64) -> BigRational {
    let base = BigRational::from_integer(BigInt::from(p));
    if e >= 0 {
        num_traits::pow(base, e as usize)
    } else {
        num_traits::pow(base.recip(), (-e) as usize)
    }
}

pub fn ds_identity(n: u32, p: u64) -> Result<DsIdentity> {
    if n < 3 {
        return Err(Error::Precondition(format!("Deuring-Shafarevich input needs n >= 3, got {n}")));
    }
    let n = n as i64;
    let one = BigRational::one();
    // One point at infinity with d/p^{n-3} places of index p^{n-3} above it,
    // and p further points with d/p^{n-1} places of index p^{n-1} each.
    let inf = rpow(p, -(n - 3)) * (rpow(p, n - 3) - &one);
    let finite = rpow(p, 1) * rpow(p, -(n - 1)) * (rpow(p, n - 1) - &one);
    let ramification_side = LinearInD {
        constant: one.clone(),
        slope: -one.clone() + inf + finite,
    };
    let closed_form = LinearInD {
        constant: one,
        slope: rpow(p, 1) - rpow(p, 3 - n) - rpow(p, 2 - n),
    };
    Ok(DsIdentity { n: n as u32, p, ramification_side, closed_form })
}

/// The p-rank of the Galois closure for a numeric degree `d`; `d` must be
/// divisible by `p^{n-1}` and both sides must agree and be integral.
pub fn ds_prank(n: u32, d: &BigInt, p: u64) -> Result<BigInt> {
    let id = ds_identity(n, p)?;
    let modulus = num_traits::pow(BigInt::from(p), (n - 1) as usize);
    if (d % &modulus) != BigInt::zero() {
        return Err(Error::Precondition(format!("d = {d} is not divisible by p^(n-1) = {modulus}")));
    }
    let lhs = id.ramification_side.eval(d);
    let rhs = id.closed_form.eval(d);
    if lhs != rhs {
        return Err(Error::Internal(format!("Deuring-Shafarevich sides differ: {lhs} vs {rhs}")));
    }
    if !lhs.is_integer() {
        return Err(Error::Internal(format!("non-integral p-rank {lhs}")));
    }
    Ok(lhs.to_integer())
}

/// The quartic `T^4 + (1/x^2 + 1/x) T^2 + (1/x^2 + 1/x + 1) T + x^2/(x+1)`
/// evaluated at `t`, for base value `x`.
///
/// Eliminating `x_2` from both layers gives `s r^2 + (1+s) r + s^2` with
/// `r = T^2 + T` and `s = x^2/(x+1)`, so the constant term is `s`. The form
/// with `s^2` in the constant term does not vanish on the curve; see
/// [`squared_constant_quartic_at`].
pub fn x3_minpoly_at(field: &Field, x1: Elem, t: Elem) -> Result<Elem> {
    let f = field;
    let ix = f.invert(x1)?;
    let ix2 = f.square(ix);
    let c2 = ix2 + ix;
    let c1 = c2 + Elem::ONE;
    let c0 = f.mul(f.square(x1), f.invert(x1 + Elem::ONE)?);
    let t2 = f.square(t);
    Ok(f.square(t2) + f.mul(c2, t2) + f.mul(c1, t) + c0)
}

/// The quartic with constant term `(x^2/(x+1))^2`, as it is sometimes
/// printed. Kept so the discrepancy can be reported.
pub fn squared_constant_quartic_at(field: &Field, x1: Elem, t: Elem) -> Result<Elem> {
    let s = field.mul(field.square(x1), field.invert(x1 + Elem::ONE)?);
    Ok(x3_minpoly_at(field, x1, t)? + s + field.square(s))
}

/// Fraction of sampled `T_3` points with `x^2/(x+1)` outside `F_2` on which
/// the squared-constant quartic vanishes. On `F_2` the two forms agree.
pub fn squared_constant_quartic_hit_rate(samples: usize) -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(0x7371_7561);
    let fields = [make_field(2)?, make_field(3)?];
    let (mut seen, mut hits) = (0, 0);
    for attempt in 0..samples * 1000 {
        if seen == samples {
            break;
        }
        let f = &fields[attempt % 2];
        let Some((x1, _, x3)) = random_t3_point(f, &mut rng) else {
            continue;
        };
        let s = f.mul(f.square(x1), f.invert(x1 + Elem::ONE)?);
        if s.0 <= 1 {
            continue;
        }
        if squared_constant_quartic_at(f, x1, x3)?.is_zero() {
            hits += 1;
        }
        seen += 1;
    }
    Ok(hits as f64 / seen.max(1) as f64)
}

/// Samples points `(x_1, x_2, x_3)` of `T_3` over `F_16` and `F_64` and checks
/// that `x_3` is a root of the quartic.
pub fn verify_minpoly(samples: usize) -> Result<bool> {
    let mut rng = StdRng::seed_from_u64(0x6d69_6e70);
    let fields = [make_field(2)?, make_field(3)?];
    let mut checked = 0;
    while checked < samples {
        let f = &fields[checked % 2];
        let Some((x1, _x2, x3)) = random_t3_point(f, &mut rng) else {
            continue;
        };
        if !x3_minpoly_at(f, x1, x3)?.is_zero() {
            return Ok(false);
        }
        checked += 1;
    }
    Ok(true)
}

/// A random affine point of `T_3` with `x_1 not in {0, 1}`, if the sampled
/// base value lifts.
pub fn random_t3_point(f: &Field, rng: &mut StdRng) -> Option<(Elem, Elem, Elem)> {
    let order = f.order() as u64;
    let x1 = Elem(rng.gen_range(2..order));
    let r1 = f.mul(f.square(x1), f.invert(x1 + Elem::ONE).ok()?);
    let x2 = f.solve_as(r1)? + Elem(rng.gen_range(0..2));
    let r2 = f.mul(f.square(x2), f.invert(x2 + Elem::ONE).ok()?);
    let x3 = f.solve_as(r2)? + Elem(rng.gen_range(0..2));
    Some((x1, x2, x3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tower_shapes() {
        let t1 = tower_level(1).unwrap();
        assert!(t1.layers.is_empty());
        let t3 = tower_level(3).unwrap();
        assert_eq!(t3.var_names(), vec!["x1", "x2", "x3"]);
        assert_eq!(t3.layers[1].rhs.to_string(), "(mul (sq x2) (inv (add x2 1)))");
        t3.validate().unwrap();
    }

    #[test]
    fn t2_affine_points_over_f4() {
        // x1 in {gamma, gamma+1} pass the trace test; two lifts each.
        let f = make_field(1).unwrap();
        let prog = &tower_level(2).unwrap().programs().unwrap()[0];
        let mut lifts = 0;
        for a in f.elements().filter(|a| a.0 > 1) {
            let r = prog.eval(&PointDomain(&f), &[a]).unwrap();
            if f.abs_trace(r) == 0 {
                lifts += 2;
            }
        }
        assert_eq!(lifts, 4);
    }

    #[test]
    fn quotient_and_shift_shapes() {
        let q3 = quotient_curve(3, Variant::U0).unwrap();
        assert_eq!(q3.layers.len(), 1);
        assert_eq!(q3.layers[0].var, "u");
        let q4 = quotient_curve(4, Variant::U0).unwrap();
        assert_eq!(q4.var_names(), vec!["x1", "x2", "u"]);
        let s = shifted_quotient(6, &[1]).unwrap();
        assert_eq!(s.var_names(), vec!["x2", "x3", "x4", "u"]);
        assert_eq!(
            s.layers[2].rhs.to_string(),
            format!("(add (inv (add (sq x2) x2)) {})", quotient_rhs("x4", Variant::U0))
        );
        let s2 = shifted_quotient(6, &[2]).unwrap();
        assert_eq!(s2.var_names(), vec!["x3", "x4", "u"]);
        assert_eq!(shifted_quotient(5, &[]).unwrap(), quotient_curve(5, Variant::U0).unwrap());
        assert!(matches!(shifted_quotient(6, &[1, 2]), Err(Error::MalformedShift(_))));
        assert!(matches!(shifted_quotient(6, &[4]), Err(Error::MalformedShift(_))));
        assert!(matches!(shifted_quotient(6, &[0]), Err(Error::MalformedShift(_))));
    }

    #[test]
    fn ids_round_trip() {
        for id in ["T1", "T6", "Q3u0", "Q5u1", "Q6u0s1", "Q6u0s2", "Q6u1s1"] {
            assert_eq!(curve_from_id(id).unwrap().id, id);
        }
        assert!(curve_from_id("X3").is_err());
        assert!(curve_from_id("Q4u2").is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = shifted_quotient(6, &[1]).unwrap();
        let back: CurveSpec = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn out_of_scope_variable_is_rejected() {
        let mut c = tower_level(3).unwrap();
        c.layers[0].rhs = build::var("x3");
        assert!(c.validate().is_err());
    }

    #[test]
    fn genus_values() {
        let g: Vec<u64> = (1..=6).map(genus_formula).collect();
        assert_eq!(g, vec![0, 1, 3, 9, 21, 49]);
    }

    #[test]
    fn dimension_formulas() {
        assert_eq!((dim_y(4), deg_ly(4)), (8, 16));
        assert_eq!((dim_y(3), deg_ly(3)), (3, 6));
        for n in 3..=10 {
            assert_eq!(deg_ly(n), 2 * dim_y(n));
            assert_eq!(dim_chain(n).dim_y, dim_y(n) as i64, "n={n}");
        }
        assert_eq!(dim_chain(4).dim_x, 23);
        assert_eq!(dim_chain(3).dim_x, 9);
        assert_eq!(dim_x(1), 1);
        assert_eq!(dim_chain(2).dim_x1, 2);
        assert_eq!(dim_chain(4).dim_x1, 11);
    }

    #[test]
    fn deuring_shafarevich() {
        assert_eq!(ds_prank(3, &BigInt::from(4), 2).unwrap(), BigInt::from(3));
        for n in 3..=8 {
            assert!(ds_identity(n, 2).unwrap().agree(), "n={n}");
        }
        assert!(matches!(ds_prank(3, &BigInt::from(2), 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn minpoly_on_curve_points() {
        assert!(verify_minpoly(200).unwrap());
    }

    #[test]
    fn squared_constant_form_misses_curve_points() {
        let rate = squared_constant_quartic_hit_rate(50).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn minpoly_rejects_off_curve_points() {
        let f = make_field(3).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let mut nonzero = 0;
        for _ in 0..200 {
            let x1 = Elem(rng.gen_range(2..64));
            let t = Elem(rng.gen_range(0..64));
            if !x3_minpoly_at(&f, x1, t).unwrap().is_zero() {
                nonzero += 1;
            }
        }
        // a quartic has at most 4 roots among 64 candidates
        assert!(nonzero > 150, "{nonzero}");
    }
}
