//! Kani-Rosen relations between L-polynomials and the level-by-level tower
//! computation.
//!
//! For the Klein-four cover `C_n -> C_{n-2}`:
//!
//! `L(T_n) L(T_{n-2})^2 = L(T_{n-1}) L(Q_n^{u0}) L(Q_n^{u1})`
//!
//! and, peeling the base variable of the quotient with the shift `1/x_1`,
//!
//! `L(Q_n) L(T_{n-3})^2 = L(T_{n-2}) L(S_n) L(Q_{n-1})`
//!
//! where `S_n = F_4(x_2, .., x_{n-2}, u + 1/x_1)`. Quotients too large to
//! count are expanded with the second relation until every leaf is small.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::cache::Counter;
use crate::count::CountTable;
use crate::curve::{curve_from_id, deg_ly, dim_chain, dim_x, genus_formula, CurveSpec};
use crate::error::{Error, Result};
use crate::zeta::{excess_rows, is_ordinary, lpoly_from_counts, prank, verify_excess};
use crate::zpoly::{exact_div, mul_poly, sqrt_poly, LPoly, ZPoly, Q};

/// Genus of a curve id, from the closed-form ledger.
pub fn genus_of(id: &str) -> Result<usize> {
    let bad = || Error::Parse(format!("unknown curve id {id:?}"));
    if let Some(n) = id.strip_prefix('T') {
        return Ok(genus_formula(n.parse().map_err(|_| bad())?) as usize);
    }
    let rest = id.strip_prefix('Q').ok_or_else(bad)?;
    let pos = rest.find('u').ok_or_else(bad)?;
    let n: u32 = rest[..pos].parse().map_err(|_| bad())?;
    let tail = rest[pos..].get(2..).ok_or_else(bad)?;
    if n < 3 {
        return Err(bad());
    }
    if tail.is_empty() {
        return Ok(dim_x(n - 2) as usize);
    }
    let j: u32 = tail.strip_prefix('s').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    // F_4(x_{j+1}, .., x_{n-2}, u + 1/x_j) is X_{n-1-j, 1}
    let m = (n - 1).checked_sub(j).filter(|m| *m >= 2).ok_or_else(bad)?;
    Ok(dim_chain(m).dim_x1 as usize)
}

/// The other member of a `u0`/`u1` pair.
pub fn twin(id: &str) -> Option<String> {
    if id.contains("u0") {
        Some(id.replacen("u0", "u1", 1))
    } else if id.contains("u1") {
        Some(id.replacen("u1", "u0", 1))
    } else {
        None
    }
}

/// `L(top) L(base)^2 = L(q0) L(q1) L(q2)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub top: String,
    pub base: String,
    pub quotients: [String; 3],
}

impl Relation {
    pub fn ids(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.top).chain(std::iter::once(&self.base)).chain(self.quotients.iter())
    }

    /// `2g(top) + 4g(base)` against `sum 2g(q)`.
    pub fn degree_ledger(&self) -> Result<(usize, usize)> {
        let lhs = 2 * genus_of(&self.top)? + 4 * genus_of(&self.base)?;
        let mut rhs = 0;
        for q in &self.quotients {
            rhs += 2 * genus_of(q)?;
        }
        Ok((lhs, rhs))
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "L({}) L({})^2 = L({}) L({}) L({})",
            self.top, self.base, self.quotients[0], self.quotients[1], self.quotients[2]
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationTree {
    pub relation: Relation,
    /// Relations solving for quotients that are too large to count.
    pub children: Vec<RelationTree>,
}

impl RelationTree {
    /// Curves that must be counted or come from lower levels.
    pub fn leaves(&self) -> Vec<String> {
        let solved: Vec<&String> = self.children.iter().map(|c| &c.relation.top).collect();
        let mut out: Vec<String> = std::iter::once(&self.relation.base)
            .chain(self.relation.quotients.iter())
            .filter(|id| !solved.contains(id))
            .cloned()
            .collect();
        for c in &self.children {
            out.extend(c.leaves());
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn relations(&self) -> Vec<&Relation> {
        let mut out = vec![&self.relation];
        for c in &self.children {
            out.extend(c.relations());
        }
        out
    }
}

/// Relation tree for level `n`, with quotient expansions using `u0`.
pub fn build_tree(n: u32, g_max_leaf: usize) -> Result<RelationTree> {
    build_tree_with(n, g_max_leaf, "u0")
}

/// As [`build_tree`], expanding the `variant` quotient (`"u0"` or `"u1"`).
pub fn build_tree_with(n: u32, g_max_leaf: usize, variant: &str) -> Result<RelationTree> {
    if n < 3 {
        return Err(Error::Precondition(format!("relations start at n = 3, got {n}")));
    }
    if variant != "u0" && variant != "u1" {
        return Err(Error::Precondition(format!("unknown quotient variant {variant}")));
    }
    let relation = Relation {
        top: format!("T{n}"),
        base: format!("T{}", n - 2),
        quotients: [format!("T{}", n - 1), format!("Q{n}u0"), format!("Q{n}u1")],
    };
    let q = format!("Q{n}{variant}");
    let children = if genus_of(&q)? > g_max_leaf {
        vec![expand_quotient(n, g_max_leaf, variant)?]
    } else {
        Vec::new()
    };
    let tree = RelationTree { relation, children };
    for r in tree.relations() {
        let (l, rr) = r.degree_ledger()?;
        if l != rr {
            return Err(Error::Internal(format!("degree ledger of {r} does not balance: {l} vs {rr}")));
        }
    }
    Ok(tree)
}

fn expand_quotient(n: u32, g_max_leaf: usize, v: &str) -> Result<RelationTree> {
    let q = format!("Q{n}{v}");
    if n < 4 {
        return Err(Error::NoDecomposition(format!("{q} has genus {} and cannot be peeled", genus_of(&q)?)));
    }
    let shifted = format!("Q{n}{v}s1");
    let gs = genus_of(&shifted)?;
    if gs > g_max_leaf {
        return Err(Error::NoDecomposition(format!(
            "leaf {shifted} has genus {gs} > {g_max_leaf}"
        )));
    }
    let lower = format!("Q{}{v}", n - 1);
    let children = if genus_of(&lower)? > g_max_leaf {
        vec![expand_quotient(n - 1, g_max_leaf, v)?]
    } else {
        Vec::new()
    };
    Ok(RelationTree {
        relation: Relation {
            top: q,
            base: format!("T{}", n - 3),
            quotients: [format!("T{}", n - 2), shifted, lower],
        },
        children,
    })
}

/// Solves `r` for its single unknown slot (the top or one quotient).
pub fn solve_relation(r: &Relation, slots: &BTreeMap<String, LPoly>) -> Result<LPoly> {
    let get = |id: &String| slots.get(id).map(|l| l.poly().clone());
    let base = get(&r.base).ok_or_else(|| Error::Precondition(format!("{r}: base unknown")))?;
    let unknown: Vec<&String> = r.ids().filter(|id| !slots.contains_key(*id)).collect();
    let falsified = |e: Error, num: &ZPoly, den: &ZPoly| {
        Error::RelationFalsified(format!("{r}: {e}; dividend {num}; divisor {den}"))
    };
    let poly = match unknown.as_slice() {
        [u] if **u == r.top => {
            let num = r.quotients.iter().fold(ZPoly::one(), |acc, q| mul_poly(&acc, &get(q).expect("known")));
            let den = base.pow(2);
            exact_div(&num, &den).map_err(|e| falsified(e, &num, &den))?
        }
        [u] if r.quotients.contains(u) => {
            let top = get(&r.top).expect("known");
            let num = mul_poly(&top, &base.pow(2));
            let den = r
                .quotients
                .iter()
                .filter(|q| q != u)
                .fold(ZPoly::one(), |acc, q| mul_poly(&acc, &get(q).expect("known")));
            exact_div(&num, &den).map_err(|e| falsified(e, &num, &den))?
        }
        [] => return Err(Error::Precondition(format!("{r}: nothing to solve"))),
        _ => return Err(Error::Precondition(format!("{r}: unknowns {unknown:?}"))),
    };
    LPoly::new(poly, Q).map_err(|e| Error::RelationFalsified(format!("{r}: quotient is not an L-polynomial: {e}")))
}

/// `L(top) L(base)^2 - prod L(q) == 0`.
pub fn remultiplies(r: &Relation, slots: &BTreeMap<String, LPoly>) -> bool {
    let get = |id: &String| slots.get(id).map(|l| l.poly().clone());
    let (Some(top), Some(base)) = (get(&r.top), get(&r.base)) else {
        return false;
    };
    let mut rhs = ZPoly::one();
    for q in &r.quotients {
        match get(q) {
            Some(p) => rhs = mul_poly(&rhs, &p),
            None => return false,
        }
    }
    mul_poly(&top, &base.pow(2)) == rhs
}

/// `Lm` divides `Ln`.
pub fn divisibility_check(ln: &LPoly, lm: &LPoly) -> bool {
    exact_div(ln.poly(), lm.poly()).is_ok()
}

fn zp(c: &[i64]) -> ZPoly {
    ZPoly::from_i64(c)
}

/// Divisors tried in order: Weil quadratics, Weil quartics, then the
/// printed sextics.
fn factor_dictionary() -> Vec<ZPoly> {
    let mut d = Vec::new();
    for a in -4..=4 {
        d.push(zp(&[1, a, 4]));
    }
    for a in -8i64..=8 {
        for b in -24i64..=24 {
            d.push(zp(&[1, a, b, 4 * a, 16]));
        }
    }
    d.push(zp(&[1, 1, 1, 3, 4, 16, 64]));
    d.push(zp(&[1, 1, -1, 3, -4, 16, 64]));
    d
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactorPower {
    pub poly: String,
    pub degree: usize,
    pub exp: u32,
}

/// Splits `p` over the factor dictionary; whatever is left is one block.
pub fn factor(p: &ZPoly) -> Vec<(ZPoly, u32)> {
    let mut rest = p.clone();
    let mut out = Vec::new();
    for d in factor_dictionary() {
        if rest.degree().unwrap_or(0) < d.degree().unwrap_or(0) {
            break;
        }
        let mut e = 0;
        while let Ok(q) = exact_div(&rest, &d) {
            rest = q;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
    }
    if rest.degree().unwrap_or(0) > 0 {
        out.push((rest, 1));
    }
    out
}

/// `(1-T+4T^2)^2 (1+3T+4T^2)^7`.
pub fn render_factors(f: &[(ZPoly, u32)]) -> String {
    if f.is_empty() {
        return "1".into();
    }
    f.iter()
        .map(|(p, e)| if *e == 1 { format!("({p})") } else { format!("({p})^{e}") })
        .collect::<Vec<_>>()
        .join(" ")
}

fn powers(f: &[(ZPoly, u32)]) -> Vec<FactorPower> {
    f.iter()
        .map(|(p, e)| FactorPower { poly: p.to_string(), degree: p.degree().unwrap_or(0), exp: *e })
        .collect()
}

fn product(f: &[(ZPoly, u32)]) -> ZPoly {
    f.iter().fold(ZPoly::one(), |acc, (p, e)| mul_poly(&acc, &p.pow(*e)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TemplateEntry {
    pub source: String,
    pub exponent: u32,
    pub degree: usize,
}

/// `X_1^{2n-3} X_{2,1}^{2(n-3)} Y_{3,1}^{2(n-4)} .. Y_{n-2,1}^2`, keeping
/// only positive exponents.
pub fn corollary_template(n: u32) -> Result<Vec<TemplateEntry>> {
    if n < 5 {
        return Err(Error::Precondition(format!("template needs n >= 5, got {n}")));
    }
    let mut out = vec![
        TemplateEntry { source: "X_1".into(), exponent: 2 * n - 3, degree: 2 },
        TemplateEntry { source: "X_{2,1}".into(), exponent: 2 * (n - 3), degree: 4 },
    ];
    for j in 3..=n - 2 {
        out.push(TemplateEntry {
            source: format!("Y_{{{j},1}}"),
            exponent: 2 * (n - j - 1),
            degree: deg_ly(j) as usize,
        });
    }
    out.retain(|e| e.exponent > 0);
    Ok(out)
}

pub fn template_degree(t: &[TemplateEntry]) -> usize {
    t.iter().map(|e| e.exponent as usize * e.degree).sum()
}

fn small_primes(limit: u64) -> Vec<u64> {
    let mut sieve = vec![true; limit as usize + 1];
    let mut out = Vec::new();
    for i in 2..=limit as usize {
        if sieve[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit as usize {
                sieve[j] = false;
                j += i;
            }
        }
    }
    out
}

pub const TRIAL_LIMIT: u64 = 1_000_000;

/// Trial division by primes up to `limit`; returns the prime powers and the
/// unfactored cofactor.
pub fn trial_factor(n: &BigInt, limit: u64) -> (Vec<(u64, u32)>, BigInt) {
    let mut rest = n.clone();
    let mut out = Vec::new();
    if rest.is_zero() {
        return (out, rest);
    }
    for p in small_primes(limit) {
        let pb = BigInt::from(p);
        if &pb * &pb > rest {
            break;
        }
        let mut e = 0;
        while (&rest % &pb).is_zero() {
            rest /= &pb;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    }
    if rest > BigInt::one() && rest <= BigInt::from(limit) * BigInt::from(limit) {
        let p: u64 = rest.to_string().parse().expect("fits");
        out.push((p, 1));
        rest = BigInt::one();
    }
    (out, rest)
}

pub fn render_factorization(f: &[(u64, u32)], cofactor: &BigInt) -> String {
    let mut parts: Vec<String> = f
        .iter()
        .map(|(p, e)| if *e == 1 { p.to_string() } else { format!("{p}^{e}") })
        .collect();
    if !cofactor.is_one() {
        parts.push(format!("[{cofactor}]"));
    }
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" * ")
    }
}

/// `2^{58n-243} 3^{2n-8} 5^{2n-10}`, the printed smoothness formula with the
/// `L_Y(1)` factors dropped; only meaningful while those have no positive
/// exponent (`n <= 6`).
pub fn printed_pic_formula(n: u32) -> Option<BigInt> {
    if !(5..=6).contains(&n) {
        return None;
    }
    let n = n as i64;
    let p = |b: u64, e: i64| num_traits::pow(BigInt::from(b), e as usize);
    Some(p(2, 58 * n - 243) * p(3, 2 * n - 8) * p(5, 2 * n - 10))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PicReport {
    pub order: String,
    pub factorization: String,
    pub cofactor: String,
    /// Value of the printed formula, where it applies.
    pub printed_formula: Option<String>,
    pub printed_formula_consistent: Option<bool>,
}

fn pic_report(n: u32, l: &LPoly) -> PicReport {
    let order = l.poly().eval(&BigInt::one());
    let (f, cof) = trial_factor(&order, TRIAL_LIMIT);
    let printed = printed_pic_formula(n);
    PicReport {
        order: order.to_string(),
        factorization: render_factorization(&f, &cof),
        cofactor: cof.to_string(),
        printed_formula_consistent: printed.as_ref().map(|p| *p == order),
        printed_formula: printed.map(|p| p.to_string()),
    }
}

/// Outcome of comparing against a printed polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PrintedMatch {
    Exact,
    Mismatch { detail: String },
    NotPrinted,
}

impl PrintedMatch {
    pub fn label(&self) -> &'static str {
        match self {
            PrintedMatch::Exact => "exact",
            PrintedMatch::Mismatch { .. } => "mismatch",
            PrintedMatch::NotPrinted => "not printed",
        }
    }
}

/// Printed polynomials, as factor lists.
pub fn printed_lpoly(id: &str) -> Option<Vec<(ZPoly, u32)>> {
    let a = || zp(&[1, 3, 4]);
    let b = || zp(&[1, -1, 4]);
    let c = || zp(&[1, 1, 4]);
    let quartic = || zp(&[1, 2, 1, 8, 16]);
    let quartic4 = || zp(&[4, 2, 1, 8, 16]);
    let sextic_p = || zp(&[1, 1, 1, 3, 4, 16, 64]);
    let sextic_m = || zp(&[1, 1, -1, 3, -4, 16, 64]);
    Some(match id {
        "T2" => vec![(a(), 1)],
        "T3" => vec![(a(), 3)],
        "T4" => vec![(b(), 2), (a(), 7)],
        "T5" => vec![(b(), 4), (a(), 11), (c(), 2), (quartic(), 2)],
        "T6" => vec![(a(), 17), (b(), 6), (c(), 2), (quartic4(), 6), (sextic_m(), 2)],
        "Q4u0" | "Q4u1" => vec![(a(), 3), (b(), 1)],
        "Q5u0" | "Q5u1" => vec![(b(), 1), (c(), 1), (a(), 5), (quartic(), 1)],
        "Q6u0s1" => vec![(c(), 2), (a(), 4), (quartic4(), 1), (sextic_p(), 1)],
        // printed under the label F_4(x_2, x_3, x_4, u_0); its degree is that of Q6u0
        "Q6u0" => vec![(c(), 3), (a(), 10), (quartic4(), 2), (b(), 3), (sextic_m(), 1)],
        _ => return None,
    })
}

/// Three-valued comparison; a mismatch reports degrees, the constant term and
/// whether reading `4+2T+..` as `1+2T+..` would have matched.
pub fn compare_printed(id: &str, computed: &ZPoly) -> PrintedMatch {
    let Some(f) = printed_lpoly(id) else {
        return PrintedMatch::NotPrinted;
    };
    let printed = product(&f);
    if &printed == computed {
        return PrintedMatch::Exact;
    }
    let mut detail = format!(
        "printed degree {} vs computed {}; printed constant term {}",
        printed.degree().unwrap_or(0),
        computed.degree().unwrap_or(0),
        printed.coeff(0)
    );
    // misprints seen in the printed lists, each tried on top of the previous
    let corrections = [
        (zp(&[4, 2, 1, 8, 16]), zp(&[1, 2, 1, 8, 16])),
        (zp(&[1, 1, 1, 3, 4, 16, 64]), zp(&[1, 1, -1, 3, -4, 16, 64])),
    ];
    let mut fixed = f.clone();
    for (from, to) in &corrections {
        if !fixed.iter().any(|(p, _)| p == from) {
            continue;
        }
        for (p, _) in fixed.iter_mut() {
            if p == from {
                *p = to.clone();
            }
        }
        let fp = product(&fixed);
        let _ = write!(
            detail,
            "; reading {from} as {to}: {}",
            if &fp == computed { "equal" } else { "still different" }
        );
        if &fp == computed {
            return PrintedMatch::Mismatch { detail };
        }
    }
    let diff = exponent_diff(&factor(&product(&fixed)), &factor(computed));
    if !diff.is_empty() {
        let _ = write!(detail, "; factor exponents printed -> computed: {}", diff.join(", "));
    }
    PrintedMatch::Mismatch { detail }
}

fn exponent_diff(printed: &[(ZPoly, u32)], computed: &[(ZPoly, u32)]) -> Vec<String> {
    let mut keys: Vec<&ZPoly> = printed.iter().chain(computed).map(|(p, _)| p).collect();
    keys.sort_by_key(|p| (p.degree(), p.coeffs().to_vec()));
    keys.dedup();
    let exp = |l: &[(ZPoly, u32)], p: &ZPoly| l.iter().find(|(q, _)| q == p).map_or(0, |(_, e)| *e);
    keys.into_iter()
        .filter(|p| exp(printed, p) != exp(computed, p))
        .map(|p| format!("({p}) {} -> {}", exp(printed, p), exp(computed, p)))
        .collect()
}

/// The explicit closed form printed after the template, with its factors
/// reversed to L-polynomial orientation. Defined for `n` in 5..=6 where no
/// `L_Y` factor carries a positive exponent.
pub fn printed_corollary_closed_form(n: u32) -> Option<ZPoly> {
    if !(5..=6).contains(&n) {
        return None;
    }
    let n = n as i64;
    let parts = [
        (zp(&[1, 1, 4]), 2 * n - 8),
        (zp(&[1, 3, 4]), 12 * n - 49),
        (zp(&[1, -1, 4]), 6 * n - 26),
        (zp(&[1, 2, 1, 8, 16]), 6 * n - 24),
        (zp(&[1, 1, -1, 3, -4, 16, 64]), 2 * n - 10),
    ];
    Some(
        parts
            .iter()
            .filter(|(_, e)| *e > 0)
            .fold(ZPoly::one(), |acc, (p, e)| mul_poly(&acc, &p.pow(*e as u32))),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TemplateCheck {
    pub entries: Vec<TemplateEntry>,
    pub total_degree: usize,
    /// The product of the computed blocks with the template exponents is
    /// exactly `L(T_n)`.
    pub multiplies_out: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NewFactor {
    /// `X_1`, `X_{2,1}` or `Y_{j,1}`.
    pub source: String,
    pub degree: usize,
    pub expected_degree: usize,
    pub poly: String,
    pub factors: Vec<FactorPower>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactorReport {
    pub n: u32,
    pub genus: usize,
    pub lpoly: LPoly,
    pub factors: Vec<FactorPower>,
    pub factored: String,
    pub degree_ok: bool,
    pub functional_equation_ok: bool,
    pub divides_previous: Option<bool>,
    pub prank: usize,
    pub ordinary: bool,
    pub pic: PicReport,
    pub new_factor: Option<NewFactor>,
    pub template: Option<TemplateCheck>,
    pub printed: PrintedMatch,
    pub printed_closed_form: PrintedMatch,
    /// `k` values whose direct counts were checked against the result.
    pub direct_rows: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationCheck {
    pub relation: String,
    pub solved_for: String,
    pub ledger: (usize, usize),
    pub remultiplies: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TwinCheck {
    pub u0: String,
    pub u1: String,
    /// Both were counted and the L-polynomials agree.
    pub counted_equal: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeafInfo {
    pub id: String,
    pub genus: usize,
    pub rows: u32,
    pub excess_rows: usize,
    pub factored: String,
    pub printed: PrintedMatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolvedQuotient {
    pub id: String,
    pub genus: usize,
    pub lpoly: LPoly,
    pub factored: String,
    pub direct_rows: Vec<u32>,
    pub printed: PrintedMatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelFailure {
    pub n: u32,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TowerRun {
    pub reports: Vec<FactorReport>,
    pub relations: Vec<RelationCheck>,
    pub twins: Vec<TwinCheck>,
    pub leaves: Vec<LeafInfo>,
    pub solved_quotients: Vec<SolvedQuotient>,
    pub failure: Option<LevelFailure>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TowerConfig {
    pub g_max_leaf: usize,
    /// Rows beyond `k = g` counted for every leaf, budget permitting.
    pub excess_rows: u32,
    /// Largest `k` for direct checks of solved (not counted) curves.
    pub verify_k_max: u32,
    /// Quotient variant used when expanding.
    pub expand_u1: bool,
}

impl Default for TowerConfig {
    fn default() -> Self {
        TowerConfig { g_max_leaf: 12, excess_rows: 2, verify_k_max: 10, expand_u1: false }
    }
}

/// Incremental state of the tower computation.
pub struct Tower<'c> {
    pub cfg: TowerConfig,
    counter: &'c mut Counter,
    pub known: BTreeMap<String, LPoly>,
    pub run: TowerRun,
    /// `X_1`, `X_{2,1}`, `Y_{3,1}`, ... keyed by the level they appear at.
    blocks: BTreeMap<u32, ZPoly>,
}

impl<'c> Tower<'c> {
    pub fn new(cfg: TowerConfig, counter: &'c mut Counter) -> Self {
        let mut known = BTreeMap::new();
        known.insert("T1".to_string(), LPoly::one(Q));
        Tower { cfg, counter, known, run: TowerRun::default(), blocks: BTreeMap::new() }
    }

    pub fn lpoly(&self, id: &str) -> Option<&LPoly> {
        self.known.get(id)
    }

    fn curve(id: &str) -> Result<CurveSpec> {
        curve_from_id(id)
    }

    /// Counts `id` to `k = g + excess` and reconstructs its L-polynomial.
    fn count_leaf(&mut self, id: &str) -> Result<LPoly> {
        let g = genus_of(id)?;
        let curve = Self::curve(id)?;
        let table = self.counter.table(&curve, g as u32 + self.cfg.excess_rows)?;
        if (table.contiguous_len() as usize) < g {
            return Err(Error::Precondition(format!(
                "{id}: budget allows rows 1..{} but genus is {g}",
                table.contiguous_len()
            )));
        }
        let l = lpoly_from_counts(&table, g)?;
        self.run.leaves.push(LeafInfo {
            id: id.to_string(),
            genus: g,
            rows: table.contiguous_len(),
            excess_rows: excess_rows(&l, &table),
            factored: render_factors(&factor(l.poly())),
            printed: compare_printed(id, l.poly()),
        });
        self.known.insert(id.to_string(), l.clone());
        Ok(l)
    }

    /// Direct counts of a solved curve, as far as the budget and
    /// `verify_k_max` allow.
    fn direct_check(&mut self, id: &str, l: &LPoly) -> Result<Vec<u32>> {
        let curve = Self::curve(id)?;
        let table: CountTable = self.counter.table(&curve, self.cfg.verify_k_max)?;
        if !verify_excess(l, &table) {
            return Err(Error::CountInconsistency(format!(
                "{id}: direct counts disagree with the solved L-polynomial"
            )));
        }
        Ok(table.rows.iter().map(|r| r.k).collect())
    }

    fn ensure(&mut self, id: &str, tree: &RelationTree) -> Result<()> {
        if self.known.contains_key(id) {
            return Ok(());
        }
        if let Some(child) = tree.children.iter().find(|c| c.relation.top == id) {
            return self.solve_tree(child);
        }
        let g = genus_of(id)?;
        if g <= self.cfg.g_max_leaf {
            self.count_leaf(id)?;
            return Ok(());
        }
        if let Some(t) = twin(id) {
            if let Some(l) = self.known.get(&t).cloned() {
                self.known.insert(id.to_string(), l);
                return Ok(());
            }
            if let Some(child) = tree.children.iter().find(|c| c.relation.top == t) {
                self.solve_tree(child)?;
                let l = self.known[&t].clone();
                self.known.insert(id.to_string(), l);
                return Ok(());
            }
        }
        Err(Error::NoDecomposition(format!("{id} has genus {g} and no relation solves it")))
    }

    fn solve_tree(&mut self, tree: &RelationTree) -> Result<()> {
        let r = &tree.relation;
        self.ensure(&r.base, tree)?;
        for q in &r.quotients {
            self.ensure(q, tree)?;
        }
        // u0/u1 pairs among the quotients
        for q in &r.quotients {
            if let Some(t) = twin(q) {
                if q.contains("u0") && r.quotients.contains(&t) {
                    let both = genus_of(q)? <= self.cfg.g_max_leaf;
                    self.run.twins.push(TwinCheck {
                        u0: q.clone(),
                        u1: t.clone(),
                        counted_equal: both.then(|| self.known[q] == self.known[&t]),
                    });
                    if both && self.known[q] != self.known[&t] {
                        return Err(Error::RelationFalsified(format!(
                            "{q} and {t} have different L-polynomials"
                        )));
                    }
                }
            }
        }
        let l = solve_relation(r, &self.known)?;
        self.known.insert(r.top.clone(), l);
        let ok = remultiplies(r, &self.known);
        self.run.relations.push(RelationCheck {
            relation: r.to_string(),
            solved_for: r.top.clone(),
            ledger: r.degree_ledger()?,
            remultiplies: ok,
        });
        if !ok {
            return Err(Error::RelationFalsified(format!("{r} does not re-multiply")));
        }
        if !r.top.starts_with('T') {
            let l = self.known[&r.top].clone();
            let rows = self.direct_check(&r.top.clone(), &l)?;
            self.run.solved_quotients.push(SolvedQuotient {
                id: r.top.clone(),
                genus: l.genus(),
                factored: render_factors(&factor(l.poly())),
                printed: compare_printed(&r.top, l.poly()),
                lpoly: l,
                direct_rows: rows,
            });
        }
        Ok(())
    }

    /// Computes level `n`; lower levels must already be known.
    pub fn level(&mut self, n: u32) -> Result<&FactorReport> {
        let id = format!("T{n}");
        if n >= 2 && !self.known.contains_key(&format!("T{}", n - 1)) {
            return Err(Error::Precondition(format!("level {} must be computed first", n - 1)));
        }
        match n {
            0 | 1 => return Err(Error::Precondition("levels start at n = 2".into())),
            2 => {
                self.count_leaf(&id)?;
            }
            _ => {
                let variant = if self.cfg.expand_u1 { "u1" } else { "u0" };
                let tree = build_tree_with(n, self.cfg.g_max_leaf, variant)?;
                self.solve_tree(&tree)?;
            }
        }
        let l = self.known[&id].clone();
        let direct_rows = if n == 2 {
            (1..=self.cfg.excess_rows + 1).collect()
        } else {
            self.direct_check(&id, &l)?
        };
        let report = self.report(n, l, direct_rows)?;
        self.run.reports.push(report);
        Ok(self.run.reports.last().expect("pushed"))
    }

    fn block_source(n: u32) -> String {
        match n {
            3 => "X_1".into(),
            4 => "X_{2,1}".into(),
            _ => format!("Y_{{{},1}}", n - 2),
        }
    }

    fn report(&mut self, n: u32, l: LPoly, direct_rows: Vec<u32>) -> Result<FactorReport> {
        let g = genus_formula(n) as usize;
        let fac = factor(l.poly());
        if product(&fac) != *l.poly() {
            return Err(Error::Internal(format!("factorisation of T{n} does not multiply back")));
        }
        let prev = self.known.get(&format!("T{}", n - 1)).cloned();
        let divides_previous = prev.as_ref().map(|p| divisibility_check(&l, p));
        // R_n = L_n / L_{n-1}; the new block is sqrt(R_n / R_{n-1})
        let ratio = |m: u32| -> Option<ZPoly> {
            let a = self.known.get(&format!("T{m}"))?;
            let b = self.known.get(&format!("T{}", m - 1))?;
            exact_div(a.poly(), b.poly()).ok()
        };
        let new_factor = if n >= 3 {
            let rn = ratio(n);
            let block = match (n, rn) {
                (3, Some(r)) => sqrt_poly(&r),
                (_, Some(r)) => ratio(n - 1)
                    .and_then(|rp| exact_div(&r, &rp).ok())
                    .and_then(|q| sqrt_poly(&q)),
                _ => None,
            };
            block.map(|b| {
                self.blocks.insert(n, b.clone());
                let expected = match n {
                    3 => 2,
                    4 => 4,
                    _ => deg_ly(n - 2) as usize,
                };
                NewFactor {
                    source: Self::block_source(n),
                    degree: b.degree().unwrap_or(0),
                    expected_degree: expected,
                    factors: powers(&factor(&b)),
                    poly: b.to_string(),
                }
            })
        } else {
            None
        };
        let template = if n >= 5 {
            let entries = corollary_template(n)?;
            let mut prod = Some(ZPoly::one());
            for (i, e) in entries.iter().enumerate() {
                // entry i is the block introduced at level i + 3
                prod = match (prod, self.blocks.get(&(i as u32 + 3))) {
                    (Some(p), Some(b)) => Some(mul_poly(&p, &b.pow(e.exponent))),
                    _ => None,
                };
            }
            Some(TemplateCheck {
                total_degree: template_degree(&entries),
                multiplies_out: prod.as_ref() == Some(l.poly()),
                entries,
            })
        } else {
            None
        };
        let printed_closed_form = match printed_corollary_closed_form(n) {
            None => PrintedMatch::NotPrinted,
            Some(p) if p == *l.poly() => PrintedMatch::Exact,
            Some(p) => PrintedMatch::Mismatch {
                detail: format!(
                    "closed form has degree {} vs computed {}",
                    p.degree().unwrap_or(0),
                    l.poly().degree().unwrap_or(0)
                ),
            },
        };
        Ok(FactorReport {
            n,
            genus: g,
            degree_ok: l.poly().degree() == Some(2 * g),
            functional_equation_ok: l.functional_equation_defect().is_none(),
            divides_previous,
            prank: prank(&l),
            ordinary: is_ordinary(&l),
            pic: pic_report(n, &l),
            printed: compare_printed(&format!("T{n}"), l.poly()),
            printed_closed_form,
            factored: render_factors(&fac),
            factors: powers(&fac),
            new_factor,
            template,
            direct_rows,
            lpoly: l,
        })
    }
}

/// Levels `2..=n_max`. A level that fails stops the run; the failure is
/// recorded and earlier reports are kept.
pub fn compute_tower(n_max: u32, cfg: TowerConfig, counter: &mut Counter) -> Result<TowerRun> {
    if n_max < 2 {
        return Err(Error::Precondition(format!("n_max must be at least 2, got {n_max}")));
    }
    let mut tower = Tower::new(cfg, counter);
    for n in 2..=n_max {
        if let Err(e) = tower.level(n) {
            match e {
                Error::RelationFalsified(_) | Error::NoDecomposition(_) | Error::CountInconsistency(_) => {
                    tower.run.failure = Some(LevelFailure { n, kind: e.kind().into(), message: e.to_string() });
                    break;
                }
                other => return Err(other),
            }
        }
    }
    Ok(tower.run)
}

/// Canonical text rendering of a run; contains nothing time-dependent.
pub fn render_run(run: &TowerRun) -> String {
    let mut s = String::new();
    for r in &run.reports {
        let _ = writeln!(s, "T{}: g = {}  L = {}", r.n, r.genus, r.factored);
        let _ = writeln!(s, "  printed: {}", printed_line(&r.printed));
        if r.printed_closed_form != PrintedMatch::NotPrinted {
            let _ = writeln!(s, "  printed closed form: {}", printed_line(&r.printed_closed_form));
        }
        let _ = writeln!(
            s,
            "  L(1) = {} = {}",
            r.pic.order, r.pic.factorization
        );
        if let (Some(v), Some(ok)) = (&r.pic.printed_formula, r.pic.printed_formula_consistent) {
            let _ = writeln!(s, "  smoothness formula gives {v}: {}", if ok { "consistent" } else { "INCONSISTENT" });
        }
        let _ = writeln!(s, "  p-rank {} ({})", r.prank, if r.ordinary { "ordinary" } else { "not ordinary" });
        if let Some(d) = r.divides_previous {
            let _ = writeln!(s, "  L(T{}) divides: {d}", r.n - 1);
        }
        if let Some(f) = &r.new_factor {
            let rendered: Vec<String> = f
                .factors
                .iter()
                .map(|p| if p.exp == 1 { format!("({})", p.poly) } else { format!("({})^{}", p.poly, p.exp) })
                .collect();
            let _ = writeln!(s, "  new factor {}: degree {} = {}", f.source, f.degree, rendered.join(" "));
        }
        if let Some(t) = &r.template {
            let terms: Vec<String> = t.entries.iter().map(|e| format!("{}^{}", e.source, e.exponent)).collect();
            let _ = writeln!(
                s,
                "  template {}: degree {}, multiplies out: {}",
                terms.join(" "),
                t.total_degree,
                t.multiplies_out
            );
        }
        let _ = writeln!(s, "  direct counts k = {:?}", r.direct_rows);
    }
    for q in &run.solved_quotients {
        let _ = writeln!(s, "{}: g = {}  L = {}", q.id, q.genus, q.factored);
        let _ = writeln!(s, "  printed: {}", printed_line(&q.printed));
        let _ = writeln!(s, "  direct counts k = {:?}", q.direct_rows);
    }
    for l in &run.leaves {
        let _ = writeln!(
            s,
            "leaf {}: g = {}  L = {}\n  rows 1..{}, {} excess, printed: {}",
            l.id,
            l.genus,
            l.factored,
            l.rows,
            l.excess_rows,
            printed_line(&l.printed)
        );
    }
    for r in &run.relations {
        let _ = writeln!(s, "relation {}: ledger {} = {}, re-multiplies: {}", r.relation, r.ledger.0, r.ledger.1, r.remultiplies);
    }
    for l in &run.twins {
        let status = match l.counted_equal {
            Some(true) => "counted, equal",
            Some(false) => "counted, DIFFERENT",
            None => "aliased",
        };
        let _ = writeln!(s, "twins {} = {}: {status}", l.u0, l.u1);
    }
    if let Some(f) = &run.failure {
        let _ = writeln!(s, "level {} failed ({}): {}", f.n, f.kind, f.message);
    }
    s
}

fn printed_line(m: &PrintedMatch) -> String {
    match m {
        PrintedMatch::Mismatch { detail } => format!("mismatch: {detail}"),
        other => other.label().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::CountOptions;

    #[test]
    fn ledger_genera() {
        assert_eq!(genus_of("T6").unwrap(), 49);
        assert_eq!(genus_of("Q3u0").unwrap(), 1);
        assert_eq!(genus_of("Q4u1").unwrap(), 4);
        assert_eq!(genus_of("Q5u0").unwrap(), 9);
        assert_eq!(genus_of("Q6u0").unwrap(), 23);
        assert_eq!(genus_of("Q4u0s1").unwrap(), 2);
        assert_eq!(genus_of("Q6u0s1").unwrap(), 11);
        assert_eq!(genus_of("Q6u0s2").unwrap(), 4);
        assert_eq!(genus_of("Q7u0s1").unwrap(), 23);
        assert!(genus_of("Q6u0s4").is_err());
    }

    #[test]
    fn trees() {
        let t3 = build_tree(3, 12).unwrap();
        assert!(t3.children.is_empty());
        let t4 = build_tree(4, 12).unwrap();
        assert!(t4.children.is_empty());
        assert_eq!(t4.leaves(), vec!["Q4u0", "Q4u1", "T2", "T3"]);
        let t6 = build_tree(6, 12).unwrap();
        assert_eq!(t6.children.len(), 1);
        assert_eq!(t6.children[0].relation.top, "Q6u0");
        assert!(t6.leaves().contains(&"Q6u0s1".to_string()));
        assert!(t6.leaves().contains(&"Q5u0".to_string()));
        let deep = build_tree(5, 8).unwrap();
        assert_eq!(deep.children[0].relation.top, "Q5u0");
        assert_eq!(deep.leaves(), vec!["Q4u0", "Q5u0s1", "Q5u1", "T2", "T3", "T4"]);
        assert!(matches!(build_tree(6, 8), Err(Error::NoDecomposition(_))));
        assert!(matches!(build_tree(7, 12), Err(Error::NoDecomposition(_))));
        for n in 3..=7 {
            if let Ok(t) = build_tree(n, 30) {
                for r in t.relations() {
                    let (a, b) = r.degree_ledger().unwrap();
                    assert_eq!(a, b, "{r}");
                }
            }
        }
    }

    #[test]
    fn solve_small_relations() {
        let l = |c: &[i64], e: u32| LPoly::new(zp(c).pow(e), Q).unwrap();
        let mut slots = BTreeMap::new();
        slots.insert("T1".to_string(), LPoly::one(Q));
        slots.insert("T2".to_string(), l(&[1, 3, 4], 1));
        slots.insert("Q3u0".to_string(), l(&[1, 3, 4], 1));
        slots.insert("Q3u1".to_string(), l(&[1, 3, 4], 1));
        let r3 = build_tree(3, 12).unwrap().relation;
        let t3 = solve_relation(&r3, &slots).unwrap();
        assert_eq!(t3, l(&[1, 3, 4], 3));
        slots.insert("T3".to_string(), t3);
        assert!(remultiplies(&r3, &slots));

        let q4 = LPoly::new(zp(&[1, 3, 4]).pow(3).mul(&zp(&[1, -1, 4])), Q).unwrap();
        slots.insert("Q4u0".to_string(), q4.clone());
        slots.insert("Q4u1".to_string(), q4);
        let r4 = build_tree(4, 12).unwrap().relation;
        let t4 = solve_relation(&r4, &slots).unwrap();
        assert_eq!(t4.poly(), &product(&printed_lpoly("T4").unwrap()));
    }

    #[test]
    fn falsified_relation_is_reported() {
        let mut slots = BTreeMap::new();
        slots.insert("T1".to_string(), LPoly::one(Q));
        slots.insert("T2".to_string(), LPoly::new(zp(&[1, 3, 4]), Q).unwrap());
        slots.insert("Q3u0".to_string(), LPoly::new(zp(&[1, 3, 4]), Q).unwrap());
        slots.insert("Q3u1".to_string(), LPoly::new(zp(&[1, 1, 4]), Q).unwrap());
        // T1 is 1 so this divides, but T2 squared as base does not
        let r = Relation {
            top: "T4".into(),
            base: "T2".into(),
            quotients: ["T1".into(), "Q3u0".into(), "Q3u1".into()],
        };
        assert!(matches!(solve_relation(&r, &slots), Err(Error::RelationFalsified(_))));
    }

    #[test]
    fn dictionary_factoring() {
        let t5 = product(&printed_lpoly("T5").unwrap());
        let f = factor(&t5);
        assert_eq!(product(&f), t5);
        assert_eq!(
            render_factors(&f),
            "(1-T+4T^2)^4 (1+T+4T^2)^2 (1+3T+4T^2)^11 (1+2T+T^2+8T^3+16T^4)^2"
        );
        assert_eq!(render_factors(&factor(&product(&printed_lpoly("T4").unwrap()))), "(1-T+4T^2)^2 (1+3T+4T^2)^7");
    }

    #[test]
    fn divisibility_examples() {
        let p = |id: &str| LPoly::new(product(&printed_lpoly(id).unwrap()), Q).unwrap();
        assert!(divisibility_check(&p("T3"), &p("T2")));
        assert!(divisibility_check(&p("T5"), &p("T4")));
        assert!(!divisibility_check(&p("T4"), &LPoly::new(zp(&[1, 1, 4]), Q).unwrap()));
    }

    #[test]
    fn template_degrees() {
        let t6 = corollary_template(6).unwrap();
        let exps: Vec<u32> = t6.iter().map(|e| e.exponent).collect();
        assert_eq!(exps, vec![9, 6, 4, 2]);
        assert_eq!(t6.iter().map(|e| e.exponent as usize * e.degree / 2).sum::<usize>(), 49);
        for n in 5..=12 {
            assert_eq!(template_degree(&corollary_template(n).unwrap()), 2 * genus_formula(n) as usize);
        }
    }

    #[test]
    fn pic_orders_of_printed_polynomials() {
        let one = BigInt::one();
        let t4 = product(&printed_lpoly("T4").unwrap()).eval(&one);
        assert_eq!(t4, BigInt::from(33_554_432u64));
        let t5 = product(&printed_lpoly("T5").unwrap()).eval(&one);
        let (f, cof) = trial_factor(&t5, TRIAL_LIMIT);
        assert_eq!(f, vec![(2, 47), (3, 2), (7, 2)]);
        assert!(cof.is_one());
        assert_ne!(printed_pic_formula(5).unwrap(), t5);
    }

    #[test]
    fn printed_t6_is_inconsistent() {
        let p = product(&printed_lpoly("T6").unwrap());
        assert_eq!(p.degree(), Some(86));
        assert_eq!(p.coeff(0), BigInt::from(4096));
    }

    #[test]
    fn tower_to_level_four() {
        let mut c = Counter::new(CountOptions::default());
        let run = compute_tower(4, TowerConfig::default(), &mut c).unwrap();
        assert!(run.failure.is_none());
        let last = run.reports.last().unwrap();
        assert_eq!(last.factored, "(1-T+4T^2)^2 (1+3T+4T^2)^7");
        assert_eq!(last.printed, PrintedMatch::Exact);
        assert_eq!(last.pic.order, "33554432");
        assert_eq!(last.new_factor.as_ref().unwrap().degree, 4);
        assert!(run.twins.iter().all(|l| l.counted_equal == Some(true)));
    }
}
