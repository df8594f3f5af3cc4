//! The acceptance suite: one pass/fail line per criterion.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::One;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cache::Counter;
use crate::count::count_places_with;
use crate::curve::{curve_from_id, deg_ly, dim_chain, dim_y, ds_identity, ds_prank, genus_formula, tower_level};
use crate::error::Result;
use crate::gf2m::{make_field, Elem};
use crate::kani_rosen::{
    compare_printed, compute_tower, corollary_template, genus_of, printed_lpoly, template_degree, FactorReport,
    PrintedMatch, TowerConfig, TowerRun,
};
use crate::local::{initial_cap, resolve_bad_fibers, resolve_fiber_from, Seed};
use crate::zeta::lpoly_from_counts;
use crate::zpoly::{from_power_sums, mul_poly, LPoly, ZPoly, Q};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u32, name: &str, checks: Vec<(bool, String)>) -> Self {
        let passed = checks.iter().all(|c| c.0);
        let detail = checks
            .into_iter()
            .map(|(ok, s)| if ok { s } else { format!("FAILED {s}") })
            .collect::<Vec<_>>()
            .join("; ");
        CriterionResult { id, name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}. {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    pub criteria: Vec<CriterionResult>,
    pub tower: TowerRun,
}

impl Verification {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

fn printed(id: &str) -> ZPoly {
    printed_lpoly(id)
        .expect("printed polynomial")
        .iter()
        .fold(ZPoly::one(), |acc, (p, e)| mul_poly(&acc, &p.pow(*e)))
}

fn report(run: &TowerRun, n: u32) -> Option<&FactorReport> {
    run.reports.iter().find(|r| r.n == n)
}

fn failure_check(run: &TowerRun) -> (bool, String) {
    match &run.failure {
        None => (true, "no level failed".into()),
        Some(f) => (false, format!("level {} failed: {}", f.n, f.message)),
    }
}

/// Exact reproduction of levels 2..5.
pub fn criterion_1(run: &TowerRun, elapsed: Duration) -> CriterionResult {
    let mut checks = vec![failure_check(run)];
    for n in 2..=5 {
        let id = format!("T{n}");
        checks.push(match report(run, n) {
            Some(r) => (r.printed == PrintedMatch::Exact, format!("{id} = {}", r.factored)),
            None => (false, format!("{id} missing")),
        });
    }
    checks.push((elapsed < Duration::from_secs(120), format!("{:.1}s", elapsed.as_secs_f64())));
    CriterionResult::new(1, "exact reproduction n <= 5", checks)
}

/// Quotients of levels 4 and 5 by direct counting; `u0` and `u1` agree.
pub fn criterion_2(counter: &mut Counter) -> Result<CriterionResult> {
    let mut checks = Vec::new();
    for n in [4, 5] {
        let mut ls = Vec::new();
        for v in ["u0", "u1"] {
            let id = format!("Q{n}{v}");
            let g = genus_of(&id)?;
            let table = counter.table(&curve_from_id(&id)?, g as u32 + 2)?;
            let l = lpoly_from_counts(&table, g)?;
            let m = compare_printed(&id, l.poly());
            checks.push((m == PrintedMatch::Exact, format!("{id} {} (k <= {})", m.label(), table.contiguous_len())));
            ls.push(l);
        }
        checks.push((ls[0] == ls[1], format!("Q{n}u0 = Q{n}u1: {}", ls[0] == ls[1])));
    }
    Ok(CriterionResult::new(2, "quotients by direct count", checks))
}

/// Level 6.
pub fn criterion_3(run: &TowerRun, elapsed: Duration) -> CriterionResult {
    let mut checks = vec![failure_check(run)];
    let Some(r) = report(run, 6) else {
        checks.push((false, "T6 missing".into()));
        return CriterionResult::new(3, "level 6", checks);
    };
    let deg = r.lpoly.poly().degree().unwrap_or(0);
    checks.push((deg == 98 && r.degree_ok, format!("degree {deg}")));
    let bad: Vec<&str> = run.relations.iter().filter(|c| !c.remultiplies).map(|c| c.relation.as_str()).collect();
    checks.push((bad.is_empty(), format!("{} relations re-multiply", run.relations.len() - bad.len())));
    checks.push((r.divides_previous == Some(true), "L(T5) | L(T6)".into()));
    checks.push((r.functional_equation_ok, "functional equation".into()));
    let direct = (1..=10).all(|k| r.direct_rows.contains(&k));
    checks.push((direct, format!("direct N_k for k in {:?}", r.direct_rows)));
    let printed_deg = printed("T6").degree().unwrap_or(0);
    checks.push(match &r.printed {
        PrintedMatch::Mismatch { detail } => (printed_deg == 86, format!("printed polynomial: {detail}")),
        other => (false, format!("printed polynomial comparison: {}", other.label())),
    });
    checks.push((true, format!("{:.1}s", elapsed.as_secs_f64())));
    CriterionResult::new(3, "level 6", checks)
}

pub fn criterion_4(run: &TowerRun) -> CriterionResult {
    let mut checks = Vec::new();
    for n in 2..=6 {
        checks.push(match report(run, n) {
            Some(r) => (r.ordinary && r.prank == genus_formula(n) as usize, format!("T{n}: {} = {}", r.prank, r.genus)),
            None => (false, format!("T{n} missing")),
        });
    }
    CriterionResult::new(4, "ordinarity", checks)
}

pub fn criterion_5() -> Result<CriterionResult> {
    let mut checks = Vec::new();
    for n in 3..=8 {
        let id = ds_identity(n, 2)?;
        checks.push((id.agree(), format!("n = {n}")));
    }
    let r = ds_prank(3, &BigInt::from(4), 2)?;
    let g3 = BigInt::from(genus_formula(3));
    checks.push((r == BigInt::from(3) && r == g3, format!("n = 3, d = 4: r = {r}")));
    Ok(CriterionResult::new(5, "Deuring-Shafarevich identity", checks))
}

pub fn criterion_6(run: &TowerRun) -> Result<CriterionResult> {
    let mut checks = Vec::new();
    let chain_ok = (3..=10).all(|n| dim_chain(n).dim_y == dim_y(n) as i64);
    checks.push((chain_ok, "dimension ledger n = 3..10".into()));
    let mut tmpl_ok = true;
    for n in 5..=12 {
        tmpl_ok &= template_degree(&corollary_template(n)?) == 2 * genus_formula(n) as usize;
    }
    checks.push((tmpl_ok, "template degree n = 5..12".into()));
    for n in [5, 6] {
        checks.push(match report(run, n).and_then(|r| r.new_factor.as_ref()) {
            Some(f) => (
                f.degree == deg_ly(n - 2) as usize && f.degree == f.expected_degree,
                format!("new factor at level {n}: degree {} = deg L_Y({})", f.degree, n - 2),
            ),
            None => (false, format!("new factor at level {n} missing")),
        });
        if let Some(t) = report(run, n).and_then(|r| r.template.as_ref()) {
            checks.push((t.multiplies_out, format!("template multiplies out to L(T{n})")));
        }
    }
    Ok(CriterionResult::new(6, "structure formulas", checks))
}

pub fn criterion_7(run: &TowerRun) -> CriterionResult {
    let one = BigInt::one();
    let t4 = printed("T4").eval(&one);
    let t5 = printed("T5").eval(&one);
    let t5_expect = num_traits::pow(BigInt::from(2), 47) * 9 * 49;
    let mut checks = vec![
        (t4 == BigInt::from(33_554_432u64), format!("printed L(T4)(1) = {t4}")),
        (t5 == t5_expect, format!("printed L(T5)(1) = {t5}")),
    ];
    for n in [4, 5] {
        checks.push(match report(run, n) {
            Some(r) => (
                r.pic.order == if n == 4 { &t4 } else { &t5 }.to_string(),
                format!("computed T{n}: {}", r.pic.factorization),
            ),
            None => (false, format!("T{n} missing")),
        });
    }
    checks.push(match report(run, 5).map(|r| &r.pic) {
        Some(p) if p.printed_formula_consistent == Some(false) => (
            true,
            format!("smoothness formula flagged: gives {} at n = 5", p.printed_formula.as_deref().unwrap_or("?")),
        ),
        _ => (false, "smoothness formula not flagged".into()),
    });
    CriterionResult::new(7, "Pic orders", checks)
}

fn field_suite(rng: &mut StdRng) -> Result<(bool, String)> {
    let mut ok = true;
    for k in 1..=8u32 {
        let f = make_field(k)?;
        let size = 1u64 << f.m();
        let all = |x: u64| f.elem(x);
        // trace kernel has half the elements; a + a^2 hits exactly the kernel
        let kernel = (0..size).filter(|&x| f.abs_trace(all(x)) == 0).count() as u64;
        ok &= kernel == size / 2;
        for x in 1..size {
            let a = all(x);
            ok &= f.mul(a, f.invert(a)?) == Elem::ONE;
            ok &= f.square(f.sqrt(a)) == a;
            if let Some(y) = f.solve_as(a) {
                ok &= f.add(f.square(y), y) == a;
            } else {
                ok &= f.abs_trace(a) == 1;
            }
        }
        let pairs: Vec<(u64, u64, u64)> = if f.m() <= 6 {
            (0..size).flat_map(|a| (0..size).map(move |b| (a, b, (a * 7 + b) % size))).collect()
        } else {
            (0..20_000).map(|_| (rng.gen_range(0..size), rng.gen_range(0..size), rng.gen_range(0..size))).collect()
        };
        for (a, b, c) in pairs {
            let (a, b, c) = (all(a), all(b), all(c));
            ok &= f.mul(a, b) == f.mul(b, a);
            ok &= f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c));
            ok &= f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c));
        }
        ok &= f.pow(f.gamma(), 3) == Elem::ONE && f.gamma() != Elem::ONE;
    }
    Ok((ok, "field axioms and trace kernels for m = 2..16".into()))
}

fn zpoly_suite() -> Result<(bool, String)> {
    let mut ok = true;
    for id in ["T2", "T3", "T4", "T5", "Q5u0", "Q6u0s1"] {
        let p = printed(id);
        let l = LPoly::new(p.clone(), Q);
        if let Ok(l) = l {
            let g = l.genus();
            let back = from_power_sums(&l.power_sums(g), g, Q)?;
            ok &= back == l;
            ok &= l.functional_equation_defect().is_none();
            let s = serde_json::to_string(&l)?;
            ok &= serde_json::from_str::<LPoly>(&s)? == l;
        } else {
            // printed with a bad constant term; must be rejected
            ok &= p.coeff(0) != BigInt::one();
        }
    }
    Ok((ok, "power-sum and JSON round trips".into()))
}

fn local_suite() -> Result<(bool, String)> {
    let mut ok = true;
    for id in ["T3", "T4", "Q5u0", "Q6u0s1"] {
        let c = curve_from_id(id)?;
        let progs = c.programs()?;
        let layers = progs.len();
        for k in 1..=2 {
            let f = make_field(k)?;
            for (seed, fib) in resolve_bad_fibers(&c, &f)? {
                ok &= fib.degree(layers) == 1 << layers;
                let again = resolve_fiber_from(&f, &progs, seed, fib.cap * 2)?;
                ok &= again.places == fib.places && again.inert == fib.inert;
            }
            let inf = resolve_fiber_from(&f, &progs, Seed::Infinity, initial_cap(layers))?;
            ok &= inf.degree(layers) == 1 << layers;
        }
    }
    Ok((ok, "sum e f = 2^layers and precision doubling".into()))
}

fn count_suite() -> Result<(bool, String)> {
    let mut ok = true;
    for (id, k) in [("T4", 3), ("Q5u1", 3), ("Q6u0s1", 2)] {
        let c = curve_from_id(id)?;
        ok &= count_places_with(&c, k, true)? == count_places_with(&c, k, false)?;
    }
    // N_k from the printed L-polynomials of T2 and T3
    for n in [2, 3] {
        let l = LPoly::new(printed(&format!("T{n}")), Q)?;
        let c = tower_level(n)?;
        for k in 1..=3u32 {
            ok &= BigInt::from(count_places_with(&c, k, true)?.total) == l.place_count(k as usize);
        }
    }
    Ok((ok, "parallel = serial and N_k of T2, T3 for k <= 3".into()))
}

pub fn criterion_8() -> Result<CriterionResult> {
    let mut rng = StdRng::seed_from_u64(0x7477);
    let checks = vec![field_suite(&mut rng)?, zpoly_suite()?, local_suite()?, count_suite()?];
    Ok(CriterionResult::new(8, "property suites", checks))
}

/// Runs every criterion, computing the tower through level 6.
pub fn verify_paper(counter: &mut Counter, cfg: TowerConfig) -> Result<Verification> {
    let t = Instant::now();
    let run5 = compute_tower(5, cfg, counter)?;
    let c1 = criterion_1(&run5, t.elapsed());
    let c2 = criterion_2(counter)?;
    let t = Instant::now();
    let run6 = compute_tower(6, cfg, counter)?;
    let c3 = criterion_3(&run6, t.elapsed());
    let criteria = vec![
        c1,
        c2,
        c3,
        criterion_4(&run6),
        criterion_5()?,
        criterion_6(&run6)?,
        criterion_7(&run6),
        criterion_8()?,
    ];
    Ok(Verification { criteria, tower: run6 })
}
