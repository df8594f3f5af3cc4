//! Counting degree-one places over `F_{4^k}`.
//!
//! Base values are scanned in chunks. Every chunk is pushed through the layer
//! programs as a batch of lanes: each op runs over all lanes at once and
//! inversions are shared via Montgomery's trick. A lane whose layer value has
//! trace zero forks into the two roots; the last layer only counts. A base
//! value that hits a division by zero on any lane is dropped from the scan
//! and its fiber is expanded locally instead, as are `0`, `1` and infinity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveSpec, Op, Program};
use crate::error::{Error, Result};
use crate::gf2m::{make_field, Elem, Field};
use crate::local::{count_fiber, resolve_bad, Seed};

const CHUNK: u64 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub k: u32,
    pub affine: u64,
    pub bad: u64,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub curve: String,
    pub q: u64,
    pub rows: Vec<CountRow>,
}

impl CountTable {
    pub fn new(curve: &str) -> Self {
        CountTable { curve: curve.to_string(), q: 4, rows: Vec::new() }
    }

    /// Inserts or replaces the row for `row.k`, keeping rows sorted.
    pub fn insert(&mut self, row: CountRow) {
        match self.rows.binary_search_by_key(&row.k, |r| r.k) {
            Ok(i) => self.rows[i] = row,
            Err(i) => self.rows.insert(i, row),
        }
    }

    pub fn row(&self, k: u32) -> Option<&CountRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// Largest `K` with rows for every `k` in `1..=K`.
    pub fn contiguous_len(&self) -> u32 {
        let mut n = 0;
        for r in &self.rows {
            if r.k != n + 1 {
                break;
            }
            n += 1;
        }
        n
    }

    pub fn totals(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.total).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q != 4 {
            return Err(Error::Parse(format!("count table has q = {}, expected 4", self.q)));
        }
        for w in self.rows.windows(2) {
            if w[0].k >= w[1].k {
                return Err(Error::Parse("count rows must be sorted by k without duplicates".into()));
            }
        }
        for r in &self.rows {
            if r.k == 0 || r.affine + r.bad != r.total {
                return Err(Error::Parse(format!("malformed count row {r:?}")));
            }
        }
        Ok(())
    }
}

/// Knobs for the scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountOptions {
    /// Spread chunks over the rayon pool.
    pub parallel: bool,
    /// Limit on `4^k * 2^layers` per row.
    pub budget: u64,
}

/// Default point budget per row.
pub const DEFAULT_BUDGET: u64 = 1 << 31;

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions { parallel: true, budget: DEFAULT_BUDGET }
    }
}

/// Projected work for one row: base points times branch width.
pub fn row_cost(curve: &CurveSpec, k: u32) -> u64 {
    let base = 1u128 << (2 * k as u128);
    let w = curve.branch_width() as u128;
    (base * w).min(u64::MAX as u128) as u64
}

/// Per-thread scratch registers, reused across chunks.
#[derive(Default)]
struct Scratch {
    regs: Vec<Vec<u64>>,
    prefix: Vec<u64>,
}

struct ChunkResult {
    affine: u64,
    poles: Vec<u64>,
}

/// Evaluates `prog` on `n` lanes. Lanes that divide by zero are reported in
/// `pole`; their value is garbage.
fn eval_batch<'s>(
    f: &Field,
    prog: &Program,
    consts: &[u64; 4],
    vars: &[Vec<u64>],
    n: usize,
    scratch: &'s mut Scratch,
    pole: &mut [bool],
) -> &'s [u64] {
    let Scratch { regs, prefix } = scratch;
    if regs.len() < prog.ops.len() {
        regs.resize_with(prog.ops.len(), Vec::new);
    }
    for (i, op) in prog.ops.iter().enumerate() {
        let (done, rest) = regs.split_at_mut(i);
        let out = &mut rest[0];
        out.clear();
        match *op {
            Op::Const(c) => out.resize(n, consts[c as usize]),
            Op::Var(v) => out.extend_from_slice(&vars[v][..n]),
            Op::Add(a, b) => out.extend(done[a][..n].iter().zip(&done[b][..n]).map(|(x, y)| x ^ y)),
            Op::Mul(a, b) => out.extend(
                done[a][..n]
                    .iter()
                    .zip(&done[b][..n])
                    .map(|(&x, &y)| f.mul(Elem(x), Elem(y)).0),
            ),
            Op::Square(a) => out.extend(done[a][..n].iter().map(|&x| f.square(Elem(x)).0)),
            Op::Inv(a) => {
                let src = &done[a][..n];
                prefix.clear();
                let mut acc = Elem::ONE;
                for (l, &x) in src.iter().enumerate() {
                    if x == 0 {
                        pole[l] = true;
                    } else {
                        acc = f.mul(acc, Elem(x));
                    }
                    prefix.push(acc.0);
                }
                out.resize(n, 0);
                let mut inv = f.invert_nonzero(acc);
                for l in (0..n).rev() {
                    let x = src[l];
                    if x == 0 {
                        continue;
                    }
                    let before = if l == 0 { Elem::ONE } else { Elem(prefix[l - 1]) };
                    out[l] = f.mul(inv, before).0;
                    inv = f.mul(inv, Elem(x));
                }
            }
        }
    }
    &regs[prog.ops.len() - 1][..n]
}

fn scan_chunk(
    f: &Field,
    programs: &[Program],
    consts: &[u64; 4],
    start: u64,
    end: u64,
    scratch: &mut Scratch,
) -> ChunkResult {
    let start = start.max(2);
    if start >= end {
        return ChunkResult { affine: 0, poles: Vec::new() };
    }
    let nb = (end - start) as usize;
    if programs.is_empty() {
        return ChunkResult { affine: nb as u64, poles: Vec::new() };
    }
    let mut vars: Vec<Vec<u64>> = vec![(start..end).collect()];
    let mut owner: Vec<u32> = (0..nb as u32).collect();
    let mut poisoned = vec![false; nb];
    let mut hits = vec![0u32; nb];
    let mut pole = Vec::new();
    let last = programs.len() - 1;
    for (j, prog) in programs.iter().enumerate() {
        let n = owner.len();
        if n == 0 {
            break;
        }
        pole.clear();
        pole.resize(n, false);
        let r = eval_batch(f, prog, consts, &vars, n, scratch, &mut pole);
        for l in 0..n {
            if pole[l] {
                poisoned[owner[l] as usize] = true;
            }
        }
        if j == last {
            for l in 0..n {
                if f.abs_trace(Elem(r[l])) == 0 {
                    hits[owner[l] as usize] += 2;
                }
            }
        } else {
            let mut next_vars: Vec<Vec<u64>> = vec![Vec::with_capacity(n); vars.len() + 1];
            let mut next_owner = Vec::with_capacity(n);
            for l in 0..n {
                let o = owner[l] as usize;
                if poisoned[o] || f.abs_trace(Elem(r[l])) != 0 {
                    continue;
                }
                let y = f.solve_unchecked(r[l]);
                for root in [y, y ^ 1] {
                    for (v, col) in vars.iter().enumerate() {
                        next_vars[v].push(col[l]);
                    }
                    next_vars[vars.len()].push(root);
                    next_owner.push(owner[l]);
                }
            }
            vars = next_vars;
            owner = next_owner;
        }
    }
    let mut affine = 0;
    let mut poles = Vec::new();
    for b in 0..nb {
        if poisoned[b] {
            poles.push(start + b as u64);
        } else {
            affine += hits[b] as u64;
        }
    }
    ChunkResult { affine, poles }
}

/// Affine scan over base values outside `{0, 1}`. Returns the number of
/// points with all coordinates finite and no division by zero along the
/// way, plus the base values that did divide by zero.
pub fn affine_scan(curve: &CurveSpec, f: &Field, parallel: bool) -> Result<(u64, Vec<u64>)> {
    let programs = curve.programs()?;
    let g = f.gamma();
    let consts = [0, 1, g.0, g.0 ^ 1];
    let order = u64::try_from(f.order()).map_err(|_| Error::Domain("field too large to scan".into()))?;
    let chunks = order.div_ceil(CHUNK);
    let run = |c: u64, s: &mut Scratch| {
        scan_chunk(f, &programs, &consts, c * CHUNK, ((c + 1) * CHUNK).min(order), s)
    };
    let merge = |mut a: ChunkResult, b: ChunkResult| {
        a.affine += b.affine;
        a.poles.extend(b.poles);
        a
    };
    let empty = || ChunkResult { affine: 0, poles: Vec::new() };
    let mut res = if parallel {
        (0..chunks)
            .into_par_iter()
            .map_init(Scratch::default, |s, c| run(c, s))
            .reduce(empty, merge)
    } else {
        let mut s = Scratch::default();
        (0..chunks).map(|c| run(c, &mut s)).fold(empty(), merge)
    };
    res.poles.sort_unstable();
    Ok((res.affine, res.poles))
}

/// Points with `x_1 not in {0, 1}` and no pole on the way.
pub fn affine_count(curve: &CurveSpec, k: u32) -> Result<u64> {
    let f = make_field(k)?;
    Ok(affine_scan(curve, &f, true)?.0)
}

pub fn count_places_with(curve: &CurveSpec, k: u32, parallel: bool) -> Result<CountRow> {
    let f = make_field(k)?;
    let (affine, poles) = affine_scan(curve, &f, parallel)?;
    let programs = curve.programs()?;
    let mut bad = resolve_bad(curve, &f)?;
    for a in poles {
        bad += count_fiber(&f, &programs, Seed::Finite(Elem(a)))?;
    }
    Ok(CountRow { k, affine, bad, total: affine + bad })
}

/// One row: affine scan plus the places found by local expansion.
pub fn count_places(curve: &CurveSpec, k: u32) -> Result<CountRow> {
    count_places_with(curve, k, true)
}

/// Rows `k = 1..=k_max`, stopping before the first row whose projected cost
/// exceeds the budget. Rows already in `known` are reused.
pub fn count_range_from(
    curve: &CurveSpec,
    k_max: u32,
    opts: &CountOptions,
    known: Option<&CountTable>,
) -> Result<CountTable> {
    let mut table = CountTable::new(&curve.id);
    for k in 1..=k_max {
        if let Some(r) = known.and_then(|t| t.row(k)) {
            table.insert(*r);
            continue;
        }
        if row_cost(curve, k) > opts.budget {
            break;
        }
        table.insert(count_places_with(curve, k, opts.parallel)?);
    }
    Ok(table)
}

pub fn count_range(curve: &CurveSpec, k_max: u32, budget: u64) -> Result<CountTable> {
    count_range_from(curve, k_max, &CountOptions { parallel: true, budget }, None)
}
