//! L-polynomials from place counts, and the p-rank.

use num_bigint::BigInt;

use crate::count::CountTable;
use crate::error::{Error, Result};
use crate::zpoly::{from_power_sums, mod2_degree, LPoly, Q};

/// `S_k = q^k + 1 - N_k` for every row of the table, in row order.
fn power_sums_of(table: &CountTable) -> Vec<BigInt> {
    table
        .rows
        .iter()
        .map(|r| num_traits::pow(BigInt::from(Q), r.k as usize) + 1 - BigInt::from(r.total))
        .collect()
}

/// Reconstructs the genus-`g` L-polynomial from rows `k = 1..g`; any further
/// rows must agree with it.
pub fn lpoly_from_counts(table: &CountTable, g: usize) -> Result<LPoly> {
    table.validate()?;
    if (table.contiguous_len() as usize) < g {
        return Err(Error::Precondition(format!(
            "{}: need rows k = 1..{g}, have 1..{}",
            table.curve,
            table.contiguous_len()
        )));
    }
    let s = power_sums_of(table);
    let l = from_power_sums(&s[..g], g, Q).map_err(|e| match e {
        Error::NonIntegralCoefficient { index } => Error::CountInconsistency(format!(
            "{}: non-integral coefficient a_{index} for g = {g}",
            table.curve
        )),
        other => other,
    })?;
    if let Some(bad) = first_excess_mismatch(&l, table) {
        return Err(Error::CountInconsistency(format!(
            "{}: N_{bad} disagrees with the reconstructed L-polynomial",
            table.curve
        )));
    }
    Ok(l)
}

fn first_excess_mismatch(l: &LPoly, table: &CountTable) -> Option<u32> {
    let kmax = table.rows.iter().map(|r| r.k).max().unwrap_or(0) as usize;
    let s = l.power_sums(kmax);
    table.rows.iter().find_map(|r| {
        let expect = num_traits::pow(BigInt::from(Q), r.k as usize) + 1 - &s[r.k as usize - 1];
        (expect != BigInt::from(r.total)).then_some(r.k)
    })
}

/// Every row's total equals the count predicted by `l`.
pub fn verify_excess(l: &LPoly, table: &CountTable) -> bool {
    first_excess_mismatch(l, table).is_none()
}

/// Number of rows beyond `k = g` that were checked against `l`.
pub fn excess_rows(l: &LPoly, table: &CountTable) -> usize {
    table.rows.iter().filter(|r| r.k as usize > l.genus()).count()
}

/// `deg(L mod 2)`.
pub fn prank(l: &LPoly) -> usize {
    mod2_degree(l.poly()).unwrap_or(0)
}

pub fn is_ordinary(l: &LPoly) -> bool {
    prank(l) == l.genus()
}

/// The table `l` predicts for `k = 1..=k_max`, with every place affine.
pub fn table_from_lpoly(curve: &str, l: &LPoly, k_max: u32) -> CountTable {
    let mut t = CountTable::new(curve);
    for k in 1..=k_max {
        let n = l.place_count(k as usize);
        let total = u64::try_from(n).expect("place count fits in u64");
        t.insert(crate::count::CountRow { k, affine: total, bad: 0, total });
    }
    t
}
