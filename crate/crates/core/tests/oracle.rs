//! Place counts of T2 and T3 against independent oracles.

use towerzeta::count::count_places;
use towerzeta::curve::tower_level;

/// Coefficients of `Z(T) = L(T) / ((1 - T)(1 - 4T))` up to `T^n`.
fn zeta_series(l: &[i128], n: usize) -> Vec<i128> {
    // multiply by 1/(1-T) and 1/(1-4T) as running sums
    let mut z: Vec<i128> = (0..=n).map(|i| l.get(i).copied().unwrap_or(0)).collect();
    for i in 1..=n {
        z[i] += z[i - 1];
    }
    for i in 1..=n {
        z[i] += 4 * z[i - 1];
    }
    z
}

/// `N_1..N_n` from `k z_k = sum_{i=1}^k N_i z_{k-i}`.
fn counts_from_zeta(z: &[i128], n: usize) -> Vec<i128> {
    let mut nk = vec![0i128; n + 1];
    for k in 1..=n {
        let rest: i128 = (1..k).map(|i| nk[i] * z[k - i]).sum();
        let lead = k as i128 * z[k] - rest;
        assert_eq!(lead % z[0], 0);
        nk[k] = lead / z[0];
    }
    nk[1..].to_vec()
}

fn poly_mul(a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[test]
fn t2_and_t3_against_printed_polynomials() {
    let l2 = vec![1, 3, 4];
    let l3 = poly_mul(&poly_mul(&l2, &l2), &l2);
    for (n, l) in [(2, l2), (3, l3)] {
        let expect = counts_from_zeta(&zeta_series(&l, 3), 3);
        let curve = tower_level(n).unwrap();
        for k in 1..=3u32 {
            assert_eq!(count_places(&curve, k).unwrap().total as i128, expect[k as usize - 1], "T{n} k={k}");
        }
    }
}

/// Log/antilog tables for GF(2^m) with a fixed primitive trinomial,
/// independent of the library field.
struct Gf {
    m: u32,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl Gf {
    fn new(m: u32) -> Gf {
        let poly = match m {
            2 => 0b111,
            4 => 0b10011,
            6 => 0b1000011,
            _ => unreachable!(),
        };
        let n = (1u32 << m) - 1;
        let mut exp = vec![0; 2 * n as usize];
        let mut log = vec![0; n as usize + 1];
        let mut x = 1u32;
        for i in 0..n {
            exp[i as usize] = x;
            exp[(i + n) as usize] = x;
            log[x as usize] = i;
            x <<= 1;
            if x >> m != 0 {
                x ^= poly;
            }
        }
        Gf { m, exp, log }
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    fn inv(&self, a: u32) -> u32 {
        let n = (1u32 << self.m) - 1;
        self.exp[((n - self.log[a as usize]) % n) as usize]
    }
}

/// `y^2 + y = x^2/(x + 1)`: affine pairs with `x != 1`, plus one ramified
/// place over each of `x = 1` and `x = infinity`.
#[test]
fn t2_brute_force() {
    for (k, m) in [(1u32, 2u32), (2, 4), (3, 6)] {
        let f = Gf::new(m);
        let q = 1u32 << m;
        let mut n = 2u64;
        for x in (0..q).filter(|&x| x != 1) {
            let r = f.mul(f.mul(x, x), f.inv(x ^ 1));
            n += (0..q).filter(|&y| f.mul(y, y) ^ y == r).count() as u64;
        }
        assert_eq!(count_places(&tower_level(2).unwrap(), k).unwrap().total, n, "k={k}");
    }
}
