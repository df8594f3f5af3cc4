//! Binary extension fields `F_{2^m}` with `m = 2k`, so that `F_4` embeds.
//!
//! Elements are bit-packed into a single `u64` in the polynomial basis of a
//! fixed low-weight reduction polynomial. The field also carries the
//! precomputed data the counting loops need: the trace mask (trace is a
//! parity of masked bits) and byte tables for the `F_2`-linear solver of
//! `y^2 + y = a`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported `k` (so `m = 2k <= 64`).
pub const MAX_K: u32 = 32;

/// Lowest-weight irreducible polynomials for even `m` in `2..=64`.
///
/// Each entry lists the exponents strictly between `0` and `m`; the terms
/// `x^m` and `1` are implicit.
const REDUCTION_TAPS: [(u32, &[u32]); 32] = [
    (2, &[1]),
    (4, &[1]),
    (6, &[1]),
    (8, &[7, 2, 1]),
    (10, &[3]),
    (12, &[3]),
    (14, &[5]),
    (16, &[6, 2, 1]),
    (18, &[3]),
    (20, &[3]),
    (22, &[1]),
    (24, &[7, 2, 1]),
    (26, &[6, 2, 1]),
    (28, &[1]),
    (30, &[1]),
    (32, &[22, 2, 1]),
    (34, &[7]),
    (36, &[9]),
    (38, &[7, 2, 1]),
    (40, &[27, 2, 1]),
    (42, &[7]),
    (44, &[5]),
    (46, &[1]),
    (48, &[17, 2, 1]),
    (50, &[9, 2, 1]),
    (52, &[3]),
    (54, &[9]),
    (56, &[21, 2, 1]),
    (58, &[19]),
    (60, &[1]),
    (62, &[29]),
    (64, &[11, 2, 1]),
];

/// A field element: coefficients of the polynomial basis, bit `i` is the
/// coefficient of `t^i`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Elem(pub u64);

impl Elem {
    pub const ZERO: Elem = Elem(0);
    pub const ONE: Elem = Elem(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl std::ops::Add for Elem {
    type Output = Elem;
    #[inline]
    fn add(self, rhs: Elem) -> Elem {
        Elem(self.0 ^ rhs.0)
    }
}

impl std::ops::AddAssign for Elem {
    #[inline]
    fn add_assign(&mut self, rhs: Elem) {
        self.0 ^= rhs.0;
    }
}

/// The field `F_{2^m}`, `m = 2k`, with its distinguished cube root of unity.
#[derive(Clone)]
pub struct Field {
    k: u32,
    m: u32,
    /// Exponents of the reduction polynomial strictly between 0 and m.
    taps: Vec<u32>,
    mask: u64,
    trace_mask: u64,
    gamma: Elem,
    /// `solve_tables[b][v]` is the solver image of `v << (8 b)`.
    solve_tables: Vec<[u64; 256]>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("m", &self.m)
            .field("reduction", &self.reduction_string())
            .field("gamma", &self.gamma)
            .finish()
    }
}

/// Builds `F_{4^k} = F_{2^{2k}}`.
/// Canonical text of the whole reduction-polynomial table. Cached counts
/// are only valid for the table they were produced with.
pub fn reduction_table_text() -> String {
    REDUCTION_TAPS
        .iter()
        .map(|(m, taps)| format!("{m}:{taps:?}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn make_field(k: u32) -> Result<Field> {
    Field::new(k)
}

impl Field {
    pub fn new(k: u32) -> Result<Field> {
        if k == 0 || k > MAX_K {
            return Err(Error::Domain(format!(
                "extension degree k={k} outside 1..={MAX_K}"
            )));
        }
        let m = 2 * k;
        let taps = REDUCTION_TAPS
            .iter()
            .find(|(deg, _)| *deg == m)
            .map(|(_, t)| t.to_vec())
            .ok_or_else(|| Error::Internal(format!("no reduction polynomial for m={m}")))?;
        let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        let mut field = Field {
            k,
            m,
            taps,
            mask,
            trace_mask: 0,
            gamma: Elem::ZERO,
            solve_tables: Vec::new(),
        };
        if !field.reduction_is_irreducible() {
            return Err(Error::Internal(format!(
                "reduction polynomial {} is not irreducible",
                field.reduction_string()
            )));
        }
        field.trace_mask = (0..m)
            .filter(|&i| field.slow_trace(Elem(1 << i)))
            .fold(0u64, |acc, i| acc | (1 << i));
        field.solve_tables = field.build_solver()?;
        // t^2 + t + 1 = 0 has exactly the two roots y, y+1; take the smaller.
        let y = field
            .solve_as(Elem::ONE)
            .ok_or_else(|| Error::Internal("t^2+t+1 has no root; m must be even".into()))?;
        field.gamma = Elem(y.0.min(y.0 ^ 1));
        Ok(field)
    }

    /// Extension degree over `F_4`.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Extension degree over `F_2`.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of elements, `2^m`.
    pub fn order(&self) -> u128 {
        1u128 << self.m
    }

    pub fn gamma(&self) -> Elem {
        self.gamma
    }

    /// Bit vector of the reduction polynomial without the leading `x^m`.
    pub fn reduction_low(&self) -> u64 {
        self.taps.iter().fold(1u64, |acc, &t| acc | (1 << t))
    }

    /// Reduction polynomial as a human readable string, e.g. `x^4+x+1`.
    pub fn reduction_string(&self) -> String {
        let mut s = format!("x^{}", self.m);
        for &t in &self.taps {
            if t == 1 {
                s.push_str("+x");
            } else {
                s.push_str(&format!("+x^{t}"));
            }
        }
        s.push_str("+1");
        s
    }

    /// Converts an integer in `0..2^m` to an element.
    #[inline]
    pub fn elem(&self, bits: u64) -> Elem {
        debug_assert_eq!(bits & !self.mask, 0);
        Elem(bits & self.mask)
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        Elem(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        Elem(self.reduce(clmul(a.0, b.0)))
    }

    #[inline]
    pub fn square(&self, a: Elem) -> Elem {
        self.mul(a, a)
    }

    #[inline]
    fn reduce(&self, mut r: u128) -> u64 {
        let m = self.m;
        loop {
            let hi = r >> m;
            if hi == 0 {
                return r as u64;
            }
            r &= self.mask as u128;
            r ^= hi;
            for &t in &self.taps {
                r ^= hi << t;
            }
        }
    }

    pub fn pow(&self, a: Elem, mut e: u128) -> Elem {
        let mut base = a;
        let mut acc = Elem::ONE;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.square(base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^m - 2)`.
    pub fn invert(&self, a: Elem) -> Result<Elem> {
        if a.is_zero() {
            return Err(Error::Domain("inverse of zero".into()));
        }
        Ok(self.invert_nonzero(a))
    }

    #[inline]
    pub(crate) fn invert_nonzero(&self, a: Elem) -> Elem {
        // r = a^(2^i - 1) for i = 1 .. m-1, then one more squaring.
        let mut r = a;
        for _ in 1..self.m - 1 {
            r = self.mul(self.square(r), a);
        }
        self.square(r)
    }

    /// `a^(1/2) = a^(2^(m-1))`.
    pub fn sqrt(&self, a: Elem) -> Elem {
        let mut r = a;
        for _ in 0..self.m - 1 {
            r = self.square(r);
        }
        r
    }

    /// Absolute trace `Tr_{F_{2^m}/F_2}`, as 0 or 1.
    #[inline]
    pub fn abs_trace(&self, a: Elem) -> u8 {
        ((a.0 & self.trace_mask).count_ones() & 1) as u8
    }

    fn slow_trace(&self, a: Elem) -> bool {
        let mut acc = a;
        let mut x = a;
        for _ in 1..self.m {
            x = self.square(x);
            acc = acc + x;
        }
        debug_assert!(acc.0 <= 1);
        acc.0 == 1
    }

    /// Returns `y` with `y^2 + y = a` when `Tr(a) = 0`. The root returned has
    /// zero constant coefficient; the other root is `y + 1`.
    #[inline]
    pub fn solve_as(&self, a: Elem) -> Option<Elem> {
        if self.abs_trace(a) != 0 {
            return None;
        }
        Some(Elem(self.solve_unchecked(a.0)))
    }

    #[inline]
    pub(crate) fn solve_unchecked(&self, mut a: u64) -> u64 {
        let mut out = 0u64;
        let mut b = 0;
        while a != 0 {
            out ^= self.solve_tables[b][(a & 0xff) as usize];
            a >>= 8;
            b += 1;
        }
        out
    }

    /// Builds the linear solver for `y -> y^2 + y`.
    ///
    /// The map kills `{0, 1}` and its image is the trace-zero hyperplane `H`.
    /// Writing every basis vector in the basis `{L(t^1), .., L(t^{m-1}), c}`
    /// with `Tr(c) = 1` and sending `L(t^j) -> t^j`, `c -> 0` gives a linear
    /// map whose restriction to `H` is a right inverse of `L`.
    fn build_solver(&self) -> Result<Vec<[u64; 256]>> {
        let m = self.m as usize;
        let c = (0..m)
            .map(|i| 1u64 << i)
            .find(|&v| self.abs_trace(Elem(v)) == 1)
            .ok_or_else(|| Error::Internal("trace is identically zero".into()))?;
        // Columns of B and the images they are sent to.
        let mut cols: Vec<(u64, u64)> = (1..m)
            .map(|j| {
                let e = Elem(1u64 << j);
                (self.square(e).0 ^ e.0, 1u64 << j)
            })
            .collect();
        cols.push((c, 0));
        // Gauss-Jordan on (vector, image) pairs; at full rank every pivot
        // vector ends up as a unit vector and its image is S(unit vector).
        let mut pivots: Vec<Option<(u64, u64)>> = vec![None; m];
        for (mut v, mut w) in cols {
            for bit in 0..m {
                if v >> bit & 1 == 1 {
                    if let Some((pv, pw)) = pivots[bit] {
                        v ^= pv;
                        w ^= pw;
                    }
                }
            }
            if v == 0 {
                return Err(Error::Internal("solver basis is singular".into()));
            }
            let lead = v.trailing_zeros() as usize;
            for p in pivots.iter_mut().flatten() {
                if p.0 >> lead & 1 == 1 {
                    p.0 ^= v;
                    p.1 ^= w;
                }
            }
            pivots[lead] = Some((v, w));
        }
        let images: Vec<u64> = pivots
            .iter()
            .enumerate()
            .map(|(bit, p)| {
                let (v, w) = p.expect("full rank");
                debug_assert_eq!(v, 1u64 << bit);
                w
            })
            .collect();
        let nbytes = m.div_ceil(8);
        let mut tables = vec![[0u64; 256]; nbytes];
        for (b, table) in tables.iter_mut().enumerate() {
            for v in 0..256usize {
                let mut acc = 0u64;
                for i in 0..8 {
                    let bit = 8 * b + i;
                    if v >> i & 1 == 1 && bit < m {
                        acc ^= images[bit];
                    }
                }
                table[v] = acc;
            }
        }
        Ok(tables)
    }

    /// Rabin's test: `x^(2^m) = x` and `gcd(x^(2^(m/p)) - x, f) = 1` for
    /// every prime `p | m`.
    pub fn reduction_is_irreducible(&self) -> bool {
        let m = self.m;
        let x = Elem(2 & self.mask);
        let frob = |times: u32| {
            let mut y = x;
            for _ in 0..times {
                y = self.square(y);
            }
            y
        };
        if frob(m) != x {
            return false;
        }
        let modulus: u128 = (1u128 << m) | self.reduction_low() as u128;
        (2..=m)
            .filter(|p| m % p == 0 && (2..*p).all(|q| p % q != 0))
            .all(|p| poly_gcd_gf2(modulus, (frob(m / p).0 ^ x.0) as u128) == 1)
    }

    /// All elements, for exhaustive checks on small fields.
    pub fn elements(&self) -> impl Iterator<Item = Elem> + '_ {
        (0..self.order() as u64).map(Elem)
    }

    /// Stable textual fingerprint of the representation.
    pub fn fingerprint(&self) -> String {
        format!("m{}:{:x}", self.m, self.reduction_low())
    }
}

fn poly_gcd_gf2(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let db = 127 - b.leading_zeros();
        while a != 0 && 127 - a.leading_zeros() >= db {
            let da = 127 - a.leading_zeros();
            a ^= b << (da - db);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

/// Carry-less 64x64 -> 128 bit product.
#[inline]
pub fn clmul(a: u64, b: u64) -> u128 {
    #[cfg(all(target_arch = "x86_64", target_feature = "pclmulqdq"))]
    {
        // SAFETY: the target feature is enabled at compile time.
        unsafe { clmul_x86(a, b) }
    }
    #[cfg(not(all(target_arch = "x86_64", target_feature = "pclmulqdq")))]
    {
        clmul_soft(a, b)
    }
}

#[cfg(all(target_arch = "x86_64", target_feature = "pclmulqdq"))]
#[inline]
unsafe fn clmul_x86(a: u64, b: u64) -> u128 {
    use std::arch::x86_64::{_mm_clmulepi64_si128, _mm_cvtsi64_si128, _mm_storeu_si128};
    let x = _mm_cvtsi64_si128(a as i64);
    let y = _mm_cvtsi64_si128(b as i64);
    let r = _mm_clmulepi64_si128::<0>(x, y);
    let mut out = [0u64; 2];
    _mm_storeu_si128(out.as_mut_ptr().cast(), r);
    (out[0] as u128) | ((out[1] as u128) << 64)
}

/// Portable carry-less product with a 4-bit window.
#[inline]
pub fn clmul_soft(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut table = [0u128; 16];
    for i in 1..16usize {
        table[i] = if i & 1 == 1 {
            table[i - 1] ^ a
        } else {
            table[i >> 1] << 1
        };
    }
    let mut r = 0u128;
    let mut shift = 0;
    let mut b = b;
    while b != 0 {
        r ^= table[(b & 0xf) as usize] << shift;
        b >>= 4;
        shift += 4;
    }
    r
}
