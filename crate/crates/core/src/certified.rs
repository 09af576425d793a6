//! Outward-rounded enclosures for transcendental quantities.
//!
//! Verdicts never depend on floating-point results. Where a quantity is
//! irrational (`exp`, `ln`, `log2`) we carry a rational interval that is
//! guaranteed to contain it, and compare against the interval endpoints.
//! [`DirFloat`] is a small 64-bit-mantissa float with directed rounding,
//! used where exact rationals would grow to millions of bits.

use crate::rational::{exact_log2, pow2, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Binary precision used when the caller does not care.
pub const DEFAULT_BITS: u32 = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Down,
    Up,
}

/// Largest `k` with `2^k <= x`, for `x > 0`.
pub fn floor_log2(x: &Rational) -> i64 {
    debug_assert!(x.is_positive());
    let k = x.numer().bits() as i64 - x.denom().bits() as i64;
    // 2^(k-1) < x < 2^(k+1)
    if *x >= pow2(k) {
        k
    } else {
        k - 1
    }
}

/// Rounds `x` to a dyadic rational with `bits` significant bits.
pub fn round(x: &Rational, bits: u32, dir: Dir) -> Rational {
    if x.is_zero() {
        return Rational::zero();
    }
    if x.is_negative() {
        let flip = if dir == Dir::Down { Dir::Up } else { Dir::Down };
        return -round(&-x, bits, flip);
    }
    if crate::rational::is_dyadic(x) && x.numer().bits() <= bits as u64 {
        return x.clone();
    }
    let k = floor_log2(x);
    let shift = bits as i64 - 1 - k;
    let scaled = x * pow2(shift);
    let m = match dir {
        Dir::Down => scaled.floor(),
        Dir::Up => scaled.ceil(),
    };
    m * pow2(-shift)
}

/// A closed rational interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Enclosure {
    pub lo: Rational,
    pub hi: Rational,
}

impl Enclosure {
    pub fn exact(x: Rational) -> Self {
        Enclosure { lo: x.clone(), hi: x }
    }

    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        Enclosure { lo, hi }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn mid_f64(&self) -> f64 {
        (crate::rational::to_f64(&self.lo) + crate::rational::to_f64(&self.hi)) / 2.0
    }

    /// `Some(true)` if every point is below `x`, `Some(false)` if none is,
    /// `None` when `x` falls inside.
    pub fn lt(&self, x: &Rational) -> Option<bool> {
        if self.hi < *x {
            Some(true)
        } else if self.lo >= *x {
            Some(false)
        } else {
            None
        }
    }

    pub fn le(&self, x: &Rational) -> Option<bool> {
        if self.hi <= *x {
            Some(true)
        } else if self.lo > *x {
            Some(false)
        } else {
            None
        }
    }

    pub fn add(&self, o: &Enclosure) -> Enclosure {
        Enclosure { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Enclosure) -> Enclosure {
        Enclosure { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    pub fn neg(&self) -> Enclosure {
        Enclosure { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn scale(&self, c: &Rational) -> Enclosure {
        if c.is_negative() {
            Enclosure { lo: &self.hi * c, hi: &self.lo * c }
        } else {
            Enclosure { lo: &self.lo * c, hi: &self.hi * c }
        }
    }

    pub fn mul(&self, o: &Enclosure) -> Enclosure {
        let c = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        Enclosure { lo, hi }
    }

    /// Reciprocal of an interval that excludes zero.
    pub fn recip(&self) -> Enclosure {
        assert!(self.lo.is_positive() || self.hi.is_negative(), "reciprocal of interval containing 0");
        Enclosure { lo: self.hi.recip(), hi: self.lo.recip() }
    }

    pub fn div(&self, o: &Enclosure) -> Enclosure {
        self.mul(&o.recip())
    }

    /// Widens outward to `bits` significant bits per endpoint.
    pub fn rounded(&self, bits: u32) -> Enclosure {
        Enclosure { lo: round(&self.lo, bits, Dir::Down), hi: round(&self.hi, bits, Dir::Up) }
    }
}

/// Enclosure of `e^x`.
pub fn exp(x: &Rational, bits: u32) -> Enclosure {
    if x.is_zero() {
        return Enclosure::exact(Rational::one());
    }
    if x.is_negative() {
        return exp(&-x, bits).recip().rounded(bits);
    }
    let work = bits + 24;
    // e^x = (e^(x/2^j))^(2^j) with x/2^j <= 1/2.
    let j = (floor_log2(x) + 2).max(0);
    let y = x * pow2(-j);
    let y_lo = round(&y, work, Dir::Down);
    let y_hi = round(&y, work, Dir::Up);
    let lo = exp_series(&y_lo, work, Dir::Down);
    let hi = exp_series(&y_hi, work, Dir::Up);
    let mut e = Enclosure::new(lo, hi);
    for _ in 0..j {
        e = e.mul(&e).rounded(work);
    }
    e.rounded(bits)
}

// Taylor sum for 0 <= y <= 1/2; the upper variant adds a geometric
// bound on the tail.
fn exp_series(y: &Rational, work: u32, dir: Dir) -> Rational {
    let eps = pow2(-(work as i64) - 8);
    let mut term = Rational::one();
    let mut sum = Rational::one();
    let mut k = 1i64;
    loop {
        term = round(&(&term * y / BigInt::from(k)), work, dir);
        sum += &term;
        if term < eps {
            break;
        }
        k += 1;
    }
    if dir == Dir::Up {
        // Remaining terms shrink by at least 1/2 each, so their sum is at most `2 * term`.
        sum += &term * BigInt::from(2);
    }
    round(&sum, work, dir)
}

// 2 * atanh(t) for 0 <= t <= 1/3.
fn atanh2(t: &Rational, work: u32, dir: Dir) -> Rational {
    let eps = pow2(-(work as i64) - 8);
    let t2 = round(&(t * t), work, dir);
    let mut power = t.clone();
    let mut sum = t.clone();
    let mut i = 1i64;
    loop {
        power = round(&(&power * &t2), work, dir);
        let term = round(&(&power / BigInt::from(2 * i + 1)), work, dir);
        sum += &term;
        i += 1;
        if term < eps {
            if dir == Dir::Up {
                // With t^2 <= 1/9 the tail is below (9/8) * term.
                sum += term * Rational::new(BigInt::from(9), BigInt::from(8));
            }
            break;
        }
    }
    round(&(sum * BigInt::from(2)), work, dir)
}

pub fn ln2(bits: u32) -> Enclosure {
    let work = bits + 16;
    let third = Rational::new(BigInt::one(), BigInt::from(3));
    Enclosure::new(atanh2(&third, work, Dir::Down), atanh2(&third, work, Dir::Up)).rounded(bits)
}

/// Enclosure of `ln x` for `x > 0`.
pub fn ln(x: &Rational, bits: u32) -> Enclosure {
    assert!(x.is_positive(), "ln of non-positive value");
    if x.is_one() {
        return Enclosure::exact(Rational::zero());
    }
    let work = bits + 24;
    let k = floor_log2(x);
    let y = x * pow2(-k); // 1 <= y < 2
    let t_of = |v: &Rational| (v - Rational::one()) / (v + Rational::one());
    let y_lo = round(&y, work, Dir::Down).max(Rational::one());
    let y_hi = round(&y, work, Dir::Up);
    let t_lo = round(&t_of(&y_lo), work, Dir::Down);
    let t_hi = round(&t_of(&y_hi), work, Dir::Up);
    let ly = Enclosure::new(atanh2(&t_lo, work, Dir::Down), atanh2(&t_hi, work, Dir::Up));
    let l2 = ln2(work);
    l2.scale(&Rational::from_integer(BigInt::from(k))).add(&ly).rounded(bits)
}

/// Enclosure of `log2 x` for `x > 0`; exact for powers of two.
pub fn log2(x: &Rational, bits: u32) -> Enclosure {
    if let Some(k) = exact_log2(x) {
        return Enclosure::exact(Rational::from_integer(BigInt::from(k)));
    }
    let k = floor_log2(x);
    let frac = ln(&(x * pow2(-k)), bits + 8).div(&ln2(bits + 8));
    frac.add(&Enclosure::exact(Rational::from_integer(BigInt::from(k)))).rounded(bits)
}

/// Positive float `mant * 2^exp` with 64-bit mantissa and directed rounding.
///
/// Only the operations needed for non-negative sums of products are
/// provided; every result is rounded in the requested direction so a chain
/// of `Down` (resp. `Up`) operations yields a certified lower (upper) bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirFloat {
    mant: u64,
    exp: i64,
}

impl DirFloat {
    pub const ZERO: DirFloat = DirFloat { mant: 0, exp: 0 };
    pub const ONE: DirFloat = DirFloat { mant: 1 << 63, exp: -63 };

    pub fn is_zero(&self) -> bool {
        self.mant == 0
    }

    fn from_u128(v: u128, exp: i64, dir: Dir) -> DirFloat {
        if v == 0 {
            return DirFloat::ZERO;
        }
        let lz = v.leading_zeros() as i64;
        let top = 128 - lz; // bit length
        if top <= 64 {
            let sh = 64 - top;
            return DirFloat { mant: (v << sh) as u64, exp: exp - sh };
        }
        let sh = top - 64;
        let mut m = v >> sh;
        let rem = v & ((1u128 << sh) - 1);
        let mut e = exp + sh;
        if dir == Dir::Up && rem != 0 {
            m += 1;
            if m == 1u128 << 64 {
                m >>= 1;
                e += 1;
            }
        }
        DirFloat { mant: m as u64, exp: e }
    }

    pub fn from_u64(v: u64) -> DirFloat {
        DirFloat::from_u128(v as u128, 0, Dir::Down)
    }

    /// Rounds a non-negative rational.
    pub fn from_rational(x: &Rational, dir: Dir) -> DirFloat {
        assert!(!x.is_negative());
        if x.is_zero() {
            return DirFloat::ZERO;
        }
        let r = round(x, 64, dir);
        let k = floor_log2(&r);
        let m = (&r * pow2(63 - k)).to_integer();
        DirFloat { mant: m.to_u64().expect("mantissa fits"), exp: k - 63 }
    }

    pub fn from_biguint(x: &num_bigint::BigUint, dir: Dir) -> DirFloat {
        let bits = x.bits() as i64;
        if bits <= 64 {
            return DirFloat::from_u128(x.to_u64().unwrap() as u128, 0, dir);
        }
        let sh = bits - 64;
        let m = (x >> sh as usize).to_u64().unwrap();
        let exact = (x.trailing_zeros().unwrap_or(0) as i64) >= sh;
        let mut f = DirFloat { mant: m, exp: sh };
        if dir == Dir::Up && !exact {
            f = f.add(&DirFloat { mant: 1 << 63, exp: sh - 63 }, Dir::Up);
        }
        f
    }

    pub fn to_rational(&self) -> Rational {
        Rational::from_integer(BigInt::from(self.mant)) * pow2(self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        if self.mant == 0 {
            return 0.0;
        }
        let e = self.exp.clamp(-2000, 2000) as i32;
        (self.mant as f64) * 2f64.powi(e)
    }

    pub fn mul(&self, o: &DirFloat, dir: Dir) -> DirFloat {
        if self.is_zero() || o.is_zero() {
            return DirFloat::ZERO;
        }
        DirFloat::from_u128(self.mant as u128 * o.mant as u128, self.exp + o.exp, dir)
    }

    pub fn mul_u64(&self, n: u64, dir: Dir) -> DirFloat {
        if self.is_zero() || n == 0 {
            return DirFloat::ZERO;
        }
        DirFloat::from_u128(self.mant as u128 * n as u128, self.exp, dir)
    }

    pub fn div_u64(&self, n: u64, dir: Dir) -> DirFloat {
        assert!(n > 0);
        if self.is_zero() {
            return DirFloat::ZERO;
        }
        let num = (self.mant as u128) << 64;
        let q = num / n as u128;
        let r = num % n as u128;
        let q = if dir == Dir::Up && r != 0 { q + 1 } else { q };
        DirFloat::from_u128(q, self.exp - 64, dir)
    }

    pub fn add(&self, o: &DirFloat, dir: Dir) -> DirFloat {
        if self.is_zero() {
            return *o;
        }
        if o.is_zero() {
            return *self;
        }
        let (a, b) = if self.exp >= o.exp { (self, o) } else { (o, self) };
        let gap = a.exp - b.exp;
        // a.mant << 63 leaves one spare bit in u128 for the carry.
        let av = (a.mant as u128) << 63;
        let (bv, lost) = if gap <= 63 {
            ((b.mant as u128) << (63 - gap), false)
        } else if gap - 63 < 64 {
            let sh = gap - 63;
            ((b.mant >> sh) as u128, b.mant & ((1u64 << sh) - 1) != 0)
        } else {
            (0, true)
        };
        let sticky = if dir == Dir::Up && lost { 1 } else { 0 };
        DirFloat::from_u128(av + bv + sticky, a.exp - 63, dir)
    }

    pub fn powu(&self, mut n: u64, dir: Dir) -> DirFloat {
        let mut base = *self;
        let mut acc = DirFloat::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base, dir);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base, dir);
            }
        }
        acc
    }

    pub fn cmp_value(&self, o: &DirFloat) -> Ordering {
        self.to_rational().cmp(&o.to_rational())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat, to_f64};

    fn contains(e: &Enclosure, v: f64, tol: f64) -> bool {
        to_f64(&e.lo) <= v + tol && to_f64(&e.hi) >= v - tol && to_f64(&e.width()) < 1e-20 + tol
    }

    #[test]
    fn rounding_is_directed() {
        let x = rat(1, 3);
        let lo = round(&x, 20, Dir::Down);
        let hi = round(&x, 20, Dir::Up);
        assert!(lo < x && x < hi);
        assert!(&hi - &lo <= pow2(-21));
        assert_eq!(round(&rat(3, 8), 20, Dir::Up), rat(3, 8));
        assert!(round(&rat(-1, 3), 8, Dir::Down) < rat(-1, 3));
    }

    #[test]
    fn exp_values() {
        for (x, v) in [(rat(1, 1), std::f64::consts::E), (rat(-2, 1), (-2f64).exp()), (rat(37, 5), 7.4f64.exp())] {
            let e = exp(&x, 80);
            assert!(contains(&e, v, v * 1e-14), "{x}: {e:?}");
            assert!(e.lo < e.hi);
        }
    }

    #[test]
    fn exp_truly_brackets() {
        // e = 2.718281828459045235360287...
        let e = exp(&int(1), 90);
        let below = Rational::new(BigInt::from(2718281828459045235360287u128), BigInt::from(10u128.pow(24)));
        let above = Rational::new(BigInt::from(2718281828459045235360288u128), BigInt::from(10u128.pow(24)));
        assert!(e.lo > below.clone() - pow2(-60) && e.lo < above);
        assert!(e.hi > below);
    }

    #[test]
    fn ln_and_log2() {
        let l = ln(&int(10), 80);
        assert!(contains(&l, 10f64.ln(), 1e-14));
        let l = ln(&rat(1, 7), 80);
        assert!(contains(&l, (1.0f64 / 7.0).ln(), 1e-14));
        let l2 = log2(&int(3), 80);
        assert!(contains(&l2, 3f64.log2(), 1e-14));
        assert!(log2(&rat(1, 32), 80).is_exact());
        // ln 2 = 0.69314718055994530941723...
        let e = ln2(100);
        let approx = Rational::new(BigInt::from(69314718055994530941723u128), BigInt::from(10u128.pow(23)));
        assert!(e.lo <= approx.clone() + pow2(-70) && e.hi >= approx - pow2(-70));
    }

    #[test]
    fn dirfloat_brackets_rational() {
        let x = rat(1, 3);
        let lo = DirFloat::from_rational(&x, Dir::Down);
        let hi = DirFloat::from_rational(&x, Dir::Up);
        assert!(lo.to_rational() < x && hi.to_rational() > x);
        let p_lo = lo.powu(1000, Dir::Down).to_rational();
        let p_hi = hi.powu(1000, Dir::Up).to_rational();
        let exact = num_traits::pow(x.clone(), 1000);
        assert!(p_lo <= exact && exact <= p_hi);
        let s_lo = lo.add(&DirFloat::from_rational(&rat(1, 7), Dir::Down), Dir::Down).to_rational();
        let s_hi = hi.add(&DirFloat::from_rational(&rat(1, 7), Dir::Up), Dir::Up).to_rational();
        assert!(s_lo <= rat(10, 21) && rat(10, 21) <= s_hi);
        let d_lo = lo.div_u64(7, Dir::Down).to_rational();
        let d_hi = hi.div_u64(7, Dir::Up).to_rational();
        assert!(d_lo <= rat(1, 21) && rat(1, 21) <= d_hi);
        let tiny = DirFloat::from_rational(&pow2(-500), Dir::Down);
        assert!(DirFloat::ONE.add(&tiny, Dir::Up).to_rational() > int(1));
        assert_eq!(DirFloat::ONE.add(&tiny, Dir::Down).to_rational(), int(1));
    }
}
