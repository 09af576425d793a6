//! The iterated-logarithm test.
//!
//! With `m_n = ⌈δ^n⌉` and `t_n = δ √(m_n ln ln m_n / 2)`, block `n` is the
//! prefix-free set of shortest prefixes `x` with `m_n <= l(x) <= m_{n+1}`
//! and `S_{l(x)}(x) - l(x)/2 > t_n`. `ln ln m_n` is clamped at zero, which
//! only matters for `m_n = 2`.

use super::{Bits, FamilyKind, ProofKind, TestFamily};
use crate::certified::{exp, ln, DEFAULT_BITS};
use crate::error::{Error, Result};
use crate::rational::{from_biguint, pow2, rat, to_fraction, Rational};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::sync::Mutex;

/// Windows longer than this are never enumerated or ranked.
pub const EXACT_WINDOW_LIMIT: u64 = 1 << 12;

#[derive(Debug)]
pub struct LilFamily {
    pub delta: Rational,
    thresholds: Mutex<HashMap<u64, Vec<u64>>>,
}

impl Clone for LilFamily {
    fn clone(&self) -> Self {
        LilFamily { delta: self.delta.clone(), thresholds: Mutex::new(HashMap::new()) }
    }
}

impl LilFamily {
    pub fn new(delta: Rational) -> Result<LilFamily> {
        if delta <= Rational::one() {
            return Err(Error::InvalidParameter(format!("delta {} must exceed 1", to_fraction(&delta))));
        }
        Ok(LilFamily { delta, thresholds: Mutex::new(HashMap::new()) })
    }

    /// `⌈δ^n⌉`, saturating at `u64::MAX`.
    pub fn m(&self, n: u64) -> u64 {
        let cap = Rational::from_integer(u64::MAX.into());
        let mut p = Rational::one();
        for _ in 0..n {
            p *= &self.delta;
            if p > cap {
                return u64::MAX;
            }
        }
        p.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
    }

    /// `(δ² m_n / 2) · max(ln ln m_n, 0)`, enclosed.
    fn t_squared(&self, n: u64, bits: u32) -> (Rational, Rational) {
        let m = self.m(n);
        let scale = &self.delta * &self.delta * rat(m as i64, 2);
        if m < 3 {
            return (Rational::zero(), Rational::zero());
        }
        let l = ln(&Rational::from_integer(m.into()), bits);
        let ll_lo = ln(&l.lo, bits).lo.max(Rational::zero());
        let ll_hi = ln(&l.hi, bits).hi;
        (&scale * ll_lo, &scale * ll_hi)
    }

    /// Smallest `s` with `s - k/2 > t_n`, for each `k` in the window.
    pub fn s_min(&self, n: u64) -> Vec<u64> {
        if let Some(v) = self.thresholds.lock().unwrap().get(&n) {
            return v.clone();
        }
        let (a, b) = self.window(n);
        let v = self.s_min_range(n, a, b);
        self.thresholds.lock().unwrap().insert(n, v.clone());
        v
    }

    /// Thresholds for `k` in `from..=to`, widening the enclosure of `t_n²`
    /// until every comparison is decided.
    fn s_min_range(&self, n: u64, from: u64, to: u64) -> Vec<u64> {
        let mut bits = DEFAULT_BITS;
        'retry: loop {
            let (lo, hi) = self.t_squared(n, bits);
            let t = crate::rational::to_f64(&hi).sqrt();
            // None: the enclosure cannot decide `(s - k/2)^2 > t^2`.
            let above = |s: u64, k: u64| -> Option<bool> {
                let d = rat(2 * s as i64 - k as i64, 2);
                if d <= Rational::zero() {
                    return Some(false);
                }
                let d2 = &d * &d;
                if d2 > hi {
                    Some(true)
                } else if d2 <= lo {
                    Some(false)
                } else {
                    None
                }
            };
            let mut out = Vec::with_capacity((to - from + 1) as usize);
            for k in from..=to {
                let mut s = ((k as f64 / 2.0 + t).floor().max(0.0) as u64).min(k + 1);
                loop {
                    match above(s, k) {
                        None => {
                            bits *= 2;
                            assert!(bits < 1 << 16, "threshold undecidable at block {n}");
                            continue 'retry;
                        }
                        Some(true) if s > 0 => match above(s - 1, k) {
                            Some(true) => s -= 1,
                            Some(false) => break,
                            None => {
                                bits *= 2;
                                continue 'retry;
                            }
                        },
                        Some(true) => break,
                        Some(false) if s > k => break,
                        Some(false) => s += 1,
                    }
                }
                out.push(s);
            }
            return out;
        }
    }

    fn window(&self, n: u64) -> (u64, u64) {
        (self.m(n), self.m(n + 1))
    }

    fn check_window(&self, n: u64) -> Result<(u64, u64)> {
        let (a, b) = self.window(n);
        if b > EXACT_WINDOW_LIMIT {
            return Err(Error::EnumerationBudget(format!("block {n} window ends at {b}")));
        }
        Ok((a, b))
    }

    fn crossed(&self, smin: &[u64], a: u64, k: u64, s: u64) -> bool {
        k >= a && s >= smin[(k - a) as usize]
    }

    /// For each prefix length, the number of uncrossed paths by ones count,
    /// and the number of first crossings at each length.
    fn forward(&self, n: u64) -> Result<Vec<BigUint>> {
        let (a, b) = self.check_window(n)?;
        let smin = self.s_min(n);
        let mut alive = vec![BigUint::one()];
        let mut firsts = Vec::new();
        for k in 1..=b {
            let mut next = vec![BigUint::zero(); k as usize + 1];
            for (s, c) in alive.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                next[s] += c;
                next[s + 1] += c;
            }
            let mut crossed = BigUint::zero();
            if k >= a {
                for (s, c) in next.iter_mut().enumerate() {
                    if self.crossed(&smin, a, k, s as u64) && !c.is_zero() {
                        crossed += &*c;
                        *c = BigUint::zero();
                    }
                }
            }
            firsts.push(crossed);
            alive = next;
        }
        Ok(firsts)
    }

    /// Empirical `c = max_n L(block n) · n^δ` over blocks `1..=n_max`, in
    /// floating point.
    pub fn shape_constant(&self, n_max: u64) -> Result<f64> {
        let d = crate::rational::to_f64(&self.delta);
        let mut c = 0f64;
        for n in 1..=n_max {
            let l = crate::rational::to_f64(&self.block_measure(n)?);
            c = c.max(l * (n as f64).powf(d));
        }
        Ok(c)
    }

    /// Lower bound on `e_{n'} = δ² m_{n'} / m_{n'+1}` for all `n' >= n`,
    /// using only `m_n >= δ^n` and `m_{n+1} <= δ^{n+1} + 1`. The bound
    /// increases with `n`, so evaluating it at `min(n, 64)` stays valid.
    fn exponent_floor(&self, n: u64) -> Rational {
        let dn = num_traits::pow(self.delta.clone(), n.min(64) as usize);
        &self.delta * &self.delta * &dn / (&dn * &self.delta + Rational::one())
    }

    /// First block `N'` from which the p-series tail applies.
    fn tail_start(&self) -> u64 {
        let l = ln(&self.delta, DEFAULT_BITS).lo;
        let mut n = 1u64;
        while Rational::from_integer(n.into()) * &l < Rational::one() || self.exponent_floor(n) <= Rational::one() {
            n += 1;
        }
        n
    }

    /// `x^{-e}` from above, for a lower bound `x_lo > 0` on `x` and `e > 0`.
    fn pow_neg_hi(x_lo: &Rational, e: &Rational) -> Rational {
        let l = ln(x_lo, DEFAULT_BITS).lo;
        exp(&-(e * l), DEFAULT_BITS).hi
    }
}

impl TestFamily for LilFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Lil
    }
    fn proof_kind(&self) -> ProofKind {
        ProofKind::PSeriesTail
    }
    fn describe(&self) -> String {
        format!("lil(delta={})", to_fraction(&self.delta))
    }
    fn num_blocks(&self) -> Option<u64> {
        None
    }
    fn block_lengths(&self, n: u64) -> (u64, u64) {
        self.window(n)
    }
    fn block_size(&self, n: u64) -> Result<BigUint> {
        Ok(self.forward(n)?.iter().sum())
    }
    fn block_measure(&self, n: u64) -> Result<Rational> {
        let firsts = self.forward(n)?;
        Ok(firsts
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| from_biguint(c) * pow2(-(i as i64 + 1)))
            .sum())
    }
    /// `2 exp(-2 t_n² / m_{n+1})`, at most 1.
    fn block_bound(&self, n: u64) -> Result<Rational> {
        if self.m(n + 1) == u64::MAX {
            return Ok(Rational::one());
        }
        let (lo, _) = self.t_squared(n, DEFAULT_BITS);
        let x = Rational::from_integer(2.into()) * lo / Rational::from_integer(self.m(n + 1).into());
        Ok((exp(&-x, DEFAULT_BITS).hi * Rational::from_integer(2.into())).min(Rational::one()))
    }
    /// Blocks before `N'` are bounded one by one. From `N >= N'` on,
    /// `2 exp(-2t_n²/m_{n+1}) = 2 (ln m_n)^{-e_n} <= 2 (n ln δ)^{-e}` with
    /// `e = e_floor(N)`, summed as `2 (ln δ)^{-e} (N^{-e} + N^{1-e}/(e-1))`.
    fn tail_bound(&self, n: u64) -> Result<Rational> {
        let start = self.tail_start();
        let mut head = Rational::zero();
        let mut from = n;
        while from < start {
            head += self.block_bound(from)?;
            from += 1;
        }
        let e = self.exponent_floor(from);
        let ln_delta = ln(&self.delta, DEFAULT_BITS).lo;
        let nr = Rational::from_integer(from.into());
        let a = LilFamily::pow_neg_hi(&ln_delta, &e);
        let b = LilFamily::pow_neg_hi(&nr, &e);
        let c = LilFamily::pow_neg_hi(&nr, &(&e - Rational::one())) / (&e - Rational::one());
        Ok(head + Rational::from_integer(2.into()) * a * (b + c))
    }
    fn enumerate_block(&self, n: u64, limit: usize) -> Result<Vec<Bits>> {
        let (a, _) = self.check_window(n)?;
        if self.block_size(n)? > BigUint::from(limit) {
            return Err(Error::EnumerationBudget(format!("block {n} exceeds {limit} strings")));
        }
        let smin = self.s_min(n);
        let b = self.window(n).1;
        let mut out = Vec::new();
        let mut cur = Vec::new();
        self.dfs(&smin, a, b, &mut cur, 0, &mut out);
        Ok(out)
    }
    fn length_profile(&self, n: u64) -> Result<Vec<(u64, BigUint)>> {
        Ok(self
            .forward(n)?
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i as u64 + 1, c))
            .collect())
    }
    fn hit_in_block(&self, n: u64, omega: &[u8]) -> Option<usize> {
        let (a, b) = self.window(n);
        if omega.len() < a as usize {
            return None;
        }
        let to = b.min(omega.len() as u64);
        let smin = if b <= EXACT_WINDOW_LIMIT { self.s_min(n) } else { self.s_min_range(n, a, to) };
        let mut s = super::ones(&omega[..a as usize - 1]);
        for k in a..=to {
            s += u64::from(omega[k as usize - 1]);
            if s >= smin[(k - a) as usize] {
                return Some(k as usize);
            }
        }
        None
    }
    /// Lexicographic rank, by counting first-crossing completions.
    fn rank_in_block(&self, n: u64, x: &[u8]) -> Option<BigUint> {
        let (a, b) = self.check_window(n).ok()?;
        if b > 2048 {
            return None;
        }
        let smin = self.s_min(n);
        // g[len][s]: completions of an uncrossed prefix of length len with s ones.
        let mut g: Vec<Vec<BigUint>> = vec![vec![]; b as usize + 1];
        g[b as usize] = vec![BigUint::zero(); b as usize + 1];
        for len in (0..b).rev() {
            let mut row = vec![BigUint::zero(); len as usize + 1];
            for (s, slot) in row.iter_mut().enumerate() {
                for bit in 0..2u64 {
                    let s2 = s as u64 + bit;
                    if self.crossed(&smin, a, len + 1, s2) {
                        *slot += 1u32;
                    } else {
                        *slot += &g[len as usize + 1][s2 as usize];
                    }
                }
            }
            g[len as usize] = row;
        }
        let mut rank = BigUint::zero();
        let mut s = 0u64;
        for (i, &bit) in x.iter().enumerate() {
            if bit == 1 {
                let len = i as u64 + 1;
                rank += if self.crossed(&smin, a, len, s) { BigUint::one() } else { g[len as usize][s as usize].clone() };
                s += 1;
            }
        }
        Some(rank)
    }
}

impl LilFamily {
    fn dfs(&self, smin: &[u64], a: u64, b: u64, cur: &mut Vec<u8>, s: u64, out: &mut Vec<Bits>) {
        let k = cur.len() as u64;
        if k >= 1 && self.crossed(smin, a, k, s) {
            out.push(cur.clone());
            return;
        }
        if k == b {
            return;
        }
        for bit in 0..2u8 {
            cur.push(bit);
            self.dfs(smin, a, b, cur, s + u64::from(bit), out);
            cur.pop();
        }
    }
}

/// Exact check of `L{max_{k<=m} S_k > a} <= 2 L{S_m > a}` for `m <= m_max`
/// and integer `a` in `m/2 + 1 ..= m`, both as written and for the
/// centred walk `S_k - k/2` with `t = a - m/2`.
pub fn reflection_check(m_max: u32) -> ReflectionReport {
    let mut report = ReflectionReport { cases: 0, raw_violations: vec![], centred_violations: vec![] };
    for m in 1..=m_max {
        let total = 1u64 << m;
        for a in (m / 2 + 1)..=m {
            let (mut raw_max, mut raw_end, mut cen_max, mut cen_end) = (0u64, 0u64, 0u64, 0u64);
            let t2 = 2 * a as i64 - m as i64;
            for v in 0..total {
                let mut s = 0i64;
                let mut best_raw = 0i64;
                let mut best_cen = i64::MIN;
                for k in 1..=m {
                    s += ((v >> (m - k)) & 1) as i64;
                    best_raw = best_raw.max(s);
                    best_cen = best_cen.max(2 * s - k as i64);
                }
                raw_max += u64::from(best_raw > a as i64);
                raw_end += u64::from(s > a as i64);
                cen_max += u64::from(best_cen > t2);
                cen_end += u64::from(2 * s - m as i64 > t2);
            }
            report.cases += 1;
            if raw_max > 2 * raw_end {
                report.raw_violations.push((m, a));
            }
            if cen_max > 2 * cen_end {
                report.centred_violations.push((m, a));
            }
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionReport {
    pub cases: u64,
    pub raw_violations: Vec<(u32, u32)>,
    pub centred_violations: Vec<(u32, u32)>,
}

#[cfg(test)]
mod tests {
    use super::super::{is_prefix_free, kraft_sum, passes, rate_entry};
    use super::*;

    #[test]
    fn block_starts() {
        let f = LilFamily::new(rat(3, 2)).unwrap();
        assert_eq!((1..=5).map(|n| f.m(n)).collect::<Vec<_>>(), vec![2, 3, 4, 6, 8]);
        assert!(LilFamily::new(Rational::one()).is_err());
    }

    // Independent oracle: every string of length m_{n+1}, grouped by its
    // first crossing.
    fn brute_block(f: &LilFamily, n: u64) -> Vec<Bits> {
        let (a, b) = f.window(n);
        let d = crate::rational::to_f64(&f.delta);
        let mut out = std::collections::BTreeSet::new();
        for v in 0u64..(1 << b) {
            let x: Vec<u8> = (0..b).rev().map(|i| ((v >> i) & 1) as u8).collect();
            let mut s = 0i64;
            for k in 1..=b {
                s += i64::from(x[k as usize - 1]);
                if k >= a {
                    let m = a as f64;
                    let t = d * (m * m.ln().ln().max(0.0) / 2.0).sqrt();
                    if s as f64 - k as f64 / 2.0 > t {
                        out.insert(x[..k as usize].to_vec());
                        break;
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn blocks_match_brute_force() {
        let f = LilFamily::new(rat(3, 2)).unwrap();
        for n in 1..=5 {
            let got = f.enumerate_block(n, 1 << 20).unwrap();
            assert_eq!(got, brute_block(&f, n), "block {n}");
            assert!(is_prefix_free(&got));
            assert_eq!(kraft_sum(&got), f.block_measure(n).unwrap());
            assert!(f.block_measure(n).unwrap() <= f.block_bound(n).unwrap());
            for (i, x) in got.iter().enumerate() {
                assert_eq!(f.rank_in_block(n, x), Some(BigUint::from(i)));
            }
        }
    }

    #[test]
    fn reflection_small() {
        let r = reflection_check(10);
        assert!(r.raw_violations.is_empty());
        assert!(r.centred_violations.is_empty());
    }

    #[test]
    fn tail_is_certified() {
        let f = LilFamily::new(rat(3, 2)).unwrap();
        for j in 1..=4 {
            let e = rate_entry(&f, &pow2(-j)).unwrap();
            assert!(e.tail <= pow2(-j));
        }
        let omega = vec![1u8; 40];
        let rep = passes(&omega, &f, 8).unwrap();
        assert!(!rep.hits.is_empty());
    }
}
