//! From a test with a computable rate to a prefix code over its strings.
//!
//! `ν(l) = j` once every string of length `l` lies past the point where the
//! tail drops below `2^{-2j}`, so `Σ 2^{-l(x) + ν(l(x))} <= T_0 + 1` where
//! `T_0` bounds the total mass. Codewords of length `l - ν(l) + c` with
//! `c = ⌈log2(T_0 + 1)⌉` then satisfy Kraft's inequality and are assigned
//! online.

use super::{rate_entry, Bits, TestFamily};
use crate::error::{Error, Result};
use crate::rational::{exact_log2, pow2, Rational};
use crate::certified::floor_log2;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, HashMap};

/// Nondecreasing length discount derived from a rate certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Nu {
    /// `thresholds[j - 1] = L_j`: `ν(l) >= j` iff `l >= L_j`.
    pub thresholds: Vec<u64>,
    /// For finite families, the first length beyond every string. From
    /// there `ν` holds its last value plus one, plus one per doubling.
    pub exhausted_from: Option<u64>,
}

impl Nu {
    pub fn eval(&self, l: u64) -> u64 {
        let base = self.thresholds.partition_point(|&t| t <= l) as u64;
        match self.exhausted_from {
            Some(e) if l >= e => {
                let mut extra = 1u64;
                let mut at = e.max(1);
                while at.saturating_mul(2) <= l {
                    at *= 2;
                    extra += 1;
                }
                self.thresholds.len() as u64 + extra
            }
            _ => base,
        }
    }
}

/// `ν` from the certificate entries at `δ = 2^{-2j}`, `j = 1..=j_max`.
pub fn derive_nu(family: &dyn TestFamily, j_max: u32) -> Result<Nu> {
    let mut thresholds = Vec::new();
    let mut exhausted_from = None;
    for j in 1..=j_max as i64 {
        let e = rate_entry(family, &pow2(-2 * j))?;
        if let Some(nb) = family.num_blocks() {
            if e.block > nb {
                exhausted_from = Some(e.length_floor);
                break;
            }
        }
        thresholds.push(e.length_floor);
    }
    Ok(Nu { thresholds, exhausted_from })
}

/// Upper bound `T_0` on the total mass: exact blocks before the point where
/// the tail falls to `1/4`, plus that tail.
///
/// Stops summing exactly at the first block too large to evaluate and
/// bounds the rest analytically from there.
pub fn total_mass_bound(family: &dyn TestFamily) -> Result<Rational> {
    let e = rate_entry(family, &Rational::new(1.into(), 4.into()))?;
    let mut t = Rational::zero();
    for n in 1..e.block {
        match family.block_measure(n) {
            Ok(m) => t += m,
            Err(_) => return Ok(t + family.tail_bound(n)?),
        }
    }
    Ok(t + e.tail)
}

/// `⌈log2(T_0 + 1)⌉`.
pub fn normalizer(family: &dyn TestFamily) -> Result<u64> {
    let t = total_mass_bound(family)? + Rational::one();
    let k = match exact_log2(&t) {
        Some(k) => k,
        None => floor_log2(&t) + 1,
    };
    Ok(k.max(0) as u64)
}

/// `Σ 2^{-l + ν(l)}` over blocks `1..=n_max`, exactly, and an upper bound
/// on the same sum over the blocks after them.
pub fn weighted_sum(family: &dyn TestFamily, nu: &Nu, n_max: u64) -> Result<(Rational, Rational)> {
    let mut partial = Rational::zero();
    let last = family.num_blocks().map_or(n_max, |nb| nb.min(n_max));
    for n in 1..=last {
        for (len, count) in family.length_profile(n)? {
            partial += crate::rational::from_biguint(&count) * pow2(nu.eval(len) as i64 - len as i64);
        }
    }
    // Strings after block n_max with ν = j lie in blocks >= max(n_max + 1, N_j).
    let mut tail = Rational::zero();
    let mut from_blocks = vec![n_max + 1];
    for (j, _) in nu.thresholds.iter().enumerate() {
        let e = rate_entry(family, &pow2(-2 * (j as i64 + 1)))?;
        from_blocks.push(e.block.max(n_max + 1));
    }
    for (j, &b) in from_blocks.iter().enumerate() {
        tail += pow2(j as i64) * family.tail_bound(b)?;
    }
    Ok((partial, tail))
}

#[derive(Clone, Debug)]
pub struct KraftCode {
    /// The constant `c`.
    pub normalizer: u64,
    /// `(string, codeword)` in assignment order.
    pub entries: Vec<(Bits, Bits)>,
    by_codeword: HashMap<Bits, usize>,
    by_string: HashMap<Bits, usize>,
    max_len: usize,
}

impl KraftCode {
    pub fn encode(&self, x: &[u8]) -> Option<&Bits> {
        self.by_string.get(x).map(|&i| &self.entries[i].1)
    }

    /// Reads one codeword from the front of `stream`; returns the string
    /// and the number of bits consumed.
    pub fn decode(&self, stream: &[u8]) -> Option<(&Bits, usize)> {
        for len in 0..=self.max_len.min(stream.len()) {
            if let Some(&i) = self.by_codeword.get(&stream[..len]) {
                return Some((&self.entries[i].0, len));
            }
        }
        None
    }

    pub fn kraft_sum(&self) -> Rational {
        super::kraft_sum(self.entries.iter().map(|(_, c)| c))
    }

    pub fn is_prefix_free(&self) -> bool {
        let cws: Vec<Bits> = self.entries.iter().map(|(_, c)| c.clone()).collect();
        super::is_prefix_free(&cws)
    }

    /// Largest `l(code(x)) - (l(x) - ν(l(x)))` over all strings.
    pub fn max_excess(&self, nu: &Nu) -> i64 {
        self.entries
            .iter()
            .map(|(x, c)| c.len() as i64 - (x.len() as i64 - nu.eval(x.len() as u64) as i64))
            .max()
            .unwrap_or(0)
    }
}

/// Online assignment: each request takes the smallest free dyadic block
/// that fits, leftmost, and returns the split-off right halves to the free
/// list. At most one free block per length ever exists, so a request fails
/// only when the remaining mass is below `2^{-len}`.
#[derive(Clone, Debug, Default)]
pub struct BuddyAllocator {
    free: BTreeMap<u64, Bits>,
}

impl BuddyAllocator {
    pub fn new() -> Self {
        let mut free = BTreeMap::new();
        free.insert(0, Vec::new());
        BuddyAllocator { free }
    }

    pub fn allocate(&mut self, len: u64) -> Result<Bits> {
        let (&have, _) = self
            .free
            .range(..=len)
            .next_back()
            .ok_or_else(|| Error::CertificateViolation(format!("no free codeword of length {len}")))?;
        let mut block = self.free.remove(&have).unwrap();
        for d in have..len {
            let mut right = block.clone();
            right.push(1);
            let clash = self.free.insert(d + 1, right);
            debug_assert!(clash.is_none());
            block.push(0);
        }
        Ok(block)
    }
}

/// The Kraft code for blocks `1..=n_max`, at most `limit` strings.
pub fn kraft_code(family: &dyn TestFamily, nu: &Nu, n_max: u64, limit: usize) -> Result<KraftCode> {
    let c = normalizer(family)?;
    kraft_code_with(family, nu, n_max, limit, c)
}

pub fn kraft_code_with(family: &dyn TestFamily, nu: &Nu, n_max: u64, limit: usize, c: u64) -> Result<KraftCode> {
    let mut alloc = BuddyAllocator::new();
    let mut entries = Vec::new();
    let last = family.num_blocks().map_or(n_max, |nb| nb.min(n_max));
    for n in 1..=last {
        let block = family.enumerate_block(n, limit.saturating_sub(entries.len()))?;
        for x in block {
            let l = x.len() as u64;
            let want = (l + c).saturating_sub(nu.eval(l));
            let cw = alloc.allocate(want)?;
            entries.push((x, cw));
        }
    }
    let by_codeword = entries.iter().enumerate().map(|(i, (_, c))| (c.clone(), i)).collect();
    let by_string = entries.iter().enumerate().map(|(i, (x, _))| (x.clone(), i)).collect();
    let max_len = entries.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    Ok(KraftCode { normalizer: c, entries, by_codeword, by_string, max_len })
}

/// `ρ = ⌊√ν⌋`, with `⌈√ν⌉` as the growth witness.
pub struct Rho<F: Fn(u64) -> u64> {
    pub nu: F,
}

pub fn derive_rho<F: Fn(u64) -> u64>(nu: F) -> Rho<F> {
    Rho { nu }
}

impl<F: Fn(u64) -> u64> Rho<F> {
    pub fn eval(&self, n: u64) -> u64 {
        isqrt((self.nu)(n))
    }

    pub fn witness(&self, n: u64) -> u64 {
        ceil_sqrt((self.nu)(n))
    }

    /// Arguments in `range` where `ρ(n) · w(n) > ν(n)`.
    pub fn violations(&self, range: impl Iterator<Item = u64>) -> Vec<u64> {
        range.filter(|&n| self.eval(n) * self.witness(n) > (self.nu)(n)).collect()
    }
}

pub fn isqrt(v: u64) -> u64 {
    let v = v as u128;
    let mut r = (v as f64).sqrt() as u128;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r as u64
}

pub fn ceil_sqrt(v: u64) -> u64 {
    let r = isqrt(v);
    if r * r == v {
        r
    } else {
        r + 1
    }
}

#[cfg(test)]
mod tests {
    use super::super::{bits_from_str, ListedFamily, SllnFamily};
    use super::*;
    use crate::rational::rat;

    #[test]
    fn buddy_assignment() {
        let mut a = BuddyAllocator::new();
        let got: Vec<String> = [2, 3, 3].iter().map(|&l| super::super::bits_to_string(&a.allocate(l).unwrap())).collect();
        assert_eq!(got, vec!["00", "010", "011"]);
        let mut a = BuddyAllocator::new();
        a.allocate(1).unwrap();
        a.allocate(1).unwrap();
        assert!(matches!(a.allocate(5), Err(Error::CertificateViolation(_))));
    }

    #[test]
    fn finite_family_extension() {
        let fam = ListedFamily::new(vec![vec![bits_from_str("0110").unwrap()]]).unwrap();
        let nu = derive_nu(&fam, 8).unwrap();
        assert_eq!(nu.thresholds, vec![0, 0]);
        assert_eq!(nu.exhausted_from, Some(5));
        assert_eq!(nu.eval(4), 2);
        assert_eq!((nu.eval(5), nu.eval(9)), (3, 3));
        assert_eq!(nu.eval(10), 4);
        assert_eq!(nu.eval(20), 5);
    }

    #[test]
    fn slln_code() {
        let fam = SllnFamily::new(rat(1, 2)).unwrap();
        let nu = derive_nu(&fam, 12).unwrap();
        assert!(nu.thresholds.windows(2).all(|w| w[0] <= w[1]));
        let code = kraft_code(&fam, &nu, 16, 1 << 16).unwrap();
        assert!(code.is_prefix_free());
        assert!(code.kraft_sum() <= Rational::one());
        for (x, c) in &code.entries {
            assert_eq!(code.decode(c).unwrap(), (x, c.len()));
        }
        assert!(code.max_excess(&nu) <= code.normalizer as i64);
        let (partial, tail) = weighted_sum(&fam, &nu, 40).unwrap();
        assert!(partial + tail <= total_mass_bound(&fam).unwrap() + Rational::one());
    }

    #[test]
    fn rho_examples() {
        let r = derive_rho(|n| n);
        assert_eq!(r.eval(17), 4);
        assert_eq!(r.violations(1..=12), vec![5, 10, 11]);
        let r = derive_rho(|n| 63 - n.max(1).leading_zeros() as u64);
        assert_eq!(r.eval(1 << 20), 4);
        assert_eq!(isqrt(u32::MAX as u64 * u32::MAX as u64), u32::MAX as u64);
    }
}
