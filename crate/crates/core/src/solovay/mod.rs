//! Total Solovay tests with computable rates, and the conversion of a test
//! into a prefix code whose lengths undercut the test strings.
//!
//! A family enumerates strings `x_1, x_2, ...` in consecutive finite
//! blocks (all strings of one length for the SLLN family, the crossing set
//! of one window for the LIL family). Each block has an exactly computable
//! measure and each family an analytic upper bound on the measure of all
//! blocks from a given one on.

pub mod kraft;
pub mod lil;
pub mod slln;

pub use kraft::{derive_nu, derive_rho, kraft_code, KraftCode, Nu, Rho};
pub use lil::LilFamily;
pub use slln::SllnFamily;

use crate::error::{Error, Result};
use crate::rational::{pow2, to_fraction, Rational};
use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

/// A binary string, one bit per byte.
pub type Bits = Vec<u8>;

pub fn bits_from_str(s: &str) -> Result<Bits> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::InvalidParameter(format!("not a binary digit: {c:?}"))),
        })
        .collect()
}

pub fn bits_to_string(b: &[u8]) -> String {
    b.iter().map(|&x| char::from(b'0' + x)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Slln,
    Lil,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofKind {
    GeometricTail,
    PSeriesTail,
    /// Finite family: the tail is the exact remaining mass.
    Exact,
}

/// One test `T_k` enumerated block by block, blocks numbered from 1.
pub trait TestFamily {
    fn kind(&self) -> FamilyKind;
    fn proof_kind(&self) -> ProofKind;
    fn describe(&self) -> String;
    /// `None` for infinite families.
    fn num_blocks(&self) -> Option<u64>;
    /// Shortest and longest string length in block `n`.
    fn block_lengths(&self, n: u64) -> (u64, u64);
    fn block_size(&self, n: u64) -> Result<BigUint>;
    /// `Σ 2^{-l(x)}` over block `n`, exactly.
    fn block_measure(&self, n: u64) -> Result<Rational>;
    /// Analytic upper bound on the block measure.
    fn block_bound(&self, n: u64) -> Result<Rational>;
    /// Upper bound on `Σ_{n' >= n}` of the block measures; nonincreasing in `n`.
    fn tail_bound(&self, n: u64) -> Result<Rational>;
    /// Strings of block `n` in enumeration order; fails past `limit`.
    fn enumerate_block(&self, n: u64, limit: usize) -> Result<Vec<Bits>>;
    /// Length of the block string that is a prefix of `omega`, if any.
    /// Blocks are prefix-free, so there is at most one.
    fn hit_in_block(&self, n: u64, omega: &[u8]) -> Option<usize>;
    /// Position of `x` within the enumeration of block `n`, when cheap.
    fn rank_in_block(&self, n: u64, x: &[u8]) -> Option<BigUint>;
    /// `(length, number of strings)` pairs of block `n`.
    fn length_profile(&self, n: u64) -> Result<Vec<(u64, BigUint)>> {
        let mut m: std::collections::BTreeMap<u64, BigUint> = Default::default();
        for x in self.enumerate_block(n, 1 << 22)? {
            *m.entry(x.len() as u64).or_default() += 1u32;
        }
        Ok(m.into_iter().collect())
    }
}

/// Verified rate of convergence at one `δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEntry {
    #[serde(with = "crate::rational::wire")]
    pub delta: Rational,
    /// First block whose tail is at most `delta`.
    pub block: u64,
    /// `m(δ, k)`: enumeration index of the first string of that block,
    /// when the preceding blocks are small enough to count.
    pub index: Option<String>,
    /// Every string of length at least this lies in a block `>= block`.
    pub length_floor: u64,
    #[serde(with = "crate::rational::wire")]
    pub tail: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateCertificate {
    pub proof_kind: ProofKind,
    pub entries: Vec<RateEntry>,
}

impl RateCertificate {
    /// Entries for `δ = 2^{-1}, ..., 2^{-j_max}`.
    pub fn dyadic(family: &dyn TestFamily, j_max: u32) -> Result<RateCertificate> {
        let entries = (1..=j_max as i64).map(|j| rate_entry(family, &pow2(-j))).collect::<Result<_>>()?;
        Ok(RateCertificate { proof_kind: family.proof_kind(), entries })
    }

    pub fn entry(&self, delta: &Rational) -> Option<&RateEntry> {
        self.entries.iter().find(|e| e.delta == *delta)
    }
}

/// Blocks before this many strings in total are counted for `m(δ, k)`.
const INDEX_BLOCK_LIMIT: u64 = 4096;

/// Smallest block `N` with `tail_bound(N) <= δ`, by galloping and bisection.
pub fn rate_entry(family: &dyn TestFamily, delta: &Rational) -> Result<RateEntry> {
    if *delta <= Rational::zero() {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let ok = |n: u64| -> Result<bool> { Ok(family.tail_bound(n)? <= *delta) };
    let n = if ok(1)? {
        1
    } else {
        let mut lo = 1u64;
        let mut hi = 2u64;
        while !ok(hi)? {
            lo = hi;
            hi = hi.checked_mul(2).ok_or_else(|| Error::BudgetExceeded("rate search overflow".into()))?;
            if let Some(nb) = family.num_blocks() {
                if hi > nb + 1 {
                    hi = nb + 1;
                    break;
                }
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let index = if n <= INDEX_BLOCK_LIMIT {
        (1..n).map(|b| family.block_size(b)).sum::<Result<BigUint>>().ok().map(|t| t.to_string())
    } else {
        None
    };
    let length_floor = if n == 1 { 0 } else { family.block_lengths(n - 1).1.saturating_add(1) };
    Ok(RateEntry { delta: delta.clone(), block: n, index, length_floor, tail: family.tail_bound(n)? })
}

/// Exact sum of blocks `N..N+window` plus the analytic tail after them.
pub fn verify_rate(family: &dyn TestFamily, entry: &RateEntry, window: u64) -> Result<(Rational, bool)> {
    let mut sum = Rational::zero();
    let end = match family.num_blocks() {
        Some(nb) => (entry.block + window).min(nb + 1),
        None => entry.block + window,
    };
    for n in entry.block..end {
        sum += family.block_measure(n)?;
    }
    sum += family.tail_bound(end)?;
    let holds = sum <= entry.delta;
    Ok((sum, holds))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hit {
    pub block: u64,
    pub length: usize,
    /// Enumeration index, when the preceding blocks can be counted.
    pub index: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassReport {
    pub horizon: u64,
    pub hits: Vec<Hit>,
    pub last_hit_block: Option<u64>,
}

impl PassReport {
    /// No hits in blocks after `threshold`.
    pub fn passes_beyond(&self, threshold: u64) -> bool {
        self.last_hit_block.is_none_or(|b| b <= threshold)
    }
}

/// Block strings in blocks `1..=horizon` that are prefixes of `omega`.
pub fn passes(omega: &[u8], family: &dyn TestFamily, horizon: u64) -> Result<PassReport> {
    let mut hits = Vec::new();
    let mut offset = Some(BigUint::zero());
    let last = family.num_blocks().map_or(horizon, |nb| nb.min(horizon));
    for n in 1..=last {
        if family.block_lengths(n).0 as usize > omega.len() {
            break;
        }
        if let Some(len) = family.hit_in_block(n, omega) {
            let index = match (&offset, family.rank_in_block(n, &omega[..len])) {
                (Some(o), Some(r)) => Some((o + r).to_string()),
                _ => None,
            };
            hits.push(Hit { block: n, length: len, index });
        }
        offset = match offset {
            Some(o) if n < INDEX_BLOCK_LIMIT => family.block_size(n).ok().map(|s| o + s),
            _ => None,
        };
    }
    let last_hit_block = hits.last().map(|h| h.block);
    Ok(PassReport { horizon, hits, last_hit_block })
}

/// A finite family given by its blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ListedFamily {
    pub blocks: Vec<Vec<Bits>>,
}

impl ListedFamily {
    pub fn new(blocks: Vec<Vec<Bits>>) -> Result<ListedFamily> {
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::InvalidParameter("empty block".into()));
        }
        for b in &blocks {
            if !is_prefix_free(b) {
                return Err(Error::InvalidParameter("block is not prefix-free".into()));
            }
        }
        let fam = ListedFamily { blocks };
        if fam.tail_bound(1)? > Rational::from_integer(1024.into()) {
            return Err(Error::InvalidParameter(format!("total mass {}", to_fraction(&fam.tail_bound(1)?))));
        }
        Ok(fam)
    }

    fn block(&self, n: u64) -> &[Bits] {
        &self.blocks[(n - 1) as usize]
    }
}

impl TestFamily for ListedFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Custom
    }
    fn proof_kind(&self) -> ProofKind {
        ProofKind::Exact
    }
    fn describe(&self) -> String {
        format!("listed({} blocks)", self.blocks.len())
    }
    fn num_blocks(&self) -> Option<u64> {
        Some(self.blocks.len() as u64)
    }
    fn block_lengths(&self, n: u64) -> (u64, u64) {
        let b = self.block(n);
        let lo = b.iter().map(Vec::len).min().unwrap() as u64;
        let hi = b.iter().map(Vec::len).max().unwrap() as u64;
        (lo, hi)
    }
    fn block_size(&self, n: u64) -> Result<BigUint> {
        Ok(BigUint::from(self.block(n).len()))
    }
    fn block_measure(&self, n: u64) -> Result<Rational> {
        Ok(self.block(n).iter().map(|x| pow2(-(x.len() as i64))).sum())
    }
    fn block_bound(&self, n: u64) -> Result<Rational> {
        self.block_measure(n)
    }
    fn tail_bound(&self, n: u64) -> Result<Rational> {
        let mut s = Rational::zero();
        for b in n..=self.blocks.len() as u64 {
            s += self.block_measure(b)?;
        }
        Ok(s)
    }
    fn enumerate_block(&self, n: u64, _limit: usize) -> Result<Vec<Bits>> {
        Ok(self.block(n).to_vec())
    }
    fn hit_in_block(&self, n: u64, omega: &[u8]) -> Option<usize> {
        self.block(n).iter().find(|x| omega.starts_with(x)).map(Vec::len)
    }
    fn rank_in_block(&self, n: u64, x: &[u8]) -> Option<BigUint> {
        self.block(n).iter().position(|y| y == x).map(BigUint::from)
    }
}

/// No string of `set` is a proper or improper prefix of another.
pub fn is_prefix_free(set: &[Bits]) -> bool {
    let mut sorted: Vec<&Bits> = set.iter().collect();
    sorted.sort();
    sorted.windows(2).all(|w| !w[1].starts_with(w[0]))
}

/// `Σ_x 2^{-l(x)}`.
pub fn kraft_sum<'a>(it: impl IntoIterator<Item = &'a Bits>) -> Rational {
    it.into_iter().map(|x| pow2(-(x.len() as i64))).fold(Rational::zero(), |a, b| a + b)
}

pub(crate) fn ones(x: &[u8]) -> u64 {
    x.iter().map(|&b| u64::from(b)).sum()
}

pub(crate) fn binomial(n: u64, k: u64) -> BigUint {
    crate::gadget::census::binomial(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_freeness() {
        let s = |v: &[&str]| v.iter().map(|x| bits_from_str(x).unwrap()).collect::<Vec<_>>();
        assert!(is_prefix_free(&s(&["00", "010", "011", "1"])));
        assert!(!is_prefix_free(&s(&["01", "011"])));
        assert!(!is_prefix_free(&s(&["01", "01"])));
    }

    #[test]
    fn listed_family_rate() {
        let fam = ListedFamily::new(vec![vec![vec![0, 0]], vec![vec![1, 1, 1]]]).unwrap();
        let e = rate_entry(&fam, &Rational::new(1.into(), 8.into())).unwrap();
        assert_eq!(e.block, 2);
        assert_eq!(e.index.as_deref(), Some("1"));
        let e = rate_entry(&fam, &Rational::new(1.into(), 1024.into())).unwrap();
        assert_eq!(e.block, 3);
        let r = passes(&[1, 1, 1, 0], &fam, 10).unwrap();
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].index.as_deref(), Some("1"));
    }
}
