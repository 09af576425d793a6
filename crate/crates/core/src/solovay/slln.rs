//! The strong-law test: block `n` holds every `x` of length `n` with
//! `|S_n(x)/n - 1/2| >= ε`.

use super::{binomial, ones, Bits, FamilyKind, ProofKind, TestFamily};
use crate::certified::{exp, ln, DEFAULT_BITS};
use crate::error::{Error, Result};
use crate::rational::{from_biguint, pow2, to_fraction, Rational};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq)]
pub struct SllnFamily {
    pub eps: Rational,
}

/// One test per `ε_k`; the sequence must be positive and nonincreasing.
pub fn slln_family(epsilons: &[Rational]) -> Result<Vec<SllnFamily>> {
    if epsilons.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("epsilons must be nonincreasing".into()));
    }
    epsilons.iter().map(|e| SllnFamily::new(e.clone())).collect()
}

impl SllnFamily {
    pub fn new(eps: Rational) -> Result<SllnFamily> {
        if eps <= Rational::zero() {
            return Err(Error::InvalidParameter(format!("epsilon {} must be positive", to_fraction(&eps))));
        }
        Ok(SllnFamily { eps })
    }

    /// `|2s - n| >= 2εn`.
    pub fn is_bad(&self, n: u64, s: u64) -> bool {
        let d = Rational::from_integer((2 * s as i64 - n as i64).abs().into());
        d >= Rational::from_integer(2.into()) * &self.eps * Rational::from_integer(n.into())
    }

    fn bad_counts(&self, n: u64) -> Vec<u64> {
        (0..=n).filter(|&s| self.is_bad(n, s)).collect()
    }

    fn two_eps2(&self) -> Rational {
        Rational::from_integer(2.into()) * &self.eps * &self.eps
    }

    /// `⌈ln(2 / (δ (1 - e^{-2ε²}))) / (2ε²)⌉`, from certified bounds.
    pub fn closed_form_block(&self, delta: &Rational) -> u64 {
        let q = exp(&-self.two_eps2(), DEFAULT_BITS);
        let denom_lo = delta * (Rational::one() - &q.hi);
        let l = ln(&(Rational::from_integer(2.into()) / denom_lo), DEFAULT_BITS);
        let n = (&l.hi / self.two_eps2()).ceil();
        n.to_integer().to_u64().unwrap_or(u64::MAX).max(1)
    }
}

impl TestFamily for SllnFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Slln
    }
    fn proof_kind(&self) -> ProofKind {
        ProofKind::GeometricTail
    }
    fn describe(&self) -> String {
        format!("slln(eps={})", to_fraction(&self.eps))
    }
    fn num_blocks(&self) -> Option<u64> {
        None
    }
    fn block_lengths(&self, n: u64) -> (u64, u64) {
        (n, n)
    }
    fn block_size(&self, n: u64) -> Result<BigUint> {
        Ok(self.bad_counts(n).into_iter().map(|s| binomial(n, s)).sum())
    }
    fn block_measure(&self, n: u64) -> Result<Rational> {
        Ok(from_biguint(&self.block_size(n)?) * pow2(-(n as i64)))
    }
    /// `2 e^{-2nε²}`.
    fn block_bound(&self, n: u64) -> Result<Rational> {
        let e = exp(&-(self.two_eps2() * Rational::from_integer(n.into())), DEFAULT_BITS);
        Ok(e.hi * Rational::from_integer(2.into()))
    }
    /// `2 e^{-2Nε²} / (1 - e^{-2ε²})`.
    fn tail_bound(&self, n: u64) -> Result<Rational> {
        let q = exp(&-self.two_eps2(), DEFAULT_BITS);
        Ok(self.block_bound(n)? / (Rational::one() - q.hi))
    }
    fn enumerate_block(&self, n: u64, limit: usize) -> Result<Vec<Bits>> {
        if self.block_size(n)? > BigUint::from(limit) || n > 40 {
            return Err(Error::EnumerationBudget(format!("block {n} exceeds {limit} strings")));
        }
        let bad = self.bad_counts(n);
        let mut out = Vec::new();
        for v in 0u64..(1u64 << n) {
            if bad.contains(&(v.count_ones() as u64)) {
                out.push((0..n).rev().map(|i| ((v >> i) & 1) as u8).collect());
            }
        }
        Ok(out)
    }
    fn length_profile(&self, n: u64) -> Result<Vec<(u64, BigUint)>> {
        Ok(vec![(n, self.block_size(n)?)])
    }
    fn hit_in_block(&self, n: u64, omega: &[u8]) -> Option<usize> {
        let n_us = n as usize;
        (omega.len() >= n_us && self.is_bad(n, ones(&omega[..n_us]))).then_some(n_us)
    }
    /// Counts block strings below `x` in lexicographic order.
    fn rank_in_block(&self, n: u64, x: &[u8]) -> Option<BigUint> {
        if x.len() as u64 != n {
            return None;
        }
        let bad = self.bad_counts(n);
        let mut rank = BigUint::zero();
        let mut seen = 0u64;
        for (i, &b) in x.iter().enumerate() {
            if b == 1 {
                let rest = n - i as u64 - 1;
                for &s in &bad {
                    if s >= seen && s - seen <= rest {
                        rank += binomial(rest, s - seen);
                    }
                }
                seen += 1;
            }
        }
        Some(rank)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{passes, rate_entry, verify_rate};
    use super::*;
    use crate::rational::rat;

    #[test]
    fn half_epsilon_blocks() {
        let f = SllnFamily::new(rat(1, 2)).unwrap();
        assert_eq!(f.enumerate_block(10, 100).unwrap(), vec![vec![0; 10], vec![1; 10]]);
        assert_eq!(f.block_measure(10).unwrap(), rat(1, 512));
        assert_eq!(f.block_measure(1).unwrap(), Rational::one());
        assert!(f.block_bound(1).unwrap() > Rational::one());
    }

    #[test]
    fn ranks_match_enumeration() {
        let f = SllnFamily::new(rat(1, 4)).unwrap();
        for n in 1..=12 {
            for (i, x) in f.enumerate_block(n, 1 << 12).unwrap().iter().enumerate() {
                assert_eq!(f.rank_in_block(n, x), Some(BigUint::from(i)));
            }
        }
    }

    #[test]
    fn balanced_and_unbalanced_prefixes() {
        let f = SllnFamily::new(rat(1, 4)).unwrap();
        let alt: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
        let r = passes(&alt, &f, 64).unwrap();
        assert_eq!(r.hits.iter().map(|h| h.block).collect::<Vec<_>>(), vec![1]);
        let r = passes(&[1; 64], &f, 64).unwrap();
        assert_eq!(r.hits.len(), 64);
    }

    #[test]
    fn certificates() {
        let f = SllnFamily::new(rat(1, 4)).unwrap();
        for j in 1..=10 {
            let d = pow2(-j);
            let e = rate_entry(&f, &d).unwrap();
            assert!(f.closed_form_block(&d) >= e.block);
            assert!(verify_rate(&f, &e, 20).unwrap().1);
        }
    }
}
