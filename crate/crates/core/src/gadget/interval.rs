use crate::error::{Error, Result};
use crate::rational::{to_fraction, wire, Rational};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Half-open interval `[left, right)` with `left < right`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "wire")]
    pub left: Rational,
    #[serde(with = "wire")]
    pub right: Rational,
}

impl Interval {
    pub fn new(left: Rational, right: Rational) -> Result<Self> {
        if left >= right {
            return Err(Error::InvalidParameter(format!(
                "empty interval [{}, {})",
                to_fraction(&left),
                to_fraction(&right)
            )));
        }
        Ok(Interval { left, right })
    }

    pub(crate) fn new_unchecked(left: Rational, right: Rational) -> Self {
        debug_assert!(left < right);
        Interval { left, right }
    }

    pub fn unit() -> Self {
        Interval { left: Rational::zero(), right: Rational::one() }
    }

    pub fn width(&self) -> Rational {
        &self.right - &self.left
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.left <= *x && *x < self.right
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.left <= o.left && o.right <= self.right
    }

    pub fn overlaps(&self, o: &Interval) -> bool {
        self.left < o.right && o.left < self.right
    }

    /// Sub-interval occupying the relative band `[lo, hi)` of `self`.
    pub fn band(&self, lo: &Rational, hi: &Rational) -> Interval {
        let w = self.width();
        Interval::new_unchecked(&self.left + lo * &w, &self.left + hi * &w)
    }

    /// Splits into `n` equal consecutive pieces, left to right.
    pub fn split_equal(&self, n: u64) -> Vec<Interval> {
        let w = self.width() / Rational::from_integer(n.into());
        (0..n)
            .map(|i| {
                let l = &self.left + &w * Rational::from_integer(i.into());
                let r = &l + &w;
                Interval::new_unchecked(l, r)
            })
            .collect()
    }

    pub fn translate(&self, d: &Rational) -> Interval {
        Interval::new_unchecked(&self.left + d, &self.right + d)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", to_fraction(&self.left), to_fraction(&self.right))
    }
}

/// Checks that the intervals are pairwise disjoint. Sorts a copy.
pub fn pairwise_disjoint<'a>(it: impl IntoIterator<Item = &'a Interval>) -> bool {
    let mut v: Vec<&Interval> = it.into_iter().collect();
    v.sort_by(|a, b| a.left.cmp(&b.left));
    v.windows(2).all(|w| w[0].right <= w[1].left)
}

/// Merges the intervals into a canonical sorted list of maximal runs.
pub fn normalize_union<'a>(it: impl IntoIterator<Item = &'a Interval>) -> Vec<Interval> {
    let mut v: Vec<Interval> = it.into_iter().cloned().collect();
    v.sort_by(|a, b| a.left.cmp(&b.left));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.left <= last.right => {
                if iv.right > last.right {
                    last.right = iv.right;
                }
            }
            _ => out.push(iv),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn band_and_split() {
        let i = Interval::new(rat(1, 4), rat(3, 4)).unwrap();
        assert_eq!(i.band(&rat(1, 2), &rat(1, 1)), Interval::new(rat(1, 2), rat(3, 4)).unwrap());
        let parts = i.split_equal(4);
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[3].right, rat(3, 4));
        assert_eq!(parts[1].width(), rat(1, 8));
        assert!(Interval::new(rat(1, 2), rat(1, 2)).is_err());
    }

    #[test]
    fn union_normalizes() {
        let a = Interval::new(rat(0, 1), rat(1, 4)).unwrap();
        let b = Interval::new(rat(1, 4), rat(1, 2)).unwrap();
        let c = Interval::new(rat(3, 4), rat(1, 1)).unwrap();
        let u = normalize_union([&c, &a, &b]);
        assert_eq!(u, vec![Interval::new(rat(0, 1), rat(1, 2)).unwrap(), c.clone()]);
        assert!(pairwise_disjoint([&a, &b, &c]));
        assert!(!pairwise_disjoint([&a, &Interval::new(rat(1, 8), rat(1, 2)).unwrap()]));
    }
}
