//! Column censuses and the well-distribution defect of an `M`-fold power.
//!
//! A census groups the columns of a gadget by `(relative width, height)`,
//! which is all the defect of `G^{*(M)}` against `G` depends on. With the
//! census, defects become sums over compositions or, when every column has
//! the same height, a sum of binomial mean absolute deviations.

use super::explicit::Gadget;
use crate::certified::{Dir, DirFloat, Enclosure};
use crate::error::{Error, Result};
use crate::rational::{from_biguint, Rational};
use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;

/// Columns sharing a relative width (`w(E) / w(G)`) and height.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CensusClass {
    pub weight: Rational,
    pub height: u128,
    pub multiplicity: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Census {
    pub classes: Vec<CensusClass>,
}

impl Census {
    fn from_map(map: HashMap<(Rational, u128), BigUint>) -> Census {
        let mut classes: Vec<CensusClass> = map
            .into_iter()
            .map(|((weight, height), multiplicity)| CensusClass { weight, height, multiplicity })
            .collect();
        classes.sort_by(|a, b| (a.height, &a.weight).cmp(&(b.height, &b.weight)));
        Census { classes }
    }

    pub fn of_gadget(g: &Gadget) -> Census {
        let w = g.width();
        let mut map: HashMap<(Rational, u128), BigUint> = HashMap::new();
        for c in &g.columns {
            *map.entry((c.width() / &w, c.height() as u128)).or_default() += 1u32;
        }
        Census::from_map(map)
    }

    /// Census of a disjoint union; `shares[i]` is `w(part_i) / w(union)`.
    pub fn union(parts: &[(&Census, Rational)]) -> Census {
        let mut map: HashMap<(Rational, u128), BigUint> = HashMap::new();
        for (c, share) in parts {
            for k in &c.classes {
                *map.entry((&k.weight * share, k.height)).or_default() += &k.multiplicity;
            }
        }
        Census::from_map(map)
    }

    /// Census of `G^{*(m)}` from the census of `G`.
    ///
    /// Enumerates compositions of `m` over the classes; fails with
    /// `BudgetExceeded` once more than `budget` compositions or classes
    /// would be needed.
    pub fn power(&self, m: u64, budget: usize) -> Result<Census> {
        let n = self.classes.len();
        let est = binomial_f64(m + n as u64 - 1, n as u64 - 1);
        if est > budget as f64 {
            return Err(Error::BudgetExceeded(format!(
                "census of a {m}-fold power over {n} classes needs about {est:e} compositions"
            )));
        }
        let mut map: HashMap<(Rational, u128), BigUint> = HashMap::new();
        let mut comp = vec![0u64; n];
        compositions(m, n, &mut comp, 0, &mut |c| {
            let mut weight = Rational::one();
            let mut height = 0u128;
            let mut mult = multinomial(m, c);
            for (k, &cnt) in self.classes.iter().zip(c.iter()) {
                if cnt > 0 {
                    weight *= num_traits::pow(k.weight.clone(), cnt as usize);
                    height += k.height * cnt as u128;
                    mult *= num_traits::pow(k.multiplicity.clone(), cnt as usize);
                }
            }
            *map.entry((weight, height)).or_default() += mult;
        });
        Ok(Census::from_map(map))
    }

    pub fn total_columns(&self) -> BigUint {
        self.classes.iter().map(|c| c.multiplicity.clone()).sum()
    }

    pub fn uniform_height(&self) -> Option<u128> {
        let h = self.classes.first()?.height;
        self.classes.iter().all(|c| c.height == h).then_some(h)
    }

    /// Sum of `multiplicity * weight`; equals 1 for a valid census.
    pub fn total_weight(&self) -> Rational {
        self.classes.iter().map(|c| &c.weight * from_biguint(&c.multiplicity)).sum()
    }
}

pub(crate) fn compositions(m: u64, n: usize, comp: &mut Vec<u64>, i: usize, f: &mut dyn FnMut(&[u64])) {
    if i + 1 == n {
        comp[i] = m;
        f(comp);
        return;
    }
    for c in (0..=m).rev() {
        comp[i] = c;
        compositions(m - c, n, comp, i + 1, f);
    }
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub(crate) fn binomial_f64(n: u64, k: u64) -> f64 {
    let k = k.min(n.saturating_sub(k));
    let mut acc = 1f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

pub fn multinomial(m: u64, parts: &[u64]) -> BigUint {
    let mut acc = BigUint::one();
    let mut left = m;
    for &p in parts {
        acc *= binomial(left, p);
        left -= p;
    }
    acc
}

/// Above this many factors the binomial route switches from exact
/// rationals to a directed-rounding enclosure.
pub const EXACT_POWER_LIMIT: u64 = 64;
/// Largest census evaluated in exact arithmetic.
pub const EXACT_CLASS_LIMIT: usize = 256;

/// Defect of `G^{*(m)}` against `G` when all columns of `G` have the same
/// height. `support` is `lambda(G-hat)`.
///
/// Each class contributes `multiplicity * E|X/m - support * p|` with
/// `X ~ Bin(m, p)`; the total is scaled by `support`.
pub fn power_defect_uniform(census: &Census, support: &Rational, m: u64) -> Result<Enclosure> {
    if census.uniform_height().is_none() {
        return Err(Error::CannotEvaluate("columns have different heights".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m = 0".into()));
    }
    if m <= EXACT_POWER_LIMIT && census.classes.len() <= EXACT_CLASS_LIMIT {
        let mut total = Rational::zero();
        for k in &census.classes {
            total += binomial_mad_exact(&k.weight, &(support * &k.weight), m) * from_biguint(&k.multiplicity);
        }
        return Ok(Enclosure::exact(total * support));
    }
    let mut lo = DirFloat::ZERO;
    let mut hi = DirFloat::ZERO;
    for k in &census.classes {
        let c = support * &k.weight;
        let (l, h) = binomial_mad_bounds(&k.weight, &c, m);
        lo = lo.add(&l.mul(&DirFloat::from_biguint(&k.multiplicity, Dir::Down), Dir::Down), Dir::Down);
        hi = hi.add(&h.mul(&DirFloat::from_biguint(&k.multiplicity, Dir::Up), Dir::Up), Dir::Up);
    }
    let s_lo = DirFloat::from_rational(support, Dir::Down);
    let s_hi = DirFloat::from_rational(support, Dir::Up);
    Ok(Enclosure::new(lo.mul(&s_lo, Dir::Down).to_rational(), hi.mul(&s_hi, Dir::Up).to_rational()))
}

/// `E|X/m - c|` for `X ~ Bin(m, p)`, exactly.
pub fn binomial_mad_exact(p: &Rational, c: &Rational, m: u64) -> Rational {
    let q = Rational::one() - p;
    let mr = Rational::from_integer(m.into());
    let mut total = p - c;
    let cm = c * &mr;
    let mut x = 0u64;
    let mut pmf = num_traits::pow(q.clone(), m as usize);
    let ratio = if q.is_zero() { None } else { Some(p / &q) };
    while Rational::from_integer(x.into()) < cm && x <= m {
        let gap = c - Rational::from_integer(x.into()) / &mr;
        total += Rational::from_integer(2.into()) * &pmf * gap;
        match &ratio {
            Some(r) => pmf = pmf * Rational::from_integer((m - x).into()) / Rational::from_integer((x + 1).into()) * r,
            None => pmf = if x + 1 == m { Rational::one() } else { Rational::zero() },
        }
        x += 1;
    }
    total
}

/// Certified lower and upper bounds for `E|X/m - c|`, `0 <= c`.
pub fn binomial_mad_bounds(p: &Rational, c: &Rational, m: u64) -> (DirFloat, DirFloat) {
    let q = Rational::one() - p;
    let mr = Rational::from_integer(m.into());
    if c > p {
        // The identity below needs p - c >= 0; off that range use the exact sum.
        let e = binomial_mad_exact(p, c, m);
        return (DirFloat::from_rational(&e, Dir::Down), DirFloat::from_rational(&e, Dir::Up));
    }
    let base = p - c;
    let mut lo = DirFloat::from_rational(&base, Dir::Down);
    let mut hi = DirFloat::from_rational(&base, Dir::Up);
    if q.is_zero() {
        return (lo, hi);
    }
    let ratio = p / &q;
    let r_lo = DirFloat::from_rational(&ratio, Dir::Down);
    let r_hi = DirFloat::from_rational(&ratio, Dir::Up);
    let mut pmf_lo = DirFloat::from_rational(&q, Dir::Down).powu(m, Dir::Down);
    let mut pmf_hi = DirFloat::from_rational(&q, Dir::Up).powu(m, Dir::Up);
    let cm = c * &mr;
    let kmax = cm.ceil().to_integer().to_u64().unwrap_or(m).min(m + 1);
    for x in 0..kmax {
        let xr = Rational::from_integer(x.into());
        if xr >= cm {
            break;
        }
        let gap = c - xr / &mr;
        let g_lo = DirFloat::from_rational(&gap, Dir::Down).mul_u64(2, Dir::Down);
        let g_hi = DirFloat::from_rational(&gap, Dir::Up).mul_u64(2, Dir::Up);
        lo = lo.add(&pmf_lo.mul(&g_lo, Dir::Down), Dir::Down);
        hi = hi.add(&pmf_hi.mul(&g_hi, Dir::Up), Dir::Up);
        if x < m {
            pmf_lo = pmf_lo.mul_u64(m - x, Dir::Down).div_u64(x + 1, Dir::Down).mul(&r_lo, Dir::Down);
            pmf_hi = pmf_hi.mul_u64(m - x, Dir::Up).div_u64(x + 1, Dir::Up).mul(&r_hi, Dir::Up);
        }
    }
    (lo, hi)
}

/// Exact defect of `G^{*(m)}` against `G` for arbitrary heights, summing
/// over compositions of `m` over the columns of `G`.
///
/// `weights[i] = w(E_i) / w(G)`, `heights[i] = h(E_i)`, `width = w(G)`.
pub fn power_defect_compositions(
    weights: &[Rational],
    heights: &[u128],
    width: &Rational,
    m: u64,
    budget: usize,
) -> Result<Rational> {
    let n = weights.len();
    if n == 0 || n != heights.len() {
        return Err(Error::InvalidParameter("weights and heights must be non-empty and aligned".into()));
    }
    let est = binomial_f64(m + n as u64 - 1, n as u64 - 1);
    if est > budget as f64 {
        return Err(Error::BudgetExceeded(format!("{est:e} compositions")));
    }
    let mr = Rational::from_integer(m.into());
    let d_measure: Vec<Rational> = weights
        .iter()
        .zip(heights)
        .map(|(p, &h)| width * p * Rational::from_integer(h.into()))
        .collect();
    let mut total = Rational::zero();
    let mut comp = vec![0u64; n];
    compositions(m, n, &mut comp, 0, &mut |c| {
        let mut prod = Rational::one();
        let mut big_h = 0u128;
        for i in 0..n {
            if c[i] > 0 {
                prod *= num_traits::pow(weights[i].clone(), c[i] as usize);
                big_h += heights[i] * c[i] as u128;
            }
        }
        let count = from_biguint(&multinomial(m, c));
        let w_e = width / &mr * &prod;
        let hr = Rational::from_integer(big_h.into());
        let mut inner = Rational::zero();
        for i in 0..n {
            let inter = Rational::from_integer((c[i] as u128 * heights[i]).into());
            inner += (inter - &d_measure[i] * &hr).abs();
        }
        total += w_e * inner * count;
    });
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        assert_eq!(multinomial(4, &[2, 1, 1]), BigUint::from(12u32));
        let mut n = 0;
        compositions(3, 3, &mut vec![0; 3], 0, &mut |_| n += 1);
        assert_eq!(n, 10);
    }

    // Direct expectation over all outcomes.
    fn mad_oracle(p: &Rational, c: &Rational, m: u64) -> Rational {
        let q = Rational::one() - p;
        (0..=m)
            .map(|x| {
                let pmf = from_biguint(&binomial(m, x))
                    * num_traits::pow(p.clone(), x as usize)
                    * num_traits::pow(q.clone(), (m - x) as usize);
                pmf * (Rational::from_integer(x.into()) / Rational::from_integer(m.into()) - c).abs()
            })
            .sum()
    }

    #[test]
    fn mad_identity_matches_oracle() {
        for (p, c, m) in [(rat(1, 3), rat(1, 4), 7), (rat(1, 2), rat(1, 2), 10), (rat(2, 5), rat(1, 10), 13)] {
            assert_eq!(binomial_mad_exact(&p, &c, m), mad_oracle(&p, &c, m));
            let (lo, hi) = binomial_mad_bounds(&p, &c, m);
            let e = mad_oracle(&p, &c, m);
            assert!(lo.to_rational() <= e && e <= hi.to_rational());
        }
        assert_eq!(binomial_mad_exact(&rat(1, 1), &rat(1, 2), 5), rat(1, 2));
    }

    #[test]
    fn mad_bounds_tight_at_large_m() {
        let p = rat(1, 3);
        let c = rat(1, 4);
        let (lo, hi) = binomial_mad_bounds(&p, &c, 5000);
        let w = crate::rational::to_f64(&(hi.to_rational() - lo.to_rational()));
        assert!(w < 1e-12, "{w}");
        assert!(lo.to_f64() > 0.08 && hi.to_f64() < 0.09);
    }
}
