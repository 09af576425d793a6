//! Supermartingales over a base measure and the bounded-increase selection.

use super::{Bernoulli, Measure, Uniform};
use crate::error::{Error, Result};
use crate::rational::{rat, to_fraction, Rational};
use crate::solovay::{bits_to_string, Bits};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::collections::HashMap;

pub trait Supermartingale {
    fn value(&self, x: &[u8]) -> Rational;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantMartingale(pub Rational);

impl Supermartingale for ConstantMartingale {
    fn value(&self, _: &[u8]) -> Rational {
        self.0.clone()
    }
}

pub struct FnMartingale<F: Fn(&[u8]) -> Rational>(pub F);

impl<F: Fn(&[u8]) -> Rational> Supermartingale for FnMartingale<F> {
    fn value(&self, x: &[u8]) -> Rational {
        (self.0)(x)
    }
}

/// Explicit values with a fallback for strings not listed.
#[derive(Clone, Debug, PartialEq)]
pub struct TableMartingale {
    pub values: HashMap<Bits, Rational>,
    pub default: Rational,
}

impl TableMartingale {
    pub fn new(default: Rational) -> Self {
        TableMartingale { values: HashMap::new(), default }
    }

    pub fn set(&mut self, x: &[u8], v: Rational) {
        self.values.insert(x.to_vec(), v);
    }
}

impl Supermartingale for TableMartingale {
    fn value(&self, x: &[u8]) -> Rational {
        self.values.get(x).cloned().unwrap_or_else(|| self.default.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupermartingaleReport {
    pub depth: usize,
    pub nodes_checked: u64,
    pub root_ok: bool,
    /// Nodes `x` with `M(x) < M(x0)P(0|x) + M(x1)P(1|x)` or a negative value.
    pub violations: Vec<Bits>,
}

impl SupermartingaleReport {
    pub fn is_valid(&self) -> bool {
        self.root_ok && self.violations.is_empty()
    }
}

/// Checks every node of length `< depth` exactly. Nodes with `P(x) = 0`
/// are skipped.
pub fn supermartingale_check(m: &dyn Supermartingale, p: &dyn Measure, depth: usize) -> Result<SupermartingaleReport> {
    let root_ok = m.value(&[]) <= Rational::one();
    let mut violations = Vec::new();
    let mut nodes_checked = 0u64;
    let mut stack: Vec<Bits> = vec![Vec::new()];
    while let Some(x) = stack.pop() {
        if x.len() >= depth {
            continue;
        }
        let (Some(p0), Some(p1)) = (p.conditional(&x, 0)?, p.conditional(&x, 1)?) else {
            continue;
        };
        nodes_checked += 1;
        let mut x0 = x.clone();
        x0.push(0);
        let mut x1 = x.clone();
        x1.push(1);
        let mx = m.value(&x);
        let (m0, m1) = (m.value(&x0), m.value(&x1));
        if mx.is_negative() || m0.is_negative() || m1.is_negative() || mx < m0 * p0 + m1 * p1 {
            violations.push(x.clone());
        }
        stack.push(x1);
        stack.push(x0);
    }
    violations.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(SupermartingaleReport { depth, nodes_checked, root_ok, violations })
}

/// Keeps the strings of `a` that have no proper prefix in `a`.
pub fn minimal_elements(a: &[Bits]) -> Vec<Bits> {
    let mut v = a.to_vec();
    v.sort();
    v.dedup();
    let mut out: Vec<Bits> = Vec::new();
    for y in v {
        // Sorted order puts a prefix immediately before its extensions.
        if out.last().is_some_and(|p| y.starts_with(p)) {
            continue;
        }
        out.push(y);
    }
    out
}

fn cover_measure(p: &dyn Measure, a: &[Bits]) -> Result<Rational> {
    let mut t = Rational::zero();
    for y in minimal_elements(a) {
        t += p.prob(&y)?;
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub selected: Vec<Bits>,
    /// `A_1`: strings whose path from `x` crosses the threshold.
    pub removed: Vec<Bits>,
    /// First crossing prefix of each removed string, minimal elements only.
    pub witnesses: Vec<Bits>,
    /// `M(x) / ((1 - μ) P(Ã | x))`.
    pub threshold: Rational,
    pub measure_all: Rational,
    pub measure_selected: Rational,
    pub measure_witnesses: Rational,
    /// Largest `M(y^j)` over selected `y` and `l(x) <= j <= l(y)`.
    pub max_value: Rational,
    /// `P(Ã') > μ P(Ã)`.
    pub measure_holds: bool,
    /// `max_value <= threshold`, the exponentiated log bound.
    pub log_holds: bool,
}

/// Splits `a` at the threshold `M(x) / ((1 - μ) P(Ã | x))`.
pub fn bounded_increase_select(
    m: &dyn Supermartingale,
    p: &dyn Measure,
    x: &[u8],
    a: &[Bits],
    mu: &Rational,
) -> Result<Selection> {
    if !mu.is_positive() || *mu >= Rational::one() {
        return Err(Error::InvalidSelection(format!("mu = {} outside (0,1)", to_fraction(mu))));
    }
    if a.is_empty() {
        return Err(Error::InvalidSelection("empty set".into()));
    }
    if let Some(y) = a.iter().find(|y| !y.starts_with(x)) {
        return Err(Error::InvalidSelection(format!("{} does not extend {}", bits_to_string(y), bits_to_string(x))));
    }
    let px = p.prob(x)?;
    let measure_all = cover_measure(p, a)?;
    if !px.is_positive() || !measure_all.is_positive() {
        return Err(Error::InvalidSelection("zero measure".into()));
    }
    let cond = &measure_all / &px;
    let threshold = m.value(x) / ((Rational::one() - mu) * cond);

    let mut selected = Vec::new();
    let mut removed = Vec::new();
    let mut witnesses = Vec::new();
    let mut max_value = Rational::zero();
    for y in a {
        let mut crossing = None;
        let mut path_max = Rational::zero();
        for j in x.len()..=y.len() {
            let v = m.value(&y[..j]);
            if v > threshold {
                crossing = Some(j);
                break;
            }
            if v > path_max {
                path_max = v;
            }
        }
        match crossing {
            Some(j) => {
                removed.push(y.clone());
                witnesses.push(y[..j].to_vec());
            }
            None => {
                selected.push(y.clone());
                if path_max > max_value {
                    max_value = path_max;
                }
            }
        }
    }
    let witnesses = minimal_elements(&witnesses);
    let measure_selected = cover_measure(p, &selected)?;
    let measure_witnesses = cover_measure(p, &witnesses)?;
    Ok(Selection {
        measure_holds: measure_selected > mu * &measure_all,
        log_holds: max_value <= threshold,
        selected,
        removed,
        witnesses,
        threshold,
        measure_all,
        measure_selected,
        measure_witnesses,
        max_value,
    })
}

/// A supermartingale on strings of length `<= depth` obtained by betting:
/// each node splits a random fraction of its current value between its
/// children, so the inequality holds with the retained fraction as slack.
pub fn random_supermartingale<R: Rng>(p: &dyn Measure, depth: usize, rng: &mut R) -> Result<TableMartingale> {
    let mut t = TableMartingale::new(Rational::zero());
    let root = rat(rng.gen_range(1..=8), 8);
    t.set(&[], root);
    let mut frontier: Vec<Bits> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for x in frontier {
            let mx = t.value(&x);
            let keep = rat(rng.gen_range(4..=8), 8);
            let q = rat(rng.gen_range(0..=8), 8);
            let shares = [q.clone(), Rational::one() - q];
            for b in 0..2u8 {
                let mut xb = x.clone();
                xb.push(b);
                let v = match p.conditional(&x, b)? {
                    Some(c) if c.is_positive() => &mx * &keep * &shares[b as usize] / c,
                    _ => Rational::zero(),
                };
                t.set(&xb, v);
                next.push(xb);
            }
        }
        frontier = next;
    }
    Ok(t)
}

/// Base measure used by a generated instance.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceMeasure {
    Uniform,
    Bernoulli(Bernoulli),
}

impl Measure for InstanceMeasure {
    fn prob(&self, x: &[u8]) -> Result<Rational> {
        match self {
            InstanceMeasure::Uniform => Uniform.prob(x),
            InstanceMeasure::Bernoulli(b) => b.prob(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelectionInstance {
    pub measure: InstanceMeasure,
    pub martingale: TableMartingale,
    pub x: Bits,
    pub a: Vec<Bits>,
    pub mu: Rational,
}

/// A random instance on the tree of depth `depth`.
pub fn random_selection_instance<R: Rng>(rng: &mut R, depth: usize) -> Result<SelectionInstance> {
    let measure = if rng.gen_bool(0.5) {
        InstanceMeasure::Uniform
    } else {
        InstanceMeasure::Bernoulli(Bernoulli::new(rat(rng.gen_range(1..8), 8))?)
    };
    let martingale = random_supermartingale(&measure, depth, rng)?;
    let xl = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..=depth.min(3)) };
    let x: Bits = (0..xl).map(|_| rng.gen_range(0..2)).collect();
    let size = rng.gen_range(1..=12);
    let a = (0..size)
        .map(|_| {
            let l = rng.gen_range(xl..=depth);
            let mut y = x.clone();
            y.extend((xl..l).map(|_| rng.gen_range(0..2u8)));
            y
        })
        .collect();
    let mu = rat(rng.gen_range(1..16), 16);
    Ok(SelectionInstance { measure, martingale, x, a, mu })
}

impl SelectionInstance {
    pub fn select(&self) -> Result<Selection> {
        bounded_increase_select(&self.martingale, &self.measure, &self.x, &self.a, &self.mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, pow2};
    use crate::solovay::bits_from_str;
    use rand::SeedableRng;

    fn b(s: &str) -> Bits {
        bits_from_str(s).unwrap()
    }

    #[test]
    fn trivial_martingales() {
        let one = ConstantMartingale(Rational::one());
        assert!(supermartingale_check(&one, &Uniform, 6).unwrap().is_valid());
        let biased = Bernoulli::new(rat(1, 5)).unwrap();
        assert!(supermartingale_check(&one, &biased, 6).unwrap().is_valid());
        let ratio = FnMartingale(|x: &[u8]| pow2(x.len() as i64) * pow2(-(x.len() as i64)));
        let rep = supermartingale_check(&ratio, &Uniform, 6).unwrap();
        assert!(rep.is_valid());
        assert_eq!(rep.nodes_checked, 63);
    }

    #[test]
    fn planted_violation() {
        let mut t = TableMartingale::new(Rational::one());
        t.set(&b("010"), rat(1, 2));
        let rep = supermartingale_check(&t, &Uniform, 5).unwrap();
        assert_eq!(rep.violations, vec![b("010")]);
        let mut t = TableMartingale::new(Rational::one());
        t.set(&[], int(2));
        assert!(!supermartingale_check(&t, &Uniform, 2).unwrap().root_ok);
    }

    #[test]
    fn constant_keeps_everything() {
        let a = vec![b("00"), b("011")];
        let s = bounded_increase_select(&ConstantMartingale(Rational::one()), &Uniform, &[], &a, &rat(1, 2)).unwrap();
        assert!(s.threshold > Rational::one());
        assert_eq!(s.selected, a);
        assert!(s.removed.is_empty() && s.measure_holds && s.log_holds);
    }

    #[test]
    fn spike_branch_removed() {
        // Bet everything on 1 after the first bit: M(1) = 2, M(11) = 4.
        let mut t = TableMartingale::new(Rational::zero());
        t.set(&[], Rational::one());
        t.set(&b("0"), Rational::zero());
        t.set(&b("1"), int(2));
        t.set(&b("10"), Rational::zero());
        t.set(&b("11"), int(4));
        t.set(&b("00"), Rational::zero());
        t.set(&b("01"), Rational::zero());
        assert!(supermartingale_check(&t, &Uniform, 2).unwrap().is_valid());
        let a = vec![b("00"), b("11")];
        let s = bounded_increase_select(&t, &Uniform, &[], &a, &rat(1, 3)).unwrap();
        // P(Ã) = 1/2, threshold = 1 / ((2/3)(1/2)) = 3.
        assert_eq!(s.threshold, int(3));
        assert_eq!(s.selected, vec![b("00")]);
        assert_eq!(s.witnesses, vec![b("11")]);
        assert_eq!(s.measure_selected, rat(1, 4));
        assert!(s.measure_selected > rat(1, 6));
        assert!(s.measure_holds && s.log_holds);
    }

    #[test]
    fn errors() {
        let one = ConstantMartingale(Rational::one());
        assert!(matches!(
            bounded_increase_select(&one, &Uniform, &[], &[], &rat(1, 2)),
            Err(Error::InvalidSelection(_))
        ));
        assert!(matches!(
            bounded_increase_select(&one, &Uniform, &b("0"), &[b("1")], &rat(1, 2)),
            Err(Error::InvalidSelection(_))
        ));
        let zero = Bernoulli::new(Rational::zero()).unwrap();
        assert!(matches!(
            bounded_increase_select(&one, &zero, &[], &[b("1")], &rat(1, 2)),
            Err(Error::InvalidSelection(_))
        ));
    }

    #[test]
    fn random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let inst = random_selection_instance(&mut rng, 8).unwrap();
            assert!(supermartingale_check(&inst.martingale, &inst.measure, 8).unwrap().is_valid());
            let s = inst.select().unwrap();
            assert!(s.measure_holds && s.log_holds);
            assert!(s.measure_witnesses <= (Rational::one() - &inst.mu) * &s.measure_all);
        }
    }
}
