//! Symbolic dynamics of a gadget: the map `T`, partition names of
//! trajectories, cylinder measures and Birkhoff averages of `χ_{π_1}`.

use crate::certified::{log2, Enclosure, DEFAULT_BITS};
use crate::error::{Error, Result};
use crate::gadget::{interval::normalize_union, Column, ColumnAddr, Gadget, GadgetTree, Interval, Node, Step};
use crate::rational::{rat, to_fraction, Rational};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Two-set partition of `[0, 1)`; `pi1` carries symbol 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    pub pi1: Vec<Interval>,
    pub pi0: Vec<Interval>,
    pub r: Rational,
}

impl PartitionSpec {
    /// `π_1 = [1/2, 1/2 + r)`.
    pub fn standard(r: &Rational) -> Result<PartitionSpec> {
        let half = rat(1, 2);
        PartitionSpec::new(vec![Interval::new(half.clone(), half + r)?])
    }

    pub fn new(pi1: Vec<Interval>) -> Result<PartitionSpec> {
        let unit = Interval::unit();
        if pi1.iter().any(|iv| !unit.contains_interval(iv)) {
            return Err(Error::InvalidParameter("partition piece outside [0, 1)".into()));
        }
        if !crate::gadget::interval::pairwise_disjoint(&pi1) {
            return Err(Error::InvalidParameter("partition pieces overlap".into()));
        }
        let pi1 = normalize_union(&pi1);
        let mut pi0 = Vec::new();
        let mut at = Rational::zero();
        for iv in &pi1 {
            if iv.left > at {
                pi0.push(Interval::new_unchecked(at.clone(), iv.left.clone()));
            }
            at = iv.right.clone();
        }
        if at < Rational::one() {
            pi0.push(Interval::new_unchecked(at, Rational::one()));
        }
        let r = pi1.iter().map(Interval::width).sum();
        Ok(PartitionSpec { pi1, pi0, r })
    }

    pub fn symbol_of_point(&self, x: &Rational) -> u8 {
        u8::from(self.pi1.iter().any(|iv| iv.contains(x)))
    }

    /// `None` if the interval straddles a partition boundary.
    pub fn symbol_of_interval(&self, iv: &Interval) -> Option<u8> {
        if self.pi1.iter().any(|p| p.contains_interval(iv)) {
            Some(1)
        } else if self.pi0.iter().any(|p| p.contains_interval(iv)) {
            Some(0)
        } else {
            None
        }
    }

    fn boundaries(&self) -> Vec<&Rational> {
        self.pi1.iter().flat_map(|iv| [&iv.left, &iv.right]).collect()
    }
}

/// Cuts every column of `g` vertically so that no level straddles a
/// boundary of `part`.
pub fn refine_for_partition(g: &Gadget, part: &PartitionSpec) -> Gadget {
    let bounds = part.boundaries();
    let columns = g
        .columns
        .iter()
        .flat_map(|col| {
            let mut cuts: Vec<Rational> = col
                .levels
                .iter()
                .flat_map(|l| {
                    bounds
                        .iter()
                        .filter(|&&b| l.left < *b && *b < l.right)
                        .map(move |&b| (b - &l.left) / l.width())
                })
                .collect();
            cuts.sort();
            cuts.dedup();
            if cuts.is_empty() {
                return vec![col.clone()];
            }
            let mut fractions = Vec::with_capacity(cuts.len() + 1);
            let mut prev = Rational::zero();
            for c in cuts.into_iter().chain(std::iter::once(Rational::one())) {
                fractions.push(&c - &prev);
                prev = c;
            }
            col.cut(&fractions)
        })
        .collect::<Vec<Column>>();
    Gadget { columns }
}

/// Per-level symbols of every leaf of a gadget tree.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    leaves: HashMap<usize, Arc<Vec<Vec<u8>>>>,
}

impl SymbolTable {
    /// Fails if a leaf level straddles the partition; refine leaves first.
    pub fn new(tree: &GadgetTree, part: &PartitionSpec) -> Result<SymbolTable> {
        let mut leaves = HashMap::new();
        collect_leaves(tree, part, &mut leaves)?;
        Ok(SymbolTable { leaves })
    }

    pub fn leaf_symbol(&self, g: &Gadget, col: usize, level: usize) -> u8 {
        self.leaves[&(g as *const Gadget as usize)][col][level]
    }

    /// The full name of a column, bottom to top.
    pub fn column_name(&self, tree: &GadgetTree, addr: &ColumnAddr) -> Vec<u8> {
        let mut out = Vec::new();
        tree.walk_leaf_levels(addr, &mut |g, c, l| out.push(self.leaf_symbol(g, c, l)));
        out
    }
}

fn collect_leaves(
    tree: &GadgetTree,
    part: &PartitionSpec,
    out: &mut HashMap<usize, Arc<Vec<Vec<u8>>>>,
) -> Result<()> {
    match tree.node() {
        Node::Leaf(g) => {
            let key = g as *const Gadget as usize;
            if out.contains_key(&key) {
                return Ok(());
            }
            let table = g
                .columns
                .iter()
                .map(|c| {
                    c.levels
                        .iter()
                        .map(|l| {
                            part.symbol_of_interval(l).ok_or_else(|| {
                                Error::InvalidParameter(format!("level {l} straddles the partition; refine first"))
                            })
                        })
                        .collect::<Result<Vec<u8>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            out.insert(key, Arc::new(table));
        }
        Node::Union(parts) => {
            for p in parts {
                collect_leaves(p, part, out)?;
            }
        }
        Node::Slice { of, .. } | Node::Power { of, .. } => collect_leaves(of, part, out)?,
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryName {
    pub symbols: Vec<u8>,
    pub column: ColumnAddr,
    pub level: u128,
    #[serde(with = "crate::rational::wire")]
    pub point: Rational,
}

impl TrajectoryName {
    pub fn as_string(&self) -> String {
        self.symbols.iter().map(|&b| char::from(b'0' + b)).collect()
    }
}

/// Name of length `len` starting from level `level` of column `addr`.
pub fn trajectory_name(
    tree: &GadgetTree,
    table: &SymbolTable,
    addr: &ColumnAddr,
    level: u128,
    len: usize,
) -> Result<TrajectoryName> {
    let h = tree.height(addr);
    if level >= h || h - level < len as u128 {
        return Err(Error::TrajectoryTooShort(format!(
            "{len} steps requested from level {level} of a column of height {h}"
        )));
    }
    let mut symbols = Vec::with_capacity(len);
    let mut j = 0u128;
    let end = level + len as u128;
    tree.walk_leaf_levels(addr, &mut |g, c, l| {
        if j >= level && j < end {
            symbols.push(table.leaf_symbol(g, c, l));
        }
        j += 1;
    });
    let point = tree.level_interval(addr, level).left;
    Ok(TrajectoryName { symbols, column: addr.clone(), level, point })
}

/// `(1/n) · #{k < n : T^k ω ∈ π_1}` from level `level` of column `addr`.
pub fn ergodic_average(
    tree: &GadgetTree,
    table: &SymbolTable,
    addr: &ColumnAddr,
    level: u128,
    n: usize,
) -> Result<Rational> {
    if n == 0 {
        return Err(Error::InvalidParameter("average over zero steps".into()));
    }
    let name = trajectory_name(tree, table, addr, level, n)?;
    let ones = name.symbols.iter().filter(|&&b| b == 1).count();
    Ok(rat(ones as i64, n as i64))
}

/// Exact total width of the levels, with at least `|x|` levels remaining
/// in their column, whose forward name starts with `x`.
///
/// Walks the name of every column; fails past `limit` columns.
pub fn cylinder_measure(tree: &GadgetTree, table: &SymbolTable, x: &[u8], limit: usize) -> Result<Rational> {
    let mut total = Rational::zero();
    for addr in tree.columns(limit)? {
        let name = table.column_name(tree, &addr);
        if name.len() < x.len() {
            continue;
        }
        let hits = if x.is_empty() {
            name.len()
        } else {
            name.windows(x.len()).filter(|w| *w == x).count()
        };
        if hits > 0 {
            total += tree.column_width(&addr) * Rational::from_integer(hits.into());
        }
    }
    Ok(total)
}

/// [`cylinder_measure`] recomputed by iterating `T` on the left endpoint of
/// every level and reading symbols from the points.
pub fn cylinder_measure_by_orbits(
    tree: &GadgetTree,
    part: &PartitionSpec,
    x: &[u8],
    limit: usize,
) -> Result<Rational> {
    let mut total = Rational::zero();
    for addr in tree.columns(limit)? {
        let h = tree.height(&addr);
        for j in 0..h {
            if h - j < x.len() as u128 {
                break;
            }
            let start = tree.level_interval(&addr, j);
            let mut p = start.left.clone();
            let mut ok = true;
            for (k, &want) in x.iter().enumerate() {
                if part.symbol_of_point(&p) != want {
                    ok = false;
                    break;
                }
                if k + 1 < x.len() {
                    match tree.apply_t(&p)? {
                        Step::Image(q) => p = q,
                        Step::Top => return Err(Error::TrajectoryTooShort("orbit hit a top level".into())),
                    }
                }
            }
            if ok {
                total += start.width();
            }
        }
    }
    Ok(total)
}

/// `P(x)` for every word `x` of length `n` that occurs.
pub fn cylinder_distribution(
    tree: &GadgetTree,
    table: &SymbolTable,
    n: usize,
    limit: usize,
) -> Result<BTreeMap<Vec<u8>, Rational>> {
    let mut out: BTreeMap<Vec<u8>, Rational> = BTreeMap::new();
    for addr in tree.columns(limit)? {
        let name = table.column_name(tree, &addr);
        if name.len() < n {
            continue;
        }
        let w = tree.column_width(&addr);
        for win in name.windows(n.max(1)) {
            let key = win[..n].to_vec();
            *out.entry(key).or_insert_with(Rational::zero) += &w;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitStep {
    pub step: usize,
    #[serde(with = "crate::rational::wire")]
    pub point: Rational,
    pub symbol: u8,
    #[serde(with = "crate::rational::wire")]
    pub running_average: Rational,
}

/// Up to `steps` points of the orbit of `x`, stopping at the top of its
/// column.
///
/// `x` is located once; since `T` translates each level onto the next, the
/// orbit is `left(L_k) + rel · width` along the column.
pub fn orbit(tree: &GadgetTree, table: &SymbolTable, x: &Rational, steps: usize) -> Result<Vec<OrbitStep>> {
    let loc = tree.locate(x).ok_or_else(|| Error::OutsideSupport(to_fraction(x)))?;
    let mut syms = Vec::new();
    let mut j = 0u128;
    let end = loc.level + steps as u128;
    tree.walk_leaf_levels(&loc.addr, &mut |g, c, l| {
        if j >= loc.level && j < end {
            syms.push(table.leaf_symbol(g, c, l));
        }
        j += 1;
    });
    let mut out = Vec::with_capacity(syms.len());
    let mut ones = 0i64;
    let mut k = 0u128;
    let mut idx = 0usize;
    tree.walk_levels(&loc.addr, &mut |iv| {
        if k >= loc.level && k < end {
            let s = syms[idx];
            ones += i64::from(s);
            idx += 1;
            out.push(OrbitStep {
                step: idx - 1,
                point: &iv.left + &loc.rel * iv.width(),
                symbol: s,
                running_average: rat(ones, idx as i64),
            });
        }
        k += 1;
    });
    Ok(out)
}

/// Outcome of the binomial entropy bound at one `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyBound {
    pub n: u64,
    /// `(1/n) log2 Σ_{i ≤ ⌈2rn⌉} C(n, i) + 2 log2(n) / n`.
    pub lhs: Enclosure,
    /// `-3 r log2 r`.
    pub rhs: Enclosure,
    /// `lhs < rhs`, decided exactly.
    pub holds: bool,
}

/// Compares both sides of the bound for `0 < r < 1/4`, `n >= 2`.
///
/// With `r = a/b` and `3rn = p/q` the verdict is `(S n²)^q a^p < b^p`,
/// where `S` is the binomial sum, so no rounding enters it.
pub fn entropy_upper_bound(r: &Rational, n: u64) -> Result<EntropyBound> {
    if *r <= Rational::zero() || *r >= rat(1, 4) {
        return Err(Error::InvalidParameter(format!("r = {} outside (0, 1/4)", to_fraction(r))));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let nr = Rational::from_integer(BigInt::from(n));
    let kmax = (Rational::from_integer(2.into()) * r * &nr).ceil().to_integer().to_u64().unwrap().min(n);
    let sum = binomial_prefix_sum(n, kmax);
    let sn2 = &sum * BigUint::from(n) * BigUint::from(n);
    let e = Rational::from_integer(3.into()) * r * &nr;
    let (p, q) = (e.numer().to_biguint().unwrap(), e.denom().to_biguint().unwrap());
    let (a, b) = (r.numer().to_biguint().unwrap(), r.denom().to_biguint().unwrap());
    let p_us = p.to_usize().ok_or_else(|| Error::BudgetExceeded("exponent too large".into()))?;
    let q_us = q.to_usize().ok_or_else(|| Error::BudgetExceeded("exponent too large".into()))?;
    let holds = num_traits::pow(sn2.clone(), q_us) * num_traits::pow(a, p_us) < num_traits::pow(b, p_us);
    let lhs = log2(&Rational::from_integer(BigInt::from(sn2)), DEFAULT_BITS).scale(&nr.recip());
    let rhs = log2(r, DEFAULT_BITS).scale(&(Rational::from_integer((-3).into()) * r));
    Ok(EntropyBound { n, lhs, rhs, holds })
}

/// `Σ_{i=0}^{k} C(n, i)`.
pub fn binomial_prefix_sum(n: u64, k: u64) -> BigUint {
    let mut term = BigUint::one();
    let mut sum = BigUint::one();
    for i in 0..k.min(n) {
        term = term * BigUint::from(n - i) / BigUint::from(i + 1);
        sum += &term;
    }
    sum
}

/// Smallest `n` in `[2, n_max]` from which the bound holds for every
/// `n' <= n_max`, if any.
pub fn entropy_threshold(r: &Rational, n_max: u64) -> Result<Option<u64>> {
    let mut first = None;
    for n in 2..=n_max {
        if entropy_upper_bound(r, n)?.holds {
            first.get_or_insert(n);
        } else {
            first = None;
        }
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::init_gadgets;

    fn column(parts: &[(i64, i64, i64, i64)]) -> Gadget {
        let levels = parts.iter().map(|&(a, b, c, d)| Interval::new(rat(a, b), rat(c, d)).unwrap()).collect();
        Gadget::single(Column::new(levels).unwrap())
    }

    #[test]
    fn apply_translates() {
        let t = GadgetTree::leaf(column(&[(0, 1, 1, 2), (1, 2, 1, 1)]));
        assert_eq!(t.apply_t(&rat(1, 4)).unwrap(), Step::Image(rat(3, 4)));
        assert_eq!(t.apply_t(&rat(3, 4)).unwrap(), Step::Top);
        let small = GadgetTree::leaf(column(&[(0, 1, 1, 4)]));
        assert!(matches!(small.apply_t(&rat(1, 2)), Err(Error::OutsideSupport(_))));
    }

    #[test]
    fn delta_zero_name() {
        let r = rat(1, 8);
        let part = PartitionSpec::standard(&r).unwrap();
        assert_eq!(part.pi0.len(), 2);
        let (_, delta) = init_gadgets(&r, 1).unwrap();
        let t = GadgetTree::leaf(delta);
        let table = SymbolTable::new(&t, &part).unwrap();
        let name = trajectory_name(&t, &table, &ColumnAddr::Leaf(0), 0, 2).unwrap();
        assert_eq!(name.symbols, vec![0, 1]);
        assert_eq!(name.point, rat(3, 8));
        assert!(matches!(
            trajectory_name(&t, &table, &ColumnAddr::Leaf(0), 1, 2),
            Err(Error::TrajectoryTooShort(_))
        ));
    }

    #[test]
    fn refinement_splits_straddling_levels() {
        let part = PartitionSpec::standard(&rat(1, 8)).unwrap();
        let g = column(&[(3, 8, 9, 16), (0, 1, 3, 16)]);
        let t = GadgetTree::leaf(g.clone());
        assert!(SymbolTable::new(&t, &part).is_err());
        let refined = refine_for_partition(&g, &part);
        assert_eq!(refined.num_columns(), 2);
        assert_eq!(refined.support_measure(), g.support_measure());
        let t = GadgetTree::leaf(refined);
        let table = SymbolTable::new(&t, &part).unwrap();
        assert_eq!(table.column_name(&t, &ColumnAddr::Leaf(0)), vec![0, 0]);
        assert_eq!(table.column_name(&t, &ColumnAddr::Leaf(1)), vec![1, 0]);
    }

    #[test]
    fn cylinder_routes_agree() {
        let r = rat(1, 8);
        let part = PartitionSpec::standard(&r).unwrap();
        let (pi, delta) = init_gadgets(&r, 2).unwrap();
        let src = GadgetTree::union(vec![GadgetTree::leaf(pi), GadgetTree::leaf(delta)]).unwrap();
        let t = GadgetTree::power(src, 3).unwrap();
        let table = SymbolTable::new(&t, &part).unwrap();
        assert_eq!(cylinder_measure(&t, &table, &[], 100).unwrap(), Rational::one());
        for x in [vec![1u8], vec![0, 1], vec![1, 1, 0], vec![0, 0, 0, 1, 1]] {
            let a = cylinder_measure(&t, &table, &x, 100).unwrap();
            let b = cylinder_measure_by_orbits(&t, &part, &x, 100).unwrap();
            assert_eq!(a, b, "word {x:?}");
        }
        let dist = cylinder_distribution(&t, &table, 3, 100).unwrap();
        let total: Rational = dist.values().sum();
        assert!(total < Rational::one());
    }

    #[test]
    fn orbit_matches_iteration() {
        let r = rat(1, 8);
        let part = PartitionSpec::standard(&r).unwrap();
        let (pi, delta) = init_gadgets(&r, 2).unwrap();
        let src = GadgetTree::union(vec![GadgetTree::leaf(pi), GadgetTree::leaf(delta)]).unwrap();
        let t = GadgetTree::power(src, 2).unwrap();
        let table = SymbolTable::new(&t, &part).unwrap();
        let x = rat(3, 97);
        let orb = orbit(&t, &table, &x, 1000).unwrap();
        let mut p = x.clone();
        for (k, st) in orb.iter().enumerate() {
            assert_eq!(st.point, p);
            assert_eq!(st.symbol, part.symbol_of_point(&p));
            match t.apply_t(&p).unwrap() {
                Step::Image(q) => p = q,
                Step::Top => assert_eq!(k + 1, orb.len()),
            }
        }
    }

    #[test]
    fn entropy_small_cases() {
        let r = rat(1, 32);
        let b = entropy_upper_bound(&r, 10_000).unwrap();
        assert_eq!(b.rhs, Enclosure::exact(rat(15, 32)));
        assert!(b.holds);
        assert!(b.lhs.hi < rat(15, 32));
        let small = entropy_upper_bound(&r, 10).unwrap();
        assert!(!small.holds);
        assert!(small.lhs.lo > small.rhs.hi);
        assert_eq!(binomial_prefix_sum(5, 2), BigUint::from(16u32));
    }
}
