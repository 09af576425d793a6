//! Structural gadgets.
//!
//! Repeated independent cutting and stacking produces `n^M` columns, far
//! too many to materialise. A [`GadgetTree`] records how a gadget was built
//! (explicit leaves, disjoint unions, width slices and `M`-fold powers) and
//! answers geometric questions about any single column lazily, in exact
//! arithmetic. Columns are named by [`ColumnAddr`] paths, ordered exactly as
//! the explicit operations in [`super::explicit`] order them.

use super::census::Census;
use super::explicit::{Column, Gadget, GadgetIndex};
use super::interval::Interval;
use crate::error::{Error, Result};
use crate::rational::{to_f64, wire, Rational};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnAddr {
    Leaf(usize),
    Union(usize, Box<ColumnAddr>),
    Slice(Box<ColumnAddr>),
    Power(Vec<ColumnAddr>),
}

#[derive(Debug)]
pub enum Node {
    Leaf(Gadget),
    Union(Vec<Arc<GadgetTree>>),
    /// The copy occupying relative band `[lo, hi)` of every interval.
    Slice { of: Arc<GadgetTree>, lo: Rational, hi: Rational },
    /// `of^{*(m)}`.
    Power { of: Arc<GadgetTree>, m: u64 },
}

#[derive(Debug)]
struct LeafCache {
    rel: Vec<Rational>,
    cum: Vec<Rational>,
    cum_f64: Vec<f64>,
    index: GadgetIndex,
}

#[derive(Debug)]
pub struct GadgetTree {
    node: Node,
    width: Rational,
    support: Rational,
    columns: BigUint,
    min_height: u128,
    max_height: u128,
    leaf: Option<LeafCache>,
    census: OnceLock<Arc<Census>>,
}

/// Result of locating a point: the column, the level, and the relative
/// position of the point inside that level interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Located {
    pub addr: ColumnAddr,
    pub level: u128,
    pub rel: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Image(Rational),
    /// The point lies in the top level of its column.
    Top,
}

impl GadgetTree {
    pub fn leaf(g: Gadget) -> Arc<GadgetTree> {
        let width = g.width();
        let rel: Vec<Rational> = g.columns.iter().map(|c| c.width() / &width).collect();
        let mut cum = Vec::with_capacity(rel.len());
        let mut acc = Rational::zero();
        for r in &rel {
            cum.push(acc.clone());
            acc += r;
        }
        let mut cum_f64 = Vec::with_capacity(rel.len());
        let mut accf = 0.0;
        for r in &rel {
            accf += to_f64(r);
            cum_f64.push(accf);
        }
        let leaf = LeafCache { rel, cum, cum_f64, index: GadgetIndex::new(&g) };
        Arc::new(GadgetTree {
            width,
            support: g.support_measure(),
            columns: BigUint::from(g.num_columns()),
            min_height: g.min_height() as u128,
            max_height: g.max_height() as u128,
            leaf: Some(leaf),
            census: OnceLock::new(),
            node: Node::Leaf(g),
        })
    }

    pub fn union(parts: Vec<Arc<GadgetTree>>) -> Result<Arc<GadgetTree>> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("empty union".into()));
        }
        Ok(Arc::new(GadgetTree {
            width: parts.iter().map(|p| p.width.clone()).sum(),
            support: parts.iter().map(|p| p.support.clone()).sum(),
            columns: parts.iter().map(|p| p.columns.clone()).sum(),
            min_height: parts.iter().map(|p| p.min_height).min().unwrap(),
            max_height: parts.iter().map(|p| p.max_height).max().unwrap(),
            leaf: None,
            census: OnceLock::new(),
            node: Node::Union(parts),
        }))
    }

    pub fn slice(of: Arc<GadgetTree>, lo: Rational, hi: Rational) -> Result<Arc<GadgetTree>> {
        if !(Rational::zero() <= lo && lo < hi && hi <= Rational::one()) {
            return Err(Error::InvalidDistribution("slice band must satisfy 0 <= lo < hi <= 1".into()));
        }
        let f = &hi - &lo;
        Ok(Arc::new(GadgetTree {
            width: &of.width * &f,
            support: &of.support * &f,
            columns: of.columns.clone(),
            min_height: of.min_height,
            max_height: of.max_height,
            leaf: None,
            census: OnceLock::new(),
            node: Node::Slice { of, lo, hi },
        }))
    }

    pub fn power(of: Arc<GadgetTree>, m: u64) -> Result<Arc<GadgetTree>> {
        if m == 0 {
            return Err(Error::InvalidParameter("m-fold with m = 0".into()));
        }
        Ok(Arc::new(GadgetTree {
            width: &of.width / Rational::from_integer(m.into()),
            support: of.support.clone(),
            columns: num_traits::pow(of.columns.clone(), m as usize),
            min_height: of.min_height * m as u128,
            max_height: of.max_height * m as u128,
            leaf: None,
            census: OnceLock::new(),
            node: Node::Power { of, m },
        }))
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn width(&self) -> &Rational {
        &self.width
    }

    pub fn support_measure(&self) -> &Rational {
        &self.support
    }

    pub fn column_count(&self) -> &BigUint {
        &self.columns
    }

    pub fn min_height(&self) -> u128 {
        self.min_height
    }

    pub fn max_height(&self) -> u128 {
        self.max_height
    }

    pub fn uniform_height(&self) -> Option<u128> {
        (self.min_height == self.max_height).then_some(self.min_height)
    }

    /// Census of the columns, computed once and cached.
    pub fn census(&self, budget: usize) -> Result<Arc<Census>> {
        if let Some(c) = self.census.get() {
            return Ok(c.clone());
        }
        let c = match &self.node {
            Node::Leaf(g) => Census::of_gadget(g),
            Node::Union(parts) => {
                let cs: Vec<Arc<Census>> = parts.iter().map(|p| p.census(budget)).collect::<Result<_>>()?;
                let shares: Vec<(&Census, Rational)> =
                    cs.iter().zip(parts).map(|(c, p)| (c.as_ref(), &p.width / &self.width)).collect();
                Census::union(&shares)
            }
            Node::Slice { of, .. } => (*of.census(budget)?).clone(),
            Node::Power { of, m } => of.census(budget)?.power(*m, budget)?,
        };
        let c = Arc::new(c);
        let _ = self.census.set(c.clone());
        Ok(c)
    }

    /// `w(E) / w(G)` for the column `addr`.
    pub fn rel_weight(&self, addr: &ColumnAddr) -> Rational {
        match (&self.node, addr) {
            (Node::Leaf(_), ColumnAddr::Leaf(i)) => self.leaf.as_ref().unwrap().rel[*i].clone(),
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => {
                &parts[*u].width / &self.width * parts[*u].rel_weight(inner)
            }
            (Node::Slice { of, .. }, ColumnAddr::Slice(inner)) => of.rel_weight(inner),
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => {
                let mut acc = Rational::one();
                for d in ds {
                    acc *= of.rel_weight(d);
                }
                acc
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// Total relative weight of the columns preceding `addr`.
    pub fn cum_weight(&self, addr: &ColumnAddr) -> Rational {
        match (&self.node, addr) {
            (Node::Leaf(_), ColumnAddr::Leaf(i)) => self.leaf.as_ref().unwrap().cum[*i].clone(),
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => {
                let before: Rational = parts[..*u].iter().map(|p| p.width.clone()).sum();
                (before + &parts[*u].width * parts[*u].cum_weight(inner)) / &self.width
            }
            (Node::Slice { of, .. }, ColumnAddr::Slice(inner)) => of.cum_weight(inner),
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => {
                let (pos, _) = arithmetic_code(of, ds.iter());
                pos
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// Inverse of `cum_weight`: the column whose weight band contains `u`,
    /// and the position of `u` inside that band rescaled to `[0, 1)`.
    pub fn column_at(&self, u: &Rational) -> (ColumnAddr, Rational) {
        match &self.node {
            Node::Leaf(_) => {
                let lc = self.leaf.as_ref().unwrap();
                let i = lc.cum.partition_point(|c| c <= u).saturating_sub(1);
                (ColumnAddr::Leaf(i), (u - &lc.cum[i]) / &lc.rel[i])
            }
            Node::Union(parts) => {
                let mut start = Rational::zero();
                let target = u * &self.width;
                for (i, p) in parts.iter().enumerate() {
                    let end = &start + &p.width;
                    if target < end || i + 1 == parts.len() {
                        let (a, r) = p.column_at(&((&target - &start) / &p.width));
                        return (ColumnAddr::Union(i, Box::new(a)), r);
                    }
                    start = end;
                }
                unreachable!()
            }
            Node::Slice { of, .. } => {
                let (a, r) = of.column_at(u);
                (ColumnAddr::Slice(Box::new(a)), r)
            }
            Node::Power { of, m } => {
                let mut r = u.clone();
                let mut ds = Vec::with_capacity(*m as usize);
                for _ in 0..*m {
                    let (d, nr) = of.column_at(&r);
                    ds.push(d);
                    r = nr;
                }
                (ColumnAddr::Power(ds), r)
            }
        }
    }

    pub fn height(&self, addr: &ColumnAddr) -> u128 {
        match (&self.node, addr) {
            (Node::Leaf(g), ColumnAddr::Leaf(i)) => g.columns[*i].height() as u128,
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => parts[*u].height(inner),
            (Node::Slice { of, .. }, ColumnAddr::Slice(inner)) => of.height(inner),
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => match of.uniform_height() {
                Some(h) => h * ds.len() as u128,
                None => ds.iter().map(|d| of.height(d)).sum(),
            },
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// Width of the column `addr`.
    pub fn column_width(&self, addr: &ColumnAddr) -> Rational {
        &self.width * self.rel_weight(addr)
    }

    /// Relative bands, inside the source level, occupied by each factor of
    /// a power column.
    pub fn power_slots(&self, ds: &[ColumnAddr]) -> Vec<(Rational, Rational)> {
        let Node::Power { of, m } = &self.node else {
            panic!("power_slots on a non-power node");
        };
        let m = *m as usize;
        let p: Vec<Rational> = ds.iter().map(|d| of.rel_weight(d)).collect();
        let c: Vec<Rational> = ds.iter().map(|d| of.cum_weight(d)).collect();
        // suffix code after position k: q[k] = pos, ws[k] = width
        let mut q = vec![Rational::zero(); m + 1];
        let mut ws = vec![Rational::one(); m + 1];
        for k in (0..m).rev() {
            q[k] = &c[k] + &p[k] * &q[k + 1];
            ws[k] = &p[k] * &ws[k + 1];
        }
        let mr = Rational::from_integer(m.into());
        let mut out = Vec::with_capacity(m);
        let mut pre_pos = Rational::zero();
        let mut pre_w = Rational::one();
        for k in 0..m {
            let pos = &pre_pos + &pre_w * &q[k + 1];
            let w = &pre_w * &ws[k + 1];
            let base = Rational::from_integer(k.into());
            out.push(((&base + &pos) / &mr, (&base + &pos + w) / &mr));
            pre_pos += &pre_w * &c[k];
            pre_w *= &p[k];
        }
        out
    }

    /// Factor index and level inside that factor.
    fn power_factor(&self, ds: &[ColumnAddr], level: u128) -> (usize, u128) {
        let Node::Power { of, .. } = &self.node else { unreachable!() };
        if let Some(h) = of.uniform_height() {
            return ((level / h) as usize, level % h);
        }
        let mut l = level;
        for (k, d) in ds.iter().enumerate() {
            let h = of.height(d);
            if l < h {
                return (k, l);
            }
            l -= h;
        }
        panic!("level beyond column height")
    }

    pub fn level_interval(&self, addr: &ColumnAddr, level: u128) -> Interval {
        match (&self.node, addr) {
            (Node::Leaf(g), ColumnAddr::Leaf(i)) => g.columns[*i].levels[level as usize].clone(),
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => parts[*u].level_interval(inner, level),
            (Node::Slice { of, lo, hi }, ColumnAddr::Slice(inner)) => of.level_interval(inner, level).band(lo, hi),
            (Node::Power { of, m }, ColumnAddr::Power(ds)) => {
                let (k, j) = self.power_factor(ds, level);
                let (lo, hi) = single_slot(of, *m, ds, k);
                of.level_interval(&ds[k], j).band(&lo, &hi)
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// The explicit leaf level underlying `(addr, level)`.
    pub fn leaf_level(&self, addr: &ColumnAddr, level: u128) -> (&Gadget, usize, usize) {
        match (&self.node, addr) {
            (Node::Leaf(g), ColumnAddr::Leaf(i)) => (g, *i, level as usize),
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => parts[*u].leaf_level(inner, level),
            (Node::Slice { of, .. }, ColumnAddr::Slice(inner)) => of.leaf_level(inner, level),
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => {
                let (k, j) = self.power_factor(ds, level);
                of.leaf_level(&ds[k], j)
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// Calls `f` on every level interval of the column, bottom to top.
    pub fn walk_levels(&self, addr: &ColumnAddr, f: &mut dyn FnMut(&Interval)) {
        self.walk_banded(addr, &(Rational::zero(), Rational::one()), f);
    }

    fn walk_banded(&self, addr: &ColumnAddr, band: &(Rational, Rational), f: &mut dyn FnMut(&Interval)) {
        match (&self.node, addr) {
            (Node::Leaf(g), ColumnAddr::Leaf(i)) => {
                let full = band.0.is_zero() && band.1.is_one();
                for l in &g.columns[*i].levels {
                    if full {
                        f(l);
                    } else {
                        f(&l.band(&band.0, &band.1));
                    }
                }
            }
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => parts[*u].walk_banded(inner, band, f),
            (Node::Slice { of, lo, hi }, ColumnAddr::Slice(inner)) => {
                of.walk_banded(inner, &compose(band, &(lo.clone(), hi.clone())), f)
            }
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => {
                for (d, slot) in ds.iter().zip(self.power_slots(ds)) {
                    of.walk_banded(d, &compose(band, &slot), f);
                }
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// Calls `f(leaf column, band)` once per run of consecutive levels that
    /// come from one leaf column, bottom to top. Every level of the run is
    /// the leaf level cut to the relative band `band`.
    pub fn walk_segments(&self, addr: &ColumnAddr, f: &mut dyn FnMut(&Column, &(Rational, Rational))) {
        self.segments_banded(addr, &(Rational::zero(), Rational::one()), f);
    }

    fn segments_banded(
        &self,
        addr: &ColumnAddr,
        band: &(Rational, Rational),
        f: &mut dyn FnMut(&Column, &(Rational, Rational)),
    ) {
        match (&self.node, addr) {
            (Node::Leaf(g), ColumnAddr::Leaf(i)) => f(&g.columns[*i], band),
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => parts[*u].segments_banded(inner, band, f),
            (Node::Slice { of, lo, hi }, ColumnAddr::Slice(inner)) => {
                of.segments_banded(inner, &compose(band, &(lo.clone(), hi.clone())), f)
            }
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => {
                for (d, slot) in ds.iter().zip(self.power_slots(ds)) {
                    of.segments_banded(d, &compose(band, &slot), f);
                }
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    /// Calls `f(leaf gadget, column, level)` for every level, bottom to top.
    pub fn walk_leaf_levels(&self, addr: &ColumnAddr, f: &mut dyn FnMut(&Gadget, usize, usize)) {
        match (&self.node, addr) {
            (Node::Leaf(g), ColumnAddr::Leaf(i)) => {
                for l in 0..g.columns[*i].height() {
                    f(g, *i, l);
                }
            }
            (Node::Union(parts), ColumnAddr::Union(u, inner)) => parts[*u].walk_leaf_levels(inner, f),
            (Node::Slice { of, .. }, ColumnAddr::Slice(inner)) => of.walk_leaf_levels(inner, f),
            (Node::Power { of, .. }, ColumnAddr::Power(ds)) => {
                for d in ds {
                    of.walk_leaf_levels(d, f);
                }
            }
            _ => panic!("column address does not match gadget structure"),
        }
    }

    pub fn locate(&self, x: &Rational) -> Option<Located> {
        match &self.node {
            Node::Leaf(g) => {
                let (c, l) = self.leaf.as_ref().unwrap().index.locate(x)?;
                let iv = &g.columns[c].levels[l];
                Some(Located { addr: ColumnAddr::Leaf(c), level: l as u128, rel: (x - &iv.left) / iv.width() })
            }
            Node::Union(parts) => parts.iter().enumerate().find_map(|(i, p)| {
                p.locate(x).map(|loc| Located { addr: ColumnAddr::Union(i, Box::new(loc.addr)), ..loc })
            }),
            Node::Slice { of, lo, hi } => {
                let loc = of.locate(x)?;
                if loc.rel < *lo || loc.rel >= *hi {
                    return None;
                }
                Some(Located {
                    addr: ColumnAddr::Slice(Box::new(loc.addr)),
                    level: loc.level,
                    rel: (&loc.rel - lo) / (hi - lo),
                })
            }
            Node::Power { of, m } => {
                let loc = of.locate(x)?;
                let mr = Rational::from_integer((*m).into());
                let t = &loc.rel * &mr;
                let k = t.floor();
                let mut u = &t - &k;
                let k = k.to_integer().to_usize().unwrap();
                let mut ds = Vec::with_capacity(*m as usize);
                for _ in 0..(*m as usize - 1) {
                    let (d, r) = of.column_at(&u);
                    ds.push(d);
                    u = r;
                }
                let tail = ds.split_off(k);
                let mut level = loc.level;
                for d in &ds {
                    level += of.height(d);
                }
                ds.push(loc.addr);
                ds.extend(tail);
                Some(Located { addr: ColumnAddr::Power(ds), level, rel: u })
            }
        }
    }

    /// The map `T`: each non-top level is translated onto the level above.
    pub fn apply_t(&self, x: &Rational) -> Result<Step> {
        let loc = self.locate(x).ok_or_else(|| Error::OutsideSupport(crate::rational::to_fraction(x)))?;
        if loc.level + 1 == self.height(&loc.addr) {
            return Ok(Step::Top);
        }
        let next = self.level_interval(&loc.addr, loc.level + 1);
        Ok(Step::Image(&next.left + &loc.rel * next.width()))
    }

    /// All column addresses in order, if there are at most `limit`.
    pub fn columns(&self, limit: usize) -> Result<Vec<ColumnAddr>> {
        if self.columns > BigUint::from(limit) {
            return Err(Error::BudgetExceeded(format!("{} columns exceed limit {limit}", self.columns)));
        }
        Ok(self.columns_unchecked())
    }

    fn columns_unchecked(&self) -> Vec<ColumnAddr> {
        match &self.node {
            Node::Leaf(g) => (0..g.num_columns()).map(ColumnAddr::Leaf).collect(),
            Node::Union(parts) => parts
                .iter()
                .enumerate()
                .flat_map(|(i, p)| p.columns_unchecked().into_iter().map(move |a| ColumnAddr::Union(i, Box::new(a))))
                .collect(),
            Node::Slice { of, .. } => {
                of.columns_unchecked().into_iter().map(|a| ColumnAddr::Slice(Box::new(a))).collect()
            }
            Node::Power { of, m } => {
                let src = of.columns_unchecked();
                let m = *m as usize;
                let mut out = Vec::new();
                if src.is_empty() {
                    return out;
                }
                let mut idx = vec![0usize; m];
                loop {
                    out.push(ColumnAddr::Power(idx.iter().map(|&i| src[i].clone()).collect()));
                    let Some(k) = (0..m).rev().find(|&k| idx[k] + 1 < src.len()) else { break };
                    idx[k] += 1;
                    idx[k + 1..].iter_mut().for_each(|i| *i = 0);
                }
                out
            }
        }
    }

    /// Builds the explicit gadget, if it has at most `limit` columns.
    pub fn materialize(&self, limit: usize) -> Result<Gadget> {
        let cols = self.columns(limit)?;
        let columns = cols
            .iter()
            .map(|a| {
                let mut levels = Vec::new();
                self.walk_levels(a, &mut |iv| levels.push(iv.clone()));
                Column { levels, origin: None }
            })
            .collect();
        Ok(Gadget { columns })
    }

    /// Draws a column with probability proportional to its width.
    pub fn sample_column<R: Rng + ?Sized>(&self, rng: &mut R) -> ColumnAddr {
        match &self.node {
            Node::Leaf(_) => ColumnAddr::Leaf(self.sample_leaf_index(rng)),
            Node::Union(parts) => {
                let i = self.sample_member(rng);
                ColumnAddr::Union(i, Box::new(parts[i].sample_column(rng)))
            }
            Node::Slice { of, .. } => ColumnAddr::Slice(Box::new(of.sample_column(rng))),
            Node::Power { of, m } => ColumnAddr::Power((0..*m).map(|_| of.sample_column(rng)).collect()),
        }
    }

    pub(crate) fn sample_leaf_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let lc = self.leaf.as_ref().expect("leaf node");
        let u: f64 = rng.gen::<f64>() * lc.cum_f64.last().copied().unwrap_or(1.0);
        lc.cum_f64.partition_point(|&c| c <= u).min(lc.cum_f64.len() - 1)
    }

    pub(crate) fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let Node::Union(parts) = &self.node else { panic!("union node expected") };
        let total = to_f64(&self.width);
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (i, p) in parts.iter().enumerate() {
            acc += to_f64(&p.width);
            if u < acc {
                return i;
            }
        }
        parts.len() - 1
    }

    pub fn to_repr(&self) -> TreeRepr {
        match &self.node {
            Node::Leaf(g) => TreeRepr::Leaf { gadget: g.clone() },
            Node::Union(parts) => TreeRepr::Union { parts: parts.iter().map(|p| p.to_repr()).collect() },
            Node::Slice { of, lo, hi } => TreeRepr::Slice { of: Box::new(of.to_repr()), lo: lo.clone(), hi: hi.clone() },
            Node::Power { of, m } => TreeRepr::Power { of: Box::new(of.to_repr()), m: *m },
        }
    }

    pub fn from_repr(r: &TreeRepr) -> Result<Arc<GadgetTree>> {
        match r {
            TreeRepr::Leaf { gadget } => {
                gadget.validate()?;
                Ok(GadgetTree::leaf(gadget.clone()))
            }
            TreeRepr::Union { parts } => {
                GadgetTree::union(parts.iter().map(GadgetTree::from_repr).collect::<Result<_>>()?)
            }
            TreeRepr::Slice { of, lo, hi } => GadgetTree::slice(GadgetTree::from_repr(of)?, lo.clone(), hi.clone()),
            TreeRepr::Power { of, m } => GadgetTree::power(GadgetTree::from_repr(of)?, *m),
        }
    }
}

/// Serialisable form of a [`GadgetTree`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TreeRepr {
    Leaf {
        gadget: Gadget,
    },
    Union {
        parts: Vec<TreeRepr>,
    },
    Slice {
        of: Box<TreeRepr>,
        #[serde(with = "wire")]
        lo: Rational,
        #[serde(with = "wire")]
        hi: Rational,
    },
    Power {
        of: Box<TreeRepr>,
        m: u64,
    },
}

/// Band `inner` taken inside band `outer`.
fn compose(inner: &(Rational, Rational), outer: &(Rational, Rational)) -> (Rational, Rational) {
    let w = &outer.1 - &outer.0;
    (&outer.0 + &inner.0 * &w, &outer.0 + &inner.1 * &w)
}

// Position and width of a digit string in the nested lexicographic code.
fn arithmetic_code<'a>(of: &GadgetTree, ds: impl Iterator<Item = &'a ColumnAddr>) -> (Rational, Rational) {
    let mut pos = Rational::zero();
    let mut w = Rational::one();
    for d in ds {
        pos += &w * of.cum_weight(d);
        w *= of.rel_weight(d);
    }
    (pos, w)
}

fn single_slot(of: &GadgetTree, m: u64, ds: &[ColumnAddr], k: usize) -> (Rational, Rational) {
    let (pos, w) = arithmetic_code(of, ds[..k].iter().chain(ds[k + 1..].iter()));
    let mr = Rational::from_integer(m.into());
    let base = Rational::from_integer(k.into());
    ((&base + &pos) / &mr, (&base + &pos + w) / &mr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::explicit::{cut_gadget, m_fold_independent};
    use crate::rational::rat;

    fn two_column() -> Gadget {
        Gadget::new(vec![
            Column::new(Interval::new(rat(0, 1), rat(1, 2)).unwrap().split_equal(2)).unwrap(),
            Column::new(Interval::new(rat(1, 2), rat(1, 1)).unwrap().split_equal(4)).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn power_matches_explicit_m_fold() {
        let g = two_column();
        for m in 1..=4 {
            let explicit = m_fold_independent(&g, m).unwrap();
            let tree = GadgetTree::power(GadgetTree::leaf(g.clone()), m as u64).unwrap();
            assert_eq!(tree.materialize(1 << 12).unwrap(), explicit, "m = {m}");
            assert_eq!(tree.width(), &explicit.width());
        }
    }

    #[test]
    fn nested_structure_matches_explicit() {
        let g = two_column();
        let parts = cut_gadget(&g, &[rat(1, 3), rat(2, 3)]).unwrap();
        let lo = GadgetTree::slice(GadgetTree::leaf(g.clone()), rat(0, 1), rat(1, 3)).unwrap();
        assert_eq!(lo.materialize(16).unwrap(), parts[0]);
        let p2 = m_fold_independent(&parts[1], 2).unwrap();
        let t = GadgetTree::power(
            GadgetTree::slice(GadgetTree::leaf(g.clone()), rat(1, 3), rat(1, 1)).unwrap(),
            2,
        )
        .unwrap();
        assert_eq!(t.materialize(16).unwrap(), p2);
        let explicit = crate::gadget::explicit::Gadget::union(&[&parts[0], &p2]).unwrap();
        let u = GadgetTree::union(vec![lo, t]).unwrap();
        let outer = GadgetTree::power(u.clone(), 2).unwrap();
        assert_eq!(outer.materialize(1000).unwrap(), m_fold_independent(&explicit, 2).unwrap());
        assert_eq!(u.materialize(100).unwrap(), explicit);
    }

    #[test]
    fn locate_inverts_level_interval() {
        let g = two_column();
        let u = GadgetTree::union(vec![
            GadgetTree::slice(GadgetTree::leaf(g.clone()), rat(0, 1), rat(1, 2)).unwrap(),
            GadgetTree::power(GadgetTree::slice(GadgetTree::leaf(g), rat(1, 2), rat(1, 1)).unwrap(), 2).unwrap(),
        ])
        .unwrap();
        let t = GadgetTree::power(u, 3).unwrap();
        for a in t.columns(10_000).unwrap().iter().step_by(37) {
            for lvl in 0..t.height(a) {
                let iv = t.level_interval(a, lvl);
                let x = &iv.left + iv.width() * rat(2, 7);
                let loc = t.locate(&x).unwrap();
                assert_eq!(&loc.addr, a);
                assert_eq!(loc.level, lvl);
                assert_eq!(loc.rel, rat(2, 7));
            }
        }
    }

    #[test]
    fn column_at_inverts_cum_weight() {
        let g = two_column();
        let t = GadgetTree::power(GadgetTree::leaf(g), 3).unwrap();
        for a in t.columns(100).unwrap() {
            let (b, r) = t.column_at(&t.cum_weight(&a));
            assert_eq!(a, b);
            assert_eq!(r, rat(0, 1));
        }
        let total: Rational = t.columns(100).unwrap().iter().map(|a| t.rel_weight(a)).sum();
        assert_eq!(total, rat(1, 1));
    }

    #[test]
    fn repr_round_trip() {
        let t = GadgetTree::power(GadgetTree::leaf(two_column()), 2).unwrap();
        let s = serde_json::to_string(&t.to_repr()).unwrap();
        let back = GadgetTree::from_repr(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back.materialize(100).unwrap(), t.materialize(100).unwrap());
    }
}
