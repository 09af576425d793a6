//! Explicit columns and gadgets, with every level interval materialised.

use super::interval::{pairwise_disjoint, Interval};
use crate::error::{Error, Result};
use crate::rational::{to_fraction, Rational};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Largest column count an explicit operation may produce.
pub const EXPLICIT_COLUMN_LIMIT: usize = 1 << 22;

/// A finite sequence of disjoint, equal-width level intervals.
///
/// `origin`, when present, records for each level the index of the column
/// of some reference gadget it was copied from. Operations propagate it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub levels: Vec<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<u32>>,
}

impl Column {
    pub fn new(levels: Vec<Interval>) -> Result<Self> {
        let c = Column { levels, origin: None };
        c.validate()?;
        Ok(c)
    }

    /// A column whose levels are `n` equal consecutive pieces of `iv`.
    pub fn from_split(iv: &Interval, n: u64) -> Column {
        Column { levels: iv.split_equal(n), origin: None }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.levels.first() else {
            return Err(Error::InvalidParameter("column with no levels".into()));
        };
        let w = first.width();
        for l in &self.levels {
            if l.width() != w {
                return Err(Error::InvalidParameter(format!(
                    "unequal level widths {} and {}",
                    to_fraction(&w),
                    to_fraction(&l.width())
                )));
            }
        }
        if !pairwise_disjoint(&self.levels) {
            return Err(Error::InvalidParameter("column levels overlap".into()));
        }
        if let Some(o) = &self.origin {
            if o.len() != self.levels.len() {
                return Err(Error::InvalidParameter("origin length differs from height".into()));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> Rational {
        self.levels[0].width()
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn support_measure(&self) -> Rational {
        self.width() * Rational::from_integer(self.height().into())
    }

    /// Cuts into subcolumns whose widths are `fractions[i] * width`,
    /// taken left to right inside every level.
    pub fn cut(&self, fractions: &[Rational]) -> Vec<Column> {
        let mut out = Vec::with_capacity(fractions.len());
        let mut lo = Rational::zero();
        for f in fractions {
            let hi = &lo + f;
            out.push(Column {
                levels: self.levels.iter().map(|l| l.band(&lo, &hi)).collect(),
                origin: self.origin.clone(),
            });
            lo = hi;
        }
        out
    }

    fn stack_unchecked(&self, top: &Column) -> Column {
        let mut levels = self.levels.clone();
        levels.extend(top.levels.iter().cloned());
        let origin = match (&self.origin, &top.origin) {
            (Some(a), Some(b)) => Some(a.iter().chain(b.iter()).copied().collect()),
            _ => None,
        };
        Column { levels, origin }
    }
}

/// `E1 * E2`: `top` is placed above `bottom`.
pub fn stack_columns(bottom: &Column, top: &Column) -> Result<Column> {
    if bottom.width() != top.width() {
        return Err(Error::IncompatibleColumns {
            left: to_fraction(&bottom.width()),
            right: to_fraction(&top.width()),
        });
    }
    if !pairwise_disjoint(bottom.levels.iter().chain(top.levels.iter())) {
        return Err(Error::IncompatibleGadgets("stacked columns overlap".into()));
    }
    Ok(bottom.stack_unchecked(top))
}

/// A finite collection of disjoint columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gadget {
    pub columns: Vec<Column>,
}

impl Gadget {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let g = Gadget { columns };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidParameter("gadget with no columns".into()));
        }
        for c in &self.columns {
            c.validate()?;
        }
        if !pairwise_disjoint(self.intervals()) {
            return Err(Error::InvalidParameter("gadget columns overlap".into()));
        }
        Ok(())
    }

    pub fn single(column: Column) -> Gadget {
        Gadget { columns: vec![column] }
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn intervals(&self) -> impl Iterator<Item = &Interval> {
        self.columns.iter().flat_map(|c| c.levels.iter())
    }

    /// `w(G)`: the sum of column widths.
    pub fn width(&self) -> Rational {
        self.columns.iter().map(|c| c.width()).sum()
    }

    /// Lebesgue measure of the union of all levels.
    pub fn support_measure(&self) -> Rational {
        self.columns.iter().map(|c| c.support_measure()).sum()
    }

    /// `(w(E) / w(G))` over the columns.
    pub fn distribution(&self) -> Vec<Rational> {
        let w = self.width();
        self.columns.iter().map(|c| c.width() / &w).collect()
    }

    pub fn heights(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.height()).collect()
    }

    pub fn min_height(&self) -> usize {
        self.columns.iter().map(|c| c.height()).min().unwrap_or(0)
    }

    pub fn max_height(&self) -> usize {
        self.columns.iter().map(|c| c.height()).max().unwrap_or(0)
    }

    pub fn has_provenance(&self) -> bool {
        self.columns.iter().all(|c| c.origin.is_some())
    }

    /// Copy in which every level remembers its own column index.
    pub fn mark_provenance(&self) -> Gadget {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| Column { levels: c.levels.clone(), origin: Some(vec![i as u32; c.height()]) })
            .collect();
        Gadget { columns }
    }

    pub fn clear_provenance(&self) -> Gadget {
        let columns = self.columns.iter().map(|c| Column { levels: c.levels.clone(), origin: None }).collect();
        Gadget { columns }
    }

    /// Disjoint union, columns in argument order.
    pub fn union(parts: &[&Gadget]) -> Result<Gadget> {
        let columns: Vec<Column> = parts.iter().flat_map(|g| g.columns.iter().cloned()).collect();
        let g = Gadget { columns };
        if !pairwise_disjoint(g.intervals()) {
            return Err(Error::IncompatibleGadgets("union of overlapping gadgets".into()));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("gadget serialises")
    }

    pub fn from_json(s: &str) -> Result<Gadget> {
        let g: Gadget = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }
}

/// Cuts `g` into copies whose widths are `probs[i] * w(g)`.
pub fn cut_gadget(g: &Gadget, probs: &[Rational]) -> Result<Vec<Gadget>> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("no probabilities".into()));
    }
    if probs.iter().any(|p| !p.is_positive()) {
        return Err(Error::InvalidDistribution("probabilities must be positive".into()));
    }
    let total: Rational = probs.iter().sum();
    if !total.is_one() {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {}", to_fraction(&total))));
    }
    let mut copies: Vec<Vec<Column>> = vec![Vec::with_capacity(g.columns.len()); probs.len()];
    for c in &g.columns {
        for (i, sub) in c.cut(probs).into_iter().enumerate() {
            copies[i].push(sub);
        }
    }
    Ok(copies.into_iter().map(|columns| Gadget { columns }).collect())
}

/// `U * L`: each column of `upper` gets a full-width copy of `lower` placed on top.
pub fn stack_gadgets(upper: &Gadget, lower: &Gadget) -> Result<Gadget> {
    if upper.width() != lower.width() {
        return Err(Error::IncompatibleGadgets(format!(
            "widths {} and {} differ",
            to_fraction(&upper.width()),
            to_fraction(&lower.width())
        )));
    }
    if !pairwise_disjoint(upper.intervals().chain(lower.intervals())) {
        return Err(Error::IncompatibleGadgets("supports are not disjoint".into()));
    }
    stack_gadgets_unchecked(upper, lower)
}

fn stack_gadgets_unchecked(upper: &Gadget, lower: &Gadget) -> Result<Gadget> {
    let n = upper.columns.len().saturating_mul(lower.columns.len());
    if n > EXPLICIT_COLUMN_LIMIT {
        return Err(Error::BudgetExceeded(format!("stack would have {n} columns")));
    }
    let copies = cut_gadget(lower, &upper.distribution())?;
    let lower_dist = lower.distribution();
    let mut columns = Vec::with_capacity(n);
    for (e, copy) in upper.columns.iter().zip(copies.iter()) {
        for (sub, top) in e.cut(&lower_dist).iter().zip(copy.columns.iter()) {
            columns.push(sub.stack_unchecked(top));
        }
    }
    Ok(Gadget { columns })
}

/// `G^{*(M)}`: cut into `m` equal copies and stack them in order.
pub fn m_fold_independent(g: &Gadget, m: usize) -> Result<Gadget> {
    if m == 0 {
        return Err(Error::InvalidParameter("m-fold with m = 0".into()));
    }
    let n = (g.columns.len() as f64).powi(m as i32);
    if n > EXPLICIT_COLUMN_LIMIT as f64 {
        return Err(Error::BudgetExceeded(format!("{}-fold would have about {n:e} columns", m)));
    }
    let share = Rational::new(1.into(), (m as i64).into());
    let copies = cut_gadget(g, &vec![share; m])?;
    let mut acc = copies[0].clone();
    for c in &copies[1..] {
        acc = stack_gadgets_unchecked(&acc, c)?;
    }
    Ok(acc)
}

/// `sum_D sum_E |lambda(E ∩ D) - lambda(E) lambda(D)|` for `E` in `upsilon`
/// and `D` in `lambda_g`, read from level provenance.
pub fn well_distribution_defect(lambda_g: &Gadget, upsilon: &Gadget) -> Result<Rational> {
    if !upsilon.has_provenance() {
        return Err(Error::CannotEvaluate("levels carry no provenance".into()));
    }
    let d_measure: Vec<Rational> = lambda_g.columns.iter().map(|c| c.support_measure()).collect();
    let total_d: Rational = d_measure.iter().sum();
    let mut defect = Rational::zero();
    for e in &upsilon.columns {
        let mut counts: HashMap<u32, u64> = HashMap::new();
        for &o in e.origin.as_ref().unwrap() {
            if o as usize >= lambda_g.columns.len() {
                return Err(Error::CannotEvaluate(format!("origin {o} is not a column of the reference gadget")));
            }
            *counts.entry(o).or_default() += 1;
        }
        let we = e.width();
        let le = e.support_measure();
        let mut present = Rational::zero();
        for (&d, &cnt) in &counts {
            let inter = &we * Rational::from_integer(cnt.into());
            let prod = &le * &d_measure[d as usize];
            defect += (inter - prod).abs();
            present += &d_measure[d as usize];
        }
        defect += &le * (&total_d - present);
    }
    Ok(defect)
}

/// Sorted level index for point location in an explicit gadget.
#[derive(Clone, Debug)]
pub struct GadgetIndex {
    entries: Vec<(Interval, usize, usize)>,
}

impl GadgetIndex {
    pub fn new(g: &Gadget) -> Self {
        let mut entries: Vec<(Interval, usize, usize)> = g
            .columns
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.levels.iter().enumerate().map(move |(li, l)| (l.clone(), ci, li)))
            .collect();
        entries.sort_by(|a, b| a.0.left.cmp(&b.0.left));
        GadgetIndex { entries }
    }

    /// `(column, level)` of the level containing `x`.
    pub fn locate(&self, x: &Rational) -> Option<(usize, usize)> {
        let i = self.entries.partition_point(|e| e.0.left <= *x);
        if i == 0 {
            return None;
        }
        let (iv, c, l) = &self.entries[i - 1];
        iv.contains(x).then_some((*c, *l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn iv(a: (i64, i64), b: (i64, i64)) -> Interval {
        Interval::new(rat(a.0, a.1), rat(b.0, b.1)).unwrap()
    }

    #[test]
    fn cut_widths() {
        let c = Column::new(vec![iv((0, 1), (3, 4))]).unwrap();
        let g = Gadget::single(c);
        let parts = cut_gadget(&g, &[rat(1, 3), rat(2, 3)]).unwrap();
        assert_eq!(parts[0].width(), rat(1, 4));
        assert_eq!(parts[1].width(), rat(1, 2));
        assert_eq!(parts[0].columns[0].levels[0], iv((0, 1), (1, 4)));
        assert!(matches!(cut_gadget(&g, &[rat(1, 3), rat(1, 3)]), Err(Error::InvalidDistribution(_))));
        assert!(cut_gadget(&g, &[rat(1, 1)]).unwrap()[0] == g);
    }

    #[test]
    fn column_stack_order() {
        let a = Column::new(vec![iv((0, 1), (1, 4))]).unwrap();
        let b = Column::new(vec![iv((1, 2), (3, 4))]).unwrap();
        let s = stack_columns(&a, &b).unwrap();
        assert_eq!(s.levels, vec![iv((0, 1), (1, 4)), iv((1, 2), (3, 4))]);
        let c = Column::new(vec![iv((1, 2), (1, 1))]).unwrap();
        assert!(matches!(stack_columns(&a, &c), Err(Error::IncompatibleColumns { .. })));
    }

    #[test]
    fn stack_gadget_column_count() {
        let u = Gadget::new(vec![
            Column::new(vec![iv((0, 1), (1, 8))]).unwrap(),
            Column::new(vec![iv((1, 8), (1, 4))]).unwrap(),
        ])
        .unwrap();
        let l = Gadget::new(vec![
            Column::new(vec![iv((1, 2), (5, 8))]).unwrap(),
            Column::new(vec![iv((5, 8), (6, 8))]).unwrap(),
        ])
        .unwrap();
        let s = stack_gadgets(&u, &l).unwrap();
        assert_eq!(s.num_columns(), 4);
        assert!(s.columns.iter().all(|c| c.height() == 2));
        assert_eq!(s.support_measure(), u.support_measure() + l.support_measure());
        // First column: left quarter of u's first column, then the matching slice of l.
        assert_eq!(s.columns[0].levels, vec![iv((0, 1), (1, 16)), iv((1, 2), (9, 16))]);
        assert!(matches!(stack_gadgets(&u, &u), Err(Error::IncompatibleGadgets(_))));
    }

    #[test]
    fn m_fold_of_single_column() {
        let g = Gadget::single(Column::from_split(&Interval::unit(), 3));
        let p = m_fold_independent(&g, 4).unwrap();
        assert_eq!(p.num_columns(), 1);
        assert_eq!(p.columns[0].height(), 12);
        assert_eq!(p.support_measure(), rat(1, 1));
        let marked = g.mark_provenance();
        let pm = m_fold_independent(&marked, 4).unwrap();
        assert_eq!(well_distribution_defect(&marked, &pm).unwrap(), rat(0, 1));
    }

    #[test]
    fn defect_needs_provenance() {
        let g = Gadget::single(Column::from_split(&Interval::unit(), 2));
        let p = m_fold_independent(&g, 2).unwrap();
        assert!(matches!(well_distribution_defect(&g, &p), Err(Error::CannotEvaluate(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = Gadget::new(vec![
            Column::new(vec![iv((0, 1), (1, 3)), iv((1, 3), (2, 3))]).unwrap(),
            Column::new(vec![iv((2, 3), (1, 1))]).unwrap(),
        ])
        .unwrap()
        .mark_provenance();
        let s = g.to_json();
        assert!(s.contains("\"num\":\"1\""));
        assert_eq!(Gadget::from_json(&s).unwrap(), g);
    }

    #[test]
    fn index_locates() {
        let g = Gadget::single(Column::from_split(&Interval::unit(), 4));
        let idx = GadgetIndex::new(&g);
        assert_eq!(idx.locate(&rat(3, 8)), Some((0, 1)));
        assert_eq!(idx.locate(&rat(1, 1)), None);
    }
}
