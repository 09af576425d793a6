//! Cutting and stacking: intervals, columns, gadgets and the operations on them.

pub mod census;
pub mod explicit;
pub mod interval;
pub mod tree;

pub use census::{Census, CensusClass};
pub use explicit::{
    cut_gadget, m_fold_independent, stack_columns, stack_gadgets, well_distribution_defect, Column, Gadget,
    GadgetIndex,
};
pub use interval::Interval;
pub use tree::{ColumnAddr, GadgetTree, Located, Node, Step, TreeRepr};

use crate::certified::Enclosure;
use crate::error::Result;
use crate::rational::Rational;

/// Columns or compositions any single census/defect computation may touch.
pub const DEFAULT_BUDGET: usize = 2_000_000;

/// Well-distribution defect of `src^{*(m)}` against `src`.
///
/// Uses the binomial form when all columns of `src` share a height and an
/// exact sum over compositions otherwise. The result is exact when the
/// heights differ, or when `m <= census::EXACT_POWER_LIMIT` and the census
/// has at most `census::EXACT_CLASS_LIMIT` classes.
pub fn power_defect(src: &GadgetTree, m: u64, budget: usize) -> Result<Enclosure> {
    if src.uniform_height().is_some() {
        let census = src.census(budget)?;
        return census::power_defect_uniform(&census, src.support_measure(), m);
    }
    let cols = src.columns(budget)?;
    let weights: Vec<Rational> = cols.iter().map(|a| src.rel_weight(a)).collect();
    let heights: Vec<u128> = cols.iter().map(|a| src.height(a)).collect();
    let d = census::power_defect_compositions(&weights, &heights, src.width(), m, budget)?;
    Ok(Enclosure::exact(d))
}
