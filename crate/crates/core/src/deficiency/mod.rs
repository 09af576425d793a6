//! Computable stand-ins for complexity and randomness deficiency.
//!
//! Codelengths of an injective coder replace monotone complexity, so every
//! deficiency here is a proxy value, never the true one.

mod lz78;
mod supermartingale;

pub use lz78::{pointer_bits, Lz78, Lz78Parser};
pub use supermartingale::{
    bounded_increase_select, minimal_elements, random_selection_instance, random_supermartingale,
    supermartingale_check, ConstantMartingale, FnMartingale, InstanceMeasure, Selection, SelectionInstance, Supermartingale,
    SupermartingaleReport, TableMartingale,
};

use crate::certified::{log2, Enclosure, DEFAULT_BITS};
use crate::error::{Error, Result};
use crate::gadget::GadgetTree;
use crate::rational::{pow2, to_fraction, Rational};
use crate::solovay::{bits_to_string, Bits};
use crate::symbolic::{cylinder_measure, SymbolTable};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// An injective binary coder.
pub trait Compressor {
    fn name(&self) -> &'static str;
    fn encode(&self, x: &[u8]) -> Bits;
    fn decode(&self, code: &[u8]) -> Result<Bits>;
    fn codelength(&self, x: &[u8]) -> u64 {
        self.encode(x).len() as u64
    }
    /// `codelength(x[..=t])` for every `t`.
    fn prefix_codelengths(&self, x: &[u8]) -> Vec<u64> {
        (1..=x.len()).map(|t| self.codelength(&x[..t])).collect()
    }
}

/// Exact cylinder probabilities `P(x)`.
pub trait Measure {
    fn prob(&self, x: &[u8]) -> Result<Rational>;

    /// `P(b | x)`, or `None` when `P(x) = 0`.
    fn conditional(&self, x: &[u8], b: u8) -> Result<Option<Rational>> {
        let px = self.prob(x)?;
        if px.is_zero() {
            return Ok(None);
        }
        let mut xb = x.to_vec();
        xb.push(b);
        Ok(Some(self.prob(&xb)? / px))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Uniform;

impl Measure for Uniform {
    fn prob(&self, x: &[u8]) -> Result<Rational> {
        Ok(pow2(-(x.len() as i64)))
    }
}

/// I.i.d. bits with `P(1) = p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bernoulli {
    pub p: Rational,
}

impl Bernoulli {
    pub fn new(p: Rational) -> Result<Bernoulli> {
        if p.is_negative() || p > Rational::one() {
            return Err(Error::InvalidParameter(format!("bias {} outside [0,1]", to_fraction(&p))));
        }
        Ok(Bernoulli { p })
    }
}

impl Measure for Bernoulli {
    fn prob(&self, x: &[u8]) -> Result<Rational> {
        let q = Rational::one() - &self.p;
        let ones = x.iter().filter(|&&b| b == 1).count() as i32;
        let zeros = x.len() as i32 - ones;
        Ok(num_traits::pow(self.p.clone(), ones as usize) * num_traits::pow(q, zeros as usize))
    }
}

/// Cylinder measure of a gadget's names. Not normalized: the total is the
/// support measure of the levels with enough room below the top.
pub struct GadgetMeasure<'a> {
    pub tree: &'a GadgetTree,
    pub table: &'a SymbolTable,
    pub limit: usize,
}

impl Measure for GadgetMeasure<'_> {
    fn prob(&self, x: &[u8]) -> Result<Rational> {
        cylinder_measure(self.tree, self.table, x, self.limit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeficiencyRecord {
    pub x: String,
    pub len: usize,
    pub neg_log2_p: Enclosure,
    pub codelength: u64,
    /// `-log2 P(x) - codelength(x)`.
    pub deficiency: Enclosure,
}

/// `-log2 P(x) - codelength(x)`, exact when `P(x)` is a power of two.
pub fn proxy_deficiency(x: &[u8], measure: &dyn Measure, compressor: &dyn Compressor) -> Result<DeficiencyRecord> {
    let p = measure.prob(x)?;
    if !p.is_positive() {
        return Err(Error::UndefinedDeficiency(format!("P({}) = 0", bits_to_string(x))));
    }
    let neg = log2(&p, DEFAULT_BITS).neg();
    let codelength = compressor.codelength(x);
    let deficiency = neg.sub(&Enclosure::exact(Rational::from_integer(BigInt::from(codelength))));
    Ok(DeficiencyRecord { x: bits_to_string(x), len: x.len(), neg_log2_p: neg, codelength, deficiency })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncompressibilityCount {
    pub n: u32,
    pub m: u32,
    /// Strings of length `n` with codelength `< n - m`.
    pub count: u64,
    /// `2^{n-m}`.
    pub bound: u64,
    pub holds: bool,
}

/// Largest `n` enumerated by default.
pub const ENUMERATION_BUDGET: u32 = 20;

/// `hist[k]` = number of length-`n` strings with codelength `k`.
pub fn codelength_histogram(compressor: &dyn Compressor, n: u32, budget: u32) -> Result<Vec<u64>> {
    if n > budget {
        return Err(Error::EnumerationBudget(format!("n = {n} exceeds {budget}")));
    }
    let mut hist = Vec::new();
    let mut x = vec![0u8; n as usize];
    for v in 0u64..(1u64 << n) {
        for (i, b) in x.iter_mut().enumerate() {
            *b = ((v >> (n as usize - 1 - i)) & 1) as u8;
        }
        let k = compressor.codelength(&x) as usize;
        if hist.len() <= k {
            hist.resize(k + 1, 0);
        }
        hist[k] += 1;
    }
    Ok(hist)
}

pub fn incompressibility_count(compressor: &dyn Compressor, n: u32, m: u32) -> Result<IncompressibilityCount> {
    let hist = codelength_histogram(compressor, n, ENUMERATION_BUDGET)?;
    Ok(count_from_histogram(&hist, n, m))
}

/// Every `m` in `0..=n` from one sweep.
pub fn incompressibility_table(compressor: &dyn Compressor, n: u32) -> Result<Vec<IncompressibilityCount>> {
    let hist = codelength_histogram(compressor, n, ENUMERATION_BUDGET)?;
    Ok((0..=n).map(|m| count_from_histogram(&hist, n, m)).collect())
}

fn count_from_histogram(hist: &[u64], n: u32, m: u32) -> IncompressibilityCount {
    let cut = n.saturating_sub(m) as usize;
    let count = hist.iter().take(cut).sum();
    let bound = if m >= n { 1 } else { 1u64 << (n - m) };
    IncompressibilityCount { n, m, count, bound, holds: count < bound }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionPenalty {
    pub b_len: usize,
    pub x_len: usize,
    /// `codelength(x) - codelength(bx) - 2 log2 l(b)`, with the log term
    /// taken as 0 for empty `b`.
    pub c_emp: Enclosure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionReport {
    pub cases: Vec<ExtensionPenalty>,
    /// Index of the case with the largest upper endpoint.
    pub argmax: Option<usize>,
}

impl ExtensionReport {
    pub fn max_upper(&self) -> Option<&Rational> {
        self.argmax.map(|i| &self.cases[i].c_emp.hi)
    }
}

pub fn extension_penalty(compressor: &dyn Compressor, b: &[u8], x: &[u8]) -> ExtensionPenalty {
    let mut bx = b.to_vec();
    bx.extend_from_slice(x);
    let diff = compressor.codelength(x) as i64 - compressor.codelength(&bx) as i64;
    let mut c = Enclosure::exact(Rational::from_integer(BigInt::from(diff)));
    if !b.is_empty() {
        let l = log2(&Rational::from_integer(BigInt::from(b.len())), DEFAULT_BITS);
        c = c.sub(&l.scale(&Rational::from_integer(2.into())));
    }
    ExtensionPenalty { b_len: b.len(), x_len: x.len(), c_emp: c }
}

pub fn extension_penalty_check(compressor: &dyn Compressor, corpus: &[(Bits, Bits)]) -> ExtensionReport {
    let cases: Vec<ExtensionPenalty> = corpus.iter().map(|(b, x)| extension_penalty(compressor, b, x)).collect();
    let argmax = (0..cases.len()).max_by(|&i, &j| cases[i].c_emp.hi.cmp(&cases[j].c_emp.hi));
    ExtensionReport { cases, argmax }
}
