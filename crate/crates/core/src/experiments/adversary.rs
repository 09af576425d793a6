//! A trajectory name built phase by phase through the staged construction.
//!
//! The trajectory starts at the base of the stage-0 `pi` column. Whenever
//! the column it walks is finished, that column becomes the first factor of
//! a column one stage up, and the walk continues with further factors of
//! that stage, each a column of `pi_{s-1} ∪ delta''_s`. Odd phases append
//! low-frequency factors until the running frequency of ones is at most
//! `2r`; even phases route through `delta''` until it is at least `1/16`,
//! preferring the candidate that LZ78 compresses worst.
//!
//! `P(x)` is bounded below by the mass of the points that follow the same
//! factor choices: `1/R_s` per embedding and the relative weight of every
//! appended factor. So the recorded deficiency is an upper bound on
//! `-log2 P(x) - LZ78(x)`.

use super::{ExperimentConfig, PhasePlan};
use crate::certified::{log2, Enclosure, DEFAULT_BITS};
use crate::construction::{ConstructionConfig, ConstructionState};
use crate::deficiency::Lz78Parser;
use crate::error::{Error, Result};
use crate::gadget::{ColumnAddr, GadgetTree, Node};
use crate::rational::{rat, to_decimal, Rational};
use crate::solovay::bits_to_string;
use crate::symbolic::{PartitionSpec, SymbolTable};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Init,
    Odd,
    Even,
}

impl PhaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseKind::Init => "init",
            PhaseKind::Odd => "odd",
            PhaseKind::Even => "even",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: u64,
    pub phase_index: u32,
    pub phase: PhaseKind,
    pub stage: u32,
    pub ones: u64,
    pub lz78_bits: u64,
    /// Upper bound on `-log2 P(x)`.
    #[serde(skip)]
    pub neg_log2_mass: Rational,
    /// Upper bound on the proxy deficiency.
    #[serde(skip)]
    pub deficiency: Rational,
    /// `σ(n) + slack`.
    pub bound: u128,
}

impl Checkpoint {
    pub fn frequency(&self) -> Rational {
        rat(self.ones as i64, self.n as i64)
    }

    pub fn ratio(&self) -> Rational {
        rat(self.lz78_bits as i64, self.n as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseRecord {
    pub index: u32,
    pub kind: PhaseKind,
    pub start: u64,
    pub end: u64,
    pub stage: u32,
    pub factors: usize,
    pub target_reached: bool,
}

#[derive(Clone, Debug)]
pub struct AdversaryTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub phases: Vec<PhaseRecord>,
    pub prefix: Vec<u8>,
    /// `R_s` of every stage the run used.
    pub fold_counts: Vec<u64>,
}

impl AdversaryTrace {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "phase_index",
            "phase",
            "stage",
            "ones",
            "frequency",
            "lz78_bits",
            "lz78_ratio",
            "neg_log2_mass",
            "proxy_deficiency",
            "bound",
        ])?;
        for c in &self.checkpoints {
            w.write_record([
                c.n.to_string(),
                c.phase_index.to_string(),
                c.phase.as_str().to_string(),
                c.stage.to_string(),
                c.ones.to_string(),
                to_decimal(&c.frequency(), 6),
                c.lz78_bits.to_string(),
                to_decimal(&c.ratio(), 6),
                to_decimal(&c.neg_log2_mass, 3),
                to_decimal(&c.deficiency, 3),
                c.bound.to_string(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn phases_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "kind", "start", "end", "stage", "factors", "target_reached"])?;
        for p in &self.phases {
            w.write_record([
                p.index.to_string(),
                p.kind.as_str().to_string(),
                p.start.to_string(),
                p.end.to_string(),
                p.stage.to_string(),
                p.factors.to_string(),
                p.target_reached.to_string(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Where the walk is: `completed` factors of the current stage-`stage`
/// column are behind it.
#[derive(Clone, Debug)]
struct Cursor {
    stage: u32,
    completed: u64,
    neg_log2_mass: Enclosure,
}

struct Factor {
    stage: u32,
    symbols: Vec<u8>,
    cost: Enclosure,
}

struct World<'a> {
    cfg: &'a ExperimentConfig,
    st: ConstructionState,
    table: SymbolTable,
}

impl World<'_> {
    fn ensure_stage(&mut self, s: u32) -> Result<()> {
        while self.st.stage() < s {
            if self.st.stage() + 1 > self.cfg.max_stage {
                return Err(Error::AdversaryBudget(format!(
                    "trajectory needs stage {s}, above max_stage {}",
                    self.cfg.max_stage
                )));
            }
            self.st.step()?;
        }
        Ok(())
    }

    fn fold(&self, s: u32) -> u64 {
        self.st.records[s as usize].r_s
    }

    /// Moves the cursor up while its column is finished.
    fn settle(&mut self, c: &mut Cursor) -> Result<()> {
        while c.stage == 0 || c.completed == self.fold(c.stage) {
            let next = c.stage + 1;
            self.ensure_stage(next)?;
            let r = self.fold(next);
            c.neg_log2_mass = c.neg_log2_mass.add(&log2(&Rational::from_integer(BigInt::from(r)), DEFAULT_BITS));
            c.stage = next;
            c.completed = 1;
        }
        Ok(())
    }

    fn factor(&self, source: &GadgetTree, stage: u32, addr: &ColumnAddr) -> Factor {
        let symbols = self.table.column_name(source, addr);
        let cost = log2(&source.rel_weight(addr), DEFAULT_BITS).neg();
        Factor { stage, symbols, cost }
    }

    fn natural(&self, stage: u32, rng: &mut ChaCha8Rng) -> Result<Factor> {
        let source = self.st.source(stage)?;
        let addr = source.sample_column(rng);
        Ok(self.factor(&source, stage, &addr))
    }

    /// A column of `delta''_s`, the second member of the stage source.
    fn routed(&self, stage: u32, rng: &mut ChaCha8Rng) -> Result<Factor> {
        let source = self.st.source(stage)?;
        let Node::Union(parts) = source.node() else {
            return Err(Error::InvalidParameter("stage source is not a union".into()));
        };
        let inner = parts[1].sample_column(rng);
        Ok(self.factor(&source, stage, &ColumnAddr::Union(1, Box::new(inner))))
    }

    fn advance(&mut self, c: &mut Cursor, f: &Factor) -> Result<()> {
        debug_assert_eq!(c.stage, f.stage);
        c.completed += 1;
        c.neg_log2_mass = c.neg_log2_mass.add(&f.cost);
        self.settle(c)
    }
}

struct Walk {
    prefix: Vec<u8>,
    ones: u64,
    parser: Lz78Parser,
    checkpoints: Vec<Checkpoint>,
}

impl Walk {
    fn n(&self) -> u64 {
        self.prefix.len() as u64
    }
}

fn checkpoint(
    cfg: &ExperimentConfig,
    sigma: &crate::construction::SigmaFunction,
    walk: &Walk,
    cursor: &Cursor,
    phase_index: u32,
    phase: PhaseKind,
) -> Result<Checkpoint> {
    let n = walk.n();
    let lz = walk.parser.codelength();
    let deficiency = &cursor.neg_log2_mass.hi - Rational::from_integer(BigInt::from(lz));
    let s = sigma.eval(n as u128).ok_or_else(|| Error::InvalidParameter(format!("sigma undefined at {n}")))?;
    let bound = s + cfg.slack as u128;
    if deficiency > Rational::from_integer(BigInt::from(bound)) {
        return Err(Error::CertificateViolation(format!(
            "proxy deficiency above sigma(n) + slack at n = {n}; prefix = {}",
            bits_to_string(&walk.prefix)
        )));
    }
    Ok(Checkpoint {
        n,
        phase_index,
        phase,
        stage: cursor.stage,
        ones: walk.ones,
        lz78_bits: lz,
        neg_log2_mass: cursor.neg_log2_mass.hi.clone(),
        deficiency,
        bound,
    })
}

/// Runs the phases until the prefix reaches `cfg.horizon`.
pub fn build_adversary(cfg: &ExperimentConfig) -> Result<AdversaryTrace> {
    build_adversary_to(cfg, cfg.horizon)
}

pub fn build_adversary_to(cfg: &ExperimentConfig, horizon: u64) -> Result<AdversaryTrace> {
    cfg.validate()?;
    let sigma = cfg.sigma_fn()?;
    let mut st = ConstructionState::new(ConstructionConfig::new(cfg.r.clone(), sigma.clone()), cfg.stages)?;
    st.run_to(cfg.stages)?;
    let part = PartitionSpec::standard(&cfg.r)?;
    let table = SymbolTable::new(&*st.phi(0)?, &part)?;
    let mut world = World { cfg, st, table };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let two_r = &cfg.r * rat(2, 1);

    let pi0: Arc<GadgetTree> = world.st.pis[0].clone();
    let base = ColumnAddr::Leaf(0);
    let start_width = pi0.level_interval(&base, 0).width();
    let mut cursor =
        Cursor { stage: 0, completed: 0, neg_log2_mass: log2(&start_width, DEFAULT_BITS).neg() };
    let mut walk = Walk { prefix: Vec::new(), ones: 0, parser: Lz78Parser::new(), checkpoints: Vec::new() };
    let mut phases = Vec::new();

    let init = world.table.column_name(&pi0, &base);
    let mut done = push_symbols(cfg, &sigma, &mut walk, &cursor, &init, horizon, 0, PhaseKind::Init)?;
    if !done {
        world.settle(&mut cursor)?;
    }
    close_phase(cfg, &sigma, &mut walk, &cursor, 0, PhaseKind::Init)?;
    phases.push(PhaseRecord {
        index: 0,
        kind: PhaseKind::Init,
        start: 0,
        end: walk.n(),
        stage: 0,
        factors: 1,
        target_reached: true,
    });

    let mut k = 1u32;
    while !done {
        let kind = match cfg.plan {
            PhasePlan::OddOnly => PhaseKind::Odd,
            PhasePlan::Alternating if k % 2 == 1 => PhaseKind::Odd,
            PhasePlan::Alternating => PhaseKind::Even,
        };
        let start = walk.n();
        let stage_at_start = cursor.stage;
        let mut factors = 0usize;
        let mut reached = false;
        while !done && !reached {
            if factors >= cfg.phase_budget {
                return Err(Error::AdversaryBudget(format!(
                    "phase {k} ({}) at stage {} appended {factors} factors without reaching its target",
                    kind.as_str(),
                    cursor.stage
                )));
            }
            let ext = match kind {
                PhaseKind::Odd => odd_step(&mut world, &cursor, &two_r, &mut rng, k)?,
                _ => even_step(&mut world, &cursor, &walk, &sigma, horizon, &mut rng, k)?,
            };
            for f in ext {
                // The factor being entered is charged in full from its first symbol.
                let charged = Cursor { neg_log2_mass: cursor.neg_log2_mass.add(&f.cost), ..cursor.clone() };
                done = push_symbols(cfg, &sigma, &mut walk, &charged, &f.symbols, horizon, k, kind)?;
                factors += 1;
                if done {
                    cursor = charged;
                    break;
                }
                world.advance(&mut cursor, &f)?;
            }
            let n = Rational::from_integer(BigInt::from(walk.n()));
            let ones = Rational::from_integer(BigInt::from(walk.ones));
            reached = match kind {
                PhaseKind::Odd => ones <= &two_r * &n,
                _ => ones * rat(16, 1) >= n,
            };
        }
        close_phase(cfg, &sigma, &mut walk, &cursor, k, kind)?;
        phases.push(PhaseRecord {
            index: k,
            kind,
            start,
            end: walk.n(),
            stage: stage_at_start,
            factors,
            target_reached: reached,
        });
        k += 1;
    }

    let fold_counts = world.st.records.iter().map(|r| r.r_s).collect();
    Ok(AdversaryTrace { checkpoints: walk.checkpoints, phases, prefix: walk.prefix, fold_counts })
}

/// Appends symbols up to the horizon, recording a checkpoint at every
/// multiple of `checkpoint_every`. Returns true once the horizon is hit.
#[allow(clippy::too_many_arguments)]
fn push_symbols(
    cfg: &ExperimentConfig,
    sigma: &crate::construction::SigmaFunction,
    walk: &mut Walk,
    cursor: &Cursor,
    symbols: &[u8],
    horizon: u64,
    phase_index: u32,
    phase: PhaseKind,
) -> Result<bool> {
    for &b in symbols {
        if walk.n() >= horizon {
            return Ok(true);
        }
        walk.prefix.push(b);
        walk.ones += u64::from(b);
        walk.parser.push(b);
        if walk.n().is_multiple_of(cfg.checkpoint_every) {
            let c = checkpoint(cfg, sigma, walk, cursor, phase_index, phase)?;
            walk.checkpoints.push(c);
        }
    }
    Ok(walk.n() >= horizon)
}

fn close_phase(
    cfg: &ExperimentConfig,
    sigma: &crate::construction::SigmaFunction,
    walk: &mut Walk,
    cursor: &Cursor,
    phase_index: u32,
    phase: PhaseKind,
) -> Result<()> {
    if walk.n() == 0 || walk.checkpoints.last().is_some_and(|c| c.n == walk.n()) {
        return Ok(());
    }
    let c = checkpoint(cfg, sigma, walk, cursor, phase_index, phase)?;
    walk.checkpoints.push(c);
    Ok(())
}

fn ones(x: &[u8]) -> u64 {
    x.iter().map(|&b| u64::from(b)).sum()
}

/// The admissible natural factor with the fewest ones.
fn odd_step(
    world: &mut World,
    cursor: &Cursor,
    two_r: &Rational,
    rng: &mut ChaCha8Rng,
    k: u32,
) -> Result<Vec<Factor>> {
    const ROUNDS: usize = 4;
    for _ in 0..ROUNDS {
        let mut best: Option<Factor> = None;
        for _ in 0..world.cfg.candidates {
            let f = world.natural(cursor.stage, rng)?;
            let o = ones(&f.symbols);
            let admissible =
                Rational::from_integer(BigInt::from(o)) <= two_r * Rational::from_integer(BigInt::from(f.symbols.len()));
            if admissible && best.as_ref().is_none_or(|b| o < ones(&b.symbols)) {
                best = Some(f);
            }
        }
        if let Some(f) = best {
            return Ok(vec![f]);
        }
    }
    Err(Error::AdversaryBudget(format!(
        "odd phase {k}: no factor with frequency at most 2r at stage {}",
        cursor.stage
    )))
}

/// Candidate `c` takes `c mod 2` natural factors and then a `delta''`
/// factor; the winner maximizes the LZ78 ratio of the extended prefix among
/// candidates that keep the deficiency bound.
fn even_step(
    world: &mut World,
    cursor: &Cursor,
    walk: &Walk,
    sigma: &crate::construction::SigmaFunction,
    horizon: u64,
    rng: &mut ChaCha8Rng,
    k: u32,
) -> Result<Vec<Factor>> {
    let mut best: Option<(Rational, Vec<Factor>)> = None;
    for c in 0..world.cfg.candidates {
        let mut sim = cursor.clone();
        let mut ext = Vec::new();
        for _ in 0..(c % 2) {
            let f = world.natural(sim.stage, rng)?;
            world.advance(&mut sim, &f)?;
            ext.push(f);
        }
        let f = world.routed(sim.stage, rng)?;
        world.advance(&mut sim, &f)?;
        ext.push(f);

        let mut parser = walk.parser.clone();
        let mut n = walk.n();
        for f in &ext {
            for &b in &f.symbols {
                if n >= horizon {
                    break;
                }
                parser.push(b);
                n += 1;
            }
        }
        if n == walk.n() {
            continue;
        }
        let lz = parser.codelength();
        let s = sigma.eval(n as u128).unwrap_or(0) + world.cfg.slack as u128;
        if &sim.neg_log2_mass.hi - Rational::from_integer(BigInt::from(lz)) > Rational::from_integer(BigInt::from(s))
        {
            continue;
        }
        let score = rat(lz as i64, n as i64);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, ext));
        }
    }
    best.map(|(_, e)| e).ok_or_else(|| {
        Error::AdversaryBudget(format!("even phase {k}: no routed candidate within the bound at stage {}", cursor.stage))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub max_even_n: u64,
    pub min_odd_n: u64,
    #[serde(skip)]
    pub max_even_ratio: Rational,
    #[serde(skip)]
    pub min_odd_ratio: Rational,
    /// `max_even_ratio - min_odd_ratio`.
    #[serde(skip)]
    pub gap: Rational,
}

impl OscillationReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "max_even_n": self.max_even_n,
            "max_even_ratio": to_decimal(&self.max_even_ratio, 6),
            "min_odd_n": self.min_odd_n,
            "min_odd_ratio": to_decimal(&self.min_odd_ratio, 6),
            "gap": to_decimal(&self.gap, 6),
        })
    }
}

/// Largest LZ78 ratio over even-phase checkpoints against the smallest
/// over odd-phase ones. The initial phase counts as neither.
pub fn compression_oscillation(trace: &AdversaryTrace) -> Option<OscillationReport> {
    let pick = |kind: PhaseKind| trace.checkpoints.iter().filter(move |c| c.phase == kind);
    let even = pick(PhaseKind::Even).max_by(|a, b| a.ratio().cmp(&b.ratio()).then(b.n.cmp(&a.n)))?;
    let odd = pick(PhaseKind::Odd).min_by(|a, b| a.ratio().cmp(&b.ratio()).then(a.n.cmp(&b.n)))?;
    Some(OscillationReport {
        max_even_n: even.n,
        min_odd_n: odd.n,
        max_even_ratio: even.ratio(),
        min_odd_ratio: odd.ratio(),
        gap: even.ratio() - odd.ratio(),
    })
}

/// `(n, LZ78(x^n) / n)` at the requested prefix lengths.
pub fn ratio_curve(x: &[u8], at: &[usize]) -> Vec<(usize, Rational)> {
    let mut p = Lz78Parser::new();
    let mut out = Vec::new();
    let mut next = at.iter().peekable();
    for (i, &b) in x.iter().enumerate() {
        p.push(b);
        while next.peek().is_some_and(|&&t| t == i + 1) {
            out.push((i + 1, rat(p.codelength() as i64, (i + 1) as i64)));
            next.next();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn small(horizon: u64) -> ExperimentConfig {
        ExperimentConfig { horizon, stages: 2, max_stage: 4, ..Default::default() }
    }

    #[test]
    fn short_horizon_single_checkpoint() {
        let t = build_adversary(&small(40)).unwrap();
        assert_eq!(t.checkpoints.len(), 1);
        assert_eq!(t.checkpoints[0].n, 40);
        assert_eq!(t.prefix, vec![0; 40]);
    }

    #[test]
    fn odd_only_stays_low() {
        let cfg = ExperimentConfig { plan: PhasePlan::OddOnly, ..small(2000) };
        let t = build_adversary(&cfg).unwrap();
        assert_eq!(t.prefix.len(), 2000);
        let bound = &cfg.r * rat(2, 1) + rat(1, 20);
        assert!(t.checkpoints.iter().all(|c| c.frequency() <= bound));
    }

    #[test]
    fn alternating_oscillates_and_replays() {
        let t = build_adversary(&small(2000)).unwrap();
        assert!(t.checkpoints.windows(2).all(|w| w[0].n < w[1].n));
        assert!(t.phases.iter().any(|p| p.kind == PhaseKind::Even));
        let again = build_adversary(&small(2000)).unwrap();
        assert_eq!(t.to_csv().unwrap(), again.to_csv().unwrap());
        assert!(t.checkpoints.iter().all(|c| c.deficiency <= Rational::from_integer(BigInt::from(c.bound))));
        assert!(!t.checkpoints.iter().any(|c| c.neg_log2_mass.is_zero()));
    }

    #[test]
    fn ratio_curves_of_simple_sequences() {
        let zeros = vec![0u8; 1 << 12];
        let at: Vec<usize> = (6..=12).map(|k| 1usize << k).collect();
        let c = ratio_curve(&zeros, &at);
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(c.last().unwrap().1 < rat(1, 5));
        let alt: Vec<u8> = (0..1 << 12).map(|i| (i % 2) as u8).collect();
        let a = ratio_curve(&alt, &[1 << 12])[0].1.clone();
        assert!(a < rat(1, 2) && a > c.last().unwrap().1);
    }
}
