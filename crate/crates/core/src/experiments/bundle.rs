//! Artifact rendering and the batch runner.

use super::criteria::{self, CriterionResult};
use super::{build_adversary_to, compression_oscillation, ExperimentConfig};
use crate::construction::ConstructionState;
use crate::construction::ConstructionConfig;
use crate::deficiency::{incompressibility_table, Compressor, Lz78Parser, Lz78};
use crate::error::{Error, Result};
use crate::rational::{rat, to_decimal, to_fraction};
use crate::solovay::{bits_to_string, derive_nu, kraft_code, LilFamily, RateCertificate, SllnFamily, TestFamily};
use crate::symbolic::{cylinder_distribution, entropy_upper_bound, trajectory_name, PartitionSpec, SymbolTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Build,
    Simulate,
    Tests,
    Compress,
    Adversary,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Build, Suite::Simulate, Suite::Tests, Suite::Compress, Suite::Adversary];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Build => "build",
            Suite::Simulate => "simulate",
            Suite::Tests => "tests",
            Suite::Compress => "compress",
            Suite::Adversary => "adversary",
        }
    }

    /// Criteria evaluated when this suite runs.
    pub fn criteria(self) -> &'static [u32] {
        match self {
            Suite::Build => &[1, 2, 3, 4],
            Suite::Simulate => &[8],
            Suite::Tests => &[5, 6, 7, 9, 10],
            Suite::Compress | Suite::Adversary => &[11],
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// File name to contents, in name order.
pub type Artifacts = BTreeMap<String, Vec<u8>>;

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn construction(cfg: &ExperimentConfig) -> Result<ConstructionState> {
    let mut st = ConstructionState::new(ConstructionConfig::new(cfg.r.clone(), cfg.sigma_fn()?), cfg.stages)?;
    st.run_to(cfg.stages)?;
    Ok(st)
}

pub fn render_suite(cfg: &ExperimentConfig, suite: Suite) -> Result<Artifacts> {
    let mut out = Artifacts::new();
    match suite {
        Suite::Build => {
            let st = construction(cfg)?;
            out.insert("construction.csv".into(), st.summary_csv()?.into_bytes());
            out.insert("construction.json".into(), st.to_json().into_bytes());
            let rows = st
                .check_invariants()
                .into_iter()
                .map(|c| vec![c.stage.to_string(), c.name.to_string(), c.holds.to_string()]);
            out.insert("invariants.csv".into(), csv_bytes(&["stage", "invariant", "holds"], rows)?);
        }
        Suite::Simulate => {
            let st = construction(cfg)?;
            let part = PartitionSpec::standard(&cfg.r)?;
            let table = SymbolTable::new(&*st.phi(0)?, &part)?;
            let pi = st.pi();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let addr = pi.sample_column(&mut rng);
            let len = pi.height(&addr).min(4096) as usize;
            let name = trajectory_name(pi, &table, &addr, 0, len)?;
            let mut ones = 0i64;
            let rows = name.symbols.iter().enumerate().map(|(k, &b)| {
                ones += i64::from(b);
                vec![k.to_string(), b.to_string(), to_decimal(&rat(ones, k as i64 + 1), 6)]
            });
            out.insert("trajectory.csv".into(), csv_bytes(&["step", "symbol", "running_average"], rows)?);

            let s = cfg.stages.min(2);
            let dist = cylinder_distribution(&*st.phi(s)?, &table, 4, 1 << 16)?;
            let rows = dist.iter().map(|(w, p)| vec![s.to_string(), bits_to_string(w), to_fraction(p)]);
            out.insert("cylinders.csv".into(), csv_bytes(&["stage", "word", "measure"], rows)?);

            let mut rows = Vec::new();
            if cfg.r < rat(1, 4) {
                for n in [16u64, 64, 256, 1024, 4096, 10_000] {
                    let b = entropy_upper_bound(&cfg.r, n)?;
                    rows.push(vec![
                        n.to_string(),
                        to_decimal(&b.lhs.lo, 6),
                        to_decimal(&b.lhs.hi, 6),
                        to_decimal(&b.rhs.hi, 6),
                        b.holds.to_string(),
                    ]);
                }
            }
            out.insert("entropy.csv".into(), csv_bytes(&["n", "lhs_lo", "lhs_hi", "rhs", "holds"], rows)?);
        }
        Suite::Tests => {
            let mut rows = Vec::new();
            let families: Vec<(Box<dyn TestFamily>, u32)> = vec![
                (Box::new(SllnFamily::new(rat(1, 4))?), 10),
                (Box::new(SllnFamily::new(rat(1, 2))?), 10),
                (Box::new(LilFamily::new(rat(3, 2))?), 4),
            ];
            for (f, j) in &families {
                for e in RateCertificate::dyadic(f.as_ref(), *j)?.entries {
                    rows.push(vec![
                        f.describe(),
                        to_fraction(&e.delta),
                        e.block.to_string(),
                        e.index.unwrap_or_default(),
                        e.length_floor.to_string(),
                        to_decimal(&e.tail, 12),
                    ]);
                }
            }
            let header = ["family", "delta", "block", "index", "length_floor", "tail"];
            out.insert("rates.csv".into(), csv_bytes(&header, rows)?);

            let f = SllnFamily::new(rat(1, 2))?;
            let nu = derive_nu(&f, 12)?;
            let code = kraft_code(&f, &nu, 16, 1 << 16)?;
            let rows = code.entries.iter().map(|(x, c)| {
                vec![bits_to_string(x), bits_to_string(c), nu.eval(x.len() as u64).to_string()]
            });
            out.insert("kraft.csv".into(), csv_bytes(&["string", "codeword", "nu"], rows)?);

            let mut rows = Vec::new();
            for n in 1..=16 {
                for c in incompressibility_table(&Lz78, n)? {
                    rows.push(vec![
                        c.n.to_string(),
                        c.m.to_string(),
                        c.count.to_string(),
                        c.bound.to_string(),
                        c.holds.to_string(),
                    ]);
                }
            }
            out.insert(
                "incompressibility.csv".into(),
                csv_bytes(&["n", "m", "count", "bound", "holds"], rows)?,
            );
        }
        Suite::Compress => {
            let t = build_adversary_to(cfg, cfg.compress_horizon)?;
            let rows = t.checkpoints.iter().map(|c| {
                vec![c.n.to_string(), c.lz78_bits.to_string(), to_decimal(&c.ratio(), 6), to_decimal(&c.deficiency, 3)]
            });
            out.insert("compression.csv".into(), csv_bytes(&COMPRESS_HEADER, rows)?);
            let osc = compression_oscillation(&t).map(|o| o.to_json()).unwrap_or(serde_json::Value::Null);
            out.insert("oscillation.json".into(), to_pretty(&osc).into_bytes());
        }
        Suite::Adversary => {
            let t = build_adversary_to(cfg, cfg.horizon)?;
            out.insert("adversary.csv".into(), t.to_csv()?.into_bytes());
            out.insert("phases.csv".into(), t.phases_csv()?.into_bytes());
        }
    }
    Ok(out)
}

pub const COMPRESS_HEADER: [&str; 4] = ["prefix_length", "codelength", "ratio", "proxy_deficiency"];

/// Compression curve of an arbitrary string under the uniform measure,
/// sampled every `every` symbols and at the end.
pub fn compression_csv(x: &[u8], every: u64) -> Result<Vec<u8>> {
    let mut p = Lz78Parser::new();
    let mut rows = Vec::new();
    for (i, &b) in x.iter().enumerate() {
        p.push(b);
        let n = i as u64 + 1;
        if n.is_multiple_of(every) || n == x.len() as u64 {
            let cl = p.codelength();
            rows.push(vec![
                n.to_string(),
                cl.to_string(),
                to_decimal(&rat(cl as i64, n as i64), 6),
                (n as i64 - cl as i64).to_string(),
            ]);
        }
    }
    debug_assert_eq!(rows.last().map(|r| r[1].clone()), (!x.is_empty()).then(|| Lz78.codelength(x).to_string()));
    csv_bytes(&COMPRESS_HEADER, rows)
}

fn to_pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

pub fn render(cfg: &ExperimentConfig, suites: &[Suite]) -> Result<Artifacts> {
    let mut out = Artifacts::new();
    for &s in suites {
        out.extend(render_suite(cfg, s)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub suites: Vec<Suite>,
    pub criteria: Vec<CriterionResult>,
    /// Ids of the criteria that failed or could not be evaluated.
    pub failures: Vec<u32>,
    pub artifacts: Vec<String>,
    pub all_pass: bool,
}

impl Summary {
    pub fn to_json(&self) -> String {
        to_pretty(&serde_json::to_value(self).expect("summary serializes"))
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            0
        } else {
            1
        }
    }
}

fn compare(a: &Artifacts, b: &Artifacts) -> (bool, String) {
    let differing: Vec<&str> = a
        .keys()
        .chain(b.keys().filter(|k| !a.contains_key(*k)))
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.as_str())
        .collect();
    let bytes: usize = a.values().map(|v| v.len()).sum();
    if differing.is_empty() {
        (true, format!("{} artifacts, {bytes} bytes identical across two runs", a.len()))
    } else {
        (false, format!("differing artifacts: {}", differing.join(", ")))
    }
}

/// Renders every suite twice and compares the bytes.
pub fn determinism(cfg: &ExperimentConfig) -> Result<CriterionResult> {
    let first = render(cfg, &Suite::ALL)?;
    determinism_against(cfg, &Suite::ALL, &first)
}

fn determinism_against(cfg: &ExperimentConfig, suites: &[Suite], reference: &Artifacts) -> Result<CriterionResult> {
    let again = render(cfg, suites)?;
    let (pass, detail) = compare(reference, &again);
    Ok(CriterionResult { id: 12, name: criteria::name_of(12), pass, detail })
}

fn normalize_suites(only: &[Suite]) -> Vec<Suite> {
    let mut suites = if only.is_empty() { Suite::ALL.to_vec() } else { only.to_vec() };
    suites.sort();
    suites.dedup();
    suites
}

/// Runs the selected suites (all when `only` is empty), evaluates their
/// criteria plus determinism, and writes the bundle to `cfg.out_dir` when
/// set.
pub fn run_all(cfg: &ExperimentConfig, only: &[Suite]) -> Result<(Summary, Artifacts)> {
    cfg.validate()?;
    let suites = normalize_suites(only);
    let artifacts = render(cfg, &suites)?;
    let mut ids: Vec<u32> = suites.iter().flat_map(|s| s.criteria().iter().copied()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut results = Vec::new();
    for id in ids {
        results.push(criteria::evaluate(id, cfg).unwrap_or_else(|e| failed(id, &e)));
    }
    results.push(determinism_against(cfg, &suites, &artifacts).unwrap_or_else(|e| failed(12, &e)));
    let failures: Vec<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    let config = serde_json::from_str(&cfg.to_json()).expect("config is json");
    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        config,
        suites,
        all_pass: failures.is_empty(),
        failures,
        criteria: results,
        artifacts: artifacts.keys().cloned().collect(),
    };
    if let Some(dir) = &cfg.out_dir {
        write_bundle(dir, &artifacts, Some(&summary))?;
    }
    Ok((summary, artifacts))
}

fn failed(id: u32, e: &Error) -> CriterionResult {
    CriterionResult { id, name: criteria::name_of(id), pass: false, detail: format!("error: {e}") }
}

pub fn write_bundle(dir: &Path, artifacts: &Artifacts, summary: Option<&Summary>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in artifacts {
        std::fs::write(dir.join(name), bytes)?;
    }
    if let Some(s) = summary {
        std::fs::write(dir.join("summary.json"), s.to_json())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_parse_and_order() {
        assert_eq!("tests".parse::<Suite>().unwrap(), Suite::Tests);
        assert!("bogus".parse::<Suite>().is_err());
        assert_eq!(normalize_suites(&[Suite::Adversary, Suite::Build, Suite::Build]), vec![Suite::Build, Suite::Adversary]);
        assert_eq!(normalize_suites(&[]).len(), 5);
    }

    #[test]
    fn compression_rows() {
        let x = vec![0u8; 100];
        let text = String::from_utf8(compression_csv(&x, 32).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "prefix_length,codelength,ratio,proxy_deficiency");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("100,"));
    }
}
