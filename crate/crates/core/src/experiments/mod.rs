//! Seeded end-to-end experiments and the artifact bundle.

mod adversary;
pub mod criteria;
mod bundle;

pub use adversary::{
    build_adversary, build_adversary_to, compression_oscillation, ratio_curve, AdversaryTrace, Checkpoint, OscillationReport, PhaseKind,
    PhaseRecord,
};
pub use bundle::{
    compression_csv, determinism, render, render_suite, run_all, write_bundle, Artifacts, Suite, Summary, COMPRESS_HEADER,
    SUMMARY_SCHEMA_VERSION,
};

use crate::construction::SigmaFunction;
use crate::error::{Error, Result};
use crate::rational::{parse_rational, to_fraction, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Which phases the adversary runs, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePlan {
    /// Odd, even, odd, ...
    Alternating,
    OddOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "ser_fraction", deserialize_with = "de_fraction")]
    pub r: Rational,
    /// `identity`, `log2`, `constant:<c>` or `file:<path>`.
    pub sigma: String,
    /// Construction stages built up front.
    pub stages: u32,
    /// Stages the adversary may add when its trajectory needs room.
    pub max_stage: u32,
    pub horizon: u64,
    /// Horizon of the compression-oscillation run.
    pub compress_horizon: u64,
    pub seed: u64,
    pub plan: PhasePlan,
    /// Candidate extensions drawn per step.
    pub candidates: usize,
    pub checkpoint_every: u64,
    /// Bits of proxy deficiency allowed above `σ(n)`.
    pub slack: u64,
    /// Factors one phase may append before giving up.
    pub phase_budget: usize,
    /// Threshold on the even/odd LZ78 ratio gap.
    #[serde(serialize_with = "ser_fraction", deserialize_with = "de_fraction")]
    pub gap_threshold: Rational,
    #[serde(skip)]
    pub out_dir: Option<std::path::PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            r: Rational::new(1.into(), 64.into()),
            sigma: "identity".into(),
            stages: 3,
            max_stage: 6,
            horizon: 1 << 14,
            compress_horizon: 1 << 15,
            seed: 1,
            plan: PhasePlan::Alternating,
            candidates: 8,
            checkpoint_every: 1 << 10,
            slack: 32,
            phase_budget: 1 << 12,
            gap_threshold: Rational::new(1.into(), 5.into()),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn sigma_fn(&self) -> Result<SigmaFunction> {
        SigmaFunction::parse(&self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        crate::construction::dyadic_exponent(&self.r)?;
        self.sigma_fn()?;
        if self.candidates == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("candidates and checkpoint_every must be positive".into()));
        }
        if self.max_stage < self.stages {
            return Err(Error::Config("max_stage must be at least stages".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn ser_fraction<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&to_fraction(x))
}

fn de_fraction<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
    let s = String::deserialize(d)?;
    parse_rational(&s).map_err(serde::de::Error::custom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn config_round_trip() {
        let c = ExperimentConfig { seed: 9, r: rat(1, 32), ..Default::default() };
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let partial = ExperimentConfig::from_json(r#"{"seed": 4}"#).unwrap();
        assert_eq!(partial.r, rat(1, 64));
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = ExperimentConfig::from_json("{\n  \"seed\": 4,\n  \"r\": }").unwrap_err();
        let Error::Config(m) = e else { panic!() };
        assert!(m.contains("line 3"), "{m}");
        assert!(ExperimentConfig::from_json(r#"{"r": "1/3"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
