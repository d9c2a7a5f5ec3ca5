//! Named end-to-end experiments.
//!
//! Each scenario id is bound in `catalog.json` to a claim, its parameters
//! and the stated values; the procedures here build the models, run the
//! checks and compare.

mod procedures;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Budgets;
use crate::error::{Error, Result};
use crate::report::{Inputs, Recorder, Report};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_REPS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    HuberLimit,
    RrGeneralNa,
    RrBinomialNa,
    RrChessNa,
    RandomSumFootball,
    KnockoutRandomNa,
    KnockoutFixedNod,
    #[serde(rename = "counterexample-3-1")]
    Counterexample31,
    #[serde(rename = "counterexample-3-2")]
    Counterexample32,
    StagedPreservation,
    ConvolutionNa,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 11] = [
        ScenarioId::HuberLimit,
        ScenarioId::RrGeneralNa,
        ScenarioId::RrBinomialNa,
        ScenarioId::RrChessNa,
        ScenarioId::RandomSumFootball,
        ScenarioId::KnockoutRandomNa,
        ScenarioId::KnockoutFixedNod,
        ScenarioId::Counterexample31,
        ScenarioId::Counterexample32,
        ScenarioId::StagedPreservation,
        ScenarioId::ConvolutionNa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::HuberLimit => "huber-limit",
            ScenarioId::RrGeneralNa => "rr-general-na",
            ScenarioId::RrBinomialNa => "rr-binomial-na",
            ScenarioId::RrChessNa => "rr-chess-na",
            ScenarioId::RandomSumFootball => "random-sum-football",
            ScenarioId::KnockoutRandomNa => "knockout-random-na",
            ScenarioId::KnockoutFixedNod => "knockout-fixed-nod",
            ScenarioId::Counterexample31 => "counterexample-3-1",
            ScenarioId::Counterexample32 => "counterexample-3-2",
            ScenarioId::StagedPreservation => "staged-preservation",
            ScenarioId::ConvolutionNa => "convolution-na",
        }
    }

    pub fn entry(self) -> &'static CatalogEntry {
        &catalog()[self.as_str()]
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CatalogEntry {
    pub anchor: String,
    pub params: serde_json::Value,
    pub expected: serde_json::Value,
}

impl CatalogEntry {
    pub fn param<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        field(&self.params, key)
    }

    pub fn expected<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        field(&self.expected, key)
    }
}

fn field<T: DeserializeOwned>(v: &serde_json::Value, key: &str) -> Result<T> {
    let x = v
        .get(key)
        .ok_or_else(|| Error::InvalidSpec(format!("catalog field {key:?} is missing")))?;
    serde_json::from_value(x.clone()).map_err(|e| Error::InvalidSpec(format!("catalog field {key:?}: {e}")))
}

pub fn catalog() -> &'static BTreeMap<String, CatalogEntry> {
    static CATALOG: OnceLock<BTreeMap<String, CatalogEntry>> = OnceLock::new();
    CATALOG.get_or_init(|| serde_json::from_str(include_str!("catalog.json")).expect("embedded catalog parses"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub reps: u64,
    pub budgets: Budgets,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: DEFAULT_SEED,
            reps: DEFAULT_REPS,
            budgets: Budgets::default(),
        }
    }
}

/// Runs a scenario; the report passes iff every stated value is reproduced.
pub fn run_scenario(id: ScenarioId, opts: &RunOptions) -> Result<Report> {
    let entry = id.entry();
    let mut rec = Recorder::new();
    rec.time("total", |rec| procedures::run(id, entry, opts, rec))?;
    let pass = rec.all_matched();
    let inputs = Inputs {
        config_sha256: None,
        seed: Some(opts.seed),
        reps: (id == ScenarioId::HuberLimit).then_some(opts.reps),
        budgets: opts.budgets,
        parameters: entry.params.clone(),
    };
    Ok(rec.finish(format!("scenario {id}"), Some(entry.anchor.clone()), inputs, pass))
}
