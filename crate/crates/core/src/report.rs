//! Machine-readable reports of checks and scenario runs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Budgets;
use crate::depcheck::CheckResult;
use crate::montecarlo::Estimate;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    pub budgets: Budgets,
    #[serde(default)]
    pub parameters: serde_json::Value,
}

/// A stated value compared with the computed one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub claim: String,
    pub expected: String,
    pub observed: String,
    pub matched: bool,
}

/// Everything a run computed; identical inputs give identical results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub exact: BTreeMap<String, Rational>,
    pub checks: BTreeMap<String, CheckResult>,
    pub estimates: BTreeMap<String, Estimate>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    pub inputs: Inputs,
    pub results: Results,
    pub verdict: ReportVerdict,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdict == ReportVerdict::Pass
    }

    pub fn results_json(&self) -> String {
        serde_json::to_string(&self.results).expect("results serialize")
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &Comparison> {
        self.results.comparisons.iter().filter(|c| !c.matched)
    }
}

/// Accumulates results and timings for one run.
#[derive(Debug, Default)]
pub struct Recorder {
    results: Results,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn exact(&mut self, key: impl Into<String>, v: Rational) {
        self.results.exact.insert(key.into(), v);
    }

    pub fn check(&mut self, key: impl Into<String>, r: CheckResult) {
        self.results.checks.insert(key.into(), r);
    }

    pub fn estimate(&mut self, key: impl Into<String>, e: Estimate) {
        self.results.estimates.insert(key.into(), e);
    }

    pub fn compare(&mut self, claim: impl Into<String>, expected: impl Display, observed: impl Display, matched: bool) {
        self.results.comparisons.push(Comparison {
            claim: claim.into(),
            expected: expected.to_string(),
            observed: observed.to_string(),
            matched,
        });
    }

    pub fn expect_eq<T: Display + PartialEq>(&mut self, claim: impl Into<String>, expected: T, observed: T) {
        let matched = expected == observed;
        self.compare(claim, expected, observed, matched);
    }

    pub fn expect_true(&mut self, claim: impl Into<String>, observed: bool) {
        self.expect_eq(claim, true, observed);
    }

    pub fn time<T>(&mut self, label: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        *self.timings.entry(label.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }

    pub fn all_matched(&self) -> bool {
        self.results.comparisons.iter().all(|c| c.matched)
    }

    pub fn finish(self, command: impl Into<String>, anchor: Option<String>, inputs: Inputs, pass: bool) -> Report {
        Report {
            command: command.into(),
            anchor,
            inputs,
            results: self.results,
            verdict: if pass { ReportVerdict::Pass } else { ReportVerdict::Fail },
            timings: self.timings,
        }
    }
}
