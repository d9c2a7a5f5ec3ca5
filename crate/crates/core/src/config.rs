//! Model configuration files and build provenance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::depcheck::Limits;
use crate::error::{Error, Result};
use crate::exactdist::{JointDist, DEFAULT_ATOM_BUDGET};
use crate::montecarlo::TournamentSpec;
use crate::models::{
    binomial_spec, pairs, build_knockout, build_random_sum, build_round_robin, chess_spec, cyclic_spec, Draw, KnockoutSpec,
    PairRewardLaw, RandomSumSpec, RoundRobinSpec, WinMatrix,
};
use crate::rational::Rational;
use crate::table::{FunctionTable, ValueTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialPair {
    pub i: usize,
    pub j: usize,
    pub r: u32,
    pub p: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChessPair {
    pub i: usize,
    pub j: usize,
    pub p_win: Rational,
    pub p_draw: Rational,
}

/// A model description as read from a config file. Per-pair entries
/// override the model-wide defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    RoundRobin(RoundRobinConfig),
    BinomialRr(BinomialConfig),
    ChessRr(ChessConfig),
    Knockout(KnockoutConfig),
    RandomSum(RandomSumConfig),
    Cyclic(CyclicConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRobinConfig {
    pub n: usize,
    pub pairs: Vec<PairRewardLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<ValueTable>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialConfig {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Rational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<BinomialPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChessConfig {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_win: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_draw: Option<Rational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<ChessPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnockoutConfig {
    pub level: u32,
    /// Equal strength when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub win_matrix: Option<WinMatrix>,
    pub draw: Draw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSumConfig {
    pub rounds: Vec<JointDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<FunctionTable>>,
    #[serde(default)]
    pub waive_na_check: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicConfig {
    pub eps: Rational,
}

fn parse_params<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        Error::InvalidSpec(format!("config field `{path}`: {}", e.into_inner()))
    })
}

fn pair_param<T: Clone, P>(
    pairs: &[P],
    key: impl Fn(&P) -> (usize, usize),
    value: impl Fn(&P) -> T,
    default: Option<T>,
    what: &str,
) -> impl Fn(usize, usize) -> Result<T> {
    let table: Vec<((usize, usize), T)> = pairs.iter().map(|p| (key(p), value(p))).collect();
    let what = what.to_string();
    move |i, j| {
        table
            .iter()
            .find(|(k, _)| *k == (i, j))
            .map(|(_, v)| v.clone())
            .or_else(|| default.clone())
            .ok_or_else(|| Error::InvalidSpec(format!("no {what} for pair ({i}, {j})")))
    }
}

fn resolve<T>(n: usize, f: impl Fn(usize, usize) -> Result<T>) -> Result<BTreeMap<(usize, usize), T>> {
    pairs(n).map(|(i, j)| Ok(((i, j), f(i, j)?))).collect()
}

fn check_pairs(n: usize, keys: impl Iterator<Item = (usize, usize)>) -> Result<()> {
    for (i, j) in keys {
        if i >= j || j >= n {
            return Err(Error::InvalidSpec(format!("pair ({i}, {j}) is not a pair i < j < {n}")));
        }
    }
    Ok(())
}

impl ModelConfig {
    /// Parses a config file; errors name the offending field.
    pub fn from_json(s: &str) -> Result<Self> {
        let mut v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| Error::InvalidSpec(format!("config: {e}")))?;
        let model = v
            .as_object_mut()
            .and_then(|o| o.remove("model"))
            .ok_or_else(|| Error::InvalidSpec("config field `model` is missing".into()))?;
        Ok(match model.as_str().unwrap_or_default() {
            "round_robin" => ModelConfig::RoundRobin(parse_params(v)?),
            "binomial_rr" => ModelConfig::BinomialRr(parse_params(v)?),
            "chess_rr" => ModelConfig::ChessRr(parse_params(v)?),
            "knockout" => ModelConfig::Knockout(parse_params(v)?),
            "random_sum" => ModelConfig::RandomSum(parse_params(v)?),
            "cyclic" => ModelConfig::Cyclic(parse_params(v)?),
            other => return Err(Error::InvalidSpec(format!("config field `model`: unknown model {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::RoundRobin(_) => "round_robin",
            ModelConfig::BinomialRr(_) => "binomial_rr",
            ModelConfig::ChessRr(_) => "chess_rr",
            ModelConfig::Knockout(_) => "knockout",
            ModelConfig::RandomSum(_) => "random_sum",
            ModelConfig::Cyclic(_) => "cyclic",
        }
    }

    /// The sampler-level description of this model.
    pub fn to_spec(&self) -> Result<TournamentSpec> {
        Ok(match self {
            ModelConfig::RoundRobin(RoundRobinConfig { n, pairs, utilities }) => {
                let mut rr = RoundRobinSpec::new(*n, pairs.clone())?;
                if let Some(u) = utilities {
                    rr = rr.with_utilities(u.clone());
                }
                TournamentSpec::RoundRobin(rr)
            }
            ModelConfig::BinomialRr(BinomialConfig { n, r, p, pairs }) => {
                check_pairs(*n, pairs.iter().map(|q| (q.i, q.j)))?;
                let rp = pair_param(pairs, |q| (q.i, q.j), |q| (q.r, q.p.clone()), r.zip(p.clone()), "(r, p)");
                let resolved = resolve(*n, rp)?;
                TournamentSpec::RoundRobin(binomial_spec(*n, |i, j| resolved[&(i, j)].clone())?)
            }
            ModelConfig::ChessRr(ChessConfig {
                n,
                p_win,
                p_draw,
                pairs,
            }) => {
                check_pairs(*n, pairs.iter().map(|q| (q.i, q.j)))?;
                let wd = pair_param(
                    pairs,
                    |q| (q.i, q.j),
                    |q| (q.p_win.clone(), q.p_draw.clone()),
                    p_win.clone().zip(p_draw.clone()),
                    "(p_win, p_draw)",
                );
                let resolved = resolve(*n, wd)?;
                TournamentSpec::RoundRobin(chess_spec(*n, |i, j| resolved[&(i, j)].clone())?)
            }
            ModelConfig::Knockout(KnockoutConfig { level, win_matrix, draw }) => {
                if *level == 0 || *level > 16 {
                    return Err(Error::InvalidSpec(format!("unsupported level {level}")));
                }
                let win = win_matrix.clone().unwrap_or_else(|| WinMatrix::equal(1 << level));
                TournamentSpec::Knockout(KnockoutSpec::new(*level, win, draw.clone())?)
            }
            ModelConfig::RandomSum(RandomSumConfig {
                rounds,
                utilities,
                waive_na_check,
            }) => TournamentSpec::RandomSum(RandomSumSpec {
                rounds: rounds.clone(),
                utilities: utilities.clone(),
                waive_na_check: *waive_na_check,
            }),
            ModelConfig::Cyclic(CyclicConfig { eps }) => TournamentSpec::Knockout(cyclic_spec(eps.clone())?),
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Budgets used when building and checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub atoms: usize,
    #[serde(flatten)]
    pub limits: Limits,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            atoms: DEFAULT_ATOM_BUDGET,
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub config_sha256: String,
    pub parameters: ModelConfig,
    pub budgets: Budgets,
    pub na_check_waived: bool,
}

/// A built law together with how it was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOutput {
    #[serde(flatten)]
    pub law: JointDist,
    pub provenance: Provenance,
}

/// Exact law of any tournament model.
pub fn build_spec(spec: &TournamentSpec, budgets: &Budgets) -> Result<JointDist> {
    match spec {
        TournamentSpec::RoundRobin(rr) => build_round_robin(rr, budgets.atoms),
        TournamentSpec::Knockout(k) => build_knockout(k, budgets.atoms),
        TournamentSpec::RandomSum(rs) => build_random_sum(rs, &budgets.limits, budgets.atoms),
        TournamentSpec::Law(d) => Ok(d.clone()),
    }
}

pub fn build_config(config: &ModelConfig, budgets: &Budgets) -> Result<BuildOutput> {
    let law = build_spec(&config.to_spec()?, budgets)?;
    Ok(BuildOutput {
        law,
        provenance: Provenance {
            model: config.name().into(),
            config_sha256: config.hash(),
            parameters: config.clone(),
            budgets: *budgets,
            na_check_waived: matches!(config, ModelConfig::RandomSum(RandomSumConfig { waive_na_check: true, .. })),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_cyclic_counterexample, build_knockout};
    use crate::rational::q;

    #[test]
    fn knockout_config() {
        let c = ModelConfig::from_json(r#"{"model": "knockout", "level": 2, "draw": {"fixed": [0, 1, 2, 3]}}"#).unwrap();
        let out = build_config(&c, &Budgets::default()).unwrap();
        assert_eq!(out.law.len(), 8);
        let k = KnockoutSpec::equal_strength(2, Draw::Fixed(vec![0, 1, 2, 3])).unwrap();
        assert_eq!(out.law, build_knockout(&k, DEFAULT_ATOM_BUDGET).unwrap());
        assert_eq!(out.provenance.model, "knockout");
        assert_eq!(out.provenance.config_sha256.len(), 64);
    }

    #[test]
    fn cyclic_config_and_output_roundtrip() {
        let c = ModelConfig::from_json(r#"{"model": "cyclic", "eps": "0"}"#).unwrap();
        let out = build_config(&c, &Budgets::default()).unwrap();
        assert_eq!(out.law, build_cyclic_counterexample(q(0, 1)).unwrap());
        let text = serde_json::to_string(&out).unwrap();
        let back: BuildOutput = serde_json::from_str(&text).unwrap();
        assert_eq!(back, out);
        // a build file is also a plain law file
        let law: JointDist = serde_json::from_str(&text).unwrap();
        assert_eq!(law.len(), 3);
    }

    #[test]
    fn round_robin_defaults_and_overrides() {
        let c = ModelConfig::from_json(
            r#"{"model": "chess_rr", "n": 3, "p_win": "1/3", "p_draw": "1/3",
                "pairs": [{"i": 0, "j": 1, "p_win": "1", "p_draw": "0"}]}"#,
        )
        .unwrap();
        let TournamentSpec::RoundRobin(rr) = c.to_spec().unwrap() else { panic!() };
        assert_eq!(rr.law(0, 1).unwrap().atoms, vec![(q(1, 1), q(1, 1))]);
        assert_eq!(rr.law(1, 2).unwrap().atoms.len(), 3);

        let c = ModelConfig::from_json(r#"{"model": "binomial_rr", "n": 3, "pairs": [{"i": 0, "j": 1, "r": 2, "p": "1/2"}]}"#).unwrap();
        assert!(matches!(c.to_spec(), Err(Error::InvalidSpec(m)) if m.contains("(0, 2)")));
    }

    #[test]
    fn malformed_rationals_name_the_field() {
        let e = ModelConfig::from_json(r#"{"model": "cyclic", "eps": "1/0"}"#).unwrap_err();
        assert!(e.to_string().contains("`eps`"), "{e}");
        let e = ModelConfig::from_json(
            r#"{"model": "knockout", "level": 2, "draw": "random", "win_matrix": [["0", "1/0"]]}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("win_matrix"), "{e}");
        assert!(ModelConfig::from_json(r#"{"model": "cyclic", "eps": "1/2"}"#).unwrap().to_spec().is_err());
        assert!(ModelConfig::from_json(r#"{"model": "nope"}"#).is_err());
    }

    #[test]
    fn waiver_is_recorded() {
        let c = ModelConfig::from_json(
            r#"{"model": "random_sum", "waive_na_check": true,
                "rounds": [{"n": 2, "atoms": [{"outcome": ["0", "0"], "prob": "1/2"}, {"outcome": ["1", "1"], "prob": "1/2"}]}]}"#,
        )
        .unwrap();
        let out = build_config(&c, &Budgets::default()).unwrap();
        assert!(out.provenance.na_check_waived);
    }
}
