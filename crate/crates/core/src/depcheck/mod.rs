//! Decision procedures for orthant dependence and negative association.
//!
//! All checks are exhaustive over finite search spaces and decide the
//! property exactly. A violated verdict always carries a witness that can be
//! re-evaluated against the distribution; [`CheckResult::revalidate`] does so.

mod orthant;
mod pairs;
mod scaled;
mod upper;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::{JointDist, OrthantMode, Outcome};
use crate::rational::Rational;

pub use orthant::{check_nlod, check_nod, check_nuod, check_orthant};
pub use pairs::{check_na, check_signed_monotone, covariance_of};
pub use upper::{enumerate_upper_sets, UpperSet};

/// Default cap on the threshold grid of an orthant check.
pub const DEFAULT_THRESHOLD_BUDGET: usize = 1 << 22;
/// Default cap on upper-set pairs examined per partition.
pub const DEFAULT_UPPER_SET_PAIR_BUDGET: usize = 10_000_000;
/// Default bound on the coordinate subsets searched for NA.
pub const DEFAULT_MAX_SUBSET_SIZE: usize = 5;

/// Search budgets shared by all checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub thresholds: usize,
    pub upper_set_pairs: usize,
    pub max_subset_size: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            thresholds: DEFAULT_THRESHOLD_BUDGET,
            upper_set_pairs: DEFAULT_UPPER_SET_PAIR_BUDGET,
            max_subset_size: DEFAULT_MAX_SUBSET_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Property {
    Nlod,
    Nuod,
    Nod,
    Na,
    SignedMonotone,
    /// Conditional marginals of a staged model depend only on the own prefix coordinate.
    StageLocality,
    /// Each running score, given its own prefix value, is stochastically
    /// increasing in that value.
    StageMonotonicity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
}

/// Failure of the orthant inequality at `thresholds`: `lhs > rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthantWitness {
    pub thresholds: Outcome,
    pub mode: OrthantMode,
    pub lhs: Rational,
    pub rhs: Rational,
}

/// Two monotone indicators on disjoint blocks with positive covariance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonePairWitness {
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub u1: UpperSet,
    pub u2: UpperSet,
    pub covariance: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Orthant(OrthantWitness),
    MonotonePair(MonotonePairWitness),
    /// A conditional law of stage `stage` (1-based) given `prefix` fails.
    Stage {
        stage: usize,
        prefix: Outcome,
        inner: Box<Witness>,
    },
    /// Coordinate `coord` at stage `stage` has different conditional laws
    /// under two prefixes that agree in that coordinate.
    StageLocality {
        stage: usize,
        coord: usize,
        prefix_a: Outcome,
        prefix_b: Outcome,
    },
    /// At stage `stage`, `P(x + X_coord > threshold)` is `lhs` after prefix
    /// `prefix_a` and `rhs < lhs` after `prefix_b`, although `prefix_a` has
    /// the smaller own value.
    StageMonotonicity {
        stage: usize,
        coord: usize,
        prefix_a: Outcome,
        prefix_b: Outcome,
        threshold: Rational,
        lhs: Rational,
        rhs: Rational,
    },
}

/// Enumeration effort spent by a check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub thresholds: u64,
    pub subsets: u64,
    pub partitions: u64,
    pub sign_profiles: u64,
    pub upper_sets: u64,
    pub pairs: u64,
    pub conditionals: u64,
}

impl std::ops::AddAssign for WorkCounters {
    fn add_assign(&mut self, o: Self) {
        self.thresholds += o.thresholds;
        self.subsets += o.subsets;
        self.partitions += o.partitions;
        self.sign_profiles += o.sign_profiles;
        self.upper_sets += o.upper_sets;
        self.pairs += o.pairs;
        self.conditionals += o.conditionals;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub property: Property,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub work: WorkCounters,
}

impl CheckResult {
    pub fn holds(property: Property, work: WorkCounters) -> Self {
        CheckResult {
            property,
            verdict: Verdict::Holds,
            witness: None,
            work,
        }
    }

    pub fn violated(property: Property, witness: Witness, work: WorkCounters) -> Self {
        CheckResult {
            property,
            verdict: Verdict::Violated,
            witness: Some(witness),
            work,
        }
    }

    pub fn is_holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn orthant_witness(&self) -> Option<&OrthantWitness> {
        match &self.witness {
            Some(Witness::Orthant(w)) => Some(w),
            _ => None,
        }
    }

    pub fn pair_witness(&self) -> Option<&MonotonePairWitness> {
        match &self.witness {
            Some(Witness::MonotonePair(w)) => Some(w),
            _ => None,
        }
    }

    /// Recomputes the stored certificate from `d`; `Ok(true)` when it
    /// reproduces exactly and is a strict violation.
    pub fn revalidate(&self, d: &JointDist) -> Result<bool> {
        match &self.witness {
            None => Ok(self.verdict == Verdict::Holds),
            Some(w) => revalidate_witness(w, d),
        }
    }
}

pub(crate) fn revalidate_witness(w: &Witness, d: &JointDist) -> Result<bool> {
    match w {
        Witness::Orthant(w) => {
            let lhs = d.orthant_prob(&w.thresholds, w.mode)?;
            let rhs = orthant::marginal_product(d, &w.thresholds, w.mode);
            Ok(lhs == w.lhs && rhs == w.rhs && lhs > rhs)
        }
        Witness::MonotonePair(w) => {
            let f1 = w.u1.indicator_on(d)?;
            let f2 = w.u2.indicator_on(d)?;
            let cov = covariance_of(d, &f1, &f2)?;
            Ok(cov == w.covariance && cov.is_positive())
        }
        Witness::Stage { .. } | Witness::StageLocality { .. } | Witness::StageMonotonicity { .. } => Err(Error::InvalidSpec(
            "staged witnesses are revalidated against the staged model".into(),
        )),
    }
}
