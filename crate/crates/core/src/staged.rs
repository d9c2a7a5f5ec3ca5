//! Multi-stage payoff vectors whose stage laws are given conditionally on
//! the running sum of earlier stages.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::depcheck::{check_orthant, CheckResult, Limits, Property, Witness, WorkCounters};
use crate::error::{Error, Result};
use crate::exactdist::{JointDist, OrthantMode, Outcome};
use crate::models::{Draw, KnockoutSpec};
use crate::rational::Rational;

/// Conditional laws of one stage, keyed by the prefix sum of earlier stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageKernel {
    conditions: BTreeMap<Outcome, JointDist>,
}

impl StageKernel {
    pub fn new<I: IntoIterator<Item = (Outcome, JointDist)>>(conditions: I) -> Self {
        StageKernel {
            conditions: conditions.into_iter().collect(),
        }
    }

    /// Kernel that ignores the prefix.
    pub fn constant(law: JointDist, prefixes: impl IntoIterator<Item = Outcome>) -> Self {
        Self::new(prefixes.into_iter().map(|p| (p, law.clone())))
    }

    pub fn law(&self, prefix: &Outcome) -> Option<&JointDist> {
        self.conditions.get(prefix)
    }

    pub fn conditions(&self) -> impl Iterator<Item = (&Outcome, &JointDist)> {
        self.conditions.iter()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }
}

/// Stage 1 is stored as a kernel with the single prefix `0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct StagedModel {
    n: usize,
    stages: Vec<StageKernel>,
}

#[derive(Serialize, Deserialize)]
struct ConditionRepr {
    prefix: Outcome,
    law: JointDist,
}

#[derive(Serialize, Deserialize)]
struct StageRepr {
    conditions: Vec<ConditionRepr>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    n: usize,
    stages: Vec<StageRepr>,
}

impl From<StagedModel> for ModelRepr {
    fn from(m: StagedModel) -> Self {
        ModelRepr {
            n: m.n,
            stages: m
                .stages
                .into_iter()
                .map(|k| StageRepr {
                    conditions: k
                        .conditions
                        .into_iter()
                        .map(|(prefix, law)| ConditionRepr { prefix, law })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelRepr> for StagedModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let mut stages = Vec::with_capacity(r.stages.len());
        for (k, s) in r.stages.into_iter().enumerate() {
            let mut conditions = BTreeMap::new();
            for c in s.conditions {
                if conditions.insert(c.prefix.clone(), c.law).is_some() {
                    return Err(Error::InvalidSpec(format!(
                        "stage {} lists prefix {:?} twice",
                        k + 1,
                        c.prefix
                    )));
                }
            }
            stages.push(StageKernel { conditions });
        }
        let initial = stages
            .first()
            .and_then(|s| (s.len() == 1).then(|| s.conditions.values().next().cloned()).flatten())
            .ok_or_else(|| Error::InvalidSpec("stage 1 must have exactly one condition".into()))?;
        let prefix = stages[0].conditions.keys().next().cloned();
        if prefix != Some(Outcome::zeros(r.n)) {
            return Err(Error::InvalidSpec("stage 1 must be keyed by the zero prefix".into()));
        }
        StagedModel::new(initial, stages.split_off(1))
    }
}

impl StagedModel {
    /// Validates dimensions and that every reachable prefix has a kernel entry.
    pub fn new(initial: JointDist, kernels: Vec<StageKernel>) -> Result<Self> {
        let n = initial.dim();
        let mut stages = vec![StageKernel::new([(Outcome::zeros(n), initial)])];
        stages.extend(kernels);
        let m = StagedModel { n, stages };
        m.validate(usize::MAX)?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    pub fn initial(&self) -> &JointDist {
        self.stages[0].conditions.values().next().expect("stage 1 has one law")
    }

    /// Kernel of stage `k` (1-based).
    pub fn kernel(&self, k: usize) -> &StageKernel {
        &self.stages[k - 1]
    }

    fn validate(&self, budget: usize) -> Result<()> {
        for (k, s) in self.stages.iter().enumerate() {
            for (p, law) in &s.conditions {
                for dim in [p.len(), law.dim()] {
                    if dim != self.n {
                        return Err(Error::DimensionMismatch {
                            expected: self.n,
                            found: dim,
                        });
                    }
                }
                if law.is_empty() {
                    return Err(Error::InvalidSpec(format!("empty law at stage {}", k + 1)));
                }
            }
        }
        self.reachable(budget).map(|_| ())
    }

    /// Reachable prefixes before each stage, in canonical order.
    pub fn reachable(&self, budget: usize) -> Result<Vec<BTreeSet<Outcome>>> {
        let mut out = Vec::with_capacity(self.stages.len());
        let mut current = BTreeSet::from([Outcome::zeros(self.n)]);
        for (k, s) in self.stages.iter().enumerate() {
            let mut next = BTreeSet::new();
            for p in &current {
                let law = s.law(p).ok_or_else(|| {
                    Error::TableIncomplete(format!("stage {} has no law for prefix {:?}", k + 1, p))
                })?;
                for (x, _) in law.atoms() {
                    next.insert(p.add(x));
                    if next.len() > budget {
                        return Err(Error::AtomBudgetExceeded { budget });
                    }
                }
            }
            out.push(std::mem::replace(&mut current, next));
        }
        Ok(out)
    }
}

/// Checks conditional lower (or upper) orthant dependence of every listed
/// stage law. The first failure in (stage, prefix) order is reported.
pub fn verify_assumption_i(m: &StagedModel, mode: OrthantMode, limits: &Limits) -> Result<CheckResult> {
    let property = match mode {
        OrthantMode::Lower => Property::Nlod,
        OrthantMode::Upper => Property::Nuod,
    };
    let mut work = WorkCounters::default();
    for (k, s) in m.stages.iter().enumerate() {
        for (prefix, law) in s.conditions() {
            work.conditionals += 1;
            let r = check_orthant(law, mode, limits)?;
            work += r.work;
            if let Some(inner) = r.witness {
                let w = Witness::Stage {
                    stage: k + 1,
                    prefix: prefix.clone(),
                    inner: Box::new(inner),
                };
                return Ok(CheckResult::violated(property, w, work));
            }
        }
    }
    Ok(CheckResult::holds(property, work))
}

/// Checks that each coordinate's conditional marginal depends on the prefix
/// only through that coordinate, over reachable prefixes.
pub fn verify_assumption_ii(m: &StagedModel) -> Result<CheckResult> {
    let reachable = m.reachable(usize::MAX)?;
    let mut work = WorkCounters::default();
    for (k, (s, prefixes)) in m.stages.iter().zip(&reachable).enumerate() {
        for i in 0..m.n {
            let mut seen: BTreeMap<&Rational, (&Outcome, JointDist)> = BTreeMap::new();
            for p in prefixes {
                work.conditionals += 1;
                let law = s.law(p).expect("reachable prefixes have laws");
                let marginal = law.marginal(&[i])?;
                match seen.get(&p.values()[i]) {
                    None => {
                        seen.insert(&p.values()[i], (p, marginal));
                    }
                    Some((first, law0)) if *law0 != marginal => {
                        let w = Witness::StageLocality {
                            stage: k + 1,
                            coord: i,
                            prefix_a: (*first).clone(),
                            prefix_b: p.clone(),
                        };
                        return Ok(CheckResult::violated(Property::StageLocality, w, work));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(CheckResult::holds(Property::StageLocality, work))
}

/// Checks that for every stage and coordinate the running score
/// `x_i + X_i` given the prefix is stochastically increasing in the own
/// prefix value `x_i`, over reachable prefixes. The preservation argument
/// uses this when it treats `E[phi(x_i + X_i) | prefix]` as monotone in `x_i`;
/// it does not follow from the two assumptions above.
pub fn verify_own_monotonicity(m: &StagedModel) -> Result<CheckResult> {
    let reachable = m.reachable(usize::MAX)?;
    let mut work = WorkCounters::default();
    for (k, (s, prefixes)) in m.stages.iter().zip(&reachable).enumerate() {
        for i in 0..m.n {
            // distinct running-score laws per own prefix value
            let mut by_value: BTreeMap<&Rational, Vec<(&Outcome, JointDist)>> = BTreeMap::new();
            for p in prefixes {
                work.conditionals += 1;
                let law = s.law(p).expect("reachable prefixes have laws").marginal(&[i])?;
                let shifted = JointDist::from_atoms(
                    law.atoms()
                        .iter()
                        .map(|(x, q)| (Outcome(vec![&x.values()[0] + &p.values()[i]]), q.clone())),
                )?;
                let laws = by_value.entry(&p.values()[i]).or_default();
                if laws.iter().all(|(_, l)| *l != shifted) {
                    laws.push((p, shifted));
                }
            }
            let groups: Vec<_> = by_value.into_values().collect();
            for (g, lower) in groups.iter().enumerate() {
                for upper in &groups[g + 1..] {
                    for (pa, a) in lower {
                        for (pb, b) in upper {
                            work.thresholds += 1;
                            if let Some((t, lhs, rhs)) = first_upper_tail_excess(a, b) {
                                let w = Witness::StageMonotonicity {
                                    stage: k + 1,
                                    coord: i,
                                    prefix_a: (*pa).clone(),
                                    prefix_b: (*pb).clone(),
                                    threshold: t,
                                    lhs,
                                    rhs,
                                };
                                return Ok(CheckResult::violated(Property::StageMonotonicity, w, work));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CheckResult::holds(Property::StageMonotonicity, work))
}

/// First `t` (ascending) with `P(a > t) > P(b > t)` for univariate laws.
fn first_upper_tail_excess(a: &JointDist, b: &JointDist) -> Option<(Rational, Rational, Rational)> {
    let mut ts: Vec<&Rational> = a.support(0).iter().chain(b.support(0)).collect();
    ts.sort();
    ts.dedup();
    ts.into_iter().find_map(|t| {
        let pa = a.marginal_orthant_prob(0, t, OrthantMode::Upper);
        let pb = b.marginal_orthant_prob(0, t, OrthantMode::Upper);
        (pa > pb).then(|| (t.clone(), pa, pb))
    })
}

/// Law of the sum of all stages.
pub fn sum_staged(m: &StagedModel, budget: usize) -> Result<JointDist> {
    let mut current = BTreeMap::from([(Outcome::zeros(m.n), Rational::one())]);
    for s in &m.stages {
        let mut next = BTreeMap::new();
        for (p, w) in &current {
            let law = s
                .law(p)
                .ok_or_else(|| Error::TableIncomplete(format!("no law for prefix {p:?}")))?;
            for (x, q) in law.atoms() {
                JointDist::accumulate(&mut next, p.add(x), w * q, budget)?;
            }
        }
        current = next;
    }
    JointDist::from_map(m.n, current)
}

/// Writes a fixed-draw knockout as one stage per round; stage `k` is the
/// 0-1 vector of round-`k` winners.
pub fn knockout_as_staged(spec: &KnockoutSpec) -> Result<StagedModel> {
    spec.validate()?;
    let Draw::Fixed(bracket) = &spec.draw else {
        return Err(Error::InvalidSpec("staged knockout needs a fixed draw".into()));
    };
    let n = spec.n();
    let win = &spec.win_matrix;
    let mut stages = Vec::with_capacity(spec.level as usize);
    let mut prefixes = BTreeSet::from([Outcome::zeros(n)]);
    for k in 1..=spec.level {
        let alive = Rational::from_integer(k as i64 - 1);
        let block = 1usize << k;
        let mut conditions = BTreeMap::new();
        let mut next = BTreeSet::new();
        for p in &prefixes {
            let survivor = |leaves: &[usize]| {
                *leaves
                    .iter()
                    .find(|&&q| p.values()[q] == alive)
                    .expect("each half-block has one survivor")
            };
            let matches: Vec<(usize, usize)> = bracket
                .chunks(block)
                .map(|c| {
                    let (l, r) = c.split_at(block / 2);
                    (survivor(l), survivor(r))
                })
                .collect();
            let mut atoms = Vec::with_capacity(1 << matches.len());
            for mask in 0u64..1 << matches.len() {
                let mut o = Outcome::zeros(n);
                let mut prob = Rational::one();
                for (b, &(a, c)) in matches.iter().enumerate() {
                    let (w, l) = if mask >> b & 1 == 0 { (a, c) } else { (c, a) };
                    prob = prob * win.p(w, l);
                    o.0[w] = Rational::one();
                }
                if prob.is_positive() {
                    next.insert(p.add(&o));
                    atoms.push((o, prob));
                }
            }
            conditions.insert(p.clone(), JointDist::from_atoms(atoms)?);
        }
        stages.push(StageKernel { conditions });
        prefixes = next;
    }
    let initial = stages.remove(0).conditions.into_values().next().expect("one prefix");
    StagedModel::new(initial, stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depcheck::{check_nlod, check_nuod};
    use crate::exactdist::{convolve, DEFAULT_ATOM_BUDGET as B};
    use crate::models::{build_cyclic_counterexample, build_knockout};
    use crate::rational::q;

    fn fixed(level: u32) -> KnockoutSpec {
        let n = 1usize << level;
        KnockoutSpec::equal_strength(level, Draw::Fixed((0..n).collect())).unwrap()
    }

    #[test]
    fn knockout_four_players() {
        let m = knockout_as_staged(&fixed(2)).unwrap();
        assert_eq!(m.stage_count(), 2);
        let pair = |a: [i64; 4], b: [i64; 4]| {
            JointDist::from_atoms([(Outcome::from_ints(&a), q(1, 2)), (Outcome::from_ints(&b), q(1, 2))]).unwrap()
        };
        let first = convolve(&[pair([1, 0, 0, 0], [0, 1, 0, 0]), pair([0, 0, 1, 0], [0, 0, 0, 1])], B).unwrap();
        assert_eq!(m.initial(), &first);
        assert_eq!(first.len(), 4);
        let limits = Limits::default();
        for mode in [OrthantMode::Lower, OrthantMode::Upper] {
            assert!(verify_assumption_i(&m, mode, &limits).unwrap().is_holds());
        }
        assert!(verify_assumption_ii(&m).unwrap().is_holds());
        let sum = sum_staged(&m, B).unwrap();
        assert_eq!(sum, build_knockout(&fixed(2), B).unwrap());
    }

    #[test]
    fn knockout_stage_shapes() {
        let m = knockout_as_staged(&fixed(3)).unwrap();
        assert_eq!(m.stage_count(), 3);
        for k in 1..=3usize {
            for (_, law) in m.kernel(k).conditions() {
                for (o, _) in law.atoms() {
                    assert_eq!(o.sum(), Rational::from_integer(1 << (3 - k)));
                }
            }
        }
        let sum = sum_staged(&m, B).unwrap();
        assert_eq!(sum.len(), 128);
        assert!(sum.atoms().iter().all(|(_, p)| *p == q(1, 128)));
        assert_eq!(sum, build_knockout(&fixed(3), B).unwrap());
    }

    #[test]
    fn two_players_single_stage() {
        let m = knockout_as_staged(&fixed(1)).unwrap();
        assert_eq!(m.stage_count(), 1);
        assert_eq!(m.initial().atoms().len(), 2);
        assert!(verify_assumption_ii(&m).unwrap().is_holds());
    }

    #[test]
    fn violating_conditional_is_reported() {
        let coin = JointDist::from_atoms([
            (Outcome::from_ints(&[0, 0, 0, 0]), q(1, 2)),
            (Outcome::from_ints(&[1, 0, 0, 0]), q(1, 2)),
        ])
        .unwrap();
        let cyclic = build_cyclic_counterexample(q(0, 1)).unwrap();
        let kernel = StageKernel::constant(cyclic, [Outcome::from_ints(&[0, 0, 0, 0]), Outcome::from_ints(&[1, 0, 0, 0])]);
        let m = StagedModel::new(coin, vec![kernel]).unwrap();
        let r = verify_assumption_i(&m, OrthantMode::Lower, &Limits::default()).unwrap();
        let Some(Witness::Stage { stage, prefix, inner }) = r.witness else {
            panic!("expected a stage witness")
        };
        assert_eq!(stage, 2);
        assert_eq!(prefix, Outcome::from_ints(&[0, 0, 0, 0]));
        let Witness::Orthant(w) = *inner else { panic!() };
        assert_eq!((w.lhs, w.rhs), (q(1, 3), q(2, 9)));
    }

    #[test]
    fn locality_violation() {
        let init = JointDist::from_atoms([
            (Outcome::from_ints(&[0, 0]), q(1, 2)),
            (Outcome::from_ints(&[0, 1]), q(1, 2)),
        ])
        .unwrap();
        let k = StageKernel::new([
            (Outcome::from_ints(&[0, 0]), JointDist::point(Outcome::from_ints(&[0, 0]))),
            (Outcome::from_ints(&[0, 1]), JointDist::point(Outcome::from_ints(&[1, 0]))),
        ]);
        let m = StagedModel::new(init, vec![k]).unwrap();
        let r = verify_assumption_ii(&m).unwrap();
        assert_eq!(
            r.witness,
            Some(Witness::StageLocality {
                stage: 2,
                coord: 0,
                prefix_a: Outcome::from_ints(&[0, 0]),
                prefix_b: Outcome::from_ints(&[0, 1]),
            })
        );
    }

    #[test]
    fn independent_stages_convolve() {
        let a = JointDist::from_atoms([
            (Outcome::from_ints(&[0, 1]), q(1, 3)),
            (Outcome::from_ints(&[1, 0]), q(2, 3)),
        ])
        .unwrap();
        let b = JointDist::from_atoms([
            (Outcome::from_ints(&[0, 2]), q(1, 4)),
            (Outcome::from_ints(&[1, 1]), q(3, 4)),
        ])
        .unwrap();
        let after_a: Vec<Outcome> = a.atoms().iter().map(|(o, _)| o.clone()).collect();
        let m = StagedModel::new(a.clone(), vec![StageKernel::constant(b.clone(), after_a)]).unwrap();
        let sum = sum_staged(&m, B).unwrap();
        assert_eq!(sum, convolve(&[a, b], B).unwrap());
        assert!(check_nlod(&sum, &Limits::default()).unwrap().is_holds());
        assert!(check_nuod(&sum, &Limits::default()).unwrap().is_holds());
    }

    #[test]
    fn missing_prefix_is_rejected() {
        let a = JointDist::from_atoms([
            (Outcome::from_ints(&[0]), q(1, 2)),
            (Outcome::from_ints(&[1]), q(1, 2)),
        ])
        .unwrap();
        let k = StageKernel::constant(a.clone(), [Outcome::from_ints(&[0])]);
        assert!(matches!(StagedModel::new(a, vec![k]), Err(Error::TableIncomplete(_))));
    }

    #[test]
    fn assumptions_alone_do_not_preserve_orthant_dependence() {
        // countermonotone first stage; the second stage shifts coordinate 1
        // down when it is already high, which makes the sum comonotone
        let first = JointDist::from_atoms([
            (Outcome::from_ints(&[0, 1]), q(1, 2)),
            (Outcome::from_ints(&[1, 0]), q(1, 2)),
        ])
        .unwrap();
        let k = StageKernel::new([
            (Outcome::from_ints(&[0, 1]), JointDist::point(Outcome::from_ints(&[0, 0]))),
            (Outcome::from_ints(&[1, 0]), JointDist::point(Outcome::from_ints(&[0, 2]))),
        ]);
        let m = StagedModel::new(first, vec![k]).unwrap();
        let limits = Limits::default();
        assert!(verify_assumption_i(&m, OrthantMode::Lower, &limits).unwrap().is_holds());
        assert!(verify_assumption_i(&m, OrthantMode::Upper, &limits).unwrap().is_holds());
        assert!(verify_assumption_ii(&m).unwrap().is_holds());
        let sum = sum_staged(&m, B).unwrap();
        assert_eq!(
            sum.atoms(),
            &[(Outcome::from_ints(&[0, 1]), q(1, 2)), (Outcome::from_ints(&[1, 2]), q(1, 2))]
        );
        // P(S <= (0, 1)) = 1/2 > 1/4
        let r = check_nlod(&sum, &limits).unwrap();
        let w = r.orthant_witness().unwrap();
        assert_eq!((w.lhs.clone(), w.rhs.clone()), (q(1, 2), q(1, 4)));
        let mono = verify_own_monotonicity(&m).unwrap();
        assert_eq!(
            mono.witness,
            Some(Witness::StageMonotonicity {
                stage: 2,
                coord: 1,
                prefix_a: Outcome::from_ints(&[1, 0]),
                prefix_b: Outcome::from_ints(&[0, 1]),
                threshold: q(1, 1),
                lhs: q(1, 1),
                rhs: q(0, 1),
            })
        );
    }

    #[test]
    fn knockout_stages_are_monotone() {
        for level in 1..=3 {
            let m = knockout_as_staged(&fixed(level)).unwrap();
            assert!(verify_own_monotonicity(&m).unwrap().is_holds());
        }
    }

    #[test]
    fn json_roundtrip() {
        let m = knockout_as_staged(&fixed(2)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"n\":4,\"stages\":[{\"conditions\":[{\"prefix\":"));
        let back: StagedModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
