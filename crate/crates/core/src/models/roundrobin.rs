use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::{JointDist, Outcome};
use crate::rational::Rational;
use crate::table::ValueTable;

/// Law of the reward `X_ij` player `i` takes from the match against `j`;
/// player `j` receives `r - X_ij`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRewardLaw {
    pub i: usize,
    pub j: usize,
    pub r: Rational,
    pub atoms: Vec<(Rational, Rational)>,
}

impl PairRewardLaw {
    /// Validates and canonicalizes: zero-probability atoms are dropped,
    /// duplicates merged, values sorted.
    pub fn new(i: usize, j: usize, r: Rational, atoms: Vec<(Rational, Rational)>) -> Result<Self> {
        if i >= j {
            return Err(Error::InvalidSpec(format!("pair ({i}, {j}) must have i < j")));
        }
        if r.is_negative() {
            return Err(Error::InvalidSpec(format!("pair ({i}, {j}) has negative reward {r}")));
        }
        let mut merged: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (v, p) in atoms {
            if p.is_negative() || !p.is_probability() {
                return Err(Error::InvalidProbability(format!("pair ({i}, {j}): {p}")));
            }
            if v.is_negative() || v > r {
                return Err(Error::InvalidSpec(format!(
                    "pair ({i}, {j}): value {v} outside [0, {r}]"
                )));
            }
            if p.is_positive() {
                *merged.entry(v).or_insert_with(Rational::zero) += p;
            }
        }
        let total: Rational = merged.values().sum();
        if total != Rational::one() {
            return Err(Error::ProbabilitiesDoNotSumToOne(total.to_string()));
        }
        Ok(PairRewardLaw {
            i,
            j,
            r,
            atoms: merged.into_iter().collect(),
        })
    }

    /// The players do not compete.
    pub fn no_contest(i: usize, j: usize) -> Result<Self> {
        Self::new(i, j, Rational::zero(), vec![(Rational::zero(), Rational::one())])
    }

    /// A single game worth one point, won by `i` with probability `p`.
    pub fn bernoulli(i: usize, j: usize, p: Rational) -> Result<Self> {
        let lose = Rational::one() - &p;
        Self::new(i, j, Rational::one(), vec![(Rational::one(), p), (Rational::zero(), lose)])
    }

    /// `r` independent games, each won by `i` with probability `p`.
    pub fn binomial(i: usize, j: usize, r: u32, p: Rational) -> Result<Self> {
        if !p.is_probability() {
            return Err(Error::InvalidProbability(format!("pair ({i}, {j}): {p}")));
        }
        let q = Rational::one() - &p;
        let atoms = (0..=r)
            .map(|k| {
                let c = Rational::from(binomial_coefficient(r, k));
                (Rational::from_integer(k as i64), c * p.pow(k) * q.pow(r - k))
            })
            .collect();
        Self::new(i, j, Rational::from_integer(r as i64), atoms)
    }

    /// A chess game: win 1, draw 1/2, loss 0.
    pub fn chess(i: usize, j: usize, p_win: Rational, p_draw: Rational) -> Result<Self> {
        if !p_win.is_probability() || !p_draw.is_probability() {
            return Err(Error::InvalidProbability(format!("pair ({i}, {j})")));
        }
        let p_loss = Rational::one() - &p_win - &p_draw;
        if p_loss.is_negative() {
            return Err(Error::InvalidProbability(format!(
                "pair ({i}, {j}): p_win + p_draw = {} > 1",
                &p_win + &p_draw
            )));
        }
        Self::new(
            i,
            j,
            Rational::one(),
            vec![
                (Rational::one(), p_win),
                (Rational::new(1, 2), p_draw),
                (Rational::zero(), p_loss),
            ],
        )
    }

    /// Outcome pairs `(X_ij, X_ji)` with their probabilities.
    pub fn split_atoms(&self) -> impl Iterator<Item = (Rational, Rational, &Rational)> + '_ {
        self.atoms
            .iter()
            .map(|(v, p)| (v.clone(), &self.r - v, p))
    }
}

pub(crate) fn binomial_coefficient(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::from(1), |acc, t| acc * BigInt::from(n - t) / BigInt::from(t + 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRobinSpec {
    pub n: usize,
    pub pair_laws: Vec<PairRewardLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<ValueTable>>,
}

impl RoundRobinSpec {
    /// Requires exactly one law per unordered pair; sorts the laws by pair.
    pub fn new(n: usize, mut pair_laws: Vec<PairRewardLaw>) -> Result<Self> {
        pair_laws.sort_by_key(|l| (l.i, l.j));
        let expected: Vec<(usize, usize)> = super::pairs(n).collect();
        let got: Vec<(usize, usize)> = pair_laws.iter().map(|l| (l.i, l.j)).collect();
        if got != expected {
            return Err(Error::InvalidSpec(format!(
                "round-robin on {n} players needs one law for each of the {} pairs",
                expected.len()
            )));
        }
        Ok(RoundRobinSpec {
            n,
            pair_laws,
            utilities: None,
        })
    }

    pub fn with_utilities(mut self, utilities: Vec<ValueTable>) -> Self {
        self.utilities = Some(utilities);
        self
    }

    /// `Σ r_ij`, the constant total score.
    pub fn total_reward(&self) -> Rational {
        self.pair_laws.iter().map(|l| &l.r).sum()
    }

    pub fn law(&self, i: usize, j: usize) -> Option<&PairRewardLaw> {
        self.pair_laws.iter().find(|l| l.i == i && l.j == j)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Self::new(self.n, self.pair_laws.clone())?;
        for l in &self.pair_laws {
            PairRewardLaw::new(l.i, l.j, l.r.clone(), l.atoms.clone())?;
        }
        if let Some(u) = &self.utilities {
            if u.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: u.len(),
                });
            }
        }
        Ok(())
    }
}

/// Exact law of the score vector; pairs are folded in one at a time.
pub fn build_round_robin(spec: &RoundRobinSpec, budget: usize) -> Result<JointDist> {
    spec.validate()?;
    let n = spec.n;
    let mut acc: BTreeMap<Outcome, Rational> = BTreeMap::from([(Outcome::zeros(n), Rational::one())]);
    for law in &spec.pair_laws {
        let mut next = BTreeMap::new();
        for (scores, p) in &acc {
            for (xi, xj, q) in law.split_atoms() {
                let mut s = scores.clone();
                s.0[law.i] += &xi;
                s.0[law.j] += &xj;
                JointDist::accumulate(&mut next, s, p * q, budget)?;
            }
        }
        acc = next;
    }
    let d = JointDist::from_map(n, acc)?;
    match &spec.utilities {
        Some(u) => d.map_coordinatewise(u, true),
        None => Ok(d),
    }
}

/// Single games; player 0 beats every other player with probability `p`,
/// all other games are fair.
pub fn huber_spec(n: usize, p: Rational) -> Result<RoundRobinSpec> {
    let half = Rational::new(1, 2);
    let laws = super::pairs(n)
        .map(|(i, j)| {
            let pij = if i == 0 { p.clone() } else { half.clone() };
            PairRewardLaw::bernoulli(i, j, pij)
        })
        .collect::<Result<Vec<_>>>()?;
    RoundRobinSpec::new(n, laws)
}

/// Repeated games: `params(i, j) = (r_ij, p_ij)`.
pub fn binomial_spec<F>(n: usize, params: F) -> Result<RoundRobinSpec>
where
    F: Fn(usize, usize) -> (u32, Rational),
{
    let laws = super::pairs(n)
        .map(|(i, j)| {
            let (r, p) = params(i, j);
            if r == 0 {
                PairRewardLaw::no_contest(i, j)
            } else {
                PairRewardLaw::binomial(i, j, r, p)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RoundRobinSpec::new(n, laws)
}

pub fn build_binomial_round_robin<F>(n: usize, params: F, budget: usize) -> Result<JointDist>
where
    F: Fn(usize, usize) -> (u32, Rational),
{
    build_round_robin(&binomial_spec(n, params)?, budget)
}

/// Chess games: `params(i, j) = (P(i wins), P(draw))`.
pub fn chess_spec<F>(n: usize, params: F) -> Result<RoundRobinSpec>
where
    F: Fn(usize, usize) -> (Rational, Rational),
{
    let laws = super::pairs(n)
        .map(|(i, j)| {
            let (w, dr) = params(i, j);
            PairRewardLaw::chess(i, j, w, dr)
        })
        .collect::<Result<Vec<_>>>()?;
    RoundRobinSpec::new(n, laws)
}

pub fn build_chess_round_robin<F>(n: usize, params: F, budget: usize) -> Result<JointDist>
where
    F: Fn(usize, usize) -> (Rational, Rational),
{
    build_round_robin(&chess_spec(n, params)?, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::DEFAULT_ATOM_BUDGET as B;
    use crate::rational::q;

    fn o(v: &[i64]) -> Outcome {
        Outcome::from_ints(v)
    }

    /// Oracle: enumerate every tuple of match results directly.
    fn enumerate(spec: &RoundRobinSpec) -> JointDist {
        let mut tuples: Vec<(Vec<Rational>, Rational)> = vec![(vec![Rational::zero(); spec.n], q(1, 1))];
        for l in &spec.pair_laws {
            tuples = tuples
                .into_iter()
                .flat_map(|(s, p)| {
                    l.atoms.iter().map(move |(v, pv)| {
                        let mut s = s.clone();
                        s[l.i] = &s[l.i] + v;
                        s[l.j] = &s[l.j] + &(&l.r - v);
                        (s, &p * pv)
                    })
                })
                .collect();
        }
        JointDist::from_atoms(tuples.into_iter().map(|(s, p)| (Outcome(s), p))).unwrap()
    }

    #[test]
    fn single_match() {
        let spec = RoundRobinSpec::new(2, vec![PairRewardLaw::bernoulli(0, 1, q(1, 3)).unwrap()]).unwrap();
        let d = build_round_robin(&spec, B).unwrap();
        let want = JointDist::from_atoms([(o(&[1, 0]), q(1, 3)), (o(&[0, 1]), q(2, 3))]).unwrap();
        assert_eq!(d, want);
    }

    #[test]
    fn huber_three_fair_players() {
        let d = build_round_robin(&huber_spec(3, q(1, 2)).unwrap(), B).unwrap();
        assert_eq!(d.marginal_orthant_prob(0, &q(1, 1), crate::exactdist::OrthantMode::Upper), q(1, 4));
        // 8 match results, 2 of which are cyclic and give (1,1,1)
        assert_eq!(d.prob_of(&o(&[1, 1, 1])), q(1, 4));
        assert_eq!(d, enumerate(&huber_spec(3, q(1, 2)).unwrap()));
    }

    #[test]
    fn binomial_reduces_to_single_games() {
        let a = build_binomial_round_robin(3, |i, j| (1, q((i + j) as i64, 5)), B).unwrap();
        let spec = RoundRobinSpec::new(
            3,
            super::super::pairs(3)
                .map(|(i, j)| PairRewardLaw::bernoulli(i, j, q((i + j) as i64, 5)).unwrap())
                .collect(),
        )
        .unwrap();
        assert_eq!(a, build_round_robin(&spec, B).unwrap());
    }

    #[test]
    fn binomial_two_games() {
        let d = build_binomial_round_robin(2, |_, _| (2, q(1, 2)), B).unwrap();
        let m = d.marginal(&[0]).unwrap();
        let want = JointDist::univariate([(q(0, 1), q(1, 4)), (q(1, 1), q(1, 2)), (q(2, 1), q(1, 4))]).unwrap();
        assert_eq!(m, want);
        let d3 = binomial_spec(3, |_, _| (2, q(1, 2))).unwrap();
        let law = build_round_robin(&d3, B).unwrap();
        assert_eq!(law, enumerate(&d3));
        assert_eq!(law.total().support(0), &[q(6, 1)]);
    }

    #[test]
    fn chess_special_cases() {
        let all_draws = build_chess_round_robin(4, |_, _| (q(0, 1), q(1, 1)), B).unwrap();
        assert_eq!(all_draws, JointDist::point(Outcome(vec![q(3, 2); 4])));
        let no_draws = build_chess_round_robin(3, |_, _| (q(1, 2), q(0, 1)), B).unwrap();
        assert_eq!(no_draws, build_round_robin(&huber_spec(3, q(1, 2)).unwrap(), B).unwrap());
        let spec = chess_spec(3, |_, _| (q(1, 3), q(1, 3))).unwrap();
        let d = build_round_robin(&spec, B).unwrap();
        assert_eq!(d, enumerate(&spec));
        assert_eq!(d.total().support(0), &[q(3, 1)]);
        assert!(matches!(
            PairRewardLaw::chess(0, 1, q(2, 3), q(1, 2)),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn utilities_must_be_monotone() {
        let spec = huber_spec(2, q(1, 2)).unwrap();
        let s = [q(0, 1), q(1, 1)];
        let up = ValueTable::from_fn(&s, |v| v * &q(10, 1));
        let down = ValueTable::from_fn(&s, |v| q(1, 1) - v);
        let ok = build_round_robin(&spec.clone().with_utilities(vec![up.clone(), up.clone()]), B).unwrap();
        assert_eq!(ok.support(0), &[q(0, 1), q(10, 1)]);
        assert!(matches!(
            build_round_robin(&spec.with_utilities(vec![up, down]), B),
            Err(Error::NotMonotone(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(RoundRobinSpec::new(3, vec![PairRewardLaw::bernoulli(0, 1, q(1, 2)).unwrap()]).is_err());
        assert!(PairRewardLaw::new(1, 0, q(1, 1), vec![(q(1, 1), q(1, 1))]).is_err());
        assert!(PairRewardLaw::new(0, 1, q(1, 1), vec![(q(2, 1), q(1, 1))]).is_err());
        let nc = PairRewardLaw::no_contest(0, 1).unwrap();
        assert_eq!(nc.atoms, vec![(q(0, 1), q(1, 1))]);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = huber_spec(5, q(1, 2)).unwrap();
        assert!(matches!(
            build_round_robin(&spec, 5),
            Err(Error::AtomBudgetExceeded { budget: 5 })
        ));
    }
}
