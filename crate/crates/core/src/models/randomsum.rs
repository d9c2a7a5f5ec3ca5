//! Sums (or increasing functions) of independent NA payoff vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::depcheck::{check_na, Limits};
use crate::error::{Error, Result};
use crate::exactdist::{convolve, JointDist, Outcome};
use crate::rational::Rational;
use crate::table::{product_grid, FunctionTable};

use super::RoundRobinSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSumSpec {
    pub rounds: Vec<JointDist>,
    /// Per player, an increasing function of their `K` round payoffs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<FunctionTable>>,
    /// Skip the build-time NA check of each round.
    #[serde(default)]
    pub waive_na_check: bool,
}

impl RandomSumSpec {
    pub fn new(rounds: Vec<JointDist>) -> Self {
        RandomSumSpec {
            rounds,
            utilities: None,
            waive_na_check: false,
        }
    }

    pub fn n(&self) -> Option<usize> {
        self.rounds.first().map(JointDist::dim)
    }
}

pub fn build_random_sum(spec: &RandomSumSpec, limits: &Limits, budget: usize) -> Result<JointDist> {
    let n = spec.n().ok_or(Error::EmptyDistribution)?;
    for r in &spec.rounds {
        if r.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.dim(),
            });
        }
    }
    if !spec.waive_na_check && n >= 2 {
        for (k, r) in spec.rounds.iter().enumerate() {
            if !check_na(r, limits)?.is_holds() {
                return Err(Error::PreconditionNAFailed { round: k });
            }
        }
    }
    match &spec.utilities {
        None => convolve(&spec.rounds, budget),
        Some(u) => with_utilities(&spec.rounds, u, budget),
    }
}

fn with_utilities(rounds: &[JointDist], utilities: &[FunctionTable], budget: usize) -> Result<JointDist> {
    let n = rounds[0].dim();
    let k = rounds.len();
    if utilities.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: utilities.len(),
        });
    }
    for (i, u) in utilities.iter().enumerate() {
        if u.coords() != (0..k).collect::<Vec<_>>() {
            return Err(Error::InvalidSpec(format!(
                "utility of player {i} must be keyed by the {k} round payoffs"
            )));
        }
        let grid: Vec<Vec<Rational>> = rounds.iter().map(|r| r.support(i).to_vec()).collect();
        u.check_increasing(&product_grid(&grid))
            .map_err(|e| Error::NotMonotone(format!("utility of player {i}: {e}")))?;
    }
    let mut combos: usize = 1;
    for r in rounds {
        combos = combos
            .checked_mul(r.len())
            .filter(|&c| c <= budget)
            .ok_or(Error::AtomBudgetExceeded { budget })?;
    }
    let mut map = BTreeMap::new();
    let mut idx = vec![0usize; k];
    for _ in 0..combos {
        let picks: Vec<&(Outcome, Rational)> = idx.iter().zip(rounds).map(|(&a, r)| &r.atoms()[a]).collect();
        let p = picks.iter().fold(Rational::one(), |acc, (_, q)| acc * q);
        let s = (0..n)
            .map(|i| {
                let own = Outcome(picks.iter().map(|(o, _)| o.values()[i].clone()).collect());
                utilities[i].eval(&own)
            })
            .collect::<Result<Vec<_>>>()?;
        JointDist::accumulate(&mut map, Outcome(s), p, budget)?;
        for (a, r) in idx.iter_mut().zip(rounds) {
            *a += 1;
            if *a < r.len() {
                break;
            }
            *a = 0;
        }
    }
    JointDist::from_map(n, map)
}

/// One `n`-dimensional round per match: `X_ij` at coordinate `i`,
/// `r_ij - X_ij` at `j`, zero elsewhere.
pub fn padded_pair_rounds(rr: &RoundRobinSpec) -> Result<Vec<JointDist>> {
    rr.validate()?;
    rr.pair_laws
        .iter()
        .map(|l| {
            JointDist::from_atoms(l.split_atoms().map(|(xi, xj, p)| {
                let mut o = Outcome::zeros(rr.n);
                o.0[l.i] = xi;
                o.0[l.j] = xj;
                (o, p.clone())
            }))
        })
        .collect()
}

/// Football league rounds: 3 points for a win, 1 each for a draw.
/// `probs(i, j) = (P(i wins), P(draw))`.
pub fn football_rounds<F>(n: usize, probs: F) -> Result<Vec<JointDist>>
where
    F: Fn(usize, usize) -> (Rational, Rational),
{
    super::pairs(n)
        .map(|(i, j)| {
            let (w, d) = probs(i, j);
            let l = Rational::one() - &w - &d;
            if !w.is_probability() || !d.is_probability() || l.is_negative() {
                return Err(Error::InvalidProbability(format!("match ({i}, {j})")));
            }
            let atoms = [(3, 0, w), (1, 1, d), (0, 3, l)]
                .into_iter()
                .filter(|(_, _, p)| p.is_positive())
                .map(|(a, b, p)| {
                    let mut o = Outcome::zeros(n);
                    o.0[i] = Rational::from_integer(a);
                    o.0[j] = Rational::from_integer(b);
                    (o, p)
                });
            JointDist::from_atoms(atoms)
        })
        .collect()
}

pub fn football_spec<F>(n: usize, probs: F) -> Result<RandomSumSpec>
where
    F: Fn(usize, usize) -> (Rational, Rational),
{
    Ok(RandomSumSpec::new(football_rounds(n, probs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::DEFAULT_ATOM_BUDGET as B;
    use crate::models::{build_round_robin, chess_spec};
    use crate::rational::q;

    #[test]
    fn football_three_teams() {
        let spec = football_spec(3, |i, _| (q(1 + i as i64, 5), q(1, 5))).unwrap();
        let d = build_random_sum(&spec, &Limits::default(), B).unwrap();
        let totals = d.total();
        assert!(totals.support(0).len() > 1);
        assert!(totals.support(0).iter().all(|t| *t >= q(6, 1) && *t <= q(9, 1)));
        assert!(check_na(&d, &Limits::default()).unwrap().is_holds());
    }

    #[test]
    fn single_round_is_unchanged() {
        let r = football_rounds(2, |_, _| (q(1, 2), q(1, 4))).unwrap();
        let d = build_random_sum(&RandomSumSpec::new(r.clone()), &Limits::default(), B).unwrap();
        assert_eq!(d, r[0]);
    }

    #[test]
    fn padded_rounds_reproduce_round_robin() {
        let rr = chess_spec(3, |i, j| (q(1, (i + 2) as i64), q(1, (j + 2) as i64))).unwrap();
        let spec = RandomSumSpec::new(padded_pair_rounds(&rr).unwrap());
        assert_eq!(
            build_random_sum(&spec, &Limits::default(), B).unwrap(),
            build_round_robin(&rr, B).unwrap()
        );
    }

    #[test]
    fn positively_dependent_round_needs_waiver() {
        let bad = JointDist::from_atoms([
            (Outcome::from_ints(&[0, 0]), q(1, 2)),
            (Outcome::from_ints(&[1, 1]), q(1, 2)),
        ])
        .unwrap();
        let mut spec = RandomSumSpec::new(vec![bad.clone(), bad]);
        assert_eq!(
            build_random_sum(&spec, &Limits::default(), B),
            Err(Error::PreconditionNAFailed { round: 0 })
        );
        spec.waive_na_check = true;
        assert!(build_random_sum(&spec, &Limits::default(), B).is_ok());
    }

    #[test]
    fn utilities_of_round_payoffs() {
        let rounds = football_rounds(2, |_, _| (q(1, 3), q(1, 3))).unwrap();
        let rounds = vec![rounds[0].clone(), rounds[0].clone()];
        let grid: Vec<Vec<Rational>> = vec![rounds[0].support(0).to_vec(); 2];
        // best single-round result
        let mut u = FunctionTable::new(vec![0, 1]);
        for p in product_grid(&grid) {
            let m = p.values().iter().max().unwrap().clone();
            u.insert(p, m);
        }
        let mut spec = RandomSumSpec::new(rounds);
        spec.utilities = Some(vec![u.clone(), u.clone()]);
        let d = build_random_sum(&spec, &Limits::default(), B).unwrap();
        assert_eq!(d.support(0), &[q(0, 1), q(1, 1), q(3, 1)]);
        assert!(check_na(&d, &Limits::default()).unwrap().is_holds());

        let mut dec = FunctionTable::new(vec![0, 1]);
        for p in product_grid(&grid) {
            let s = -p.sum();
            dec.insert(p, s);
        }
        spec.utilities = Some(vec![dec, u]);
        assert!(matches!(
            build_random_sum(&spec, &Limits::default(), B),
            Err(Error::NotMonotone(_))
        ));
    }
}
