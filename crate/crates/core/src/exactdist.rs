//! Finite joint distributions of score vectors in exact arithmetic.
//!
//! A [`JointDist`] is a sparse map from outcome vectors to strictly positive
//! probabilities that sum to exactly one. Atoms are kept in lexicographic
//! order of their outcomes so that serialized output is byte-stable.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::table::ValueTable;

/// Default cap on the number of atoms any single operation may produce.
pub const DEFAULT_ATOM_BUDGET: usize = 1_000_000;

/// A score vector; position `i` holds the score of player `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Outcome(pub Vec<Rational>);

impl Outcome {
    pub fn new(values: Vec<Rational>) -> Self {
        Outcome(values)
    }

    pub fn from_ints(values: &[i64]) -> Self {
        Outcome(values.iter().map(|&v| Rational::from_integer(v)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Outcome(vec![Rational::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    /// Coordinate-wise `self <= other`.
    pub fn dominated_by(&self, other: &Outcome) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn project(&self, coords: &[usize]) -> Outcome {
        Outcome(coords.iter().map(|&c| self.0[c].clone()).collect())
    }

    pub fn add(&self, other: &Outcome) -> Outcome {
        Outcome(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sum(&self) -> Rational {
        self.0.iter().sum()
    }
}

impl fmt::Debug for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            if v.is_integer() {
                write!(f, "{}", v.numer())?;
            } else {
                write!(f, "{v}")?;
            }
        }
        f.write_str(")")
    }
}

impl From<Vec<Rational>> for Outcome {
    fn from(v: Vec<Rational>) -> Self {
        Outcome(v)
    }
}

/// Which orthant an orthant probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrthantMode {
    /// `P(S_i <= s_i for all i)`
    Lower,
    /// `P(S_i > s_i for all i)`
    Upper,
}

impl OrthantMode {
    pub fn contains(self, value: &Rational, threshold: &Rational) -> bool {
        match self {
            OrthantMode::Lower => value <= threshold,
            OrthantMode::Upper => value > threshold,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    outcome: Outcome,
    prob: Rational,
}

#[derive(Serialize, Deserialize)]
struct DistRepr {
    n: usize,
    atoms: Vec<AtomRepr>,
}

/// Finite law of an `n`-dimensional score vector.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub struct JointDist {
    n: usize,
    atoms: Vec<(Outcome, Rational)>,
    support: Vec<Vec<Rational>>,
}

impl TryFrom<DistRepr> for JointDist {
    type Error = Error;

    fn try_from(r: DistRepr) -> Result<Self> {
        let d = JointDist::from_atoms(r.atoms.into_iter().map(|a| (a.outcome, a.prob)))?;
        if d.n != r.n {
            return Err(Error::DimensionMismatch {
                expected: r.n,
                found: d.n,
            });
        }
        Ok(d)
    }
}

impl From<JointDist> for DistRepr {
    fn from(d: JointDist) -> Self {
        DistRepr {
            n: d.n,
            atoms: d
                .atoms
                .into_iter()
                .map(|(outcome, prob)| AtomRepr { outcome, prob })
                .collect(),
        }
    }
}

impl fmt::Debug for JointDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.atoms.iter().map(|(o, p)| (o, p)))
            .finish()
    }
}

impl JointDist {
    /// Builds a law from raw atoms, merging duplicate outcomes.
    pub fn from_atoms<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Outcome, Rational)>,
    {
        let mut map = BTreeMap::new();
        let mut n = None;
        for (o, p) in atoms {
            if !p.is_positive() {
                return Err(Error::ZeroOrNegativeProbability(p.to_string()));
            }
            match n {
                None => n = Some(o.len()),
                Some(k) if k != o.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: o.len(),
                    })
                }
                _ => {}
            }
            *map.entry(o).or_insert_with(Rational::zero) += p;
        }
        let n = n.ok_or(Error::EmptyDistribution)?;
        Self::from_map(n, map)
    }

    /// Point mass at `outcome`.
    pub fn point(outcome: Outcome) -> Self {
        let n = outcome.len();
        Self::from_map(n, BTreeMap::from([(outcome, Rational::one())]))
            .expect("point mass is normalized")
    }

    /// Single coordinate law from `(value, prob)` pairs.
    pub fn univariate<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        Self::from_atoms(atoms.into_iter().map(|(v, p)| (Outcome(vec![v]), p)))
    }

    /// Merged atoms in canonical order; every probability is positive.
    pub(crate) fn from_map(n: usize, map: BTreeMap<Outcome, Rational>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let total: Rational = map.values().sum();
        if total != Rational::one() {
            return Err(Error::ProbabilitiesDoNotSumToOne(total.to_string()));
        }
        let mut support = vec![Vec::new(); n];
        for o in map.keys() {
            for (i, v) in o.0.iter().enumerate() {
                support[i].push(v.clone());
            }
        }
        for s in &mut support {
            s.sort();
            s.dedup();
        }
        Ok(JointDist {
            n,
            atoms: map.into_iter().collect(),
            support,
        })
    }

    /// Accumulates into `map`, failing once more than `budget` distinct atoms exist.
    pub(crate) fn accumulate(
        map: &mut BTreeMap<Outcome, Rational>,
        outcome: Outcome,
        prob: Rational,
        budget: usize,
    ) -> Result<()> {
        match map.get_mut(&outcome) {
            Some(p) => *p += prob,
            None => {
                if map.len() >= budget {
                    return Err(Error::AtomBudgetExceeded { budget });
                }
                map.insert(outcome, prob);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[(Outcome, Rational)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Sorted distinct values attained by coordinate `i`.
    pub fn support(&self, i: usize) -> &[Rational] {
        &self.support[i]
    }

    pub fn support_grid(&self) -> &[Vec<Rational>] {
        &self.support
    }

    pub fn prob_of(&self, outcome: &Outcome) -> Rational {
        self.atoms
            .binary_search_by(|(o, _)| o.cmp(outcome))
            .map(|k| self.atoms[k].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    /// Probability of an arbitrary event.
    pub fn prob<F: Fn(&Outcome) -> bool>(&self, event: F) -> Rational {
        self.atoms
            .iter()
            .filter(|(o, _)| event(o))
            .map(|(_, p)| p)
            .sum()
    }

    /// Expectation of an arbitrary function of the outcome.
    pub fn expect<F: Fn(&Outcome) -> Rational>(&self, f: F) -> Rational {
        self.atoms.iter().map(|(o, p)| f(o) * p).sum()
    }

    /// Independent product; coordinates of `other` are appended.
    pub fn product(&self, other: &JointDist, budget: usize) -> Result<JointDist> {
        let count = self.atoms.len().saturating_mul(other.atoms.len());
        if count > budget {
            return Err(Error::AtomBudgetExceeded { budget });
        }
        let mut map = BTreeMap::new();
        for (a, pa) in &self.atoms {
            for (b, pb) in &other.atoms {
                let mut v = a.0.clone();
                v.extend(b.0.iter().cloned());
                map.insert(Outcome(v), pa * pb);
            }
        }
        Self::from_map(self.n + other.n, map)
    }

    /// Law of `u_i(S_i)` for per-coordinate value tables.
    pub fn map_coordinatewise(&self, maps: &[ValueTable], require_monotone: bool) -> Result<JointDist> {
        if maps.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: maps.len(),
            });
        }
        for (i, t) in maps.iter().enumerate() {
            t.check_covers(&self.support[i])
                .map_err(|e| annotate(e, &format!("coordinate {i}")))?;
            if require_monotone {
                t.check_nondecreasing(&self.support[i])
                    .map_err(|e| annotate(e, &format!("coordinate {i}")))?;
            }
        }
        let mut map = BTreeMap::new();
        for (o, p) in &self.atoms {
            let image = Outcome(
                o.0.iter()
                    .zip(maps)
                    .map(|(v, t)| t.get(v).expect("coverage checked").clone())
                    .collect(),
            );
            *map.entry(image).or_insert_with(Rational::zero) += p;
        }
        Self::from_map(self.n, map)
    }

    /// Projection onto `coords` (in the given order).
    pub fn marginal(&self, coords: &[usize]) -> Result<JointDist> {
        if coords.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&index) = coords.iter().find(|&&c| c >= self.n) {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        let mut map = BTreeMap::new();
        for (o, p) in &self.atoms {
            *map.entry(o.project(coords)).or_insert_with(Rational::zero) += p;
        }
        Self::from_map(coords.len(), map)
    }

    /// Law conditioned on an event of positive probability.
    pub fn condition<F: Fn(&Outcome) -> bool>(&self, event: F) -> Result<JointDist> {
        let kept: Vec<_> = self.atoms.iter().filter(|(o, _)| event(o)).cloned().collect();
        let mass: Rational = kept.iter().map(|(_, p)| p).sum();
        if mass.is_zero() {
            return Err(Error::EmptyDistribution);
        }
        Self::from_map(
            self.n,
            kept.into_iter().map(|(o, p)| (o, p / &mass)).collect(),
        )
    }

    /// Exact orthant probability at `thresholds`.
    pub fn orthant_prob(&self, thresholds: &Outcome, mode: OrthantMode) -> Result<Rational> {
        if thresholds.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: thresholds.len(),
            });
        }
        Ok(self.prob(|o| {
            o.0.iter()
                .zip(&thresholds.0)
                .all(|(v, s)| mode.contains(v, s))
        }))
    }

    /// One-dimensional orthant probability of coordinate `i`.
    pub fn marginal_orthant_prob(&self, i: usize, threshold: &Rational, mode: OrthantMode) -> Rational {
        self.prob(|o| mode.contains(&o.0[i], threshold))
    }

    /// Law of `S_1 + ... + S_n`.
    pub fn total(&self) -> JointDist {
        let mut map = BTreeMap::new();
        for (o, p) in &self.atoms {
            *map.entry(Outcome(vec![o.sum()])).or_insert_with(Rational::zero) += p;
        }
        Self::from_map(1, map).expect("pushforward of a valid law")
    }

    /// Applies a permutation to the coordinates: new coordinate `k` is old `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<JointDist> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(Error::InvalidSpec(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        self.marginal(perm)
    }
}

fn annotate(e: Error, ctx: &str) -> Error {
    match e {
        Error::TableIncomplete(m) => Error::TableIncomplete(format!("{ctx}: {m}")),
        Error::NotMonotone(m) => Error::NotMonotone(format!("{ctx}: {m}")),
        other => other,
    }
}

/// Law of the coordinate-wise sum of independent draws, one from each input.
pub fn convolve(ds: &[JointDist], budget: usize) -> Result<JointDist> {
    let (first, rest) = ds.split_first().ok_or(Error::EmptyDistribution)?;
    for d in rest {
        if d.n != first.n {
            return Err(Error::DimensionMismatch {
                expected: first.n,
                found: d.n,
            });
        }
    }
    let mut acc: BTreeMap<Outcome, Rational> = first.atoms.iter().cloned().collect();
    for d in rest {
        let mut next = BTreeMap::new();
        for (a, pa) in &acc {
            for (b, pb) in &d.atoms {
                JointDist::accumulate(&mut next, a.add(b), pa * pb, budget)?;
            }
        }
        acc = next;
    }
    JointDist::from_map(first.n, acc)
}

/// Independent product of several laws, in order.
pub fn product_all(ds: &[JointDist], budget: usize) -> Result<JointDist> {
    let (first, rest) = ds.split_first().ok_or(Error::EmptyDistribution)?;
    rest.iter()
        .try_fold(first.clone(), |acc, d| acc.product(d, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn o(v: &[i64]) -> Outcome {
        Outcome::from_ints(v)
    }

    fn cyclic() -> JointDist {
        JointDist::from_atoms([
            (o(&[1, 0, 2, 0]), q(1, 3)),
            (o(&[0, 2, 1, 0]), q(1, 3)),
            (o(&[0, 2, 0, 1]), q(1, 3)),
        ])
        .unwrap()
    }

    fn coin() -> JointDist {
        JointDist::from_atoms([(o(&[0]), q(1, 2)), (o(&[1]), q(1, 2))]).unwrap()
    }

    #[test]
    fn from_atoms_merges_duplicates() {
        let d = JointDist::from_atoms([
            (o(&[0]), q(1, 3)),
            (o(&[0]), q(1, 3)),
            (o(&[1]), q(1, 3)),
        ])
        .unwrap();
        assert_eq!(d.atoms(), &[(o(&[0]), q(2, 3)), (o(&[1]), q(1, 3))]);
    }

    #[test]
    fn from_atoms_errors() {
        assert!(matches!(
            JointDist::from_atoms([(o(&[0]), q(0, 1)), (o(&[1]), q(1, 1))]),
            Err(Error::ZeroOrNegativeProbability(_))
        ));
        assert!(matches!(
            JointDist::from_atoms([(o(&[0]), q(1, 2)), (o(&[1]), q(1, 3))]),
            Err(Error::ProbabilitiesDoNotSumToOne(_))
        ));
        assert!(matches!(
            JointDist::from_atoms([(o(&[0]), q(1, 2)), (o(&[1, 1]), q(1, 2))]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            JointDist::from_atoms(Vec::<(Outcome, Rational)>::new()),
            Err(Error::EmptyDistribution)
        );
    }

    #[test]
    fn support_grid_is_exact() {
        let d = cyclic();
        assert_eq!(d.support(0), &[q(0, 1), q(1, 1)]);
        assert_eq!(d.support(2), &[q(0, 1), q(1, 1), q(2, 1)]);
        assert_eq!(d.support(3), &[q(0, 1), q(1, 1)]);
    }

    #[test]
    fn product_of_coins() {
        let d = coin().product(&coin(), DEFAULT_ATOM_BUDGET).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.atoms().iter().all(|(_, p)| *p == q(1, 4)));
        assert!(matches!(
            coin().product(&coin(), 3),
            Err(Error::AtomBudgetExceeded { budget: 3 })
        ));
    }

    #[test]
    fn product_with_point_mass_appends_constant() {
        let d = JointDist::point(o(&[0])).product(&coin(), DEFAULT_ATOM_BUDGET).unwrap();
        assert_eq!(d.marginal(&[1]).unwrap(), coin());
        assert_eq!(d.support(0), &[q(0, 1)]);
    }

    #[test]
    fn chess_game_squared_has_nine_atoms() {
        let g = JointDist::univariate([(q(0, 1), q(1, 4)), (q(1, 2), q(1, 2)), (q(1, 1), q(1, 4))])
            .unwrap();
        let d = g.product(&g, DEFAULT_ATOM_BUDGET).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d.atoms().iter().map(|(_, p)| p).sum::<Rational>(), q(1, 1));
        assert_eq!(d.prob_of(&Outcome(vec![q(1, 2), q(1, 2)])), q(1, 4));
    }

    #[test]
    fn convolve_two_exchanges() {
        let x = JointDist::from_atoms([(o(&[0, 1]), q(1, 2)), (o(&[1, 0]), q(1, 2))]).unwrap();
        let s = convolve(&[x.clone(), x], DEFAULT_ATOM_BUDGET).unwrap();
        let want = JointDist::from_atoms([
            (o(&[0, 2]), q(1, 4)),
            (o(&[1, 1]), q(1, 2)),
            (o(&[2, 0]), q(1, 4)),
        ])
        .unwrap();
        assert_eq!(s, want);
    }

    #[test]
    fn convolve_identity_and_errors() {
        let d = cyclic();
        let s = convolve(&[d.clone(), JointDist::point(Outcome::zeros(4))], 10).unwrap();
        assert_eq!(s, d);
        assert!(matches!(
            convolve(&[d.clone(), coin()], 10),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            convolve(&[d.clone(), d], 4),
            Err(Error::AtomBudgetExceeded { .. })
        ));
    }

    #[test]
    fn marginal_of_cyclic_law() {
        let m = cyclic().marginal(&[0, 2]).unwrap();
        let want = JointDist::from_atoms([
            (o(&[1, 2]), q(1, 3)),
            (o(&[0, 1]), q(1, 3)),
            (o(&[0, 0]), q(1, 3)),
        ])
        .unwrap();
        assert_eq!(m, want);
        assert_eq!(cyclic().marginal(&[0, 1, 2, 3]).unwrap(), cyclic());
        assert_eq!(cyclic().marginal(&[]), Err(Error::EmptySubset));
        assert_eq!(
            cyclic().marginal(&[4]),
            Err(Error::IndexOutOfRange { index: 4, n: 4 })
        );
    }

    #[test]
    fn orthant_queries() {
        let d = cyclic();
        assert_eq!(
            d.orthant_prob(&o(&[0, 2, 0, 2]), OrthantMode::Lower).unwrap(),
            q(1, 3)
        );
        assert_eq!(
            d.orthant_prob(&o(&[1, 2, 2, 1]), OrthantMode::Lower).unwrap(),
            q(1, 1)
        );
        assert_eq!(
            d.orthant_prob(&o(&[-1, -1, -1, -1]), OrthantMode::Upper).unwrap(),
            q(1, 1)
        );
        assert!(matches!(
            d.orthant_prob(&o(&[0]), OrthantMode::Lower),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn map_coordinatewise_rules() {
        let d = cyclic();
        let ident: Vec<ValueTable> = (0..4).map(|i| ValueTable::identity(d.support(i))).collect();
        assert_eq!(d.map_coordinatewise(&ident, true).unwrap(), d);

        let mut collapse = ident.clone();
        collapse[2] = ValueTable::constant(d.support(2), q(7, 1));
        let c = d.map_coordinatewise(&collapse, true).unwrap();
        assert_eq!(c.support(2), &[q(7, 1)]);
        assert_eq!(c.len(), 3);

        let mut dec = ident.clone();
        dec[0] = ValueTable::from_pairs([(q(0, 1), q(1, 1)), (q(1, 1), q(0, 1))]);
        assert!(matches!(d.map_coordinatewise(&dec, true), Err(Error::NotMonotone(_))));
        assert!(d.map_coordinatewise(&dec, false).is_ok());

        let mut short = ident;
        short[2] = ValueTable::from_pairs([(q(0, 1), q(0, 1))]);
        assert!(matches!(
            d.map_coordinatewise(&short, false),
            Err(Error::TableIncomplete(_))
        ));
    }

    #[test]
    fn serde_roundtrip_is_canonical() {
        let d = cyclic();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.starts_with("{\"n\":4,\"atoms\":[{\"outcome\":[\"0/1\",\"2/1\",\"0/1\",\"1/1\"],\"prob\":\"1/3\"}"));
        let back: JointDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        let bad = s.replace("\"1/3\"}]", "\"1/4\"}]");
        assert!(serde_json::from_str::<JointDist>(&bad).is_err());
    }

    #[test]
    fn condition_renormalizes() {
        let d = cyclic().condition(|o| o.values()[0].is_zero()).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.atoms().iter().all(|(_, p)| *p == q(1, 2)));
    }
}
