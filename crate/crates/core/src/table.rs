//! Finite value tables: per-coordinate maps and multivariate functions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::Outcome;
use crate::rational::Rational;

/// A map `value -> value` on one coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueTable(BTreeMap<Rational, Rational>);

impl ValueTable {
    pub fn from_pairs<I: IntoIterator<Item = (Rational, Rational)>>(pairs: I) -> Self {
        ValueTable(pairs.into_iter().collect())
    }

    pub fn identity(support: &[Rational]) -> Self {
        Self::from_pairs(support.iter().map(|v| (v.clone(), v.clone())))
    }

    pub fn constant(support: &[Rational], c: Rational) -> Self {
        Self::from_pairs(support.iter().map(|v| (v.clone(), c.clone())))
    }

    pub fn from_fn<F: Fn(&Rational) -> Rational>(support: &[Rational], f: F) -> Self {
        Self::from_pairs(support.iter().map(|v| (v.clone(), f(v))))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.0.iter()
    }

    pub fn get(&self, x: &Rational) -> Option<&Rational> {
        self.0.get(x)
    }

    pub fn check_covers(&self, support: &[Rational]) -> Result<()> {
        match support.iter().find(|v| !self.0.contains_key(v)) {
            Some(v) => Err(Error::TableIncomplete(format!("value {v}"))),
            None => Ok(()),
        }
    }

    /// `support` must be sorted ascending.
    pub fn check_nondecreasing(&self, support: &[Rational]) -> Result<()> {
        self.check_direction(support, true)
    }

    pub fn check_nonincreasing(&self, support: &[Rational]) -> Result<()> {
        self.check_direction(support, false)
    }

    fn check_direction(&self, support: &[Rational], up: bool) -> Result<()> {
        self.check_covers(support)?;
        for w in support.windows(2) {
            let (a, b) = (&self.0[&w[0]], &self.0[&w[1]]);
            if (up && a > b) || (!up && a < b) {
                return Err(Error::NotMonotone(format!(
                    "f({}) = {a}, f({}) = {b}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Per-coordinate orientation of a monotone function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn orient(self, v: &Rational) -> Rational {
        match self {
            Direction::Increasing => v.clone(),
            Direction::Decreasing => -v,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRepr {
    point: Outcome,
    value: Rational,
}

#[derive(Serialize, Deserialize)]
struct FunctionTableRepr {
    coords: Vec<usize>,
    entries: Vec<EntryRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<Rational>,
}

/// A real function of the coordinates `coords`, given by explicit entries
/// and an optional value everywhere else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "FunctionTableRepr", into = "FunctionTableRepr")]
pub struct FunctionTable {
    coords: Vec<usize>,
    entries: BTreeMap<Outcome, Rational>,
    default: Option<Rational>,
}

impl From<FunctionTableRepr> for FunctionTable {
    fn from(r: FunctionTableRepr) -> Self {
        FunctionTable {
            coords: r.coords,
            entries: r.entries.into_iter().map(|e| (e.point, e.value)).collect(),
            default: r.default,
        }
    }
}

impl From<FunctionTable> for FunctionTableRepr {
    fn from(t: FunctionTable) -> Self {
        FunctionTableRepr {
            coords: t.coords,
            entries: t
                .entries
                .into_iter()
                .map(|(point, value)| EntryRepr { point, value })
                .collect(),
            default: t.default,
        }
    }
}

impl FunctionTable {
    pub fn new(coords: Vec<usize>) -> Self {
        FunctionTable {
            coords,
            entries: BTreeMap::new(),
            default: None,
        }
    }

    pub fn with_default(mut self, v: Rational) -> Self {
        self.default = Some(v);
        self
    }

    pub fn with_entry(mut self, point: Outcome, v: Rational) -> Self {
        self.insert(point, v);
        self
    }

    pub fn insert(&mut self, point: Outcome, v: Rational) {
        assert_eq!(point.len(), self.coords.len(), "point arity");
        self.entries.insert(point, v);
    }

    /// `f(x) = x_k` for a single coordinate `coord`.
    pub fn projection(coord: usize, support: &[Rational]) -> Self {
        let mut t = Self::new(vec![coord]);
        for v in support {
            t.insert(Outcome(vec![v.clone()]), v.clone());
        }
        t
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn entries(&self) -> &BTreeMap<Outcome, Rational> {
        &self.entries
    }

    pub fn default_value(&self) -> Option<&Rational> {
        self.default.as_ref()
    }

    /// Value at a projected point.
    pub fn eval(&self, point: &Outcome) -> Result<Rational> {
        self.entries
            .get(point)
            .or(self.default.as_ref())
            .cloned()
            .ok_or_else(|| Error::TableIncomplete(format!("{point:?} on coordinates {:?}", self.coords)))
    }

    /// Value at the projection of a full outcome.
    pub fn eval_full(&self, outcome: &Outcome) -> Result<Rational> {
        self.eval(&outcome.project(&self.coords))
    }

    /// Checks coordinate-wise monotonicity with the given orientation on `points`.
    pub fn check_monotone(&self, points: &[Outcome], dirs: &[Direction]) -> Result<()> {
        assert_eq!(dirs.len(), self.coords.len());
        let oriented: Vec<Outcome> = points
            .iter()
            .map(|p| Outcome(p.0.iter().zip(dirs).map(|(v, d)| d.orient(v)).collect()))
            .collect();
        for (a, oa) in points.iter().zip(&oriented) {
            let fa = self.eval(a)?;
            for (b, ob) in points.iter().zip(&oriented) {
                if oa != ob && oa.dominated_by(ob) {
                    let fb = self.eval(b)?;
                    if fa > fb {
                        return Err(Error::NotMonotone(format!(
                            "f{a:?} = {fa} > f{b:?} = {fb}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_increasing(&self, points: &[Outcome]) -> Result<()> {
        self.check_monotone(points, &vec![Direction::Increasing; self.coords.len()])
    }
}

/// All points of the product grid, in lexicographic order.
pub fn product_grid(grid: &[Vec<Rational>]) -> Vec<Outcome> {
    let mut out = vec![Outcome(Vec::new())];
    for axis in grid {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut w = p.0.clone();
                    w.push(v.clone());
                    Outcome(w)
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn value_table_direction_checks() {
        let s = [q(0, 1), q(1, 1), q(2, 1)];
        let t = ValueTable::from_fn(&s, |v| v * &q(2, 1));
        assert!(t.check_nondecreasing(&s).is_ok());
        assert!(matches!(t.check_nonincreasing(&s), Err(Error::NotMonotone(_))));
        let partial = ValueTable::from_pairs([(q(0, 1), q(0, 1))]);
        assert!(matches!(partial.check_covers(&s), Err(Error::TableIncomplete(_))));
    }

    #[test]
    fn function_table_defaults() {
        let f = FunctionTable::new(vec![0, 2])
            .with_default(q(0, 1))
            .with_entry(Outcome::from_ints(&[0, 1]), q(1, 1));
        assert_eq!(f.eval(&Outcome::from_ints(&[0, 1])).unwrap(), q(1, 1));
        assert_eq!(f.eval(&Outcome::from_ints(&[5, 5])).unwrap(), q(0, 1));
        assert_eq!(f.eval_full(&Outcome::from_ints(&[0, 9, 1])).unwrap(), q(1, 1));
        let g = FunctionTable::new(vec![0]);
        assert!(matches!(g.eval(&Outcome::from_ints(&[0])), Err(Error::TableIncomplete(_))));
    }

    #[test]
    fn monotone_check_respects_orientation() {
        let pts = product_grid(&[vec![q(0, 1), q(1, 1)], vec![q(0, 1), q(1, 1)]]);
        let f = FunctionTable::new(vec![0, 1])
            .with_default(q(0, 1))
            .with_entry(Outcome::from_ints(&[0, 1]), q(1, 1));
        assert!(f.check_increasing(&pts).is_err());
        assert!(f
            .check_monotone(&pts, &[Direction::Decreasing, Direction::Increasing])
            .is_ok());
    }

    #[test]
    fn product_grid_is_lexicographic() {
        let g = product_grid(&[vec![q(0, 1), q(1, 1)], vec![q(0, 1), q(1, 1), q(2, 1)]]);
        assert_eq!(g.len(), 6);
        let mut sorted = g.clone();
        sorted.sort();
        assert_eq!(g, sorted);
    }
}
