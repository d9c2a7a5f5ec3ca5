//! Upper sets of finite posets of grid points.
//!
//! Points are processed in descending lexicographic order of their oriented
//! values, which is a linear extension of the reversed dominance order. A
//! point may join the set only once every point strictly above it has, so the
//! include/exclude recursion never dead-ends and each leaf is a distinct upper
//! set. The include branch is taken first, so the full set comes first and
//! the empty set last.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::{JointDist, Outcome};
use crate::rational::Rational;
use crate::table::{product_grid, Direction, FunctionTable};

/// An upper set of a grid on `coords`, under the per-coordinate orientation
/// `directions`, represented by its minimal elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpperSet {
    pub coords: Vec<usize>,
    pub directions: Vec<Direction>,
    pub minimal_elements: Vec<Outcome>,
}

impl UpperSet {
    /// Membership: the point dominates some minimal element in the oriented order.
    pub fn contains(&self, point: &Outcome) -> bool {
        self.minimal_elements.iter().any(|m| {
            m.values()
                .iter()
                .zip(point.values())
                .zip(&self.directions)
                .all(|((lo, x), d)| match d {
                    Direction::Increasing => x >= lo,
                    Direction::Decreasing => x <= lo,
                })
        })
    }

    pub fn is_empty(&self) -> bool {
        self.minimal_elements.is_empty()
    }

    /// The indicator as a table over the projected support of `d`.
    pub fn indicator_on(&self, d: &JointDist) -> Result<FunctionTable> {
        let m = d.marginal(&self.coords)?;
        let mut t = FunctionTable::new(self.coords.clone());
        for (p, _) in m.atoms() {
            let v = if self.contains(p) { 1 } else { 0 };
            t.insert(p.clone(), Rational::from_integer(v));
        }
        Ok(t)
    }
}

#[derive(Clone)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64).max(1)])
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    fn contains_all(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// A finite set of distinct points ordered by oriented dominance.
pub(crate) struct Poset {
    /// Original (unoriented) values, in processing order.
    pub points: Vec<Outcome>,
    oriented: Vec<Outcome>,
    directions: Vec<Direction>,
    dominators: Vec<Bits>,
}

impl Poset {
    pub fn new(points: Vec<Outcome>, directions: &[Direction]) -> Self {
        let mut pairs: Vec<(Outcome, Outcome)> = points
            .into_iter()
            .map(|p| {
                let o = Outcome(
                    p.values()
                        .iter()
                        .zip(directions)
                        .map(|(v, d)| d.orient(v))
                        .collect(),
                );
                (o, p)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.cmp(&a.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        let (oriented, points): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let m = points.len();
        let dominators = (0..m)
            .map(|i| {
                let mut b = Bits::new(m);
                for j in 0..i {
                    if oriented[i].dominated_by(&oriented[j]) {
                        b.set(j);
                    }
                }
                b
            })
            .collect();
        Poset {
            points,
            oriented,
            directions: directions.to_vec(),
            dominators,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn index_of(&self, p: &Outcome) -> usize {
        self.points
            .iter()
            .position(|q| q == p)
            .expect("point belongs to the poset")
    }

    /// Visits every upper set in canonical order until the visitor breaks.
    pub fn for_each<F>(&self, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&Bits) -> ControlFlow<()>,
    {
        let mut inc = Bits::new(self.len());
        self.walk(0, &mut inc, visit)
    }

    fn walk<F>(&self, i: usize, inc: &mut Bits, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&Bits) -> ControlFlow<()>,
    {
        if i == self.len() {
            return visit(inc);
        }
        if inc.contains_all(&self.dominators[i]) {
            inc.set(i);
            self.walk(i + 1, inc, visit)?;
            inc.clear(i);
        }
        self.walk(i + 1, inc, visit)
    }

    /// Number of upper sets, or `None` once it exceeds `cap`.
    pub fn count_upto(&self, cap: usize) -> Option<usize> {
        let mut n = 0usize;
        let flow = self.for_each(&mut |_| {
            n += 1;
            if n > cap {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        flow.is_continue().then_some(n)
    }

    /// First upper set (in canonical order) whose weight sum is strictly
    /// positive. Subtrees that cannot reach a positive sum are skipped.
    pub fn first_positive<T: super::scaled::ExactInt>(
        &self,
        weights: &[T],
        nodes: &mut u64,
    ) -> Option<Bits> {
        let m = self.len();
        let mut reach = vec![T::zero(); m + 1];
        for i in (0..m).rev() {
            let w = &weights[i];
            reach[i] = if w.is_positive() {
                reach[i + 1].clone() + w.clone()
            } else {
                reach[i + 1].clone()
            };
        }
        let mut inc = Bits::new(m);
        let mut found = None;
        let _ = self.walk_weighted(0, T::zero(), weights, &reach, &mut inc, nodes, &mut found);
        found
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_weighted<T: super::scaled::ExactInt>(
        &self,
        i: usize,
        sum: T,
        weights: &[T],
        reach: &[T],
        inc: &mut Bits,
        nodes: &mut u64,
        found: &mut Option<Bits>,
    ) -> ControlFlow<()> {
        *nodes += 1;
        if !(sum.clone() + reach[i].clone()).is_positive() {
            return ControlFlow::Continue(());
        }
        if i == self.len() {
            *found = Some(inc.clone());
            return ControlFlow::Break(());
        }
        if inc.contains_all(&self.dominators[i]) {
            inc.set(i);
            self.walk_weighted(i + 1, sum.clone() + weights[i].clone(), weights, reach, inc, nodes, found)?;
            inc.clear(i);
        }
        self.walk_weighted(i + 1, sum, weights, reach, inc, nodes, found)
    }

    pub fn is_trivial(&self, b: &Bits) -> bool {
        let c = b.count();
        c == 0 || c == self.len()
    }

    /// Minimal elements of the member set `b`.
    pub fn to_upper_set(&self, coords: Vec<usize>, b: &Bits) -> UpperSet {
        let members: Vec<usize> = (0..self.len()).filter(|&i| b.get(i)).collect();
        let mut minimal: Vec<Outcome> = members
            .iter()
            .filter(|&&i| {
                !members
                    .iter()
                    .any(|&j| j != i && self.oriented[j].dominated_by(&self.oriented[i]))
            })
            .map(|&i| self.points[i].clone())
            .collect();
        minimal.sort();
        UpperSet {
            coords,
            directions: self.directions.clone(),
            minimal_elements: minimal,
        }
    }
}

/// Every upper set of the product grid (empty and full included), in
/// canonical order, failing if there are more than `budget`.
pub fn enumerate_upper_sets(grid: &[Vec<Rational>], budget: usize) -> Result<Vec<UpperSet>> {
    if grid.is_empty() || grid.iter().any(|a| a.is_empty()) {
        return Err(Error::EmptySubset);
    }
    let mut axes = grid.to_vec();
    for a in &mut axes {
        a.sort();
        a.dedup();
    }
    let dirs = vec![Direction::Increasing; axes.len()];
    let poset = Poset::new(product_grid(&axes), &dirs);
    if poset.count_upto(budget).is_none() {
        return Err(Error::SearchBudgetExceeded {
            what: "upper sets",
            needed: format!("more than {budget}"),
            budget,
        });
    }
    let coords: Vec<usize> = (0..axes.len()).collect();
    let mut out = Vec::new();
    let _ = poset.for_each(&mut |b| {
        out.push(poset.to_upper_set(coords.clone(), b));
        ControlFlow::Continue(())
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    fn axis(m: i64) -> Vec<Rational> {
        (0..m).map(|v| q(v, 1)).collect()
    }

    /// Brute force: every subset of the grid that is closed upward.
    fn brute_count(grid: &[Vec<Rational>]) -> usize {
        let pts = product_grid(grid);
        let m = pts.len();
        (0u64..1 << m)
            .filter(|mask| {
                (0..m).all(|i| {
                    mask >> i & 1 == 0
                        || (0..m).all(|j| !pts[i].dominated_by(&pts[j]) || mask >> j & 1 == 1)
                })
            })
            .count()
    }

    #[test]
    fn chain_has_m_plus_one_upper_sets() {
        for m in 1..6 {
            assert_eq!(enumerate_upper_sets(&[axis(m)], 100).unwrap().len(), m as usize + 1);
        }
    }

    #[test]
    fn square_grids() {
        assert_eq!(brute_count(&[axis(2), axis(2)]), 6);
        assert_eq!(brute_count(&[axis(3), axis(3)]), 20);
        assert_eq!(enumerate_upper_sets(&[axis(2), axis(2)], 100).unwrap().len(), 6);
        assert_eq!(enumerate_upper_sets(&[axis(3), axis(3)], 100).unwrap().len(), 20);
    }

    #[test]
    fn order_starts_full_and_ends_empty() {
        let sets = enumerate_upper_sets(&[axis(3)], 10).unwrap();
        assert_eq!(sets[0].minimal_elements, vec![Outcome::from_ints(&[0])]);
        assert_eq!(sets[1].minimal_elements, vec![Outcome::from_ints(&[1])]);
        assert!(sets.last().unwrap().is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            enumerate_upper_sets(&[axis(3), axis(3)], 19),
            Err(Error::SearchBudgetExceeded { .. })
        ));
    }

    #[test]
    fn decreasing_orientation_gives_lower_sets() {
        let pts = product_grid(&[axis(2)]);
        let p = Poset::new(pts, &[Direction::Decreasing]);
        let mut seen = Vec::new();
        let _ = p.for_each(&mut |b| {
            seen.push(p.to_upper_set(vec![0], b));
            ControlFlow::Continue(())
        });
        assert_eq!(seen.len(), 3);
        assert!(seen[1].contains(&Outcome::from_ints(&[0])));
        assert!(!seen[1].contains(&Outcome::from_ints(&[1])));
    }

    proptest! {
        #[test]
        fn enumeration_matches_brute_force(a in 1i64..4, b in 1i64..4, c in 1i64..3) {
            let grid = if a * b * c <= 12 { vec![axis(a), axis(b), axis(c)] } else { vec![axis(a), axis(b)] };
            let sets = enumerate_upper_sets(&grid, 1_000_000).unwrap();
            prop_assert_eq!(sets.len(), brute_count(&grid));
            // distinct and upward closed
            let pts = product_grid(&grid);
            let mut members: Vec<Vec<bool>> = sets.iter().map(|u| pts.iter().map(|p| u.contains(p)).collect()).collect();
            for m in &members {
                for (i, x) in pts.iter().enumerate() {
                    for (j, y) in pts.iter().enumerate() {
                        if m[i] && x.dominated_by(y) { prop_assert!(m[j]); }
                    }
                }
            }
            members.sort();
            members.dedup();
            prop_assert_eq!(members.len(), sets.len());
        }
    }
}
