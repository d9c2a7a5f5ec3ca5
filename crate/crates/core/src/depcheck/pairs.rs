//! Negative association and its signed-monotone extension.
//!
//! For every coordinate subset `T` (by size, then lexicographically) the law
//! is marginalized onto `T`, and for every split of `T` into blocks `A1`
//! (holding the smallest coordinate) and `A2` the search looks for upper
//! sets `U1`, `U2` of the projected supports with
//! `P(U1 ∩ U2) > P(U1) P(U2)`. Increasing functions on a finite set are
//! nonnegative combinations of upper-set indicators plus a constant, so by
//! bilinearity of covariance no positive pair means NA holds.
//!
//! For a fixed `U1` the covariance with `U2` is `Σ_{x ∈ U2} c(x)` for a
//! weight vector `c` over the `A2` points, so the inner loop is a pruned
//! walk over the upper sets of `A2`.

use std::ops::ControlFlow;

use num_bigint::BigInt;

use super::scaled::{fits_i128, ExactInt, Scaled};
use super::upper::{Bits, Poset};
use super::{CheckResult, Limits, MonotonePairWitness, Property, Witness, WorkCounters};
use crate::error::{Error, Result};
use crate::exactdist::{JointDist, Outcome};
use crate::rational::Rational;
use crate::table::{Direction, FunctionTable};

pub fn check_na(d: &JointDist, limits: &Limits) -> Result<CheckResult> {
    search(d, limits, false)
}

/// Like [`check_na`] but each coordinate of each block may be oriented either way.
pub fn check_signed_monotone(d: &JointDist, limits: &Limits) -> Result<CheckResult> {
    search(d, limits, true)
}

/// Exact `E[f1 f2] - E[f1] E[f2]` under `d`.
pub fn covariance_of(d: &JointDist, f1: &FunctionTable, f2: &FunctionTable) -> Result<Rational> {
    for &c in f1.coords().iter().chain(f2.coords()) {
        if c >= d.dim() {
            return Err(Error::IndexOutOfRange { index: c, n: d.dim() });
        }
    }
    if let Some(&c) = f1.coords().iter().find(|c| f2.coords().contains(c)) {
        return Err(Error::OverlappingSubsets(c));
    }
    let mut e12 = Rational::zero();
    let mut e1 = Rational::zero();
    let mut e2 = Rational::zero();
    for (o, p) in d.atoms() {
        let v1 = f1.eval_full(o)?;
        let v2 = f2.eval_full(o)?;
        e12 += &v1 * &v2 * p;
        e1 += v1 * p;
        e2 += v2 * p;
    }
    Ok(e12 - e1 * e2)
}

fn search(d: &JointDist, limits: &Limits, signed: bool) -> Result<CheckResult> {
    let property = if signed {
        Property::SignedMonotone
    } else {
        Property::Na
    };
    let n = d.dim();
    if n < 2 {
        return Err(Error::InvalidSpec(
            "association checks need at least two coordinates".into(),
        ));
    }
    let max = limits.max_subset_size.min(n);
    let mut work = WorkCounters::default();
    for size in 2..=max {
        for t in combinations(n, size) {
            work.subsets += 1;
            let m = d.marginal(&t)?;
            let scaled = Scaled::new(&m);
            let full = (1u32 << size) - 1;
            for mask in (1..full).filter(|m| m & 1 == 1) {
                work.partitions += 1;
                let a1: Vec<usize> = (0..size).filter(|k| mask >> k & 1 == 1).collect();
                let a2: Vec<usize> = (0..size).filter(|k| mask >> k & 1 == 0).collect();
                for p1 in profiles(a1.len(), signed, true) {
                    for p2 in profiles(a2.len(), signed, false) {
                        work.sign_profiles += 1;
                        let split = Split {
                            m: &m,
                            scaled: &scaled,
                            a1: &a1,
                            a2: &a2,
                        };
                        if let Some((u1, u2)) = split.run(&p1, &p2, limits, &mut work)? {
                            let witness = finish(d, &t, &a1, &a2, u1, u2)?;
                            return Ok(CheckResult::violated(property, witness, work));
                        }
                    }
                }
            }
        }
    }
    if max < n {
        return Err(Error::SearchBudgetExceeded {
            what: "coordinate subset size",
            needed: n.to_string(),
            budget: limits.max_subset_size,
        });
    }
    Ok(CheckResult::holds(property, work))
}

fn finish(
    d: &JointDist,
    t: &[usize],
    a1: &[usize],
    a2: &[usize],
    mut u1: super::UpperSet,
    mut u2: super::UpperSet,
) -> Result<Witness> {
    u1.coords = a1.iter().map(|&k| t[k]).collect();
    u2.coords = a2.iter().map(|&k| t[k]).collect();
    let covariance = covariance_of(d, &u1.indicator_on(d)?, &u2.indicator_on(d)?)?;
    debug_assert!(covariance.is_positive());
    Ok(Witness::MonotonePair(MonotonePairWitness {
        a1: u1.coords.clone(),
        a2: u2.coords.clone(),
        u1,
        u2,
        covariance,
    }))
}

struct Split<'a> {
    m: &'a JointDist,
    scaled: &'a Scaled,
    a1: &'a [usize],
    a2: &'a [usize],
}

type Found = Option<(super::UpperSet, super::UpperSet)>;

impl Split<'_> {
    fn run(
        &self,
        dirs1: &[Direction],
        dirs2: &[Direction],
        limits: &Limits,
        work: &mut WorkCounters,
    ) -> Result<Found> {
        let proj1: Vec<Outcome> = self.m.atoms().iter().map(|(o, _)| o.project(self.a1)).collect();
        let proj2: Vec<Outcome> = self.m.atoms().iter().map(|(o, _)| o.project(self.a2)).collect();
        let poset1 = Poset::new(proj1.clone(), dirs1);
        let poset2 = Poset::new(proj2.clone(), dirs2);

        let budget = limits.upper_set_pairs;
        let exceeded = |needed: String| Error::SearchBudgetExceeded {
            what: "upper-set pairs",
            needed,
            budget,
        };
        let c1 = poset1
            .count_upto(budget)
            .ok_or_else(|| exceeded(format!("more than {budget}")))?;
        let c2 = poset2
            .count_upto(budget)
            .ok_or_else(|| exceeded(format!("more than {budget}")))?;
        match c1.checked_mul(c2) {
            Some(p) if p <= budget => {}
            _ => return Err(exceeded(format!("{c1} x {c2}"))),
        }

        let cells: Vec<(usize, usize)> = proj1
            .iter()
            .zip(&proj2)
            .map(|(x, y)| (poset1.index_of(x), poset2.index_of(y)))
            .collect();
        let denom = &self.scaled.denom;
        // |c(x)| <= denom^2 and sums run over at most poset2.len() points.
        let bound = denom * denom * BigInt::from(poset2.len() + 1);
        let hit = if fits_i128(&bound) {
            self.scan::<i128>(&poset1, &poset2, &cells, work)
        } else {
            self.scan::<BigInt>(&poset1, &poset2, &cells, work)
        };
        Ok(hit.map(|(b1, b2)| (poset1.to_upper_set(vec![], &b1), poset2.to_upper_set(vec![], &b2))))
    }

    fn scan<T: ExactInt>(
        &self,
        poset1: &Poset,
        poset2: &Poset,
        cells: &[(usize, usize)],
        work: &mut WorkCounters,
    ) -> Option<(Bits, Bits)> {
        let conv = |b: &BigInt| T::from_big(b).expect("magnitude checked");
        let denom = conv(&self.scaled.denom);
        let weights: Vec<T> = self.scaled.weights.iter().map(conv).collect();
        let mut marg1 = vec![T::zero(); poset1.len()];
        let mut marg2 = vec![T::zero(); poset2.len()];
        for (&(i, j), w) in cells.iter().zip(&weights) {
            marg1[i] = marg1[i].clone() + w.clone();
            marg2[j] = marg2[j].clone() + w.clone();
        }
        let mut found = None;
        let _ = poset1.for_each(&mut |u1| {
            if poset1.is_trivial(u1) {
                return ControlFlow::Continue(());
            }
            work.upper_sets += 1;
            let p1 = (0..poset1.len())
                .filter(|&i| u1.get(i))
                .fold(T::zero(), |acc, i| acc + marg1[i].clone());
            let mut joint = vec![T::zero(); poset2.len()];
            for (&(i, j), w) in cells.iter().zip(&weights) {
                if u1.get(i) {
                    joint[j] = joint[j].clone() + w.clone();
                }
            }
            let c: Vec<T> = joint
                .into_iter()
                .zip(&marg2)
                .map(|(jw, m2)| denom.clone() * jw - p1.clone() * m2.clone())
                .collect();
            match poset2.first_positive(&c, &mut work.pairs) {
                Some(u2) => {
                    found = Some((u1.clone(), u2));
                    ControlFlow::Break(())
                }
                None => ControlFlow::Continue(()),
            }
        });
        found
    }
}

/// k-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Orientation profiles in canonical order (bit set = decreasing). With
/// `fix_first`, the first coordinate stays increasing: reversing every
/// coordinate of both blocks swaps upper sets for their complements and
/// leaves all covariances unchanged.
fn profiles(k: usize, signed: bool, fix_first: bool) -> Vec<Vec<Direction>> {
    if !signed {
        return vec![vec![Direction::Increasing; k]];
    }
    (0u32..1 << k)
        .filter(|m| !fix_first || m & 1 == 0)
        .map(|m| {
            (0..k)
                .map(|i| {
                    if m >> i & 1 == 1 {
                        Direction::Decreasing
                    } else {
                        Direction::Increasing
                    }
                })
                .collect()
        })
        .collect()
}
