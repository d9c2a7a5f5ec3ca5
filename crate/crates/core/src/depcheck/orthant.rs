//! Lower and upper orthant dependence checks.
//!
//! Both sides of the orthant inequality are step functions of the thresholds
//! that only change at support values, so it suffices to test thresholds on
//! the per-coordinate support grid. For upper orthants one extra threshold
//! below each coordinate's minimum is added so the all-inclusive event is
//! exercised. The joint orthant probabilities of the whole grid are computed
//! at once by cumulative sums over a dense integer array.

use num_bigint::BigInt;


use super::scaled::{fits_i128, ExactInt, Scaled};
use super::{CheckResult, Limits, OrthantWitness, Property, Witness, WorkCounters};
use crate::error::{Error, Result};
use crate::exactdist::{JointDist, OrthantMode, Outcome};
use crate::rational::Rational;

pub fn check_nlod(d: &JointDist, limits: &Limits) -> Result<CheckResult> {
    check_orthant(d, OrthantMode::Lower, limits)
}

pub fn check_nuod(d: &JointDist, limits: &Limits) -> Result<CheckResult> {
    check_orthant(d, OrthantMode::Upper, limits)
}

/// NLOD then NUOD; the first failure supplies the witness.
pub fn check_nod(d: &JointDist, limits: &Limits) -> Result<CheckResult> {
    let lower = check_nlod(d, limits)?;
    let mut work = lower.work;
    if let Some(w) = lower.witness {
        return Ok(CheckResult::violated(Property::Nod, w, work));
    }
    let upper = check_nuod(d, limits)?;
    work += upper.work;
    Ok(match upper.witness {
        Some(w) => CheckResult::violated(Property::Nod, w, work),
        None => CheckResult::holds(Property::Nod, work),
    })
}

/// Threshold values tested for one coordinate.
pub(crate) fn threshold_axis(support: &[Rational], mode: OrthantMode) -> Vec<Rational> {
    match mode {
        OrthantMode::Lower => support.to_vec(),
        OrthantMode::Upper => {
            let mut v = Vec::with_capacity(support.len() + 1);
            v.push(&support[0] - &Rational::one());
            v.extend(support.iter().cloned());
            v
        }
    }
}

/// `P(S_1 ∈ O_1) ⋯ P(S_n ∈ O_n)` for the 1-dimensional orthants at `s`.
pub(crate) fn marginal_product(d: &JointDist, s: &Outcome, mode: OrthantMode) -> Rational {
    (0..d.dim()).fold(Rational::one(), |acc, i| {
        acc * d.marginal_orthant_prob(i, &s.values()[i], mode)
    })
}

pub fn check_orthant(d: &JointDist, mode: OrthantMode, limits: &Limits) -> Result<CheckResult> {
    let property = match mode {
        OrthantMode::Lower => Property::Nlod,
        OrthantMode::Upper => Property::Nuod,
    };
    let n = d.dim();
    let axes: Vec<Vec<Rational>> = d
        .support_grid()
        .iter()
        .map(|s| threshold_axis(s, mode))
        .collect();
    let mut cells: usize = 1;
    for a in &axes {
        cells = cells
            .checked_mul(a.len())
            .filter(|&c| c <= limits.thresholds)
            .ok_or_else(|| Error::SearchBudgetExceeded {
                what: "threshold grid",
                needed: axes
                    .iter()
                    .map(|a| BigInt::from(a.len()))
                    .product::<BigInt>()
                    .to_string(),
                budget: limits.thresholds,
            })?;
    }
    let scaled = Scaled::new(d);
    let bound = num_traits::pow(scaled.denom.clone(), n);
    let (hit, evaluated) = if fits_i128(&bound) {
        search::<i128>(d, mode, &axes, cells, &scaled)
    } else {
        search::<BigInt>(d, mode, &axes, cells, &scaled)
    };
    let work = WorkCounters {
        thresholds: evaluated,
        ..Default::default()
    };
    match hit {
        None => Ok(CheckResult::holds(property, work)),
        Some(t) => {
            let thresholds = Outcome(t.iter().zip(&axes).map(|(&k, a)| a[k].clone()).collect());
            let lhs = d.orthant_prob(&thresholds, mode)?;
            let rhs = marginal_product(d, &thresholds, mode);
            debug_assert!(lhs > rhs);
            Ok(CheckResult::violated(
                property,
                Witness::Orthant(OrthantWitness {
                    thresholds,
                    mode,
                    lhs,
                    rhs,
                }),
                work,
            ))
        }
    }
}

/// Returns the lexicographically first violating grid index, and the number
/// of thresholds evaluated.
fn search<T: ExactInt>(
    d: &JointDist,
    mode: OrthantMode,
    axes: &[Vec<Rational>],
    cells: usize,
    scaled: &Scaled,
) -> (Option<Vec<usize>>, u64) {
    let n = d.dim();
    let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mut stride = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * dims[i + 1];
    }
    let conv = |b: &BigInt| T::from_big(b).expect("magnitude checked");

    // Mass at each atom's support index; for upper mode support index j sits
    // at grid position j, where it counts towards thresholds 0..=j.
    let mut joint = vec![T::zero(); cells];
    let mut marg: Vec<Vec<T>> = dims.iter().map(|&k| vec![T::zero(); k]).collect();
    for ((o, _), w) in d.atoms().iter().zip(&scaled.weights) {
        let w = conv(w);
        let mut at = 0;
        for i in 0..n {
            let j = d.support(i).binary_search(&o.values()[i]).expect("in support");
            at += j * stride[i];
            marg[i][j] = marg[i][j].clone() + w.clone();
        }
        joint[at] = joint[at].clone() + w;
    }
    for i in 0..n {
        accumulate(&mut marg[i], 1, dims[i], mode);
        accumulate_axis(&mut joint, stride[i], dims[i], mode);
    }

    let scale_rest = conv(&num_traits::pow(scaled.denom.clone(), n - 1));
    let mut t = vec![0usize; n];
    let mut evaluated = 0u64;
    for cell in joint.iter() {
        evaluated += 1;
        if !cell.is_zero() {
            let rhs = t
                .iter()
                .enumerate()
                .fold(T::one(), |acc, (i, &k)| acc * marg[i][k].clone());
            if cell.clone() * scale_rest.clone() > rhs {
                return (Some(t), evaluated);
            }
        }
        for i in (0..n).rev() {
            t[i] += 1;
            if t[i] < dims[i] {
                break;
            }
            t[i] = 0;
        }
    }
    (None, evaluated)
}

fn accumulate<T: ExactInt>(v: &mut [T], stride: usize, len: usize, mode: OrthantMode) {
    match mode {
        OrthantMode::Lower => {
            for k in 1..len {
                v[k * stride] = v[k * stride].clone() + v[(k - 1) * stride].clone();
            }
        }
        OrthantMode::Upper => {
            for k in (0..len.saturating_sub(1)).rev() {
                v[k * stride] = v[k * stride].clone() + v[(k + 1) * stride].clone();
            }
        }
    }
}

fn accumulate_axis<T: ExactInt>(joint: &mut [T], stride: usize, len: usize, mode: OrthantMode) {
    let block = stride * len;
    for start in (0..joint.len()).step_by(block) {
        for off in 0..stride {
            accumulate(&mut joint[start + off..], stride, len, mode);
        }
    }
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

    /// Brute-force oracle: every threshold of `axes`, orthant probabilities by direct summation.
    fn brute(d: &JointDist, mode: OrthantMode, axes: &[Vec<Rational>]) -> Option<Outcome> {
        crate::table::product_grid(axes).into_iter().find(|s| {
            d.orthant_prob(s, mode).unwrap() > marginal_product(d, s, mode)
        })
    }

    #[test]
    fn cyclic_law_fails_nlod() {
        let r = check_nlod(&cyclic(), &Limits::default()).unwrap();
        let w = r.orthant_witness().unwrap();
        assert_eq!(w.lhs, q(1, 3));
        assert_eq!(w.rhs, q(2, 9));
        assert_eq!(w.thresholds, o(&[0, 2, 0, 1]));
        assert!(r.revalidate(&cyclic()).unwrap());
    }

    #[test]
    fn witness_is_lexicographically_first() {
        let d = cyclic();
        for mode in [OrthantMode::Lower, OrthantMode::Upper] {
            let axes: Vec<_> = d.support_grid().iter().map(|s| threshold_axis(s, mode)).collect();
            let r = check_orthant(&d, mode, &Limits::default()).unwrap();
            assert_eq!(
                r.orthant_witness().map(|w| w.thresholds.clone()),
                brute(&d, mode, &axes)
            );
        }
    }

    #[test]
    fn product_law_holds_with_equality() {
        let a = JointDist::univariate([(q(0, 1), q(1, 3)), (q(1, 1), q(2, 3))]).unwrap();
        let b = JointDist::univariate([(q(0, 1), q(1, 2)), (q(5, 2), q(1, 2))]).unwrap();
        let d = a.product(&b, 100).unwrap().product(&a, 100).unwrap();
        assert!(check_nod(&d, &Limits::default()).unwrap().is_holds());
    }

    #[test]
    fn positively_dependent_pair_fails_both() {
        let d = JointDist::from_atoms([(o(&[0, 0]), q(1, 2)), (o(&[1, 1]), q(1, 2))]).unwrap();
        let lo = check_nlod(&d, &Limits::default()).unwrap();
        assert_eq!(lo.orthant_witness().unwrap().thresholds, o(&[0, 0]));
        let up = check_nuod(&d, &Limits::default()).unwrap();
        let w = up.orthant_witness().unwrap();
        assert_eq!(w.thresholds, o(&[0, 0]));
        assert_eq!((w.lhs.clone(), w.rhs.clone()), (q(1, 2), q(1, 4)));
        let nod = check_nod(&d, &Limits::default()).unwrap();
        assert_eq!(nod.orthant_witness().unwrap().mode, OrthantMode::Lower);
    }

    #[test]
    fn threshold_budget() {
        let limits = Limits {
            thresholds: 10,
            ..Limits::default()
        };
        assert!(matches!(
            check_nlod(&cyclic(), &limits),
            Err(Error::SearchBudgetExceeded { .. })
        ));
    }

    #[test]
    fn large_denominators_use_bigint_path() {
        let p = Rational::from_big(BigInt::from(1), BigInt::from(3).pow(60));
        let rest = Rational::one() - &p;
        let d = JointDist::from_atoms([(o(&[0, 0]), p), (o(&[1, 1]), rest)]).unwrap();
        let r = check_nlod(&d, &Limits::default()).unwrap();
        assert!(!r.is_holds());
        assert!(r.revalidate(&d).unwrap());
    }
}
