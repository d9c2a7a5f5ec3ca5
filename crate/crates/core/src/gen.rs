//! Seeded generators of small random instances for sweeps and property tests.
//!
//! Every generator is a pure function of the RNG state, so a failing
//! instance is reproduced from its seed.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::depcheck::{check_na, Limits};
use crate::error::{Error, Result};
use crate::exactdist::{JointDist, Outcome};
use crate::models::{pairs, FamilyOutput, MonotoneFamilySpec, PairRewardLaw, RoundRobinSpec};
use crate::rational::{q, Rational};
use crate::staged::{StageKernel, StagedModel};
use crate::table::{product_grid, FunctionTable, ValueTable};

/// `k` positive probabilities with small denominators, summing to one.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..k).map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

/// A rational in `[0, 1]` with denominator at most `max_den`.
pub fn random_probability<R: Rng + ?Sized>(rng: &mut R, max_den: i64) -> Rational {
    let d = rng.random_range(1..=max_den);
    q(rng.random_range(0..=d), d)
}

/// Law on `1..=max_support` distinct values drawn from `candidates`.
pub fn random_univariate<R: Rng + ?Sized>(
    rng: &mut R,
    candidates: &[Rational],
    max_support: usize,
) -> Vec<(Rational, Rational)> {
    let k = rng.random_range(1..=max_support.min(candidates.len()));
    let mut values: Vec<Rational> = candidates.choose_multiple(rng, k).cloned().collect();
    values.sort();
    values.into_iter().zip(random_weights(rng, k)).collect()
}

fn small_ints(max: i64) -> Vec<Rational> {
    (0..=max).map(Rational::from_integer).collect()
}

/// Pairs `(x, y, p)` with `x` increasing and `y` decreasing in the
/// quantile, i.e. the countermonotone coupling of two laws.
pub fn countermonotone(a: &[(Rational, Rational)], b: &[(Rational, Rational)]) -> Vec<(Rational, Rational, Rational)> {
    let mut out = Vec::new();
    let mut bs: Vec<_> = b.to_vec();
    bs.reverse();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1.clone(), bs[0].1.clone());
    loop {
        let t = if ra < rb { ra.clone() } else { rb.clone() };
        out.push((a[i].0.clone(), bs[j].0.clone(), t.clone()));
        ra -= &t;
        rb -= &t;
        if ra.is_zero() {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1.clone();
        }
        if rb.is_zero() {
            j += 1;
            if j == bs.len() {
                break;
            }
            rb = bs[j].1.clone();
        }
    }
    out
}

/// Independent coordinates with laws `marginals`, except that coordinates
/// `pair` (if any) are countermonotone.
fn coupled_law(marginals: &[Vec<(Rational, Rational)>], pair: Option<(usize, usize)>) -> Result<JointDist> {
    let n = marginals.len();
    let mut partial: Vec<(Outcome, Rational)> = vec![(Outcome::zeros(n), Rational::one())];
    let mut extend = |coords: &[usize], atoms: Vec<(Vec<Rational>, Rational)>| {
        partial = partial
            .iter()
            .flat_map(|(o, p)| {
                atoms.iter().map(move |(vals, w)| {
                    let mut o = o.clone();
                    for (&c, v) in coords.iter().zip(vals) {
                        o.0[c] = v.clone();
                    }
                    (o, p * w)
                })
            })
            .collect();
    };
    for i in 0..n {
        match pair {
            Some((a, b)) if i == a => {
                let atoms = countermonotone(&marginals[a], &marginals[b])
                    .into_iter()
                    .map(|(x, y, p)| (vec![x, y], p))
                    .collect();
                extend(&[a, b], atoms);
            }
            Some((_, b)) if i == b => {}
            _ => extend(&[i], marginals[i].iter().map(|(v, p)| (vec![v.clone()], p.clone())).collect()),
        }
    }
    JointDist::from_atoms(partial)
}

fn mixture(parts: &[(Rational, JointDist)]) -> Result<JointDist> {
    let n = parts[0].1.dim();
    let mut map = BTreeMap::new();
    for (w, d) in parts.iter().filter(|(w, _)| w.is_positive()) {
        for (o, p) in d.atoms() {
            JointDist::accumulate(&mut map, o.clone(), w * p, usize::MAX)?;
        }
    }
    JointDist::from_map(n, map)
}

/// Law with the given marginals that is a mixture of the independent
/// coupling and a countermonotone pair coupling; lower and upper orthant
/// dependent by construction.
pub fn random_nod_law<R: Rng + ?Sized>(rng: &mut R, marginals: &[Vec<(Rational, Rational)>]) -> Result<JointDist> {
    let n = marginals.len();
    let product = coupled_law(marginals, None)?;
    if n < 2 {
        return Ok(product);
    }
    let a = rng.random_range(0..n);
    let b = (a + rng.random_range(1..n)) % n;
    let lambda = q(rng.random_range(0..=4), 4);
    let pair = coupled_law(marginals, Some((a.min(b), a.max(b))))?;
    mixture(&[(lambda.clone(), product), (Rational::one() - lambda, pair)])
}

/// Candidate law on `{0, .., max_value}^n` of one of several shapes.
pub fn random_law<R: Rng + ?Sized>(rng: &mut R, n: usize, max_support: usize, max_value: i64) -> Result<JointDist> {
    let values = small_ints(max_value);
    let marginals: Vec<_> = (0..n).map(|_| random_univariate(rng, &values, max_support)).collect();
    match rng.random_range(0..4) {
        0 => coupled_law(&marginals, None),
        1 => random_nod_law(rng, &marginals),
        2 => {
            // one unit split among the coordinates, possibly none
            let k = n + 1;
            let w = random_weights(rng, k);
            let scale = Rational::from_integer(rng.random_range(1..=max_value.max(1)));
            JointDist::from_atoms((0..k).zip(w).map(|(i, p)| {
                let mut o = Outcome::zeros(n);
                if i < n {
                    o.0[i] = scale.clone();
                }
                (o, p)
            }))
        }
        _ => {
            let atoms = rng.random_range(2..=4);
            let w = random_weights(rng, atoms);
            JointDist::from_atoms(w.into_iter().map(|p| {
                let o = Outcome((0..n).map(|i| {
                    let m = &marginals[i];
                    m[rng.random_range(0..m.len())].0.clone()
                }).collect());
                (o, p)
            }))
        }
    }
}

/// Rejection-samples `random_law` until `check_na` holds.
pub fn random_na_law<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_support: usize,
    limits: &Limits,
) -> Result<JointDist> {
    for _ in 0..10_000 {
        let d = random_law(rng, n, max_support, 2)?;
        if d.support_grid().iter().any(|s| s.len() > max_support) {
            continue;
        }
        if check_na(&d, limits)?.is_holds() {
            return Ok(d);
        }
    }
    Err(Error::InvalidSpec("no NA law found in 10000 draws".into()))
}

/// General round-robin on `n` players with small finite pair laws.
pub fn random_round_robin<R: Rng + ?Sized>(rng: &mut R, n: usize, max_support: usize) -> Result<RoundRobinSpec> {
    let laws = pairs(n)
        .map(|(i, j)| {
            let r = [q(1, 1), q(2, 1), q(3, 2)].choose(rng).cloned().expect("nonempty");
            let den = rng.random_range(1..=3);
            let candidates: Vec<Rational> = (0..=den).map(|k| &r * q(k, den)).collect();
            PairRewardLaw::new(i, j, r, random_univariate(rng, &candidates, max_support))
        })
        .collect::<Result<Vec<_>>>()?;
    RoundRobinSpec::new(n, laws)
}

/// `(p_win, p_draw)` with `p_win + p_draw <= 1`.
pub fn random_chess_params<R: Rng + ?Sized>(rng: &mut R) -> (Rational, Rational) {
    let d = rng.random_range(2..=12);
    let w = rng.random_range(0..=d);
    let dr = rng.random_range(0..=d - w);
    (q(w, d), q(dr, d))
}

/// Increasing table on `grid`: a running maximum of random values over the
/// dominated points, plus a nonnegative combination of coordinate ranks.
pub fn random_increasing_table<R: Rng + ?Sized>(rng: &mut R, grid: &[Vec<Rational>]) -> FunctionTable {
    let points = product_grid(grid);
    let base: Vec<i64> = points.iter().map(|_| rng.random_range(0..=3)).collect();
    let slopes: Vec<i64> = grid.iter().map(|_| rng.random_range(0..=2)).collect();
    let mut f = FunctionTable::new((0..grid.len()).collect());
    for p in &points {
        let peak = points
            .iter()
            .zip(&base)
            .filter(|(q, _)| q.dominated_by(p))
            .map(|(_, &b)| b)
            .max()
            .unwrap_or(0);
        let linear: i64 = p
            .values()
            .iter()
            .zip(grid)
            .zip(&slopes)
            .map(|((v, axis), s)| s * axis.iter().position(|a| a == v).expect("on grid") as i64)
            .sum();
        f.insert(p.clone(), Rational::from_integer(peak + linear));
    }
    f
}

/// Up to `max_vars` independent variables, optional decreasing transforms,
/// and 2 or 3 outputs over disjoint argument groups.
pub fn random_family<R: Rng + ?Sized>(rng: &mut R, max_vars: usize, max_support: usize) -> Result<MonotoneFamilySpec> {
    let k = rng.random_range(1..=max_vars);
    let values = small_ints(3);
    let x_laws: Vec<_> = (0..k).map(|_| random_univariate(rng, &values, max_support)).collect();
    let g_tables: Vec<Option<ValueTable>> = x_laws
        .iter()
        .map(|l| {
            rng.random_bool(0.6).then(|| {
                let mut level = rng.random_range(0..=2);
                let mut g = Vec::new();
                for (x, _) in l.iter().rev() {
                    g.push((x.clone(), Rational::from_integer(level)));
                    level += rng.random_range(0..=2);
                }
                ValueTable::from_pairs(g)
            })
        })
        .collect();
    let m = rng.random_range(2..=3);
    let mut a_sets = vec![Vec::new(); m];
    let mut b_sets = vec![Vec::new(); m];
    for (i, g) in g_tables.iter().enumerate() {
        let a = rng.random_range(0..=m);
        if a < m {
            a_sets[a].push(i);
        }
        if g.is_some() {
            let b = rng.random_range(0..=m);
            if b < m {
                b_sets[b].push(i);
            }
        }
    }
    let mut spec = MonotoneFamilySpec {
        x_laws,
        g_tables,
        outputs: Vec::with_capacity(m),
    };
    for (a_set, b_set) in a_sets.into_iter().zip(b_sets) {
        let mut grid: Vec<Vec<Rational>> = a_set
            .iter()
            .map(|&a| spec.x_laws[a].iter().map(|(v, _)| v.clone()).collect())
            .collect();
        for &b in &b_set {
            let g = spec.g_tables[b].as_ref().expect("b sets use transformed variables");
            let mut ys: Vec<Rational> = spec.x_laws[b].iter().map(|(x, _)| g.get(x).expect("covers").clone()).collect();
            ys.sort();
            ys.dedup();
            grid.push(ys);
        }
        let f = random_increasing_table(rng, &grid);
        spec.outputs.push(FamilyOutput { a_set, b_set, f });
    }
    Ok(spec)
}

/// Staged model with `stages` stages on `n` coordinates whose increments
/// take at most `max_support` values in `{0, 1, 2}`.
///
/// Each coordinate's conditional marginal is drawn once per (stage,
/// coordinate, own prefix value), so locality holds by construction; each
/// conditional joint law is a [`random_nod_law`] with those marginals.
pub fn random_staged<R: Rng + ?Sized>(rng: &mut R, n: usize, stages: usize, max_support: usize) -> Result<StagedModel> {
    let values = small_ints(2);
    let mut marginal_cache: BTreeMap<(usize, usize, Rational), Vec<(Rational, Rational)>> = BTreeMap::new();
    let mut law_for = |rng: &mut R, k: usize, prefix: &Outcome| -> Result<JointDist> {
        let marginals: Vec<_> = (0..n)
            .map(|i| {
                marginal_cache
                    .entry((k, i, prefix.values()[i].clone()))
                    .or_insert_with(|| random_univariate(rng, &values, max_support))
                    .clone()
            })
            .collect();
        random_nod_law(rng, &marginals)
    };
    let initial = law_for(rng, 0, &Outcome::zeros(n))?;
    let mut prefixes: Vec<Outcome> = initial.atoms().iter().map(|(o, _)| o.clone()).collect();
    let mut kernels = Vec::with_capacity(stages.saturating_sub(1));
    for k in 1..stages {
        let mut conditions = Vec::with_capacity(prefixes.len());
        let mut next = std::collections::BTreeSet::new();
        for p in &prefixes {
            let law = law_for(rng, k, p)?;
            next.extend(law.atoms().iter().map(|(x, _)| p.add(x)));
            conditions.push((p.clone(), law));
        }
        kernels.push(StageKernel::new(conditions));
        prefixes = next.into_iter().collect();
    }
    StagedModel::new(initial, kernels)
}

/// [`random_staged`] restricted, by rejection, to models that also pass
/// [`verify_own_monotonicity`](crate::staged::verify_own_monotonicity).
pub fn random_monotone_staged<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    stages: usize,
    max_support: usize,
) -> Result<StagedModel> {
    for _ in 0..10_000 {
        let m = random_staged(rng, n, stages, max_support)?;
        if crate::staged::verify_own_monotonicity(&m)?.is_holds() {
            return Ok(m);
        }
    }
    Err(Error::InvalidSpec("no monotone staged model found in 10000 draws".into()))
}
