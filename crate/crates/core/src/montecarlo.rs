//! Seeded Monte Carlo sampling of tournament models.
//!
//! Replication `r` of a run with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` with stream `r`, so every replication is a
//! pure function of `(s, r)` and estimates do not depend on the number of
//! worker threads. Replications are processed in fixed chunks whose counts
//! are merged in chunk order.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exactdist::{JointDist, OrthantMode, Outcome};
use crate::models::{Draw, KnockoutSpec, RandomSumSpec, RoundRobinSpec};
use crate::rational::Rational;
use crate::table::{FunctionTable, ValueTable};

pub const DEFAULT_LEVEL: f64 = 0.99;
const CHUNK: u64 = 1024;

/// Source of randomness for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub seed: u64,
    pub replication: u64,
}

impl Seed {
    pub fn new(seed: u64, replication: u64) -> Self {
        Seed { seed, replication }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.replication);
        rng
    }
}

/// Any model the sampler can draw from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TournamentSpec {
    RoundRobin(RoundRobinSpec),
    Knockout(KnockoutSpec),
    RandomSum(RandomSumSpec),
    Law(JointDist),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Credit only a unique maximum.
    Strict,
    /// Credit `1/k` when `k` players share the maximum.
    Split,
}

/// A proportion estimate with a symmetric normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
    pub ci: [f64; 2],
    pub level: f64,
    pub reps: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_rule: Option<TieRule>,
}

impl Estimate {
    /// Whether `exact` lies within `k` standard errors of the estimate.
    pub fn within(&self, exact: f64, k: f64) -> bool {
        (self.estimate - exact).abs() <= k * self.se
    }
}

#[derive(Debug, Clone)]
struct Categorical(Vec<f64>);

impl Categorical {
    fn new(probs: impl Iterator<Item = Rational>) -> Self {
        let mut acc = 0.0;
        let mut cum: Vec<f64> = probs
            .map(|p| {
                acc += p.to_f64();
                acc
            })
            .collect();
        if let Some(last) = cum.last_mut() {
            *last = f64::INFINITY;
        }
        Categorical(cum)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.0.iter().position(|&c| u < c).expect("last bound is infinite")
    }
}

/// Pair `(i, j)`, its outcome law, and the scaled split of each outcome.
type PairDraw = (usize, usize, Categorical, Vec<(i64, i64)>);

#[derive(Debug, Clone)]
enum Kind {
    RoundRobin {
        pairs: Vec<PairDraw>,
        utilities: Option<(Vec<ValueTable>, i64)>,
    },
    Knockout {
        bracket: Option<Vec<usize>>,
        win: Vec<f64>,
    },
    Rounds {
        rounds: Vec<(Categorical, Vec<Vec<i64>>)>,
        utilities: Option<(Vec<FunctionTable>, Vec<JointDist>)>,
    },
}

/// A model compiled for repeated sampling; scores are integers in units
/// of `1 / scale`.
#[derive(Debug, Clone)]
pub struct Sampler {
    n: usize,
    scale: i64,
    kind: Kind,
}

fn lcm_of<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |l, v| l.lcm(v.denom()))
}

fn scaled(v: &Rational, scale: i64) -> Result<i64> {
    let x = v * &Rational::from_integer(scale);
    x.numer()
        .to_i64()
        .filter(|x| x.unsigned_abs() < 1 << 40)
        .ok_or_else(|| Error::InvalidSpec(format!("value {v} is too large for the sampler")))
}

fn to_scale(l: BigInt) -> Result<i64> {
    l.to_i64()
        .filter(|&s| s < 1 << 20)
        .ok_or_else(|| Error::InvalidSpec("score denominators are too fine for the sampler".into()))
}

impl Sampler {
    pub fn new(spec: &TournamentSpec) -> Result<Self> {
        match spec {
            TournamentSpec::RoundRobin(rr) => Self::round_robin(rr),
            TournamentSpec::Knockout(k) => Self::knockout(k),
            TournamentSpec::RandomSum(rs) => Self::rounds(&rs.rounds, rs.utilities.clone()),
            TournamentSpec::Law(d) => Self::rounds(std::slice::from_ref(d), None),
        }
    }

    fn round_robin(rr: &RoundRobinSpec) -> Result<Self> {
        rr.validate()?;
        let mut l = lcm_of(rr.pair_laws.iter().flat_map(|p| std::iter::once(&p.r).chain(p.atoms.iter().map(|(v, _)| v))));
        if let Some(u) = &rr.utilities {
            l = l.lcm(&lcm_of(u.iter().flat_map(|t| t.iter().map(|(_, v)| v))));
        }
        let scale = to_scale(l)?;
        let pairs = rr
            .pair_laws
            .iter()
            .map(|p| {
                let values = p
                    .split_atoms()
                    .map(|(xi, xj, _)| Ok((scaled(&xi, scale)?, scaled(&xj, scale)?)))
                    .collect::<Result<Vec<_>>>()?;
                let cat = Categorical::new(p.atoms.iter().map(|(_, q)| q.clone()));
                Ok((p.i, p.j, cat, values))
            })
            .collect::<Result<Vec<_>>>()?;
        let utilities = rr.utilities.clone().map(|u| (u, scale));
        Ok(Sampler {
            n: rr.n,
            scale,
            kind: Kind::RoundRobin { pairs, utilities },
        })
    }

    fn knockout(k: &KnockoutSpec) -> Result<Self> {
        k.validate()?;
        let n = k.n();
        let win = (0..n * n)
            .map(|ij| if ij / n == ij % n { 0.0 } else { k.win_matrix.p(ij / n, ij % n).to_f64() })
            .collect();
        let bracket = match &k.draw {
            Draw::Random => None,
            Draw::Fixed(b) => Some(b.clone()),
        };
        Ok(Sampler {
            n,
            scale: 1,
            kind: Kind::Knockout { bracket, win },
        })
    }

    fn rounds(rounds: &[JointDist], utilities: Option<Vec<FunctionTable>>) -> Result<Self> {
        let n = rounds.first().ok_or(Error::EmptyDistribution)?.dim();
        if let Some(r) = rounds.iter().find(|r| r.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.dim(),
            });
        }
        let mut l = lcm_of(rounds.iter().flat_map(|r| r.atoms().iter().flat_map(|(o, _)| o.values())));
        if let Some(u) = &utilities {
            if u.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: u.len(),
                });
            }
            l = lcm_of(u.iter().flat_map(|t| t.entries().values().chain(t.default_value())));
        }
        let scale = to_scale(l)?;
        let compiled = rounds
            .iter()
            .map(|r| {
                let values = r
                    .atoms()
                    .iter()
                    .map(|(o, _)| o.values().iter().map(|v| scaled(v, scale)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Ok((Categorical::new(r.atoms().iter().map(|(_, p)| p.clone())), values))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampler {
            n,
            scale,
            kind: Kind::Rounds {
                rounds: compiled,
                utilities: utilities.map(|u| (u, rounds.to_vec())),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Scores are reported in units of `1 / scale`.
    pub fn scale(&self) -> i64 {
        self.scale
    }

    /// Draws one scaled score vector into `out`.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [i64]) -> Result<()> {
        out.fill(0);
        match &self.kind {
            Kind::RoundRobin { pairs, utilities } => {
                for (i, j, cat, values) in pairs {
                    let (a, b) = values[cat.draw(rng)];
                    out[*i] += a;
                    out[*j] += b;
                }
                if let Some((u, scale)) = utilities {
                    for (i, s) in out.iter_mut().enumerate() {
                        let v = Rational::new(*s, *scale);
                        let w = u[i]
                            .get(&v)
                            .ok_or_else(|| Error::TableIncomplete(format!("utility of player {i} at {v}")))?;
                        *s = scaled(w, *scale)?;
                    }
                }
            }
            Kind::Knockout { bracket, win } => {
                let n = self.n;
                let mut alive: Vec<usize> = match bracket {
                    Some(b) => b.clone(),
                    None => {
                        let mut p: Vec<usize> = (0..n).collect();
                        p.shuffle(rng);
                        p
                    }
                };
                while alive.len() > 1 {
                    alive = alive
                        .chunks(2)
                        .map(|m| {
                            let (a, b) = (m[0], m[1]);
                            let w = if rng.random::<f64>() < win[a * n + b] { a } else { b };
                            out[w] += 1;
                            w
                        })
                        .collect();
                }
            }
            Kind::Rounds { rounds, utilities } => match utilities {
                None => {
                    for (cat, values) in rounds {
                        for (s, v) in out.iter_mut().zip(&values[cat.draw(rng)]) {
                            *s += v;
                        }
                    }
                }
                Some((u, laws)) => {
                    let picks: Vec<usize> = rounds.iter().map(|(cat, _)| cat.draw(rng)).collect();
                    for (i, s) in out.iter_mut().enumerate() {
                        let own = Outcome(
                            picks
                                .iter()
                                .zip(laws)
                                .map(|(&a, d)| d.atoms()[a].0.values()[i].clone())
                                .collect(),
                        );
                        *s = scaled(&u[i].eval(&own)?, self.scale)?;
                    }
                }
            },
        }
        Ok(())
    }

    pub fn sample(&self, seed: Seed) -> Result<Outcome> {
        let mut out = vec![0; self.n];
        self.sample_into(&mut seed.rng(), &mut out)?;
        Ok(Outcome(out.into_iter().map(|v| Rational::new(v, self.scale)).collect()))
    }

    /// Runs `reps` replications; `credit` returns `Some(k)` to credit `1/k`.
    /// Returns the count of replications per credit denominator.
    fn run<F>(&self, reps: u64, seed: u64, credit: F) -> Result<BTreeMap<u32, u64>>
    where
        F: Fn(&[i64]) -> Option<u32> + Sync,
    {
        let chunks = reps.div_ceil(CHUNK);
        let parts: Vec<Result<BTreeMap<u32, u64>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut hist = BTreeMap::new();
                let mut out = vec![0; self.n];
                for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                    self.sample_into(&mut Seed::new(seed, r).rng(), &mut out)?;
                    if let Some(k) = credit(&out) {
                        *hist.entry(k).or_insert(0) += 1;
                    }
                }
                Ok(hist)
            })
            .collect();
        let mut total = BTreeMap::new();
        for p in parts {
            for (k, c) in p? {
                *total.entry(k).or_insert(0) += c;
            }
        }
        Ok(total)
    }
}

/// One draw from the model's law.
pub fn sample_model(spec: &TournamentSpec, seed: Seed) -> Result<Outcome> {
    Sampler::new(spec)?.sample(seed)
}

fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidSpec(format!("confidence level {level} must lie in (0, 1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

fn estimate(hist: &BTreeMap<u32, u64>, reps: u64, seed: u64, level: f64, tie_rule: Option<TieRule>) -> Result<Estimate> {
    let z = z_value(level)?;
    let n = reps as f64;
    let (sum, sum_sq) = hist.iter().fold((0.0, 0.0), |(s, s2), (&k, &c)| {
        let x = 1.0 / k as f64;
        (s + c as f64 * x, s2 + c as f64 * x * x)
    });
    let p = sum / n;
    let var = if hist.keys().all(|&k| k == 1) {
        p * (1.0 - p)
    } else if reps > 1 {
        ((sum_sq - n * p * p) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let se = (var / n).sqrt();
    Ok(Estimate {
        estimate: p,
        se,
        ci: [p - z * se, p + z * se],
        level,
        reps,
        seed,
        tie_rule,
    })
}

fn check_reps(reps: u64) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidSpec("reps must be at least 1".into()));
    }
    Ok(())
}

/// Probability that `player` has the highest score.
pub fn estimate_top_probability(
    spec: &TournamentSpec,
    player: usize,
    reps: u64,
    seed: u64,
    tie_rule: TieRule,
    level: f64,
) -> Result<Estimate> {
    check_reps(reps)?;
    let sampler = Sampler::new(spec)?;
    if player >= sampler.n {
        return Err(Error::IndexOutOfRange {
            index: player,
            n: sampler.n,
        });
    }
    let hist = sampler.run(reps, seed, |s| {
        let mine = s[player];
        let mut ties = 1;
        for (i, &v) in s.iter().enumerate() {
            if i != player {
                if v > mine {
                    return None;
                }
                if v == mine {
                    ties += 1;
                }
            }
        }
        match tie_rule {
            TieRule::Strict => (ties == 1).then_some(1),
            TieRule::Split => Some(ties),
        }
    })?;
    estimate(&hist, reps, seed, level, Some(tie_rule))
}

/// Frequency of the orthant event at `thresholds`.
pub fn estimate_orthant_probability(
    spec: &TournamentSpec,
    thresholds: &Outcome,
    mode: OrthantMode,
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<Estimate> {
    check_reps(reps)?;
    let sampler = Sampler::new(spec)?;
    if thresholds.len() != sampler.n {
        return Err(Error::DimensionMismatch {
            expected: sampler.n,
            found: thresholds.len(),
        });
    }
    // s <= t iff s * scale <= floor(t * scale) for integral s * scale
    let cut: Vec<i64> = thresholds
        .values()
        .iter()
        .map(|t| {
            (t * &Rational::from_integer(sampler.scale))
                .floor()
                .to_i64()
                .ok_or_else(|| Error::InvalidSpec(format!("threshold {t} out of range")))
        })
        .collect::<Result<_>>()?;
    let hist = sampler.run(reps, seed, |s| {
        let inside = s.iter().zip(&cut).all(|(v, c)| match mode {
            OrthantMode::Lower => v <= c,
            OrthantMode::Upper => v > c,
        });
        inside.then_some(1)
    })?;
    estimate(&hist, reps, seed, level, None)
}

/// Exact probability that `player` has the highest score under `d`.
pub fn exact_top_probability(d: &JointDist, player: usize, tie_rule: TieRule) -> Rational {
    d.expect(|o| {
        let v = o.values();
        let mine = &v[player];
        if v.iter().enumerate().any(|(i, x)| i != player && x > mine) {
            return Rational::zero();
        }
        let ties = v.iter().filter(|x| *x == mine).count() as i64;
        match tie_rule {
            TieRule::Strict if ties > 1 => Rational::zero(),
            TieRule::Strict => Rational::one(),
            TieRule::Split => Rational::new(1, ties),
        }
    })
}
