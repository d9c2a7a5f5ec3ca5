use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CatalogEntry, RunOptions, ScenarioId};
use crate::depcheck::{
    check_na, check_nlod, check_nod, check_nuod, check_signed_monotone, covariance_of, CheckResult, Limits, Witness,
};
use crate::error::Result;
use crate::exactdist::{convolve, JointDist, OrthantMode, Outcome};
use crate::gen;
use crate::models::{
    binomial_spec, build_cyclic_counterexample, build_knockout, build_random_sum, build_round_robin, chess_spec,
    football_spec, huber_spec, pairs, Draw, KnockoutSpec, RoundRobinSpec,
};
use crate::montecarlo::{estimate_top_probability, exact_top_probability, TieRule, TournamentSpec, DEFAULT_LEVEL};
use crate::rational::Rational;
use crate::report::Recorder;
use crate::staged::{knockout_as_staged, sum_staged, verify_assumption_i, verify_assumption_ii, verify_own_monotonicity};
use crate::table::{Direction, FunctionTable};

pub(super) fn run(id: ScenarioId, e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    match id {
        ScenarioId::HuberLimit => huber_limit(e, o, rec),
        ScenarioId::RrGeneralNa => round_robin_sweep(e, o, rec, RrKind::General),
        ScenarioId::RrBinomialNa => round_robin_sweep(e, o, rec, RrKind::Binomial),
        ScenarioId::RrChessNa => round_robin_sweep(e, o, rec, RrKind::Chess),
        ScenarioId::RandomSumFootball => football(e, o, rec),
        ScenarioId::KnockoutRandomNa => knockout_random(e, o, rec),
        ScenarioId::KnockoutFixedNod => knockout_fixed(e, o, rec),
        ScenarioId::Counterexample31 => cyclic(e, o, rec),
        ScenarioId::Counterexample32 => fixed_draw_pair(e, o, rec),
        ScenarioId::StagedPreservation => staged(e, o, rec),
        ScenarioId::ConvolutionNa => convolution(e, o, rec),
    }
}

fn huber_limit(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let p: Rational = e.param("p")?;
    let sizes: Vec<usize> = e.param("sizes")?;
    let player: usize = e.param("player")?;
    let separation: f64 = e.param("separation_se")?;
    let agreement: f64 = e.param("exact_agreement_se")?;
    let mut estimates = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let spec = TournamentSpec::RoundRobin(huber_spec(n, p.clone())?);
        let est = rec.time("sampling", |_| {
            estimate_top_probability(&spec, player, o.reps, o.seed, TieRule::Strict, DEFAULT_LEVEL)
        })?;
        rec.estimate(format!("top_probability_n{n:03}"), est.clone());
        estimates.push(est);
    }
    let (first, last) = (&estimates[0], &estimates[estimates.len() - 1]);
    let increasing = estimates.windows(2).all(|w| w[0].estimate < w[1].estimate);
    rec.expect_true("estimates strictly increase with n", increasing);
    let gap = last.estimate - first.estimate;
    let combined = (first.se.powi(2) + last.se.powi(2)).sqrt();
    rec.compare(
        format!("largest-n estimate exceeds smallest-n estimate by more than {separation} combined SE"),
        format!("> {:.6}", separation * combined),
        format!("{gap:.6}"),
        gap > separation * combined,
    );
    let law = rec.time("exact", |_| build_round_robin(&huber_spec(sizes[0], p.clone())?, o.budgets.atoms))?;
    let exact = exact_top_probability(&law, player, TieRule::Strict);
    rec.exact(format!("top_probability_n{:03}", sizes[0]), exact.clone());
    rec.compare(
        format!("n = {} estimate within {agreement} SE of the enumerated value", sizes[0]),
        format!("{exact} ~ {:.6}", exact.to_f64()),
        format!("{:.6} (se {:.6})", first.estimate, first.se),
        first.within(exact.to_f64(), agreement),
    );
    Ok(())
}

#[derive(Clone, Copy)]
enum RrKind {
    General,
    Binomial,
    Chess,
}

fn round_robin_sweep(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder, kind: RrKind) -> Result<()> {
    let n: usize = e.param("n")?;
    let instances: usize = e.param("instances")?;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut violations = 0;
    let mut constant_sum = true;
    for k in 0..instances {
        let spec: RoundRobinSpec = match kind {
            RrKind::General => gen::random_round_robin(&mut rng, n, e.param("max_support")?)?,
            RrKind::Binomial => {
                let r: u32 = e.param("r")?;
                let max_den: i64 = e.param("max_den")?;
                let ps: BTreeMap<(usize, usize), Rational> =
                    pairs(n).map(|ij| (ij, gen::random_probability(&mut rng, max_den))).collect();
                binomial_spec(n, |i, j| (r, ps[&(i, j)].clone()))?
            }
            RrKind::Chess => {
                let ps: BTreeMap<(usize, usize), (Rational, Rational)> =
                    pairs(n).map(|ij| (ij, gen::random_chess_params(&mut rng))).collect();
                chess_spec(n, |i, j| ps[&(i, j)].clone())?
            }
        };
        let d = rec.time("build", |_| build_round_robin(&spec, o.budgets.atoms))?;
        let total = d.total();
        constant_sum &= total.len() == 1 && total.atoms()[0].0.values()[0] == spec.total_reward();
        if matches!(kind, RrKind::Binomial | RrKind::Chess) {
            let stated: Rational = e.expected("total")?;
            constant_sum &= spec.total_reward() == stated;
        }
        let r = rec.time("check", |_| check_na(&d, &o.budgets.limits))?;
        if !r.is_holds() {
            violations += 1;
        }
        rec.check(format!("instance_{k:02}_na"), r);
    }
    rec.expect_eq("NA violations", e.expected::<usize>("violations")?, violations);
    rec.expect_true("score sum is the constant total reward", constant_sum);
    Ok(())
}

fn football(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    #[derive(serde::Deserialize)]
    struct Match {
        i: usize,
        j: usize,
        win: Rational,
        draw: Rational,
    }
    let n: usize = e.param("n")?;
    let matches: Vec<Match> = e.param("matches")?;
    let lookup = |i: usize, j: usize| {
        matches
            .iter()
            .find(|m| (m.i, m.j) == (i, j))
            .map(|m| (m.win.clone(), m.draw.clone()))
            .unwrap_or((Rational::zero(), Rational::zero()))
    };
    let spec = football_spec(n, lookup)?;
    let d = rec.time("build", |_| build_random_sum(&spec, &o.budgets.limits, o.budgets.atoms))?;
    let total = d.total();
    let (lo, hi): (Rational, Rational) = (e.expected("total_min")?, e.expected("total_max")?);
    let support = total.support(0);
    rec.compare(
        "league total lies in the stated range",
        format!("[{lo}, {hi}]"),
        format!("{support:?}"),
        support.iter().all(|t| *t >= lo && *t <= hi),
    );
    rec.expect_true("league total is random", support.len() > 1);
    for (t, p) in total.atoms() {
        rec.exact(format!("P(total = {})", t.values()[0]), p.clone());
    }
    let r = rec.time("check", |_| check_na(&d, &o.budgets.limits))?;
    rec.expect_true("league scores are NA", r.is_holds());
    rec.check("na", r);
    Ok(())
}

fn knockout_random(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let level: u32 = e.param("level")?;
    let spec = KnockoutSpec::equal_strength(level, Draw::Random)?;
    let d = rec.time("build", |_| build_knockout(&spec, o.budgets.atoms))?;
    rec.expect_eq("number of atoms", e.expected::<usize>("atoms")?, d.len());
    let p: Rational = e.expected("atom_prob")?;
    rec.expect_true(format!("every atom has probability {p}"), d.atoms().iter().all(|(_, q)| *q == p));
    let n = spec.n();
    let exchangeable = (0..n).all(|i| {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(0, i);
        d.permute(&perm).map(|x| x == d).unwrap_or(false)
    });
    rec.expect_true("law is exchangeable", exchangeable);
    let r = rec.time("check", |_| check_na(&d, &o.budgets.limits))?;
    rec.expect_true("win counts are NA", r.is_holds());
    rec.check("na", r);
    Ok(())
}

fn knockout_fixed(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let levels: Vec<u32> = e.param("levels")?;
    let atoms: Vec<usize> = e.expected("atoms")?;
    for (&level, &count) in levels.iter().zip(&atoms) {
        let n = 1usize << level;
        let spec = KnockoutSpec::equal_strength(level, Draw::Fixed((0..n).collect()))?;
        let d = rec.time("build", |_| build_knockout(&spec, o.budgets.atoms))?;
        rec.expect_eq(format!("n = {n}: number of atoms"), count, d.len());
        let r = rec.time("check", |_| check_nod(&d, &o.budgets.limits))?;
        rec.expect_true(format!("n = {n}: win counts are NOD"), r.is_holds());
        rec.check(format!("n{n}_nod"), r);
    }
    Ok(())
}

fn cyclic(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let eps: Rational = e.param("eps")?;
    let d = build_cyclic_counterexample(eps)?;
    let p: Rational = e.expected("atom_prob")?;
    rec.expect_true(
        format!("three atoms of probability {p}"),
        d.len() == 3 && d.atoms().iter().all(|(_, q)| *q == p),
    );
    for (x, q) in d.atoms() {
        rec.exact(format!("P{x:?}"), q.clone());
    }
    let f1 = FunctionTable::projection(0, d.support(0));
    let f2 = FunctionTable::projection(2, d.support(2));
    let e12 = d.expect(|x| &x.values()[0] * &x.values()[2]);
    let e1 = d.expect(|x| x.values()[0].clone());
    let e2 = d.expect(|x| x.values()[2].clone());
    let cov = covariance_of(&d, &f1, &f2)?;
    for (key, v) in [("e_f1f2", &e12), ("e_f1", &e1), ("e_f2", &e2), ("covariance", &cov)] {
        rec.exact(key, v.clone());
        rec.expect_eq(key, e.expected::<Rational>(key)?, v.clone());
    }
    let nlod = check_nlod(&d, &o.budgets.limits)?;
    let w = nlod.orthant_witness().cloned();
    rec.expect_true("NLOD is violated", !nlod.is_holds());
    rec.expect_true("witness re-evaluates exactly", nlod.revalidate(&d)?);
    if let Some(w) = w {
        rec.expect_eq("witness lhs", e.expected::<Rational>("nlod_lhs")?, w.lhs);
        rec.expect_eq("witness rhs", e.expected::<Rational>("nlod_rhs")?, w.rhs);
    }
    rec.check("nlod", nlod);
    let s: Outcome = e.param("thresholds")?;
    let (lhs, rhs) = orthant_sides(&d, &s)?;
    rec.expect_eq(format!("lower orthant probability at {s:?}"), e.expected::<Rational>("nlod_lhs")?, lhs);
    rec.expect_eq(format!("product of marginals at {s:?}"), e.expected::<Rational>("nlod_rhs")?, rhs);

    let perturbed: Rational = e.param("perturbed_eps")?;
    let d2 = build_cyclic_counterexample(perturbed.clone())?;
    let (lhs2, rhs2) = orthant_sides(&d2, &s)?;
    let gap = &lhs2 - &rhs2;
    rec.exact(format!("eps = {perturbed}: lhs - rhs at {s:?}"), gap.clone());
    rec.compare(format!("eps = {perturbed}: violation persists at {s:?}"), "> 0", &gap, gap.is_positive());
    rec.check(format!("eps_{perturbed}_nlod"), check_nlod(&d2, &o.budgets.limits)?);
    // recorded without a stated value
    rec.check("nuod", check_nuod(&d, &o.budgets.limits)?);
    rec.check("na", check_na(&d, &o.budgets.limits)?);
    Ok(())
}

fn orthant_sides(d: &JointDist, s: &Outcome) -> Result<(Rational, Rational)> {
    let lhs = d.orthant_prob(s, OrthantMode::Lower)?;
    let rhs = (0..d.dim())
        .map(|i| d.marginal_orthant_prob(i, &s.values()[i], OrthantMode::Lower))
        .fold(Rational::one(), |a, b| a * b);
    Ok((lhs, rhs))
}

fn indicator(coords: Vec<usize>, ones: &[[i64; 2]]) -> FunctionTable {
    let mut f = FunctionTable::new(coords).with_default(Rational::zero());
    for p in ones {
        f.insert(Outcome::from_ints(p), Rational::one());
    }
    f
}

fn fixed_draw_pair(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let bracket: Vec<usize> = e.param("bracket")?;
    let spec = KnockoutSpec::equal_strength(2, Draw::Fixed(bracket))?;
    let d = build_knockout(&spec, o.budgets.atoms)?;
    rec.expect_eq("number of atoms", e.expected::<usize>("atoms")?, d.len());
    rec.expect_true(
        "(0, 0, 1, 2) is unreachable",
        d.prob_of(&Outcome::from_ints(&[0, 0, 1, 2])).is_zero(),
    );
    let f1 = indicator(vec![0, 2], &[[0, 1], [0, 2]]);
    let f2 = indicator(vec![1, 3], &[[2, 0]]);
    let ev = |f: &FunctionTable| d.expect(|x| f.eval_full(x).expect("default covers"));
    let e12 = d.expect(|x| f1.eval_full(x).expect("default") * f2.eval_full(x).expect("default"));
    let (e1, e2) = (ev(&f1), ev(&f2));
    let cov = covariance_of(&d, &f1, &f2)?;
    for (key, v) in [("e_f1f2", &e12), ("e_f1", &e1), ("e_f2", &e2), ("covariance", &cov)] {
        rec.exact(key, v.clone());
        rec.expect_eq(key, e.expected::<Rational>(key)?, v.clone());
    }
    // orientation of the stated functions on the attained support
    for (f, coords, dirs, label) in [
        (&f1, [0, 2], [Direction::Decreasing, Direction::Increasing], "f1 is decreasing in S_0 and increasing in S_2"),
        (&f2, [1, 3], [Direction::Increasing, Direction::Decreasing], "f2 is increasing in S_1 and decreasing in S_3"),
    ] {
        let pts: Vec<Outcome> = d.marginal(&coords)?.atoms().iter().map(|(x, _)| x.clone()).collect();
        rec.expect_true(label, f.check_monotone(&pts, &dirs).is_ok());
        let increasing = f.check_increasing(&pts).is_ok();
        rec.exact(format!("{} increasing in both arguments", &label[..2]), Rational::from_integer(increasing as i64));
    }
    let signed = check_signed_monotone(&d, &o.budgets.limits)?;
    let positive = matches!(&signed.witness, Some(Witness::MonotonePair(w)) if w.covariance.is_positive());
    rec.expect_true("signed-monotone check finds a positive covariance", positive);
    rec.expect_true("signed-monotone witness re-evaluates exactly", signed.revalidate(&d)?);
    rec.check("signed_monotone", signed);
    // verdict for increasing pairs, recorded as computed
    let na = check_na(&d, &o.budgets.limits)?;
    rec.expect_true("NA verdict is certified", na.revalidate(&d)?);
    rec.check("na", na);
    rec.check("nod", check_nod(&d, &o.budgets.limits)?);
    Ok(())
}

fn staged(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let limits: &Limits = &o.budgets.limits;
    for level in e.param::<Vec<u32>>("levels")? {
        let n = 1usize << level;
        let spec = KnockoutSpec::equal_strength(level, Draw::Fixed((0..n).collect()))?;
        let m = knockout_as_staged(&spec)?;
        let lower = verify_assumption_i(&m, OrthantMode::Lower, limits)?;
        let upper = verify_assumption_i(&m, OrthantMode::Upper, limits)?;
        let local = verify_assumption_ii(&m)?;
        rec.expect_true(
            format!("n = {n}: knockout stages satisfy both assumptions"),
            lower.is_holds() && upper.is_holds() && local.is_holds(),
        );
        rec.expect_true(
            format!("n = {n}: knockout stages are own-prefix monotone"),
            verify_own_monotonicity(&m)?.is_holds(),
        );
        let sum = sum_staged(&m, o.budgets.atoms)?;
        rec.expect_true(
            format!("n = {n}: staged sum equals the knockout law"),
            sum == build_knockout(&spec, o.budgets.atoms)?,
        );
        rec.check(format!("knockout_n{n}_sum_nod"), check_nod(&sum, limits)?);
    }
    let (instances, n, stages, max_support): (usize, usize, usize, usize) = (
        e.param("instances")?,
        e.param("n")?,
        e.param("stages")?,
        e.param("max_support")?,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let (mut assumption_failures, mut violations, mut non_monotone, mut violations_when_monotone) = (0usize, 0, 0, 0);
    for k in 0..instances {
        let m = gen::random_staged(&mut rng, n, stages, max_support)?;
        let ok = verify_assumption_i(&m, OrthantMode::Lower, limits)?.is_holds()
            && verify_assumption_i(&m, OrthantMode::Upper, limits)?.is_holds()
            && verify_assumption_ii(&m)?.is_holds();
        assumption_failures += usize::from(!ok);
        let monotone = verify_own_monotonicity(&m)?;
        let sum = rec.time("sum", |_| sum_staged(&m, o.budgets.atoms))?;
        let bad = sum_violations(&sum, limits)?;
        if !monotone.is_holds() {
            non_monotone += 1;
        } else if !bad.is_empty() {
            violations_when_monotone += 1;
        }
        if !bad.is_empty() {
            violations += 1;
            if violations == 1 {
                rec.check(format!("random_{k:02}_own_monotonicity"), monotone);
            }
            for (name, r) in bad {
                rec.check(format!("random_{k:02}_{name}"), r);
            }
        }
    }
    rec.expect_eq("random models failing an assumption", 0, assumption_failures);
    rec.exact("random models failing own-prefix monotonicity", Rational::from_integer(non_monotone as i64));
    rec.expect_eq(
        "random models whose staged sum is not NLOD or not NUOD",
        e.expected::<usize>("violations")?,
        violations,
    );
    rec.expect_eq("violations among random models that are own-prefix monotone", 0, violations_when_monotone);

    let mut monotone_violations = 0;
    for _ in 0..e.param::<usize>("monotone_instances")? {
        let m = gen::random_monotone_staged(&mut rng, n, stages, max_support)?;
        let sum = rec.time("sum", |_| sum_staged(&m, o.budgets.atoms))?;
        monotone_violations += usize::from(!sum_violations(&sum, limits)?.is_empty());
    }
    rec.expect_eq(
        "violations among random models restricted to own-prefix monotone ones",
        0,
        monotone_violations,
    );
    Ok(())
}

fn sum_violations(sum: &JointDist, limits: &Limits) -> Result<Vec<(&'static str, CheckResult)>> {
    Ok([("nlod", check_nlod(sum, limits)?), ("nuod", check_nuod(sum, limits)?)]
        .into_iter()
        .filter(|(_, r)| !r.is_holds())
        .collect())
}

fn convolution(e: &CatalogEntry, o: &RunOptions, rec: &mut Recorder) -> Result<()> {
    let (instances, n, max_rounds, max_support): (usize, usize, usize, usize) = (
        e.param("instances")?,
        e.param("n")?,
        e.param("max_rounds")?,
        e.param("max_support")?,
    );
    let limits = &o.budgets.limits;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut violations = 0;
    for k in 0..instances {
        let rounds = 2 + k % (max_rounds - 1);
        let laws = (0..rounds)
            .map(|_| gen::random_na_law(&mut rng, n, max_support, limits))
            .collect::<Result<Vec<_>>>()?;
        let sum = convolve(&laws, o.budgets.atoms)?;
        let r: CheckResult = rec.time("check", |_| check_na(&sum, limits))?;
        if !r.is_holds() {
            violations += 1;
            rec.check(format!("instance_{k:02}_na"), r);
        }
    }
    rec.expect_eq("NA violations", e.expected::<usize>("violations")?, violations);
    Ok(())
}
