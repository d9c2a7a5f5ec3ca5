use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tourdep::depcheck::{check_na, check_nod, Limits};
use tourdep::models::{build_chess_round_robin, build_knockout, huber_spec, Draw, KnockoutSpec};
use tourdep::montecarlo::{estimate_top_probability, TieRule, TournamentSpec, DEFAULT_LEVEL};
use tourdep::q;

const BUDGET: usize = 1 << 22;

fn fixed(level: u32) -> KnockoutSpec {
    KnockoutSpec::equal_strength(level, Draw::Fixed((0..1 << level).collect())).unwrap()
}

fn build(c: &mut Criterion) {
    let mut g = c.benchmark_group("build");
    for level in [2, 3] {
        g.bench_with_input(BenchmarkId::new("knockout_fixed", level), &fixed(level), |b, s| {
            b.iter(|| build_knockout(black_box(s), BUDGET).unwrap())
        });
    }
    let random = KnockoutSpec::equal_strength(2, Draw::Random).unwrap();
    g.bench_function("knockout_random_2", |b| b.iter(|| build_knockout(black_box(&random), BUDGET).unwrap()));
    g.finish();
}

fn checks(c: &mut Criterion) {
    let limits = Limits::default();
    let mut g = c.benchmark_group("check");
    for level in [2, 3] {
        let d = build_knockout(&fixed(level), BUDGET).unwrap();
        g.bench_with_input(BenchmarkId::new("nod_knockout_fixed", level), &d, |b, d| {
            b.iter(|| check_nod(black_box(d), &limits).unwrap())
        });
    }
    let d = build_knockout(&KnockoutSpec::equal_strength(2, Draw::Random).unwrap(), BUDGET).unwrap();
    g.bench_function("na_knockout_random_2", |b| b.iter(|| check_na(black_box(&d), &limits).unwrap()));
    let chess = build_chess_round_robin(3, |_, _| (q(1, 3), q(1, 3)), BUDGET).unwrap();
    g.bench_function("na_chess_3", |b| b.iter(|| check_na(black_box(&chess), &limits).unwrap()));
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let spec = TournamentSpec::RoundRobin(huber_spec(16, q(3, 4)).unwrap());
    let mut g = c.benchmark_group("sample");
    g.sample_size(10);
    g.bench_function("top_probability_rr16_10k", |b| {
        b.iter(|| estimate_top_probability(&spec, 0, 10_000, 1, TieRule::Strict, DEFAULT_LEVEL).unwrap())
    });
    g.finish();
}

criterion_group!(benches, build, checks, sampling);
criterion_main!(benches);
