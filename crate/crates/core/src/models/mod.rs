//! Tournament models compiled into exact joint laws.

mod family;
mod knockout;
mod randomsum;
mod roundrobin;

pub use family::{build_disjoint_monotone_family, round_robin_as_family, FamilyOutput, MonotoneFamilySpec};
pub use knockout::{
    build_cyclic_counterexample, build_knockout, build_knockout_all_brackets, cyclic_spec,
    distinct_brackets, fixed_draw_law, Draw, KnockoutSpec, WinMatrix,
};
pub use randomsum::{build_random_sum, football_rounds, football_spec, padded_pair_rounds, RandomSumSpec};
pub use roundrobin::{
    binomial_spec, build_binomial_round_robin, build_chess_round_robin, build_round_robin,
    chess_spec, huber_spec, PairRewardLaw, RoundRobinSpec,
};

/// Unordered pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}
