//! Single-elimination brackets on `n = 2^level` players.
//!
//! A bracket is a leaf order: in round `k` the leaves are grouped in blocks
//! of `2^k`, and the survivor of each half-block meets the survivor of the
//! other half. A player's score is their number of wins.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::{JointDist, Outcome};
use crate::rational::Rational;

/// `p[i][j] = P(i beats j)`, with `p[i][j] + p[j][i] = 1` off the diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Rational>>", into = "Vec<Vec<Rational>>")]
pub struct WinMatrix(Vec<Vec<Rational>>);

impl WinMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, p) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if !p.is_probability() {
                    return Err(Error::InvalidProbability(format!("p[{i}][{j}] = {p}")));
                }
                if p + &rows[j][i] != Rational::one() {
                    return Err(Error::InvalidProbability(format!(
                        "p[{i}][{j}] + p[{j}][{i}] != 1"
                    )));
                }
            }
        }
        Ok(WinMatrix(rows))
    }

    /// Every duel is fair.
    pub fn equal(n: usize) -> Self {
        let half = Rational::new(1, 2);
        WinMatrix(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { Rational::zero() } else { half.clone() })
                        .collect()
                })
                .collect(),
        )
    }

    /// Builds from `p(i, j)` for `i < j`; the rest is implied.
    pub fn from_upper<F: Fn(usize, usize) -> Rational>(n: usize, p: F) -> Result<Self> {
        let mut rows = vec![vec![Rational::zero(); n]; n];
        for (i, j) in super::pairs(n) {
            let v = p(i, j);
            rows[j][i] = Rational::one() - &v;
            rows[i][j] = v;
        }
        Self::new(rows)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn p(&self, i: usize, j: usize) -> &Rational {
        &self.0[i][j]
    }

    pub fn is_equal_strength(&self) -> bool {
        *self == Self::equal(self.n())
    }
}

impl TryFrom<Vec<Vec<Rational>>> for WinMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<Rational>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<WinMatrix> for Vec<Vec<Rational>> {
    fn from(w: WinMatrix) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Draw {
    /// Uniformly random assignment of players to leaves.
    Random,
    /// `bracket[k]` is the player at leaf `k`.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnockoutSpec {
    pub level: u32,
    pub win_matrix: WinMatrix,
    pub draw: Draw,
}

impl KnockoutSpec {
    pub fn new(level: u32, win_matrix: WinMatrix, draw: Draw) -> Result<Self> {
        let spec = KnockoutSpec {
            level,
            win_matrix,
            draw,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn equal_strength(level: u32, draw: Draw) -> Result<Self> {
        Self::new(level, WinMatrix::equal(1 << level), draw)
    }

    pub fn n(&self) -> usize {
        1 << self.level
    }

    pub fn validate(&self) -> Result<()> {
        if self.level == 0 || self.level > 16 {
            return Err(Error::InvalidSpec(format!("unsupported level {}", self.level)));
        }
        let n = self.n();
        if self.win_matrix.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.win_matrix.n(),
            });
        }
        WinMatrix::new(self.win_matrix.0.clone())?;
        if let Draw::Fixed(b) = &self.draw {
            check_permutation(b, n)?;
        }
        Ok(())
    }
}

fn check_permutation(b: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if b.len() != n || b.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidSpec(format!(
            "bracket {b:?} is not a permutation of 0..{n}"
        )));
    }
    Ok(())
}

type Partial = (usize, Vec<u32>, Rational);

fn play(leaves: &[usize], win: &WinMatrix, n: usize) -> Vec<Partial> {
    if leaves.len() == 1 {
        return vec![(leaves[0], vec![0; n], Rational::one())];
    }
    let (l, r) = leaves.split_at(leaves.len() / 2);
    let (left, right) = (play(l, win, n), play(r, win, n));
    let mut out = Vec::with_capacity(2 * left.len() * right.len());
    for (wl, sl, pl) in &left {
        for (wr, sr, pr) in &right {
            let p = pl * pr;
            let merged: Vec<u32> = sl.iter().zip(sr).map(|(a, b)| a + b).collect();
            for (winner, pw) in [(*wl, win.p(*wl, *wr)), (*wr, win.p(*wr, *wl))] {
                if pw.is_positive() {
                    let mut s = merged.clone();
                    s[winner] += 1;
                    out.push((winner, s, &p * pw));
                }
            }
        }
    }
    out
}

fn to_outcome(s: &[u32]) -> Outcome {
    Outcome(s.iter().map(|&v| Rational::from_integer(v as i64)).collect())
}

/// Law of the win counts for the leaf order `bracket`.
pub fn fixed_draw_law(win: &WinMatrix, bracket: &[usize], budget: usize) -> Result<JointDist> {
    let n = win.n();
    check_permutation(bracket, n)?;
    if n > 127 || 1u128 << (n - 1) > budget as u128 {
        return Err(Error::AtomBudgetExceeded { budget });
    }
    let mut map = BTreeMap::new();
    for (_, s, p) in play(bracket, win, n) {
        *map.entry(to_outcome(&s)).or_insert_with(Rational::zero) += p;
    }
    JointDist::from_map(n, map)
}

/// Leaf orders of all brackets that differ as unordered trees. Each one
/// stands for `2^(n-1)` of the `n!` leaf permutations.
pub fn distinct_brackets(n: usize) -> Vec<Vec<usize>> {
    fn rec(players: &[usize]) -> Vec<Vec<usize>> {
        if players.len() == 1 {
            return vec![players.to_vec()];
        }
        let half = players.len() / 2;
        let (first, rest) = players.split_first().expect("nonempty");
        let mut out = Vec::new();
        for pick in choose(rest, half - 1) {
            let mut left = vec![*first];
            left.extend(&pick);
            let right: Vec<usize> = rest.iter().filter(|p| !pick.contains(p)).copied().collect();
            for lb in rec(&left) {
                for rb in rec(&right) {
                    let mut b = lb.clone();
                    b.extend(&rb);
                    out.push(b);
                }
            }
        }
        out
    }
    rec(&(0..n).collect::<Vec<_>>())
}

fn choose(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut with: Vec<Vec<usize>> = choose(&items[1..], k - 1)
        .into_iter()
        .map(|mut c| {
            c.insert(0, items[0]);
            c
        })
        .collect();
    with.extend(choose(&items[1..], k));
    with
}

fn mixture<'a, I>(win: &WinMatrix, brackets: I, count: &BigInt, budget: usize) -> Result<JointDist>
where
    I: Iterator<Item = std::borrow::Cow<'a, [usize]>>,
{
    let n = win.n();
    let work = count * (BigInt::from(1u8) << (n - 1));
    if work > BigInt::from(budget) {
        return Err(Error::AtomBudgetExceeded { budget });
    }
    let weight = Rational::from_big(1.into(), count.clone());
    let mut map = BTreeMap::new();
    for b in brackets {
        for (_, s, p) in play(&b, win, n) {
            *map.entry(to_outcome(&s)).or_insert_with(Rational::zero) += p * &weight;
        }
    }
    JointDist::from_map(n, map)
}

/// Exact law of the win counts. A random draw is computed over the distinct
/// brackets, each weighted equally.
pub fn build_knockout(spec: &KnockoutSpec, budget: usize) -> Result<JointDist> {
    spec.validate()?;
    match &spec.draw {
        Draw::Fixed(b) => fixed_draw_law(&spec.win_matrix, b, budget),
        Draw::Random => {
            let brackets = distinct_brackets(spec.n());
            let count = BigInt::from(brackets.len());
            mixture(
                &spec.win_matrix,
                brackets.iter().map(|b| std::borrow::Cow::Borrowed(b.as_slice())),
                &count,
                budget,
            )
        }
    }
}

/// Random draw computed as the uniform mixture over all `n!` leaf permutations.
pub fn build_knockout_all_brackets(spec: &KnockoutSpec, budget: usize) -> Result<JointDist> {
    spec.validate()?;
    let n = spec.n();
    let count: BigInt = (1..=n).map(BigInt::from).product();
    mixture(&spec.win_matrix, Permutations::new(n), &count, budget)
}

/// Lexicographic permutations of `0..n`.
struct Permutations {
    cur: Option<Vec<usize>>,
}

impl Permutations {
    fn new(n: usize) -> Self {
        Permutations {
            cur: Some((0..n).collect()),
        }
    }
}

impl Iterator for Permutations {
    type Item = std::borrow::Cow<'static, [usize]>;

    fn next(&mut self) -> Option<Self::Item> {
        let out = self.cur.clone()?;
        let v = self.cur.as_mut().expect("checked");
        match (0..v.len().saturating_sub(1)).rev().find(|&i| v[i] < v[i + 1]) {
            None => self.cur = None,
            Some(i) => {
                let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("exists");
                v.swap(i, j);
                v[i + 1..].reverse();
            }
        }
        Some(std::borrow::Cow::Owned(out))
    }
}

/// Four players with intransitive strengths: 0 beats 1, 1 beats 2 and 3,
/// 2 beats 3 and 0, 3 beats 0, each with probability `1 - eps`.
pub fn cyclic_spec(eps: Rational) -> Result<KnockoutSpec> {
    if eps.is_negative() || eps >= Rational::new(1, 2) {
        return Err(Error::InvalidProbability(format!("epsilon {eps} not in [0, 1/2)")));
    }
    let strong = Rational::one() - &eps;
    let win = WinMatrix::from_upper(4, |i, j| match (i, j) {
        (0, 1) => strong.clone(),
        (0, 2) | (0, 3) => eps.clone(),
        _ => strong.clone(),
    })?;
    KnockoutSpec::new(2, win, Draw::Random)
}

pub fn build_cyclic_counterexample(eps: Rational) -> Result<JointDist> {
    build_knockout(&cyclic_spec(eps)?, crate::exactdist::DEFAULT_ATOM_BUDGET)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::DEFAULT_ATOM_BUDGET as B;
    use crate::rational::q;

    fn o(v: &[i64]) -> Outcome {
        Outcome::from_ints(v)
    }

    /// All distinct arrangements of `values`, equally weighted.
    fn uniform_arrangements(values: &[i64]) -> JointDist {
        let perms: Vec<Vec<usize>> = Permutations::new(values.len()).map(|c| c.into_owned()).collect();
        let w = q(1, perms.len() as i64);
        JointDist::from_atoms(perms.iter().map(|p| {
            (o(&p.iter().map(|&k| values[k]).collect::<Vec<_>>()), w.clone())
        }))
        .unwrap()
    }

    #[test]
    fn fixed_draw_four_players() {
        let spec = KnockoutSpec::equal_strength(2, Draw::Fixed(vec![0, 1, 2, 3])).unwrap();
        let d = build_knockout(&spec, B).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.atoms().iter().all(|(_, p)| *p == q(1, 8)));
        assert_eq!(d.prob_of(&o(&[0, 0, 1, 2])), q(0, 1));
        assert!(d.atoms().iter().all(|(s, _)| s.values()[0].is_positive() || s.values()[1].is_positive()));
    }

    #[test]
    fn random_draw_four_players_is_uniform_arrangement() {
        let spec = KnockoutSpec::equal_strength(2, Draw::Random).unwrap();
        let d = build_knockout(&spec, B).unwrap();
        assert_eq!(d.len(), 12);
        assert_eq!(d, uniform_arrangements(&[0, 0, 1, 2]));
        assert_eq!(d, build_knockout_all_brackets(&spec, B).unwrap());
    }

    #[test]
    fn eight_players_score_multiset() {
        let spec = KnockoutSpec::equal_strength(3, Draw::Fixed((0..8).collect())).unwrap();
        let d = build_knockout(&spec, B).unwrap();
        assert_eq!(d.len(), 128);
        for (s, _) in d.atoms() {
            let mut v = s.values().to_vec();
            v.sort();
            assert_eq!(Outcome(v), o(&[0, 0, 0, 0, 1, 1, 2, 3]));
        }
        let r = build_knockout(&KnockoutSpec::equal_strength(3, Draw::Random).unwrap(), B).unwrap();
        assert_eq!(r, uniform_arrangements(&[0, 0, 0, 0, 1, 1, 2, 3]));
    }

    #[test]
    fn bracket_counts() {
        assert_eq!(distinct_brackets(2).len(), 1);
        assert_eq!(distinct_brackets(4).len(), 3);
        assert_eq!(distinct_brackets(8).len(), 315);
    }

    #[test]
    fn all_brackets_path_agrees_for_unequal_strengths() {
        let win = WinMatrix::from_upper(4, |i, j| q((i + 2 * j) as i64 % 5 + 1, 7)).unwrap();
        let spec = KnockoutSpec::new(2, win, Draw::Random).unwrap();
        assert_eq!(
            build_knockout(&spec, B).unwrap(),
            build_knockout_all_brackets(&spec, B).unwrap()
        );
    }

    #[test]
    fn cyclic_counterexample_at_zero() {
        let d = build_cyclic_counterexample(q(0, 1)).unwrap();
        let want = JointDist::from_atoms([
            (o(&[1, 0, 2, 0]), q(1, 3)),
            (o(&[0, 2, 1, 0]), q(1, 3)),
            (o(&[0, 2, 0, 1]), q(1, 3)),
        ])
        .unwrap();
        assert_eq!(d, want);
        assert!(build_cyclic_counterexample(q(1, 2)).is_err());
        assert!(build_cyclic_counterexample(q(-1, 5)).is_err());
    }

    #[test]
    fn validation_errors() {
        assert!(KnockoutSpec::equal_strength(2, Draw::Fixed(vec![0, 1, 1, 3])).is_err());
        assert!(WinMatrix::new(vec![vec![q(0, 1), q(1, 2)], vec![q(1, 3), q(0, 1)]]).is_err());
        let spec = KnockoutSpec::equal_strength(3, Draw::Random).unwrap();
        assert!(matches!(
            build_knockout_all_brackets(&spec, B),
            Err(Error::AtomBudgetExceeded { .. })
        ));
    }
}
