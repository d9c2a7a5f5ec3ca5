//! Increasing functions of disjoint groups of independent variables and of
//! decreasing transforms of them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactdist::{JointDist, Outcome};
use crate::rational::Rational;
use crate::table::{product_grid, FunctionTable, ValueTable};

use super::RoundRobinSpec;

/// `S = f(X_a for a in a_set, Y_b for b in b_set)`; the table is keyed by
/// the argument tuple, `a_set` values first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyOutput {
    pub a_set: Vec<usize>,
    pub b_set: Vec<usize>,
    pub f: FunctionTable,
}

/// Independent `X_i` with laws `x_laws[i]` (as `(value, prob)` lists),
/// `Y_i = g_i(X_i)` for decreasing `g_i`, and outputs built from disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneFamilySpec {
    pub x_laws: Vec<Vec<(Rational, Rational)>>,
    pub g_tables: Vec<Option<ValueTable>>,
    pub outputs: Vec<FamilyOutput>,
}

impl MonotoneFamilySpec {
    fn x_dists(&self) -> Result<Vec<JointDist>> {
        self.x_laws
            .iter()
            .map(|l| JointDist::univariate(l.iter().cloned()))
            .collect()
    }

    /// Supports of each output's arguments, in table order.
    fn argument_grid(&self, out: &FamilyOutput, xs: &[JointDist]) -> Result<Vec<Vec<Rational>>> {
        let mut grid = Vec::new();
        for &a in &out.a_set {
            grid.push(xs[a].support(0).to_vec());
        }
        for &b in &out.b_set {
            let g = self.g_tables[b]
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec(format!("Y_{b} used without g_{b}")))?;
            let mut ys: Vec<Rational> = xs[b]
                .support(0)
                .iter()
                .map(|x| g.get(x).cloned().ok_or_else(|| Error::TableIncomplete(format!("g_{b}({x})"))))
                .collect::<Result<_>>()?;
            ys.sort();
            ys.dedup();
            grid.push(ys);
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<Vec<JointDist>> {
        let k = self.x_laws.len();
        if self.g_tables.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: self.g_tables.len(),
            });
        }
        let xs = self.x_dists()?;
        for (i, g) in self.g_tables.iter().enumerate() {
            if let Some(g) = g {
                g.check_nonincreasing(xs[i].support(0))
                    .map_err(|e| Error::NotMonotone(format!("g_{i}: {e}")))?;
            }
        }
        let mut used_a = vec![false; k];
        let mut used_b = vec![false; k];
        for out in &self.outputs {
            for (set, used) in [(&out.a_set, &mut used_a), (&out.b_set, &mut used_b)] {
                for &i in set {
                    if i >= k {
                        return Err(Error::IndexOutOfRange { index: i, n: k });
                    }
                    if std::mem::replace(&mut used[i], true) {
                        return Err(Error::OverlappingSubsets(i));
                    }
                }
            }
            let arity = out.a_set.len() + out.b_set.len();
            if out.f.coords() != (0..arity).collect::<Vec<_>>() {
                return Err(Error::InvalidSpec(format!(
                    "output table must be keyed by its {arity} arguments"
                )));
            }
            let points = product_grid(&self.argument_grid(out, &xs)?);
            out.f.check_increasing(&points)?;
        }
        Ok(xs)
    }
}

/// Exact law of `(S_1, ..., S_m)` by enumerating every joint value of the `X`'s.
pub fn build_disjoint_monotone_family(spec: &MonotoneFamilySpec, budget: usize) -> Result<JointDist> {
    let xs = spec.validate()?;
    if spec.outputs.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut combos: usize = 1;
    for x in &xs {
        combos = combos
            .checked_mul(x.len())
            .filter(|&c| c <= budget)
            .ok_or(Error::AtomBudgetExceeded { budget })?;
    }
    let mut map = BTreeMap::new();
    let mut idx = vec![0usize; xs.len()];
    for _ in 0..combos {
        let mut p = Rational::one();
        let vals: Vec<&Rational> = idx
            .iter()
            .zip(&xs)
            .map(|(&k, x)| {
                let (o, q) = &x.atoms()[k];
                p = &p * q;
                &o.values()[0]
            })
            .collect();
        let s = spec
            .outputs
            .iter()
            .map(|out| {
                let mut args: Vec<Rational> = out.a_set.iter().map(|&a| vals[a].clone()).collect();
                for &b in &out.b_set {
                    let g = spec.g_tables[b].as_ref().expect("validated");
                    args.push(g.get(vals[b]).expect("validated").clone());
                }
                out.f.eval(&Outcome(args))
            })
            .collect::<Result<Vec<_>>>()?;
        JointDist::accumulate(&mut map, Outcome(s), p, budget)?;
        for (k, x) in idx.iter_mut().zip(&xs) {
            *k += 1;
            if *k < x.len() {
                break;
            }
            *k = 0;
        }
    }
    JointDist::from_map(spec.outputs.len(), map)
}

/// The round-robin as a family: one `X` per pair, `g(x) = r - x`, and each
/// player's score the sum of their rewards.
pub fn round_robin_as_family(rr: &RoundRobinSpec) -> Result<MonotoneFamilySpec> {
    rr.validate()?;
    let x_laws: Vec<Vec<(Rational, Rational)>> = rr.pair_laws.iter().map(|l| l.atoms.clone()).collect();
    let g_tables = rr
        .pair_laws
        .iter()
        .map(|l| {
            let support: Vec<Rational> = l.atoms.iter().map(|(v, _)| v.clone()).collect();
            Some(ValueTable::from_fn(&support, |x| &l.r - x))
        })
        .collect();
    let mut spec = MonotoneFamilySpec {
        x_laws,
        g_tables,
        outputs: Vec::new(),
    };
    let xs = spec.x_dists()?;
    for player in 0..rr.n {
        let a_set: Vec<usize> = (0..rr.pair_laws.len()).filter(|&k| rr.pair_laws[k].i == player).collect();
        let b_set: Vec<usize> = (0..rr.pair_laws.len()).filter(|&k| rr.pair_laws[k].j == player).collect();
        let placeholder = FamilyOutput {
            a_set,
            b_set,
            f: FunctionTable::new(vec![]),
        };
        let grid = spec.argument_grid(&placeholder, &xs)?;
        let arity = grid.len();
        let mut f = FunctionTable::new((0..arity).collect());
        if arity == 0 {
            f = f.with_default(Rational::zero());
        }
        for p in product_grid(&grid) {
            let s = p.sum();
            f.insert(p, s);
        }
        spec.outputs.push(FamilyOutput { f, ..placeholder });
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depcheck::{check_na, Limits};
    use crate::exactdist::DEFAULT_ATOM_BUDGET as B;
    use crate::models::{build_round_robin, chess_spec, huber_spec};
    use crate::rational::q;

    fn three_point() -> Vec<(Rational, Rational)> {
        vec![(q(0, 1), q(1, 4)), (q(1, 1), q(1, 2)), (q(2, 1), q(1, 4))]
    }

    #[test]
    fn variable_and_its_decreasing_transform() {
        let support = [q(0, 1), q(1, 1), q(2, 1)];
        let spec = MonotoneFamilySpec {
            x_laws: vec![three_point()],
            g_tables: vec![Some(ValueTable::from_fn(&support, |x| x * x * q(-1, 1)))],
            outputs: vec![
                FamilyOutput {
                    a_set: vec![0],
                    b_set: vec![],
                    f: FunctionTable::projection(0, &support),
                },
                FamilyOutput {
                    a_set: vec![],
                    b_set: vec![0],
                    f: FunctionTable::projection(0, &[q(-4, 1), q(-1, 1), q(0, 1)]),
                },
            ],
        };
        let d = build_disjoint_monotone_family(&spec, B).unwrap();
        assert_eq!(d.len(), 3);
        assert!(check_na(&d, &Limits::default()).unwrap().is_holds());
    }

    #[test]
    fn round_robin_instance_matches_builder() {
        for spec in [huber_spec(3, q(2, 3)).unwrap(), chess_spec(3, |i, j| (q(1, (i + j + 2) as i64), q(1, 4))).unwrap()] {
            let fam = round_robin_as_family(&spec).unwrap();
            assert_eq!(
                build_disjoint_monotone_family(&fam, B).unwrap(),
                build_round_robin(&spec, B).unwrap()
            );
        }
    }

    #[test]
    fn constant_outputs_are_point_masses() {
        let spec = MonotoneFamilySpec {
            x_laws: vec![three_point(), three_point()],
            g_tables: vec![None, None],
            outputs: vec![
                FamilyOutput {
                    a_set: vec![0],
                    b_set: vec![],
                    f: FunctionTable::new(vec![0]).with_default(q(3, 1)),
                },
                FamilyOutput {
                    a_set: vec![1],
                    b_set: vec![],
                    f: FunctionTable::new(vec![0]).with_default(q(5, 1)),
                },
            ],
        };
        let d = build_disjoint_monotone_family(&spec, B).unwrap();
        assert_eq!(d, JointDist::point(Outcome::from_ints(&[3, 5])));
    }

    #[test]
    fn rejects_bad_specs() {
        let support = [q(0, 1), q(1, 1), q(2, 1)];
        let inc = ValueTable::identity(&support);
        let mut spec = MonotoneFamilySpec {
            x_laws: vec![three_point()],
            g_tables: vec![Some(inc)],
            outputs: vec![],
        };
        assert!(matches!(spec.validate(), Err(Error::NotMonotone(_))));

        spec.g_tables = vec![None];
        let out = FamilyOutput {
            a_set: vec![0],
            b_set: vec![],
            f: FunctionTable::projection(0, &support),
        };
        spec.outputs = vec![out.clone(), out];
        assert!(matches!(spec.validate(), Err(Error::OverlappingSubsets(0))));

        spec.outputs = vec![FamilyOutput {
            a_set: vec![0],
            b_set: vec![],
            f: FunctionTable::new(vec![0])
                .with_default(q(0, 1))
                .with_entry(Outcome::from_ints(&[1]), q(1, 1)),
        }];
        assert!(matches!(spec.validate(), Err(Error::NotMonotone(_))));
    }
}
