//! EF1, EF and Pareto-optimality predicates, all with exact comparisons.

use serde::Serialize;

use crate::model::{Allocation, Instance, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ef1Violation {
    pub envious: usize,
    pub envied: usize,
    /// `u_i(A_j) - max_{g in A_j} u_i(g) - u_i(A_i)`, always positive.
    #[serde(serialize_with = "ser_rational")]
    pub margin: Rational,
}

fn ser_rational<S: serde::Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ef1Report {
    pub holds: bool,
    pub violations: Vec<Ef1Violation>,
}

/// Per agent `i`, per bundle `j`: `u_i(A_j)` and `max_{g in A_j} u_i(g)`.
fn bundle_views(inst: &Instance, alloc: &Allocation) -> (Vec<Vec<Rational>>, Vec<Vec<Option<Rational>>>) {
    let n = inst.agents();
    let mut value = vec![vec![Rational::new(); n]; n];
    let mut best: Vec<Vec<Option<Rational>>> = vec![vec![None; n]; n];
    for (g, &j) in alloc.assignment().iter().enumerate() {
        for i in 0..n {
            let u = inst.utility(i, g);
            value[i][j] += u;
            let slot = &mut best[i][j];
            if slot.as_ref().is_none_or(|b| u > b) {
                *slot = Some(u.clone());
            }
        }
    }
    (value, best)
}

/// Uses `u_i(A_i) >= u_i(A_j) - max_{g in A_j} u_i(g)` for every pair with `A_j` non-empty.
pub fn is_ef1(inst: &Instance, alloc: &Allocation) -> Ef1Report {
    let n = inst.agents();
    let (value, best) = bundle_views(inst, alloc);
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let Some(top) = &best[i][j] else { continue };
            let margin = Rational::from(&value[i][j] - top) - &value[i][i];
            if margin.cmp0().is_gt() {
                violations.push(Ef1Violation {
                    envious: i,
                    envied: j,
                    margin,
                });
            }
        }
    }
    Ef1Report {
        holds: violations.is_empty(),
        violations,
    }
}

pub fn is_ef(inst: &Instance, alloc: &Allocation) -> bool {
    let (value, _) = bundle_views(inst, alloc);
    (0..inst.agents()).all(|i| (0..inst.agents()).all(|j| value[i][i] >= value[i][j]))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PoVerdict {
    ParetoOptimal,
    /// The lexicographically smallest dominating assignment vector.
    Dominated(Allocation),
    BudgetExceeded {
        scanned: u64,
    },
}

/// Steps an assignment vector to its lexicographic successor; false after the last one.
pub(crate) fn next_assignment(v: &mut [usize], agents: usize) -> bool {
    for slot in v.iter_mut().rev() {
        *slot += 1;
        if *slot < agents {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Brute-force scan of all `n^m` allocations, stopping after `budget` of them.
pub fn is_pareto_optimal(inst: &Instance, alloc: &Allocation, budget: u64) -> PoVerdict {
    let n = inst.agents();
    let base = alloc.utilities(inst);
    let mut v = vec![0usize; inst.goods()];
    let mut scanned = 0u64;
    loop {
        if scanned >= budget {
            return PoVerdict::BudgetExceeded { scanned };
        }
        scanned += 1;
        let candidate = Allocation::from_assignment(v.clone());
        let utils = candidate.utilities(inst);
        let mut strict = false;
        let mut worse = false;
        for i in 0..n {
            match utils[i].cmp(&base[i]) {
                std::cmp::Ordering::Greater => strict = true,
                std::cmp::Ordering::Less => {
                    worse = true;
                    break;
                }
                std::cmp::Ordering::Equal => {}
            }
        }
        if strict && !worse {
            return PoVerdict::Dominated(candidate);
        }
        if !next_assignment(&mut v, n) {
            return PoVerdict::ParetoOptimal;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concentrated_pair_is_not_ef1() {
        let inst = Instance::from_integers(&[[1, 1], [1, 1]]).unwrap();
        let alloc = Allocation::new(vec![0, 0], 2).unwrap();
        let report = is_ef1(&inst, &alloc);
        assert!(!report.holds);
        assert_eq!((report.violations[0].envious, report.violations[0].envied), (1, 0));
        assert_eq!(report.violations[0].margin, 1);
    }

    #[test]
    fn ef_examples() {
        let single = Instance::from_integers(&[[1], [1]]).unwrap();
        assert!(!is_ef(&single, &Allocation::new(vec![0], 2).unwrap()));
        let zeros = Instance::from_integers(&[[0, 0], [0, 0]]).unwrap();
        assert!(is_ef(&zeros, &Allocation::new(vec![1, 1], 2).unwrap()));
        let fans = Instance::from_integers(&[[1, 0], [0, 1]]).unwrap();
        assert!(is_ef(&fans, &Allocation::new(vec![0, 1], 2).unwrap()));
    }

    #[test]
    fn po_examples() {
        let inst = Instance::from_integers(&[[1], [0]]).unwrap();
        assert_eq!(
            is_pareto_optimal(&inst, &Allocation::new(vec![1], 2).unwrap(), 100),
            PoVerdict::Dominated(Allocation::new(vec![0], 2).unwrap())
        );
        let big = Instance::from_integers(&[[1; 20], [1; 20]]).unwrap();
        let alloc = Allocation::new(vec![0; 20], 2).unwrap();
        assert!(matches!(
            is_pareto_optimal(&big, &alloc, 1000),
            PoVerdict::BudgetExceeded { scanned: 1000 }
        ));
    }
}
