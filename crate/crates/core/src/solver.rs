//! The additive welfarist rule: every allocation maximizing `sum_i f(u_i(A_i))`.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use rug::float::Round;

use crate::arith::{compare_detailed, Atom, Expr, Magnitude, Precision, Tier, ValueOrdering};
use crate::fairness::{is_ef1, next_assignment};
use crate::model::{Allocation, Instance, Rational};
use crate::welfare::{eval_expr, WelfareError, WelfareFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("search space of {size} allocations exceeds the cap {cap}")]
    CapExceeded { size: String, cap: u64 },
    #[error(transparent)]
    Welfare(#[from] WelfareError),
    #[error("welfare comparison inconclusive at {0} bits")]
    Inconclusive(u32),
    #[error("k must be at least 1")]
    BadParameter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exactness {
    Exact,
    IntervalCertified(u32),
    Inconclusive,
}

impl Exactness {
    fn absorb(&mut self, (ord, tier): (ValueOrdering, Tier)) {
        if ord.is_inconclusive() {
            *self = Exactness::Inconclusive;
            return;
        }
        if let (Tier::Interval(bits), Exactness::Exact) = (tier, *self) {
            *self = Exactness::IntervalCertified(bits);
        } else if let (Tier::Interval(bits), Exactness::IntervalCertified(old)) = (tier, *self) {
            *self = Exactness::IntervalCertified(old.max(bits));
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaximizerSet {
    /// Sorted by assignment vector.
    pub allocations: Vec<Allocation>,
    pub welfare: Expr,
    pub exactness: Exactness,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub precision: Precision,
    pub enumeration_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            precision: Precision::default(),
            enumeration_cap: 50_000_000,
        }
    }
}

/// A welfare value with a cached 64-bit outward enclosure.
#[derive(Clone)]
struct Valued {
    expr: Expr,
    lo: f64,
    hi: f64,
    /// Contains atoms other than logarithms, so exact comparison would fall back to intervals.
    transcendental: bool,
}

impl Valued {
    fn of(expr: Expr) -> Self {
        let (lo, hi) = match expr.magnitude() {
            Magnitude::Finite => {
                let e = expr.enclose(64);
                (e.lo.to_f64_round(Round::Down), e.hi.to_f64_round(Round::Up))
            }
            Magnitude::PosInf => (f64::INFINITY, f64::INFINITY),
            Magnitude::NegInf => (f64::NEG_INFINITY, f64::NEG_INFINITY),
            Magnitude::Undefined => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let transcendental = expr.atoms().any(|(a, _)| !matches!(a, Atom::Ln(_)));
        Valued {
            expr,
            lo,
            hi,
            transcendental,
        }
    }

    fn zero() -> Self {
        Valued::of(Expr::zero())
    }

    fn add(&mut self, other: &Valued) {
        self.expr += &other.expr;
        self.lo = (self.lo + other.lo).next_down();
        self.hi = (self.hi + other.hi).next_up();
        self.transcendental |= other.transcendental;
    }

    /// Separates by the cached enclosures when exact comparison would need intervals anyway.
    fn compare(&self, other: &Valued, prec: &Precision) -> (ValueOrdering, Tier) {
        if (self.transcendental || other.transcendental) && self.expr.is_finite() && other.expr.is_finite() {
            if self.lo > other.hi {
                return (ValueOrdering::Greater, Tier::Interval(64));
            }
            if self.hi < other.lo {
                return (ValueOrdering::Less, Tier::Interval(64));
            }
        }
        compare_detailed(&self.expr, &other.expr, prec)
    }
}

/// Memoized `f` over utility values.
struct Evaluator<'a> {
    f: &'a WelfareFunction,
    memo: HashMap<Rational, Valued>,
}

impl<'a> Evaluator<'a> {
    fn new(f: &'a WelfareFunction) -> Self {
        Evaluator {
            f,
            memo: HashMap::new(),
        }
    }

    fn value(&mut self, u: &Rational) -> Result<&Valued, WelfareError> {
        if !self.memo.contains_key(u) {
            let v = Valued::of(eval_expr(self.f, u)?);
            self.memo.insert(u.clone(), v);
        }
        Ok(&self.memo[u])
    }

    fn welfare(&mut self, utils: &[Rational]) -> Result<Valued, WelfareError> {
        let mut total = Valued::zero();
        for u in utils {
            total.add(self.value(u)?);
        }
        Ok(total)
    }
}

/// `sum_i f(u_i(A_i))` for one allocation.
pub fn welfare(inst: &Instance, f: &WelfareFunction, alloc: &Allocation) -> Result<Expr, WelfareError> {
    Ok(Evaluator::new(f).welfare(&alloc.utilities(inst))?.expr)
}

fn check_cap(inst: &Instance, cap: u64) -> Result<(), SolveError> {
    let size = rug::ops::Pow::pow(rug::Integer::from(inst.agents()), inst.goods() as u32);
    if size > cap {
        return Err(SolveError::CapExceeded {
            size: size.to_string(),
            cap,
        });
    }
    Ok(())
}

fn for_each_assignment(inst: &Instance, mut visit: impl FnMut(&[usize], &[Rational])) {
    let n = inst.agents();
    let mut v = vec![0usize; inst.goods()];
    loop {
        let mut utils = vec![Rational::new(); n];
        for (g, &i) in v.iter().enumerate() {
            utils[i] += inst.utility(i, g);
        }
        visit(&v, &utils);
        if !next_assignment(&mut v, n) {
            break;
        }
    }
}

/// Scans all `n^m` assignment vectors and returns every welfare maximizer.
pub fn enumerate_maximizers(
    inst: &Instance,
    f: &WelfareFunction,
    cfg: &SolverConfig,
) -> Result<MaximizerSet, SolveError> {
    check_cap(inst, cfg.enumeration_cap)?;
    let mut profiles: Vec<Vec<Rational>> = Vec::new();
    let mut seen: HashSet<Vec<Rational>> = HashSet::new();
    for_each_assignment(inst, |_, utils| {
        if !seen.contains(utils) {
            seen.insert(utils.to_vec());
            profiles.push(utils.to_vec());
        }
    });

    let mut eval = Evaluator::new(f);
    let mut values = profiles
        .iter()
        .map(|p| eval.welfare(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut exactness = Exactness::Exact;
    let mut best = 0usize;
    for idx in 1..values.len() {
        let outcome = values[idx].compare(&values[best], &cfg.precision);
        exactness.absorb(outcome);
        if outcome.0 == ValueOrdering::Greater {
            best = idx;
        }
    }
    let mut winners: HashSet<&Vec<Rational>> = HashSet::new();
    for (idx, p) in profiles.iter().enumerate() {
        if idx == best {
            winners.insert(p);
            continue;
        }
        let outcome = values[idx].compare(&values[best], &cfg.precision);
        exactness.absorb(outcome);
        if matches!(outcome.0, ValueOrdering::Equal | ValueOrdering::Inconclusive(_)) {
            winners.insert(p);
        }
    }
    let mut allocations = Vec::new();
    for_each_assignment(inst, |v, utils| {
        if winners.contains(&utils.to_vec()) {
            allocations.push(Allocation::from_assignment(v.to_vec()));
        }
    });
    Ok(MaximizerSet {
        allocations,
        welfare: values.swap_remove(best).expr,
        exactness,
    })
}

/// Depth-first search over goods with the bound "every remaining good goes to every agent",
/// valid because `f` is non-decreasing. Returns one maximizer.
pub fn solve_branch_bound(
    inst: &Instance,
    f: &WelfareFunction,
    cfg: &SolverConfig,
) -> Result<(Allocation, Expr), SolveError> {
    let n = inst.agents();
    let m = inst.goods();
    let mut order: Vec<usize> = (0..m).collect();
    let top = |g: usize| (0..n).map(|i| inst.utility(i, g)).max().cloned().unwrap_or_default();
    order.sort_by(|&a, &b| top(b).cmp(&top(a)).then(a.cmp(&b)));

    // suffix[d][i]: agent i's value for goods order[d..]
    let mut suffix = vec![vec![Rational::new(); n]; m + 1];
    for d in (0..m).rev() {
        let next = suffix[d + 1].clone();
        for (i, (slot, below)) in suffix[d].iter_mut().zip(&next).enumerate() {
            *slot = Rational::from(below + inst.utility(i, order[d]));
        }
    }

    let mut eval = Evaluator::new(f);
    let start = match crate::model::is_positive_admitting(inst) {
        (true, Some(w)) => w,
        _ => Allocation::from_assignment(
            (0..m)
                .map(|g| {
                    (0..n)
                        .max_by(|&a, &b| inst.utility(a, g).cmp(inst.utility(b, g)).then(b.cmp(&a)))
                        .unwrap_or(0)
                })
                .collect(),
        ),
    };
    let mut incumbent = (start.clone(), eval.welfare(&start.utilities(inst))?);

    struct Search<'s, 'f> {
        inst: &'s Instance,
        order: &'s [usize],
        suffix: &'s [Vec<Rational>],
        eval: Evaluator<'f>,
        prec: Precision,
        nodes: u64,
        cap: u64,
        assignment: Vec<usize>,
        utils: Vec<Rational>,
    }

    impl Search<'_, '_> {
        fn run(&mut self, depth: usize, incumbent: &mut (Allocation, Valued)) -> Result<(), SolveError> {
            self.nodes += 1;
            if self.nodes > self.cap {
                return Err(SolveError::CapExceeded {
                    size: format!("more than {} search nodes", self.cap),
                    cap: self.cap,
                });
            }
            let n = self.inst.agents();
            if depth == self.order.len() {
                let w = self.eval.welfare(&self.utils)?;
                match w.compare(&incumbent.1, &self.prec).0 {
                    ValueOrdering::Greater => *incumbent = (Allocation::from_assignment(self.assignment.clone()), w),
                    ValueOrdering::Inconclusive(bits) => return Err(SolveError::Inconclusive(bits)),
                    _ => {}
                }
                return Ok(());
            }
            let optimistic: Vec<Rational> = (0..n)
                .map(|i| Rational::from(&self.utils[i] + &self.suffix[depth][i]))
                .collect();
            let bound = self.eval.welfare(&optimistic)?;
            if matches!(
                bound.compare(&incumbent.1, &self.prec).0,
                ValueOrdering::Less | ValueOrdering::Equal
            ) {
                return Ok(());
            }
            let g = self.order[depth];
            let mut agents: Vec<usize> = (0..n).collect();
            agents.sort_by(|&a, &b| self.inst.utility(b, g).cmp(self.inst.utility(a, g)).then(a.cmp(&b)));
            for i in agents {
                self.assignment[g] = i;
                self.utils[i] += self.inst.utility(i, g);
                let result = self.run(depth + 1, incumbent);
                self.utils[i] -= self.inst.utility(i, g);
                result?;
            }
            Ok(())
        }
    }

    let mut search = Search {
        inst,
        order: &order,
        suffix: &suffix,
        eval,
        prec: cfg.precision,
        nodes: 0,
        cap: cfg.enumeration_cap,
        assignment: vec![0; m],
        utils: vec![Rational::new(); n],
    };
    search.run(0, &mut incumbent)?;
    Ok((incumbent.0, incumbent.1.expr))
}

/// Whether every maximizer is EF1; otherwise the first violating maximizer.
pub fn chosen_all_ef1(
    inst: &Instance,
    f: &WelfareFunction,
    cfg: &SolverConfig,
) -> Result<(bool, Option<Allocation>), SolveError> {
    let set = enumerate_maximizers(inst, f, cfg)?;
    if set.exactness == Exactness::Inconclusive {
        return Err(SolveError::Inconclusive(cfg.precision.ceiling_bits));
    }
    Ok(match set.allocations.into_iter().find(|a| !is_ef1(inst, a).holds) {
        Some(bad) => (false, Some(bad)),
        None => (true, None),
    })
}

/// For the two-agent instance with `2k+1` goods where agent 1 takes `x` of the first `k`
/// goods and agent 2 the rest, the `x` in `[ceil(k/2), k]` maximizing
/// `f(4x) + f(4k + 1 - 2x)`. Ties resolve to the smallest `x`.
pub fn structured_ik_argmax(k: u64, f: &WelfareFunction, prec: &Precision) -> Result<(u64, Expr), SolveError> {
    if k == 0 {
        return Err(SolveError::BadParameter);
    }
    let value = |x: u64| -> Result<Expr, WelfareError> {
        Ok(eval_expr(f, &Rational::from(4 * x))? + &eval_expr(f, &Rational::from(4 * k + 1 - 2 * x))?)
    };
    let mut best_x = k.div_ceil(2);
    let mut best = value(best_x)?;
    for x in best_x + 1..=k {
        let w = value(x)?;
        match crate::arith::compare(&w, &best, prec) {
            ValueOrdering::Greater => {
                best_x = x;
                best = w;
            }
            ValueOrdering::Inconclusive(bits) => return Err(SolveError::Inconclusive(bits)),
            _ => {}
        }
    }
    Ok((best_x, best))
}
