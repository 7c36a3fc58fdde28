//! Deterministic generators for the instances used to show that each condition is needed.
//! Goods are indexed from 0; "good `g_j`" in the docs below is index `j - 1`.

use thiserror::Error;

use crate::model::{Allocation, Instance, ModelError, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructionError {
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

type Result<T> = std::result::Result<T, ConstructionError>;

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ConstructionError::Range(msg()))
    }
}

fn q(v: u64) -> Rational {
    Rational::from(v)
}

/// `n` agents and `n` goods: agent 1 values `g_1` at `n`; agent `i >= 2` values `g_{i-1}` at
/// `n - 1` and `g_i` at 1.
pub fn chain_instance(n: usize) -> Result<Instance> {
    require(n >= 4, || format!("chain instance needs n >= 4, got {n}"))?;
    let mut rows = vec![vec![Rational::new(); n]; n];
    rows[0][0] = q(n as u64);
    for (i, row) in rows.iter_mut().enumerate().skip(1) {
        row[i - 1] = q(n as u64 - 1);
        row[i] = q(1);
    }
    Ok(Instance::new(rows)?)
}

/// The diagonal allocation (every agent gets its own good) and the shifted one where agent
/// `i + 1` takes `g_i` for `2 <= i <= n - 1` and agent `n` keeps `g_n`, leaving agent 2 empty.
pub fn chain_allocations(n: usize) -> Result<(Allocation, Allocation)> {
    require(n >= 4, || format!("chain instance needs n >= 4, got {n}"))?;
    let diagonal: Vec<usize> = (0..n).collect();
    let mut shifted = vec![0usize; n];
    for (g, owner) in shifted.iter_mut().enumerate().take(n - 1).skip(1) {
        *owner = g + 1;
    }
    shifted[n - 1] = n - 1;
    Ok((
        Allocation::from_assignment(diagonal),
        Allocation::from_assignment(shifted),
    ))
}

/// `n` agents and `(k+1)n` goods, each worth `a` to agent 1 and `b` to everyone else.
pub fn identical_two_value(n: usize, k: u64, a: &Rational, b: &Rational) -> Result<Instance> {
    require(n >= 2, || format!("need n >= 2, got {n}"))?;
    require(a.cmp0().is_gt() && b.cmp0().is_gt(), || {
        "a and b must be positive".into()
    })?;
    let m = (k as usize + 1) * n;
    let mut rows = vec![vec![b.clone(); m]; n];
    rows[0] = vec![a.clone(); m];
    Ok(Instance::new(rows)?)
}

/// `n >= 3` agents, `k(n-1) + 2` goods, every row summing to `c = max(kna, knb)`.
/// The first `k(n-1)` goods form the shared block; the last two are the small good for agent
/// 1 and the large good everyone values.
pub fn normalized_three(n: usize, k: u64, a: &Rational, b: &Rational, eps: &Rational) -> Result<Instance> {
    require(n >= 3, || format!("need n >= 3, got {n}"))?;
    require(k >= 1, || "need k >= 1".into())?;
    require(a.cmp0().is_gt() && b.cmp0().is_gt(), || {
        "a and b must be positive".into()
    })?;
    require(eps.cmp0().is_gt() && eps < b, || "need 0 < eps < b".into())?;
    let kn = q(k * n as u64);
    let c = Rational::from(&kn * a).max(Rational::from(&kn * b));
    let block = k as usize * (n - 1);
    let m = block + 2;
    let shared = q(k * (n as u64 - 1));
    let mut rows = vec![vec![Rational::new(); m]; n];
    let small = Rational::from(b - eps);
    rows[0][..block].fill(b.clone());
    rows[0][m - 2] = small.clone();
    rows[0][m - 1] = (&c - Rational::from(&shared * b)) - small;
    for row in rows.iter_mut().take(n - 1).skip(1) {
        for cell in row.iter_mut().take(block) {
            *cell = a.clone();
        }
        row[m - 1] = &c - Rational::from(&shared * a);
    }
    rows[n - 1][m - 1] = c;
    Ok(Instance::new(rows)?)
}

/// Two agents and `2 ceil(c/delta)` goods each worth `c / ceil(c/delta)` to both.
pub fn concavity_gadget(c: &Rational, delta: &Rational) -> Result<Instance> {
    require(c.cmp0().is_gt(), || "c must be positive".into())?;
    require(delta.cmp0().is_gt() && delta < c, || "need 0 < delta < c".into())?;
    let steps = Rational::from(c / delta).ceil().numer().clone();
    let count = steps
        .to_usize()
        .filter(|&s| s <= 1 << 20)
        .ok_or_else(|| ConstructionError::Range("c / delta is too large".into()))?;
    let value = c / Rational::from(steps);
    Ok(Instance::new(vec![vec![value; 2 * count]; 2])?)
}

/// `n` agents and `2k + n` goods: agents 1 and 2 value the first `2k + 2` goods at 1, and
/// agent `i >= 3` values only `g_{2k+i}`.
pub fn binary_gadget(n: usize, k: u64) -> Result<Instance> {
    require(n >= 2, || format!("need n >= 2, got {n}"))?;
    let shared = 2 * k as usize + 2;
    let m = 2 * k as usize + n;
    let mut rows = vec![vec![Rational::new(); m]; n];
    for row in rows.iter_mut().take(2) {
        for cell in row.iter_mut().take(shared) {
            *cell = q(1);
        }
    }
    for (i, row) in rows.iter_mut().enumerate().skip(2) {
        row[2 * k as usize + i] = q(1);
    }
    Ok(Instance::new(rows)?)
}

/// `n` agents and `(k+1)(n-1) + l + r + 1` goods: agent 1 values the first `r` at `a` and the
/// rest at `b`; everyone else values all of them at `a`. Requires `(k+1)b > lb + ra`.
pub fn two_value_gadget(n: usize, k: u64, l: u64, r: u64, a: u64, b: u64) -> Result<Instance> {
    require(n >= 2, || format!("need n >= 2, got {n}"))?;
    require(a >= b && b > 0, || format!("need a >= b > 0, got a = {a}, b = {b}"))?;
    require((k + 1) * b > l * b + r * a, || {
        format!("guard (k+1)b > lb + ra fails for k={k}, l={l}, r={r}, a={a}, b={b}")
    })?;
    let m = ((k + 1) * (n as u64 - 1) + l + r + 1) as usize;
    let mut rows = vec![vec![q(a); m]; n];
    for (g, cell) in rows[0].iter_mut().enumerate() {
        *cell = if (g as u64) < r { q(a) } else { q(b) };
    }
    Ok(Instance::new(rows)?)
}

/// `n` agents and `kn + 1` goods: agent 1 values `g_1` at `b - 1` and the rest at `b`;
/// everyone else values `g_1` at 0 and the rest at `a`.
pub fn integer_general(n: usize, k: u64, a: u64, b: u64) -> Result<Instance> {
    require(n >= 2, || format!("need n >= 2, got {n}"))?;
    require(k >= 1 && a >= 1 && b >= 1, || "need k, a, b >= 1".into())?;
    let m = k as usize * n + 1;
    let mut rows = vec![vec![q(a); m]; n];
    for row in rows.iter_mut().skip(1) {
        row[0] = Rational::new();
    }
    rows[0] = vec![q(b); m];
    rows[0][0] = q(b - 1);
    Ok(Instance::new(rows)?)
}

/// The tie built from a flat stretch `(a, b)` of a non-decreasing function.
#[derive(Clone, Debug)]
pub struct FlatTie {
    pub instance: Instance,
    /// Each good is worth `1/d`.
    pub d: u64,
    /// Goods per agent in the balanced allocation.
    pub c: u64,
    /// `c` goods each; the only EF1 allocation.
    pub balanced: Allocation,
    /// `c + 1` goods to agent 1, `c - 1` to agent 2, `c` to the rest.
    pub skewed: Allocation,
}

/// `d = floor(3/(b-a)) + 1`, `c` one more than the least `w` with `w/d > a`, and `nc`
/// goods worth `1/d` each, so `(c-1)/d`, `c/d` and `(c+1)/d` all lie in `(a, b)`.
pub fn flat_function_gadget(n: usize, a: &Rational, b: &Rational) -> Result<FlatTie> {
    require(n >= 2, || format!("need n >= 2, got {n}"))?;
    require(a.cmp0().is_gt() && a < b, || "need 0 < a < b".into())?;
    let width = Rational::from(b - a);
    let d_int = (3u32 / width).floor().numer().clone() + 1u32;
    let d = d_int
        .to_u64()
        .ok_or_else(|| ConstructionError::Range("flat stretch is too narrow".into()))?;
    // least w with w/d > a
    let w = (Rational::from(a * &d_int).floor().numer().clone() + 1u32)
        .to_u64()
        .ok_or_else(|| ConstructionError::Range("a is too large".into()))?;
    let c = w + 1;
    let inside = |t: u64| {
        let v = Rational::from((t, d));
        &v > a && &v < b
    };
    require(inside(c - 1) && inside(c) && inside(c + 1), || "no valid c".into())?;
    let per_agent = c as usize;
    let m = n * per_agent;
    if m > 1 << 20 {
        return Err(ConstructionError::Range("instance would be too large".into()));
    }
    let instance = Instance::new(vec![vec![Rational::from((1, d)); m]; n])?;
    let balanced: Vec<usize> = (0..m).map(|g| g / per_agent).collect();
    let mut skewed = balanced.clone();
    // the first good of agent 2's block moves to agent 1
    skewed[per_agent] = 0;
    Ok(FlatTie {
        instance,
        d,
        c,
        balanced: Allocation::from_assignment(balanced),
        skewed: Allocation::from_assignment(skewed),
    })
}

/// Two agents, nine goods: agent 1 values eight at `3z` and the last at `z`; agent 2 values
/// the first five at `5z` and the rest at 0.
pub fn normalized_two_scaled(z: &Rational) -> Result<Instance> {
    require(z.cmp0().is_gt(), || "z must be positive".into())?;
    let three = Rational::from(z * 3u32);
    let five = Rational::from(z * 5u32);
    let mut first = vec![three; 8];
    first.push(z.clone());
    let mut second = vec![five; 5];
    second.extend(std::iter::repeat_n(Rational::new(), 4));
    Ok(Instance::new(vec![first, second])?)
}

/// Two agents, `2k + 1` goods: agent 1 values the first `k` at 4, the next at 1 and the rest
/// at 0; agent 2 values the first `2k` at 2 and the last at 1.
pub fn normalized_two_split(k: u64) -> Result<Instance> {
    require(k >= 1, || "need k >= 1".into())?;
    let k = k as usize;
    let m = 2 * k + 1;
    let mut first = vec![Rational::new(); m];
    for cell in first.iter_mut().take(k) {
        *cell = q(4);
    }
    first[k] = q(1);
    let mut second = vec![q(2); m];
    second[m - 1] = q(1);
    Ok(Instance::new(vec![first, second])?)
}

/// In the split instance, agent 1 takes the first `x` goods and agent 2 everything else.
pub fn split_allocation(k: u64, x: u64) -> Result<Allocation> {
    require(x <= k, || format!("need x <= k, got x = {x}, k = {k}"))?;
    let m = 2 * k as usize + 1;
    Ok(Allocation::from_assignment(
        (0..m).map(|g| usize::from(g as u64 >= x)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::classify;

    #[test]
    fn chain_utilities() {
        let inst = chain_instance(4).unwrap();
        let (a, b) = chain_allocations(4).unwrap();
        let sum = |al: &Allocation| al.utilities(&inst).into_iter().fold(Rational::new(), |s, u| s + u);
        assert_eq!(sum(&a), 7);
        assert_eq!(sum(&b), 11);
    }

    #[test]
    fn shapes() {
        assert_eq!(identical_two_value(2, 0, &q(6), &q(1)).unwrap().goods(), 2);
        assert_eq!(
            normalized_three(3, 2, &q(2), &q(1), &Rational::from((1, 2)))
                .unwrap()
                .goods(),
            6
        );
        assert_eq!(binary_gadget(3, 2).unwrap().goods(), 7);
        assert_eq!(two_value_gadget(2, 2, 1, 0, 3, 2).unwrap().goods(), 5);
        assert!(two_value_gadget(2, 0, 1, 0, 3, 2).is_err());
        assert_eq!(integer_general(3, 2, 4, 3).unwrap().goods(), 7);
        assert_eq!(normalized_two_split(20).unwrap().goods(), 41);
        let g = concavity_gadget(&q(1), &Rational::from((1, 2))).unwrap();
        assert_eq!(g.goods(), 4);
        assert_eq!(g.utility(0, 0), &Rational::from((1, 2)));
    }

    #[test]
    fn normalized_rows() {
        let inst = normalized_three(3, 1, &q(1), &q(1), &Rational::from((1, 2))).unwrap();
        let p = classify(&inst);
        assert!(p.normalized && p.positive_admitting);
        assert!(classify(&normalized_two_scaled(&q(1)).unwrap()).normalized);
        assert_eq!(normalized_two_split(2).unwrap().row_total(1), 9);
    }

    #[test]
    fn flat_tie_recipe() {
        let t = flat_function_gadget(2, &q(1), &q(2)).unwrap();
        assert_eq!((t.d, t.c, t.instance.goods()), (4, 6, 12));
        assert_eq!(t.skewed.bundles(2)[0].len(), 7);
    }
}
