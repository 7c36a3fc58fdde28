//! Bounded checks of the marginal-block conditions on welfare functions, the known
//! analytic verdicts for the standard families, the implication harness between
//! conditions, threshold bisection and a few numeric lemmas.
//!
//! Throughout, `delta_k(x) = f((k+1)x) - f(kx)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rug::float::Round;
use serde_json::{json, Value};
use thiserror::Error;

use crate::arith::{atom_interval, compare, Atom, Expr, Interval, Magnitude, Precision, ValueOrdering};
use crate::model::{parse_rational, Rational};
use crate::welfare::{delta_expr, difference, eval_expr, ExtendedValue, WelfareError, WelfareFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error(transparent)]
    Welfare(#[from] WelfareError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("comparison inconclusive at {0} bits")]
    Inconclusive(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionId {
    C1,
    C1a,
    C2,
    C3,
    C3a,
    C3b,
    C4,
    C5,
    C6a,
    C6b,
}

use ConditionId::*;

impl ConditionId {
    pub const ALL: [ConditionId; 10] = [C1, C1a, C2, C3, C3a, C3b, C4, C5, C6a, C6b];

    /// `(stronger, weaker)` pairs. C1 and C1a are equivalent, as are C3, C3a and C3b.
    pub const IMPLICATIONS: [(ConditionId, ConditionId); 12] = [
        (C1, C1a),
        (C1a, C1),
        (C1, C2),
        (C1, C6b),
        (C6b, C6a),
        (C6a, C5),
        (C5, C3),
        (C3, C3a),
        (C3a, C3),
        (C3, C3b),
        (C3b, C3),
        (C3, C4),
    ];

    /// The implications the bounded harness checks: the integer chain and the
    /// equivalence of the three C3 forms.
    pub const HARNESS: [(ConditionId, ConditionId); 8] = [
        (C6b, C6a),
        (C6a, C5),
        (C5, C3),
        (C3, C3a),
        (C3a, C3),
        (C3, C3b),
        (C3b, C3),
        (C3, C4),
    ];

    pub fn name(self) -> &'static str {
        match self {
            C1 => "C1",
            C1a => "C1a",
            C2 => "C2",
            C3 => "C3",
            C3a => "C3a",
            C3b => "C3b",
            C4 => "C4",
            C5 => "C5",
            C6a => "C6a",
            C6b => "C6b",
        }
    }

    /// Quantified over positive reals, so checked on the rational grid.
    pub fn is_real_quantified(self) -> bool {
        matches!(self, C1 | C1a | C2)
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionId {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix('c').unwrap_or(&t);
        Ok(match t {
            "1" => C1,
            "1a" => C1a,
            "2" => C2,
            "3" => C3,
            "3a" => C3a,
            "3b" => C3b,
            "4" => C4,
            "5" => C5,
            "6a" => C6a,
            "6b" => C6b,
            _ => return Err(ConditionError::UnknownCondition(s.to_string())),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub k_max: u64,
    /// Integer parameters `a`, `b` range over `1..=a_max` plus `probes`.
    pub a_max: u64,
    /// Sparse extra values of `a` and `b` above `a_max`.
    pub probes: Vec<u64>,
    /// `x` and `y` in C6b range over `0..=xy_max`.
    pub xy_max: u64,
    pub real_grid: Vec<Rational>,
    pub precision: Precision,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::new(10, 20)
    }
}

impl Bounds {
    pub fn new(k_max: u64, a_max: u64) -> Self {
        Bounds {
            k_max,
            a_max,
            probes: Vec::new(),
            xy_max: a_max,
            real_grid: Bounds::default_grid(),
            precision: Precision::default(),
        }
    }

    /// `{j/4 : 1 <= j <= 40}`.
    pub fn default_grid() -> Vec<Rational> {
        (1..=40).map(|j| Rational::from((j, 4))).collect()
    }

    /// Adds every power of two in `(a_max, cap]` as a probe.
    pub fn with_power_probes(mut self, cap: u64) -> Self {
        self.probes = (0..64)
            .map(|e| 1u64 << e)
            .filter(|&p| p > self.a_max && p <= cap)
            .collect();
        self
    }

    pub fn validate(&self) -> Result<(), ConditionError> {
        if self.k_max < 2 {
            return Err(ConditionError::InvalidBounds(format!(
                "k_max must be at least 2, got {}",
                self.k_max
            )));
        }
        if self.a_max < 1 {
            return Err(ConditionError::InvalidBounds("a_max must be at least 1".into()));
        }
        if self.real_grid.is_empty() {
            return Err(ConditionError::InvalidBounds("real grid is empty".into()));
        }
        if let Some(q) = self.real_grid.iter().find(|q| q.cmp0().is_le()) {
            return Err(ConditionError::InvalidBounds(format!("grid value {q} is not positive")));
        }
        Ok(())
    }

    /// Parses a comma-separated list of positive rationals.
    pub fn parse_grid(text: &str) -> Result<Vec<Rational>, ConditionError> {
        text.split(',')
            .map(|t| parse_rational(t.trim()).map_err(|e| ConditionError::InvalidBounds(e.to_string())))
            .collect()
    }

    fn integers(&self) -> Vec<u64> {
        let mut v: Vec<u64> = (1..=self.a_max)
            .chain(self.probes.iter().copied())
            .filter(|&x| x >= 1)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn grid(&self) -> Vec<Rational> {
        let mut g = self.real_grid.clone();
        g.sort();
        g.dedup();
        g
    }

    pub fn to_json(&self) -> Value {
        json!({
            "k_max": self.k_max,
            "a_max": self.a_max,
            "probes": self.probes,
            "xy_max": self.xy_max,
            "real_grid": self.grid().iter().map(|q| q.to_string()).collect::<Vec<_>>(),
            "precision_ceiling_bits": self.precision.ceiling_bits,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub params: Vec<(&'static str, Rational)>,
    /// The relation that failed, read as `lhs > rhs` (or `lhs = rhs` for C1a).
    pub relation: &'static str,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Witness {
    pub fn param(&self, name: &str) -> Option<&Rational> {
        self.params.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub fn param_u64(&self, name: &str) -> Option<u64> {
        self.param(name)
            .and_then(|q| if q.denom() == &1 { q.numer().to_u64() } else { None })
    }

    pub fn to_json(&self, bits: u32) -> Value {
        let params: serde_json::Map<String, Value> = self
            .params
            .iter()
            .map(|(n, v)| (n.to_string(), Value::String(v.to_string())))
            .collect();
        json!({
            "params": params,
            "relation": self.relation,
            "lhs": ExtendedValue::from_expr(&self.lhs, bits).to_json(),
            "rhs": ExtendedValue::from_expr(&self.rhs, bits).to_json(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VerdictKind {
    NoViolationFound,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    NoViolationFound,
    Violated(Witness),
    Inconclusive(u32),
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::NoViolationFound => VerdictKind::NoViolationFound,
            Verdict::Violated(_) => VerdictKind::Violated,
            Verdict::Inconclusive(_) => VerdictKind::Inconclusive,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Violated(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub function: String,
    pub bounds: Bounds,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub tuples_checked: u64,
}

impl ConditionReport {
    pub fn to_json(&self) -> Value {
        let (verdict, witness, bits) = match &self.verdict {
            Verdict::NoViolationFound => ("NoViolationFound", Value::Null, None),
            Verdict::Violated(w) => ("Violated", w.to_json(64), None),
            Verdict::Inconclusive(b) => ("Inconclusive", Value::Null, Some(*b)),
        };
        json!({
            "condition": self.condition.name(),
            "function": self.function,
            "bounds": self.bounds.to_json(),
            "verdict": verdict,
            "witness": witness,
            "inconclusive_bits": bits,
            "tuples_checked": self.tuples_checked,
            "notes": self.notes,
        })
    }
}

/// A compared quantity with a cached double-precision enclosure.
struct Side {
    expr: Expr,
    lo: f64,
    hi: f64,
}

struct Scan<'f> {
    f: &'f WelfareFunction,
    prec: Precision,
    sides: Vec<Side>,
    int_diffs: HashMap<(u64, u64), usize>,
    rat_diffs: HashMap<(Rational, Rational), usize>,
    inconclusive: Option<u32>,
    notes: BTreeSet<String>,
    checked: u64,
}

impl<'f> Scan<'f> {
    fn new(f: &'f WelfareFunction, prec: Precision) -> Self {
        Scan {
            f,
            prec,
            sides: Vec::new(),
            int_diffs: HashMap::new(),
            rat_diffs: HashMap::new(),
            inconclusive: None,
            notes: BTreeSet::new(),
            checked: 0,
        }
    }

    fn intern(&mut self, expr: Expr) -> usize {
        let (lo, hi) = match expr.magnitude() {
            Magnitude::Finite => {
                let e = expr.enclose(64);
                (e.lo.to_f64_round(Round::Down), e.hi.to_f64_round(Round::Up))
            }
            Magnitude::PosInf => (f64::INFINITY, f64::INFINITY),
            Magnitude::NegInf => (f64::NEG_INFINITY, f64::NEG_INFINITY),
            Magnitude::Undefined => (f64::NEG_INFINITY, f64::INFINITY),
        };
        self.sides.push(Side { expr, lo, hi });
        self.sides.len() - 1
    }

    /// `f(hi) - f(lo)` at integers.
    fn idiff(&mut self, hi: u64, lo: u64) -> Result<usize, WelfareError> {
        if let Some(&i) = self.int_diffs.get(&(hi, lo)) {
            return Ok(i);
        }
        let e = difference(self.f, &Rational::from(hi), &Rational::from(lo))?;
        let i = self.intern(e);
        self.int_diffs.insert((hi, lo), i);
        Ok(i)
    }

    fn rdiff(&mut self, hi: Rational, lo: Rational) -> Result<usize, WelfareError> {
        if let Some(&i) = self.rat_diffs.get(&(hi.clone(), lo.clone())) {
            return Ok(i);
        }
        let e = difference(self.f, &hi, &lo)?;
        let i = self.intern(e);
        self.rat_diffs.insert((hi, lo), i);
        Ok(i)
    }

    fn idelta(&mut self, k: u64, x: u64) -> Result<usize, WelfareError> {
        self.idiff((k + 1) * x, k * x)
    }

    fn rdelta(&mut self, k: u64, x: &Rational) -> Result<usize, WelfareError> {
        self.rdiff(Rational::from(x * (k + 1)), Rational::from(x * k))
    }

    fn settle(&mut self, ord: ValueOrdering) -> Option<ValueOrdering> {
        if let ValueOrdering::Inconclusive(bits) = ord {
            self.inconclusive = Some(self.inconclusive.map_or(bits, |b| b.max(bits)));
            return None;
        }
        Some(ord)
    }

    /// Whether `lhs > rhs`; `None` when the comparison is inconclusive.
    fn greater(&mut self, l: usize, r: usize) -> Option<bool> {
        self.checked += 1;
        let (a, b) = (&self.sides[l], &self.sides[r]);
        let finite = a.expr.is_finite() && b.expr.is_finite();
        if finite && a.lo > b.hi {
            return Some(true);
        }
        if finite && a.hi < b.lo {
            return Some(false);
        }
        if a.expr.magnitude() == Magnitude::PosInf && b.expr.magnitude() == Magnitude::PosInf {
            self.notes
                .insert("an infinite value was compared with an infinite value and counted as not greater".into());
            return Some(false);
        }
        let ord = compare(&a.expr, &b.expr, &self.prec);
        self.settle(ord).map(|o| o == ValueOrdering::Greater)
    }

    fn equal(&mut self, l: usize, r: usize) -> Option<bool> {
        self.checked += 1;
        let (a, b) = (&self.sides[l], &self.sides[r]);
        if a.expr.is_finite() && b.expr.is_finite() && (a.lo > b.hi || a.hi < b.lo) {
            return Some(false);
        }
        let ord = compare(&a.expr, &b.expr, &self.prec);
        self.settle(ord).map(|o| o == ValueOrdering::Equal)
    }

    fn witness(&self, params: Vec<(&'static str, Rational)>, relation: &'static str, l: usize, r: usize) -> Witness {
        Witness {
            params,
            relation,
            lhs: self.sides[l].expr.clone(),
            rhs: self.sides[r].expr.clone(),
        }
    }
}

/// Lazily filled table of `delta_k(x)` over the integer parameter list.
struct DeltaTable {
    xs: Vec<u64>,
    cells: Vec<Vec<Option<usize>>>,
}

impl DeltaTable {
    fn new(xs: Vec<u64>) -> Self {
        DeltaTable { xs, cells: Vec::new() }
    }

    fn get(&mut self, scan: &mut Scan, k: u64, idx: usize) -> Result<usize, WelfareError> {
        let k_idx = k as usize;
        while self.cells.len() <= k_idx {
            self.cells.push(vec![None; self.xs.len()]);
        }
        if let Some(i) = self.cells[k_idx][idx] {
            return Ok(i);
        }
        let i = scan.idelta(k, self.xs[idx])?;
        self.cells[k_idx][idx] = Some(i);
        Ok(i)
    }
}

fn q(v: u64) -> Rational {
    Rational::from(v)
}

/// Fails the enclosing scan with a witness when `lhs > rhs` is false.
macro_rules! require_gt {
    ($scan:expr, $l:expr, $r:expr, $rel:expr, [$($name:literal = $val:expr),* $(,)?]) => {{
        let (l, r) = ($l, $r);
        if $scan.greater(l, r) == Some(false) {
            return Ok(Some($scan.witness(vec![$(($name, $val)),*], $rel, l, r)));
        }
    }};
}

type ScanResult = Result<Option<Witness>, WelfareError>;

fn scan_c1(s: &mut Scan, b: &Bounds) -> ScanResult {
    let grid = b.grid();
    for k in 0..=b.k_max {
        for a in &grid {
            for bb in &grid {
                let l = s.rdelta(k, bb)?;
                let r = s.rdelta(k + 1, a)?;
                require_gt!(
                    s,
                    l,
                    r,
                    "delta_k(b) > delta_{k+1}(a)",
                    ["k" = q(k), "a" = a.clone(), "b" = bb.clone()]
                );
            }
        }
    }
    Ok(None)
}

fn scan_c1a(s: &mut Scan, b: &Bounds) -> ScanResult {
    let grid = b.grid();
    for k in 1..=b.k_max {
        let base = s.rdelta(k, &grid[0])?;
        for x in &grid[1..] {
            let other = s.rdelta(k, x)?;
            if s.equal(base, other) == Some(false) {
                return Ok(Some(s.witness(
                    vec![("k", q(k)), ("a", grid[0].clone()), ("b", x.clone())],
                    "delta_k(a) = delta_k(b)",
                    base,
                    other,
                )));
            }
        }
    }
    Ok(None)
}

fn scan_c2(s: &mut Scan, b: &Bounds) -> ScanResult {
    let mut pts = vec![Rational::new()];
    pts.extend(b.grid());
    let n = pts.len();
    let values = pts.iter().map(|x| eval_expr(s.f, x)).collect::<Result<Vec<_>, _>>()?;
    // rank[i][j] orders the products pts[i] * pts[j]
    let mut products: Vec<(Rational, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            products.push((Rational::from(&pts[i] * &pts[j]), i, j));
        }
    }
    products.sort();
    let mut rank = vec![vec![0usize; n]; n];
    let mut current = 0usize;
    for (idx, (p, i, j)) in products.iter().enumerate() {
        if idx > 0 && *p != products[idx - 1].0 {
            current += 1;
        }
        rank[*i][*j] = current;
    }
    let mut sums: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];
    let mut sum = |s: &mut Scan, i: usize, j: usize| -> usize {
        if let Some(v) = sums[i][j] {
            return v;
        }
        let v = s.intern(values[i].clone() + &values[j]);
        sums[i][j] = Some(v);
        v
    };
    for ia in 0..n {
        for ib in 0..n {
            for ic in 0..n {
                for id in 0..n {
                    if ia.min(ib) > ic.min(id) || rank[ia][ib] >= rank[ic][id] {
                        continue;
                    }
                    let l = sum(s, ic, id);
                    let r = sum(s, ia, ib);
                    require_gt!(
                        s,
                        l,
                        r,
                        "f(c) + f(d) > f(a) + f(b)",
                        [
                            "a" = pts[ia].clone(),
                            "b" = pts[ib].clone(),
                            "c" = pts[ic].clone(),
                            "d" = pts[id].clone()
                        ]
                    );
                }
            }
        }
    }
    Ok(None)
}

fn scan_c3(s: &mut Scan, b: &Bounds) -> ScanResult {
    let xs = b.integers();
    let mut t = DeltaTable::new(xs.clone());
    for k in 0..=b.k_max {
        for ia in 0..xs.len() {
            for ib in 0..xs.len() {
                let l = t.get(s, k, ib)?;
                let r = t.get(s, k + 1, ia)?;
                require_gt!(
                    s,
                    l,
                    r,
                    "delta_k(b) > delta_{k+1}(a)",
                    ["k" = q(k), "a" = q(xs[ia]), "b" = q(xs[ib])]
                );
            }
        }
    }
    Ok(None)
}

fn scan_c3a(s: &mut Scan, b: &Bounds) -> ScanResult {
    let xs = b.integers();
    let mut t = DeltaTable::new(xs.clone());
    for l_ in 0..b.k_max {
        for k in l_ + 1..=b.k_max {
            for ia in 0..xs.len() {
                for ib in 0..xs.len() {
                    let l = t.get(s, l_, ib)?;
                    let r = t.get(s, k, ia)?;
                    require_gt!(
                        s,
                        l,
                        r,
                        "delta_l(b) > delta_k(a)",
                        ["l" = q(l_), "k" = q(k), "a" = q(xs[ia]), "b" = q(xs[ib])]
                    );
                }
            }
        }
    }
    Ok(None)
}

fn scan_c3b(s: &mut Scan, b: &Bounds) -> ScanResult {
    let xs = b.integers();
    let mut t = DeltaTable::new(xs.clone());
    for k in 0..=b.k_max {
        for (ia, &a) in xs.iter().enumerate() {
            let first = t.get(s, k, 0)?;
            let mid = t.get(s, k + 1, ia)?;
            require_gt!(s, first, mid, "delta_k(1) > delta_{k+1}(a)", ["k" = q(k), "a" = q(a)]);
            let last = t.get(s, k + 2, 0)?;
            require_gt!(
                s,
                mid,
                last,
                "delta_{k+1}(a) > delta_{k+2}(1)",
                ["k" = q(k), "a" = q(a)]
            );
        }
    }
    Ok(None)
}

fn scan_c4(s: &mut Scan, b: &Bounds) -> ScanResult {
    for k in 0..=b.k_max {
        let l = s.idelta(k, 1)?;
        let r = s.idelta(k + 1, 1)?;
        require_gt!(s, l, r, "delta_k(1) > delta_{k+1}(1)", ["k" = q(k)]);
    }
    Ok(None)
}

fn scan_c5(s: &mut Scan, b: &Bounds) -> ScanResult {
    let xs = b.integers();
    let mut t = DeltaTable::new(xs.clone());
    for k in 0..=b.k_max {
        for (ia, &a) in xs.iter().enumerate() {
            let mid = t.get(s, k + 1, ia)?;
            let last = t.get(s, k + 2, 0)?;
            for &bb in xs.iter().take_while(|&&x| x <= a) {
                for l_ in 0..=k {
                    let mut r = 0u64;
                    while l_ * bb + r * a < (k + 1) * bb {
                        let lo = l_ * bb + r * a;
                        let left = s.idiff(lo + bb, lo)?;
                        let params = |r: u64| vec![("k", q(k)), ("a", q(a)), ("b", q(bb)), ("l", q(l_)), ("r", q(r))];
                        if s.greater(left, mid) == Some(false) {
                            return Ok(Some(s.witness(
                                params(r),
                                "f((l+1)b+ra) - f(lb+ra) > delta_{k+1}(a)",
                                left,
                                mid,
                            )));
                        }
                        if l_ == 0 && r == 0 && s.greater(mid, last) == Some(false) {
                            return Ok(Some(s.witness(params(r), "delta_{k+1}(a) > delta_{k+2}(1)", mid, last)));
                        }
                        r += 1;
                    }
                }
            }
        }
    }
    Ok(None)
}

fn scan_c6a(s: &mut Scan, b: &Bounds) -> ScanResult {
    let xs = b.integers();
    let mut t = DeltaTable::new(xs.clone());
    for k in 1..=b.k_max {
        for (ia, &a) in xs.iter().enumerate() {
            for &bb in &xs {
                let l = s.idiff((k + 1) * bb - 1, k * bb - 1)?;
                let r = t.get(s, k, ia)?;
                require_gt!(
                    s,
                    l,
                    r,
                    "f((k+1)b-1) - f(kb-1) > delta_k(a)",
                    ["k" = q(k), "a" = q(a), "b" = q(bb)]
                );
            }
        }
    }
    Ok(None)
}

fn scan_c6b(s: &mut Scan, b: &Bounds) -> ScanResult {
    let xs = b.integers();
    for &a in &xs {
        for &bb in &xs {
            for x in 0..=b.xy_max {
                // x / a >= (y + 1) / b
                let mut y = 0u64;
                while (x as u128) * (bb as u128) >= (y as u128 + 1) * (a as u128) && y <= b.xy_max {
                    let l = s.idiff(y + bb, y)?;
                    let r = s.idiff(x + a, x)?;
                    require_gt!(
                        s,
                        l,
                        r,
                        "f(y+b) - f(y) > f(x+a) - f(x)",
                        ["a" = q(a), "b" = q(bb), "x" = q(x), "y" = q(y)]
                    );
                    y += 1;
                }
            }
        }
    }
    Ok(None)
}

/// Exhaustive check of one condition within `bounds`. The witness, if any, is the
/// lexicographically least violating tuple in the parameter order of the condition.
pub fn check_condition(
    f: &WelfareFunction,
    cond: ConditionId,
    bounds: &Bounds,
) -> Result<ConditionReport, ConditionError> {
    bounds.validate()?;
    let mut scan = Scan::new(f, bounds.precision);
    let found = match cond {
        C1 => scan_c1(&mut scan, bounds),
        C1a => scan_c1a(&mut scan, bounds),
        C2 => scan_c2(&mut scan, bounds),
        C3 => scan_c3(&mut scan, bounds),
        C3a => scan_c3a(&mut scan, bounds),
        C3b => scan_c3b(&mut scan, bounds),
        C4 => scan_c4(&mut scan, bounds),
        C5 => scan_c5(&mut scan, bounds),
        C6a => scan_c6a(&mut scan, bounds),
        C6b => scan_c6b(&mut scan, bounds),
    }?;
    let mut notes: Vec<String> = scan.notes.into_iter().collect();
    if cond == C2 {
        notes.push("checked on the grid points and 0 only".into());
    }
    let verdict = match (found, scan.inconclusive) {
        (Some(w), bits) => {
            if let Some(bits) = bits {
                notes.push(format!(
                    "an earlier tuple was inconclusive at {bits} bits; the witness may not be the least one"
                ));
            }
            Verdict::Violated(w)
        }
        (None, Some(bits)) => Verdict::Inconclusive(bits),
        (None, None) => Verdict::NoViolationFound,
    };
    Ok(ConditionReport {
        condition: cond,
        function: f.to_string(),
        bounds: bounds.clone(),
        verdict,
        notes,
        tuples_checked: scan.checked,
    })
}

/// Caps for adaptive checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Growth {
    pub k_cap: u64,
    pub a_cap: u64,
    pub probe_cap: u64,
}

impl Default for Growth {
    fn default() -> Self {
        Growth {
            k_cap: 32,
            a_cap: 128,
            probe_cap: 1 << 24,
        }
    }
}

/// Re-runs [`check_condition`], doubling `k_max` and `a_max` (and adding power-of-two
/// probes up to the probe cap) until a witness appears or every cap is reached.
pub fn check_condition_adaptive(
    f: &WelfareFunction,
    cond: ConditionId,
    start: &Bounds,
    growth: &Growth,
) -> Result<ConditionReport, ConditionError> {
    let mut bounds = start.clone();
    loop {
        let report = check_condition(f, cond, &bounds)?;
        let probed = bounds.probes.iter().any(|&p| p * 2 > growth.probe_cap) || growth.probe_cap <= bounds.a_max;
        let capped = bounds.k_max >= growth.k_cap && bounds.a_max >= growth.a_cap && probed;
        if report.verdict != Verdict::NoViolationFound || capped {
            return Ok(report);
        }
        bounds.k_max = (bounds.k_max * 2).min(growth.k_cap).max(bounds.k_max);
        bounds.a_max = (bounds.a_max * 2).min(growth.a_cap).max(bounds.a_max);
        bounds.xy_max = bounds.xy_max.max(bounds.a_max);
        bounds = bounds.with_power_probes(growth.probe_cap);
    }
}

/// Recomputes both sides of a witness from its parameters and confirms the relation fails.
pub fn verify_witness(
    f: &WelfareFunction,
    cond: ConditionId,
    w: &Witness,
    prec: &Precision,
) -> Result<bool, ConditionError> {
    let p = |name: &str| -> Result<Rational, ConditionError> {
        w.param(name)
            .cloned()
            .ok_or_else(|| ConditionError::Precondition(format!("witness lacks parameter {name}")))
    };
    let u = |name: &str| -> Result<u64, ConditionError> {
        w.param_u64(name)
            .ok_or_else(|| ConditionError::Precondition(format!("parameter {name} is not a non-negative integer")))
    };
    let d = |k: u64, x: &Rational| delta_expr(f, k, x);
    let diff = |hi: u64, lo: u64| difference(f, &q(hi), &q(lo));
    let one = Rational::from(1);
    let (lhs, rhs) = match (cond, w.relation) {
        (C1, _) | (C3, _) => (d(u("k")?, &p("b")?)?, d(u("k")? + 1, &p("a")?)?),
        (C1a, _) => {
            let ord = compare(&d(u("k")?, &p("a")?)?, &d(u("k")?, &p("b")?)?, prec);
            return Ok(matches!(ord, ValueOrdering::Less | ValueOrdering::Greater));
        }
        (C2, _) => {
            let v = |name: &str| -> Result<Expr, ConditionError> { Ok(eval_expr(f, &p(name)?)?) };
            (v("c")? + &v("d")?, v("a")? + &v("b")?)
        }
        (C3a, _) => (d(u("l")?, &p("b")?)?, d(u("k")?, &p("a")?)?),
        (C3b, "delta_k(1) > delta_{k+1}(a)") => (d(u("k")?, &one)?, d(u("k")? + 1, &p("a")?)?),
        (C3b, _) => (d(u("k")? + 1, &p("a")?)?, d(u("k")? + 2, &one)?),
        (C4, _) => (d(u("k")?, &one)?, d(u("k")? + 1, &one)?),
        (C5, "delta_{k+1}(a) > delta_{k+2}(1)") => (d(u("k")? + 1, &p("a")?)?, d(u("k")? + 2, &one)?),
        (C5, _) => {
            let lo = u("l")? * u("b")? + u("r")? * u("a")?;
            (diff(lo + u("b")?, lo)?, d(u("k")? + 1, &p("a")?)?)
        }
        (C6a, _) => {
            let (k, b) = (u("k")?, u("b")?);
            (diff((k + 1) * b - 1, k * b - 1)?, d(k, &p("a")?)?)
        }
        (C6b, _) => {
            let (a, b, x, y) = (u("a")?, u("b")?, u("x")?, u("y")?);
            (diff(y + b, y)?, diff(x + a, x)?)
        }
    };
    let infinite_tie = lhs.magnitude() == Magnitude::PosInf && rhs.magnitude() == Magnitude::PosInf;
    Ok(infinite_tie || matches!(compare(&lhs, &rhs, prec), ValueOrdering::Less | ValueOrdering::Equal))
}

/// Whether `c < 1/ln 2 - 1`, decided as `(1 + c) ln 2 < 1`.
pub fn below_harmonic_threshold(c: &Rational) -> bool {
    let lhs = Expr::ln(Rational::from(2)).scaled(&Rational::from(c + 1u32));
    compare(&lhs, &Expr::rational(Rational::from(1)), &Precision::default()) == ValueOrdering::Less
}

/// Verdicts the standard families are known to have, closed under the implications.
pub fn analytic_verdict(f: &WelfareFunction, cond: ConditionId) -> Option<bool> {
    analytic_table(f).get(&cond).copied()
}

pub fn analytic_table(f: &WelfareFunction) -> BTreeMap<ConditionId, bool> {
    let mut known: BTreeMap<ConditionId, bool> = BTreeMap::new();
    if f.is_log_form() {
        known.insert(C1, true);
        known.insert(C2, true);
    } else {
        match f {
            WelfareFunction::ModLog(c) => {
                known.insert(C1, false);
                known.insert(C4, true);
                if *c <= 1 {
                    known.insert(C6b, true);
                } else {
                    known.insert(C3, false);
                }
            }
            WelfareFunction::ModHarmonic(c) => {
                known.insert(C1, false);
                known.insert(C4, true);
                if below_harmonic_threshold(c) {
                    known.insert(C5, true);
                } else {
                    known.insert(C3, false);
                }
                if *c < (-1, 2) {
                    known.insert(C6a, false);
                }
            }
            WelfareFunction::PMean(p) => {
                known.insert(C1, false);
                known.insert(C3, false);
                known.insert(C4, *p < 1);
                if p.cmp0().is_le() {
                    known.insert(C2, true);
                }
            }
            WelfareFunction::Combo(terms) => {
                let non_positive_means = terms.iter().all(|(_, g)| match g {
                    WelfareFunction::PMean(p) => p.cmp0().is_le(),
                    WelfareFunction::Log => true,
                    _ => false,
                });
                if non_positive_means {
                    known.insert(C2, true);
                }
            }
            _ => {}
        }
    }
    loop {
        let mut changed = false;
        for (strong, weak) in ConditionId::IMPLICATIONS {
            if known.get(&strong) == Some(&true) && !known.contains_key(&weak) {
                known.insert(weak, true);
                changed = true;
            }
            if known.get(&weak) == Some(&false) && !known.contains_key(&strong) {
                known.insert(strong, false);
                changed = true;
            }
        }
        if !changed {
            return known;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImplicationReport {
    pub function: String,
    pub verdicts: BTreeMap<ConditionId, VerdictKind>,
    /// Implications `(stronger, weaker)` where the weaker condition was violated but the
    /// stronger one was not.
    pub inconsistencies: Vec<(ConditionId, ConditionId)>,
}

impl ImplicationReport {
    pub fn consistent(&self) -> bool {
        self.inconsistencies.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "function": self.function,
            "verdicts": self.verdicts.iter().map(|(c, v)| (c.name().to_string(), json!(format!("{v:?}")))).collect::<serde_json::Map<_, _>>(),
            "inconsistencies": self.inconsistencies.iter().map(|(s, w)| format!("{s} => {w}")).collect::<Vec<_>>(),
            "consistent": self.consistent(),
        })
    }
}

pub fn inconsistent_arrows(verdicts: &BTreeMap<ConditionId, VerdictKind>) -> Vec<(ConditionId, ConditionId)> {
    ConditionId::HARNESS
        .iter()
        .filter(|(strong, weak)| {
            verdicts.get(weak) == Some(&VerdictKind::Violated)
                && verdicts.get(strong) == Some(&VerdictKind::NoViolationFound)
        })
        .copied()
        .collect()
}

/// Checks all ten conditions under shared bounds and lists the harness implications they
/// contradict. The real-quantified conditions are reported but only compared by grid,
/// so they are left out of the harness.
pub fn implication_scan(f: &WelfareFunction, bounds: &Bounds) -> Result<ImplicationReport, ConditionError> {
    let verdicts = ConditionId::ALL
        .iter()
        .map(|&c| Ok((c, check_condition(f, c, bounds)?.verdict.kind())))
        .collect::<Result<BTreeMap<_, _>, ConditionError>>()?;
    Ok(ImplicationReport {
        function: f.to_string(),
        inconsistencies: inconsistent_arrows(&verdicts),
        verdicts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    ModLog,
    ModHarmonic,
}

impl Family {
    pub fn member(self, c: Rational) -> Result<WelfareFunction, WelfareError> {
        match self {
            Family::ModLog => WelfareFunction::mod_log(c),
            Family::ModHarmonic => WelfareFunction::mod_harmonic(c),
        }
    }
}

/// Bisects on the family parameter, keeping the two endpoint verdicts apart.
pub fn threshold_bisect(
    family: Family,
    cond: ConditionId,
    c_lo: Rational,
    c_hi: Rational,
    bounds: &Bounds,
    iterations: u32,
) -> Result<(Rational, Rational), ConditionError> {
    let verdict_at = |c: &Rational| -> Result<VerdictKind, ConditionError> {
        let report = check_condition(&family.member(c.clone())?, cond, bounds)?;
        match report.verdict {
            Verdict::Inconclusive(bits) => Err(ConditionError::Inconclusive(bits)),
            v => Ok(v.kind()),
        }
    };
    if c_lo >= c_hi {
        return Err(ConditionError::Precondition("empty bracket".into()));
    }
    let at_lo = verdict_at(&c_lo)?;
    if at_lo == verdict_at(&c_hi)? {
        return Err(ConditionError::Precondition(format!(
            "the verdicts at {c_lo} and {c_hi} agree"
        )));
    }
    let (mut lo, mut hi) = (c_lo, c_hi);
    for _ in 0..iterations {
        let mid = Rational::from(&lo + &hi) / 2u32;
        if verdict_at(&mid)? == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug)]
pub struct Envelope {
    pub x_max: u64,
    /// Enclosures of the least and greatest `x (f(x+1) - f(x))` over `1..=x_max`.
    pub min: Interval,
    pub argmin: u64,
    pub max: Interval,
    pub argmax: u64,
    /// `f(3) - f(2)` and `9 (f(2) - f(1))`.
    pub lower: Expr,
    pub upper: Expr,
    pub first_breach: Option<u64>,
}

impl Envelope {
    pub fn within(&self) -> bool {
        self.first_breach.is_none()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "x_max": self.x_max,
            "min": {"value": self.min.to_string(), "at": self.argmin},
            "max": {"value": self.max.to_string(), "at": self.argmax},
            "lower": ExtendedValue::from_expr(&self.lower, 64).to_json(),
            "upper": ExtendedValue::from_expr(&self.upper, 64).to_json(),
            "first_breach": self.first_breach,
            "within": self.within(),
        })
    }
}

/// Scans `x (f(x+1) - f(x))` for integers `1 <= x <= x_max` against the constants
/// `f(3) - f(2)` (below) and `9 (f(2) - f(1))` (above).
pub fn marginal_growth_envelope(f: &WelfareFunction, x_max: u64, prec: &Precision) -> Result<Envelope, ConditionError> {
    if x_max < 1 {
        return Err(ConditionError::Precondition("x_max must be at least 1".into()));
    }
    let bits = 128;
    let lower = difference(f, &q(3), &q(2))?;
    let upper = difference(f, &q(2), &q(1))?.scaled(&q(9));
    let (lo_enc, hi_enc) = (lower.enclose(bits), upper.enclose(bits));
    let mut min: Option<(Interval, u64)> = None;
    let mut max: Option<(Interval, u64)> = None;
    let mut first_breach = None;
    for x in 1..=x_max {
        let v = difference(f, &q(x + 1), &q(x))?.scaled(&q(x));
        let enc = v.enclose(bits);
        if first_breach.is_none() {
            let above = enc.lo >= lo_enc.hi
                || !matches!(
                    compare(&v, &lower, prec),
                    ValueOrdering::Less | ValueOrdering::Inconclusive(_)
                );
            let below = enc.hi <= hi_enc.lo
                || !matches!(
                    compare(&v, &upper, prec),
                    ValueOrdering::Greater | ValueOrdering::Inconclusive(_)
                );
            if !(above && below) {
                first_breach = Some(x);
            }
        }
        if min.as_ref().is_none_or(|(m, _)| enc.hi < m.hi) {
            min = Some((enc.clone(), x));
        }
        if max.as_ref().is_none_or(|(m, _)| enc.lo > m.lo) {
            max = Some((enc, x));
        }
    }
    let (min, argmin) = min.expect("x_max >= 1");
    let (max, argmax) = max.expect("x_max >= 1");
    Ok(Envelope {
        x_max,
        min,
        argmin,
        max,
        argmax,
        lower,
        upper,
        first_breach,
    })
}

#[derive(Clone, Debug)]
pub struct LemmaReport {
    /// `1 / ln((x+1)/x) - (x+1)` at `x = 10^6`.
    pub g_at_million: Interval,
    pub g_near_limit: bool,
    /// `1 / ln((x+1)/x) - x` at `x = 1`.
    pub h_at_one: Interval,
    pub h_checked_to: u64,
    /// First `x` where `h(x) < h(x+1)` could not be certified.
    pub h_first_failure: Option<u64>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.g_near_limit && self.h_first_failure.is_none()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "g_at_1e6": self.g_at_million.to_string(),
            "g_within_1e-3_of_minus_half": self.g_near_limit,
            "h_at_1": self.h_at_one.to_string(),
            "h_strictly_increasing_on": [1, self.h_checked_to],
            "h_first_failure": self.h_first_failure,
            "passed": self.passed(),
        })
    }
}

/// `1 / ln((x+1)/x) - x - shift`.
fn inverse_log_gap(x: u64, shift: u64, bits: u32) -> Interval {
    let ln = atom_interval(&Atom::Ln(Rational::from((x + 1, x))), bits);
    ln.recip_positive().sub(&Interval::from_rational(&q(x + shift), bits))
}

pub fn numeric_lemma_suite(prec: &Precision) -> LemmaReport {
    let bits = prec.start_bits.max(64);
    let g = inverse_log_gap(1_000_000, 1, bits);
    let g_near_limit = g.lo > -0.501 && g.hi < -0.499;
    let h_checked_to = 1000;
    let mut h_first_failure = None;
    for x in 1..h_checked_to {
        let mut b = bits;
        let certified = loop {
            let step = inverse_log_gap(x + 1, 0, b).sub(&inverse_log_gap(x, 0, b));
            if step.lo > 0 {
                break true;
            }
            if b >= prec.ceiling_bits {
                break false;
            }
            b = (b * 2).min(prec.ceiling_bits);
        };
        if !certified {
            h_first_failure = Some(x);
            break;
        }
    }
    LemmaReport {
        g_at_million: g,
        g_near_limit,
        h_at_one: inverse_log_gap(1, 0, bits),
        h_checked_to,
        h_first_failure,
    }
}
