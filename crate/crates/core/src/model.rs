//! Instances, allocations, instance-class predicates and instance I/O.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::Integer;
pub use rug::Rational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("invalid rational literal {0:?}")]
    BadRational(String),
    #[error("negative utility {value} for agent {agent}, good {good}")]
    NegativeUtility { agent: usize, good: usize, value: String },
    #[error("at least 2 agents are required, got {0}")]
    TooFewAgents(usize),
    #[error("utility row {row} has {found} entries, expected {expected}")]
    RowLength { row: usize, found: usize, expected: usize },
    #[error("\"agents\" is {declared} but {rows} utility rows were given")]
    AgentCount { declared: usize, rows: usize },
    #[error("{labels} good labels given for {goods} goods")]
    LabelCount { labels: usize, goods: usize },
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("allocation is not a partition of the goods: {0}")]
    NotPartition(String),
    #[error("infeasible class constraint: {0}")]
    Infeasible(String),
}

/// Parses an integer (`-3`), decimal (`0.25`) or fraction (`3/4`) literal exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ModelError> {
    let s = text.trim();
    let bad = || ModelError::BadRational(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let (neg, digits) = match int_part.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, int_part.strip_prefix('+').unwrap_or(int_part)),
        };
        let all_digits = |t: &str| t.chars().all(|c| c.is_ascii_digit());
        if !all_digits(digits) || !all_digits(frac_part) || (digits.is_empty() && frac_part.is_empty()) {
            return Err(bad());
        }
        let joined = format!("{digits}{frac_part}");
        let num = Integer::from_str_radix(if joined.is_empty() { "0" } else { &joined }, 10).map_err(|_| bad())?;
        let den = Integer::from(rug::ops::Pow::pow(&Integer::from(10), frac_part.len() as u32));
        let q = Rational::from((num, den));
        return Ok(if neg { -q } else { q });
    }
    if s.contains('/') {
        let (p, q) = s.split_once('/').ok_or_else(bad)?;
        let p = Integer::from_str_radix(p.trim(), 10).map_err(|_| bad())?;
        let q = Integer::from_str_radix(q.trim(), 10).map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::from((p, q)));
    }
    let p = Integer::from_str_radix(s, 10).map_err(|_| bad())?;
    Ok(Rational::from(p))
}

/// Canonical text form: `p` or `p/q` in lowest terms.
pub fn format_rational(q: &Rational) -> String {
    q.to_string()
}

pub fn is_integer(q: &Rational) -> bool {
    *q.denom() == 1
}

/// An allocation instance: `n >= 2` agents, `m` goods, non-negative additive utilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    utilities: Vec<Vec<Rational>>,
    goods: usize,
    labels: Option<Vec<String>>,
}

impl Instance {
    pub fn new(utilities: Vec<Vec<Rational>>) -> Result<Self, ModelError> {
        if utilities.len() < 2 {
            return Err(ModelError::TooFewAgents(utilities.len()));
        }
        let goods = utilities[0].len();
        for (i, row) in utilities.iter().enumerate() {
            if row.len() != goods {
                return Err(ModelError::RowLength {
                    row: i,
                    found: row.len(),
                    expected: goods,
                });
            }
            for (g, u) in row.iter().enumerate() {
                if u.cmp0().is_lt() {
                    return Err(ModelError::NegativeUtility {
                        agent: i,
                        good: g,
                        value: u.to_string(),
                    });
                }
            }
        }
        Ok(Instance {
            utilities,
            goods,
            labels: None,
        })
    }

    pub fn from_integers<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self, ModelError> {
        Self::new(
            rows.iter()
                .map(|r| r.as_ref().iter().map(|&v| Rational::from(v)).collect())
                .collect(),
        )
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.len() != self.goods {
            return Err(ModelError::LabelCount {
                labels: labels.len(),
                goods: self.goods,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn agents(&self) -> usize {
        self.utilities.len()
    }

    pub fn goods(&self) -> usize {
        self.goods
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn utility(&self, agent: usize, good: usize) -> &Rational {
        &self.utilities[agent][good]
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.utilities[agent]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.utilities
    }

    /// `u_i(S)`; the empty bundle is worth 0.
    pub fn bundle_utility(&self, agent: usize, bundle: &[usize]) -> Result<Rational, ModelError> {
        if agent >= self.agents() {
            return Err(ModelError::OutOfRange(format!("agent {agent}")));
        }
        let mut total = Rational::new();
        for &g in bundle {
            if g >= self.goods {
                return Err(ModelError::OutOfRange(format!("good {g}")));
            }
            total += &self.utilities[agent][g];
        }
        Ok(total)
    }

    pub fn row_total(&self, agent: usize) -> Rational {
        let mut total = Rational::new();
        for u in &self.utilities[agent] {
            total += u;
        }
        total
    }
}

/// An assignment vector: entry `g` is the agent receiving good `g`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation(Vec<usize>);

impl Allocation {
    pub fn new(assignment: Vec<usize>, agents: usize) -> Result<Self, ModelError> {
        if let Some(g) = assignment.iter().position(|&a| a >= agents) {
            return Err(ModelError::OutOfRange(format!(
                "good {g} assigned to agent {} of {agents}",
                assignment[g]
            )));
        }
        Ok(Allocation(assignment))
    }

    /// No range check; callers guarantee every entry is a valid agent.
    pub fn from_assignment(assignment: Vec<usize>) -> Self {
        Allocation(assignment)
    }

    pub fn from_bundles(bundles: &[Vec<usize>], goods: usize) -> Result<Self, ModelError> {
        let mut assignment = vec![usize::MAX; goods];
        for (i, bundle) in bundles.iter().enumerate() {
            for &g in bundle {
                if g >= goods {
                    return Err(ModelError::NotPartition(format!("good {g} does not exist")));
                }
                if assignment[g] != usize::MAX {
                    return Err(ModelError::NotPartition(format!("good {g} appears twice")));
                }
                assignment[g] = i;
            }
        }
        if let Some(g) = assignment.iter().position(|&a| a == usize::MAX) {
            return Err(ModelError::NotPartition(format!("good {g} is unassigned")));
        }
        Ok(Allocation(assignment))
    }

    pub fn assignment(&self) -> &[usize] {
        &self.0
    }

    pub fn owner(&self, good: usize) -> usize {
        self.0[good]
    }

    pub fn bundles(&self, agents: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); agents];
        for (g, &i) in self.0.iter().enumerate() {
            out[i].push(g);
        }
        out
    }

    /// `u_i(A_i)` for every agent.
    pub fn utilities(&self, inst: &Instance) -> Vec<Rational> {
        let mut out = vec![Rational::new(); inst.agents()];
        for (g, &i) in self.0.iter().enumerate() {
            out[i] += inst.utility(i, g);
        }
        out
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (idx, a) in self.0.iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub integer_valued: bool,
    pub identical_good: bool,
    pub binary: bool,
    pub two_value: bool,
    pub normalized: bool,
    pub positive_admitting: bool,
}

pub fn classify(inst: &Instance) -> ClassProfile {
    let all = || inst.rows().iter().flatten();
    let integer_valued = all().all(is_integer);
    let binary = all().all(|u| *u == 0 || *u == 1);
    let distinct: BTreeSet<&Rational> = all().collect();
    let two_value = distinct.len() <= 2;
    let identical_good = inst.rows().iter().all(|row| {
        row.first()
            .is_none_or(|a0| a0.cmp0().is_gt() && row.iter().all(|u| u == a0))
    });
    let total0 = inst.row_total(0);
    let normalized = (1..inst.agents()).all(|i| inst.row_total(i) == total0);
    ClassProfile {
        integer_valued,
        identical_good,
        binary,
        two_value,
        normalized,
        positive_admitting: is_positive_admitting(inst).0,
    }
}

/// Agents-to-goods perfect matching over positively valued pairs (augmenting paths).
/// The witness gives each agent its matched good and every other good to agent 0.
pub fn is_positive_admitting(inst: &Instance) -> (bool, Option<Allocation>) {
    let n = inst.agents();
    let m = inst.goods();
    let mut good_owner: Vec<Option<usize>> = vec![None; m];

    fn augment(inst: &Instance, agent: usize, seen: &mut [bool], good_owner: &mut [Option<usize>]) -> bool {
        for g in 0..inst.goods() {
            if seen[g] || inst.utility(agent, g).cmp0().is_le() {
                continue;
            }
            seen[g] = true;
            let free = match good_owner[g] {
                None => true,
                Some(other) => augment(inst, other, seen, good_owner),
            };
            if free {
                good_owner[g] = Some(agent);
                return true;
            }
        }
        false
    }

    for agent in 0..n {
        let mut seen = vec![false; m];
        if !augment(inst, agent, &mut seen, &mut good_owner) {
            return (false, None);
        }
    }
    let assignment = good_owner.iter().map(|o| o.unwrap_or(0)).collect();
    (true, Some(Allocation(assignment)))
}

/// Which instance classes a random instance must belong to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassConstraint {
    pub integer: bool,
    pub binary: bool,
    pub two_value: bool,
    pub identical_good: bool,
    pub normalized: bool,
    pub positive_admitting: bool,
}

impl ClassConstraint {
    pub fn unrestricted() -> Self {
        Self::default()
    }

    /// Comma-separated names, e.g. `integer,normalized`; `unrestricted` is the empty set.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut c = Self::default();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "unrestricted" => {}
                "integer" => c.integer = true,
                "binary" => c.binary = true,
                "two_value" | "two-value" => c.two_value = true,
                "identical_good" | "identical-good" => c.identical_good = true,
                "normalized" => c.normalized = true,
                "positive_admitting" | "positive-admitting" => c.positive_admitting = true,
                other => return Err(ModelError::Infeasible(format!("unknown class {other:?}"))),
            }
        }
        Ok(c)
    }

    pub fn satisfied_by(&self, p: &ClassProfile) -> bool {
        (!self.integer || p.integer_valued)
            && (!self.binary || p.binary)
            && (!self.two_value || p.two_value)
            && (!self.identical_good || p.identical_good)
            && (!self.normalized || p.normalized)
            && (!self.positive_admitting || p.positive_admitting)
    }
}

const MAX_ATTEMPTS: usize = 10_000;

/// Seeded random instance in the requested classes. Values lie in `[0, max_value]`; without
/// the integer constraint they are multiples of 1/4.
pub fn random_instance(
    n: usize,
    m: usize,
    constraint: ClassConstraint,
    max_value: u64,
    seed: u64,
) -> Result<Instance, ModelError> {
    if n < 2 {
        return Err(ModelError::TooFewAgents(n));
    }
    let c = constraint;
    if c.positive_admitting && m < n {
        return Err(ModelError::Infeasible(format!(
            "positive-admitting needs m >= n, got m = {m}"
        )));
    }
    if (c.identical_good || c.positive_admitting) && max_value == 0 && !c.binary {
        return Err(ModelError::Infeasible("max_value 0 leaves no positive utility".into()));
    }
    if c.identical_good && c.binary && c.normalized && m == 0 {
        return Err(ModelError::Infeasible("no goods".into()));
    }
    let integer = c.integer || c.binary;
    let top = if c.binary { 1 } else { max_value };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, positive: bool| -> Rational {
        let lo = u64::from(positive);
        if integer {
            Rational::from(rng.gen_range(lo..=top))
        } else {
            let quarters = rng.gen_range(lo..=top * 4);
            Rational::from((quarters, 4u64))
        }
    };

    for _ in 0..MAX_ATTEMPTS {
        let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(n);
        if c.identical_good {
            let shared = draw(&mut rng, true);
            for _ in 0..n {
                let a = if c.normalized {
                    shared.clone()
                } else {
                    draw(&mut rng, true)
                };
                rows.push(vec![a; m]);
            }
        } else if c.binary && c.normalized {
            let ones = if m == 0 { 0 } else { rng.gen_range(1..=m) };
            for _ in 0..n {
                let mut row = vec![Rational::new(); m];
                let mut idx: Vec<usize> = (0..m).collect();
                for j in 0..ones {
                    let pick = rng.gen_range(j..m);
                    idx.swap(j, pick);
                    row[idx[j]] = Rational::from(1);
                }
                rows.push(row);
            }
        } else if c.two_value || c.binary {
            let (v1, v2) = if c.binary {
                (Rational::new(), Rational::from(1))
            } else {
                (draw(&mut rng, false), draw(&mut rng, false))
            };
            for _ in 0..n {
                rows.push(
                    (0..m)
                        .map(|_| if rng.gen_bool(0.5) { v1.clone() } else { v2.clone() })
                        .collect(),
                );
            }
        } else {
            for _ in 0..n {
                rows.push((0..m).map(|_| draw(&mut rng, false)).collect());
            }
        }

        if c.normalized && m > 0 && !(c.identical_good || c.binary) {
            let sums: Vec<Rational> = rows
                .iter()
                .map(|r| r.iter().fold(Rational::new(), |s, u| s + u))
                .collect();
            let target = sums.iter().max().cloned().unwrap_or_default();
            if sums.iter().any(|s| *s != target) {
                if c.two_value {
                    continue;
                }
                if integer {
                    for (row, s) in rows.iter_mut().zip(&sums) {
                        let last = row.last_mut().expect("m > 0");
                        *last += Rational::from(&target - s);
                    }
                } else {
                    if sums.iter().any(|s| s.cmp0().is_eq()) {
                        continue;
                    }
                    for (row, s) in rows.iter_mut().zip(&sums) {
                        let scale = Rational::from(&target / s);
                        for u in row.iter_mut() {
                            *u *= &scale;
                        }
                    }
                }
            }
        }

        let inst = Instance::new(rows)?;
        if constraint.satisfied_by(&classify(&inst)) {
            return Ok(inst);
        }
    }
    Err(ModelError::Infeasible(format!(
        "no instance found for {constraint:?} at n = {n}, m = {m}, max_value = {max_value}"
    )))
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    agents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goods: Option<Vec<String>>,
    utilities: Vec<Vec<String>>,
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    if doc.agents < 2 {
        return Err(ModelError::TooFewAgents(doc.agents));
    }
    if doc.utilities.len() != doc.agents {
        return Err(ModelError::AgentCount {
            declared: doc.agents,
            rows: doc.utilities.len(),
        });
    }
    let rows = doc
        .utilities
        .iter()
        .map(|row| row.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let inst = Instance::new(rows)?;
    match doc.goods {
        Some(labels) => inst.with_labels(labels),
        None => Ok(inst),
    }
}

pub fn serialize_instance(inst: &Instance) -> String {
    let doc = InstanceDoc {
        agents: inst.agents(),
        goods: inst.labels.clone(),
        utilities: inst
            .rows()
            .iter()
            .map(|r| r.iter().map(format_rational).collect())
            .collect(),
    };
    serde_json::to_string(&doc).expect("instance document serializes")
}

#[derive(Serialize, Deserialize)]
struct AllocationDoc {
    bundles: Vec<Vec<usize>>,
}

/// Reads `{"bundles": [[...], ...]}`; the bundles must partition the instance's goods.
pub fn parse_allocation(text: &str, inst: &Instance) -> Result<Allocation, ModelError> {
    let doc: AllocationDoc = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    if doc.bundles.len() != inst.agents() {
        return Err(ModelError::NotPartition(format!(
            "{} bundles for {} agents",
            doc.bundles.len(),
            inst.agents()
        )));
    }
    Allocation::from_bundles(&doc.bundles, inst.goods())
}

pub fn serialize_allocation(alloc: &Allocation, agents: usize) -> String {
    serde_json::to_string(&AllocationDoc {
        bundles: alloc.bundles(agents),
    })
    .expect("allocation document serializes")
}

/// Bundles as a JSON value, for embedding in larger reports.
pub fn allocation_json(alloc: &Allocation, agents: usize) -> serde_json::Value {
    serde_json::json!({ "bundles": alloc.bundles(agents) })
}
