//! Symbolic welfare values and the exact/interval comparator.
//!
//! An [`Expr`] is a finite sum `r + sum_j w_j * atom_j` plus a count of infinite terms.
//! Atoms are transcendental or irrational quantities (logarithms, radicals, digamma
//! values, large modified harmonic numbers). Like atoms merge, so syntactically equal
//! welfare sums cancel exactly before any numeric work happens.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use rug::float::Round;
use rug::ops::{AddAssignRound, MulAssignRound, Pow, SubAssignRound};
use rug::{Float, Integer, Rational};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// `ln q` for a positive rational `q != 1`.
    Ln(Rational),
    /// `radicand^(1/index)` with `index >= 2`.
    Root { radicand: Integer, index: u32 },
    /// Digamma at a positive rational.
    Digamma(Rational),
    /// Modified harmonic number `h_c(n)` at an integer `n >= 1`, left unexpanded.
    Harmonic { c: Rational, n: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expr {
    pos_inf: u32,
    neg_inf: u32,
    rational: Rational,
    atoms: BTreeMap<Atom, Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Magnitude {
    Finite,
    PosInf,
    NegInf,
    /// Both `+inf` and `-inf` terms are present.
    Undefined,
}

impl Expr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn rational(q: Rational) -> Self {
        Expr {
            rational: q,
            ..Self::default()
        }
    }

    pub fn neg_inf() -> Self {
        Expr {
            neg_inf: 1,
            ..Self::default()
        }
    }

    pub fn pos_inf() -> Self {
        Expr {
            pos_inf: 1,
            ..Self::default()
        }
    }

    pub fn atom(atom: Atom, coeff: Rational) -> Self {
        let mut e = Self::default();
        e.push_atom(atom, coeff);
        e
    }

    /// `ln q`, folding `q = 1` to zero and `q = 0` to `-inf`.
    pub fn ln(q: Rational) -> Self {
        match q.cmp0() {
            Ordering::Equal => Self::neg_inf(),
            _ if q == 1 => Self::zero(),
            _ => Self::atom(Atom::Ln(q), Rational::from(1)),
        }
    }

    fn push_atom(&mut self, atom: Atom, coeff: Rational) {
        if coeff.cmp0().is_eq() {
            return;
        }
        match self.atoms.get_mut(&atom) {
            Some(slot) => {
                *slot += coeff;
                if slot.cmp0().is_eq() {
                    self.atoms.remove(&atom);
                }
            }
            None => {
                self.atoms.insert(atom, coeff);
            }
        }
    }

    pub fn magnitude(&self) -> Magnitude {
        match (self.pos_inf > 0, self.neg_inf > 0) {
            (false, false) => Magnitude::Finite,
            (true, false) => Magnitude::PosInf,
            (false, true) => Magnitude::NegInf,
            (true, true) => Magnitude::Undefined,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.magnitude() == Magnitude::Finite
    }

    pub fn rational_part(&self) -> &Rational {
        &self.rational
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Atom, &Rational)> {
        self.atoms.iter()
    }

    /// The exact rational value when there are no atoms and no infinities.
    pub fn as_rational(&self) -> Option<&Rational> {
        (self.is_finite() && self.atoms.is_empty()).then_some(&self.rational)
    }

    pub fn scaled(&self, w: &Rational) -> Expr {
        if w.cmp0().is_eq() {
            return Expr::zero();
        }
        let (pos_inf, neg_inf) = if w.cmp0().is_gt() {
            (self.pos_inf, self.neg_inf)
        } else {
            (self.neg_inf, self.pos_inf)
        };
        Expr {
            pos_inf,
            neg_inf,
            rational: Rational::from(&self.rational * w),
            atoms: self
                .atoms
                .iter()
                .map(|(a, c)| (a.clone(), Rational::from(c * w)))
                .collect(),
        }
    }

    /// Replaces every `Harmonic` atom by its exact rational value.
    pub fn expand_harmonic(&self) -> Expr {
        let mut out = Expr {
            pos_inf: self.pos_inf,
            neg_inf: self.neg_inf,
            rational: self.rational.clone(),
            atoms: BTreeMap::new(),
        };
        for (a, c) in &self.atoms {
            match a {
                Atom::Harmonic { c: shift, n } => out.rational += harmonic_exact(shift, *n) * c,
                other => out.push_atom(other.clone(), c.clone()),
            }
        }
        out
    }

    fn has_harmonic(&self) -> bool {
        self.atoms.keys().any(|a| matches!(a, Atom::Harmonic { .. }))
    }

    /// Rigorous enclosure of a finite expression.
    pub fn enclose(&self, prec: u32) -> Interval {
        let mut acc = Interval::from_rational(&self.rational, prec);
        for (a, c) in &self.atoms {
            let term = atom_interval(a, prec).mul(&Interval::from_rational(c, prec));
            acc = acc.add(&term);
        }
        acc
    }
}

impl AddAssign<&Expr> for Expr {
    fn add_assign(&mut self, rhs: &Expr) {
        self.pos_inf += rhs.pos_inf;
        self.neg_inf += rhs.neg_inf;
        self.rational += &rhs.rational;
        for (a, c) in &rhs.atoms {
            self.push_atom(a.clone(), c.clone());
        }
    }
}

impl SubAssign<&Expr> for Expr {
    fn sub_assign(&mut self, rhs: &Expr) {
        *self += &(-rhs);
    }
}

impl Add<&Expr> for Expr {
    type Output = Expr;
    fn add(mut self, rhs: &Expr) -> Expr {
        self += rhs;
        self
    }
}

impl Sub<&Expr> for Expr {
    type Output = Expr;
    fn sub(mut self, rhs: &Expr) -> Expr {
        self -= rhs;
        self
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scaled(&Rational::from(-1))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        (&self).neg()
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |acc, e| acc + &e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.magnitude() {
            Magnitude::PosInf => return write!(f, "inf"),
            Magnitude::NegInf => return write!(f, "-inf"),
            Magnitude::Undefined => return write!(f, "undefined"),
            Magnitude::Finite => {}
        }
        let mut parts = Vec::new();
        if self.rational.cmp0().is_ne() || self.atoms.is_empty() {
            parts.push(self.rational.to_string());
        }
        for (a, c) in &self.atoms {
            let atom = match a {
                Atom::Ln(q) => format!("ln({q})"),
                Atom::Root { radicand, index } => format!("{radicand}^(1/{index})"),
                Atom::Digamma(q) => format!("digamma({q})"),
                Atom::Harmonic { c, n } => format!("h[{c}]({n})"),
            };
            parts.push(if *c == 1 { atom } else { format!("{c}*{atom}") });
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// Closed interval `[lo, hi]` of MPFR floats at a common precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: Float,
    pub hi: Float,
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        let (lo, _) = Float::with_val_round(prec, q, Round::Down);
        let (hi, _) = Float::with_val_round(prec, q, Round::Up);
        Interval { lo, hi }
    }

    pub fn from_f64(lo: f64, hi: f64) -> Self {
        Interval {
            lo: Float::with_val(53, lo),
            hi: Float::with_val(53, hi),
        }
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec()
    }

    pub fn add(&self, other: &Interval) -> Interval {
        let mut lo = self.lo.clone();
        lo.add_assign_round(&other.lo, Round::Down);
        let mut hi = self.hi.clone();
        hi.add_assign_round(&other.hi, Round::Up);
        Interval { lo, hi }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        let mut lo = self.lo.clone();
        lo.sub_assign_round(&other.hi, Round::Down);
        let mut hi = self.hi.clone();
        hi.sub_assign_round(&other.lo, Round::Up);
        Interval { lo, hi }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for x in [&self.lo, &self.hi] {
            for y in [&other.lo, &other.hi] {
                let mut d = x.clone();
                d.mul_assign_round(y, Round::Down);
                let mut u = x.clone();
                u.mul_assign_round(y, Round::Up);
                if lo.as_ref().is_none_or(|l| d < *l) {
                    lo = Some(d);
                }
                if hi.as_ref().is_none_or(|h| u > *h) {
                    hi = Some(u);
                }
            }
        }
        Interval {
            lo: lo.expect("four products"),
            hi: hi.expect("four products"),
        }
    }

    /// `1 / self` for an interval of positive numbers.
    pub fn recip_positive(&self) -> Interval {
        debug_assert!(self.lo > 0);
        let prec = self.prec();
        let (lo, _) = Float::with_val_round(prec, 1 / &self.hi, Round::Down);
        let (hi, _) = Float::with_val_round(prec, 1 / &self.lo, Round::Up);
        Interval { lo, hi }
    }

    /// Sign when the interval excludes zero (or is exactly zero).
    pub fn sign(&self) -> Option<Ordering> {
        if self.lo.is_nan() || self.hi.is_nan() {
            return None;
        }
        if self.lo > 0 {
            Some(Ordering::Greater)
        } else if self.hi < 0 {
            Some(Ordering::Less)
        } else if self.lo == 0 && self.hi == 0 {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn contains_rational(&self, q: &Rational) -> bool {
        self.lo <= *q && self.hi >= *q
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.lo <= x && self.hi >= x
    }

    pub fn width_f64(&self) -> f64 {
        let mut w = self.hi.clone();
        w.sub_assign_round(&self.lo, Round::Up);
        w.to_f64()
    }

    pub fn mid_f64(&self) -> f64 {
        (self.lo.to_f64() + self.hi.to_f64()) / 2.0
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = ((self.prec() as f64) * std::f64::consts::LOG10_2).min(40.0) as usize;
        let lo = self.lo.to_string_radix_round(10, Some(digits.max(2)), Round::Down);
        let hi = self.hi.to_string_radix_round(10, Some(digits.max(2)), Round::Up);
        write!(f, "[{lo}, {hi}]")
    }
}

fn round_pair(q: &Rational, prec: u32) -> (Float, Float) {
    let (lo, _) = Float::with_val_round(prec, q, Round::Down);
    let (hi, _) = Float::with_val_round(prec, q, Round::Up);
    (lo, hi)
}

/// Enclosure of an increasing unary function applied to an enclosed argument.
fn increasing(arg: (Float, Float), op: impl Fn(&mut Float, Round)) -> Interval {
    let (mut lo, mut hi) = arg;
    op(&mut lo, Round::Down);
    op(&mut hi, Round::Up);
    Interval { lo, hi }
}

fn digamma_interval(q: &Rational, prec: u32) -> Interval {
    increasing(round_pair(q, prec), |x, r| {
        x.digamma_round(r);
    })
}

pub fn atom_interval(atom: &Atom, prec: u32) -> Interval {
    match atom {
        Atom::Ln(q) => increasing(round_pair(q, prec), |x, r| {
            x.ln_round(r);
        }),
        Atom::Root { radicand, index } => {
            let (lo, _) = Float::with_val_round(prec, radicand, Round::Down);
            let (hi, _) = Float::with_val_round(prec, radicand, Round::Up);
            increasing((lo, hi), |x, r| {
                x.root_round(*index, r);
            })
        }
        Atom::Digamma(q) => digamma_interval(q, prec),
        Atom::Harmonic { c, n } => {
            // h_c(n) = digamma(n + c + 1) - digamma(c + 1); h_{-1}(n) = digamma(n) - digamma(1)
            let (top, base) = if *c == -1 {
                (Rational::from(*n), Rational::from(1))
            } else {
                let base = Rational::from(c + 1u32);
                (Rational::from(&base + *n), base)
            };
            digamma_interval(&top, prec).sub(&digamma_interval(&base, prec))
        }
    }
}

/// `sum_{r=lo}^{hi} 1/(r + c)` by binary splitting over integers. Requires `r + c > 0`.
pub fn harmonic_range(c: &Rational, lo: u64, hi: u64) -> Rational {
    if lo > hi {
        return Rational::new();
    }
    let p = c.numer().clone();
    let q = c.denom().clone();
    // 1/(r + p/q) = q / (r q + p)
    fn split(p: &Integer, q: &Integer, lo: u64, hi: u64) -> (Integer, Integer) {
        if lo == hi {
            return (q.clone(), Integer::from(q * lo) + p);
        }
        let mid = lo + (hi - lo) / 2;
        let (n1, d1) = split(p, q, lo, mid);
        let (n2, d2) = split(p, q, mid + 1, hi);
        (n1 * &d2 + n2 * &d1, d1 * d2)
    }
    let (num, den) = split(&p, &q, lo, hi);
    Rational::from((num, den))
}

/// Exact `h_c(n)` for `n >= 1` (and `n = 0` when `c > -1`).
pub fn harmonic_exact(c: &Rational, n: u64) -> Rational {
    const CACHED: u64 = 1024;
    if *c == -1 {
        return harmonic_exact(&Rational::new(), n.saturating_sub(1));
    }
    if n > CACHED {
        return harmonic_range(c, 1, n);
    }
    type Cache = Mutex<BTreeMap<Rational, Vec<Rational>>>;
    static PREFIX: OnceLock<Cache> = OnceLock::new();
    let mut cache = PREFIX.get_or_init(Default::default).lock().expect("harmonic cache");
    let sums = cache.entry(c.clone()).or_insert_with(|| vec![Rational::new()]);
    while (sums.len() as u64) <= n {
        let r = sums.len() as u64;
        let next = sums.last().expect("nonempty")
            + Rational::from((c.denom().clone(), Integer::from(c.denom() * r) + c.numer()));
        sums.push(next);
    }
    sums[n as usize].clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Precision {
    pub start_bits: u32,
    pub ceiling_bits: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            start_bits: 256,
            ceiling_bits: 4096,
        }
    }
}

impl Precision {
    pub fn with_ceiling(ceiling_bits: u32) -> Self {
        Precision {
            start_bits: 256.min(ceiling_bits),
            ceiling_bits,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueOrdering {
    Less,
    Equal,
    Greater,
    Inconclusive(u32),
}

impl ValueOrdering {
    pub fn from_ordering(o: Ordering) -> Self {
        match o {
            Ordering::Less => ValueOrdering::Less,
            Ordering::Equal => ValueOrdering::Equal,
            Ordering::Greater => ValueOrdering::Greater,
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            ValueOrdering::Less => ValueOrdering::Greater,
            ValueOrdering::Greater => ValueOrdering::Less,
            other => other,
        }
    }

    pub fn is_greater(self) -> bool {
        self == ValueOrdering::Greater
    }

    pub fn is_inconclusive(self) -> bool {
        matches!(self, ValueOrdering::Inconclusive(_))
    }
}

/// How a comparison was settled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    Infinite,
    Rational,
    LogProduct,
    Interval(u32),
}

pub fn compare(lhs: &Expr, rhs: &Expr, prec: &Precision) -> ValueOrdering {
    compare_detailed(lhs, rhs, prec).0
}

/// Three-tier comparison. Infinities compare by sign, with `-inf = -inf` and `+inf = +inf`.
pub fn compare_detailed(lhs: &Expr, rhs: &Expr, prec: &Precision) -> (ValueOrdering, Tier) {
    use Magnitude::*;
    let (l, r) = (lhs.magnitude(), rhs.magnitude());
    let rank = |m: Magnitude| match m {
        NegInf => 0,
        Finite => 1,
        PosInf => 2,
        Undefined => 3,
    };
    if l == Undefined || r == Undefined {
        return (ValueOrdering::Inconclusive(0), Tier::Infinite);
    }
    if l != Finite || r != Finite {
        return (ValueOrdering::from_ordering(rank(l).cmp(&rank(r))), Tier::Infinite);
    }
    sign(&(lhs.clone() - rhs), prec)
}

/// Sign of a finite expression.
pub fn sign(d: &Expr, prec: &Precision) -> (ValueOrdering, Tier) {
    debug_assert!(d.is_finite());
    if d.atoms.is_empty() {
        return (ValueOrdering::from_ordering(d.rational.cmp0()), Tier::Rational);
    }
    if d.atoms.keys().all(|a| matches!(a, Atom::Ln(_))) {
        if let Some(log_sign) = log_sum_sign(d) {
            if d.rational.cmp0().is_eq() {
                return (ValueOrdering::from_ordering(log_sign), Tier::LogProduct);
            }
            if log_sign.is_eq() {
                return (ValueOrdering::from_ordering(d.rational.cmp0()), Tier::LogProduct);
            }
        }
    }
    let mut bits = prec.start_bits.max(64);
    loop {
        if let Some(s) = d.enclose(bits).sign() {
            return (ValueOrdering::from_ordering(s), Tier::Interval(bits));
        }
        if bits >= prec.ceiling_bits {
            break;
        }
        bits = (bits * 2).min(prec.ceiling_bits);
    }
    if d.has_harmonic() {
        return sign(&d.expand_harmonic(), prec);
    }
    (ValueOrdering::Inconclusive(bits), Tier::Interval(bits))
}

/// Sign of `sum_j w_j ln q_j` via `prod q_j^(w_j L)` against 1, `L` the common denominator.
fn log_sum_sign(d: &Expr) -> Option<Ordering> {
    let mut lcm = Integer::from(1);
    for c in d.atoms.values() {
        lcm.lcm_mut(c.denom());
    }
    let mut up = Rational::from(1);
    let mut down = Rational::from(1);
    for (a, c) in &d.atoms {
        let Atom::Ln(q) = a else { return None };
        let e = Integer::from(c.numer() * &lcm) / c.denom();
        let mag = e.clone().abs().to_u32().filter(|&m| m <= 100_000)?;
        let p = Rational::from(Pow::pow(q, mag));
        if e.cmp0().is_gt() {
            up *= p;
        } else {
            down *= p;
        }
    }
    Some(up.cmp(&down))
}

/// Writes `num^(1/index)` (num a positive integer) as `coeff * radicand^(1/index')` with the
/// largest perfect powers pulled out. Trial division makes the form canonical for
/// moderately sized inputs.
pub fn canonical_root(num: &Integer, index: u32) -> (Integer, Integer, u32) {
    let mut rest = num.clone();
    let mut factors: Vec<(Integer, u32)> = Vec::new();
    let mut d = 2u32;
    while d <= 1000 && rest > 1 {
        let mut e = 0u32;
        while rest.is_divisible_u(d) {
            rest /= d;
            e += 1;
        }
        if e > 0 {
            factors.push((Integer::from(d), e));
        }
        d += 1;
    }
    let mut coeff = Integer::from(1);
    if rest > 1 {
        let (root, rem) = rest.clone().root_rem(Integer::new(), index);
        if rem == 0 {
            coeff *= root;
            rest = Integer::from(1);
        }
    }
    let mut reduced_parts: Vec<(Integer, u32)> = Vec::new();
    for (p, e) in factors {
        coeff *= Integer::from(Pow::pow(&p, e / index));
        if e % index != 0 {
            reduced_parts.push((p, e % index));
        }
    }
    let fully_factored = rest == 1 || rest < 1_000_000;
    let mut g = index;
    if fully_factored {
        for (_, e) in &reduced_parts {
            g = gcd_u32(g, *e);
        }
        if rest > 1 {
            g = 1;
        }
    } else {
        g = 1;
    }
    let mut radicand = rest;
    for (p, e) in reduced_parts {
        radicand *= Integer::from(Pow::pow(&p, e / g));
    }
    (coeff, radicand, index / g)
}

fn gcd_u32(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `x^(s/t)` for a positive rational `x` as an expression (a rational times at most one radical).
pub fn rational_power(x: &Rational, exponent: &Rational) -> Expr {
    let s = exponent.numer().to_i32().expect("exponent numerator fits in i32");
    let t = exponent.denom().to_u32().expect("exponent denominator fits in u32");
    let y: Rational = if s >= 0 {
        Rational::from(Pow::pow(x, s as u32))
    } else {
        Rational::from(Pow::pow(x, s.unsigned_abs())).recip()
    };
    if t == 1 {
        return Expr::rational(y);
    }
    // y^(1/t) = (A B^(t-1))^(1/t) / B
    let (a, b) = y.into_numer_denom();
    let n = a * Integer::from(Pow::pow(&b, t - 1));
    let (coeff, radicand, index) = canonical_root(&n, t);
    let scale = Rational::from((coeff, b));
    if radicand == 1 {
        Expr::rational(scale)
    } else {
        Expr::atom(Atom::Root { radicand, index }, scale)
    }
}
