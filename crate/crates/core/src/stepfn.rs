//! Piecewise-constant functions on `(0,1]` or `(0,∞)` with exact rational
//! breakpoints and values, and finitely supported sequences.
//!
//! A function is stored in canonical form: pieces `(t_{i-1}, t_i]` with
//! `t_0 = 0`, adjacent equal values merged, and trailing pieces equal to
//! the terminal level dropped. Two functions are equal exactly when their
//! canonical forms are equal.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::rational::{self, int, Rational, RationalRepr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "unit")]
    UnitInterval,
    #[serde(rename = "half_line")]
    HalfLine,
}

impl Domain {
    /// Right end of the domain, `None` for `(0,∞)`.
    pub fn end(self) -> Option<Rational> {
        match self {
            Domain::UnitInterval => Some(int(1)),
            Domain::HalfLine => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepFunction {
    domain: Domain,
    breakpoints: Vec<Rational>,
    values: Vec<Rational>,
    tail: Rational,
}

/// One piece `(start, end]` carrying `value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub start: Rational,
    pub end: Rational,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CombineOp {
    Add,
    Sub,
    Min,
    Max,
}

impl CombineOp {
    fn apply(&self, a: &Rational, b: &Rational) -> Rational {
        match self {
            CombineOp::Add => a + b,
            CombineOp::Sub => a - b,
            CombineOp::Min => a.min(b).clone(),
            CombineOp::Max => a.max(b).clone(),
        }
    }
}

impl StepFunction {
    /// Builds and canonicalizes a step function. `breakpoints` are
    /// `t_1 < … < t_k` (the origin is implicit) and `values[i]` lives on
    /// `(t_{i-1}, t_i]`.
    pub fn new(
        domain: Domain,
        breakpoints: Vec<Rational>,
        values: Vec<Rational>,
        tail: Rational,
    ) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::Malformed(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        let mut prev = Rational::zero();
        for (i, t) in breakpoints.iter().enumerate() {
            if *t <= prev {
                return Err(Error::Malformed(format!(
                    "breakpoint {i} ({t}) is not strictly greater than its predecessor ({prev})"
                )));
            }
            prev = t.clone();
        }
        if domain == Domain::UnitInterval {
            if let Some(last) = breakpoints.last() {
                if *last > int(1) {
                    return Err(Error::Malformed(format!(
                        "unit-interval function has breakpoint {last} beyond 1"
                    )));
                }
            }
            if !tail.is_zero() {
                return Err(Error::Malformed(
                    "unit-interval function cannot carry a tail value".into(),
                ));
            }
        }
        Ok(Self::canonical(domain, breakpoints, values, tail))
    }

    fn canonical(
        domain: Domain,
        breakpoints: Vec<Rational>,
        values: Vec<Rational>,
        tail: Rational,
    ) -> Self {
        let mut bps: Vec<Rational> = Vec::with_capacity(breakpoints.len());
        let mut vals: Vec<Rational> = Vec::with_capacity(values.len());
        for (t, v) in breakpoints.into_iter().zip(values) {
            if vals.last() == Some(&v) {
                *bps.last_mut().unwrap() = t;
            } else {
                bps.push(t);
                vals.push(v);
            }
        }
        while vals.last() == Some(&tail) {
            vals.pop();
            bps.pop();
        }
        StepFunction {
            domain,
            breakpoints: bps,
            values: vals,
            tail,
        }
    }

    pub fn zero(domain: Domain) -> Self {
        StepFunction {
            domain,
            breakpoints: vec![],
            values: vec![],
            tail: Rational::zero(),
        }
    }

    /// The constant `c` on the whole domain.
    pub fn constant(domain: Domain, c: Rational) -> Self {
        match domain {
            Domain::HalfLine => Self::canonical(domain, vec![], vec![], c),
            Domain::UnitInterval => Self::canonical(domain, vec![int(1)], vec![c], Rational::zero()),
        }
    }

    /// `c · χ_(a,b]`.
    pub fn indicator(domain: Domain, a: Rational, b: Rational, c: Rational) -> Result<Self> {
        if a.is_zero() {
            Self::new(domain, vec![b], vec![c], Rational::zero())
        } else {
            Self::new(domain, vec![a, b], vec![Rational::zero(), c], Rational::zero())
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// Value on `(t_k, ∞)`; always zero on the unit interval.
    pub fn tail(&self) -> &Rational {
        &self.tail
    }

    pub fn last_breakpoint(&self) -> Rational {
        self.breakpoints.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty() && self.tail.is_zero()
    }

    pub fn pieces(&self) -> impl Iterator<Item = Piece> + '_ {
        let starts = std::iter::once(Rational::zero()).chain(self.breakpoints.iter().cloned());
        starts
            .zip(self.breakpoints.iter().zip(&self.values))
            .map(|(start, (end, value))| Piece {
                start,
                end: end.clone(),
                value: value.clone(),
            })
    }

    /// Value at `t > 0` under the right-closed convention.
    pub fn eval(&self, t: &Rational) -> Rational {
        let idx = self.breakpoints.partition_point(|b| b < t);
        self.values.get(idx).cloned().unwrap_or_else(|| self.tail.clone())
    }

    /// Nonincreasing with nonnegative terminal level.
    pub fn is_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
            && self.values.last().map_or(true, |v| *v >= self.tail)
            && !self.tail.is_negative()
            && self.values.iter().all(|v| !v.is_negative())
    }

    pub fn is_nonnegative(&self) -> bool {
        !self.tail.is_negative() && self.values.iter().all(|v| !v.is_negative())
    }

    /// Pointwise `≤`.
    pub fn le_pointwise(&self, other: &StepFunction) -> bool {
        match combine(CombineOp::Sub, other, self) {
            Ok(d) => d.is_nonnegative(),
            Err(_) => false,
        }
    }

    /// Decreasing rearrangement of `|f|`.
    pub fn rearrange(&self) -> StepFunction {
        let tail = self.tail.abs();
        let mut levels: Vec<(Rational, Rational)> = self
            .pieces()
            .map(|p| (p.value.abs(), &p.end - &p.start))
            .filter(|(v, _)| *v > tail)
            .collect();
        levels.sort_by(|a, b| b.0.cmp(&a.0));
        let mut bps = Vec::with_capacity(levels.len());
        let mut vals = Vec::with_capacity(levels.len());
        let mut acc = Rational::zero();
        for (v, len) in levels {
            acc += len;
            bps.push(acc.clone());
            vals.push(v);
        }
        Self::canonical(self.domain, bps, vals, tail)
    }

    fn check_point(&self, t: &Rational) -> Result<()> {
        if t.is_negative() {
            return Err(Error::OutOfDomain(format!("t = {t} is negative")));
        }
        if let Some(end) = self.domain.end() {
            if *t > end {
                return Err(Error::OutOfDomain(format!("t = {t} exceeds the right end {end}")));
            }
        }
        Ok(())
    }

    /// `∫_0^t f(s) ds` of the function itself (signed, not rearranged).
    pub fn primitive(&self, t: &Rational) -> Result<Rational> {
        self.check_point(t)?;
        let mut acc = Rational::zero();
        for p in self.pieces() {
            if p.end >= *t {
                acc += &p.value * (t - &p.start);
                return Ok(acc);
            }
            acc += &p.value * (&p.end - &p.start);
        }
        acc += &self.tail * (t - self.last_breakpoint());
        Ok(acc)
    }

    /// `∫_0^t f^*(s) ds`.
    pub fn hardy_integral(&self, t: &Rational) -> Result<Rational> {
        self.check_point(t)?;
        self.rearrange().primitive(t)
    }

    /// Values of the primitive at `0, t_1, …, t_k`.
    pub fn primitive_knots(&self) -> Vec<(Rational, Rational)> {
        let mut out = Vec::with_capacity(self.breakpoints.len() + 1);
        let mut acc = Rational::zero();
        out.push((Rational::zero(), Rational::zero()));
        for p in self.pieces() {
            acc += &p.value * (&p.end - &p.start);
            out.push((p.end, acc.clone()));
        }
        out
    }

    /// `∫_0^∞ f`, `None` when the tail is nonzero.
    pub fn total_integral(&self) -> Option<Rational> {
        if !self.tail.is_zero() {
            return None;
        }
        Some(self.primitive_knots().pop().map(|(_, v)| v).unwrap_or_else(Rational::zero))
    }

    /// `σ_τ f (s) = f(s/τ)`; on the unit interval the result is cut at 1
    /// (and is zero on `(τ, 1]` when `τ < 1`).
    pub fn dilate(&self, tau: &Rational) -> Result<StepFunction> {
        if !tau.is_positive() {
            return Err(Error::OutOfDomain(format!("dilation parameter {tau} must be positive")));
        }
        let mut bps: Vec<Rational> = self.breakpoints.iter().map(|t| t * tau).collect();
        let mut vals = self.values.clone();
        if self.domain == Domain::UnitInterval {
            let one = int(1);
            let keep = bps.partition_point(|t| *t < one);
            if keep < bps.len() {
                bps.truncate(keep + 1);
                vals.truncate(keep + 1);
                bps[keep] = one;
            }
        }
        Ok(Self::canonical(self.domain, bps, vals, self.tail.clone()))
    }

    /// `f · χ_(0,end]`, same domain.
    pub fn truncate(&self, end: &Rational) -> StepFunction {
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        for p in self.pieces() {
            if p.start >= *end {
                break;
            }
            bps.push(p.end.clone().min(end.clone()));
            vals.push(p.value);
        }
        if self.last_breakpoint() < *end && !self.tail.is_zero() {
            if self.domain == Domain::HalfLine || *end <= int(1) {
                bps.push(end.clone());
                vals.push(self.tail.clone());
            }
        }
        Self::canonical(self.domain, bps, vals, Rational::zero())
    }

    /// `f · χ_(start,∞)`, same domain.
    pub fn cut_below(&self, start: &Rational) -> StepFunction {
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        if start.is_positive() {
            bps.push(start.clone());
            vals.push(Rational::zero());
        }
        for p in self.pieces() {
            if p.end > *start {
                bps.push(p.end);
                vals.push(p.value);
            }
        }
        Self::canonical(self.domain, bps, vals, self.tail.clone())
    }

    /// Rearrangement cut to `(0,1]`, as a unit-interval function.
    pub fn restrict01(&self) -> StepFunction {
        let r = self.rearrange();
        let cut = r.truncate(&int(1));
        let mut bps = cut.breakpoints;
        let mut vals = cut.values;
        if !r.tail.is_zero() && bps.last().map_or(true, |b| *b < int(1)) {
            bps.push(int(1));
            vals.push(r.tail.clone());
        }
        Self::canonical(Domain::UnitInterval, bps, vals, Rational::zero())
    }

    /// Same function viewed on the half-line (zero beyond 1 for unit input).
    pub fn on_half_line(&self) -> StepFunction {
        StepFunction {
            domain: Domain::HalfLine,
            ..self.clone()
        }
    }

    pub fn scale(&self, c: &Rational) -> StepFunction {
        Self::canonical(
            self.domain,
            self.breakpoints.clone(),
            self.values.iter().map(|v| v * c).collect(),
            &self.tail * c,
        )
    }

    pub fn abs(&self) -> StepFunction {
        Self::canonical(
            self.domain,
            self.breakpoints.clone(),
            self.values.iter().map(|v| v.abs()).collect(),
            self.tail.abs(),
        )
    }

    /// `t ↦ f(T − t)` on `(0, T]`, unchanged beyond `T`. Measure preserving,
    /// so the rearrangement is unchanged up to null sets.
    pub fn reflect(&self, end: &Rational) -> Result<StepFunction> {
        if !end.is_positive() {
            return Err(Error::OutOfDomain(format!("reflection length {end} must be positive")));
        }
        self.check_point(end)?;
        let mut cuts: Vec<Rational> = self
            .breakpoints
            .iter()
            .filter(|t| *t < end)
            .map(|t| end - t)
            .collect();
        cuts.push(end.clone());
        cuts.sort();
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        let mut prev = Rational::zero();
        for c in cuts {
            let mid = (&prev + &c) / int(2);
            vals.push(self.eval(&(end - &mid)));
            bps.push(c.clone());
            prev = c;
        }
        for p in self.pieces() {
            if p.end > *end {
                bps.push(p.end);
                vals.push(p.value);
            }
        }
        Ok(Self::canonical(self.domain, bps, vals, self.tail.clone()))
    }
}

/// Pointwise binary operation on the merged breakpoint grid.
pub fn combine(op: CombineOp, f: &StepFunction, g: &StepFunction) -> Result<StepFunction> {
    if f.domain != g.domain {
        return Err(Error::DomainMismatch(format!(
            "cannot combine {:?} with {:?}",
            f.domain, g.domain
        )));
    }
    let grid = merge_grids(f.breakpoints(), g.breakpoints());
    let values = grid
        .iter()
        .map(|t| op.apply(&f.eval(t), &g.eval(t)))
        .collect();
    let tail = op.apply(&f.tail, &g.tail);
    Ok(StepFunction::canonical(f.domain, grid, values, tail))
}

pub(crate) fn merge_grids(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => match x.cmp(y) {
                Ordering::Less => {
                    i += 1;
                    x
                }
                Ordering::Greater => {
                    j += 1;
                    y
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    x
                }
            },
            (Some(x), None) => {
                i += 1;
                x
            }
            (None, Some(y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next.clone());
    }
    out
}

/// `Σ_j ξ_j χ_(j−1,j]` on the half-line.
pub fn embed_sequence(xi: &SeqVector) -> StepFunction {
    let bps = (1..=xi.len() as i64).map(int).collect();
    StepFunction::canonical(Domain::HalfLine, bps, xi.entries.clone(), Rational::zero())
}

/// Averages of `f` over the unit cells `(n−1, n]`.
pub fn expectation(f: &StepFunction) -> Result<SeqVector> {
    if f.domain != Domain::HalfLine {
        return Err(Error::DomainMismatch("expectation operates on half-line functions".into()));
    }
    if !f.tail.is_zero() {
        return Err(Error::NonIntegrable(format!(
            "tail value {} makes the cell averages non-summable",
            f.tail
        )));
    }
    let last = f.last_breakpoint();
    let cells = last.ceil().to_integer();
    let n: i64 = cells
        .try_into()
        .map_err(|_| Error::Malformed("support too long for a sequence".into()))?;
    let mut entries = Vec::with_capacity(n as usize);
    let mut prev = Rational::zero();
    for k in 1..=n {
        let cur = f.primitive(&int(k))?;
        entries.push(&cur - &prev);
        prev = cur;
    }
    Ok(SeqVector::new(entries))
}

/// A finitely supported sequence of rationals, trailing zeros removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SeqVector {
    entries: Vec<Rational>,
}

impl SeqVector {
    pub fn new(mut entries: Vec<Rational>) -> Self {
        while entries.last().map_or(false, |e| e.is_zero()) {
            entries.pop();
        }
        SeqVector { entries }
    }

    pub fn from_ints(v: &[i64]) -> Self {
        Self::new(v.iter().map(|&x| int(x)).collect())
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `i` (0-based), zero beyond the stored support.
    pub fn get(&self, i: usize) -> Rational {
        self.entries.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    /// Entries padded with zeros to length `n` (never truncates).
    pub fn padded(&self, n: usize) -> Vec<Rational> {
        let mut v = self.entries.clone();
        if v.len() < n {
            v.resize(n, Rational::zero());
        }
        v
    }

    pub fn is_decreasing(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] >= w[1])
            && self.entries.iter().all(|v| !v.is_negative())
    }

    pub fn rearrange(&self) -> SeqVector {
        let mut v: Vec<Rational> = self.entries.iter().map(|x| x.abs()).collect();
        v.sort_by(|a, b| b.cmp(a));
        SeqVector::new(v)
    }

    /// Partial sums `Σ_{k≤n} ξ_k` for `n = 1..=len`.
    pub fn partial_sums(&self) -> Vec<Rational> {
        let mut acc = Rational::zero();
        self.entries
            .iter()
            .map(|x| {
                acc += x;
                acc.clone()
            })
            .collect()
    }

    pub fn sum(&self) -> Rational {
        self.entries.iter().fold(Rational::zero(), |a, b| a + b)
    }

    /// `σ_m`: each entry repeated `m` times.
    pub fn dilate(&self, m: usize) -> SeqVector {
        let mut v = Vec::with_capacity(self.entries.len() * m);
        for x in &self.entries {
            for _ in 0..m {
                v.push(x.clone());
            }
        }
        SeqVector::new(v)
    }

    pub fn scale(&self, c: &Rational) -> SeqVector {
        SeqVector::new(self.entries.iter().map(|x| x * c).collect())
    }
}

impl Serialize for SeqVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        rational::serde_rational_vec::serialize(&self.entries, s)
    }
}

impl<'de> Deserialize<'de> for SeqVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        rational::serde_rational_vec::deserialize(d).map(SeqVector::new)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFunctionRepr {
    domain: Domain,
    breakpoints: Vec<RationalRepr>,
    values: Vec<RationalRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<RationalRepr>,
}

impl Serialize for StepFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StepFunctionRepr {
            domain: self.domain,
            breakpoints: self.breakpoints.iter().cloned().map(RationalRepr).collect(),
            values: self.values.iter().cloned().map(RationalRepr).collect(),
            tail: match self.domain {
                Domain::HalfLine => Some(RationalRepr(self.tail.clone())),
                Domain::UnitInterval => None,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = StepFunctionRepr::deserialize(d)?;
        StepFunction::new(
            raw.domain,
            raw.breakpoints.into_iter().map(|r| r.0).collect(),
            raw.values.into_iter().map(|r| r.0).collect(),
            raw.tail.map(|r| r.0).unwrap_or_else(Rational::zero),
        )
        .map_err(serde::de::Error::custom)
    }
}
