//! Norms of the concrete fully symmetric spaces: `L_p`, `L_1+L_∞`,
//! `L_1∩L_∞`, Orlicz (Luxemburg gauge), Lorentz `Λ_ψ` and Marcinkiewicz
//! `M_ψ`, over `(0,1)`, `(0,∞)` or sequences.
//!
//! Norms are computed from the decreasing rearrangement. They are exact
//! rationals whenever the family and its parameter allow it and otherwise
//! carry an explicit relative tolerance.

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorization::Element;
use crate::rational::{self, int, Rational, RationalRepr};
use crate::stepfn::{embed_sequence, merge_grids, Domain, StepFunction};

/// Relative tolerance reported for every approximate norm.
pub const APPROX_REL_TOL: f64 = 1e-9;
/// Relative bracket width at which Luxemburg bisection stops.
const BISECTION_REL_TOL: f64 = 1e-12;

/// Increasing concave function with value 0 at 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConcaveFn {
    /// Continuous piecewise-linear through `knots` (starting at the origin),
    /// continued with `tail_slope` after the last knot.
    PiecewiseLinear {
        knots: Vec<(RationalRepr, RationalRepr)>,
        tail_slope: RationalRepr,
    },
    /// `t^alpha`, `0 < alpha ≤ 1`.
    Power { alpha: RationalRepr },
    /// `log(1 + t)`.
    LogShift,
}

impl ConcaveFn {
    pub fn piecewise(knots: Vec<(Rational, Rational)>, tail_slope: Rational) -> Result<Self> {
        let c = ConcaveFn::PiecewiseLinear {
            knots: knots
                .into_iter()
                .map(|(x, y)| (RationalRepr(x), RationalRepr(y)))
                .collect(),
            tail_slope: RationalRepr(tail_slope),
        };
        c.validate()?;
        Ok(c)
    }

    /// `min(c·t, c·x)`-style helper: `slope·t` up to `x`, constant after.
    pub fn capped_linear(slope: Rational, x: Rational) -> Result<Self> {
        let y = &slope * &x;
        Self::piecewise(vec![(Rational::zero(), Rational::zero()), (x, y)], Rational::zero())
    }

    pub fn power(alpha: Rational) -> Result<Self> {
        let c = ConcaveFn::Power {
            alpha: RationalRepr(alpha),
        };
        c.validate()?;
        Ok(c)
    }

    /// Knots as plain rationals (empty for symbolic kinds).
    pub fn knots(&self) -> Vec<(Rational, Rational)> {
        match self {
            ConcaveFn::PiecewiseLinear { knots, .. } => {
                knots.iter().map(|(x, y)| (x.0.clone(), y.0.clone())).collect()
            }
            _ => vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConcaveFn::PiecewiseLinear { knots, tail_slope } => {
                let first = knots
                    .first()
                    .ok_or_else(|| Error::Malformed("piecewise-linear function needs knots".into()))?;
                if !first.0 .0.is_zero() || !first.1 .0.is_zero() {
                    return Err(Error::Malformed("first knot must be (0, 0)".into()));
                }
                let mut prev_slope: Option<Rational> = None;
                for w in knots.windows(2) {
                    let dx = &w[1].0 .0 - &w[0].0 .0;
                    if !dx.is_positive() {
                        return Err(Error::Malformed("knot abscissae must increase strictly".into()));
                    }
                    let s = (&w[1].1 .0 - &w[0].1 .0) / dx;
                    if s.is_negative() {
                        return Err(Error::Malformed("function must be nondecreasing".into()));
                    }
                    if let Some(p) = &prev_slope {
                        if s > *p {
                            return Err(Error::Malformed("slopes must be nonincreasing (concavity)".into()));
                        }
                    }
                    prev_slope = Some(s);
                }
                if tail_slope.0.is_negative() {
                    return Err(Error::Malformed("tail slope must be nonnegative".into()));
                }
                if let Some(p) = prev_slope {
                    if tail_slope.0 > p {
                        return Err(Error::Malformed("tail slope exceeds the last slope (concavity)".into()));
                    }
                }
                Ok(())
            }
            ConcaveFn::Power { alpha } => {
                if !alpha.0.is_positive() || alpha.0 > int(1) {
                    return Err(Error::Malformed(format!("power exponent {} not in (0, 1]", alpha.0)));
                }
                Ok(())
            }
            ConcaveFn::LogShift => Ok(()),
        }
    }

    /// Exact value, available for piecewise-linear and `t^1`.
    pub fn eval_exact(&self, t: &Rational) -> Option<Rational> {
        match self {
            ConcaveFn::PiecewiseLinear { knots, tail_slope } => {
                let idx = knots.partition_point(|(x, _)| x.0 < *t);
                if idx < knots.len() && knots[idx].0 .0 == *t {
                    return Some(knots[idx].1 .0.clone());
                }
                if idx == 0 {
                    return Some(Rational::zero());
                }
                let (x0, y0) = (&knots[idx - 1].0 .0, &knots[idx - 1].1 .0);
                if idx == knots.len() {
                    return Some(y0 + &tail_slope.0 * (t - x0));
                }
                let (x1, y1) = (&knots[idx].0 .0, &knots[idx].1 .0);
                Some(y0 + (y1 - y0) * (t - x0) / (x1 - x0))
            }
            ConcaveFn::Power { alpha } if alpha.0.is_one() => Some(t.clone()),
            _ => None,
        }
    }

    pub fn eval_f64(&self, t: &Rational) -> f64 {
        if let Some(v) = self.eval_exact(t) {
            return rational::to_f64(&v);
        }
        match self {
            ConcaveFn::Power { alpha } => rational::powf(t, rational::to_f64(&alpha.0)),
            ConcaveFn::LogShift => rational::ln_1p(t),
            ConcaveFn::PiecewiseLinear { .. } => unreachable!(),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            ConcaveFn::PiecewiseLinear { .. } => true,
            ConcaveFn::Power { alpha } => alpha.0.is_one(),
            ConcaveFn::LogShift => false,
        }
    }

    /// `lim_{t→∞} ψ(t)/t`.
    pub fn asymptotic_slope(&self) -> Rational {
        match self {
            ConcaveFn::PiecewiseLinear { tail_slope, .. } => tail_slope.0.clone(),
            ConcaveFn::Power { alpha } if alpha.0.is_one() => int(1),
            _ => Rational::zero(),
        }
    }

    /// `lim_{t→0} ψ(t)/t`, `None` when infinite.
    pub fn initial_slope(&self) -> Option<Rational> {
        match self {
            ConcaveFn::PiecewiseLinear { knots, tail_slope } => Some(match knots.get(1) {
                Some((x, y)) => &y.0 / &x.0,
                None => tail_slope.0.clone(),
            }),
            ConcaveFn::Power { alpha } if alpha.0.is_one() => Some(int(1)),
            ConcaveFn::Power { .. } => None,
            ConcaveFn::LogShift => Some(int(1)),
        }
    }

    /// `sup ψ` when finite.
    pub fn bound(&self) -> Option<Rational> {
        match self {
            ConcaveFn::PiecewiseLinear { knots, tail_slope } if tail_slope.0.is_zero() => {
                knots.last().map(|k| k.1 .0.clone())
            }
            _ => None,
        }
    }
}

/// Convex increasing function with `M(0) = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrliczFn {
    /// `t^p`, `p ≥ 1`.
    Power { p: RationalRepr },
    /// Continuous piecewise-linear convex through `knots` (from the origin),
    /// continued with `tail_slope`.
    PiecewiseLinear {
        knots: Vec<(RationalRepr, RationalRepr)>,
        tail_slope: RationalRepr,
    },
}

impl OrliczFn {
    pub fn power(p: Rational) -> Result<Self> {
        let m = OrliczFn::Power { p: RationalRepr(p) };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OrliczFn::Power { p } => {
                if p.0 < int(1) {
                    return Err(Error::Malformed(format!("Orlicz power {} must be ≥ 1", p.0)));
                }
                Ok(())
            }
            OrliczFn::PiecewiseLinear { knots, tail_slope } => {
                let first = knots
                    .first()
                    .ok_or_else(|| Error::Malformed("Orlicz function needs knots".into()))?;
                if !first.0 .0.is_zero() || !first.1 .0.is_zero() {
                    return Err(Error::Malformed("first Orlicz knot must be (0, 0)".into()));
                }
                let mut prev = Rational::zero();
                for w in knots.windows(2) {
                    let dx = &w[1].0 .0 - &w[0].0 .0;
                    if !dx.is_positive() {
                        return Err(Error::Malformed("knot abscissae must increase strictly".into()));
                    }
                    let s = (&w[1].1 .0 - &w[0].1 .0) / dx;
                    if s < prev {
                        return Err(Error::Malformed("Orlicz slopes must be nondecreasing (convexity)".into()));
                    }
                    prev = s;
                }
                if tail_slope.0 < prev || !tail_slope.0.is_positive() {
                    return Err(Error::Malformed("Orlicz tail slope must be positive and ≥ the last slope".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            OrliczFn::Power { p } => x.powf(rational::to_f64(&p.0)),
            OrliczFn::PiecewiseLinear { knots, tail_slope } => {
                let pts: Vec<(f64, f64)> = knots
                    .iter()
                    .map(|(a, b)| (rational::to_f64(&a.0), rational::to_f64(&b.0)))
                    .collect();
                for w in pts.windows(2) {
                    if x <= w[1].0 {
                        return w[0].1 + (w[1].1 - w[0].1) * (x - w[0].0) / (w[1].0 - w[0].0);
                    }
                }
                let (lx, ly) = *pts.last().unwrap();
                ly + rational::to_f64(&tail_slope.0) * (x - lx)
            }
        }
    }

    /// `lim_{t→0} M(t)/t`.
    pub fn initial_slope(&self) -> Rational {
        match self {
            OrliczFn::Power { p } if p.0.is_one() => int(1),
            OrliczFn::Power { .. } => Rational::zero(),
            OrliczFn::PiecewiseLinear { knots, tail_slope } => match knots.get(1) {
                Some((x, y)) => &y.0 / &x.0,
                None => tail_slope.0.clone(),
            },
        }
    }

    /// Largest `x` with `M(x) = 0`.
    pub fn zero_run(&self) -> Rational {
        match self {
            OrliczFn::Power { .. } => Rational::zero(),
            OrliczFn::PiecewiseLinear { knots, .. } => {
                let mut end = Rational::zero();
                for (x, y) in knots {
                    if y.0.is_zero() {
                        end = x.0.clone();
                    }
                }
                end
            }
        }
    }
}

/// `L_p` exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exponent {
    Finite(Rational),
    Infinity,
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_str(&p.to_string()),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::String(s) if s == "inf" => Ok(Exponent::Infinity),
            serde_json::Value::String(s) => rational::parse(s)
                .map(Exponent::Finite)
                .map_err(serde::de::Error::custom),
            serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => {
                Ok(Exponent::Finite(int(n.as_i64().unwrap_or(i64::MAX))))
            }
            _ => Err(serde::de::Error::custom("exponent must be \"inf\", an integer or \"p/q\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Lp { p: Exponent },
    #[serde(rename = "l1_plus_linf")]
    L1PlusLinf,
    #[serde(rename = "l1_cap_linf")]
    L1CapLinf,
    Orlicz { m: OrliczFn },
    Lorentz { psi: ConcaveFn },
    Marcinkiewicz { psi: ConcaveFn },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceDomain {
    Unit,
    HalfLine,
    Sequence,
}

impl SpaceDomain {
    pub fn accepts(self, e: &Element) -> bool {
        match (self, e) {
            (SpaceDomain::Sequence, Element::Sequence(_)) => true,
            (SpaceDomain::Unit, Element::Function(f)) => f.domain() == Domain::UnitInterval,
            (SpaceDomain::HalfLine, Element::Function(f)) => f.domain() == Domain::HalfLine,
            _ => false,
        }
    }
}

/// A symmetric space: a family with its parameters, over a domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpaceSpec {
    #[serde(flatten)]
    pub family: Family,
    pub domain: SpaceDomain,
}

impl<'de> Deserialize<'de> for SpaceSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut v = serde_json::Value::deserialize(d)?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| D::Error::custom("space must be a JSON object"))?;
        let domain = match obj.remove("domain") {
            Some(dv) => SpaceDomain::deserialize(dv).map_err(D::Error::custom)?,
            None => SpaceDomain::HalfLine,
        };
        let family = Family::deserialize(v).map_err(D::Error::custom)?;
        let spec = SpaceSpec { family, domain };
        spec.validate().map_err(D::Error::custom)?;
        Ok(spec)
    }
}

/// How a space sits relative to `L_1` (resp. `ℓ_1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Relation {
    /// `E ⊆ L_1`.
    SubsetL1,
    /// `E ∖ L_1 ≠ ∅`.
    MeetsComplementL1,
}

impl SpaceSpec {
    pub fn new(family: Family, domain: SpaceDomain) -> Result<Self> {
        let s = SpaceSpec { family, domain };
        s.validate()?;
        Ok(s)
    }

    pub fn lp(p: Rational, domain: SpaceDomain) -> Self {
        SpaceSpec {
            family: Family::Lp { p: Exponent::Finite(p) },
            domain,
        }
    }

    pub fn linf(domain: SpaceDomain) -> Self {
        SpaceSpec {
            family: Family::Lp { p: Exponent::Infinity },
            domain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Lp { p: Exponent::Finite(p) } if *p < int(1) => {
                Err(Error::Malformed(format!("L_p exponent {p} must be ≥ 1")))
            }
            Family::Orlicz { m } => m.validate(),
            Family::Lorentz { psi } | Family::Marcinkiewicz { psi } => {
                psi.validate()?;
                if psi.initial_slope().map_or(false, |s| s.is_zero()) {
                    return Err(Error::Malformed("ψ must be positive on (0, ∞)".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Position relative to `L_1`. On `(0,1)` every symmetric space embeds
    /// into `L_1`; on the half-line and on sequences the family decides.
    pub fn l1_relation(&self) -> L1Relation {
        use L1Relation::*;
        if self.domain == SpaceDomain::Unit {
            return SubsetL1;
        }
        match &self.family {
            Family::Lp { p: Exponent::Finite(p) } if p.is_one() => SubsetL1,
            Family::Lp { .. } => MeetsComplementL1,
            Family::L1PlusLinf => MeetsComplementL1,
            Family::L1CapLinf => SubsetL1,
            Family::Orlicz { m } => {
                if m.initial_slope().is_positive() {
                    SubsetL1
                } else {
                    MeetsComplementL1
                }
            }
            Family::Marcinkiewicz { psi } => {
                if psi.bound().is_some() {
                    SubsetL1
                } else {
                    MeetsComplementL1
                }
            }
            Family::Lorentz { psi } => {
                if psi.asymptotic_slope().is_positive() {
                    SubsetL1
                } else {
                    MeetsComplementL1
                }
            }
        }
    }

    pub fn subset_l1(&self) -> bool {
        self.l1_relation() == L1Relation::SubsetL1
    }

    pub fn meets_complement_l1(&self) -> bool {
        self.l1_relation() == L1Relation::MeetsComplementL1
    }

    /// `L_∞ ⊆ E` on the half-line (the constant 1 has finite norm).
    pub fn contains_linf(&self) -> bool {
        if self.domain == SpaceDomain::Unit {
            return true;
        }
        match &self.family {
            Family::Lp { p } => *p == Exponent::Infinity,
            Family::L1PlusLinf => true,
            Family::L1CapLinf => false,
            Family::Orlicz { m } => m.zero_run().is_positive(),
            Family::Marcinkiewicz { psi } => psi.asymptotic_slope().is_positive(),
            Family::Lorentz { psi } => psi.bound().is_some(),
        }
    }

    /// Fully symmetric with a Fatou norm: true for every implemented family
    /// (recorded as metadata, not verified).
    pub fn fully_symmetric_fatou(&self) -> bool {
        true
    }
}

/// A norm value: exact, approximate with a relative tolerance, or infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NormValue {
    Exact { value: RationalRepr },
    Approx { value: f64, rel_tol: f64 },
    Infinite,
}

impl NormValue {
    pub fn exact(r: Rational) -> Self {
        NormValue::Exact { value: RationalRepr(r) }
    }

    pub fn approx(x: f64) -> Self {
        NormValue::Approx {
            value: x,
            rel_tol: APPROX_REL_TOL,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            NormValue::Exact { value } => rational::to_f64(&value.0),
            NormValue::Approx { value, .. } => *value,
            NormValue::Infinite => f64::INFINITY,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            NormValue::Exact { value } => Some(&value.0),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, NormValue::Infinite)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, NormValue::Exact { .. })
    }

    fn tolerance(&self) -> f64 {
        match self {
            NormValue::Approx { rel_tol, .. } => *rel_tol,
            _ => 0.0,
        }
    }

    /// `self ≤ factor · other`, exact when both are exact, otherwise up to
    /// the combined relative tolerance.
    pub fn le_scaled(&self, factor: &Rational, other: &NormValue) -> bool {
        match (self, other) {
            (_, NormValue::Infinite) => true,
            (NormValue::Infinite, _) => false,
            (NormValue::Exact { value: a }, NormValue::Exact { value: b }) => a.0 <= factor * &b.0,
            _ => {
                let a = self.to_f64();
                let b = rational::to_f64(factor) * other.to_f64();
                let tol = (self.tolerance() + other.tolerance()) * a.abs().max(b.abs());
                a <= b + tol
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> NormValue {
        match self {
            NormValue::Exact { value } => NormValue::exact(&value.0 * c),
            NormValue::Approx { value, rel_tol } => NormValue::Approx {
                value: value * rational::to_f64(c),
                rel_tol: *rel_tol,
            },
            NormValue::Infinite => {
                if c.is_zero() {
                    NormValue::exact(Rational::zero())
                } else {
                    NormValue::Infinite
                }
            }
        }
    }
}

/// Decreasing rearrangement as `(length, value)` pieces plus terminal level.
struct Profile {
    bps: Vec<Rational>,
    vals: Vec<Rational>,
    tail: Rational,
}

impl Profile {
    fn of(f: &StepFunction) -> Self {
        let r = f.rearrange();
        Profile {
            bps: r.breakpoints().to_vec(),
            vals: r.values().to_vec(),
            tail: r.tail().clone(),
        }
    }

    fn lengths(&self) -> impl Iterator<Item = (Rational, &Rational)> + '_ {
        let starts = std::iter::once(Rational::zero()).chain(self.bps.iter().cloned());
        starts
            .zip(self.bps.iter())
            .zip(self.vals.iter())
            .map(|((s, e), v)| (e - s, v))
    }

    fn l1(&self) -> Option<Rational> {
        if !self.tail.is_zero() {
            return None;
        }
        Some(self.lengths().fold(Rational::zero(), |acc, (len, v)| acc + len * v))
    }

    fn sup(&self) -> Rational {
        self.vals.first().cloned().unwrap_or_else(|| self.tail.clone())
    }

    /// `∫_0^t f*`.
    fn primitive(&self, t: &Rational) -> Rational {
        let mut acc = Rational::zero();
        let mut start = Rational::zero();
        for (e, v) in self.bps.iter().zip(&self.vals) {
            if e >= t {
                return acc + v * (t - &start);
            }
            acc += v * (e - &start);
            start = e.clone();
        }
        acc + &self.tail * (t - start)
    }

    /// `∫_0^t f*` at each point of an increasing grid, in one sweep.
    fn primitives_at(&self, grid: &[Rational]) -> Vec<Rational> {
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = Rational::zero();
        let mut start = Rational::zero();
        let mut k = 0;
        for t in grid {
            while k < self.bps.len() && self.bps[k] <= *t {
                acc += &self.vals[k] * (&self.bps[k] - &start);
                start = self.bps[k].clone();
                k += 1;
            }
            let level = self.vals.get(k).unwrap_or(&self.tail);
            out.push(&acc + level * (t - &start));
        }
        out
    }
}

fn exact_root(s: &Rational, p: u32) -> Option<Rational> {
    let n = s.numer();
    let d = s.denom();
    let rn = n.nth_root(p);
    let rd = d.nth_root(p);
    if rn.pow(p) == *n && rd.pow(p) == *d {
        Some(Rational::new(rn, rd))
    } else {
        None
    }
}

fn lp_norm(prof: &Profile, p: &Rational) -> NormValue {
    if !prof.tail.is_zero() {
        return NormValue::Infinite;
    }
    if p.is_one() {
        return NormValue::exact(prof.l1().unwrap());
    }
    if p.is_integer() {
        if let Some(k) = p.to_integer().to_u32() {
            let sum = prof
                .lengths()
                .fold(Rational::zero(), |acc, (len, v)| acc + len * rational::powi(v, k as i64));
            if sum.is_zero() {
                return NormValue::exact(sum);
            }
            if let Some(r) = exact_root(&sum, k) {
                return NormValue::exact(r);
            }
            return NormValue::approx((rational::ln(&sum) / k as f64).exp());
        }
    }
    let pf = rational::to_f64(p);
    // scale by the sup to keep the sum in range
    let top = prof.sup();
    if top.is_zero() {
        return NormValue::exact(Rational::zero());
    }
    let mut sum = 0.0;
    for (len, v) in prof.lengths() {
        let ratio = v / &top;
        sum += rational::to_f64(&len) * rational::powf(&ratio, pf);
    }
    NormValue::approx(rational::to_f64(&top) * sum.powf(1.0 / pf))
}

fn lorentz_norm(prof: &Profile, psi: &ConcaveFn) -> NormValue {
    if !prof.tail.is_zero() && psi.bound().is_none() {
        return NormValue::Infinite;
    }
    if psi.is_exact() {
        let mut acc = Rational::zero();
        let mut prev = Rational::zero();
        for (e, v) in prof.bps.iter().zip(&prof.vals) {
            let cur = psi.eval_exact(e).unwrap();
            acc += v * (&cur - &prev);
            prev = cur;
        }
        if let Some(b) = psi.bound() {
            acc += &prof.tail * (b - prev);
        }
        return NormValue::exact(acc);
    }
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (e, v) in prof.bps.iter().zip(&prof.vals) {
        let cur = psi.eval_f64(e);
        acc += rational::to_f64(v) * (cur - prev);
        prev = cur;
    }
    NormValue::approx(acc)
}

/// `sup_t ∫_0^t f* / ψ(t)`. On every piece of the merged grid the ratio is
/// an affine function over a positive concave one, hence quasiconvex, so
/// the sup is attained at a grid point or as a limit at `0` or `∞`.
fn marcinkiewicz_norm(prof: &Profile, psi: &ConcaveFn) -> NormValue {
    let grid = merge_grids(
        &prof.bps,
        &psi.knots().into_iter().map(|k| k.0).filter(|x| x.is_positive()).collect::<Vec<_>>(),
    );
    // limit at infinity
    let at_infinity: Option<Rational> = if prof.tail.is_positive() {
        let s = psi.asymptotic_slope();
        if s.is_zero() {
            return NormValue::Infinite;
        }
        Some(&prof.tail / s)
    } else {
        match psi.bound() {
            Some(b) => Some(prof.l1().unwrap() / b),
            None => Some(Rational::zero()),
        }
    };
    // limit at zero
    let first = prof.vals.first().cloned().unwrap_or_else(|| prof.tail.clone());
    let at_zero: Option<Rational> = match psi.initial_slope() {
        Some(s) => Some(first / s),
        None => Some(Rational::zero()),
    };
    if psi.is_exact() {
        let mut best = at_infinity.unwrap().max(at_zero.unwrap());
        for (t, pt) in grid.iter().zip(prof.primitives_at(&grid)) {
            let r = pt / psi.eval_exact(t).unwrap();
            if r > best {
                best = r;
            }
        }
        return NormValue::exact(best);
    }
    let mut best = rational::to_f64(&at_infinity.unwrap()).max(rational::to_f64(&at_zero.unwrap()));
    for (t, pt) in grid.iter().zip(prof.primitives_at(&grid)) {
        let r = rational::to_f64(&pt) / psi.eval_f64(t);
        if r > best {
            best = r;
        }
    }
    NormValue::approx(best)
}

fn orlicz_norm(prof: &Profile, m: &OrliczFn) -> Result<NormValue> {
    if let OrliczFn::Power { p } = m {
        return Ok(lp_norm(prof, &p.0));
    }
    let top = prof.sup();
    if top.is_zero() {
        return Ok(NormValue::exact(Rational::zero()));
    }
    let zero_run = rational::to_f64(&m.zero_run());
    let tail = rational::to_f64(&prof.tail);
    let pieces: Vec<(f64, f64)> = prof
        .lengths()
        .map(|(len, v)| (rational::to_f64(&len), rational::to_f64(v)))
        .collect();
    // λ below tail/zero_run makes the tail contribute infinite mass
    let lambda_min = if tail > 0.0 {
        if zero_run <= 0.0 {
            return Ok(NormValue::Infinite);
        }
        tail / zero_run
    } else {
        0.0
    };
    let modular = |lambda: f64| -> f64 {
        if tail > 0.0 && tail / lambda > zero_run {
            return f64::INFINITY;
        }
        pieces.iter().map(|(len, v)| len * m.eval_f64(v / lambda)).sum()
    };
    let mut hi = rational::to_f64(&top).max(lambda_min).max(f64::MIN_POSITIVE);
    let mut guard = 0;
    while modular(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Numeric("Luxemburg bracket did not close".into()));
        }
    }
    let mut lo = lambda_min.max(hi / 2.0);
    while lo > lambda_min && modular(lo) <= 1.0 {
        lo /= 2.0;
        guard += 1;
        if guard > 4000 || lo == 0.0 {
            break;
        }
    }
    lo = lo.max(lambda_min);
    for _ in 0..200 {
        if hi - lo <= BISECTION_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if modular(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(NormValue::approx(hi))
}

fn as_half_line(e: &Element) -> StepFunction {
    match e {
        Element::Function(f) => f.on_half_line(),
        Element::Sequence(s) => embed_sequence(s),
    }
}

/// `‖f‖_E`.
pub fn norm(space: &SpaceSpec, f: &Element) -> Result<NormValue> {
    if !space.domain.accepts(f) {
        return Err(Error::DomainMismatch(format!(
            "space on {:?} cannot measure this element",
            space.domain
        )));
    }
    norm_unchecked(space, &as_half_line(f))
}

/// Norm of a step function, reading unit-interval input as vanishing
/// beyond 1 and sequences through their unit-cell embedding.
pub fn norm_of(space: &SpaceSpec, f: &StepFunction) -> Result<NormValue> {
    norm_unchecked(space, &f.on_half_line())
}

fn norm_unchecked(space: &SpaceSpec, f: &StepFunction) -> Result<NormValue> {
    let prof = Profile::of(f);
    Ok(match &space.family {
        Family::Lp { p: Exponent::Infinity } => NormValue::exact(prof.sup()),
        Family::Lp { p: Exponent::Finite(p) } => lp_norm(&prof, p),
        Family::L1PlusLinf => NormValue::exact(prof.primitive(&int(1))),
        Family::L1CapLinf => match prof.l1() {
            Some(l1) => NormValue::exact(l1.max(prof.sup())),
            None => NormValue::Infinite,
        },
        Family::Orlicz { m } => orlicz_norm(&prof, m)?,
        Family::Lorentz { psi } => lorentz_norm(&prof, psi),
        Family::Marcinkiewicz { psi } => marcinkiewicz_norm(&prof, psi),
    })
}

/// `φ_E(t) = ‖χ_(0,t)‖_E`.
pub fn fundamental_function(space: &SpaceSpec, t: &Rational) -> Result<NormValue> {
    if !t.is_positive() {
        return Err(Error::OutOfDomain(format!("fundamental function needs t > 0, got {t}")));
    }
    let domain = match space.domain {
        SpaceDomain::Unit => {
            if *t > int(1) {
                return Err(Error::OutOfDomain(format!("t = {t} exceeds 1 on the unit interval")));
            }
            Domain::UnitInterval
        }
        SpaceDomain::HalfLine => Domain::HalfLine,
        SpaceDomain::Sequence => {
            if !t.is_integer() {
                return Err(Error::OutOfDomain(format!("sequence index {t} must be an integer")));
            }
            Domain::HalfLine
        }
    };
    let chi = StepFunction::indicator(domain, Rational::zero(), t.clone(), int(1))?;
    norm_of(space, &chi)
}

/// `‖f‖_{E+L_∞} = ‖f* χ_(0,1)‖_E` for a space on the half-line.
pub fn e_plus_linf_norm(space: &SpaceSpec, f: &StepFunction) -> Result<NormValue> {
    if space.domain != SpaceDomain::HalfLine || f.domain() != Domain::HalfLine {
        return Err(Error::DomainMismatch("E + L_∞ is formed on the half-line".into()));
    }
    norm_of(space, &f.restrict01())
}

/// `max(‖f* χ_(0,1)‖_E, ‖f*‖_{L_1})`: the auxiliary norm used to move a
/// unit-interval question to the half-line.
pub fn unit_auxiliary_norm(space: &SpaceSpec, f: &StepFunction) -> Result<NormValue> {
    let head = norm_of(space, &f.restrict01())?;
    let l1 = match f.rearrange().total_integral() {
        Some(v) => NormValue::exact(v),
        None => NormValue::Infinite,
    };
    Ok(if head.le_scaled(&int(1), &l1) { l1 } else { head })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub phi_at_one: NormValue,
    pub holds: bool,
}

/// Reports `φ_E(1)` and whether it equals 1. Never rescales.
pub fn normalization_check(space: &SpaceSpec) -> Result<NormalizationReport> {
    let phi = fundamental_function(space, &int(1))?;
    let holds = match &phi {
        NormValue::Exact { value } => value.0.is_one(),
        NormValue::Approx { value, rel_tol } => (value - 1.0).abs() <= *rel_tol,
        NormValue::Infinite => false,
    };
    Ok(NormalizationReport { phi_at_one: phi, holds })
}
