//! Least concave majorants of finitely many point constraints and the
//! `ψ_κ` construction built on the grid `F(a_n) = (5/4)^n`.
//!
//! Everything here is exact: `F = ∫_0^t f*` is piecewise affine for a step
//! function `f`, so the grid, the hulls and all inequality checks stay in
//! the rationals.
//!
//! The doubly infinite sequences of the construction are represented on a
//! finite window `[n_min, n_max]`; indices outside the window behave as
//! `κ_n = ∞`, i.e. their constraints are dropped.

use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::majorization::{dilated_mass_check, Location, Polyline, Verdict, Witness};
use crate::rational::{int, powi, ratio, Rational, RationalRepr};
use crate::spaces::ConcaveFn;
use crate::stepfn::{combine, CombineOp, Domain, StepFunction};

/// Point constraints `G(α_n) ≥ β_n` for `n ∈ [n_min, n_min + len)`, all
/// dominated by the envelope `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub n_min: i64,
    pub alpha: Vec<Rational>,
    pub beta: Vec<Rational>,
    pub envelope: ConcaveFn,
}

impl ConstraintSet {
    pub fn new(n_min: i64, alpha: Vec<Rational>, beta: Vec<Rational>, envelope: ConcaveFn) -> Result<Self> {
        let c = ConstraintSet {
            n_min,
            alpha,
            beta,
            envelope,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.alpha.len() as i64 - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.beta.len() {
            return Err(Error::Malformed(format!(
                "{} abscissae but {} levels",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        self.envelope.validate()?;
        let mut prev = Rational::zero();
        for (i, (a, b)) in self.alpha.iter().zip(&self.beta).enumerate() {
            let n = self.n_min + i as i64;
            if *a <= prev {
                return Err(Error::Malformed(format!("α_{n} = {a} does not increase strictly from {prev}")));
            }
            if b.is_negative() {
                return Err(Error::Malformed(format!("β_{n} = {b} is negative")));
            }
            let above = match self.envelope.eval_exact(a) {
                Some(fa) => *b > fa,
                None => {
                    let fa = self.envelope.eval_f64(a);
                    crate::rational::to_f64(b) > fa * (1.0 + 1e-12)
                }
            };
            if above {
                return Err(Error::Precondition(format!("β_{n} = {b} exceeds F(α_{n}) at α_{n} = {a}")));
            }
            prev = a.clone();
        }
        Ok(())
    }
}

/// A vertex of the majorant: the origin or a touching constraint
/// `G(α_m) = β_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullVertex {
    /// Constraint index `m`, `None` for the origin.
    pub index: Option<i64>,
    pub x: Rational,
    pub y: Rational,
}

/// Vertices of the least increasing concave `G ≥ 0` with `G(α_n) ≥ β_n`.
///
/// `G` is affine between consecutive vertices and constant after the last
/// one, so every affine piece starts at the origin or at a constraint that
/// `G` touches.
pub fn majorant_vertices(c: &ConstraintSet) -> Result<Vec<HullVertex>> {
    c.validate()?;
    let mut hull: Vec<HullVertex> = vec![HullVertex {
        index: None,
        x: Rational::zero(),
        y: Rational::zero(),
    }];
    for (i, (x, y)) in c.alpha.iter().zip(&c.beta).enumerate() {
        let v = HullVertex {
            index: Some(c.n_min + i as i64),
            x: x.clone(),
            y: y.clone(),
        };
        // pop while the middle vertex lies on or below the chord
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            let cross = (&b.x - &a.x) * (&v.y - &a.y) - (&b.y - &a.y) * (&v.x - &a.x);
            if cross.is_negative() {
                break;
            }
            hull.pop();
        }
        hull.push(v);
    }
    // an increasing majorant stops climbing at the first highest vertex
    let top = hull
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if v.y > hull[best].y { i } else { best });
    hull.truncate(top + 1);
    Ok(hull)
}

/// The least increasing concave majorant of the constraints, as a
/// piecewise-linear [`ConcaveFn`] that is constant after its last knot.
pub fn least_concave_majorant(c: &ConstraintSet) -> Result<ConcaveFn> {
    let hull = majorant_vertices(c)?;
    ConcaveFn::piecewise(hull.into_iter().map(|v| (v.x, v.y)).collect(), Rational::zero())
}

/// `F(t) = ∫_0^t f*` as a concave function.
pub fn hardy_primitive(f: &StepFunction) -> Result<ConcaveFn> {
    let fs = f.on_half_line().rearrange();
    ConcaveFn::piecewise(fs.primitive_knots(), fs.tail().clone())
}

/// The points `a_n` with `F(a_n) = (5/4)^n` for `n` in a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_min: i64,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub points: Vec<Rational>,
}

impl Grid {
    pub fn n_max(&self) -> i64 {
        self.n_min + self.points.len() as i64 - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.n_min && n <= self.n_max()
    }

    pub fn a(&self, n: i64) -> Result<&Rational> {
        if !self.contains(n) {
            return Err(Error::OutOfDomain(format!(
                "grid index {n} outside [{}, {}]",
                self.n_min,
                self.n_max()
            )));
        }
        Ok(&self.points[(n - self.n_min) as usize])
    }
}

/// `(5/4)^n`.
pub fn level(n: i64) -> Rational {
    powi(&ratio(5, 4), n)
}

/// Least `t` with `F(t) = y`, `None` when `y` exceeds the range of `F`.
fn invert(knots: &[(Rational, Rational)], tail_slope: &Rational, y: &Rational) -> Option<Rational> {
    for w in knots.windows(2) {
        let (x0, y0) = &w[0];
        let (x1, y1) = &w[1];
        if y <= y1 && y1 > y0 {
            return Some(x0 + (x1 - x0) * (y - y0) / (y1 - y0));
        }
    }
    let (x, yl) = knots.last()?;
    if y == yl && !y.is_zero() {
        return Some(x.clone());
    }
    if tail_slope.is_positive() && y > yl {
        return Some(x + (y - yl) / tail_slope);
    }
    None
}

/// Solves `F(a_n) = (5/4)^n` exactly for `n ∈ [n_min, n_max]`.
///
/// Levels are reachable up to `sup F`, so the feasible indices form a
/// half-line `n ≤ N`; an infeasible request reports the largest feasible
/// sub-window.
pub fn breakpoint_grid(f_cap: &ConcaveFn, n_min: i64, n_max: i64) -> Result<Grid> {
    if n_min > n_max {
        return Err(Error::Malformed(format!("empty window [{n_min}, {n_max}]")));
    }
    let (knots, tail_slope) = match f_cap {
        ConcaveFn::PiecewiseLinear { .. } => (f_cap.knots(), f_cap.asymptotic_slope()),
        ConcaveFn::Power { alpha } if alpha.0.is_one() => (vec![(int(0), int(0))], int(1)),
        _ => {
            return Err(Error::Unsupported(
                "exact grid inversion needs a piecewise-linear F".into(),
            ))
        }
    };
    let mut points = Vec::with_capacity((n_max - n_min + 1) as usize);
    for n in n_min..=n_max {
        match invert(&knots, &tail_slope, &level(n)) {
            Some(a) => points.push(a),
            None => {
                let feasible = (n > n_min).then(|| (n_min, n - 1));
                return Err(Error::Window {
                    requested_min: n_min,
                    requested_max: n_max,
                    feasible,
                });
            }
        }
    }
    Ok(Grid { n_min, points })
}

/// A finite window of a sequence `κ_n ∈ ℕ ∪ {∞}`; `None` is `∞`, and every
/// index outside the window is `∞`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KappaSeq {
    pub n_min: i64,
    #[serde(with = "kappa_entries")]
    pub entries: Vec<Option<u64>>,
}

mod kappa_entries {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Option<u64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for e in v {
            match e {
                Some(k) => seq.serialize_element(k)?,
                None => seq.serialize_element("inf")?,
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Option<u64>>, D::Error> {
        d.deserialize_seq(EntriesVisitor)
    }

    struct EntriesVisitor;

    impl<'de> Visitor<'de> for EntriesVisitor {
        type Value = Vec<Option<u64>>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a list of positive integers or \"inf\"")
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(e) = seq.next_element::<Entry>()? {
                out.push(e.0);
            }
            Ok(out)
        }
    }

    struct Entry(Option<u64>);

    impl<'de> Deserialize<'de> for Entry {
        fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
            d.deserialize_any(EntryVisitor)
        }
    }

    struct EntryVisitor;

    impl<'de> Visitor<'de> for EntryVisitor {
        type Value = Entry;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a positive integer or \"inf\"")
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Entry, E> {
            if v == 0 {
                return Err(E::custom("κ entries start at 1"));
            }
            Ok(Entry(Some(v)))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Entry, E> {
            if v < 1 {
                return Err(E::custom("κ entries start at 1"));
            }
            Ok(Entry(Some(v as u64)))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Entry, E> {
            if v == "inf" {
                Ok(Entry(None))
            } else {
                Err(E::custom(format!("expected \"inf\", got {v:?}")))
            }
        }
    }
}

fn ext_min(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn ext_max(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}

fn ext_le(a: Option<u64>, b: Option<u64>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}

impl KappaSeq {
    pub fn new(n_min: i64, entries: Vec<Option<u64>>) -> Result<Self> {
        if entries.iter().any(|e| *e == Some(0)) {
            return Err(Error::Malformed("κ entries start at 1".into()));
        }
        Ok(KappaSeq { n_min, entries })
    }

    pub fn infinite(n_min: i64, n_max: i64) -> Self {
        KappaSeq {
            n_min,
            entries: vec![None; (n_max - n_min + 1).max(0) as usize],
        }
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.entries.len() as i64 - 1
    }

    pub fn get(&self, n: i64) -> Option<u64> {
        if n < self.n_min || n > self.n_max() {
            return None;
        }
        self.entries[(n - self.n_min) as usize]
    }

    pub fn is_all_infinite(&self) -> bool {
        self.entries.iter().all(Option::is_none)
    }

    fn zip_with(&self, other: &KappaSeq, op: impl Fn(Option<u64>, Option<u64>) -> Option<u64>) -> KappaSeq {
        let lo = self.n_min.min(other.n_min);
        let hi = self.n_max().max(other.n_max());
        KappaSeq {
            n_min: lo,
            entries: (lo..=hi).map(|n| op(self.get(n), other.get(n))).collect(),
        }
    }

    /// Pointwise minimum `κ ∧ κ'`.
    pub fn meet(&self, other: &KappaSeq) -> KappaSeq {
        self.zip_with(other, ext_min)
    }

    /// Pointwise maximum `κ ∨ κ'`.
    pub fn join(&self, other: &KappaSeq) -> KappaSeq {
        self.zip_with(other, ext_max)
    }

    /// Lattice order `κ ≤ κ'`.
    pub fn le(&self, other: &KappaSeq) -> bool {
        let lo = self.n_min.min(other.n_min);
        let hi = self.n_max().max(other.n_max());
        (lo..=hi).all(|n| ext_le(self.get(n), other.get(n)))
    }

    /// `κ^[r]`: entries below `r` become `∞`.
    pub fn suppress(&self, r: u64) -> KappaSeq {
        KappaSeq {
            n_min: self.n_min,
            entries: self
                .entries
                .iter()
                .map(|e| e.filter(|k| *k >= r))
                .collect(),
        }
    }

    /// Restriction to the indices of one parity (the rest set to `∞`).
    pub fn parity_part(&self, odd: bool) -> KappaSeq {
        KappaSeq {
            n_min: self.n_min,
            entries: self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| if ((self.n_min + i as i64).rem_euclid(2) == 1) == odd { *e } else { None })
                .collect(),
        }
    }

    /// No two consecutive finite entries.
    pub fn is_sparse(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].is_none() || w[1].is_none())
    }

    /// Checks `1 ≤ κ_n < a_{n+1}/a_n` for every finite entry.
    pub fn check_against(&self, grid: &Grid) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            let n = self.n_min + i as i64;
            if let Some(k) = e {
                let an = grid.a(n)?;
                let next = grid.a(n + 1)?;
                if *k == 0 || Rational::from_integer((*k).into()) * an >= *next {
                    return Err(Error::Precondition(format!(
                        "κ_{n} = {k} violates 1 ≤ κ_n < a_{{n+1}}/a_n = {}",
                        next / an
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything produced while building `ψ_κ`.
#[derive(Debug, Clone)]
pub struct PsiKappa {
    /// `ψ_κ`, decreasing and nonnegative on the half-line.
    pub psi: StepFunction,
    /// `Ψ_κ = ∫_0^t ψ_κ`.
    pub big_psi: ConcaveFn,
    /// `F = ∫_0^t f*`.
    pub big_f: ConcaveFn,
    /// `a_n` for `n ∈ [n_min, n_max + 1]`.
    pub grid: Grid,
    pub constraints: ConstraintSet,
}

fn derivative(g: &ConcaveFn) -> Result<StepFunction> {
    let knots = g.knots();
    let mut bps = Vec::with_capacity(knots.len());
    let mut vals = Vec::with_capacity(knots.len());
    for w in knots.windows(2) {
        bps.push(w[1].0.clone());
        vals.push((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0));
    }
    StepFunction::new(Domain::HalfLine, bps, vals, g.asymptotic_slope())
}

fn check_decreasing(f: &StepFunction) -> Result<()> {
    if f.domain() != Domain::HalfLine {
        return Err(Error::DomainMismatch("ψ_κ is built on the half-line".into()));
    }
    if !f.is_decreasing() || !f.is_nonnegative() {
        return Err(Error::Precondition("f must be nonnegative and decreasing".into()));
    }
    Ok(())
}

/// Builds `ψ_κ` together with its primitive, the grid and the constraints.
pub fn psi_kappa_full(f: &StepFunction, kappa: &KappaSeq) -> Result<PsiKappa> {
    check_decreasing(f)?;
    if kappa.entries.is_empty() {
        return Err(Error::Malformed("κ has an empty window".into()));
    }
    let big_f = hardy_primitive(f)?;
    let grid = breakpoint_grid(&big_f, kappa.n_min, kappa.n_max() + 1)?;
    kappa.check_against(&grid)?;
    let mut alpha = Vec::with_capacity(kappa.entries.len());
    let mut beta = Vec::with_capacity(kappa.entries.len());
    for (i, e) in kappa.entries.iter().enumerate() {
        let an = &grid.points[i];
        match e {
            Some(k) => {
                alpha.push(Rational::from_integer((*k).into()) * an);
                beta.push(level(kappa.n_min + i as i64));
            }
            None => {
                alpha.push(an.clone());
                beta.push(Rational::zero());
            }
        }
    }
    let constraints = ConstraintSet::new(kappa.n_min, alpha, beta, big_f.clone())?;
    let big_psi = least_concave_majorant(&constraints)?;
    let psi = derivative(&big_psi)?;
    Ok(PsiKappa {
        psi,
        big_psi,
        big_f,
        grid,
        constraints,
    })
}

/// `ψ_κ = Ψ_κ'` for a decreasing `f` whose primitive reaches every level of
/// the window.
pub fn psi_kappa(f: &StepFunction, kappa: &KappaSeq) -> Result<StepFunction> {
    psi_kappa_full(f, kappa).map(|p| p.psi)
}

/// `γ^p` (or `γ^{p,q}` when `q` is given) on the window `[n_min, n_max − 1]`
/// of the grid: `p` where `p·a_n < a_{n+1}` (and `|n| ≤ q`), else `∞`.
pub fn gamma_families(grid: &Grid, p: u64, q: Option<u64>) -> Result<KappaSeq> {
    if p == 0 {
        return Err(Error::Precondition("p must be at least 1".into()));
    }
    if grid.points.len() < 2 {
        return Err(Error::Malformed("grid needs at least two points".into()));
    }
    let pr = Rational::from_integer(p.into());
    let entries = grid
        .points
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let n = grid.n_min + i as i64;
            let in_range = q.map_or(true, |q| n.unsigned_abs() <= q);
            (in_range && &pr * &w[0] < w[1]).then_some(p)
        })
        .collect();
    KappaSeq::new(grid.n_min, entries)
}

fn exact(c: &ConcaveFn, t: &Rational) -> Rational {
    c.eval_exact(t).expect("piecewise-linear functions evaluate exactly")
}

/// Checks `F(t) ≤ (4/5)F(p²t) + (5/4)∫_0^{p²t} ψ_p` where `ψ_p = ψ_{γ^p}` is
/// built on the window `[n_min, n_max]`.
///
/// Both sides are piecewise affine in `t`, so the check runs exactly at
/// every knot of either side inside the safe interior
/// `[a_{n_min+2}, a_{n_max−2}]`, its endpoints, and the given samples.
pub fn verify_311(f: &StepFunction, p: u64, n_min: i64, n_max: i64, samples: &[Rational]) -> Result<Verdict> {
    check_decreasing(f)?;
    if f.is_zero() {
        return Ok(Verdict::holds().with_note("f = 0: both sides vanish"));
    }
    if n_max - n_min < 4 {
        return Err(Error::Malformed("the window must span at least five indices".into()));
    }
    let big_f = hardy_primitive(f)?;
    let grid = breakpoint_grid(&big_f, n_min, n_max + 1)?;
    let gamma = gamma_families(&grid, p, None)?;
    let built = psi_kappa_full(f, &gamma)?;
    let lo = grid.a(n_min + 2)?.clone();
    let hi = grid.a(n_max - 2)?.clone();
    for s in samples {
        if *s < lo || *s > hi {
            return Err(Error::OutOfDomain(format!(
                "sample {s} outside the safe interior [{lo}, {hi}]"
            )));
        }
    }
    let p2 = Rational::from_integer((p * p).into());
    let fp = Polyline {
        knots: big_f.knots(),
        tail_slope: big_f.asymptotic_slope(),
    };
    let mut ts: Vec<Rational> = vec![lo.clone(), hi.clone()];
    ts.extend(samples.iter().cloned());
    ts.extend(fp.knot_xs().cloned());
    ts.extend(fp.knot_xs().map(|x| x / &p2));
    ts.extend(built.big_psi.knots().into_iter().map(|(x, _)| x / &p2));
    ts.retain(|t| *t >= lo && *t <= hi);
    ts.sort();
    ts.dedup();
    let four_fifths = ratio(4, 5);
    let five_fourths = ratio(5, 4);
    for t in ts {
        let lhs = fp.eval(&t);
        let rhs = &four_fifths * fp.eval(&(&p2 * &t)) + &five_fourths * exact(&built.big_psi, &(&p2 * &t));
        if lhs > rhs {
            return Ok(Verdict::fails(Witness {
                location: Location::Point(RationalRepr(t)),
                lhs: RationalRepr(lhs),
                rhs: RationalRepr(rhs),
            }));
        }
    }
    Ok(Verdict::holds())
}

/// Checks `ψ_κ(t) ≥ 9F(a_n)/(25κ_n a_n)` on `[a_n, κ_n a_n]` for every finite
/// `κ_n`, given that no two consecutive entries are finite.
///
/// `ψ_κ` is decreasing, so the binding point is `κ_n a_n`, where the
/// right-closed value is the left derivative of `Ψ_κ`; the check also runs
/// at `a_n` and at every knot in between.
pub fn verify_38(f: &StepFunction, kappa: &KappaSeq) -> Result<Verdict> {
    if !kappa.is_sparse() {
        return Err(Error::Precondition("κ has two consecutive finite entries".into()));
    }
    let built = psi_kappa_full(f, kappa)?;
    for (i, e) in kappa.entries.iter().enumerate() {
        let Some(k) = e else { continue };
        let n = kappa.n_min + i as i64;
        let an = built.grid.a(n)?;
        let kr = Rational::from_integer((*k).into());
        let end = &kr * an;
        let bound = ratio(9, 25) * level(n) / (&kr * an);
        let mut ts: Vec<Rational> = vec![an.clone(), end.clone()];
        ts.extend(
            built
                .psi
                .breakpoints()
                .iter()
                .filter(|t| *t > an && **t < end)
                .cloned(),
        );
        for t in ts {
            let v = built.psi.eval(&t);
            if v < bound {
                return Ok(Verdict::fails(Witness {
                    location: Location::Point(RationalRepr(t)),
                    lhs: RationalRepr(bound),
                    rhs: RationalRepr(v),
                }));
            }
        }
    }
    Ok(Verdict::holds())
}

/// Per-index outcome of [`check_310`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check310 {
    /// `r = 36p`.
    pub r: u64,
    /// Indices `n` with `κ^[r]_n < ∞`.
    pub indices: Vec<i64>,
    pub verdict: Verdict,
}

/// With `r = 36p` and `v = 10(ψ_κ − h)`, checks
/// `F(a_n) ≤ ∫_0^{κ_n a_n} v*` at every `n` surviving the suppression
/// `κ^[r]`. Requires `0 ≤ h ≤ ψ_κ`, `h` decreasing and
/// `∫_{pa}^b h ≤ ∫_a^b f` for `0 < pa < b`.
pub fn check_310(f: &StepFunction, kappa: &KappaSeq, h: &StepFunction, p: u64) -> Result<Check310> {
    if !kappa.is_sparse() {
        return Err(Error::Precondition("κ has two consecutive finite entries".into()));
    }
    check_decreasing(h)?;
    let built = psi_kappa_full(f, kappa)?;
    if !h.le_pointwise(&built.psi) {
        return Err(Error::Precondition("h must lie below ψ_κ".into()));
    }
    let pr = Rational::from_integer(p.into());
    let mass = dilated_mass_check(&f.rearrange(), h, &pr)?;
    if !mass.holds {
        return Err(Error::Precondition(format!(
            "h violates the dilated mass condition at {:?}",
            mass.witness.map(|w| w.location)
        )));
    }
    let r = 36 * p;
    let v = combine(CombineOp::Sub, &built.psi, h)?.scale(&int(10));
    let suppressed = kappa.suppress(r);
    let mut indices = Vec::new();
    for (i, e) in suppressed.entries.iter().enumerate() {
        let Some(k) = e else { continue };
        let n = kappa.n_min + i as i64;
        indices.push(n);
        let end = Rational::from_integer((*k).into()) * built.grid.a(n)?;
        let lhs = level(n);
        let rhs = v.hardy_integral(&end)?;
        if lhs > rhs {
            return Ok(Check310 {
                r,
                indices,
                verdict: Verdict::fails(Witness {
                    location: Location::Index(i),
                    lhs: RationalRepr(lhs),
                    rhs: RationalRepr(rhs),
                }),
            });
        }
    }
    Ok(Check310 {
        r,
        indices,
        verdict: Verdict::holds(),
    })
}

/// `G ≤ F` on `[0, ∞)`, checked at the knots of both and on the final ray.
pub fn dominated_by(g: &ConcaveFn, f: &ConcaveFn) -> bool {
    let mut ts: Vec<Rational> = g.knots().into_iter().chain(f.knots()).map(|k| k.0).collect();
    ts.sort();
    ts.dedup();
    ts.iter().all(|t| exact(g, t) <= exact(f, t)) && g.asymptotic_slope() <= f.asymptotic_slope()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorization::submajorizes;
    use proptest::prelude::*;

    fn linear(slope: i64) -> ConcaveFn {
        ConcaveFn::piecewise(vec![(int(0), int(0))], int(slope)).unwrap()
    }

    fn big() -> ConcaveFn {
        linear(1000)
    }

    fn one() -> StepFunction {
        StepFunction::constant(Domain::HalfLine, int(1))
    }

    #[test]
    fn single_constraint_majorant() {
        let c = ConstraintSet::new(0, vec![int(1)], vec![int(1)], linear(1)).unwrap();
        let g = least_concave_majorant(&c).unwrap();
        assert_eq!(g.knots(), vec![(int(0), int(0)), (int(1), int(1))]);
        assert_eq!(g.asymptotic_slope(), int(0));
        assert_eq!(g.eval_exact(&int(7)), Some(int(1)));
    }

    #[test]
    fn three_constraint_hull() {
        let c = ConstraintSet::new(0, vec![int(1), int(2), int(4)], vec![int(1), int(3), int(4)], big()).unwrap();
        let hull = majorant_vertices(&c).unwrap();
        let xs: Vec<_> = hull.iter().map(|v| v.x.clone()).collect();
        assert_eq!(xs, vec![int(0), int(2), int(4)]);
        assert_eq!(hull[1].index, Some(1));
        let g = least_concave_majorant(&c).unwrap();
        assert_eq!(g.eval_exact(&int(1)), Some(ratio(3, 2)));
    }

    #[test]
    fn zero_constraints_give_zero() {
        let c = ConstraintSet::new(-2, vec![int(1), int(2)], vec![int(0), int(0)], big()).unwrap();
        let g = least_concave_majorant(&c).unwrap();
        assert_eq!(g.knots(), vec![(int(0), int(0))]);
        assert_eq!(g.asymptotic_slope(), int(0));
    }

    #[test]
    fn constraint_above_envelope_rejected() {
        let err = ConstraintSet::new(0, vec![int(1)], vec![int(2)], linear(1)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn grid_inversion() {
        let g = breakpoint_grid(&linear(1), -3, 3).unwrap();
        for n in -3..=3 {
            assert_eq!(g.a(n).unwrap(), &level(n));
        }
        assert_eq!(g.a(0).unwrap(), &int(1));
        let g2 = breakpoint_grid(&linear(2), -2, 2).unwrap();
        for n in -2..=2 {
            assert_eq!(g2.a(n).unwrap(), &(level(n) / int(2)));
        }
        // F(a_0) = 1 for every F reaching level 1
        let f = StepFunction::new(Domain::HalfLine, vec![ratio(1, 3), int(2)], vec![int(2), ratio(1, 2)], ratio(1, 7))
            .unwrap();
        let big_f = hardy_primitive(&f).unwrap();
        let a0 = breakpoint_grid(&big_f, 0, 0).unwrap().points[0].clone();
        assert_eq!(f.primitive(&a0).unwrap(), int(1));
    }

    #[test]
    fn grid_window_error() {
        // F bounded by 2: (5/4)^n ≤ 2 iff n ≤ 3
        let f = StepFunction::indicator(Domain::HalfLine, int(0), int(2), int(1)).unwrap();
        let big_f = hardy_primitive(&f).unwrap();
        match breakpoint_grid(&big_f, -1, 6).unwrap_err() {
            Error::Window { feasible, .. } => assert_eq!(feasible, Some((-1, 3))),
            e => panic!("{e:?}"),
        }
        match breakpoint_grid(&big_f, 5, 6).unwrap_err() {
            Error::Window { feasible, .. } => assert_eq!(feasible, None),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn suppress_rule() {
        let k = KappaSeq::new(0, vec![Some(2), None, Some(5)]).unwrap();
        assert_eq!(k.suppress(1), k);
        assert_eq!(k.suppress(3).entries, vec![None, None, Some(5)]);
        assert!(k.suppress(6).is_all_infinite());
        assert!(k.le(&k.suppress(3)));
    }

    #[test]
    fn lattice_ops() {
        let a = KappaSeq::new(0, vec![Some(2), None]).unwrap();
        let b = KappaSeq::new(1, vec![Some(3), Some(1)]).unwrap();
        assert_eq!(a.meet(&b).entries, vec![Some(2), Some(3), Some(1)]);
        assert_eq!(a.join(&b).entries, vec![None, None, None]);
        assert!(a.meet(&b).le(&a) && a.meet(&b).le(&b));
        assert!(a.le(&a.join(&b)));
    }

    #[test]
    fn kappa_json() {
        let k = KappaSeq::new(-1, vec![Some(2), None]).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"n_min":-1,"entries":[2,"inf"]}"#);
        assert_eq!(serde_json::from_str::<KappaSeq>(&s).unwrap(), k);
        assert!(serde_json::from_str::<KappaSeq>(r#"{"n_min":0,"entries":[0]}"#).is_err());
        assert!(serde_json::from_str::<KappaSeq>(r#"{"n_min":0,"entries":[1.5]}"#).is_err());
    }

    #[test]
    fn gamma_for_constant_one() {
        let grid = breakpoint_grid(&linear(1), -4, 4).unwrap();
        let g2 = gamma_families(&grid, 2, None).unwrap();
        assert!(g2.is_all_infinite());
        let g1 = gamma_families(&grid, 1, None).unwrap();
        assert!(g1.entries.iter().all(|e| *e == Some(1)));
        let g1q = gamma_families(&grid, 1, Some(2)).unwrap();
        for n in -4..=3 {
            let expect = if n.abs() <= 2 { Some(1) } else { None };
            assert_eq!(g1q.get(n), expect);
        }
    }

    #[test]
    fn psi_all_infinite_is_zero() {
        let k = KappaSeq::infinite(-3, 3);
        assert!(psi_kappa(&one(), &k).unwrap().is_zero());
    }

    #[test]
    fn psi_all_one_interpolates() {
        let f = StepFunction::new(Domain::HalfLine, vec![int(1), int(4)], vec![int(3), int(1)], ratio(1, 4)).unwrap();
        let k = KappaSeq::new(-2, vec![Some(1); 6]).unwrap();
        let built = psi_kappa_full(&f, &k).unwrap();
        for n in -2..=3 {
            let an = built.grid.a(n).unwrap();
            assert_eq!(exact(&built.big_psi, an), f.primitive(an).unwrap());
        }
        assert!(submajorizes(&built.psi, &f).unwrap().holds);
    }

    #[test]
    fn psi_two_point_window() {
        let k = KappaSeq::new(0, vec![Some(1), None]).unwrap();
        let psi = psi_kappa(&one(), &k).unwrap();
        // Ψ = min(t, 1): ψ = χ_(0,1]
        assert_eq!(psi, StepFunction::indicator(Domain::HalfLine, int(0), int(1), int(1)).unwrap());
        assert!(submajorizes(&psi, &one()).unwrap().holds);
    }

    #[test]
    fn kappa_out_of_range_rejected() {
        // a_{n+1}/a_n = 5/4 for f ≡ 1, so κ_n = 2 is not allowed
        let k = KappaSeq::new(0, vec![Some(2)]).unwrap();
        assert!(matches!(psi_kappa(&one(), &k), Err(Error::Precondition(_))));
    }

    #[test]
    fn dilated_inequality_constant_one() {
        let samples: Vec<Rational> = (0..20).map(|i| ratio(1, 2) + ratio(i, 7)).collect();
        let v = verify_311(&one(), 2, -6, 8, &samples).unwrap();
        assert!(v.holds, "{v:?}");
        assert!(verify_311(&StepFunction::zero(Domain::HalfLine), 3, 0, 5, &[]).unwrap().holds);
        assert!(matches!(verify_311(&one(), 2, -6, 8, &[int(1000)]), Err(Error::OutOfDomain(_))));
    }

    /// A slowly growing primitive: long stretches where `a_{n+1}/a_n` is big.
    fn staircase() -> StepFunction {
        StepFunction::new(
            Domain::HalfLine,
            vec![int(1), int(2), int(40), int(41), int(2000)],
            vec![int(1), ratio(1, 100), ratio(1, 200), ratio(1, 1000), ratio(1, 10_000)],
            ratio(1, 100_000),
        )
        .unwrap()
    }

    #[test]
    fn dilated_inequality_with_wide_gaps() {
        let f = staircase();
        for p in [1, 2, 3, 5, 9] {
            let v = verify_311(&f, p, -3, 6, &[]).unwrap();
            assert!(v.holds, "p = {p}: {v:?}");
        }
    }

    #[test]
    fn kappa_bound_on_sparse_kappa() {
        let f = staircase();
        let big_f = hardy_primitive(&f).unwrap();
        let grid = breakpoint_grid(&big_f, -3, 7).unwrap();
        let mut entries = vec![None; 10];
        for n in (-3..7).step_by(2) {
            let ratio_n = grid.a(n + 1).unwrap() / grid.a(n).unwrap();
            let cap = (ratio_n.ceil().to_integer() - 1u32).try_into().unwrap_or(1u64).max(1);
            entries[(n + 3) as usize] = Some(cap);
        }
        let k = KappaSeq::new(-3, entries).unwrap();
        assert!(verify_38(&f, &k).unwrap().holds);
        let dense = KappaSeq::new(0, vec![Some(1), Some(1)]).unwrap();
        assert!(verify_38(&f, &dense).is_err());
    }

    #[test]
    fn certificate_with_zero_h() {
        let f = staircase();
        let big_f = hardy_primitive(&f).unwrap();
        let grid = breakpoint_grid(&big_f, -2, 6).unwrap();
        let entries: Vec<Option<u64>> = (-2..6)
            .map(|n| {
                let r = grid.a(n + 1).unwrap() / grid.a(n).unwrap();
                (n % 2 == 0 && r > int(37)).then_some(37)
            })
            .collect();
        let k = KappaSeq::new(-2, entries).unwrap();
        let out = check_310(&f, &k, &StepFunction::zero(Domain::HalfLine), 1).unwrap();
        assert_eq!(out.r, 36);
        assert!(!out.indices.is_empty());
        assert!(out.verdict.holds);
    }

    // ---- property tests ----

    /// Decreasing positive step function with a positive tail, so that the
    /// primitive is unbounded.
    fn arb_f() -> impl Strategy<Value = StepFunction> {
        prop::collection::vec((1i64..6, 1i64..12), 1..5).prop_map(|pieces| {
            let mut t = int(0);
            let mut v = int(64);
            let mut bps = Vec::new();
            let mut vals = Vec::new();
            for (w, d) in pieces {
                t += int(w * w);
                v = &v / int(d);
                bps.push(t.clone());
                vals.push(v.clone());
            }
            let tail = &v / int(3);
            StepFunction::new(Domain::HalfLine, bps, vals, tail).unwrap()
        })
    }

    const LO: i64 = -4;
    const HI: i64 = 12;

    fn grid_for(f: &StepFunction) -> Grid {
        breakpoint_grid(&hardy_primitive(f).unwrap(), LO, HI + 1).unwrap()
    }

    /// Maps raw choices to an admissible κ on the grid.
    fn kappa_from(grid: &Grid, raw: &[Option<u64>]) -> KappaSeq {
        let entries = (LO..=HI)
            .zip(raw)
            .map(|(n, r)| {
                r.and_then(|r| {
                    let q = grid.a(n + 1).unwrap() / grid.a(n).unwrap();
                    let cap: u64 = (q.ceil().to_integer() - 1u32).try_into().unwrap_or(u64::MAX);
                    (cap >= 1).then(|| 1 + r % cap)
                })
            })
            .collect();
        KappaSeq::new(LO, entries).unwrap()
    }

    fn arb_raw() -> impl Strategy<Value = Vec<Option<u64>>> {
        prop::collection::vec(prop::option::of(0u64..1000), (HI - LO + 1) as usize)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn majorant_structure(pts in prop::collection::vec((1i64..20, 0i64..30), 1..8)) {
            let mut xs: Vec<i64> = pts.iter().map(|p| p.0).collect();
            xs.sort();
            xs.dedup();
            let alpha: Vec<Rational> = xs.iter().map(|&x| int(x)).collect();
            let beta: Vec<Rational> = pts.iter().take(alpha.len()).map(|p| int(p.1)).collect();
            let c = ConstraintSet::new(0, alpha.clone(), beta.clone(), big()).unwrap();
            let g = least_concave_majorant(&c).unwrap();
            // majorizes, stays below the envelope
            for (a, b) in alpha.iter().zip(&beta) {
                prop_assert!(exact(&g, a) >= *b);
            }
            prop_assert!(dominated_by(&g, &big()));
            // every vertex other than the origin is a touching constraint
            for v in majorant_vertices(&c).unwrap() {
                if let Some(m) = v.index {
                    prop_assert_eq!(&beta[m as usize], &v.y);
                }
            }
            // each affine piece ending at α_n starts at the origin or at a
            // touching α_m, m < n
            for (n, a) in alpha.iter().enumerate() {
                let gn = exact(&g, a);
                let through_origin = (1..=4).all(|k| {
                    let t = a * ratio(k, 5);
                    exact(&g, &t) == &gn * &t / a
                });
                let from_touching = (0..n).any(|m| {
                    exact(&g, &alpha[m]) == beta[m]
                        && (1..=4).all(|k| {
                            let t = &alpha[m] + (a - &alpha[m]) * ratio(k, 5);
                            exact(&g, &t) == &beta[m] + (&gn - &beta[m]) * (&t - &alpha[m]) / (a - &alpha[m])
                        })
                });
                prop_assert!(through_origin || from_touching);
            }
        }

        #[test]
        fn psi_below_f(f in arb_f(), raw in arb_raw()) {
            let grid = grid_for(&f);
            let k = kappa_from(&grid, &raw);
            let built = psi_kappa_full(&f, &k).unwrap();
            prop_assert!(dominated_by(&built.big_psi, &built.big_f));
            prop_assert!(submajorizes(&built.psi, &f).unwrap().holds);
            prop_assert!(built.psi.is_decreasing());
        }

        #[test]
        fn psi_monotone_in_kappa(f in arb_f(), raw in arb_raw(), raw2 in arb_raw()) {
            let grid = grid_for(&f);
            let k1 = kappa_from(&grid, &raw);
            let k2 = kappa_from(&grid, &raw2);
            let lo = k1.meet(&k2);
            // κ' ≤ κ ⇒ ψ_κ ≼ ψ_κ'
            let p_hi = psi_kappa(&f, &k1).unwrap();
            let p_lo = psi_kappa(&f, &lo).unwrap();
            prop_assert!(submajorizes(&p_hi, &p_lo).unwrap().holds);
        }

        #[test]
        fn psi_meet_below_max(f in arb_f(), raw in arb_raw(), raw2 in arb_raw()) {
            let grid = grid_for(&f);
            let k1 = kappa_from(&grid, &raw);
            let k2 = kappa_from(&grid, &raw2);
            let p1 = psi_kappa(&f, &k1).unwrap();
            let p2 = psi_kappa(&f, &k2).unwrap();
            let pm = psi_kappa(&f, &k1.meet(&k2)).unwrap();
            let mx = combine(CombineOp::Max, &p1, &p2).unwrap();
            prop_assert!(submajorizes(&pm, &mx).unwrap().holds);
        }

        #[test]
        fn suppression_monotone(f in arb_f(), raw in arb_raw(), r1 in 1u64..6, dr in 0u64..6) {
            let grid = grid_for(&f);
            let k = kappa_from(&grid, &raw);
            let r2 = r1 + dr;
            let a = psi_kappa(&f, &k.suppress(r2)).unwrap();
            let b = psi_kappa(&f, &k.suppress(r1)).unwrap();
            prop_assert!(k.suppress(r1).le(&k.suppress(r2)));
            prop_assert!(submajorizes(&a, &b).unwrap().holds);
        }

        #[test]
        fn kappa_bound_holds_on_parity_parts(f in arb_f(), raw in arb_raw(), odd in any::<bool>()) {
            let grid = grid_for(&f);
            let k = kappa_from(&grid, &raw).parity_part(odd);
            prop_assert!(verify_38(&f, &k).unwrap().holds);
        }

        #[test]
        fn dilated_inequality_random(f in arb_f(), p in 1u64..12) {
            let v = verify_311(&f, p, LO, HI, &[]).unwrap();
            prop_assert!(v.holds, "{:?}", v);
        }
    }
}
