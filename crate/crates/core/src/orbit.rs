//! Orbits `Ω(f) = {g : g ≼ f}`, their extreme points, finite convex
//! decompositions into partial permutations, and the dilation profiles that
//! decide whether the orbit equals the closed convex hull of its extreme
//! points.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorization::{
    dilated_mass_check, submajorizes, submajorizes_element, submajorizes_seq, Element, Location, Verdict,
    Witness,
};
use crate::rational::{self, int, pow2, ratio, Rational, RationalRepr};
use crate::spaces::{norm_of, ConcaveFn, Family, NormValue, OrliczFn, SpaceDomain, SpaceSpec};
use crate::stepfn::{combine, embed_sequence, CombineOp, Domain, SeqVector, StepFunction};

/// Dimension bound for [`decompose_finite`] unless configured otherwise.
pub const DEFAULT_DIMENSION_BOUND: usize = 64;

/// `g ∈ Ω(f)`.
pub fn orbit_member(g: &Element, f: &Element) -> Result<Verdict> {
    submajorizes_element(g, f)
}

fn ess_inf_abs(f: &StepFunction) -> Rational {
    f.values()
        .iter()
        .chain(std::iter::once(f.tail()))
        .map(|v| v.abs())
        .min()
        .expect("the tail is always present")
}

/// `g` is an extreme point of `Ω(f)`: `g* = f*`, and on the half-line, when
/// `L_∞ ⊆ E`, additionally `|g| ≥ lim_{s→∞} f*(s)` almost everywhere.
pub fn extreme_point_check(g: &Element, f: &Element, space: &SpaceSpec) -> Result<bool> {
    match (g, f) {
        (Element::Sequence(g), Element::Sequence(f)) => Ok(g.rearrange() == f.rearrange()),
        (Element::Function(g), Element::Function(f)) => {
            if g.domain() != f.domain() {
                return Err(Error::DomainMismatch("g and f live on different domains".into()));
            }
            let fs = f.rearrange();
            if g.rearrange() != fs {
                return Ok(false);
            }
            if f.domain() == Domain::HalfLine && space.domain == SpaceDomain::HalfLine && space.contains_linf() {
                return Ok(ess_inf_abs(g) >= *fs.tail());
            }
            Ok(true)
        }
        _ => Err(Error::DomainMismatch("cannot compare a function with a sequence".into())),
    }
}

/// Outcome of [`q_certificate_verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `∫_{pa}^b h ≤ ∫_a^b f` for all `0 < pa < b`.
    pub verdict: Verdict,
    /// `‖g − h‖_E`, when a space was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<NormValue>,
}

/// Verifies a pair `(h, p)` approximating `g` inside the orbit hull of `f`:
/// `0 ≤ h ≤ g` pointwise and the dilated mass inequality, exactly.
pub fn q_certificate_verify(
    f: &StepFunction,
    g: &StepFunction,
    h: &StepFunction,
    p: &Rational,
    space: Option<&SpaceSpec>,
) -> Result<CertificateReport> {
    for (name, x) in [("f", f), ("g", g), ("h", h)] {
        if x.domain() != Domain::HalfLine {
            return Err(Error::DomainMismatch(format!("{name} must live on the half-line")));
        }
        if !x.is_decreasing() || !x.is_nonnegative() {
            return Err(Error::Precondition(format!("{name} must be nonnegative and decreasing")));
        }
    }
    if let Some(t) = first_excess(h, g) {
        return Err(Error::Precondition(format!(
            "h exceeds g at t = {t}: h(t) = {}, g(t) = {}",
            h.eval(&t),
            g.eval(&t)
        )));
    }
    let verdict = dilated_mass_check(f, h, p)?;
    let distance = match space {
        Some(e) => Some(norm_of(e, &combine(CombineOp::Sub, g, h)?)?),
        None => None,
    };
    Ok(CertificateReport { verdict, distance })
}

/// Some point where `h > g`, if any.
fn first_excess(h: &StepFunction, g: &StepFunction) -> Option<Rational> {
    let d = combine(CombineOp::Sub, h, g).ok()?;
    for p in d.pieces() {
        if p.value.is_positive() {
            return Some(p.end);
        }
    }
    d.tail().is_positive().then(|| d.last_breakpoint() + int(1))
}

// ---------------------------------------------------------------------------
// finite decompositions

/// Output `i` of an atom takes `±ξ_source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub source: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negate: bool,
}

/// A signed partial permutation: each output coordinate copies a distinct
/// source coordinate (possibly negated) or is zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartialPermutation {
    pub entries: Vec<Option<Assignment>>,
}

impl PartialPermutation {
    pub fn identity(n: usize) -> Self {
        PartialPermutation {
            entries: (0..n)
                .map(|i| Some(Assignment {
                    source: i,
                    negate: false,
                }))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for a in self.entries.iter().flatten() {
            if a.source >= n {
                return Err(Error::Malformed(format!("source {} out of range {n}", a.source)));
            }
            if std::mem::replace(&mut seen[a.source], true) {
                return Err(Error::Malformed(format!("source {} used twice", a.source)));
            }
        }
        Ok(())
    }

    /// `Aξ`, with `ξ` zero beyond its support.
    pub fn apply(&self, xi: &SeqVector) -> SeqVector {
        SeqVector::new(
            self.entries
                .iter()
                .map(|e| match e {
                    Some(a) => {
                        let v = xi.get(a.source);
                        if a.negate {
                            -v
                        } else {
                            v
                        }
                    }
                    None => Rational::zero(),
                })
                .collect(),
        )
    }
}

/// `η = Σ_i w_i A_i ξ` with positive weights summing to 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvexCombination {
    pub weights: Vec<RationalRepr>,
    pub atoms: Vec<PartialPermutation>,
}

impl ConvexCombination {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.atoms.len() || self.atoms.is_empty() {
            return Err(Error::Malformed("weights and atoms must pair up and be nonempty".into()));
        }
        if self.weights.iter().any(|w| !w.0.is_positive()) {
            return Err(Error::Malformed("weights must be positive".into()));
        }
        let total: Rational = self.weights.iter().map(|w| &w.0).sum();
        if !total.is_one() {
            return Err(Error::Malformed(format!("weights sum to {total}, not 1")));
        }
        let n = self.atoms[0].len();
        for a in &self.atoms {
            if a.len() != n {
                return Err(Error::Malformed("atoms have different lengths".into()));
            }
            a.validate(n)?;
        }
        Ok(())
    }
}

/// `Σ_i w_i A_i ξ`.
pub fn reconstruct(cert: &ConvexCombination, xi: &SeqVector) -> Result<SeqVector> {
    cert.validate()?;
    let n = cert.atoms[0].len();
    if xi.len() > n {
        return Err(Error::Malformed(format!(
            "atoms act on length {n} but ξ has length {}",
            xi.len()
        )));
    }
    let mut acc = vec![Rational::zero(); n];
    for (w, a) in cert.weights.iter().zip(&cert.atoms) {
        for (slot, v) in acc.iter_mut().zip(a.apply(xi).padded(n)) {
            *slot += &w.0 * v;
        }
    }
    Ok(SeqVector::new(acc))
}

/// Sorting permutation of `|v|` (decreasing, stable) and the signs.
fn sort_abs(v: &[Rational]) -> (Vec<usize>, Vec<bool>, Vec<Rational>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().cmp(&v[a].abs()));
    let neg = idx.iter().map(|&i| v[i].is_negative()).collect();
    let vals = idx.iter().map(|&i| v[i].abs()).collect();
    (idx, neg, vals)
}

/// `c` with `Σ max(η_i, c) = total`, for decreasing nonnegative `η` and
/// `Σ η ≤ total`.
fn water_level(eta: &[Rational], total: &Rational) -> Rational {
    let n = eta.len();
    let mut head = Rational::zero();
    for k in 0..n {
        // raise η_k, …, η_{n−1} to a common level c ≥ η_k
        let c = (total - &head) / int((n - k) as i64);
        if c >= eta[k] {
            return c;
        }
        head += &eta[k];
    }
    unreachable!("the deficit is nonnegative")
}

/// Doubly stochastic `D` with `D ξ = u` for decreasing `ξ`, `u ≺ ξ`, built
/// from at most `n − 1` two-coordinate averagings.
fn t_transform_chain(xi: &[Rational], u: &[Rational]) -> Vec<Vec<Rational>> {
    let n = xi.len();
    let mut d: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { int(1) } else { int(0) }).collect())
        .collect();
    let mut x = xi.to_vec();
    for _ in 0..n {
        let Some(j) = (0..n).rev().find(|&j| x[j] > u[j]) else { break };
        let k = (j + 1..n).find(|&k| x[k] < u[k]).expect("equal sums force a deficit after an excess");
        let delta = (&x[j] - &u[j]).min(&u[k] - &x[k]);
        let lambda = int(1) - &delta / (&x[j] - &x[k]);
        let mu = int(1) - &lambda;
        x[j] -= &delta;
        x[k] += &delta;
        let (rj, rk) = (d[j].clone(), d[k].clone());
        for c in 0..n {
            d[j][c] = &lambda * &rj[c] + &mu * &rk[c];
            d[k][c] = &mu * &rj[c] + &lambda * &rk[c];
        }
    }
    debug_assert_eq!(x, u);
    d
}

/// Perfect matching row → column on the positive support.
fn perfect_matching(d: &[Vec<Rational>]) -> Option<Vec<usize>> {
    let n = d.len();
    let mut col_of_row = vec![usize::MAX; n];
    let mut row_of_col = vec![usize::MAX; n];
    fn augment(
        r: usize,
        d: &[Vec<Rational>],
        seen: &mut [bool],
        col_of_row: &mut [usize],
        row_of_col: &mut [usize],
    ) -> bool {
        for c in 0..d.len() {
            if d[r][c].is_positive() && !seen[c] {
                seen[c] = true;
                if row_of_col[c] == usize::MAX || augment(row_of_col[c], d, seen, col_of_row, row_of_col) {
                    col_of_row[r] = c;
                    row_of_col[c] = r;
                    return true;
                }
            }
        }
        false
    }
    for r in 0..n {
        let mut seen = vec![false; n];
        if !augment(r, d, &mut seen, &mut col_of_row, &mut row_of_col) {
            return None;
        }
    }
    Some(col_of_row)
}

/// Birkhoff-von Neumann: `D = Σ w_k P_k`.
fn birkhoff(mut d: Vec<Vec<Rational>>) -> Result<Vec<(Rational, Vec<usize>)>> {
    let mut out = Vec::new();
    loop {
        if d.iter().all(|row| row.iter().all(Zero::is_zero)) {
            return Ok(out);
        }
        let m = perfect_matching(&d)
            .ok_or_else(|| Error::Numeric("support of a doubly stochastic matrix lost its matching".into()))?;
        let w = m
            .iter()
            .enumerate()
            .map(|(r, &c)| d[r][c].clone())
            .min()
            .expect("nonempty");
        for (r, &c) in m.iter().enumerate() {
            d[r][c] -= &w;
        }
        out.push((w, m));
    }
}

/// Drops assignments from zero sources, reassigns sources within classes of
/// equal `ξ*` values in increasing output order, then merges equal atoms.
fn canonicalize(parts: Vec<(Rational, Vec<Option<usize>>)>, xs: &[Rational]) -> Vec<(Rational, Vec<Option<usize>>)> {
    let mut merged: std::collections::BTreeMap<Vec<Option<usize>>, Rational> = Default::default();
    for (w, mut a) in parts {
        for e in a.iter_mut() {
            if e.map_or(false, |s| xs[s].is_zero()) {
                *e = None;
            }
        }
        let mut classes: std::collections::BTreeMap<RationalRepr, Vec<usize>> = Default::default();
        for e in a.iter().flatten() {
            classes.entry(RationalRepr(xs[*e].clone())).or_default().push(*e);
        }
        for sources in classes.values_mut() {
            sources.sort_unstable();
            sources.reverse();
        }
        for e in a.iter_mut() {
            if let Some(s) = e {
                *s = classes.get_mut(&RationalRepr(xs[*s].clone())).unwrap().pop().unwrap();
            }
        }
        *merged.entry(a).or_insert_with(Rational::zero) += w;
    }
    merged.into_iter().map(|(a, w)| (w, a)).collect()
}

/// Exact convex decomposition of `η` over partial permutations of `ξ`,
/// given `η ≼ ξ`; the dimension is bounded by [`DEFAULT_DIMENSION_BOUND`].
pub fn decompose_finite(xi: &SeqVector, eta: &SeqVector) -> Result<ConvexCombination> {
    decompose_finite_bounded(xi, eta, DEFAULT_DIMENSION_BOUND)
}

pub fn decompose_finite_bounded(xi: &SeqVector, eta: &SeqVector, bound: usize) -> Result<ConvexCombination> {
    let n = xi.len().max(eta.len()).max(1);
    if n > bound {
        return Err(Error::TooLarge { got: n, bound });
    }
    let v = submajorizes_seq(eta, xi);
    if !v.holds {
        let at = match v.witness.as_ref().map(|w| &w.location) {
            Some(Location::Index(k)) => format!(" at index {k}"),
            _ => String::new(),
        };
        return Err(Error::OrderViolation(format!("η is not submajorized by ξ{at}")));
    }
    let (xi_idx, xi_neg, xs) = sort_abs(&xi.padded(n));
    let (eta_idx, eta_neg, es) = sort_abs(&eta.padded(n));

    let total: Rational = xs.iter().sum();
    let deficit_free = es.iter().sum::<Rational>() == total;
    let u: Vec<Rational> = if deficit_free || total.is_zero() {
        es.clone()
    } else {
        let c = water_level(&es, &total);
        es.iter().map(|e| e.clone().max(c.clone())).collect()
    };

    let perms = if u == xs {
        vec![(int(1), (0..n).collect::<Vec<_>>())]
    } else if total.is_zero() {
        vec![(int(1), (0..n).collect())]
    } else {
        birkhoff(t_transform_chain(&xs, &u))?
    };

    // layer cake of the diagonal η*/u
    let r: Vec<Rational> = es
        .iter()
        .zip(&u)
        .map(|(e, ui)| if ui.is_zero() { int(1) } else { e / ui })
        .collect();
    let mut levels: Vec<Rational> = r.iter().filter(|x| x.is_positive()).cloned().collect();
    levels.push(int(1));
    levels.sort_by(|a, b| b.cmp(a));
    levels.dedup();
    let mut layers: Vec<(Rational, Vec<bool>)> = Vec::new();
    for (k, lv) in levels.iter().enumerate() {
        let next = levels.get(k + 1).cloned().unwrap_or_else(Rational::zero);
        let w = lv - &next;
        if w.is_positive() {
            layers.push((w, r.iter().map(|x| x >= lv).collect()));
        }
    }
    let top = &levels[0];
    if top < &int(1) {
        layers.push((int(1) - top, vec![false; n]));
    }

    let mut parts = Vec::new();
    for (pw, p) in &perms {
        for (lw, mask) in &layers {
            let atom: Vec<Option<usize>> = (0..n).map(|i| mask[i].then_some(p[i])).collect();
            parts.push((pw * lw, atom));
        }
    }
    let parts = canonicalize(parts, &xs);

    // back to the caller's coordinates and signs
    let mut weights = Vec::with_capacity(parts.len());
    let mut atoms = Vec::with_capacity(parts.len());
    for (w, a) in parts {
        let mut entries = vec![None; n];
        for (k, e) in a.into_iter().enumerate() {
            if let Some(s) = e {
                entries[eta_idx[k]] = Some(Assignment {
                    source: xi_idx[s],
                    negate: eta_neg[k] != xi_neg[s],
                });
            }
        }
        weights.push(RationalRepr(w));
        atoms.push(PartialPermutation { entries });
    }
    let out = ConvexCombination { weights, atoms };
    out.validate()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// flatness

/// Which profile decides flatness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Half-line, `E ∖ L_1 ≠ ∅`: `τ^{-1}‖σ_τ f*‖_E`.
    Sz1,
    /// Half-line, `E ⊆ L_1`: `τ^{-1}‖(σ_τ f*)χ_(0,1)‖_E`.
    Sz2,
    /// Unit interval: `τ^{-1}‖σ_τ f*‖_E` with `σ_τ` cut at 1.
    Unit,
    /// Sequences, `E ∖ ℓ_1 ≠ ∅`: `m^{-1}‖σ_m ξ*‖_E` over integers `m`.
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatVerdict {
    Flat,
    NonFlat,
    Inconclusive,
}

/// Thresholds of the flatness semi-decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessConfig {
    /// `β` at the last grid point below this is flat.
    pub tol_flat: f64,
    /// Flat when every per-doubling ratio `β(2τ)/β(τ)` over the last half of
    /// the grid is at most this.
    pub decay_ratio: f64,
    /// Non-flat when the relative spread over the last half is at most this…
    pub plateau_band: f64,
    /// …and the smallest value there exceeds this.
    pub floor: f64,
}

impl Default for FlatnessConfig {
    fn default() -> Self {
        FlatnessConfig {
            tol_flat: 1e-6,
            decay_ratio: 0.9,
            plateau_band: 0.01,
            floor: 1e-3,
        }
    }
}

/// Diagnostics over the last half of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// Largest per-doubling ratio between consecutive values.
    pub max_decay_ratio: Option<f64>,
    /// `(max − min)/max`.
    pub spread: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub branch: Branch,
    pub tau_grid: Vec<RationalRepr>,
    /// `β(τ)` for each grid point.
    pub values: Vec<NormValue>,
    pub verdict: FlatVerdict,
    /// Value at the last grid point.
    pub estimate: f64,
    pub trend: Trend,
    /// `β(τ) ≤ ‖f*‖_E` at every grid point.
    pub bound_holds: bool,
    /// Set when the verdict follows from the family alone.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fast_path: bool,
    /// Why this branch applies.
    pub rationale: String,
}

/// `τ = 2^lo, …, 2^hi`.
pub fn power_grid(lo: i64, hi: i64) -> Result<Vec<Rational>> {
    if lo > hi || lo < 0 {
        return Err(Error::Malformed(format!("grid exponents {lo}:{hi} must satisfy 0 ≤ lo ≤ hi")));
    }
    Ok((lo..=hi).map(pow2).collect())
}

/// `τ = 2^0, …, 2^14`.
pub fn default_grid() -> Vec<Rational> {
    power_grid(0, 14).expect("static grid")
}

fn branch_for(space: &SpaceSpec, f: &Element) -> Result<(Branch, &'static str)> {
    if !space.domain.accepts(f) {
        return Err(Error::DomainMismatch(format!(
            "a space on {:?} cannot measure this element",
            space.domain
        )));
    }
    Ok(match space.domain {
        SpaceDomain::Unit => (Branch::Unit, "unit interval: full dilation profile"),
        SpaceDomain::HalfLine if space.meets_complement_l1() => {
            (Branch::Sz1, "half-line, E not contained in L1: full dilation profile")
        }
        SpaceDomain::HalfLine => (Branch::Sz2, "half-line, E contained in L1: profile restricted to (0,1)"),
        SpaceDomain::Sequence => {
            if space.subset_l1() {
                return Err(Error::Unsupported(
                    "no flatness criterion is available for sequence spaces contained in l1".into(),
                ));
            }
            (
                Branch::Sequence,
                "sequences, E not contained in l1: repetition profile (also decides the positive-orbit variant)",
            )
        }
    })
}

fn rearranged(f: &Element) -> StepFunction {
    match f {
        Element::Function(f) => f.rearrange(),
        Element::Sequence(s) => embed_sequence(&s.rearrange()),
    }
}

/// `β(τ)` for one branch.
fn beta(space: &SpaceSpec, branch: Branch, fs: &StepFunction, tau: &Rational) -> Result<NormValue> {
    let d = fs.dilate(tau)?;
    let n = match branch {
        Branch::Sz2 => norm_of(space, &d.restrict01())?,
        _ => norm_of(space, &d)?,
    };
    Ok(n.scale(&tau.recip()))
}

fn check_grid(branch: Branch, grid: &[Rational]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Malformed("empty τ grid".into()));
    }
    if grid[0] < int(1) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Malformed("τ grid must increase strictly from at least 1".into()));
    }
    if branch == Branch::Sequence && grid.iter().any(|t| !t.is_integer()) {
        return Err(Error::Malformed("sequence dilations need integer m".into()));
    }
    Ok(())
}

fn trend(grid: &[Rational], vals: &[f64]) -> Trend {
    let start = vals.len() / 2;
    let tail = &vals[start..];
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = tail.iter().cloned().fold(0.0, f64::max);
    let spread = (tail.len() >= 2 && max > 0.0).then(|| (max - min) / max);
    let ratios: Vec<f64> = (start.max(1)..vals.len())
        .map(|i| {
            if vals[i - 1] <= 0.0 {
                return 0.0;
            }
            let doublings = (rational::ln(&grid[i]) - rational::ln(&grid[i - 1])) / std::f64::consts::LN_2;
            (vals[i] / vals[i - 1]).powf(1.0 / doublings)
        })
        .collect();
    let max_decay_ratio = (!ratios.is_empty()).then(|| ratios.iter().cloned().fold(0.0, f64::max));
    Trend {
        max_decay_ratio,
        spread,
        min: if tail.is_empty() { 0.0 } else { min },
        max,
    }
}

fn decide(vals: &[f64], t: &Trend, cfg: &FlatnessConfig) -> FlatVerdict {
    let last = *vals.last().expect("nonempty grid");
    if last <= cfg.tol_flat {
        return FlatVerdict::Flat;
    }
    if let Some(r) = t.max_decay_ratio {
        if vals.len() >= 3 && r <= cfg.decay_ratio {
            return FlatVerdict::Flat;
        }
    }
    if let Some(s) = t.spread {
        if s <= cfg.plateau_band && t.min > cfg.floor {
            return FlatVerdict::NonFlat;
        }
    }
    FlatVerdict::Inconclusive
}

/// Dilation profile of `f` in `E` over `grid`, with the default thresholds.
pub fn flatness_profile(space: &SpaceSpec, f: &Element, grid: &[Rational]) -> Result<FlatnessReport> {
    flatness_profile_with(space, f, grid, &FlatnessConfig::default())
}

pub fn flatness_profile_with(
    space: &SpaceSpec,
    f: &Element,
    grid: &[Rational],
    cfg: &FlatnessConfig,
) -> Result<FlatnessReport> {
    let (branch, rationale) = branch_for(space, f)?;
    check_grid(branch, grid)?;
    let fs = rearranged(f);
    let base = norm_of(space, &fs)?;
    if !base.is_finite() {
        return Err(Error::Precondition("f does not belong to E".into()));
    }
    let values: Vec<NormValue> = grid
        .par_iter()
        .map(|tau| beta(space, branch, &fs, tau))
        .collect::<Result<_>>()?;
    let bound_holds = values.iter().all(|v| v.le_scaled(&int(1), &base));
    let floats: Vec<f64> = values.iter().map(NormValue::to_f64).collect();
    let t = trend(grid, &floats);
    Ok(FlatnessReport {
        branch,
        tau_grid: grid.iter().cloned().map(RationalRepr).collect(),
        verdict: decide(&floats, &t, cfg),
        estimate: *floats.last().expect("nonempty grid"),
        values,
        trend: t,
        bound_holds,
        fast_path: false,
        rationale: rationale.into(),
    })
}

/// Flatness verdict on the default grid. Orlicz spaces on the half-line are
/// always flat; the profile is still attached as a numeric confirmation.
pub fn flatness_verdict(space: &SpaceSpec, f: &Element) -> Result<FlatnessReport> {
    flatness_verdict_with(space, f, &default_grid(), &FlatnessConfig::default())
}

pub fn flatness_verdict_with(
    space: &SpaceSpec,
    f: &Element,
    grid: &[Rational],
    cfg: &FlatnessConfig,
) -> Result<FlatnessReport> {
    let mut report = flatness_profile_with(space, f, grid, cfg)?;
    if matches!(space.family, Family::Orlicz { .. }) && space.domain == SpaceDomain::HalfLine {
        report.verdict = FlatVerdict::Flat;
        report.fast_path = true;
        report.rationale = "Orlicz space on the half-line: every orbit is flat".into();
    }
    Ok(report)
}

/// Both profiles of [`lemma21_check`] and their gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma21Report {
    pub tau_grid: Vec<RationalRepr>,
    /// `τ^{-1}‖σ_τ f‖_E`.
    pub in_e: Vec<NormValue>,
    /// `τ^{-1}‖σ_τ f‖_{E+L_∞}`.
    pub in_e_plus_linf: Vec<NormValue>,
    pub gaps: Vec<f64>,
    /// Gaps are nonincreasing over the second half of the grid.
    pub verdict: Verdict,
}

/// Compares the profiles of an integrable `f` in `E` and in `E + L_∞` and
/// checks that their gap shrinks along the grid.
pub fn lemma21_check(space: &SpaceSpec, f: &StepFunction, grid: &[Rational]) -> Result<Lemma21Report> {
    if space.domain != SpaceDomain::HalfLine || f.domain() != Domain::HalfLine {
        return Err(Error::DomainMismatch("the comparison lives on the half-line".into()));
    }
    if !space.meets_complement_l1() {
        return Err(Error::Precondition("E must not be contained in L1".into()));
    }
    if !f.tail().is_zero() {
        return Err(Error::NonIntegrable("f must have zero tail".into()));
    }
    check_grid(Branch::Sz1, grid)?;
    let fs = f.rearrange();
    let pairs: Vec<(NormValue, NormValue)> = grid
        .par_iter()
        .map(|tau| Ok((beta(space, Branch::Sz1, &fs, tau)?, beta(space, Branch::Sz2, &fs, tau)?)))
        .collect::<Result<_>>()?;
    let (in_e, in_e_plus_linf): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let gaps: Vec<f64> = in_e
        .iter()
        .zip(&in_e_plus_linf)
        .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
        .collect();
    let mut verdict = Verdict::holds();
    for i in (gaps.len() / 2).max(1)..gaps.len() {
        let slack = 1e-9 * gaps[i - 1] + 1e-12;
        if gaps[i] > gaps[i - 1] + slack {
            verdict = Verdict::fails(Witness {
                location: Location::Point(RationalRepr(grid[i].clone())),
                lhs: RationalRepr(rational::from_f64(gaps[i])?),
                rhs: RationalRepr(rational::from_f64(gaps[i - 1])?),
            });
            break;
        }
    }
    Ok(Lemma21Report {
        tau_grid: grid.iter().cloned().map(RationalRepr).collect(),
        in_e,
        in_e_plus_linf,
        gaps,
        verdict,
    })
}

/// One sampled `g ∈ Ω(f + 1)` and the memberships of its split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    pub g: StepFunction,
    /// `g ≼ f + 1`.
    pub in_orbit: bool,
    /// `g − g∧1 ≼ f`.
    pub excess_in_orbit: bool,
    /// `g∧1 ≼ 1`.
    pub capped_in_orbit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateReport {
    pub samples: Vec<SplitCheck>,
    pub verdict: Verdict,
}

/// Samples `g ∈ Ω(f + 1)` and checks `g = (g − g∧1) + g∧1` with
/// `g − g∧1 ∈ Ω(f)` and `g∧1 ∈ Ω(1)`, exactly.
pub fn translate_trick_check(f: &StepFunction) -> Result<TranslateReport> {
    if f.domain() != Domain::HalfLine {
        return Err(Error::DomainMismatch("the translation argument lives on the half-line".into()));
    }
    if !f.is_decreasing() || !f.is_nonnegative() {
        return Err(Error::Precondition("f must be nonnegative and decreasing".into()));
    }
    if !f.tail().is_zero() {
        return Err(Error::Precondition("f must have zero tail".into()));
    }
    let one = StepFunction::constant(Domain::HalfLine, int(1));
    let f1 = combine(CombineOp::Add, f, &one)?;
    let span = f.last_breakpoint().max(int(1));
    let reflected = f1.reflect(&span)?;
    let avg = combine(CombineOp::Add, &f1, &reflected)?.scale(&ratio(1, 2));
    let shifted = f1.cut_below(&ratio(1, 2));
    let shifted = combine(CombineOp::Max, &shifted, &StepFunction::indicator(Domain::HalfLine, int(0), ratio(1, 2), int(1))?)?;
    let candidates = vec![f1.clone(), reflected, avg, f1.scale(&ratio(1, 2)), shifted];
    let mut samples = Vec::with_capacity(candidates.len());
    let mut verdict = Verdict::holds();
    for (i, g) in candidates.into_iter().enumerate() {
        let capped = combine(CombineOp::Min, &g, &one)?;
        let excess = combine(CombineOp::Sub, &g, &capped)?;
        let s = SplitCheck {
            in_orbit: submajorizes(&g, &f1)?.holds,
            excess_in_orbit: submajorizes(&excess, f)?.holds,
            capped_in_orbit: submajorizes(&capped, &one)?.holds,
            g,
        };
        if verdict.holds && s.in_orbit && !(s.excess_in_orbit && s.capped_in_orbit) {
            verdict = Verdict::fails(Witness {
                location: Location::Index(i),
                lhs: RationalRepr(int(0)),
                rhs: RationalRepr(int(0)),
            })
            .with_note("split component left its orbit");
        }
        samples.push(s);
    }
    Ok(TranslateReport { samples, verdict })
}

// ---------------------------------------------------------------------------
// fixtures

/// A space, a function in it and the expected flatness verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub space: SpaceSpec,
    pub function: Element,
    pub expected: FlatVerdict,
}

pub const FIXTURE_NAMES: &[&str] = &[
    "linf-unit-one",
    "marc-log-nonflat",
    "l1-sz2-flat",
    "orlicz-power2-flat",
    "l1capinf-sz2-flat",
];

/// `⌊2^e v⌋ / 2^e` with `e` chosen for about 26 significant bits.
fn dyadic_floor(v: &Rational, scale_exp: i64) -> Rational {
    let e = scale_exp.max(0) + 26;
    let m = (v * pow2(e)).floor();
    m / pow2(e)
}

/// Step approximation of `1/(1+t)`: value 1 on `(0, 2^-20]`, then four
/// equal pieces per octave up to `2^1024`, each carrying a dyadic rounding
/// of `1/(1+t)` at its midpoint.
///
/// The support has to be this long: `τ^{-1}‖σ_τ f‖` in the logarithmic
/// Marcinkiewicz space is about `log T / log(τT)` for support `(0, T]`.
pub fn inverse_one_plus_t() -> StepFunction {
    let mut bps = vec![pow2(-20)];
    let mut vals = vec![int(1)];
    for j in -20i64..1024 {
        let base = pow2(j);
        for i in 0..4i64 {
            let end = &base * ratio(5 + i, 4);
            let mid = &base * ratio(9 + 2 * i, 8);
            let v = (int(1) + mid).recip();
            vals.push(dyadic_floor(&v, j + 1));
            bps.push(end);
        }
    }
    StepFunction::new(Domain::HalfLine, bps, vals, int(0)).expect("increasing breakpoints")
}

pub fn fixture(name: &str) -> Result<Fixture> {
    let chi01 = StepFunction::indicator(Domain::HalfLine, int(0), int(1), int(1))?;
    let (space, function, expected) = match name {
        "linf-unit-one" => (
            SpaceSpec::linf(SpaceDomain::Unit),
            StepFunction::constant(Domain::UnitInterval, int(1)),
            FlatVerdict::Flat,
        ),
        "marc-log-nonflat" => (
            SpaceSpec::new(
                Family::Marcinkiewicz {
                    psi: ConcaveFn::LogShift,
                },
                SpaceDomain::HalfLine,
            )?,
            inverse_one_plus_t(),
            FlatVerdict::NonFlat,
        ),
        "l1-sz2-flat" => (SpaceSpec::lp(int(1), SpaceDomain::HalfLine), chi01, FlatVerdict::Flat),
        "orlicz-power2-flat" => (
            SpaceSpec::new(
                Family::Orlicz {
                    m: OrliczFn::power(int(2))?,
                },
                SpaceDomain::HalfLine,
            )?,
            StepFunction::new(Domain::HalfLine, vec![int(1), int(4)], vec![int(2), int(1)], int(0))?,
            FlatVerdict::Flat,
        ),
        "l1capinf-sz2-flat" => (
            SpaceSpec::new(Family::L1CapLinf, SpaceDomain::HalfLine)?,
            chi01,
            FlatVerdict::Flat,
        ),
        _ => {
            return Err(Error::Malformed(format!(
                "unknown fixture {name:?}; known: {}",
                FIXTURE_NAMES.join(", ")
            )))
        }
    };
    Ok(Fixture {
        name: name.into(),
        space,
        function: Element::Function(function),
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorization::hardy_gap;
    use crate::rational::Extended;
    use proptest::prelude::*;

    fn hl(bps: &[i64], vals: &[i64]) -> StepFunction {
        StepFunction::new(
            Domain::HalfLine,
            bps.iter().map(|&x| int(x)).collect(),
            vals.iter().map(|&x| int(x)).collect(),
            int(0),
        )
        .unwrap()
    }

    fn chi(b: Rational) -> StepFunction {
        StepFunction::indicator(Domain::HalfLine, int(0), b, int(1)).unwrap()
    }

    fn fe(f: StepFunction) -> Element {
        Element::Function(f)
    }

    fn seq(v: &[i64]) -> SeqVector {
        SeqVector::from_ints(v)
    }

    #[test]
    fn orbit_member_examples() {
        let f = hl(&[1, 3, 4], &[3, 1, 2]);
        let g = f.rearrange();
        assert!(orbit_member(&fe(g), &fe(f.clone())).unwrap().holds);
        let refl = f.reflect(&int(4)).unwrap();
        let avg = combine(CombineOp::Add, &f, &refl).unwrap().scale(&ratio(1, 2));
        assert!(orbit_member(&fe(avg), &fe(f.clone())).unwrap().holds);
        let bigger = f.scale(&ratio(101, 100));
        assert!(!orbit_member(&fe(bigger), &fe(f)).unwrap().holds);
    }

    #[test]
    fn extreme_points() {
        let l1linf = SpaceSpec::new(Family::L1PlusLinf, SpaceDomain::HalfLine).unwrap();
        let l1 = SpaceSpec::lp(int(1), SpaceDomain::HalfLine);
        let f = hl(&[1, 2], &[2, 1]);
        assert!(extreme_point_check(&fe(f.clone()), &fe(f.clone()), &l1).unwrap());
        let g = f.reflect(&int(2)).unwrap().scale(&int(-1));
        assert!(extreme_point_check(&fe(g), &fe(f.clone()), &l1linf).unwrap());
        let one = StepFunction::constant(Domain::HalfLine, int(1));
        assert!(!extreme_point_check(&fe(chi(int(1))), &fe(one.clone()), &l1linf).unwrap());
        // same rearrangement, but g vanishes on (0,1]
        let g = StepFunction::new(Domain::HalfLine, vec![int(1)], vec![int(0)], int(1)).unwrap();
        assert_eq!(g.rearrange(), one.rearrange());
        assert!(!extreme_point_check(&fe(g.clone()), &fe(one.clone()), &l1linf).unwrap());
        assert!(extreme_point_check(&fe(g), &fe(one), &SpaceSpec::new(Family::L1CapLinf, SpaceDomain::HalfLine).unwrap()).unwrap());
    }

    #[test]
    fn certificate_examples() {
        let f = chi(int(1));
        let half = f.scale(&ratio(1, 2));
        let l1 = SpaceSpec::lp(int(1), SpaceDomain::HalfLine);
        assert!(q_certificate_verify(&f, &f, &f, &int(1), None).unwrap().verdict.holds);
        let r = q_certificate_verify(&f, &half, &half, &int(1), Some(&l1)).unwrap();
        assert!(r.verdict.holds);
        assert_eq!(r.distance, Some(NormValue::exact(int(0))));
        assert!(q_certificate_verify(&f, &f, &f, &int(2), None).unwrap().verdict.holds);
        let err = q_certificate_verify(&f, &half, &f, &int(1), None).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let r = q_certificate_verify(&f, &f.scale(&int(2)), &f.scale(&int(2)), &int(1), None).unwrap();
        assert!(!r.verdict.holds);
    }

    fn check_decomposition(xi: &SeqVector, eta: &SeqVector) -> ConvexCombination {
        let c = decompose_finite(xi, eta).unwrap();
        assert_eq!(reconstruct(&c, xi).unwrap(), *eta);
        let xs = xi.rearrange();
        for a in &c.atoms {
            let img = a.apply(xi).rearrange();
            for k in 0..img.len() {
                assert!(img.get(k) <= xs.get(k));
            }
        }
        c
    }

    #[test]
    fn decomposition_examples() {
        let c = check_decomposition(&seq(&[3, 1]), &seq(&[2, 2]));
        assert_eq!(c.weights, vec![RationalRepr(ratio(1, 2)); 2]);
        let mut atoms = c.atoms.clone();
        atoms.sort();
        assert_eq!(atoms[0], PartialPermutation::identity(2));

        let xi = SeqVector::new(vec![int(1)]);
        let eta = SeqVector::new(vec![ratio(1, 2)]);
        let c = check_decomposition(&xi, &eta);
        assert_eq!(c.weights.len(), 2);
        assert!(c.atoms.iter().any(|a| a.entries.iter().all(Option::is_none)));

        let xi = seq(&[2, 1, 1]);
        let eta = SeqVector::new(vec![ratio(4, 3); 3]);
        let c = check_decomposition(&xi, &eta);
        // the three cyclic shifts, up to exchanging the two equal sources
        assert_eq!(c.weights, vec![RationalRepr(ratio(1, 3)); 3]);
        let mut spots: Vec<usize> = c
            .atoms
            .iter()
            .map(|a| a.entries.iter().position(|e| e.map(|x| x.source) == Some(0)).unwrap())
            .collect();
        spots.sort();
        assert_eq!(spots, vec![0, 1, 2]);
    }

    #[test]
    fn decomposition_signed_and_unsorted() {
        let xi = SeqVector::new(vec![int(-1), int(4), int(0), int(2)]);
        let eta = SeqVector::new(vec![int(1), int(-3), ratio(1, 2), int(0), int(-1)]);
        check_decomposition(&xi, &eta);
    }

    #[test]
    fn decomposition_rejects_violations() {
        assert!(matches!(
            decompose_finite(&seq(&[2, 1]), &seq(&[3])),
            Err(Error::OrderViolation(_))
        ));
        let big = SeqVector::new(vec![int(1); 70]);
        assert!(matches!(decompose_finite(&big, &big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn reconstruct_examples() {
        let xi = seq(&[5, 3]);
        let id = ConvexCombination {
            weights: vec![RationalRepr(int(1))],
            atoms: vec![PartialPermutation::identity(2)],
        };
        assert_eq!(reconstruct(&id, &xi).unwrap(), xi);
        let swap = PartialPermutation {
            entries: vec![
                Some(Assignment { source: 1, negate: false }),
                Some(Assignment { source: 0, negate: false }),
            ],
        };
        let c = ConvexCombination {
            weights: vec![RationalRepr(ratio(1, 2)); 2],
            atoms: vec![swap.clone(), swap],
        };
        // two equal-weight swaps reproduce the swap itself
        assert_eq!(reconstruct(&c, &xi).unwrap(), seq(&[3, 5]));
        let c = ConvexCombination {
            weights: vec![RationalRepr(ratio(1, 2)); 2],
            atoms: vec![PartialPermutation::identity(2), c.atoms[0].clone()],
        };
        assert_eq!(reconstruct(&c, &xi).unwrap(), seq(&[4, 4]));
    }

    #[test]
    fn linf_unit_one_is_flat() {
        let fx = fixture("linf-unit-one").unwrap();
        let r = flatness_verdict(&fx.space, &fx.function).unwrap();
        assert_eq!(r.branch, Branch::Unit);
        assert_eq!(r.verdict, FlatVerdict::Flat);
        for (t, v) in r.tau_grid.iter().zip(&r.values) {
            assert_eq!(v.as_exact(), Some(&t.0.recip()));
        }
        assert!(r.bound_holds);
    }

    #[test]
    fn l1_sz2_profile() {
        for name in ["l1-sz2-flat", "l1capinf-sz2-flat"] {
            let fx = fixture(name).unwrap();
            let r = flatness_verdict(&fx.space, &fx.function).unwrap();
            assert_eq!(r.branch, Branch::Sz2);
            assert_eq!(r.verdict, FlatVerdict::Flat);
            for (t, v) in r.tau_grid.iter().zip(&r.values) {
                assert_eq!(v.as_exact(), Some(&t.0.recip()), "{name}");
            }
        }
    }

    #[test]
    fn orlicz_fast_path() {
        let fx = fixture("orlicz-power2-flat").unwrap();
        let r = flatness_verdict(&fx.space, &fx.function).unwrap();
        assert!(r.fast_path);
        assert_eq!(r.verdict, FlatVerdict::Flat);
        let Element::Function(f) = &fx.function else { unreachable!() };
        let l2 = (4.0f64 + 3.0).sqrt();
        assert_eq!(f.rearrange().primitive(&int(4)).unwrap(), int(5));
        for (t, v) in r.tau_grid.iter().zip(&r.values) {
            let expect = l2 / rational::to_f64(&t.0).sqrt();
            assert!((v.to_f64() / expect - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn marcinkiewicz_log_fixture_is_non_flat() {
        let fx = fixture("marc-log-nonflat").unwrap();
        let Element::Function(f) = &fx.function else { unreachable!() };
        assert!(f.is_decreasing());
        let r = flatness_verdict(&fx.space, &fx.function).unwrap();
        assert_eq!(r.branch, Branch::Sz1);
        assert_eq!(r.verdict, FlatVerdict::NonFlat, "{:?}", r.trend);
        for (t, v) in r.tau_grid.iter().zip(&r.values) {
            if t.0 <= pow2(10) {
                assert!((v.to_f64() - 1.0).abs() < 0.05, "τ = {}: {}", t.0, v.to_f64());
            }
        }
        assert!(r.bound_holds);
    }

    #[test]
    fn refined_grid_keeps_verdicts() {
        let mut fine: Vec<Rational> = Vec::new();
        for k in 0..15 {
            fine.push(pow2(k));
            fine.push(pow2(k) * ratio(3, 2));
        }
        for name in FIXTURE_NAMES {
            let fx = fixture(name).unwrap();
            let coarse = flatness_verdict(&fx.space, &fx.function).unwrap();
            let refined = flatness_verdict_with(&fx.space, &fx.function, &fine, &FlatnessConfig::default()).unwrap();
            assert_eq!(coarse.verdict, fx.expected, "{name}");
            assert_eq!(refined.verdict, coarse.verdict, "{name}");
        }
    }

    #[test]
    fn sequence_branch() {
        let l2 = SpaceSpec::lp(int(2), SpaceDomain::Sequence);
        let xi = Element::Sequence(seq(&[3, 4]));
        let r = flatness_verdict(&l2, &xi).unwrap();
        assert_eq!(r.branch, Branch::Sequence);
        assert_eq!(r.verdict, FlatVerdict::Flat);
        for (t, v) in r.tau_grid.iter().zip(&r.values) {
            let expect = 5.0 / rational::to_f64(&t.0).sqrt();
            assert!((v.to_f64() / expect - 1.0).abs() < 1e-9);
        }
        let zero = Element::Sequence(SeqVector::default());
        assert_eq!(flatness_verdict(&l2, &zero).unwrap().verdict, FlatVerdict::Flat);
        let l1 = SpaceSpec::lp(int(1), SpaceDomain::Sequence);
        assert!(matches!(flatness_verdict(&l1, &xi), Err(Error::Unsupported(_))));
        assert!(flatness_profile(&l2, &xi, &[int(1), ratio(3, 2)]).is_err());
    }

    #[test]
    fn profile_gap_examples() {
        let linf = SpaceSpec::linf(SpaceDomain::HalfLine);
        let grid = default_grid();
        let r = lemma21_check(&linf, &chi(int(1)), &grid).unwrap();
        assert!(r.verdict.holds);
        assert!(r.gaps.iter().all(|g| *g == 0.0));
        for (t, v) in grid.iter().zip(&r.in_e) {
            assert_eq!(v.as_exact(), Some(&t.recip()));
        }

        let marc = SpaceSpec::new(
            Family::Marcinkiewicz {
                psi: ConcaveFn::power(ratio(1, 2)).unwrap(),
            },
            SpaceDomain::HalfLine,
        )
        .unwrap();
        let r = lemma21_check(&marc, &chi(int(1)), &grid).unwrap();
        assert!(r.verdict.holds);
        // oracle: ‖χ_(0,τ]‖ = sup_t min(t,τ)/√t = √τ, and ‖χ_(0,1]‖ = 1
        for (t, (a, b)) in grid.iter().zip(r.in_e.iter().zip(&r.in_e_plus_linf)) {
            let tau = rational::to_f64(t);
            assert!((a.to_f64() - tau.powf(-0.5)).abs() < 1e-9);
            assert!((b.to_f64() - 1.0 / tau).abs() < 1e-9);
        }

        let r = lemma21_check(&linf, &StepFunction::zero(Domain::HalfLine), &grid).unwrap();
        assert!(r.verdict.holds && r.gaps.iter().all(|g| *g == 0.0));
        assert!(lemma21_check(&SpaceSpec::lp(int(1), SpaceDomain::HalfLine), &chi(int(1)), &grid).is_err());
    }

    #[test]
    fn translate_trick_examples() {
        for f in [hl(&[1, 3], &[2, 1]), chi(int(2)), StepFunction::zero(Domain::HalfLine)] {
            let r = translate_trick_check(&f).unwrap();
            assert!(r.verdict.holds);
            assert!(r.samples.iter().all(|s| s.in_orbit));
            // g = f + 1 splits into (f, 1)
            let one = StepFunction::constant(Domain::HalfLine, int(1));
            let capped = combine(CombineOp::Min, &r.samples[0].g, &one).unwrap();
            assert_eq!(capped, one);
        }
    }

    #[test]
    fn fixtures_round_trip_json() {
        for name in FIXTURE_NAMES {
            let fx = fixture(name).unwrap();
            let s = serde_json::to_string(&fx).unwrap();
            let back: Fixture = serde_json::from_str(&s).unwrap();
            assert_eq!(back, fx);
        }
        assert!(fixture("nope").is_err());
    }

    fn arb_seq(n: usize) -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(0i64..7, 1..=n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decomposition_round_trip(xi in arb_seq(8), raw in arb_seq(8), den in 1i64..5) {
            let xi = SeqVector::from_ints(&xi);
            // push a candidate below ξ: shrink the raw vector until it fits
            let mut eta = SeqVector::new(raw.iter().map(|&x| ratio(x, den)).collect());
            if xi.is_empty() {
                eta = SeqVector::default();
            }
            while !submajorizes_seq(&eta, &xi).holds {
                eta = eta.scale(&ratio(1, 2));
            }
            let c = decompose_finite(&xi, &eta).unwrap();
            prop_assert_eq!(reconstruct(&c, &xi).unwrap(), eta);
            let xs = xi.rearrange();
            for a in &c.atoms {
                let img = a.apply(&xi).rearrange();
                for k in 0..img.len() {
                    prop_assert!(img.get(k) <= xs.get(k));
                }
            }
        }

        #[test]
        fn certificate_scales_up(bps in prop::collection::vec(1i64..5, 1..4), p in 1i64..4, num in 1i64..8, delta in 1i64..5) {
            let mut t = 0;
            let mut b = Vec::new();
            let mut v = Vec::new();
            for (i, w) in bps.iter().enumerate() {
                t += w;
                b.push(int(t));
                v.push(int(8 - i as i64));
            }
            let f = StepFunction::new(Domain::HalfLine, b, v, int(0)).unwrap();
            let h = f.scale(&ratio(num, 8));
            if q_certificate_verify(&f, &h, &h, &int(p), None).unwrap().verdict.holds {
                let bigger = f.scale(&(int(1) + ratio(1, delta)));
                prop_assert!(q_certificate_verify(&bigger, &h, &h, &int(p), None).unwrap().verdict.holds);
                // h = θf with p = 1 lies in the orbit of f
                prop_assert_eq!(
                    hardy_gap(&fe(h.clone()), &fe(bigger)).unwrap().gap,
                    Extended::Finite(int(0))
                );
            }
        }
    }
}
