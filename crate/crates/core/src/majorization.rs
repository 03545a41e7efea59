//! The Hardy-Littlewood-Polya order `g ≼ f`: `∫_0^t g* ≤ ∫_0^t f*` for all
//! `t` (partial sums of decreasing rearrangements for sequences).
//!
//! Both sides are piecewise affine in `t`, so every check here is a finite
//! set of exact rational comparisons at merged breakpoints plus one slope
//! comparison on the final unbounded piece. No tolerances.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{int, Extended, Rational, RationalRepr};
use crate::stepfn::{combine, merge_grids, CombineOp, Domain, SeqVector, StepFunction};

/// Where a defining inequality was evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// A point `t` of the domain.
    Point(RationalRepr),
    /// A 1-based sequence index `n`.
    Index(usize),
    /// A pair `(a, b)` (used by the two-parameter certificate check).
    Pair(RationalRepr, RationalRepr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub location: Location,
    pub lhs: RationalRepr,
    pub rhs: RationalRepr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    /// Set when a floating-point comparison fell inside its tolerance band.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub marginal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn holds() -> Self {
        Verdict {
            holds: true,
            marginal: false,
            witness: None,
            note: None,
        }
    }

    pub fn fails(witness: Witness) -> Self {
        Verdict {
            holds: false,
            marginal: false,
            witness: Some(witness),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Either kind of object the order applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Sequence(SeqVector),
    Function(StepFunction),
}

/// Evaluator for a continuous piecewise-affine function given by knots and a
/// final slope.
#[derive(Debug, Clone)]
pub(crate) struct Polyline {
    pub knots: Vec<(Rational, Rational)>,
    pub tail_slope: Rational,
}

impl Polyline {
    /// `t ↦ ∫_0^t f`.
    pub fn primitive_of(f: &StepFunction) -> Self {
        Polyline {
            knots: f.primitive_knots(),
            tail_slope: f.tail().clone(),
        }
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        let idx = self.knots.partition_point(|(x, _)| x < t);
        if idx < self.knots.len() && self.knots[idx].0 == *t {
            return self.knots[idx].1.clone();
        }
        if idx == 0 {
            return self.knots[0].1.clone();
        }
        let (x0, y0) = &self.knots[idx - 1];
        if idx == self.knots.len() {
            return y0 + &self.tail_slope * (t - x0);
        }
        let (x1, y1) = &self.knots[idx];
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    pub fn last_x(&self) -> Rational {
        self.knots.last().map(|k| k.0.clone()).unwrap_or_else(Rational::zero)
    }

    /// Abscissae of the interior knots (origin excluded).
    pub fn knot_xs(&self) -> impl Iterator<Item = &Rational> {
        self.knots.iter().map(|k| &k.0).filter(|x| x.is_positive())
    }
}

/// Checks `∫_{pa}^b h ≤ ∫_a^b f` for all `0 < pa < b < ∞`, exactly.
///
/// With `H`, `F` the primitives, the defect `H(b) − H(pa) − F(b) + F(a)` is
/// separable in `(a, b)` and affine on every cell cut out by the breakpoints
/// of `F` and `H(p·)` in `a`, those of `H` and `F` in `b`, and the line
/// `b = pa`. Its sup over the closed region is therefore attained at a cell
/// vertex, unless it grows along a recession direction, which happens
/// exactly when the terminal level of `h` exceeds that of `f`.
pub fn dilated_mass_check(f: &StepFunction, h: &StepFunction, p: &Rational) -> Result<Verdict> {
    if f.domain() != Domain::HalfLine || h.domain() != Domain::HalfLine {
        return Err(Error::DomainMismatch("the dilated mass check lives on the half-line".into()));
    }
    if *p < int(1) {
        return Err(Error::Precondition(format!("dilation factor p = {p} must be ≥ 1")));
    }
    let fp = Polyline::primitive_of(f);
    let hp = Polyline::primitive_of(h);
    let defect = |a: &Rational, b: &Rational| -> (Rational, Rational) {
        let lhs = hp.eval(b) - hp.eval(&(p * a));
        let rhs = fp.eval(b) - fp.eval(a);
        (lhs, rhs)
    };
    if h.tail() > f.tail() {
        // the b-direction grows without bound; exhibit a violation
        let slope = h.tail() - f.tail();
        let a = int(1);
        let mut b = p + fp.last_x().max(hp.last_x()) + int(1);
        let (l1, r1) = defect(&a, &b);
        if l1 <= r1 {
            b += (&r1 - &l1) / &slope + int(1);
        }
        let (lhs, rhs) = defect(&a, &b);
        return Ok(Verdict::fails(Witness {
            location: Location::Pair(RationalRepr(a), RationalRepr(b)),
            lhs: RationalRepr(lhs),
            rhs: RationalRepr(rhs),
        }));
    }
    let mut a_grid: Vec<Rational> = std::iter::once(Rational::zero())
        .chain(fp.knot_xs().cloned())
        .chain(hp.knot_xs().map(|x| x / p))
        .collect();
    a_grid.sort();
    a_grid.dedup();
    let mut b_grid: Vec<Rational> = fp.knot_xs().chain(hp.knot_xs()).cloned().collect();
    b_grid.sort();
    b_grid.dedup();

    let mut candidates: Vec<(Rational, Rational)> = Vec::new();
    for a in &a_grid {
        let pa = p * a;
        candidates.push((a.clone(), pa.clone()));
        for b in &b_grid {
            if *b >= pa {
                candidates.push((a.clone(), b.clone()));
            }
        }
    }
    for b in &b_grid {
        candidates.push((b / p, b.clone()));
    }
    let mut worst: Option<(Rational, Witness)> = None;
    for (a, b) in candidates {
        let (lhs, rhs) = defect(&a, &b);
        let d = &lhs - &rhs;
        if worst.as_ref().map_or(true, |(w, _)| d > *w) {
            worst = Some((
                d,
                Witness {
                    location: Location::Pair(RationalRepr(a), RationalRepr(b)),
                    lhs: RationalRepr(lhs),
                    rhs: RationalRepr(rhs),
                },
            ));
        }
    }
    let (d, w) = worst.expect("candidate set contains (0, 0)");
    if !d.is_positive() {
        return Ok(Verdict {
            holds: true,
            marginal: false,
            witness: Some(w),
            note: None,
        });
    }
    let Location::Pair(RationalRepr(a), RationalRepr(b)) = w.location.clone() else {
        unreachable!("candidates are pairs")
    };
    if a.is_positive() && p * &a < b {
        return Ok(Verdict::fails(w));
    }
    // move off the boundary a = 0 or pa = b; the defect is Lipschitz with
    // constant at most 2(p + 1)M in each coordinate, so a step of
    // d / (8(p + 1)M) keeps it positive
    let sup = |g: &StepFunction| g.values().iter().chain(std::iter::once(g.tail())).map(|v| v.abs()).max();
    let m = sup(f).into_iter().chain(sup(h)).max().unwrap_or_else(Rational::zero) + int(1);
    let eps = &d / (int(8) * (p + int(1)) * m);
    let a = if a.is_positive() { a } else { eps.clone() };
    let b = b + (p + int(1)) * eps;
    let (lhs, rhs) = defect(&a, &b);
    debug_assert!(lhs > rhs);
    Ok(Verdict::fails(Witness {
        location: Location::Pair(RationalRepr(a), RationalRepr(b)),
        lhs: RationalRepr(lhs),
        rhs: RationalRepr(rhs),
    }))
}

/// `sup_t (∫_0^t g* − ∫_0^t f*)` together with the location of the sup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: Extended,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

fn function_gap(g: &StepFunction, f: &StepFunction) -> Result<GapReport> {
    if g.domain() != f.domain() {
        return Err(Error::DomainMismatch(format!(
            "cannot compare {:?} with {:?}",
            g.domain(),
            f.domain()
        )));
    }
    let gs = g.rearrange();
    let fs = f.rearrange();
    let gp = Polyline::primitive_of(&gs);
    let fp = Polyline::primitive_of(&fs);
    let mut grid = merge_grids(gs.breakpoints(), fs.breakpoints());
    if let Some(end) = g.domain().end() {
        if grid.last() != Some(&end) {
            grid.push(end);
        }
    }
    let mut best = Rational::zero();
    let mut witness: Option<Witness> = None;
    for t in &grid {
        let lhs = gp.eval(t);
        let rhs = fp.eval(t);
        let d = &lhs - &rhs;
        if witness.is_none() || d > best {
            best = d;
            witness = Some(Witness {
                location: Location::Point(RationalRepr(t.clone())),
                lhs: RationalRepr(lhs),
                rhs: RationalRepr(rhs),
            });
        }
    }
    if g.domain() == Domain::HalfLine {
        let slope = gs.tail() - fs.tail();
        if slope.is_positive() {
            // beyond the last knot the difference grows without bound; report
            // a concrete point where it is already positive
            let last = grid.last().cloned().unwrap_or_else(Rational::zero);
            let d_last = gp.eval(&last) - fp.eval(&last);
            let mut t = last + int(1);
            if d_last.is_negative() {
                t += -d_last / &slope;
            }
            let lhs = gp.eval(&t);
            let rhs = fp.eval(&t);
            return Ok(GapReport {
                gap: Extended::PosInfinity,
                witness: Some(Witness {
                    location: Location::Point(RationalRepr(t)),
                    lhs: RationalRepr(lhs),
                    rhs: RationalRepr(rhs),
                }),
            });
        }
    }
    Ok(GapReport {
        gap: Extended::Finite(best.max(Rational::zero())),
        witness,
    })
}

fn sequence_gap(eta: &SeqVector, xi: &SeqVector) -> GapReport {
    let es = eta.rearrange();
    let xs = xi.rearrange();
    let n = es.len().max(xs.len());
    let ep = SeqVector::new(es.padded(n)).partial_sums();
    let xp = SeqVector::new(xs.padded(n)).partial_sums();
    let (mut ea, mut xa) = (Rational::zero(), Rational::zero());
    let mut best = Rational::zero();
    let mut witness = None;
    for k in 0..n {
        ea = ep.get(k).cloned().unwrap_or_else(|| ea.clone());
        xa = xp.get(k).cloned().unwrap_or_else(|| xa.clone());
        let d = &ea - &xa;
        if witness.is_none() || d > best {
            best = d;
            witness = Some(Witness {
                location: Location::Index(k + 1),
                lhs: RationalRepr(ea.clone()),
                rhs: RationalRepr(xa.clone()),
            });
        }
    }
    GapReport {
        gap: Extended::Finite(best.max(Rational::zero())),
        witness,
    }
}

/// `sup_t (∫_0^t g* − ∫_0^t f*)`, never negative (the sup includes `t = 0`).
pub fn hardy_gap(g: &Element, f: &Element) -> Result<GapReport> {
    match (g, f) {
        (Element::Function(g), Element::Function(f)) => function_gap(g, f),
        (Element::Sequence(g), Element::Sequence(f)) => Ok(sequence_gap(g, f)),
        _ => Err(Error::DomainMismatch(
            "cannot compare a function with a sequence".into(),
        )),
    }
}

fn verdict_from_gap(report: GapReport) -> Verdict {
    let holds = report.gap == Extended::Finite(Rational::zero());
    Verdict {
        holds,
        marginal: false,
        witness: report.witness,
        note: None,
    }
}

/// `g ≼ f` for step functions on the same domain.
pub fn submajorizes(g: &StepFunction, f: &StepFunction) -> Result<Verdict> {
    function_gap(g, f).map(verdict_from_gap)
}

/// `η ≼ ξ` for sequences (partial sums of decreasing rearrangements).
pub fn submajorizes_seq(eta: &SeqVector, xi: &SeqVector) -> Verdict {
    verdict_from_gap(sequence_gap(eta, xi))
}

pub fn submajorizes_element(g: &Element, f: &Element) -> Result<Verdict> {
    hardy_gap(g, f).map(verdict_from_gap)
}

/// Checks `(f* − g*) ≼ (f − g)*`. This always holds; a failure means a bug
/// somewhere upstream and is reported as an error.
pub fn verify_rearrangement_difference(f: &StepFunction, g: &StepFunction) -> Result<Verdict> {
    let lhs = combine(CombineOp::Sub, &f.rearrange(), &g.rearrange())?;
    let rhs = combine(CombineOp::Sub, f, g)?;
    let v = submajorizes(&lhs, &rhs)?;
    if !v.holds {
        return Err(Error::Numeric(format!(
            "rearrangement-difference inequality failed at {:?}; this indicates an implementation defect",
            v.witness
        )));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn hl(bps: &[i64], vals: &[i64]) -> StepFunction {
        StepFunction::new(
            Domain::HalfLine,
            bps.iter().map(|&b| int(b)).collect(),
            vals.iter().map(|&v| int(v)).collect(),
            Rational::zero(),
        )
        .unwrap()
    }

    #[test]
    fn reflexive() {
        let f = hl(&[1, 2], &[3, 1]);
        assert!(submajorizes(&f, &f).unwrap().holds);
    }

    #[test]
    fn sequence_example() {
        let xi = SeqVector::from_ints(&[3, 1, 0]);
        let eta = SeqVector::from_ints(&[2, 2, 0]);
        let v = submajorizes_seq(&eta, &xi);
        assert!(v.holds);
        // tight at n = 2
        assert_eq!(v.witness.unwrap().location, Location::Index(2));
        let r = hardy_gap(&Element::Sequence(eta), &Element::Sequence(xi)).unwrap();
        assert_eq!(r.gap, Extended::Finite(int(0)));
    }

    #[test]
    fn failing_example_has_witness() {
        let f = hl(&[1], &[1]);
        let g = hl(&[1], &[2]);
        let v = submajorizes(&g, &f).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert_eq!(w.location, Location::Point(RationalRepr(int(1))));
        assert_eq!(w.lhs.0, int(2));
        assert_eq!(w.rhs.0, int(1));
        let r = hardy_gap(&Element::Function(g), &Element::Function(f)).unwrap();
        assert_eq!(r.gap, Extended::Finite(int(1)));
    }

    #[test]
    fn tail_slope_decides_at_infinity() {
        let one = StepFunction::constant(Domain::HalfLine, int(1));
        let f = hl(&[10], &[5]);
        let v = submajorizes(&one, &f).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert!(w.lhs.0 > w.rhs.0);
        assert!(submajorizes(&f, &one.scale(&int(5))).unwrap().holds);
        let r = hardy_gap(&Element::Function(one), &Element::Function(f)).unwrap();
        assert_eq!(r.gap, Extended::PosInfinity);
    }

    #[test]
    fn unit_interval_checks_right_end() {
        let f = StepFunction::indicator(Domain::UnitInterval, int(0), ratio(1, 2), int(2)).unwrap();
        let g = StepFunction::constant(Domain::UnitInterval, int(1));
        assert!(submajorizes(&g, &f).unwrap().holds);
        let g2 = StepFunction::constant(Domain::UnitInterval, ratio(3, 2));
        let v = submajorizes(&g2, &f).unwrap();
        assert!(!v.holds);
        assert_eq!(v.witness.unwrap().location, Location::Point(RationalRepr(int(1))));
    }

    #[test]
    fn rearrangement_difference_examples() {
        let f = hl(&[1], &[2]);
        assert!(verify_rearrangement_difference(&f, &f).unwrap().holds);
        let g = StepFunction::indicator(Domain::HalfLine, int(1), int(2), int(1)).unwrap();
        assert!(verify_rearrangement_difference(&f, &g).unwrap().holds);
    }

    #[test]
    fn dilated_mass_examples() {
        let f = hl(&[1], &[1]);
        // h = g = f, p = 1
        assert!(dilated_mass_check(&f, &f, &int(1)).unwrap().holds);
        // half the mass
        let half = f.scale(&ratio(1, 2));
        assert!(dilated_mass_check(&f, &half, &int(1)).unwrap().holds);
        // h = f, p = 2: at a = 1/4, b = 1 the sides are 1/2 and 3/4
        assert!(dilated_mass_check(&f, &f, &int(2)).unwrap().holds);
        // doubling h breaks it at p = 1
        let v = dilated_mass_check(&f, &f.scale(&int(2)), &int(1)).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert!(w.lhs.0 > w.rhs.0);
        // h with a larger terminal level breaks it at infinity
        let one = StepFunction::constant(Domain::HalfLine, int(1));
        let v = dilated_mass_check(&f, &one, &int(3)).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert!(w.lhs.0 > w.rhs.0);
    }

    /// Brute-force oracle: scan a fine rational lattice of (a, b).
    #[test]
    fn dilated_mass_matches_lattice_scan() {
        let f = StepFunction::new(Domain::HalfLine, vec![int(1), int(3), int(4)], vec![int(4), int(2), int(1)], int(0)).unwrap();
        for (h, p) in [
            (hl(&[2], &[3]), int(2)),
            (hl(&[1, 5], &[5, 1]), int(2)),
            (hl(&[1, 6], &[3, 1]), int(3)),
            (hl(&[4], &[2]), int(1)),
            (hl(&[1], &[5]), int(1)),
            (hl(&[2], &[5]), int(3)),
        ] {
            let v = dilated_mass_check(&f, &h, &p).unwrap();
            let fast = v.holds;
            if !fast {
                // the witness is strictly inside 0 < pa < b and recomputes
                let w = v.witness.unwrap();
                let Location::Pair(a, b) = w.location else { panic!("not a pair") };
                assert!(a.0.is_positive() && &p * &a.0 < b.0);
                let lhs = h.primitive(&b.0).unwrap() - h.primitive(&(&p * &a.0)).unwrap();
                let rhs = f.primitive(&b.0).unwrap() - f.primitive(&a.0).unwrap();
                assert_eq!((&lhs, &rhs), (&w.lhs.0, &w.rhs.0));
                assert!(w.lhs.0 > w.rhs.0);
            }
            let mut brute = true;
            for i in 0..=48 {
                for j in 0..=64 {
                    let a = ratio(i, 8);
                    let b = ratio(j, 8);
                    if &p * &a >= b {
                        continue;
                    }
                    let lhs = h.primitive(&b).unwrap() - h.primitive(&(&p * &a)).unwrap();
                    let rhs = f.primitive(&b).unwrap() - f.primitive(&a).unwrap();
                    if lhs > rhs {
                        brute = false;
                    }
                }
            }
            assert_eq!(fast, brute, "h = {h:?}, p = {p}");
        }
    }

    #[test]
    fn mixed_kinds_rejected() {
        let f = Element::Function(hl(&[1], &[1]));
        let s = Element::Sequence(SeqVector::from_ints(&[1]));
        assert!(hardy_gap(&f, &s).is_err());
        let u = StepFunction::zero(Domain::UnitInterval);
        assert!(submajorizes(&u, &hl(&[1], &[1])).is_err());
    }

    #[test]
    fn element_json_is_untagged() {
        let s: Element = serde_json::from_str(r#"["3","1"]"#).unwrap();
        assert_eq!(s, Element::Sequence(SeqVector::from_ints(&[3, 1])));
        let f: Element =
            serde_json::from_str(r#"{"domain":"half_line","breakpoints":["1"],"values":["1"],"tail":"0"}"#).unwrap();
        assert!(matches!(f, Element::Function(_)));
    }
}
