//! Matrices as compact operators: singular values, the partial-sum orbit
//! test `Σ_{k≤n} s_k(R) ≤ Σ_{k≤n} s_k(T)` and the flatness criterion for
//! the symmetrically normed ideal built on a sequence space.
//!
//! Dense input is handled in `f64` with one-sided Jacobi; rational matrices
//! with at most one nonzero per row and column have exact spectra.

use num_traits::{Signed, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorization::{submajorizes_seq, Location, Verdict, Witness};
use crate::orbit::{flatness_verdict_with, FlatnessConfig, FlatnessReport};
use crate::rational::{self, int, Rational, RationalRepr};
use crate::spaces::{SpaceDomain, SpaceSpec};
use crate::majorization::Element;
use crate::stepfn::SeqVector;

/// Largest supported row or column count.
pub const MAX_DIM: usize = 64;
/// Relative tolerance of the Jacobi iteration.
pub const JACOBI_TOL: f64 = 1e-12;
/// Partial sums are compared up to this multiple of the operator norm.
pub const SPECTRUM_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100;

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    let big = rows.max(cols);
    if big > MAX_DIM {
        return Err(Error::TooLarge { got: big, bound: MAX_DIM });
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Malformed("matrix must have at least one row and one column".into()));
    }
    Ok(())
}

/// Row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::Malformed(format!("{} entries for a {rows}×{cols} matrix", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Malformed("rows have different lengths".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        Self::new(n, n, d)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Malformed(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut d = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    d[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        DenseMatrix::new(self.rows, other.cols, d)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Malformed("shapes differ".into()));
        }
        let d = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix::new(self.rows, self.cols, d)
    }
}

/// Row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rational>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::Malformed(format!("{} entries for a {rows}×{cols} matrix", data.len())));
        }
        Ok(RationalMatrix { rows, cols, data })
    }

    pub fn diagonal(d: &[Rational]) -> Result<Self> {
        let n = d.len();
        let mut data = vec![Rational::zero(); n * n];
        for (i, x) in d.iter().enumerate() {
            data[i * n + i] = x.clone();
        }
        Self::new(n, n, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![int(1); n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(rational::to_f64).collect(),
        }
    }

    pub fn mul(&self, other: &RationalMatrix) -> Result<RationalMatrix> {
        if self.cols != other.rows {
            return Err(Error::Malformed("inner dimensions differ".into()));
        }
        let mut d = vec![Rational::zero(); self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    d[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        RationalMatrix::new(self.rows, other.cols, d)
    }

    /// Nonzero entries when every row and column holds at most one.
    fn monomial_entries(&self) -> Option<Vec<Rational>> {
        let mut col_used = vec![false; self.cols];
        let mut out = Vec::new();
        for i in 0..self.rows {
            let mut row_seen = false;
            for j in 0..self.cols {
                let v = self.get(i, j);
                if v.is_zero() {
                    continue;
                }
                if row_seen || col_used[j] {
                    return None;
                }
                row_seen = true;
                col_used[j] = true;
                out.push(v.abs());
            }
        }
        Some(out)
    }

    /// Operator norm bound check `‖A‖ ≤ 1` for monomial matrices.
    pub fn is_monomial_contraction(&self) -> bool {
        self.monomial_entries()
            .map_or(false, |v| v.iter().all(|x| *x <= int(1)))
    }
}

/// A matrix given exactly or in floating point.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Dense(DenseMatrix),
    Exact(RationalMatrix),
}

impl Operator {
    pub fn diagonal(d: &[Rational]) -> Result<Self> {
        RationalMatrix::diagonal(d).map(Operator::Exact)
    }

    pub fn dense(&self) -> DenseMatrix {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Exact(m) => m.to_dense(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Operator::Dense(m) => (m.rows, m.cols),
            Operator::Exact(m) => (m.rows, m.cols),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Int(i64),
    Str(String),
    Float(f64),
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (rows, cols) = self.shape();
        let mut seq = s.serialize_seq(Some(rows))?;
        for i in 0..rows {
            match self {
                Operator::Dense(m) => seq.serialize_element(&m.data[i * cols..(i + 1) * cols])?,
                Operator::Exact(m) => seq.serialize_element(
                    &m.data[i * cols..(i + 1) * cols]
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>(),
                )?,
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<Vec<RawEntry>> = Vec::deserialize(d)?;
        let rows = raw.len();
        let cols = raw.first().map_or(0, Vec::len);
        if raw.iter().any(|r| r.len() != cols) {
            return Err(de::Error::custom("rows have different lengths"));
        }
        let any_float = raw.iter().flatten().any(|e| matches!(e, RawEntry::Float(_)));
        if any_float {
            let mut data = Vec::with_capacity(rows * cols);
            for e in raw.into_iter().flatten() {
                data.push(match e {
                    RawEntry::Int(i) => i as f64,
                    RawEntry::Float(x) => x,
                    RawEntry::Str(s) => rational::to_f64(&rational::parse(&s).map_err(de::Error::custom)?),
                });
            }
            DenseMatrix::new(rows, cols, data).map(Operator::Dense).map_err(de::Error::custom)
        } else {
            let mut data = Vec::with_capacity(rows * cols);
            for e in raw.into_iter().flatten() {
                data.push(match e {
                    RawEntry::Int(i) => int(i),
                    RawEntry::Str(s) => rational::parse(&s).map_err(de::Error::custom)?,
                    RawEntry::Float(_) => unreachable!(),
                });
            }
            RationalMatrix::new(rows, cols, data).map(Operator::Exact).map_err(de::Error::custom)
        }
    }
}

/// Singular values `s_1 ≥ s_2 ≥ … ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SingularSpectrum {
    Exact { values: SeqVector },
    Approx { values: Vec<f64>, abs_tol: f64 },
}

impl SingularSpectrum {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            SingularSpectrum::Exact { values } => values.entries().iter().map(rational::to_f64).collect(),
            SingularSpectrum::Approx { values, .. } => values.clone(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, SingularSpectrum::Exact { .. })
    }

    /// `s_1 = ‖T‖`.
    pub fn norm(&self) -> f64 {
        self.to_f64().first().cloned().unwrap_or(0.0)
    }

    /// The spectrum as a rational sequence; approximate values at or below
    /// the tolerance become zero.
    pub fn to_sequence(&self) -> Result<SeqVector> {
        match self {
            SingularSpectrum::Exact { values } => Ok(values.clone()),
            SingularSpectrum::Approx { values, abs_tol } => Ok(SeqVector::new(
                values
                    .iter()
                    .map(|&x| if x <= *abs_tol { Ok(Rational::zero()) } else { rational::from_f64(x) })
                    .collect::<Result<_>>()?,
            )),
        }
    }
}

/// Column norms after one-sided Jacobi orthogonalization, sorted.
pub fn jacobi_singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    // work with the wider side as rows so there are min(m, n) columns
    let (m, n, mut u) = if a.rows >= a.cols {
        (a.rows, a.cols, a.data.clone())
    } else {
        let mut t = vec![0.0; a.rows * a.cols];
        for i in 0..a.rows {
            for j in 0..a.cols {
                t[j * a.rows + i] = a.get(i, j);
            }
        }
        (a.cols, a.rows, t)
    };
    let col = |u: &[f64], i: usize, j: usize| u[i * n + j];
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (col(&u, i, p), col(&u, i, q));
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (col(&u, i, p), col(&u, i, q));
                    u[i * n + p] = c * x - s * y;
                    u[i * n + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")));
    }
    let mut s: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| col(&u, i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    Ok(s)
}

/// Singular values, exact for rational matrices with at most one nonzero
/// entry per row and column.
pub fn singular_values(t: &Operator) -> Result<SingularSpectrum> {
    if let Operator::Exact(m) = t {
        if let Some(v) = m.monomial_entries() {
            return Ok(SingularSpectrum::Exact {
                values: SeqVector::new(v).rearrange(),
            });
        }
    }
    let s = jacobi_singular_values(&t.dense())?;
    let top = s.first().cloned().unwrap_or(0.0);
    Ok(SingularSpectrum::Approx {
        abs_tol: SPECTRUM_TOL * top,
        values: s,
    })
}

/// `η ≼ ξ` for real vectors up to an absolute tolerance; comparisons within
/// the tolerance are flagged marginal.
pub fn submajorizes_approx(eta: &[f64], xi: &[f64], tol: f64) -> Result<Verdict> {
    let sorted = |v: &[f64]| {
        let mut w: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        w.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        w
    };
    let (e, x) = (sorted(eta), sorted(xi));
    let n = e.len().max(x.len());
    let (mut se, mut sx) = (0.0, 0.0);
    let mut marginal = false;
    for k in 0..n {
        se += e.get(k).cloned().unwrap_or(0.0);
        sx += x.get(k).cloned().unwrap_or(0.0);
        if se > sx + tol {
            return Ok(Verdict::fails(Witness {
                location: Location::Index(k + 1),
                lhs: RationalRepr(rational::from_f64(se)?),
                rhs: RationalRepr(rational::from_f64(sx)?),
            }));
        }
        if se > sx - tol {
            marginal = true;
        }
    }
    Ok(Verdict {
        holds: true,
        marginal,
        witness: None,
        note: None,
    })
}

/// `R ∈ Ω(T)`: partial sums of singular values, exact when both spectra are
/// exact and otherwise within `1e-9·max(‖T‖, ‖R‖)`.
pub fn operator_orbit_member(r: &Operator, t: &Operator) -> Result<Verdict> {
    operator_orbit_member_with(r, t, SPECTRUM_TOL)
}

/// As [`operator_orbit_member`] with tolerance `rel_tol·max(‖T‖, ‖R‖)`.
pub fn operator_orbit_member_with(r: &Operator, t: &Operator, rel_tol: f64) -> Result<Verdict> {
    if !(rel_tol >= 0.0 && rel_tol.is_finite()) {
        return Err(Error::Malformed(format!("tolerance {rel_tol} must be finite and nonnegative")));
    }
    let sr = singular_values(r)?;
    let st = singular_values(t)?;
    if let (SingularSpectrum::Exact { values: a }, SingularSpectrum::Exact { values: b }) = (&sr, &st) {
        return Ok(submajorizes_seq(a, b));
    }
    let tol = rel_tol * sr.norm().max(st.norm());
    submajorizes_approx(&sr.to_f64(), &st.to_f64(), tol)
}

/// Flatness of the singular-value sequence of `T` in a sequence space.
pub fn operator_flatness(space: &SpaceSpec, t: &Operator) -> Result<FlatnessReport> {
    operator_flatness_with(space, t, &crate::orbit::default_grid(), &FlatnessConfig::default())
}

pub fn operator_flatness_with(
    space: &SpaceSpec,
    t: &Operator,
    grid: &[Rational],
    cfg: &FlatnessConfig,
) -> Result<FlatnessReport> {
    if space.domain != SpaceDomain::Sequence {
        return Err(Error::DomainMismatch("operator ideals are built on sequence spaces".into()));
    }
    let s = singular_values(t)?.to_sequence()?;
    flatness_verdict_with(space, &Element::Sequence(s), grid, cfg)
}

/// For diagonal `R ≤ T` entrywise, contractions `A = diag(r_k/t_k)` and
/// `B = I` with `A T B = R` exactly.
pub fn realize_diagonal(r: &[Rational], t: &[Rational]) -> Result<(RationalMatrix, RationalMatrix)> {
    if r.len() != t.len() {
        return Err(Error::Malformed("diagonals have different lengths".into()));
    }
    for (name, d) in [("R", r), ("T", t)] {
        if d.iter().any(Signed::is_negative) || d.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Precondition(format!("{name} must be nonnegative and nonincreasing")));
        }
    }
    if let Some(k) = (0..r.len()).find(|&k| r[k] > t[k]) {
        return Err(Error::Precondition(format!(
            "R exceeds T at position {k}; decompose with decompose_finite and realize each atom instead"
        )));
    }
    let a: Vec<Rational> = r
        .iter()
        .zip(t)
        .map(|(x, y)| if y.is_zero() { Rational::zero() } else { x / y })
        .collect();
    Ok((RationalMatrix::diagonal(&a)?, RationalMatrix::identity(r.len())?))
}
