//! `orbitkit` command-line front end. Every subcommand prints one JSON
//! report; the exit code encodes the verdict.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitkit::concave::{psi_kappa_full, KappaSeq};
use orbitkit::majorization::{hardy_gap, submajorizes_element, submajorizes_seq, Element, Verdict};
use orbitkit::operators::{
    operator_flatness_with, operator_orbit_member_with, singular_values, Operator, SPECTRUM_TOL,
};
use orbitkit::orbit::{
    decompose_finite, default_grid, extreme_point_check, fixture, flatness_verdict_with, orbit_member,
    power_grid, q_certificate_verify, reconstruct, FlatVerdict, FlatnessConfig, FlatnessReport, FIXTURE_NAMES,
};
use orbitkit::spaces::{norm, NormValue, SpaceSpec};
use orbitkit::stepfn::{SeqVector, StepFunction};
use orbitkit::{rational, Rational};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

const EXIT_OK: u8 = 0;
const EXIT_FAILS: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "orbitkit", version, about = "Exact orbit, majorization and flatness checks")]
struct Cli {
    /// Dilation grid as exponents of two, `LO:HI`.
    #[arg(long, global = true, value_name = "LO:HI")]
    grid: Option<String>,
    /// Flatness threshold, or relative spectrum tolerance for `svd-orbit`.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Reject approximate norm values.
    #[arg(long, global = true)]
    exact_only: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decreasing rearrangement of a function or sequence.
    Rearrange { input: String },
    /// Norm in a symmetric space.
    Norm {
        #[arg(long)]
        space: String,
        input: String,
    },
    /// Whether `eta ≼ xi`.
    Majorize { xi: String, eta: String },
    /// Whether `g ∈ Ω(f)`, and with `--space` whether `g` is extreme.
    OrbitCheck {
        f: String,
        g: String,
        #[arg(long)]
        space: Option<String>,
    },
    /// Verify an approximation certificate `(h, p)` for `g` against `f`.
    VerifyCert {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        h: String,
        /// Dilation factor `p ≥ 1`, as `"p/q"` or an integer.
        #[arg(long)]
        p: String,
        #[arg(long)]
        space: Option<String>,
    },
    /// Convex combination of signed partial permutations mapping `xi` to `eta`.
    Decompose { xi: String, eta: String },
    /// Flatness verdict of `f` in a space.
    Flatness {
        #[arg(long)]
        space: String,
        input: String,
    },
    /// The concave construction `ψ_κ` for `f` and `κ`.
    PsiKappa { f: String, kappa: String },
    /// Whether `R ∈ Ω(T)` for matrices, and with `--space` the flatness of `T`.
    SvdOrbit {
        r: String,
        t: String,
        #[arg(long)]
        space: Option<String>,
    },
    /// Emit a named fixture, or list the names.
    Fixtures { name: Option<String> },
}

/// An error with an optional JSON pointer into the offending input.
#[derive(Debug)]
struct Failure {
    kind: String,
    message: String,
    pointer: Option<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            kind: "input".into(),
            message: message.into(),
            pointer: None,
        }
    }
}

impl From<orbitkit::Error> for Failure {
    fn from(e: orbitkit::Error) -> Self {
        Failure {
            kind: e.kind().into(),
            message: e.to_string(),
            pointer: None,
        }
    }
}

type Outcome = std::result::Result<(Value, u8), Failure>;

fn read_source(arg: &str) -> Result<String, Failure> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(arg.to_string());
    }
    let path = Path::new(arg);
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {arg}: {e}")))
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            serde_path_to_error::Segment::Seq { index } => out.push_str(&index.to_string()),
            serde_path_to_error::Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            serde_path_to_error::Segment::Enum { variant } => out.push_str(variant),
            serde_path_to_error::Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn parse_value<T: DeserializeOwned>(what: &str, v: Value) -> Result<T, Failure> {
    serde_path_to_error::deserialize(v).map_err(|e| Failure {
        kind: "malformed".into(),
        pointer: Some(pointer_of(e.path())),
        message: format!("{what}: {}", e.inner()),
    })
}

fn load_json(what: &str, arg: &str) -> Result<Value, Failure> {
    let text = read_source(arg)?;
    serde_json::from_str(&text).map_err(|e| Failure {
        kind: "malformed".into(),
        pointer: Some(String::new()),
        message: format!("{what}: {e}"),
    })
}

fn load<T: DeserializeOwned>(what: &str, arg: &str) -> Result<T, Failure> {
    parse_value(what, load_json(what, arg)?)
}

/// Arrays are sequences, objects are step functions.
fn load_element(what: &str, arg: &str) -> Result<Element, Failure> {
    let v = load_json(what, arg)?;
    if v.is_array() {
        parse_value::<SeqVector>(what, v).map(Element::Sequence)
    } else {
        parse_value::<StepFunction>(what, v).map(Element::Function)
    }
}

fn load_function(what: &str, arg: &str) -> Result<StepFunction, Failure> {
    match load_element(what, arg)? {
        Element::Function(f) => Ok(f),
        Element::Sequence(_) => Err(Failure::input(format!("{what} must be a step function"))),
    }
}

fn load_sequence(what: &str, arg: &str) -> Result<SeqVector, Failure> {
    load(what, arg)
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn verdict_code(v: &Verdict) -> u8 {
    if v.holds {
        EXIT_OK
    } else {
        EXIT_FAILS
    }
}

fn flat_code(v: FlatVerdict) -> u8 {
    match v {
        FlatVerdict::Flat => EXIT_OK,
        FlatVerdict::NonFlat => EXIT_FAILS,
        FlatVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

struct Options {
    grid: Vec<Rational>,
    tol: Option<f64>,
    exact_only: bool,
}

impl Options {
    fn from_cli(cli: &Cli) -> Result<Self, Failure> {
        let grid = match &cli.grid {
            None => default_grid(),
            Some(g) => {
                let (lo, hi) = g
                    .split_once(':')
                    .ok_or_else(|| Failure::input(format!("--grid expects LO:HI, got {g}")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<i64>()
                        .map_err(|_| Failure::input(format!("--grid exponent {s} is not an integer")))
                };
                power_grid(parse(lo)?, parse(hi)?)?
            }
        };
        if let Some(t) = cli.tol {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Failure::input(format!("--tol {t} must be finite and nonnegative")));
            }
        }
        Ok(Options {
            grid,
            tol: cli.tol,
            exact_only: cli.exact_only,
        })
    }

    fn flatness_config(&self) -> FlatnessConfig {
        let mut cfg = FlatnessConfig::default();
        if let Some(t) = self.tol {
            cfg.tol_flat = t;
        }
        cfg
    }

    fn require_exact(&self, values: &[&NormValue]) -> Result<(), Failure> {
        if self.exact_only && values.iter().any(|v| matches!(v, NormValue::Approx { .. })) {
            return Err(Failure {
                kind: "approximate".into(),
                message: "an approximate norm was produced under --exact-only".into(),
                pointer: None,
            });
        }
        Ok(())
    }

    fn check_report(&self, r: &FlatnessReport) -> Result<(), Failure> {
        self.require_exact(&r.values.iter().collect::<Vec<_>>())
    }
}

fn run(cmd: &Command, opts: &Options) -> Outcome {
    match cmd {
        Command::Rearrange { input } => {
            let out = match load_element("input", input)? {
                Element::Sequence(s) => Element::Sequence(s.rearrange()),
                Element::Function(f) => Element::Function(f.rearrange()),
            };
            Ok((json!({ "rearrangement": to_json(&out) }), EXIT_OK))
        }
        Command::Norm { space, input } => {
            let space: SpaceSpec = load("space", space)?;
            let f = load_element("input", input)?;
            let n = norm(&space, &f)?;
            opts.require_exact(&[&n])?;
            Ok((json!({ "space": to_json(&space), "norm": to_json(&n) }), EXIT_OK))
        }
        Command::Majorize { xi, eta } => {
            let xi = load_element("xi", xi)?;
            let eta = load_element("eta", eta)?;
            let verdict = submajorizes_element(&eta, &xi)?;
            let gap = hardy_gap(&eta, &xi)?;
            let code = verdict_code(&verdict);
            Ok((json!({ "verdict": to_json(&verdict), "gap": to_json(&gap) }), code))
        }
        Command::OrbitCheck { f, g, space } => {
            let f = load_element("f", f)?;
            let g = load_element("g", g)?;
            let verdict = orbit_member(&g, &f)?;
            let mut report = json!({ "member": to_json(&verdict) });
            if let Some(s) = space {
                let space: SpaceSpec = load("space", s)?;
                report["extreme_point"] = json!(extreme_point_check(&g, &f, &space)?);
            }
            let code = verdict_code(&verdict);
            Ok((report, code))
        }
        Command::VerifyCert { f, g, h, p, space } => {
            let f = load_function("f", f)?;
            let g = load_function("g", g)?;
            let h = load_function("h", h)?;
            let p = rational::parse(p)?;
            let space: Option<SpaceSpec> = space.as_deref().map(|s| load("space", s)).transpose()?;
            let report = q_certificate_verify(&f, &g, &h, &p, space.as_ref())?;
            if let Some(d) = &report.distance {
                opts.require_exact(&[d])?;
            }
            let code = verdict_code(&report.verdict);
            Ok((to_json(&report), code))
        }
        Command::Decompose { xi, eta } => {
            let xi = load_sequence("xi", xi)?;
            let eta = load_sequence("eta", eta)?;
            let check = submajorizes_seq(&eta, &xi);
            if !check.holds {
                return Ok((json!({ "verdict": to_json(&check) }), EXIT_FAILS));
            }
            let cert = decompose_finite(&xi, &eta)?;
            let rebuilt = reconstruct(&cert, &xi)?;
            let exact = rebuilt.padded(eta.len()) == eta.padded(rebuilt.len());
            let report = json!({
                "verdict": to_json(&check),
                "certificate": to_json(&cert),
                "reconstruction_exact": exact,
            });
            Ok((report, if exact { EXIT_OK } else { EXIT_FAILS }))
        }
        Command::Flatness { space, input } => {
            let space: SpaceSpec = load("space", space)?;
            let f = load_element("input", input)?;
            let report = flatness_verdict_with(&space, &f, &opts.grid, &opts.flatness_config())?;
            opts.check_report(&report)?;
            let code = flat_code(report.verdict);
            Ok((to_json(&report), code))
        }
        Command::PsiKappa { f, kappa } => {
            let f = load_function("f", f)?;
            let kappa: KappaSeq = load("kappa", kappa)?;
            let pk = psi_kappa_full(&f, &kappa)?;
            let report = json!({
                "psi": to_json(&pk.psi),
                "big_psi": to_json(&pk.big_psi),
                "big_f": to_json(&pk.big_f),
                "grid": to_json(&pk.grid),
            });
            Ok((report, EXIT_OK))
        }
        Command::SvdOrbit { r, t, space } => {
            let r: Operator = load("r", r)?;
            let t: Operator = load("t", t)?;
            let (sr, st) = (singular_values(&r)?, singular_values(&t)?);
            if opts.exact_only && !(sr.is_exact() && st.is_exact()) {
                return Err(Failure {
                    kind: "approximate".into(),
                    message: "dense matrices give approximate spectra, rejected under --exact-only".into(),
                    pointer: None,
                });
            }
            let verdict = operator_orbit_member_with(&r, &t, opts.tol.unwrap_or(SPECTRUM_TOL))?;
            let mut report = json!({
                "member": to_json(&verdict),
                "spectrum_r": to_json(&sr),
                "spectrum_t": to_json(&st),
            });
            if let Some(s) = space {
                let space: SpaceSpec = load("space", s)?;
                let fl = operator_flatness_with(&space, &t, &opts.grid, &FlatnessConfig::default())?;
                opts.check_report(&fl)?;
                report["flatness"] = to_json(&fl);
            }
            let code = verdict_code(&verdict);
            Ok((report, code))
        }
        Command::Fixtures { name } => match name {
            None => Ok((json!({ "fixtures": FIXTURE_NAMES }), EXIT_OK)),
            Some(n) => Ok((to_json(&fixture(n)?), EXIT_OK)),
        },
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("ORBITKIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::input(format!("ORBITKIT_THREADS={v} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    Ok(())
}

fn emit(report: &Value, output: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn error_report(f: &Failure) -> Value {
    let mut e = json!({ "kind": f.kind, "message": f.message });
    if let Some(p) = &f.pointer {
        e["pointer"] = json!(p);
    }
    json!({ "error": e })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads()
        .and_then(|()| Options::from_cli(&cli))
        .and_then(|opts| run(&cli.command, &opts));
    match result {
        Ok((report, code)) => match emit(&report, cli.output.as_deref()) {
            Ok(()) => ExitCode::from(code),
            Err(f) => {
                eprintln!("{}", f.message);
                ExitCode::from(EXIT_INPUT)
            }
        },
        Err(f) => {
            eprintln!("error: {}", f.message);
            let _ = emit(&error_report(&f), None);
            ExitCode::from(EXIT_INPUT)
        }
    }
}
