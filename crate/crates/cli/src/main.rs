//! `clab`: affine invariants, distance singularities and loci of surfaces in R⁴.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clab_core::congruence::PlaneCongruence;
use clab_core::distance::{classify_critical, distance, is_critical, ClassifyOptions};
use clab_core::document::SurfaceDocument;
use clab_core::frame::{adapted_frame, TransversalChoice};
use clab_core::invariants::PointGeometry;
use clab_core::loci::{focal_set, ridge_trace, semiumbilic_scan};
use clab_core::surface::SurfacePatch;
use clab_core::verify::verify_patch;
use clab_core::{parse, Error};

use output::{Cell, Json, Table};

#[derive(Parser, Debug)]
#[command(name = "clab", version, about = "Affine geometry of surfaces in R⁴")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Surface-definition document (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    surface: Option<PathBuf>,
    /// Grid points per parameter axis.
    #[arg(long, global = true, value_name = "N", default_value_t = 21)]
    grid: usize,
    /// Detection tolerance.
    #[arg(long, global = true, value_name = "T", default_value_t = 1e-6)]
    tol: f64,
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct At {
    /// Parameter point.
    #[arg(long, num_args = 2, value_names = ["U", "V"], allow_negative_numbers = true, required = true)]
    at: Vec<f64>,
}

impl At {
    fn pair(&self) -> (f64, f64) {
        (self.at[0], self.at[1])
    }
}

#[derive(Args, Debug)]
struct Point {
    /// Point of R⁴.
    #[arg(long, num_args = 4, value_names = ["X", "Y", "Z", "W"], allow_negative_numbers = true, required = true)]
    p: Vec<f64>,
}

impl Point {
    fn array(&self) -> [f64; 4] {
        [self.p[0], self.p[1], self.p[2], self.p[3]]
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Positive definiteness of the metric over the grid.
    CheckConvexity,
    /// Adapted frame and its condition residuals at a point.
    Frame(At),
    /// Affine normal plane, shape operators and conormal at a point.
    Invariants(At),
    /// Affine distance function Δ_p at a point.
    Distance {
        #[command(flatten)]
        p: Point,
        #[command(flatten)]
        at: At,
    },
    /// Singularity type of Δ_p at a critical point.
    Classify {
        #[command(flatten)]
        p: Point,
        #[command(flatten)]
        at: At,
    },
    /// Singular points (u, t, l) of the plane congruence.
    SingularLocus {
        /// First director field, four expressions (overrides the document).
        #[arg(long, num_args = 4, value_name = "EXPRS", requires = "delta", allow_hyphen_values = true)]
        xi: Option<Vec<String>>,
        /// Second director field, four expressions.
        #[arg(long, num_args = 4, value_name = "EXPRS", requires = "xi", allow_hyphen_values = true)]
        delta: Option<Vec<String>>,
        /// Samples of t and of l.
        #[arg(long, default_value_t = 41)]
        samples: usize,
        /// Half-width of the (t, l) window.
        #[arg(long, default_value_t = 5.0)]
        range: f64,
    },
    /// Affine focal set.
    Focal {
        /// Angles of ν in [0, π).
        #[arg(long, default_value_t = 24)]
        angles: usize,
    },
    /// Affine semiumbilic points.
    Semiumbilic,
    /// Ridge curves of order 4 and order-5 candidates.
    Ridge {
        /// Angles of ν in [0, π].
        #[arg(long, default_value_t = 24)]
        angles: usize,
    },
    /// Oracle cross-checks of every closed form on the surface.
    Verify,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Document(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("CLAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Rendered output plus exit code.
enum Report {
    Json(Json),
    Table(Table),
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    if g.grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    if g.tol.is_nan() || g.tol <= 0.0 {
        return Err(usage("--tol must be positive"));
    }
    let path = g.surface.as_ref().ok_or_else(|| usage("--surface FILE is required"))?;
    let doc = SurfaceDocument::read(path)?;
    let patch = doc.patch()?;
    let (report, code) = dispatch(&cli.command, &doc, &patch, g)?;
    let text = match (report, g.format) {
        (Report::Json(j), None | Some(Format::Json)) => j.render(),
        (Report::Json(_), Some(Format::Csv)) => return Err(usage("--format csv is not available for this subcommand")),
        (Report::Table(t), None | Some(Format::Csv)) => t.csv(),
        (Report::Table(t), Some(Format::Json)) => t.json().render(),
    };
    match &g.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", p.display()),
        })?,
        None => print!("{text}"),
    }
    Ok(code)
}

fn dispatch(cmd: &Command, doc: &SurfaceDocument, patch: &SurfacePatch, g: &Global) -> Result<(Report, u8), Failure> {
    let opts = ClassifyOptions {
        coeff_tol: g.tol,
        ..Default::default()
    };
    Ok(match cmd {
        Command::CheckConvexity => {
            let r = patch.check_convexity((g.grid, g.grid));
            let witness = r.witness.map_or(Json::Null, |w| Json::nums(&[w.0, w.1]));
            let j = Json::obj([
                ("result", Json::Str(if r.pass { "pass" } else { "fail" }.into())),
                ("points", Json::Int(r.points as i64)),
                ("witness", witness),
                ("reason", r.reason.clone().map_or(Json::Null, Json::Str)),
            ]);
            (Report::Json(j), if r.pass { 0 } else { 1 })
        }
        Command::Frame(at) => {
            let f = adapted_frame(patch, &TransversalChoice::Default, at.pair(), 4)?;
            let r = f.residuals;
            let j = Json::obj([
                ("u", Json::nums(&[at.pair().0, at.pair().1])),
                ("x", Json::nums(&f.tangent.x.value())),
                ("X1", Json::nums(&f.tangent.x1().value())),
                ("X2", Json::nums(&f.tangent.x2().value())),
                ("xi1", Json::nums(&f.xi1.value())),
                ("xi2", Json::nums(&f.xi2.value())),
                ("metric_flipped", Json::Bool(f.tangent.metric.flipped)),
                (
                    "residuals",
                    Json::obj([
                        ("det", Json::Num(r.det)),
                        ("h1_11", Json::Num(r.h1_11)),
                        ("h2_12", Json::Num(r.h2_12)),
                        ("h2_diag", Json::Num(r.h2_diag)),
                        ("sigma_part", Json::Num(r.sigma_part)),
                    ]),
                ),
            ]);
            (Report::Json(j), 0)
        }
        Command::Invariants(at) => {
            let geo = PointGeometry::at(patch, at.pair())?;
            let [e1, e2] = geo.xibar_values();
            let dw = geo.conormal_derivative();
            let fd = &geo.fundamental;
            let j = Json::obj([
                ("u", Json::nums(&[at.pair().0, at.pair().1])),
                ("xibar1", Json::nums(&e1)),
                ("xibar2", Json::nums(&e2)),
                ("W", Json::nums(&geo.normal.w.value())),
                ("dW", Json::Arr(dw.iter().map(|r| Json::nums(r)).collect())),
                ("S1bar", Json::matrix(&geo.normal.sbar[0])),
                ("S2bar", Json::matrix(&geo.normal.sbar[1])),
                ("h1bar", Json::matrix(&geo.normal.hbar[0])),
                ("h2bar", Json::matrix(&geo.normal.hbar[1])),
                ("S1", Json::matrix(&fd.s[0])),
                ("S2", Json::matrix(&fd.s[1])),
                (
                    "tau",
                    Json::Arr(fd.tau.iter().map(|ti| Json::Arr(ti.iter().map(|r| Json::nums(r)).collect())).collect()),
                ),
                ("structure_residual", Json::Num(fd.residual)),
            ]);
            (Report::Json(j), 0)
        }
        Command::Distance { p, at } => {
            let geo = PointGeometry::at(patch, at.pair())?;
            let ev = distance(&geo, p.array(), 2)?;
            let c = is_critical(&geo, p.array(), 1e-8)?;
            let j = Json::obj([
                ("u", Json::nums(&[at.pair().0, at.pair().1])),
                ("p", Json::nums(&p.array())),
                ("delta", Json::Num(ev.delta)),
                ("grad", Json::nums(&ev.grad)),
                ("hessian", Json::matrix(&ev.hess)),
                ("critical", Json::Bool(c.critical)),
                ("membership_residual", Json::Num(c.membership_residual)),
            ]);
            (Report::Json(j), 0)
        }
        Command::Classify { p, at } => {
            let geo = PointGeometry::at(patch, at.pair())?;
            let c = classify_critical(&geo, p.array(), &opts)?;
            let j = Json::obj([
                ("u", Json::nums(&[at.pair().0, at.pair().1])),
                ("p", Json::nums(&p.array())),
                ("label", Json::Str(c.label.to_string())),
                ("corank", Json::Int(c.corank as i64)),
                ("coefficients", Json::Arr(c.coeffs.iter().map(|x| Json::opt_num(*x)).collect())),
                ("kernel", c.kernel.map_or(Json::Null, |k| Json::nums(&k))),
                ("cubic_roots", c.cubic_roots.map_or(Json::Null, |n| Json::Int(n as i64))),
                ("cubic_discriminant", Json::opt_num(c.cubic_discriminant)),
                ("hessian_eigenvalues", Json::nums(&c.hessian_eigenvalues)),
            ]);
            (Report::Json(j), 0)
        }
        Command::SingularLocus { xi, delta, samples, range } => {
            let cong = match (xi, delta) {
                (Some(a), Some(b)) => {
                    let four = |v: &Vec<String>| -> Result<[clab_core::Expr; 4], Error> {
                        Ok([parse(&v[0])?, parse(&v[1])?, parse(&v[2])?, parse(&v[3])?])
                    };
                    PlaneCongruence::explicit(patch.clone(), four(a)?, four(b)?)
                }
                _ => doc.congruence()?,
            };
            let locus = cong.solve_singular_locus(g.grid, *samples, *range)?;
            let mut t = Table::new(&["u1", "u2", "t", "l", "corank"]);
            for s in locus {
                t.push(vec![Cell::Num(s.u.0), Cell::Num(s.u.1), Cell::Num(s.t), Cell::Num(s.l), Cell::Int(s.corank as i64)]);
            }
            (Report::Table(t), 0)
        }
        Command::Focal { angles } => {
            let f = focal_set(patch, g.grid, *angles)?;
            let mut t = Table::new(&["u1", "u2", "s", "t", "mult", "p1", "p2", "p3", "p4"]);
            for s in f {
                let mut row = vec![Cell::Num(s.u.0), Cell::Num(s.u.1), Cell::Num(s.s), Cell::Num(s.t), Cell::Int(s.multiplicity as i64)];
                row.extend(s.p.iter().map(|&x| Cell::Num(x)));
                t.push(row);
            }
            (Report::Table(t), 0)
        }
        Command::Semiumbilic => {
            let r = semiumbilic_scan(patch, g.grid, g.tol)?;
            let mut t = Table::new(&["u1", "u2", "a", "b", "lambda"]);
            for p in &r.points {
                t.push(vec![Cell::Num(p.u.0), Cell::Num(p.u.1), Cell::Num(p.a), Cell::Num(p.b), Cell::Num(p.lambda)]);
            }
            let diff = r.symmetric_difference().len();
            if diff > 0 {
                eprintln!("warning: detectors disagree on {diff} grid edges");
            }
            (Report::Table(t), 0)
        }
        Command::Ridge { angles } => {
            let r = ridge_trace(patch, g.grid, *angles, &opts)?;
            let mut t = Table::new(&["chain", "index", "u1", "u2", "s", "t", "order", "c3", "c4", "c5", "c6"]);
            for (ci, chain) in r.chains.iter().enumerate() {
                for (k, p) in chain.iter().enumerate() {
                    let mut row = vec![
                        Cell::Int(ci as i64),
                        Cell::Int(k as i64),
                        Cell::Num(p.u.0),
                        Cell::Num(p.u.1),
                        Cell::Num(p.s),
                        Cell::Num(p.t),
                        Cell::Int(p.order as i64),
                    ];
                    row.extend(p.coeffs.iter().map(|&c| Cell::Num(c)));
                    t.push(row);
                }
            }
            (Report::Table(t), 0)
        }
        Command::Verify => {
            let checks = verify_patch(patch, g.grid)?;
            let mut t = Table::new(&["check", "pass", "worst", "limit", "samples"]);
            let all = checks.iter().all(|c| c.pass);
            for c in checks {
                t.push(vec![
                    Cell::Text(c.name.into()),
                    Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
                    Cell::Num(c.worst),
                    Cell::Num(c.limit),
                    Cell::Int(c.samples as i64),
                ]);
            }
            (Report::Table(t), if all { 0 } else { 1 })
        }
    })
}
