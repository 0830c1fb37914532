//! Command-line front end. Every subcommand accepts `--config FILE`; flags
//! override values from the file.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{self, ScanPath};
use crate::config::{self, Format, RunConfig, SolverPath, Task};
use crate::curvature::{curvature_report, write_points_csv};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Shape};
use crate::pde::{self, GridOptions};
use crate::radial;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ylab", version, about = "Loewner-Nirenberg solutions and the curvature of their conformal metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for v on a domain and write the field.
    Solve(DomainTask),
    /// Solve and report Ricci and sectional curvature at interior nodes.
    Curvature(DomainTask),
    /// Check the negativity inequalities on a convex domain.
    VerifyConvex(DomainTask),
    /// Largest Ricci eigenvalue across a family of annuli.
    ScanAnnulus(ScanArgs),
    /// Compare the image of a spherical cap complement with the hyperbolic ball.
    CapCheck(CapArgs),
    /// Grid solves across the star-shaped family in R^4.
    StarScan(StarArgs),
    /// Fast built-in checks against closed forms.
    Selftest(CommonArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// TOML run configuration; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Output formats, comma separated (csv, json).
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,
}

#[derive(Args, Debug, Default)]
pub struct SolverArgs {
    /// radial, grid or u_truncated.
    #[arg(long)]
    pub path: Option<String>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Boundary value for the truncated u-problem.
    #[arg(long = "M")]
    pub m_bound: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct DomainTask {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// ball, annulus, ellipsoid, ball_minus_balls or half_space_cap.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "R")]
    pub outer: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub axes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub n: Option<usize>,
    /// Inner radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r0: Option<Vec<f64>>,
    /// Outer radii, comma separated.
    #[arg(long = "R", value_delimiter = ',')]
    pub outer: Option<Vec<f64>>,
    /// Continue geometrically from the last pair until the sign flips.
    #[arg(long)]
    pub extend: bool,
    #[arg(long)]
    pub r0_factor: Option<f64>,
    #[arg(long = "R-factor")]
    pub r_factor: Option<f64>,
    #[arg(long)]
    pub max_rows: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct CapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Cap radius is 1/i.
    #[arg(long)]
    pub i: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct StarArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub members: Option<usize>,
    #[arg(long = "R")]
    pub outer: Option<f64>,
}

fn set(table: &mut toml::Table, path: &[&str], value: toml::Value) {
    let (last, head) = path.split_last().expect("nonempty key path");
    let mut t = table;
    for k in head {
        let entry = t
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if !entry.is_table() {
            *entry = toml::Value::Table(toml::Table::new());
        }
        t = entry.as_table_mut().expect("just made a table");
    }
    t.insert(last.to_string(), value);
}

fn floats(xs: &[f64]) -> toml::Value {
    toml::Value::Array(xs.iter().map(|&x| toml::Value::Float(x)).collect())
}

fn apply_common(t: &mut toml::Table, c: &CommonArgs) {
    if let Some(d) = &c.out {
        set(t, &["output", "dir"], toml::Value::String(d.clone()));
    }
    if let Some(f) = &c.format {
        let list = f.iter().map(|s| toml::Value::String(s.trim().to_string())).collect();
        set(t, &["output", "formats"], toml::Value::Array(list));
    }
}

fn apply_solver(t: &mut toml::Table, s: &SolverArgs) {
    if let Some(p) = &s.path {
        set(t, &["solver", "path"], toml::Value::String(p.clone()));
    }
    if let Some(h) = s.h {
        set(t, &["solver", "h"], toml::Value::Float(h));
    }
    if let Some(x) = s.tol {
        set(t, &["solver", "tol"], toml::Value::Float(x));
    }
    if let Some(m) = s.m_bound {
        set(t, &["solver", "M"], toml::Value::Float(m));
    }
}

fn int(n: usize) -> toml::Value {
    toml::Value::Integer(n as i64)
}

/// Loads the config file (if any), overlays the flags and validates.
pub fn resolve(command: &Command) -> Result<RunConfig> {
    let (task, common) = match command {
        Command::Solve(a) => (Task::Solve, &a.common),
        Command::Curvature(a) => (Task::Curvature, &a.common),
        Command::VerifyConvex(a) => (Task::VerifyConvex, &a.common),
        Command::ScanAnnulus(a) => (Task::ScanAnnulus, &a.common),
        Command::CapCheck(a) => (Task::CapCheck, &a.common),
        Command::StarScan(a) => (Task::StarScan, &a.common),
        Command::Selftest(a) => (Task::Selftest, a),
    };
    let mut table = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            config::parse_table(&text).map_err(|e| match e {
                Error::Config(mut d) => {
                    for x in d.0.iter_mut() {
                        x.location = format!("{}: {}", path.display(), x.location);
                    }
                    Error::Config(d)
                }
                other => other,
            })?
        }
        None => toml::Table::new(),
    };
    table.insert("task".into(), toml::Value::String(task.name().into()));
    apply_common(&mut table, common);
    match command {
        Command::Solve(a) | Command::Curvature(a) | Command::VerifyConvex(a) => {
            apply_solver(&mut table, &a.solver);
            if let Some(kind) = &a.domain {
                let same = table
                    .get("domain")
                    .and_then(|d| d.get("kind"))
                    .and_then(|k| k.as_str())
                    == Some(kind.as_str());
                if !same {
                    table.remove("domain");
                }
                set(&mut table, &["domain", "kind"], toml::Value::String(kind.clone()));
            }
            if let Some(n) = a.n {
                set(&mut table, &["domain", "n"], int(n));
            }
            if let Some(r) = a.outer {
                set(&mut table, &["domain", "R"], toml::Value::Float(r));
            }
            if let Some(r) = a.r0 {
                set(&mut table, &["domain", "r0"], toml::Value::Float(r));
            }
            if let Some(x) = &a.axes {
                set(&mut table, &["domain", "axes"], floats(x));
            }
            if let Some(x) = &a.center {
                set(&mut table, &["domain", "center"], floats(x));
            }
        }
        Command::ScanAnnulus(a) => {
            apply_solver(&mut table, &a.solver);
            if let Some(n) = a.n {
                set(&mut table, &["scan", "n"], int(n));
            }
            if let Some(x) = &a.r0 {
                set(&mut table, &["scan", "r0"], floats(x));
            }
            if let Some(x) = &a.outer {
                set(&mut table, &["scan", "R"], floats(x));
            }
            if a.extend {
                set(&mut table, &["scan", "extend"], toml::Value::Boolean(true));
            }
            if let Some(x) = a.r0_factor {
                set(&mut table, &["scan", "r0_factor"], toml::Value::Float(x));
            }
            if let Some(x) = a.r_factor {
                set(&mut table, &["scan", "R_factor"], toml::Value::Float(x));
            }
            if let Some(x) = a.max_rows {
                set(&mut table, &["scan", "max_rows"], int(x));
            }
        }
        Command::CapCheck(a) => {
            apply_solver(&mut table, &a.solver);
            if let Some(i) = a.i {
                set(&mut table, &["cap", "i"], toml::Value::Float(i));
            }
            if let Some(n) = a.n {
                set(&mut table, &["cap", "n"], int(n));
            }
        }
        Command::StarScan(a) => {
            apply_solver(&mut table, &a.solver);
            if let Some(m) = a.members {
                set(&mut table, &["star", "members"], int(m));
            }
            if let Some(r) = a.outer {
                set(&mut table, &["star", "R"], toml::Value::Float(r));
            }
        }
        Command::Selftest(_) => {}
    }
    let text = toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))?;
    config::parse_config(&text)
}

/// Files produced by a run plus the process exit code.
pub struct Outcome {
    pub code: i32,
    pub summary: serde_json::Value,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    formats: Vec<Format>,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Self {
        Artifacts {
            dir: PathBuf::from(&cfg.output.dir),
            formats: cfg.output.formats.clone(),
            files: Vec::new(),
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        if self.wants(Format::Csv) {
            let mut buf = Vec::new();
            write(&mut buf)?;
            self.files.push((format!("{name}.csv"), buf));
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        if self.wants(Format::Json) {
            let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
            buf.push(b'\n');
            self.files.push((format!("{name}.json"), buf));
        }
        Ok(())
    }

    fn flush(self) -> Result<Vec<PathBuf>> {
        if self.files.is_empty() {
            return Ok(Vec::new());
        }
        fs::create_dir_all(&self.dir)?;
        let mut out = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes)?;
            out.push(path);
        }
        Ok(out)
    }
}

fn radial_shape(domain: &Domain) -> Result<(usize, Option<f64>, f64)> {
    let n = domain.dim();
    match domain.shape() {
        Shape::Ball(s) if s.center.iter().all(|&c| c == 0.0) => Ok((n, None, s.radius)),
        Shape::Annulus { inner, outer } => Ok((n, Some(*inner), *outer)),
        _ => Err(Error::Precondition(
            "the radial path needs a centred ball or an annulus".into(),
        )),
    }
}

fn grid_opts(cfg: &RunConfig, domain: &Domain) -> GridOptions {
    GridOptions::new(cfg.solver.h.unwrap_or_else(|| GridOptions::default_h(domain)), cfg.solver.tol)
}

/// Executes a validated configuration and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut art = Artifacts::new(cfg);
    let task = cfg.task;
    let (code, summary) = match task {
        Task::Solve | Task::Curvature => {
            let spec = cfg.domain.as_ref().expect("validated");
            let domain = spec.build()?;
            match cfg.path() {
                SolverPath::Radial => {
                    let (n, inner, outer) = radial_shape(&domain)?;
                    let sol = match inner {
                        None => radial::solve_ball(n, outer)?,
                        Some(r0) => radial::solve_annulus(n, r0, outer, cfg.solver.tol)?,
                    };
                    art.csv(task.name(), |b| sol.write_csv(b))?;
                    let (at, vmax) = sol.max_v();
                    let (ric, ric_at) = radial::max_ricci(&sol);
                    let summary = json!({
                        "task": task.name(),
                        "path": "radial",
                        "v_max": vmax,
                        "argmax_r": at,
                        "v_first": sol.v[0],
                        "max_ricci": ric,
                        "argmax_ricci_r": ric_at,
                        "relative_residual": sol.max_relative_residual(),
                        "newton_iterations": sol.newton_iterations,
                    });
                    (EXIT_PASS, summary)
                }
                SolverPath::Grid => {
                    let (field, rep) = pde::solve_v_with(&domain, &grid_opts(cfg, &domain))?;
                    let mut summary = json!({ "task": task.name(), "path": "grid", "solve": rep });
                    if task == Task::Solve {
                        art.csv(task.name(), |b| field.write_csv(b))?;
                    } else {
                        let (report, points) = curvature_report(&field, &analysis::domain_label(&domain))?;
                        art.csv(task.name(), |b| write_points_csv(&points, b))?;
                        summary["curvature"] = serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?;
                    }
                    (EXIT_PASS, summary)
                }
                SolverPath::UTruncated => {
                    let m = cfg.solver.m_bound.expect("validated");
                    let h = cfg.solver.h.unwrap_or_else(|| GridOptions::default_h(&domain));
                    let u = pde::solve_u_truncated(&domain, h, m, cfg.solver.tol)?;
                    let v = pde::u_to_v(&u);
                    art.csv(task.name(), |b| v.write_csv(b))?;
                    let vmax = v.interior_indices().iter().map(|&i| v.values[i]).fold(0.0, f64::max);
                    (EXIT_PASS, json!({ "task": task.name(), "path": "u_truncated", "M": m, "h": h, "v_max": vmax }))
                }
            }
        }
        Task::VerifyConvex => {
            let domain = cfg.domain.as_ref().expect("validated").build()?;
            let opts = grid_opts(cfg, &domain);
            let verdict = analysis::verify_convex(&domain, opts.h, opts.tol)?;
            art.csv(task.name(), |b| {
                use std::io::Write;
                writeln!(b, "name,bound,worst,margin,pass")?;
                for m in &verdict.margins {
                    writeln!(b, "{},{},{},{},{}", m.name, crate::fmt::f(m.bound), crate::fmt::f(m.worst), crate::fmt::f(m.margin), m.pass)?;
                }
                Ok(())
            })?;
            let summary = serde_json::to_value(&verdict).map_err(|e| Error::Parse(e.to_string()))?;
            (if verdict.pass { EXIT_PASS } else { EXIT_VIOLATION }, summary)
        }
        Task::ScanAnnulus => {
            let s = cfg.scan.as_ref().expect("validated");
            let path = match cfg.path() {
                SolverPath::Radial => ScanPath::Radial,
                SolverPath::Grid => ScanPath::Grid {
                    h: cfg.solver.h.unwrap_or(s.outer.iter().cloned().fold(0.0, f64::max) / 32.0),
                    tol: cfg.solver.tol,
                },
                SolverPath::UTruncated => {
                    return Err(Error::Precondition("annulus scans use the radial or grid path".into()))
                }
            };
            let mut scan = analysis::scan_annulus(s.n, &s.r0, &s.outer, &path)?;
            if s.extend && scan.summary().threshold.is_none() {
                let last = scan.rows.last().expect("nonempty").params.clone();
                let more = analysis::extend_annulus_scan(
                    s.n,
                    last[0] * s.r0_factor,
                    last[1] * s.r_factor,
                    s.r0_factor,
                    s.r_factor,
                    s.max_rows,
                    &path,
                )?;
                scan.rows.extend(more.rows);
            }
            art.csv(task.name(), |b| scan.write_csv(b))?;
            let sum = scan.summary();
            let code = if sum.failed_rows > 0 {
                EXIT_SOLVER
            } else if sum.strictly_increasing {
                EXIT_PASS
            } else {
                EXIT_VIOLATION
            };
            (code, scan.to_json())
        }
        Task::CapCheck => {
            let c = cfg.cap.as_ref().expect("validated");
            let h = cfg.solver.h.unwrap_or(1.0 / 32.0);
            let verdict = analysis::cap_complement_check(c.i, c.n, h, cfg.solver.tol)?;
            let summary = serde_json::to_value(&verdict).map_err(|e| Error::Parse(e.to_string()))?;
            art.csv(task.name(), |b| {
                use std::io::Write;
                writeln!(b, "i,n,h,image_radius,sectional_deviation,ricci_deviation,pass")?;
                writeln!(
                    b,
                    "{},{},{},{},{},{},{}",
                    crate::fmt::f(c.i),
                    c.n,
                    crate::fmt::f(h),
                    crate::fmt::f(verdict.image_radius),
                    crate::fmt::f(verdict.sectional_deviation),
                    crate::fmt::f(verdict.ricci_deviation),
                    verdict.pass
                )?;
                Ok(())
            })?;
            (if verdict.pass { EXIT_PASS } else { EXIT_VIOLATION }, summary)
        }
        Task::StarScan => {
            let s = cfg.star.clone().unwrap_or_default();
            let fam = analysis::star_shaped_family(4, s.members, s.outer)?;
            let scan = analysis::star_scan(&fam, cfg.solver.h.unwrap_or(0.1), cfg.solver.tol.max(1e-8));
            art.csv(task.name(), |b| scan.write_csv(b))?;
            let sum = scan.summary();
            let code = if sum.failed_rows > 0 {
                EXIT_SOLVER
            } else if sum.strictly_increasing {
                EXIT_PASS
            } else {
                EXIT_VIOLATION
            };
            (code, scan.to_json())
        }
        Task::Selftest => {
            let checks = selftest();
            let pass = checks.iter().all(|c| c.1);
            let list: Vec<_> = checks.iter().map(|(n, ok, d)| json!({ "check": n, "pass": ok, "detail": d })).collect();
            art.csv(task.name(), |b| {
                use std::io::Write;
                writeln!(b, "check,pass,detail")?;
                for (n, ok, d) in &checks {
                    writeln!(b, "{n},{ok},{}", crate::fmt::f(*d))?;
                }
                Ok(())
            })?;
            (if pass { EXIT_PASS } else { EXIT_VIOLATION }, json!({ "task": "selftest", "checks": list }))
        }
    };
    art.json(task.name(), &summary)?;
    let files = art.flush()?;
    Ok(Outcome { code, summary, files })
}

/// `(name, pass, measured deviation)` for quick closed-form checks.
pub fn selftest() -> Vec<(&'static str, bool, f64)> {
    let mut out = Vec::new();
    let ball = radial::solve_ball(3, 1.0).map(|sol| {
        radial::curvature_radial(&sol)
            .iter()
            .map(|c| {
                (c.k_rad_tan + 1.0)
                    .abs()
                    .max((c.k_tan_tan + 1.0).abs())
                    .max((c.ric_rad + 2.0).abs())
                    .max((c.ric_tan + 2.0).abs())
            })
            .fold(0.0, f64::max)
    });
    let d = ball.unwrap_or(f64::INFINITY);
    out.push(("poincare_ball_curvature", d <= 1e-10, d));

    let mut lift = 0.0f64;
    for k in 0..=30 {
        let r = 10f64.powf(-3.0 + 0.2 * k as f64);
        let x = [r * 0.6, -r * 0.8, r * 0.0];
        let back = analysis::stereographic_project(&analysis::stereographic_lift(&x)).unwrap_or_default();
        let err = if back.len() == 3 { crate::linalg::norm(&crate::linalg::sub(&back, &x)) } else { f64::INFINITY };
        lift = lift.max(err);
    }
    out.push(("stereographic_round_trip", lift <= 1e-12, lift));

    let trunc = radial::solve_ball_u_truncated(3, 1.0, 100.0)
        .map(|t| (t.v_center - radial::truncated_ball_exact_v_center(3, 1.0, 100.0)).abs())
        .unwrap_or(f64::INFINITY);
    out.push(("truncated_ball_closed_form", trunc <= 1e-9, trunc));

    let flip = analysis::scan_annulus(3, &[0.05, 0.4], &[4.0], &ScanPath::Radial)
        .map(|s| s.rows[1].metrics[0] - s.rows[0].metrics[0])
        .unwrap_or(f64::NAN);
    let ok = analysis::scan_annulus(3, &[0.05], &[4.0], &ScanPath::Radial)
        .map(|s| s.rows[0].metrics[0] > 0.0)
        .unwrap_or(false);
    out.push(("annulus_positive_ricci", ok && flip > 0.0, flip));

    let grid = Domain::unit_ball(3)
        .and_then(|d| pde::solve_v(&d, 0.125, 1e-10))
        .map(|(f, _)| {
            f.interior_indices()
                .iter()
                .map(|&i| {
                    let r2: f64 = f.position(i).iter().map(|c| c * c).sum();
                    (f.values[i] - 0.5 * (1.0 - r2)).abs()
                })
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::INFINITY);
    out.push(("grid_ball_profile", grid <= 1e-8, grid));
    out
}

/// Caps the worker pool from `YLAB_THREADS` when set to a positive integer.
pub fn init_threads() {
    if let Some(k) = std::env::var("YLAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if k > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
}

/// Parses arguments, runs, prints the summary and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SOLVER } else { EXIT_PASS };
        }
    };
    init_threads();
    let cfg = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    match run(&cfg) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
            for f in &out.files {
                eprintln!("wrote {}", f.display());
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_SOLVER
        }
    }
}
