//! Run configuration: a TOML document naming a task, a domain, solver
//! settings and output locations.
//!
//! ```toml
//! task = "verify-convex"
//! domain = { kind = "ellipsoid", axes = [1.0, 1.5, 2.0] }
//!
//! [solver]
//! path = "grid"
//! h = 0.02
//! tol = 1e-10
//!
//! [output]
//! formats = ["csv", "json"]
//! dir = "out"
//! ```

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::error::{Diagnostics, Error, Result};
use crate::geometry::{Domain, Sphere};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Solve,
    Curvature,
    VerifyConvex,
    ScanAnnulus,
    CapCheck,
    StarScan,
    Selftest,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Curvature => "curvature",
            Task::VerifyConvex => "verify-convex",
            Task::ScanAnnulus => "scan-annulus",
            Task::CapCheck => "cap-check",
            Task::StarScan => "star-scan",
            Task::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(rename = "R")]
        radius: f64,
    },
    Annulus {
        #[serde(default = "default_n")]
        n: usize,
        r0: f64,
        #[serde(rename = "R")]
        outer: f64,
    },
    Ellipsoid {
        axes: Vec<f64>,
    },
    BallMinusBalls {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(rename = "R")]
        outer: f64,
        holes: Vec<HoleSpec>,
    },
    HalfSpaceCap {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(rename = "R")]
        radius: f64,
        normal: Vec<f64>,
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothing: Option<f64>,
    },
}

fn default_n() -> usize {
    3
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { n, .. }
            | DomainSpec::Annulus { n, .. }
            | DomainSpec::BallMinusBalls { n, .. }
            | DomainSpec::HalfSpaceCap { n, .. } => *n,
            DomainSpec::Ellipsoid { axes } => axes.len(),
        }
    }

    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Ball { n, center, radius } => {
                Domain::ball(*n, center.clone().unwrap_or_else(|| vec![0.0; *n]), *radius)
            }
            DomainSpec::Annulus { n, r0, outer } => Domain::annulus(*n, *r0, *outer),
            DomainSpec::Ellipsoid { axes } => Domain::ellipsoid(axes.clone()),
            DomainSpec::BallMinusBalls { n, outer, holes } => Domain::ball_minus_balls(
                *n,
                Sphere::new(vec![0.0; *n], *outer),
                holes.iter().map(|s| Sphere::new(s.center.clone(), s.radius)).collect(),
            ),
            DomainSpec::HalfSpaceCap {
                n,
                radius,
                normal,
                offset,
                smoothing,
            } => Domain::half_space_cap(
                *n,
                Sphere::new(vec![0.0; *n], *radius),
                normal.clone(),
                *offset,
                smoothing.unwrap_or_else(|| Domain::default_cap_smoothing(*radius)),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Radial,
    Grid,
    UTruncated,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// When absent: radial for annulus scans, grid otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<SolverPath>,
    /// Mesh width; when absent, the domain diameter over 64.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Boundary value for the truncated u-problem.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m_bound: Option<f64>,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            path: None,
            h: None,
            tol: default_tol(),
            m_bound: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default = "default_n")]
    pub n: usize,
    pub r0: Vec<f64>,
    #[serde(rename = "R")]
    pub outer: Vec<f64>,
    /// Keep extending geometrically from the last pair until the sign flips.
    #[serde(default)]
    pub extend: bool,
    #[serde(default = "half")]
    pub r0_factor: f64,
    #[serde(rename = "R_factor", default = "one")]
    pub r_factor: f64,
    #[serde(default = "default_max_rows")]
    pub max_rows: usize,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

fn default_max_rows() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CapBlock {
    pub i: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StarBlock {
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(rename = "R", default = "two")]
    pub outer: f64,
}

fn default_members() -> usize {
    3
}

fn two() -> f64 {
    2.0
}

impl Default for StarBlock {
    fn default() -> Self {
        StarBlock {
            members: default_members(),
            outer: two(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn default_dir() -> String {
    "ylab-out".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            formats: default_formats(),
            dir: default_dir(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<CapBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star: Option<StarBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn new(task: Task) -> Self {
        RunConfig {
            task,
            domain: None,
            solver: SolverBlock::default(),
            scan: None,
            cap: None,
            star: None,
            output: OutputBlock::default(),
        }
    }

    pub fn path(&self) -> SolverPath {
        self.solver.path.unwrap_or(match self.task {
            Task::ScanAnnulus => SolverPath::Radial,
            _ => SolverPath::Grid,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks value constraints and task/block compatibility.
    pub fn validate(&self) -> Result<()> {
        let mut diag = Diagnostics::default();
        if !(self.solver.tol > 0.0) {
            diag.push("solver.tol", format!("tolerance must be positive, got {}", self.solver.tol));
        }
        if let Some(h) = self.solver.h {
            if !(h > 0.0 && h.is_finite()) {
                diag.push("solver.h", format!("mesh width must be positive, got {h}"));
            }
        }
        if let Some(m) = self.solver.m_bound {
            if !(m > 0.0 && m.is_finite()) {
                diag.push("solver.M", format!("boundary value must be positive, got {m}"));
            }
        }
        if self.solver.path == Some(SolverPath::UTruncated) && self.solver.m_bound.is_none() {
            diag.push("solver.M", "path = \"u_truncated\" needs a boundary value M");
        }
        if let Some(d) = &self.domain {
            check_domain(d, &mut diag);
        }
        let needs_domain = matches!(self.task, Task::Solve | Task::Curvature | Task::VerifyConvex);
        if needs_domain && self.domain.is_none() {
            diag.push("domain", format!("task \"{}\" needs a domain block", self.task.name()));
        }
        if self.task == Task::ScanAnnulus {
            match &self.scan {
                None => diag.push("scan", "task \"scan-annulus\" needs a scan block with r0 and R lists"),
                Some(s) => {
                    if s.n < 3 {
                        diag.push("scan.n", format!("dimension must be at least 3, got {}", s.n));
                    }
                    if s.r0.is_empty() || s.outer.is_empty() {
                        diag.push("scan", "r0 and R lists must be nonempty");
                    }
                    for &a in &s.r0 {
                        for &b in &s.outer {
                            if !(a > 0.0 && a < b) {
                                diag.push("scan", format!("annulus needs 0 < r0 < R, got r0 = {a}, R = {b}"));
                            }
                        }
                    }
                    if !(s.r0_factor > 0.0 && s.r0_factor <= 1.0) {
                        diag.push("scan.r0_factor", "must lie in (0, 1]");
                    }
                    if !(s.r_factor >= 1.0) {
                        diag.push("scan.R_factor", "must be at least 1");
                    }
                }
            }
        }
        if self.task == Task::CapCheck {
            match &self.cap {
                None => diag.push("cap", "task \"cap-check\" needs a cap block with i"),
                Some(c) => {
                    if !(c.i > 1.0 / std::f64::consts::PI) {
                        diag.push("cap.i", format!("cap parameter must exceed 1/pi, got {}", c.i));
                    }
                    if c.n < 3 {
                        diag.push("cap.n", format!("dimension must be at least 3, got {}", c.n));
                    }
                }
            }
        }
        if let Some(s) = &self.star {
            if s.members == 0 || !(s.outer > 1.0) {
                diag.push("star", "need members ≥ 1 and R > 1");
            }
        }
        if self.output.formats.is_empty() {
            diag.push("output.formats", "at least one format is required");
        }
        if diag.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(diag))
        }
    }
}

fn check_domain(d: &DomainSpec, diag: &mut Diagnostics) {
    let n = d.dim();
    if n < 3 {
        diag.push("domain.n", format!("dimension must be at least 3, got {n}"));
        return;
    }
    match d {
        DomainSpec::Annulus { r0, outer, .. } if !(*r0 > 0.0 && r0 < outer) => {
            diag.push("domain", format!("annulus needs 0 < r0 < R, got r0 = {r0}, R = {outer}"));
        }
        _ => {
            if let Err(e) = d.build() {
                diag.push("domain", e.to_string());
            }
        }
    }
}

/// Keys accepted in each table.
fn schema(path: &str) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => &["task", "domain", "solver", "scan", "cap", "star", "output"],
        "domain" => &["kind", "n", "center", "R", "r0", "axes", "holes", "normal", "offset", "smoothing"],
        "domain.holes" => &["center", "radius"],
        "solver" => &["path", "h", "tol", "M"],
        "scan" => &["n", "r0", "R", "extend", "r0_factor", "R_factor", "max_rows"],
        "cap" => &["i", "n"],
        "star" => &["members", "R"],
        "output" => &["formats", "dir"],
        _ => return None,
    })
}

const SYNONYMS: &[(&str, &str)] = &[
    ("mesh_size", "h"),
    ("mesh", "h"),
    ("dx", "h"),
    ("spacing", "h"),
    ("step", "h"),
    ("tolerance", "tol"),
    ("radius", "R"),
    ("outer", "R"),
    ("outer_radius", "R"),
    ("inner", "r0"),
    ("inner_radius", "r0"),
    ("dim", "n"),
    ("dimension", "n"),
    ("semi_axes", "axes"),
    ("shape", "kind"),
    ("type", "kind"),
    ("method", "path"),
    ("solver_path", "path"),
    ("format", "formats"),
    ("out", "dir"),
];

fn suggest(key: &str, allowed: &[&str]) -> Option<String> {
    let lower = key.to_ascii_lowercase();
    if let Some(&(_, to)) = SYNONYMS.iter().find(|(from, _)| *from == lower) {
        if allowed.contains(&to) {
            return Some(to.to_string());
        }
    }
    if let Some(a) = allowed.iter().find(|a| a.eq_ignore_ascii_case(key)) {
        return Some(a.to_string());
    }
    allowed
        .iter()
        .map(|a| (strsim::levenshtein(&lower, &a.to_ascii_lowercase()), *a))
        .filter(|(d, a)| *d <= 2 && *d < a.len())
        .min()
        .map(|(_, a)| a.to_string())
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn at(text: &str, span: Range<usize>) -> String {
    let (l, c) = line_col(text, span.start);
    format!("line {l}, column {c}")
}

fn walk(text: &str, table: &DeTable<'_>, path: &str, diag: &mut Diagnostics) {
    let Some(allowed) = schema(path) else { return };
    for (key, value) in table.iter() {
        let name: &str = key.get_ref();
        let full = if path.is_empty() { name.to_string() } else { format!("{path}.{name}") };
        if !allowed.contains(&name) {
            let hint = match suggest(name, allowed) {
                Some(s) => format!("; did you mean `{s}`?"),
                None => format!("; expected one of {}", allowed.join(", ")),
            };
            diag.push(at(text, key.span()), format!("unknown key `{full}`{hint}"));
            continue;
        }
        walk_value(text, value, &full, diag);
    }
}

fn walk_value(text: &str, value: &Spanned<DeValue<'_>>, path: &str, diag: &mut Diagnostics) {
    match value.get_ref() {
        DeValue::Table(t) => walk(text, t, path, diag),
        DeValue::Array(items) => {
            for item in items.iter() {
                walk_value(text, item, path, diag);
            }
        }
        _ => {}
    }
}

/// Syntax and key check only; the result may still lack required blocks.
pub fn parse_table(text: &str) -> Result<toml::Table> {
    let mut diag = Diagnostics::default();
    let table = match DeTable::parse(text) {
        Ok(t) => t,
        Err(e) => {
            let loc = e.span().map_or_else(|| "input".to_string(), |s| at(text, s));
            diag.push(loc, e.message().to_string());
            return Err(Error::Config(diag));
        }
    };
    walk(text, table.get_ref(), "", &mut diag);
    if !diag.is_empty() {
        return Err(Error::Config(diag));
    }
    text.parse::<toml::Table>().map_err(|e| {
        let loc = e.span().map_or_else(|| "input".to_string(), |s| at(text, s));
        diag.push(loc, e.message().trim().to_string());
        Error::Config(diag)
    })
}

/// Parses and validates a configuration. Every problem found is reported,
/// each located by line/column or by key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut diag = Diagnostics::default();
    let table = match DeTable::parse(text) {
        Ok(t) => t,
        Err(e) => {
            let loc = e.span().map_or_else(|| "input".to_string(), |s| at(text, s));
            diag.push(loc, e.message().to_string());
            return Err(Error::Config(diag));
        }
    };
    walk(text, table.get_ref(), "", &mut diag);
    if !table.get_ref().contains_key("task") {
        diag.push("task", "missing required key `task`");
    }
    if !diag.is_empty() {
        return Err(Error::Config(diag));
    }
    let config: RunConfig = match toml::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            let loc = e.span().map_or_else(|| "input".to_string(), |s| at(text, s));
            diag.push(loc, e.message().trim().to_string());
            return Err(Error::Config(diag));
        }
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagnostics(text: &str) -> Diagnostics {
        match parse_config(text) {
            Err(Error::Config(d)) => d,
            other => panic!("expected diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn minimal_ball() {
        let c = parse_config("task = \"solve\"\ndomain = { kind = \"ball\", R = 1 }\n").unwrap();
        assert_eq!(
            c.domain,
            Some(DomainSpec::Ball {
                n: 3,
                center: None,
                radius: 1.0
            })
        );
        assert_eq!(c.path(), SolverPath::Grid);
        assert_eq!(c.solver.tol, 1e-10);
    }

    #[test]
    fn annulus_radii_order() {
        let d = diagnostics("task = \"solve\"\ndomain = { kind = \"annulus\", r0 = 2.0, R = 1.0 }\n");
        let text = d.to_string();
        assert!(text.contains("0 < r0 < R"), "{text}");
    }

    #[test]
    fn unknown_key_suggestion() {
        let d = diagnostics("task = \"solve\"\ndomain = { kind = \"ball\", R = 1 }\n[solver]\nmesh_size = 0.1\ntolerance = 1e-8\n");
        let all: Vec<_> = d.iter().collect();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].location, "line 4, column 1");
        assert!(all[0].message.contains("did you mean `h`"));
        assert!(all[1].message.contains("did you mean `tol`"));
    }

    #[test]
    fn typo_suggestion() {
        let d = diagnostics("tsak = \"solve\"\n");
        assert!(d.to_string().contains("did you mean `task`"), "{d}");
    }

    #[test]
    fn duplicate_key() {
        let d = diagnostics("task = \"solve\"\ntask = \"curvature\"\n");
        assert!(d.to_string().starts_with("line 2"), "{d}");
    }

    #[test]
    fn missing_blocks() {
        let d = diagnostics("task = \"verify-convex\"\n");
        assert!(d.to_string().contains("needs a domain"));
        let d = diagnostics("task = \"scan-annulus\"\n");
        assert!(d.to_string().contains("needs a scan block"));
    }

    #[test]
    fn bad_variant_is_located() {
        let d = diagnostics("task = \"solve\"\ndomain = { kind = \"ball\", R = 1, axes = [1, 2, 3] }\n");
        assert!(d.to_string().starts_with("line 2"), "{d}");
    }

    #[test]
    fn round_trip() {
        let text = r#"
task = "scan-annulus"
[solver]
path = "radial"
tol = 1e-9
[scan]
n = 3
r0 = [0.4, 0.2, 0.1]
R = [4.0]
extend = true
[output]
formats = ["csv"]
dir = "runs/a"
"#;
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);

        let mut c = RunConfig::new(Task::VerifyConvex);
        c.domain = Some(DomainSpec::BallMinusBalls {
            n: 3,
            outer: 3.0,
            holes: vec![HoleSpec {
                center: vec![1.0, 0.0, 0.0],
                radius: 0.1,
            }],
        });
        c.solver.h = Some(0.05);
        let again = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
