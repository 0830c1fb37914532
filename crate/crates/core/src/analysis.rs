//! Verification campaigns and parameter scans built on the solvers.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{curvature_report, hessian_field, CurvatureReport};
use crate::error::{Error, Result};
use crate::fmt;
use crate::geometry::{Domain, DomainClass, Shape, Sphere};
use crate::linalg::{norm, sym_eigenvalues};
use crate::pde::{self, SolveReport};
use crate::radial;

/// One inequality checked at every reported node. `margin > 0` means it holds
/// strictly everywhere.
#[derive(Debug, Clone, Serialize)]
pub struct Margin {
    pub name: String,
    /// Required upper bound for the checked quantity.
    pub bound: f64,
    /// Largest value of the quantity over reported nodes.
    pub worst: f64,
    pub margin: f64,
    pub position: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexVerdict {
    pub n: usize,
    pub h: f64,
    pub eps_concave: f64,
    pub margins: Vec<Margin>,
    /// `−max sectional`: the strict negativity gap.
    pub sectional_gap: f64,
    pub pass: bool,
    pub report: CurvatureReport,
    pub solve: SolveReport,
}

impl ConvexVerdict {
    pub fn margin(&self, name: &str) -> Option<&Margin> {
        self.margins.iter().find(|m| m.name == name)
    }
}

fn describe(domain: &Domain) -> String {
    let n = domain.dim();
    match domain.shape() {
        Shape::Ball(s) => format!("ball(n={n}, R={})", s.radius),
        Shape::Annulus { inner, outer } => format!("annulus(n={n}, r0={inner}, R={outer})"),
        Shape::Ellipsoid { semi_axes } => format!("ellipsoid(axes={semi_axes:?})"),
        Shape::BallMinusBalls { outer, holes } => {
            format!("ball_minus_balls(n={n}, R={}, holes={})", outer.radius, holes.len())
        }
        Shape::HalfSpaceCap { ball, offset, .. } => {
            format!("half_space_cap(n={n}, R={}, offset={offset})", ball.radius)
        }
    }
}

pub fn domain_label(domain: &Domain) -> String {
    describe(domain)
}

/// Solves on a convex domain and checks, at every interior node at least `2h`
/// deep: `Δv < 0`, `|∇v| < 1`, largest Hessian eigenvalue `≤ ε_concave`, all
/// sectional values `< 0`, all Ricci eigenvalues `< −n/2`.
pub fn verify_convex(domain: &Domain, h: f64, tol: f64) -> Result<ConvexVerdict> {
    if domain.classify() != DomainClass::Convex {
        return Err(Error::Precondition(format!(
            "verify_convex needs a convex domain, got {:?}",
            domain.classify()
        )));
    }
    let (field, solve) = pde::solve_v(domain, h, tol)?;
    verify_convex_field(domain, &field, solve)
}

pub fn verify_convex_field(domain: &Domain, field: &pde::GridField, solve: SolveReport) -> Result<ConvexVerdict> {
    let n = field.n;
    let nf = n as f64;
    let h = field.h;
    let (report, points) = curvature_report(field, &describe(domain))?;
    let vmax = field.values.iter().cloned().fold(0.0, f64::max);
    let eps_concave = 10.0 * h * h * vmax;

    let derivs: Vec<_> = hessian_field(field)
        .into_iter()
        .filter(|d| field.distance[d.index] >= 2.0 * h)
        .collect();
    let mut worst = [(f64::NEG_INFINITY, Vec::new()), (f64::NEG_INFINITY, Vec::new()), (f64::NEG_INFINITY, Vec::new())];
    for d in &derivs {
        let lap: f64 = (0..n).map(|a| d.hess[a * n + a]).sum();
        let grad = norm(&d.grad);
        let top = *sym_eigenvalues(&d.hess, n).last().expect("n ≥ 3");
        for (k, q) in [lap, grad, top].into_iter().enumerate() {
            if q > worst[k].0 {
                worst[k] = (q, d.position.clone());
            }
        }
    }
    let mut sect = (f64::NEG_INFINITY, Vec::new());
    let mut ric = (f64::NEG_INFINITY, Vec::new());
    for p in &points {
        if p.max_sectional > sect.0 {
            sect = (p.max_sectional, p.position.clone());
        }
        let top = *p.ricci_eigenvalues.last().expect("n ≥ 3");
        if top > ric.0 {
            ric = (top, p.position.clone());
        }
    }
    let mk = |name: &str, bound: f64, (w, pos): (f64, Vec<f64>), strict: bool| {
        let margin = bound - w;
        Margin {
            name: name.into(),
            bound,
            worst: w,
            margin,
            position: pos,
            pass: if strict { margin > 0.0 } else { margin >= 0.0 },
        }
    };
    let [lap, grad, top] = worst;
    let margins = vec![
        mk("laplacian", 0.0, lap, true),
        mk("gradient_norm", 1.0, grad, true),
        mk("hessian_max_eigenvalue", eps_concave, top, false),
        mk("sectional", 0.0, sect.clone(), true),
        mk("ricci", -0.5 * nf, ric, true),
    ];
    let pass = margins.iter().all(|m| m.pass);
    Ok(ConvexVerdict {
        n,
        h,
        eps_concave,
        sectional_gap: -sect.0,
        margins,
        pass,
        report,
        solve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFamily {
    Annulus,
    Truncation,
    Mesh,
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScanPath {
    Radial,
    Grid { h: f64, tol: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub params: Vec<f64>,
    /// NaN where the row failed.
    pub metrics: Vec<f64>,
    pub error: Option<String>,
    /// Row-level predicate; `None` for failed rows.
    pub verdict: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub family: ScanFamily,
    pub param_names: Vec<String>,
    pub metric_names: Vec<String>,
    /// What the per-row verdict asserts.
    pub predicate: String,
    pub rows: Vec<ScanRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub rows: usize,
    pub failed_rows: usize,
    pub positive_found: bool,
    /// Parameters of the first row whose verdict holds.
    pub threshold: Option<Vec<f64>>,
    /// Whether the first metric strictly increases along the rows.
    pub strictly_increasing: bool,
}

impl ScanResult {
    pub fn metric(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.metric_names.iter().position(|m| m == name)?;
        Some(self.rows.iter().map(|r| r.metrics[k]).collect())
    }

    pub fn summary(&self) -> ScanSummary {
        let ok: Vec<&ScanRow> = self.rows.iter().filter(|r| r.error.is_none()).collect();
        let first: Vec<f64> = ok.iter().map(|r| r.metrics[0]).collect();
        ScanSummary {
            rows: self.rows.len(),
            failed_rows: self.rows.len() - ok.len(),
            positive_found: ok.iter().any(|r| r.verdict == Some(true)),
            threshold: ok.iter().find(|r| r.verdict == Some(true)).map(|r| r.params.clone()),
            strictly_increasing: first.windows(2).all(|w| w[1] > w[0]),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut head = self.param_names.clone();
        head.extend(self.metric_names.iter().cloned());
        head.push("verdict".into());
        head.push("error".into());
        writeln!(out, "{}", head.join(","))?;
        for r in &self.rows {
            let verdict = match r.verdict {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "error",
            };
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(out, "{},{},{},{}", fmt::join(&r.params), fmt::join(&r.metrics), verdict, err)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family,
            "predicate": self.predicate,
            "param_names": self.param_names,
            "metric_names": self.metric_names,
            "rows": self.rows.iter().map(|r| serde_json::json!({
                "params": r.params,
                "metrics": r.metrics.iter().map(|x| if x.is_finite() { serde_json::json!(x) } else { serde_json::Value::Null }).collect::<Vec<_>>(),
                "verdict": r.verdict,
                "error": r.error,
            })).collect::<Vec<_>>(),
            "summary": self.summary(),
        })
    }
}

const ANNULUS_METRICS: [&str; 6] = ["max_ricci", "min_ricci", "min_sectional", "max_sectional", "residual", "argmax_r"];

fn annulus_row(n: usize, r0: f64, outer: f64, path: &ScanPath) -> ScanRow {
    let res: Result<Vec<f64>> = (|| match path {
        ScanPath::Radial => {
            let sol = radial::solve_annulus(n, r0, outer, 1e-10)?;
            let curv = radial::curvature_radial(&sol);
            let (max_ric, at) = radial::max_ricci(&sol);
            let min_ric = curv.iter().flat_map(|c| [c.ric_rad, c.ric_tan]).fold(f64::INFINITY, f64::min);
            let secs = curv.iter().flat_map(|c| [c.k_rad_tan, c.k_tan_tan]);
            let (smin, smax) = secs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)));
            Ok(vec![max_ric, min_ric, smin, smax, sol.max_relative_residual(), at])
        }
        ScanPath::Grid { h, tol } => {
            let dom = Domain::annulus(n, r0, outer)?;
            let (field, rep) = pde::solve_v(&dom, *h, *tol)?;
            let (cr, _) = curvature_report(&field, &describe(&dom))?;
            Ok(vec![
                cr.max_ricci,
                cr.min_ricci,
                cr.sectional_range[0],
                cr.sectional_range[1],
                rep.residual_inf,
                norm(&cr.argmax),
            ])
        }
    })();
    match res {
        Ok(metrics) => ScanRow {
            params: vec![r0, outer],
            verdict: Some(metrics[0] > 0.0),
            metrics,
            error: None,
        },
        Err(e) => ScanRow {
            params: vec![r0, outer],
            metrics: vec![f64::NAN; ANNULUS_METRICS.len()],
            error: Some(e.to_string()),
            verdict: None,
        },
    }
}

fn annulus_result(rows: Vec<ScanRow>) -> ScanResult {
    ScanResult {
        family: ScanFamily::Annulus,
        param_names: vec!["r0".into(), "R".into()],
        metric_names: ANNULUS_METRICS.iter().map(|s| s.to_string()).collect(),
        predicate: "max_ricci > 0".into(),
        rows,
    }
}

/// Rows for every pair of `r0_list × r_list`, ordered from the least to the
/// most extreme annulus (R ascending, then r0 descending). Rows run in
/// parallel; each owns its solver, and collection keeps the order.
pub fn scan_annulus(n: usize, r0_list: &[f64], r_list: &[f64], path: &ScanPath) -> Result<ScanResult> {
    if r0_list.is_empty() || r_list.is_empty() {
        return Err(Error::Precondition("scan lists must be nonempty".into()));
    }
    let mut pairs = Vec::new();
    for &outer in r_list {
        for &r0 in r0_list {
            if !(r0 > 0.0 && r0 < outer) {
                return Err(Error::Precondition(format!(
                    "every pair must satisfy 0 < r0 < R, got r0 = {r0}, R = {outer}"
                )));
            }
            pairs.push((r0, outer));
        }
    }
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)));
    pairs.dedup();
    let rows: Vec<ScanRow> = pairs.par_iter().map(|&(r0, outer)| annulus_row(n, r0, outer, path)).collect();
    Ok(annulus_result(rows))
}

/// Extends the family geometrically (`r0 ← r0·r0_factor`, `R ← R·r_factor`)
/// until the largest Ricci eigenvalue turns positive or `max_rows` is reached.
pub fn extend_annulus_scan(
    n: usize,
    r0: f64,
    outer: f64,
    r0_factor: f64,
    r_factor: f64,
    max_rows: usize,
    path: &ScanPath,
) -> Result<ScanResult> {
    if !(r0 > 0.0 && r0 < outer) || !(r0_factor > 0.0 && r0_factor <= 1.0) || r_factor < 1.0 {
        return Err(Error::Precondition("need 0 < r0 < R, 0 < r0_factor ≤ 1 and R_factor ≥ 1".into()));
    }
    if r0_factor == 1.0 && r_factor == 1.0 {
        return Err(Error::Precondition("the family does not move".into()));
    }
    let mut rows = Vec::new();
    let (mut a, mut b) = (r0, outer);
    while rows.len() < max_rows {
        let row = annulus_row(n, a, b, path);
        let done = row.verdict == Some(true);
        rows.push(row);
        if done {
            break;
        }
        a *= r0_factor;
        b *= r_factor;
    }
    Ok(annulus_result(rows))
}

/// `v_M(0)` of the truncated u-problem on `B(0, R)` for each `M` (sorted
/// ascending). Metrics: `v_center, gap = v_M(0) − R/2, gap ratio to the
/// previous row`; the verdict asserts the gap shrank by at least 2×.
pub fn truncation_ladder(n: usize, radius: f64, ms: &[f64]) -> Result<ScanResult> {
    let mut ms = ms.to_vec();
    ms.sort_by(f64::total_cmp);
    let sols: Vec<Result<radial::TruncatedBall>> =
        ms.par_iter().map(|&m| radial::solve_ball_u_truncated(n, radius, m)).collect();
    let mut rows = Vec::new();
    let mut prev_gap: Option<f64> = None;
    for (m, sol) in ms.iter().zip(sols) {
        match sol {
            Ok(t) => {
                let gap = t.v_center - 0.5 * radius;
                let ratio = prev_gap.map(|p| p / gap).unwrap_or(f64::NAN);
                rows.push(ScanRow {
                    params: vec![*m],
                    metrics: vec![t.v_center, gap, ratio, t.u_center],
                    error: None,
                    verdict: Some(gap > 0.0 && prev_gap.is_none_or(|p| ratio >= 2.0 && p > gap)),
                });
                prev_gap = Some(gap);
            }
            Err(e) => rows.push(ScanRow {
                params: vec![*m],
                metrics: vec![f64::NAN; 4],
                error: Some(e.to_string()),
                verdict: None,
            }),
        }
    }
    Ok(ScanResult {
        family: ScanFamily::Truncation,
        param_names: vec!["M".into()],
        metric_names: ["v_center", "gap", "gap_ratio", "u_center"].map(String::from).to_vec(),
        predicate: "gap > 0 and gap shrinks by at least 2x".into(),
        rows,
    })
}

/// Grid solves at each mesh width against an exact or reference profile.
/// Metrics: `max_error, observed_order` (order relative to the previous row).
/// The verdict asserts an observed order of at least `min_order`.
pub fn mesh_ladder<F>(domain: &Domain, hs: &[f64], tol: f64, min_order: f64, reference: F) -> Result<ScanResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut hs = hs.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &h in &hs {
        match pde::solve_v(domain, h, tol) {
            Ok((field, rep)) => {
                let err = field
                    .interior_indices()
                    .par_iter()
                    .map(|&i| (field.values[i] - reference(&field.position(i))).abs())
                    .reduce(|| 0.0, f64::max);
                let order = prev.map(|(ph, pe)| (pe / err).ln() / (ph / h).ln()).unwrap_or(f64::NAN);
                rows.push(ScanRow {
                    params: vec![h],
                    metrics: vec![err, order, rep.residual_inf, rep.wall_time],
                    error: None,
                    verdict: Some(prev.is_none() || order >= min_order),
                });
                prev = Some((h, err));
            }
            Err(e) => rows.push(ScanRow {
                params: vec![h],
                metrics: vec![f64::NAN; 4],
                error: Some(e.to_string()),
                verdict: None,
            }),
        }
    }
    Ok(ScanResult {
        family: ScanFamily::Mesh,
        param_names: vec!["h".into()],
        metric_names: ["max_error", "observed_order", "residual", "wall_time"].map(String::from).to_vec(),
        predicate: format!("observed order >= {min_order}"),
        rows,
    })
}

/// Stereographic correspondence between `R^n` and `S^n ⊂ R^{n+1}` minus the
/// north pole `e_{n+1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereBridge;

impl SphereBridge {
    /// `T(x) = (2x/(1+|x|²), (|x|²−1)/(1+|x|²))`.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        stereographic_lift(x)
    }

    /// `T⁻¹(y) = y'/(1 − y_{n+1})`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        stereographic_project(y)
    }
}

pub fn stereographic_lift(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let den = 1.0 + r2;
    let mut y: Vec<f64> = x.iter().map(|c| 2.0 * c / den).collect();
    y.push((r2 - 1.0) / den);
    y
}

pub fn stereographic_project(y: &[f64]) -> Result<Vec<f64>> {
    let (last, head) = y.split_last().ok_or_else(|| Error::Precondition("empty point".into()))?;
    let den = 1.0 - last;
    if den <= 0.0 {
        return Err(Error::PointAtInfinity);
    }
    if *last > 0.0 {
        // near the pole 1 − y_{n+1} cancels; on the sphere it equals |y'|²/(1 + y_{n+1})
        let r2: f64 = head.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            return Err(Error::PointAtInfinity);
        }
        let s = (1.0 + last) / r2;
        return Ok(head.iter().map(|c| c * s).collect());
    }
    Ok(head.iter().map(|c| c / den).collect())
}

/// Radius of the ball `T⁻¹(S^n ∖ B_θ(e_{n+1}))` for a geodesic cap of radius
/// `θ = 1/i` around the north pole: `cot(θ/2)`.
pub fn cap_complement_radius(i: f64) -> Result<f64> {
    if !(i > 1.0 / std::f64::consts::PI) {
        return Err(Error::Precondition(format!("cap parameter must exceed 1/π, got {i}")));
    }
    Ok(1.0 / (0.5 / i).tan())
}

#[derive(Debug, Clone, Serialize)]
pub struct CapVerdict {
    pub i: f64,
    pub n: usize,
    /// Mesh width relative to the image ball radius.
    pub h: f64,
    pub image_radius: f64,
    /// Largest `| |T⁻¹(p)| − radius |` over sampled cap-boundary points.
    pub boundary_sphere_error: f64,
    pub sectional_deviation: f64,
    pub ricci_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub report: CurvatureReport,
}

/// Maps `S^n ∖ B_{1/i}(e_{n+1})` to `R^n`, checks it is a centred ball, solves
/// there with mesh `h·radius`, and compares curvature with `−1` and `−(n−1)`.
pub fn cap_complement_check(i: f64, n: usize, h: f64, tol: f64) -> Result<CapVerdict> {
    let theta = 1.0 / i;
    let radius = cap_complement_radius(i)?;
    let mut sphere_err: f64 = 0.0;
    for p in fibonacci_directions(n, 64) {
        // point at geodesic distance θ from the north pole
        let mut y: Vec<f64> = p.iter().map(|c| theta.sin() * c).collect();
        y.push(theta.cos());
        let x = stereographic_project(&y)?;
        sphere_err = sphere_err.max((norm(&x) - radius).abs() / radius);
    }
    let domain = Domain::ball(n, vec![0.0; n], radius)?;
    let (field, _) = pde::solve_v(&domain, h * radius, tol)?;
    let (report, _) = curvature_report(&field, &describe(&domain))?;
    let nf = n as f64;
    let sec_dev = (report.sectional_range[0] + 1.0).abs().max((report.sectional_range[1] + 1.0).abs());
    let ric_dev = (report.min_ricci + nf - 1.0).abs().max((report.max_ricci + nf - 1.0).abs());
    let tolerance = 5e-3;
    Ok(CapVerdict {
        i,
        n,
        h,
        image_radius: radius,
        boundary_sphere_error: sphere_err,
        sectional_deviation: sec_dev,
        ricci_deviation: ric_dev,
        tolerance,
        pass: sec_dev <= tolerance && ric_dev <= tolerance && sphere_err <= 1e-12,
        report,
    })
}

/// Deterministic, roughly uniform unit vectors in `R^n` (Halton points in the
/// cube, kept if inside the unit ball, then normalised).
pub fn fibonacci_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let halton = |mut k: u64, b: u64| {
        let (mut f, mut r) = (1.0, 0.0);
        while k > 0 {
            f /= b as f64;
            r += f * (k % b) as f64;
            k /= b;
        }
        r
    };
    let mut out = Vec::with_capacity(count);
    let mut k = 1u64;
    while out.len() < count {
        let p: Vec<f64> = (0..n).map(|a| 2.0 * halton(k, PRIMES[a % 8]) - 1.0).collect();
        k += 1;
        let r = norm(&p);
        if r > 1e-3 && r <= 1.0 {
            out.push(p.iter().map(|c| c / r).collect());
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct StarMember {
    pub index: usize,
    pub domain: Domain,
    /// Nearest point of the holes on the axis, `|x_n|`.
    pub front: f64,
    /// Radius of the first ball of each chain.
    pub tube_radius: f64,
}

/// Chain of overlapping balls along `+e_n` starting at `front`. Each ball
/// contains the far cap of its predecessor (the part of the sphere beyond the
/// tangent cone from the origin), so every ray from the origin that enters
/// the chain stays in it; the chain ends once a ball's tangent circle lies
/// outside the outer sphere.
fn axis_chain(front: f64, first_radius: f64, outer: f64, spacing: f64) -> Vec<(f64, f64)> {
    let mut chain = vec![(front + first_radius, first_radius)];
    loop {
        let (c, rho) = *chain.last().expect("nonempty");
        let tangent = (c * c - rho * rho).sqrt();
        if tangent > outer * 1.02 || chain.len() > 64 {
            return chain;
        }
        let cos_b = tangent / c;
        let sin_b = rho / c;
        let t = (tangent * sin_b, tangent * cos_b);
        let next_c = c + spacing;
        let dist = (t.0 * t.0 + (next_c - t.1).powi(2)).sqrt();
        let far_pole = next_c - (c + rho);
        chain.push((next_c, 1.05 * dist.max(-far_pole).max(rho)));
    }
}

/// Nested-in-spirit family of star-shaped domains in `R^4` approximating
/// `R^4 ∖ {x_4 axis, |x_4| ≥ 1}`: the ball `B(0, outer)` minus two mirrored
/// ball chains whose first ball shrinks and whose front approaches 1 as the
/// index grows.
pub fn star_shaped_family(n: usize, members: usize, outer: f64) -> Result<Vec<StarMember>> {
    if n != 4 {
        return Err(Error::Precondition(format!("the star-shaped family is built in dimension 4, got {n}")));
    }
    let mut out = Vec::new();
    for k in 0..members {
        let tube = 0.45 * 0.9f64.powi(k as i32);
        let front = 1.0 + 0.5 * tube;
        let chain = axis_chain(front, tube, outer, 0.5);
        let mut holes = Vec::new();
        for &(c, rho) in &chain {
            for sign in [1.0, -1.0] {
                let mut center = vec![0.0; n];
                center[n - 1] = sign * c;
                holes.push(Sphere::new(center, rho));
            }
        }
        let domain = Domain::ball_minus_ball_union(n, Sphere::new(vec![0.0; n], outer), holes)?;
        out.push(StarMember {
            index: k,
            domain,
            front,
            tube_radius: tube,
        });
    }
    Ok(out)
}

/// Sampled star-shapedness test: along each ray from `center`, once a sample
/// leaves the domain no later sample may return to it.
pub fn is_star_shaped_sampled(domain: &Domain, center: &[f64], rays: usize, samples: usize) -> Result<bool> {
    let n = domain.dim();
    let reach = domain.diameter();
    for dir in fibonacci_directions(n, rays) {
        let mut left = false;
        for s in 1..=samples {
            let t = reach * s as f64 / samples as f64;
            let x: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c + t * d).collect();
            let inside = domain.signed_distance(&x)? > 0.0;
            if inside && left {
                return Ok(false);
            }
            if !inside {
                left = true;
            }
        }
    }
    Ok(true)
}

/// Grid solves across the star-shaped family. Metrics as in the annulus scan
/// (radius column replaced by `|x_4|` of the argmax); the verdict records a
/// positive Ricci eigenvalue.
pub fn star_scan(members: &[StarMember], h: f64, tol: f64) -> ScanResult {
    let rows: Vec<ScanRow> = members
        .par_iter()
        .map(|m| {
            let params = vec![m.index as f64, m.tube_radius, m.front];
            let res = pde::solve_v(&m.domain, h, tol).and_then(|(field, rep)| {
                let (cr, _) = curvature_report(&field, &describe(&m.domain))?;
                Ok(vec![
                    cr.max_ricci,
                    cr.min_ricci,
                    cr.sectional_range[0],
                    cr.sectional_range[1],
                    rep.residual_inf,
                    cr.argmax.last().copied().unwrap_or(f64::NAN).abs(),
                ])
            });
            match res {
                Ok(metrics) => ScanRow {
                    params,
                    verdict: Some(metrics[0] > 0.0),
                    metrics,
                    error: None,
                },
                Err(e) => ScanRow {
                    params,
                    metrics: vec![f64::NAN; 6],
                    error: Some(e.to_string()),
                    verdict: None,
                },
            }
        })
        .collect();
    ScanResult {
        family: ScanFamily::Star,
        param_names: ["index", "tube_radius", "front"].map(String::from).to_vec(),
        metric_names: ["max_ricci", "min_ricci", "min_sectional", "max_sectional", "residual", "argmax_axis"]
            .map(String::from)
            .to_vec(),
        predicate: "max_ricci > 0".into(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_examples() {
        assert_eq!(stereographic_lift(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0, -1.0]);
        assert_eq!(stereographic_lift(&[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(stereographic_project(&[0.0, 0.0, 0.0, 1.0]), Err(Error::PointAtInfinity)));
    }

    #[test]
    fn lift_round_trip() {
        for (k, dir) in fibonacci_directions(3, 200).iter().enumerate() {
            let r = 1e3 * (k as f64 / 200.0).powi(3);
            let x: Vec<f64> = dir.iter().map(|c| r * c).collect();
            let y = stereographic_lift(&x);
            assert!((norm(&y) - 1.0).abs() < 1e-15);
            let back = stereographic_project(&y).unwrap();
            let err = norm(&crate::linalg::sub(&back, &x));
            assert!(err <= 1e-12 * r.max(1.0), "{r}: {err}");
        }
    }

    #[test]
    fn cap_radius_grows() {
        let radii: Vec<f64> = [2.0, 3.0, 5.0, 10.0, 100.0].iter().map(|&i| cap_complement_radius(i).unwrap()).collect();
        assert!((radii[0] - 3.91631736464594).abs() < 1e-12);
        assert!(radii.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn convex_gate() {
        let d = Domain::annulus(3, 0.5, 2.0).unwrap();
        assert!(matches!(verify_convex(&d, 0.1, 1e-8), Err(Error::Precondition(_))));
    }

    #[test]
    fn ball_verdict() {
        let d = Domain::unit_ball(3).unwrap();
        let v = verify_convex(&d, 1.0 / 16.0, 1e-10).unwrap();
        assert!(v.pass, "{:?}", v.margins);
        assert!((v.report.max_ricci + 2.0).abs() < 1e-9);
        assert!(v.sectional_gap > 0.99);
    }

    #[test]
    fn annulus_scan_reference() {
        let s = scan_annulus(3, &[0.05, 0.1, 0.2], &[4.0], &ScanPath::Radial).unwrap();
        let r0: Vec<f64> = s.rows.iter().map(|r| r.params[0]).collect();
        assert_eq!(r0, vec![0.2, 0.1, 0.05]);
        let sum = s.summary();
        assert!(sum.strictly_increasing && sum.positive_found);
        assert_eq!(sum.threshold, Some(vec![0.05, 4.0]));
        let again = scan_annulus(3, &[0.05, 0.1, 0.2], &[4.0], &ScanPath::Radial).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        s.write_csv(&mut a).unwrap();
        again.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extension_stops_at_sign_flip() {
        let s = extend_annulus_scan(3, 0.4, 4.0, 0.5, 1.0, 10, &ScanPath::Radial).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert_eq!(s.summary().threshold, Some(vec![0.05, 4.0]));
    }

    #[test]
    fn scan_rejects_bad_pairs() {
        assert!(scan_annulus(3, &[2.0], &[1.0], &ScanPath::Radial).is_err());
        assert!(scan_annulus(3, &[], &[1.0], &ScanPath::Radial).is_err());
    }

    #[test]
    fn truncation_ladder_converges() {
        let s = truncation_ladder(3, 1.0, &[1e2, 1e3, 1e4]).unwrap();
        assert!(s.rows.iter().all(|r| r.verdict == Some(true)));
    }

    #[test]
    fn star_family_geometry() {
        let fam = star_shaped_family(4, 4, 2.0).unwrap();
        for m in &fam {
            assert!(is_star_shaped_sampled(&m.domain, &[0.0; 4], 400, 400).unwrap(), "member {}", m.index);
            // the open segment |x_4| < 1 on the axis stays inside
            for k in 0..100 {
                let t = -0.99 + 1.98 * k as f64 / 99.0;
                assert!(m.domain.signed_distance(&[0.0, 0.0, 0.0, t]).unwrap() > 0.0);
            }
            assert!(m.front > 1.0);
        }
        assert!(star_shaped_family(3, 1, 2.0).is_err());
    }
}
