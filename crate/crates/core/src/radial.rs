//! Rotationally symmetric solutions of `v Δv = (n/2)(|∇v|² − 1)`.
//!
//! Balls have the closed form `v = (R² − r²)/(2R)`. Annuli are solved as a
//! two-point boundary value problem by damped Newton on a Chebyshev-clustered
//! mesh; the node next to each boundary is pinned by the two-term boundary
//! expansion `v = d − H d²/(2(n−1))`.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt;
use crate::ode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialKind {
    Ball,
    Annulus,
}

/// Least-squares fit of `v ≈ slope·d + quad_coeff·d²` near one boundary sphere.
#[derive(Debug, Clone, Serialize)]
pub struct EndpointFit {
    pub radius: f64,
    pub mean_curvature: f64,
    pub slope: f64,
    pub quad_coeff: f64,
    /// `−H/(2(n−1))`, what `quad_coeff` should approach.
    pub expected_quad: f64,
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub n: usize,
    pub kind: RadialKind,
    /// Inner radius; zero for a ball.
    pub r0: f64,
    pub r_outer: f64,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub v_double_prime: Vec<f64>,
    /// Pointwise `v(v″ + (n−1)v′/r) − (n/2)(v′² − 1)`.
    pub residual: Vec<f64>,
    /// Residual divided by the magnitude of the terms that produced it.
    pub relative_residual: Vec<f64>,
    pub endpoints: Vec<EndpointFit>,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialCurvature {
    pub r: f64,
    pub k_rad_tan: f64,
    pub k_tan_tan: f64,
    pub ric_rad: f64,
    pub ric_tan: f64,
}

#[derive(Debug, Clone)]
pub struct RadialOptions {
    /// Number of mesh intervals; the mesh has `intervals + 1` nodes.
    pub intervals: usize,
    pub tol: f64,
    pub max_newton: usize,
    /// Nodes per boundary used by [`boundary_fit`].
    pub fit_window: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            intervals: 4096,
            tol: 1e-10,
            max_newton: 100,
            fit_window: 48,
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Precondition(format!("dimension must be at least 3, got {n}")));
    }
    Ok(())
}

/// Chebyshev–Lobatto points mapped to `[a, b]`, strictly increasing.
pub fn chebyshev_mesh(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    let mut r: Vec<f64> = (0..=intervals)
        .map(|k| a + (b - a) * 0.5 * (1.0 - (PI * k as f64 / intervals as f64).cos()))
        .collect();
    r[0] = a;
    r[intervals] = b;
    r
}

pub fn solve_ball(n: usize, radius: f64) -> Result<RadialSolution> {
    solve_ball_with(n, radius, &RadialOptions::default())
}

pub fn solve_ball_with(n: usize, radius: f64, opts: &RadialOptions) -> Result<RadialSolution> {
    check_dim(n)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Precondition(format!("ball radius must be positive, got {radius}")));
    }
    let r = chebyshev_mesh(0.0, radius, opts.intervals.max(4));
    let v: Vec<f64> = r.iter().map(|&x| (radius - x) * (radius + x) / (2.0 * radius)).collect();
    let v_prime: Vec<f64> = r.iter().map(|&x| -x / radius).collect();
    let v_double_prime = vec![-1.0 / radius; r.len()];
    let mut sol = RadialSolution {
        n,
        kind: RadialKind::Ball,
        r0: 0.0,
        r_outer: radius,
        r,
        v,
        v_prime,
        v_double_prime,
        residual: Vec::new(),
        relative_residual: Vec::new(),
        endpoints: Vec::new(),
        newton_iterations: 0,
    };
    sol.fill_residual();
    sol.endpoints = boundary_fit_window(&sol, opts.fit_window)?;
    Ok(sol)
}

pub fn solve_annulus(n: usize, r0: f64, outer: f64, tol: f64) -> Result<RadialSolution> {
    let opts = RadialOptions {
        tol,
        ..RadialOptions::default()
    };
    solve_annulus_with(n, r0, outer, &opts)
}

/// Three-point derivative weights on a non-uniform mesh at node `k`.
fn weights(r: &[f64], k: usize) -> ([f64; 3], [f64; 3]) {
    let hm = r[k] - r[k - 1];
    let hp = r[k + 1] - r[k];
    let d1 = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
    let d2 = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
    (d1, d2)
}

struct Stencils {
    d1: Vec<[f64; 3]>,
    d2: Vec<[f64; 3]>,
}

impl Stencils {
    fn new(r: &[f64]) -> Self {
        let mut d1 = vec![[0.0; 3]; r.len()];
        let mut d2 = vec![[0.0; 3]; r.len()];
        for k in 1..r.len() - 1 {
            let (a, b) = weights(r, k);
            d1[k] = a;
            d2[k] = b;
        }
        Stencils { d1, d2 }
    }
}

/// Residual and its term-magnitude scale at interior node `k`.
fn node_residual(n: usize, r: &[f64], v: &[f64], st: &Stencils, k: usize) -> (f64, f64, f64, f64) {
    let nf = n as f64;
    let (w1, w2) = (st.d1[k], st.d2[k]);
    let terms1 = [w1[0] * v[k - 1], w1[1] * v[k], w1[2] * v[k + 1]];
    let terms2 = [w2[0] * v[k - 1], w2[1] * v[k], w2[2] * v[k + 1]];
    let d1: f64 = terms1.iter().sum();
    let d2: f64 = terms2.iter().sum();
    let lap = d2 + (nf - 1.0) * d1 / r[k];
    let f = v[k] * lap - 0.5 * nf * (d1 * d1 - 1.0);
    let mag1: f64 = terms1.iter().map(|t| t.abs()).sum();
    let mag2: f64 = terms2.iter().map(|t| t.abs()).sum();
    let scale = v[k].abs() * (mag2 + (nf - 1.0) * mag1 / r[k]) + 0.5 * nf * (d1 * d1 + 1.0);
    (f, scale, d1, d2)
}

fn superposition_guess(n: usize, r0: f64, outer: f64, r: f64) -> f64 {
    // conformal factors of the exterior of B(r0) and of B(R), summed as u-values
    let w_in = (r - r0) * (r + r0) / (2.0 * r0);
    let w_out = (outer - r) * (outer + r) / (2.0 * outer);
    let (m, other) = if w_in < w_out { (w_in, w_out) } else { (w_out, w_in) };
    if m <= 0.0 {
        return 0.0;
    }
    let q = 0.5 * (n as f64 - 2.0);
    m * (1.0 + (m / other).powf(q)).powf(-1.0 / q)
}

/// Solves `T x = rhs` for tridiagonal `T` (sub, diag, sup). Overwrites `rhs`.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Precondition("singular Newton Jacobian".into()));
    }
    rhs[0] /= beta;
    for i in 1..m {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Precondition("singular Newton Jacobian".into()));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

pub fn solve_annulus_with(n: usize, r0: f64, outer: f64, opts: &RadialOptions) -> Result<RadialSolution> {
    check_dim(n)?;
    if !(r0 > 0.0 && r0 < outer && outer.is_finite()) {
        return Err(Error::Precondition(format!(
            "annulus radii must satisfy 0 < r0 < R, got r0 = {r0}, R = {outer}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let big_n = opts.intervals.max(8);
    let nf = n as f64;
    let r = chebyshev_mesh(r0, outer, big_n);
    let st = Stencils::new(&r);

    let h_in = -(nf - 1.0) / r0;
    let h_out = (nf - 1.0) / outer;
    let mut v: Vec<f64> = r.iter().map(|&x| superposition_guess(n, r0, outer, x)).collect();
    v[0] = 0.0;
    v[big_n] = 0.0;
    let e1 = r[1] - r0;
    let e2 = outer - r[big_n - 1];
    v[1] = e1 - h_in * e1 * e1 / (2.0 * (nf - 1.0));
    v[big_n - 1] = e2 - h_out * e2 * e2 / (2.0 * (nf - 1.0));

    // Newton unknowns are nodes 2..=N-2
    let lo = 2;
    let hi = big_n - 2;
    let m = hi - lo + 1;
    let eval = |v: &[f64]| -> (Vec<f64>, f64) {
        let mut f = vec![0.0; m];
        let mut worst: f64 = 0.0;
        for k in lo..=hi {
            let (fk, scale, _, _) = node_residual(n, &r, v, &st, k);
            f[k - lo] = fk;
            worst = worst.max(fk.abs() / scale);
        }
        (f, worst)
    };

    let mut history = Vec::new();
    let (mut f, mut rel) = eval(&v);
    let mut iterations = 0;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    while rel > opts.tol {
        if iterations >= opts.max_newton {
            return Err(Error::Divergence {
                solver: "radial annulus",
                history,
            });
        }
        iterations += 1;
        let f_norm = crate::linalg::norm(&f);
        history.push(f_norm);
        for k in lo..=hi {
            let (_, _, d1, d2) = node_residual(n, &r, &v, &st, k);
            let (w1, w2) = (st.d1[k], st.d2[k]);
            let lap = d2 + (nf - 1.0) * d1 / r[k];
            let i = k - lo;
            let jac = |j: usize| v[k] * (w2[j] + (nf - 1.0) * w1[j] / r[k]) - nf * d1 * w1[j];
            sub[i] = jac(0);
            diag[i] = lap + jac(1);
            sup[i] = jac(2);
        }
        let mut dv: Vec<f64> = f.iter().map(|x| -x).collect();
        thomas(&sub, &diag, &sup, &mut dv)?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let mut trial = v.clone();
            for i in 0..m {
                trial[lo + i] += lambda * dv[i];
            }
            if trial[lo..=hi].iter().all(|&x| x > 0.0) {
                let (ft, relt) = eval(&trial);
                if crate::linalg::norm(&ft) < (1.0 - 1e-4 * lambda) * f_norm || relt <= opts.tol {
                    accepted = Some((trial, ft, relt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((vt, ft, relt)) => {
                v = vt;
                f = ft;
                rel = relt;
            }
            None => {
                return Err(Error::Divergence {
                    solver: "radial annulus",
                    history,
                })
            }
        }
    }

    let mut v_prime = vec![0.0; r.len()];
    let mut v_double_prime = vec![0.0; r.len()];
    for k in 1..big_n {
        let (_, _, d1, d2) = node_residual(n, &r, &v, &st, k);
        v_prime[k] = d1;
        v_double_prime[k] = d2;
    }
    v_prime[0] = 1.0;
    v_double_prime[0] = -h_in / (nf - 1.0);
    v_prime[big_n] = -1.0;
    v_double_prime[big_n] = -h_out / (nf - 1.0);

    let mut sol = RadialSolution {
        n,
        kind: RadialKind::Annulus,
        r0,
        r_outer: outer,
        r,
        v,
        v_prime,
        v_double_prime,
        residual: Vec::new(),
        relative_residual: Vec::new(),
        endpoints: Vec::new(),
        newton_iterations: iterations,
    };
    sol.fill_residual();
    for k in 1..big_n {
        let (f, scale, _, _) = node_residual(n, &sol.r, &sol.v, &st, k);
        sol.relative_residual[k] = f.abs() / scale;
    }
    sol.endpoints = boundary_fit_window(&sol, opts.fit_window)?;
    Ok(sol)
}

impl RadialSolution {
    fn fill_residual(&mut self) {
        let nf = self.n as f64;
        let len = self.r.len();
        self.residual = vec![0.0; len];
        self.relative_residual = vec![0.0; len];
        for k in 0..len {
            let (v, d1, d2, r) = (self.v[k], self.v_prime[k], self.v_double_prime[k], self.r[k]);
            let d1_over_r = if r == 0.0 { d2 } else { d1 / r };
            let f = v * (d2 + (nf - 1.0) * d1_over_r) - 0.5 * nf * (d1 * d1 - 1.0);
            let scale = v.abs() * (d2.abs() + (nf - 1.0) * d1_over_r.abs()) + 0.5 * nf * (d1 * d1 + 1.0);
            self.residual[k] = f;
            self.relative_residual[k] = f.abs() / scale;
        }
    }

    /// Indices of the nodes where the PDE is imposed by collocation.
    pub fn collocation_range(&self) -> std::ops::Range<usize> {
        match self.kind {
            RadialKind::Ball => 0..self.r.len(),
            RadialKind::Annulus => 2..self.r.len() - 2,
        }
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.collocation_range()
            .map(|k| self.relative_residual[k])
            .fold(0.0, f64::max)
    }

    /// `(r, v)` at the largest value of `v`.
    pub fn max_v(&self) -> (f64, f64) {
        let mut best = (self.r[0], self.v[0]);
        for (r, v) in self.r.iter().zip(&self.v) {
            if *v > best.1 {
                best = (*r, *v);
            }
        }
        best
    }

    /// Distance to the nearest boundary sphere.
    pub fn boundary_distance(&self, r: f64) -> f64 {
        match self.kind {
            RadialKind::Ball => self.r_outer - r,
            RadialKind::Annulus => (r - self.r0).min(self.r_outer - r),
        }
    }

    /// Cubic Hermite interpolation of `v` using the stored `v′`.
    /// Returns `None` outside `[r_min, r_max]`.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let r = &self.r;
        if !(x >= r[0] && x <= r[r.len() - 1]) {
            return None;
        }
        let k = match r.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(k) => return Some(self.v[k]),
            Err(k) => k - 1,
        };
        let h = r[k + 1] - r[k];
        let t = (x - r[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            h00 * self.v[k]
                + h10 * h * self.v_prime[k]
                + h01 * self.v[k + 1]
                + h11 * h * self.v_prime[k + 1],
        )
    }

    /// Writes `r, v, v', v'', residual, K_rad_tan, K_tan_tan, Ric_rad, Ric_tan`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,v,v',v'',residual,K_rad_tan,K_tan_tan,Ric_rad,Ric_tan")?;
        let curv = curvature_radial(self);
        for (k, c) in curv.iter().enumerate() {
            writeln!(
                out,
                "{}",
                fmt::join(&[
                    self.r[k],
                    self.v[k],
                    self.v_prime[k],
                    self.v_double_prime[k],
                    self.residual[k],
                    c.k_rad_tan,
                    c.k_tan_tan,
                    c.ric_rad,
                    c.ric_tan,
                ])
            )?;
        }
        Ok(())
    }
}

pub fn curvature_radial(sol: &RadialSolution) -> Vec<RadialCurvature> {
    let nf = sol.n as f64;
    (0..sol.r.len())
        .map(|k| {
            let (r, v, d1, d2) = (sol.r[k], sol.v[k], sol.v_prime[k], sol.v_double_prime[k]);
            let d1_over_r = if r == 0.0 { d2 } else { d1 / r };
            let g2 = d1 * d1;
            RadialCurvature {
                r,
                k_rad_tan: v * d2 + v * d1_over_r - g2,
                k_tan_tan: 2.0 * v * d1_over_r - g2,
                ric_rad: (nf - 2.0) * v * d2 - 0.5 * (nf - 2.0) * g2 - 0.5 * nf,
                ric_tan: (nf - 2.0) * v * d1_over_r - 0.5 * (nf - 2.0) * g2 - 0.5 * nf,
            }
        })
        .collect()
}

/// Largest Ricci eigenvalue over the mesh, with the radius where it occurs.
pub fn max_ricci(sol: &RadialSolution) -> (f64, f64) {
    curvature_radial(sol)
        .iter()
        .flat_map(|c| [(c.ric_rad, c.r), (c.ric_tan, c.r)])
        .fold((f64::NEG_INFINITY, 0.0), |best, x| if x.0 > best.0 { x } else { best })
}

pub fn boundary_fit(sol: &RadialSolution) -> Result<Vec<EndpointFit>> {
    boundary_fit_window(sol, RadialOptions::default().fit_window)
}

pub fn boundary_fit_window(sol: &RadialSolution, window: usize) -> Result<Vec<EndpointFit>> {
    let len = sol.r.len();
    // node 0 is the boundary and node 1 is pinned by the expansion itself
    let available = len.saturating_sub(3) / 2;
    if window < 3 || available < window {
        return Err(Error::FitWindow {
            available: available.min(window),
            required: window.max(3),
        });
    }
    let nf = sol.n as f64;
    let fit = |idx: &mut dyn Iterator<Item = usize>, radius: f64, h: f64| {
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let pts: Vec<(f64, f64)> = idx.map(|k| ((sol.r[k] - radius).abs(), sol.v[k])).collect();
        let dscale = pts.iter().map(|p| p.0).fold(0.0, f64::max);
        for &(d, v) in &pts {
            let x = d / dscale;
            s11 += x * x;
            s12 += x * x * x;
            s22 += x * x * x * x;
            b1 += x * v;
            b2 += x * x * v;
        }
        let det = s11 * s22 - s12 * s12;
        let a = (b1 * s22 - b2 * s12) / det;
        let b = (s11 * b2 - s12 * b1) / det;
        EndpointFit {
            radius,
            mean_curvature: h,
            slope: a / dscale,
            quad_coeff: b / (dscale * dscale),
            expected_quad: -h / (2.0 * (nf - 1.0)),
        }
    };
    let mut out = Vec::new();
    if sol.kind == RadialKind::Annulus {
        out.push(fit(&mut (2..2 + window), sol.r0, -(nf - 1.0) / sol.r0));
    }
    out.push(fit(
        &mut (len - 2 - window..len - 2),
        sol.r_outer,
        (nf - 1.0) / sol.r_outer,
    ));
    Ok(out)
}

/// Radial solution of the truncated problem `Δu = c u^p` in `B(0, R)` with
/// `u = M` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedBall {
    pub n: usize,
    pub radius: f64,
    pub m: f64,
    pub u_center: f64,
    pub v_center: f64,
    pub shooting_iterations: usize,
}

/// Exact `v_M(0)` for the truncated ball problem: `ρ/2` with
/// `ρ = m + sqrt(m² + R²)`, `m = M^{−2/(n−2)}`.
pub fn truncated_ball_exact_v_center(n: usize, radius: f64, m_bound: f64) -> f64 {
    let m = m_bound.powf(-2.0 / (n as f64 - 2.0));
    0.5 * (m + (m * m + radius * radius).sqrt())
}

/// Shoots on `u(0)` until `u(R) = M`.
pub fn solve_ball_u_truncated(n: usize, radius: f64, m_bound: f64) -> Result<TruncatedBall> {
    check_dim(n)?;
    if !(m_bound > 0.0 && m_bound.is_finite()) {
        return Err(Error::Precondition(format!("boundary value M must be positive, got {m_bound}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Precondition(format!("ball radius must be positive, got {radius}")));
    }
    let nf = n as f64;
    let c = nf * (nf - 2.0) / 4.0;
    let p = (nf + 2.0) / (nf - 2.0);
    if !(2.0 * m_bound).powf(p).is_finite() {
        return Err(Error::Overflow(format!("M^{p} overflows for M = {m_bound:e}")));
    }
    let tol = ode::Tolerances {
        rtol: 1e-13,
        atol: 1e-300,
        max_steps: 200_000,
    };
    let r_start = 1e-3 * radius;
    let cap = 2.0 * m_bound;
    // u(R; a) as a function of the centre value; None means it exceeded the cap
    let shoot = |a: f64| -> Option<f64> {
        let alpha = c * a.powf(p) / (2.0 * nf);
        let beta = c * p * a.powf(p - 1.0) * alpha / (4.0 * (nf + 2.0));
        let rs2 = r_start * r_start;
        let y0 = [a + alpha * rs2 + beta * rs2 * rs2, 2.0 * alpha * r_start + 4.0 * beta * rs2 * r_start];
        let rhs = |r: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = c * y[0].max(0.0).powf(p) - (nf - 1.0) * y[1] / r;
        };
        match ode::integrate(rhs, r_start, &y0, radius, &tol, |_, y| y[0] > cap) {
            ode::Outcome::Completed(y) => Some(y[0]),
            _ => None,
        }
    };
    // the untruncated solution has u(0) = (R/2)^{-(n-2)/2}; every truncation lies below it
    let a_inf = (0.5 * radius).powf(-0.5 * (nf - 2.0));
    let mut hi = (1.1 * a_inf).ln();
    let mut lo = (a_inf.min(m_bound) * 1e-3).ln();
    match shoot(lo.exp()) {
        Some(u) if u < m_bound => {}
        _ => return Err(Error::Divergence { solver: "truncated ball shooting", history: vec![] }),
    }
    let mut iterations = 0;
    while hi - lo > 1e-15 * hi.abs().max(1.0) && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match shoot(mid.exp()) {
            Some(u) if u < m_bound => lo = mid,
            _ => hi = mid,
        }
    }
    let u_center = (0.5 * (lo + hi)).exp();
    Ok(TruncatedBall {
        n,
        radius,
        m: m_bound,
        u_center,
        v_center: u_center.powf(-2.0 / (nf - 2.0)),
        shooting_iterations: iterations,
    })
}
