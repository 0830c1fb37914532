//! Finite-difference Newton–Krylov solver for `v Δv = (n/2)(|∇v|² − 1)` on a
//! regular lattice.
//!
//! Interior nodes use the standard central stencils. Nodes just outside the
//! interior set (cut nodes) are not unknowns: they carry the two-term boundary
//! expansion `d − H d²/(2(n−1))` evaluated at their signed distance, which is
//! negative for nodes beyond the boundary.

mod field;
pub mod krylov;
mod truncated;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use field::{CutNode, GridField, NodeKind, INTERIOR_SAFETY};
pub use truncated::{solve_u_truncated, u_to_v};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use krylov::{bicgstab, EllMatrix};

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_inf: f64,
    /// Accepted step length of every Newton iteration.
    pub damping: Vec<f64>,
    /// Residual ∞-norm before each iteration and after the last.
    pub residual_history: Vec<f64>,
    pub linear_iterations: usize,
    pub h: f64,
    pub unknowns: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub h: f64,
    pub tol: f64,
    pub max_newton: usize,
    /// Solve on `2h` first and interpolate as the starting guess.
    pub warm_start: bool,
    pub max_linear: usize,
}

impl GridOptions {
    pub fn new(h: f64, tol: f64) -> Self {
        GridOptions {
            h,
            tol,
            max_newton: 60,
            warm_start: true,
            max_linear: 4000,
        }
    }

    /// Mesh width `diameter / 64`.
    pub fn default_h(domain: &Domain) -> f64 {
        domain.diameter() / 64.0
    }
}

/// Boundary-expansion value at signed distance `d` (may be negative).
pub fn expansion_value(d: f64, mean_curvature: f64, n: usize) -> f64 {
    d - mean_curvature * d * d / (2.0 * (n as f64 - 1.0))
}

/// Unknown numbering and neighbour table of an interior node set.
struct System {
    n: usize,
    h: f64,
    /// Lattice index of every unknown.
    nodes: Vec<usize>,
    /// For unknown `u` and slot `2a + s` (s = 0 backwards, 1 forwards): index into
    /// `[unknowns…, fixed…]`.
    nbr: Vec<u32>,
    fixed: Vec<f64>,
}

impl System {
    fn new(field: &GridField, fixed_value: impl Fn(usize) -> f64) -> Result<Self> {
        let nodes = field.interior_indices();
        let m = nodes.len();
        if m >= u32::MAX as usize / 2 {
            return Err(Error::Precondition("too many unknowns".into()));
        }
        let mut slot = vec![u32::MAX; field.len()];
        for (u, &i) in nodes.iter().enumerate() {
            slot[i] = u as u32;
        }
        let mut fixed = Vec::new();
        let mut nbr = vec![0u32; m * 2 * field.n];
        for (u, &i) in nodes.iter().enumerate() {
            for a in 0..field.n {
                for (s, dir) in [-1, 1].into_iter().enumerate() {
                    let j = field
                        .neighbor(i, a, dir)
                        .ok_or_else(|| Error::Precondition("interior node on the lattice edge".into()))?;
                    if slot[j] == u32::MAX {
                        if field.mask[j] == NodeKind::Exterior {
                            return Err(Error::Precondition(
                                "interior node next to an exterior node".into(),
                            ));
                        }
                        slot[j] = (m + fixed.len()) as u32;
                        fixed.push(fixed_value(j));
                    }
                    nbr[u * 2 * field.n + 2 * a + s] = slot[j];
                }
            }
        }
        Ok(System {
            n: field.n,
            h: field.h,
            nodes,
            nbr,
            fixed,
        })
    }

    fn m(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    fn value(&self, v: &[f64], slot: u32) -> f64 {
        let s = slot as usize;
        if s < v.len() {
            v[s]
        } else {
            self.fixed[s - v.len()]
        }
    }

    /// Discrete Laplacian and gradient at unknown `u`.
    #[inline]
    fn stencil(&self, v: &[f64], u: usize) -> (f64, f64) {
        let w = 2 * self.n;
        let c = v[u];
        let (mut lap, mut g2) = (0.0, 0.0);
        for a in 0..self.n {
            let lo = self.value(v, self.nbr[u * w + 2 * a]);
            let hi = self.value(v, self.nbr[u * w + 2 * a + 1]);
            lap += lo + hi - 2.0 * c;
            let g = (hi - lo) / (2.0 * self.h);
            g2 += g * g;
        }
        (lap / (self.h * self.h), g2)
    }

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        let half_n = 0.5 * self.n as f64;
        (0..self.m())
            .into_par_iter()
            .map(|u| {
                let (lap, g2) = self.stencil(v, u);
                v[u] * lap - half_n * (g2 - 1.0)
            })
            .collect()
    }

    fn jacobian(&self, v: &[f64]) -> EllMatrix {
        let m = self.m();
        let w = 2 * self.n;
        let nf = self.n as f64;
        let h = self.h;
        let h2 = h * h;
        let rows: Vec<(f64, Vec<(u32, f64)>)> = (0..m)
            .into_par_iter()
            .map(|u| {
                let (lap, _) = self.stencil(v, u);
                let diag = lap - 2.0 * nf * v[u] / h2;
                let mut off = Vec::with_capacity(w);
                for a in 0..self.n {
                    let lo_s = self.nbr[u * w + 2 * a];
                    let hi_s = self.nbr[u * w + 2 * a + 1];
                    let g = (self.value(v, hi_s) - self.value(v, lo_s)) / (2.0 * h);
                    off.push((lo_s, v[u] / h2 + nf * g / (2.0 * h)));
                    off.push((hi_s, v[u] / h2 - nf * g / (2.0 * h)));
                }
                (diag, off)
            })
            .collect();
        let mut diag = vec![0.0; m];
        let mut cols = vec![u32::MAX; m * w];
        let mut vals = vec![0.0; m * w];
        for (u, (d, off)) in rows.into_iter().enumerate() {
            diag[u] = d;
            for (j, (c, x)) in off.into_iter().enumerate() {
                cols[u * w + j] = if (c as usize) < m { c } else { u32::MAX };
                vals[u * w + j] = x;
            }
        }
        EllMatrix {
            rows: m,
            width: w,
            diag,
            cols,
            vals,
        }
    }
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn solve_v(domain: &Domain, h: f64, tol: f64) -> Result<(GridField, SolveReport)> {
    solve_v_with(domain, &GridOptions::new(h, tol))
}

pub fn solve_v_with(domain: &Domain, opts: &GridOptions) -> Result<(GridField, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let start = Instant::now();
    let mut field = GridField::build(domain, opts.h)?;
    field.check_connected()?;
    let n = field.n;

    for c in &field.cut {
        field.values[c.index] = expansion_value(c.fraction * field.h, c.mean_curvature, n);
    }
    let coarse = if opts.warm_start && domain.diameter() / (2.0 * opts.h) >= 16.0 {
        let coarse_opts = GridOptions {
            h: 2.0 * opts.h,
            tol: opts.tol.max(1e-8),
            ..opts.clone()
        };
        solve_v_with(domain, &coarse_opts).ok().map(|(f, _)| f)
    } else {
        None
    };
    let sys = System::new(&field, |j| field.values[j])?;
    let v0: Vec<f64> = sys
        .nodes
        .par_iter()
        .map(|&i| {
            let d = field.distance[i];
            coarse
                .as_ref()
                .and_then(|c| c.interpolate(&field.position(i)))
                .filter(|x| *x > 0.0)
                .unwrap_or(d)
        })
        .collect();

    let mut report = SolveReport {
        h: opts.h,
        unknowns: sys.m(),
        ..SolveReport::default()
    };
    let v = match newton(&sys, v0.clone(), opts, None, &mut report) {
        Ok(v) => v,
        Err(first) => {
            // retry from the same guess with pseudo-time stepping
            report.iterations = 0;
            report.damping.clear();
            report.residual_history.clear();
            newton(&sys, v0, opts, Some(PSEUDO_TIME_START), &mut report).map_err(|second| match second {
                Error::Stall(_) | Error::Divergence { .. } => first,
                other => other,
            })?
        }
    };
    for (u, &i) in sys.nodes.iter().enumerate() {
        field.values[i] = v[u];
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((field, report))
}

const PSEUDO_TIME_START: f64 = 0.05;

/// Newton iteration from `v`. With `pseudo_time = Some(τ)` each step solves
/// `(J − I/τ) δ = −F` and τ grows as the residual falls, so early steps follow
/// `∂v/∂t = F(v)`.
fn newton(
    sys: &System,
    mut v: Vec<f64>,
    opts: &GridOptions,
    pseudo_time: Option<f64>,
    report: &mut SolveReport,
) -> Result<Vec<f64>> {
    let start = Instant::now();
    let max_iter = if pseudo_time.is_some() { 4 * opts.max_newton } else { opts.max_newton };
    let mut tau = pseudo_time;
    let mut f = sys.residual(&v);
    let mut f_inf = inf_norm(&f);
    report.residual_history.push(f_inf);
    while f_inf > opts.tol {
        let stalled = {
            let hist = &report.residual_history;
            tau.is_none() && hist.len() > 10 && f_inf > 0.99 * hist[hist.len() - 11]
        };
        if report.iterations >= max_iter || stalled {
            report.residual_inf = f_inf;
            report.wall_time += start.elapsed().as_secs_f64();
            return Err(Error::Stall(Box::new(report.clone())));
        }
        report.iterations += 1;
        let mut jac = sys.jacobian(&v);
        if let Some(t) = tau {
            jac.diag.iter_mut().for_each(|d| *d -= 1.0 / t);
        }
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let eta = f_inf.clamp(1e-10, 0.1);
        let (dv, lin) = bicgstab(&jac, &rhs, eta, opts.max_linear);
        report.linear_iterations += lin.iterations;

        let f_two = krylov::norm(&f);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let trial: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + lambda * b).collect();
            if trial.iter().all(|&x| x > 0.0) {
                let ft = sys.residual(&trial);
                // pseudo-time steps are accepted without a decrease condition
                if tau.is_some() || krylov::norm(&ft) < (1.0 - 1e-4 * lambda) * f_two {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((vt, ft)) = accepted else {
            return Err(Error::Divergence {
                solver: "grid Newton",
                history: report.residual_history.clone(),
            });
        };
        report.damping.push(lambda);
        v = vt;
        f = ft;
        f_inf = inf_norm(&f);
        if let Some(t) = tau {
            let grown = (t * f_two / krylov::norm(&f).max(f64::MIN_POSITIVE)).min(1e14);
            tau = Some(if lambda < 1.0 { t * 0.5 } else { grown });
        }
        report.residual_history.push(f_inf);
    }
    report.residual_inf = f_inf;
    report.wall_time += start.elapsed().as_secs_f64();
    Ok(v)
}

/// ∞-norm over interior nodes of `v Δ_h v − (n/2)(|∇_h v|² − 1)`, using the
/// values stored in the field (cut nodes included).
pub fn residual(field: &GridField, domain: &Domain) -> Result<f64> {
    if field.n != domain.dim() {
        return Err(Error::Precondition(format!(
            "field dimension {} does not match domain dimension {}",
            field.n,
            domain.dim()
        )));
    }
    Ok(inf_norm(&residual_field(field)?))
}

/// Residual at every interior node, in the order of `field.interior_indices()`.
pub fn residual_field(field: &GridField) -> Result<Vec<f64>> {
    let sys = System::new(field, |j| field.values[j])?;
    let v: Vec<f64> = sys.nodes.iter().map(|&i| field.values[i]).collect();
    Ok(sys.residual(&v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_profile(field: &mut GridField, radius: f64) {
        for i in 0..field.len() {
            if field.mask[i] != NodeKind::Exterior {
                let p = field.position(i);
                let r2: f64 = p.iter().map(|x| x * x).sum();
                field.values[i] = (radius * radius - r2) / (2.0 * radius);
            }
        }
    }

    #[test]
    fn residual_examples() {
        let d = Domain::unit_ball(3).unwrap();
        let mut f = GridField::build(&d, 1.0 / 16.0).unwrap();
        assert!((residual(&f, &d).unwrap() - 1.5).abs() < 1e-15);
        ball_profile(&mut f, 1.0);
        assert!(residual(&f, &d).unwrap() < 1e-12);
    }

    #[test]
    fn ball_solution_is_reproduced() {
        let d = Domain::unit_ball(3).unwrap();
        let (f, rep) = solve_v(&d, 1.0 / 16.0, 1e-10).unwrap();
        assert!(rep.residual_inf <= 1e-10);
        let mut err: f64 = 0.0;
        for i in f.interior_indices() {
            let p = f.position(i);
            let r2: f64 = p.iter().map(|x| x * x).sum();
            err = err.max((f.values[i] - (1.0 - r2) / 2.0).abs());
            assert!(f.values[i] > 0.0);
        }
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn annulus_matches_radial() {
        let d = Domain::annulus(3, 0.5, 2.0).unwrap();
        let (f, _) = solve_v(&d, 1.0 / 8.0, 1e-10).unwrap();
        let rad = crate::radial::solve_annulus(3, 0.5, 2.0, 1e-10).unwrap();
        let mut err: f64 = 0.0;
        for i in f.interior_indices() {
            let r = crate::linalg::norm(&f.position(i));
            err = err.max((f.values[i] - rad.interpolate(r).unwrap()).abs());
        }
        assert!(err < 3e-2, "{err}");
    }

    #[test]
    fn convex_distance_bound_and_symmetry() {
        let d = Domain::ellipsoid(vec![1.0, 1.5, 2.0]).unwrap();
        let (f, rep) = solve_v(&d, 0.125, 1e-10).unwrap();
        for i in f.interior_indices() {
            assert!(f.values[i] <= f.distance[i] + 1e-9, "node {i}");
        }
        // reflection x -> -x is a lattice symmetry
        let rev = |i: usize| {
            let k = f.coords(i);
            let m: Vec<usize> = k.iter().zip(&f.dims).map(|(a, d)| d - 1 - a).collect();
            f.index(&m)
        };
        for i in f.interior_indices() {
            assert!((f.values[i] - f.values[rev(i)]).abs() < 10.0 * rep.residual_inf.max(1e-12) * 100.0);
        }
    }

    #[test]
    fn axis_permutation_equivariance() {
        let d1 = Domain::ellipsoid(vec![1.0, 1.5, 2.0]).unwrap();
        let d2 = Domain::ellipsoid(vec![2.0, 1.0, 1.5]).unwrap();
        let (f1, _) = solve_v(&d1, 0.125, 1e-11).unwrap();
        let (f2, _) = solve_v(&d2, 0.125, 1e-11).unwrap();
        // f2(x0, x1, x2) = f1(x1, x2, x0)
        for i in f1.interior_indices() {
            let k = f1.coords(i);
            let j = f2.index(&[k[2], k[0], k[1]]);
            assert!((f1.values[i] - f2.values[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_law() {
        let d1 = Domain::unit_ball(3).unwrap();
        let d2 = Domain::ball(3, vec![0.0; 3], 2.0).unwrap();
        let (f1, _) = solve_v(&d1, 0.125, 1e-11).unwrap();
        let (f2, _) = solve_v(&d2, 0.25, 1e-11).unwrap();
        for i in f1.interior_indices() {
            assert!((2.0 * f1.values[i] - f2.values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_disconnected_or_empty() {
        let d = Domain::unit_ball(3).unwrap();
        assert!(matches!(solve_v(&d, 5.0, 1e-8), Err(Error::Precondition(_))));
    }
}
