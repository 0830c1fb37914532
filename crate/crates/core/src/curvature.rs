//! Sectional and Ricci curvature of `g = v^{-2} g_E` from a solved field.
//!
//! Curvatures are expressed in the orthonormal frame `v ∂_i` of the conformal
//! metric, so for `i ≠ j`
//!
//! ```text
//! K_ij   = v v_ii + v v_jj − |∇v|²
//! Ric_ij = (n−2) v v_ij − [(n−2)/2 |∇v|² + n/2] δ_ij
//! ```

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt;
use crate::geometry::{Domain, Sphere};
use crate::linalg::{norm, sub, sym_eigenvalues};
use crate::pde::{GridField, NodeKind};

/// Central-difference gradient and Hessian at one lattice node.
#[derive(Debug, Clone)]
pub struct NodeDerivatives {
    pub index: usize,
    pub position: Vec<f64>,
    pub v: f64,
    pub grad: Vec<f64>,
    /// Row-major `n × n`.
    pub hess: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvaturePoint {
    pub position: Vec<f64>,
    pub v: f64,
    pub grad_v: Vec<f64>,
    pub hess_v: Vec<f64>,
    pub ricci_matrix: Vec<f64>,
    pub ricci_eigenvalues: Vec<f64>,
    pub min_sectional: f64,
    pub max_sectional: f64,
    /// `|Σ eigenvalues + n(n−1)|`.
    pub trace_defect: f64,
    /// `v Δv − (n/2)(|∇v|² − 1)` from the same differences.
    pub local_residual: f64,
}

/// Derivatives at every interior node whose full `3^n` block carries values.
pub fn hessian_field(field: &GridField) -> Vec<NodeDerivatives> {
    field
        .interior_indices()
        .into_par_iter()
        .filter_map(|i| node_derivatives(field, i))
        .collect()
}

pub fn node_derivatives(field: &GridField, i: usize) -> Option<NodeDerivatives> {
    let n = field.n;
    let h = field.h;
    let v0 = field.values[i];
    let at = |j: Option<usize>| -> Option<f64> {
        let j = j?;
        (field.mask[j] != NodeKind::Exterior).then(|| field.values[j])
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    for a in 0..n {
        let lo = at(field.neighbor(i, a, -1))?;
        let hi = at(field.neighbor(i, a, 1))?;
        grad[a] = (hi - lo) / (2.0 * h);
        hess[a * n + a] = (hi + lo - 2.0 * v0) / (h * h);
        for b in (a + 1)..n {
            let corner = |da: i32, db: i32| -> Option<f64> {
                let j = field.neighbor(i, a, da)?;
                at(field.neighbor(j, b, db))
            };
            let vab = (corner(1, 1)? - corner(1, -1)? - corner(-1, 1)? + corner(-1, -1)?) / (4.0 * h * h);
            hess[a * n + b] = vab;
            hess[b * n + a] = vab;
        }
    }
    Some(NodeDerivatives {
        index: i,
        position: field.position(i),
        v: v0,
        grad,
        hess,
    })
}

/// Sectional curvature of the coordinate plane `(i, j)`.
pub fn sectional(v: f64, grad: &[f64], hess: &[f64], i: usize, j: usize) -> Result<f64> {
    let n = grad.len();
    if i == j || i >= n || j >= n {
        return Err(Error::Precondition(format!(
            "sectional curvature needs two distinct axes below {n}, got ({i}, {j})"
        )));
    }
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    Ok(v * hess[i * n + i] + v * hess[j * n + j] - g2)
}

/// Ricci matrix with ambient curvature terms:
/// `v² R_kl − v² S δ_kl /(2(n−1)) + (n−2) v v_kl − ((n−2)/2)|∇v|² δ_kl − (n/2) δ_kl`.
/// The flat case passes a zero `ambient_ricci` and `ambient_scalar`.
pub fn ricci_with_ambient(v: f64, grad: &[f64], hess: &[f64], ambient_ricci: &[f64], ambient_scalar: f64) -> Vec<f64> {
    let n = grad.len();
    let nf = n as f64;
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    let shift = 0.5 * (nf - 2.0) * g2 + 0.5 * nf + v * v * ambient_scalar / (2.0 * (nf - 1.0));
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            out[k * n + l] = v * v * ambient_ricci[k * n + l] + (nf - 2.0) * v * hess[k * n + l];
        }
        out[k * n + k] -= shift;
    }
    out
}

/// Flat-ambient Ricci matrix and its eigenvalues in ascending order.
pub fn ricci(v: f64, grad: &[f64], hess: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grad.len();
    let m = ricci_with_ambient(v, grad, hess, &vec![0.0; n * n], 0.0);
    let ev = sym_eigenvalues(&m, n);
    (m, ev)
}

/// `(v, ∇v, Hess v)` from `(u, ∇u, Hess u)` with `v = u^{−2/(n−2)}`.
pub fn v_derivatives_from_u(u: f64, grad_u: &[f64], hess_u: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = grad_u.len();
    let nf = n as f64;
    let e = -2.0 / (nf - 2.0);
    let v = u.powf(e);
    let grad: Vec<f64> = grad_u.iter().map(|g| -2.0 / (nf - 2.0) * v / u * g).collect();
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            hess[i * n + j] = -2.0 / (nf - 2.0)
                * v
                * (hess_u[i * n + j] / u - nf / (nf - 2.0) * grad_u[i] * grad_u[j] / (u * u));
        }
    }
    (v, grad, hess)
}

pub fn curvature_point(d: &NodeDerivatives) -> CurvaturePoint {
    let n = d.grad.len();
    let nf = n as f64;
    let (m, ev) = ricci(d.v, &d.grad, &d.hess);
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = sectional(d.v, &d.grad, &d.hess, i, j).expect("distinct axes");
            smin = smin.min(s);
            smax = smax.max(s);
        }
    }
    let g2: f64 = d.grad.iter().map(|g| g * g).sum();
    let lap: f64 = (0..n).map(|a| d.hess[a * n + a]).sum();
    CurvaturePoint {
        position: d.position.clone(),
        v: d.v,
        grad_v: d.grad.clone(),
        hess_v: d.hess.clone(),
        ricci_matrix: m,
        trace_defect: (ev.iter().sum::<f64>() + nf * (nf - 1.0)).abs(),
        ricci_eigenvalues: ev,
        min_sectional: smin,
        max_sectional: smax,
        local_residual: d.v * lap - 0.5 * nf * (g2 - 1.0),
    }
}

/// Curvature at interior nodes at least `min_depth` inside the domain.
pub fn curvature_points(field: &GridField, min_depth: f64) -> Vec<CurvaturePoint> {
    field
        .interior_indices()
        .into_par_iter()
        .filter(|&i| field.distance[i] >= min_depth)
        .filter_map(|i| node_derivatives(field, i))
        .map(|d| curvature_point(&d))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub domain: String,
    pub h: f64,
    pub min_ricci: f64,
    pub max_ricci: f64,
    /// Position of the largest Ricci eigenvalue.
    pub argmax: Vec<f64>,
    pub trace_defect_max: f64,
    /// `[min, max]` over all coordinate planes of all reported nodes.
    pub sectional_range: [f64; 2],
    pub argmax_sectional: Vec<f64>,
    pub residual_max: f64,
    pub reported_nodes: usize,
    /// Fraction of reported nodes with a nonnegative Ricci eigenvalue.
    pub fraction_ricci_nonnegative: f64,
    /// Fraction of reported nodes with a nonnegative sectional value.
    pub fraction_sectional_nonnegative: f64,
}

/// Summary over nodes at least `2h` from the boundary.
pub fn curvature_report(field: &GridField, domain_label: &str) -> Result<(CurvatureReport, Vec<CurvaturePoint>)> {
    let pts = curvature_points(field, 2.0 * field.h);
    if pts.is_empty() {
        return Err(Error::Precondition(format!(
            "no interior nodes at depth ≥ 2h for h = {}; refine the mesh",
            field.h
        )));
    }
    let mut rep = CurvatureReport {
        domain: domain_label.to_string(),
        h: field.h,
        min_ricci: f64::INFINITY,
        max_ricci: f64::NEG_INFINITY,
        argmax: Vec::new(),
        trace_defect_max: 0.0,
        sectional_range: [f64::INFINITY, f64::NEG_INFINITY],
        argmax_sectional: Vec::new(),
        residual_max: 0.0,
        reported_nodes: pts.len(),
        fraction_ricci_nonnegative: 0.0,
        fraction_sectional_nonnegative: 0.0,
    };
    let (mut ric_nn, mut sec_nn) = (0usize, 0usize);
    // points come back in lattice order, so ties resolve deterministically
    for p in &pts {
        let lo = p.ricci_eigenvalues[0];
        let hi = *p.ricci_eigenvalues.last().expect("n ≥ 3");
        rep.min_ricci = rep.min_ricci.min(lo);
        if hi > rep.max_ricci {
            rep.max_ricci = hi;
            rep.argmax = p.position.clone();
        }
        rep.sectional_range[0] = rep.sectional_range[0].min(p.min_sectional);
        if p.max_sectional > rep.sectional_range[1] {
            rep.sectional_range[1] = p.max_sectional;
            rep.argmax_sectional = p.position.clone();
        }
        rep.trace_defect_max = rep.trace_defect_max.max(p.trace_defect);
        rep.residual_max = rep.residual_max.max(p.local_residual.abs());
        ric_nn += usize::from(hi >= 0.0);
        sec_nn += usize::from(p.max_sectional >= 0.0);
    }
    rep.fraction_ricci_nonnegative = ric_nn as f64 / pts.len() as f64;
    rep.fraction_sectional_nonnegative = sec_nn as f64 / pts.len() as f64;
    Ok((rep, pts))
}

/// Per-node CSV: position, v, Ricci eigenvalues, sectional extremes, trace defect.
pub fn write_points_csv<W: Write>(points: &[CurvaturePoint], mut out: W) -> Result<()> {
    let Some(first) = points.first() else {
        writeln!(out, "x")?;
        return Ok(());
    };
    let n = first.position.len();
    let mut head: Vec<String> = (1..=n).map(|a| format!("x{a}")).collect();
    head.push("v".into());
    head.extend((1..=n).map(|a| format!("ricci_{a}")));
    head.extend(["min_sectional", "max_sectional", "trace_defect", "residual"].map(String::from));
    writeln!(out, "{}", head.join(","))?;
    for p in points {
        let mut row = p.position.clone();
        row.push(p.v);
        row.extend(&p.ricci_eigenvalues);
        row.extend([p.min_sectional, p.max_sectional, p.trace_defect, p.local_residual]);
        writeln!(out, "{}", fmt::join(&row))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsCheck {
    pub shell_nodes: usize,
    /// `max |λ + (n−1)|` over the shell `h < d < 4h`.
    pub max_deviation: f64,
    /// `max |λ + (n−1)| / d`, bounded when the deviation is `O(d)`.
    pub max_ratio: f64,
    /// Largest sectional value in the shell.
    pub max_sectional: f64,
}

pub fn boundary_asymptotics_check(field: &GridField, domain: &Domain) -> Result<AsymptoticsCheck> {
    let h = field.h;
    let nf = field.n as f64;
    let shell: Vec<(f64, CurvaturePoint)> = field
        .interior_indices()
        .into_par_iter()
        .filter_map(|i| {
            let d = domain.signed_distance(&field.position(i)).ok()?;
            if d > h && d < 4.0 * h {
                node_derivatives(field, i).map(|nd| (d, curvature_point(&nd)))
            } else {
                None
            }
        })
        .collect();
    if shell.is_empty() {
        return Err(Error::Precondition(format!("boundary shell h < d < 4h is empty at h = {h}")));
    }
    let mut out = AsymptoticsCheck {
        shell_nodes: shell.len(),
        max_deviation: 0.0,
        max_ratio: 0.0,
        max_sectional: f64::NEG_INFINITY,
    };
    for (d, p) in &shell {
        let dev = p
            .ricci_eigenvalues
            .iter()
            .fold(0.0f64, |m, e| m.max((e + nf - 1.0).abs()));
        out.max_deviation = out.max_deviation.max(dev);
        out.max_ratio = out.max_ratio.max(dev / d);
        out.max_sectional = out.max_sectional.max(p.max_sectional);
    }
    Ok(out)
}

/// A Möbius transformation of `R^n`, as a composition of elementary maps.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobius {
    Identity,
    Dilation(f64),
    Translation(Vec<f64>),
    /// `x ↦ c + ρ² (x − c)/|x − c|²`.
    Inversion { center: Vec<f64>, radius: f64 },
    /// Applied left to right.
    Compose(Vec<Mobius>),
}

impl Mobius {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Mobius::Identity => Ok(x.to_vec()),
            Mobius::Dilation(l) => Ok(x.iter().map(|c| l * c).collect()),
            Mobius::Translation(b) => Ok(x.iter().zip(b).map(|(c, d)| c + d).collect()),
            Mobius::Inversion { center, radius } => {
                let rel = sub(x, center);
                let r2: f64 = rel.iter().map(|c| c * c).sum();
                if r2 == 0.0 {
                    return Err(Error::PointAtInfinity);
                }
                Ok(center.iter().zip(&rel).map(|(c, d)| c + radius * radius * d / r2).collect())
            }
            Mobius::Compose(maps) => maps.iter().try_fold(x.to_vec(), |y, m| m.apply(&y)),
        }
    }

    pub fn inverse(&self) -> Mobius {
        match self {
            Mobius::Identity => Mobius::Identity,
            Mobius::Dilation(l) => Mobius::Dilation(1.0 / l),
            Mobius::Translation(b) => Mobius::Translation(b.iter().map(|c| -c).collect()),
            Mobius::Inversion { .. } => self.clone(),
            Mobius::Compose(maps) => Mobius::Compose(maps.iter().rev().map(Mobius::inverse).collect()),
        }
    }

    /// Linear stretch factor `|dφ(x)|`.
    pub fn conformal_factor(&self, x: &[f64]) -> Result<f64> {
        match self {
            Mobius::Identity | Mobius::Translation(_) => Ok(1.0),
            Mobius::Dilation(l) => Ok(l.abs()),
            Mobius::Inversion { center, radius } => {
                let r2: f64 = sub(x, center).iter().map(|c| c * c).sum();
                if r2 == 0.0 {
                    return Err(Error::PointAtInfinity);
                }
                Ok(radius * radius / r2)
            }
            Mobius::Compose(maps) => {
                let mut y = x.to_vec();
                let mut factor = 1.0;
                for m in maps {
                    factor *= m.conformal_factor(&y)?;
                    y = m.apply(&y)?;
                }
                Ok(factor)
            }
        }
    }

    /// Image of a ball; fails if the image is not a bounded ball.
    pub fn image_ball(&self, ball: &Sphere) -> Result<Sphere> {
        match self {
            Mobius::Identity => Ok(ball.clone()),
            Mobius::Dilation(l) => Ok(Sphere::new(ball.center.iter().map(|c| l * c).collect(), l.abs() * ball.radius)),
            Mobius::Translation(_) => Ok(Sphere::new(self.apply(&ball.center)?, ball.radius)),
            Mobius::Inversion { center, radius } => {
                let dvec = sub(&ball.center, center);
                let delta = norm(&dvec);
                if delta <= ball.radius {
                    return Err(Error::Precondition(
                        "the inversion centre lies in the closed ball, so the image is unbounded".into(),
                    ));
                }
                let k = radius * radius / (delta * delta - ball.radius * ball.radius);
                Ok(Sphere::new(
                    center.iter().zip(&dvec).map(|(c, d)| c + k * d).collect(),
                    k * ball.radius,
                ))
            }
            Mobius::Compose(maps) => maps.iter().try_fold(ball.clone(), |b, m| m.image_ball(&b)),
        }
    }
}

/// `v = (R² − |x − c|²)/(2R)`, the solution on a ball.
pub fn ball_profile(ball: &Sphere, x: &[f64]) -> f64 {
    let r2: f64 = sub(x, &ball.center).iter().map(|c| c * c).sum();
    (ball.radius * ball.radius - r2) / (2.0 * ball.radius)
}

/// The ball solution transported by a Möbius map:
/// `v_img(φ(x)) = |dφ(x)| v(x)`.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub source: Sphere,
    pub image: Sphere,
    map: Mobius,
    inverse: Mobius,
}

impl Pushforward {
    pub fn value_at(&self, y: &[f64]) -> Result<f64> {
        let x = self.inverse.apply(y)?;
        Ok(self.map.conformal_factor(&x)? * ball_profile(&self.source, &x))
    }
}

pub fn mobius_pushforward(ball: &Sphere, map: &Mobius) -> Result<Pushforward> {
    let image = map.image_ball(ball)?;
    Ok(Pushforward {
        source: ball.clone(),
        image,
        map: map.clone(),
        inverse: map.inverse(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(domain: &Domain, h: f64, f: impl Fn(&[f64]) -> f64) -> GridField {
        let mut field = GridField::build(domain, h).unwrap();
        for i in 0..field.len() {
            if field.mask[i] != NodeKind::Exterior {
                field.values[i] = f(&field.position(i));
            }
        }
        field
    }

    #[test]
    fn hessian_examples() {
        let d = Domain::unit_ball(3).unwrap();
        let ball = synthetic(&d, 0.125, |x| (1.0 - x.iter().map(|c| c * c).sum::<f64>()) / 2.0);
        for nd in hessian_field(&ball) {
            for a in 0..3 {
                for b in 0..3 {
                    let want = if a == b { -1.0 } else { 0.0 };
                    assert!((nd.hess[a * 3 + b] - want).abs() < 1e-10);
                }
            }
        }
        let lin = synthetic(&d, 0.125, |x| 0.3 * x[0] - x[1] + 2.0 * x[2]);
        for nd in hessian_field(&lin) {
            assert!(nd.hess.iter().all(|x| x.abs() < 1e-10));
            assert!((nd.grad[2] - 2.0).abs() < 1e-12);
        }
        let quad = synthetic(&d, 0.125, |x| x[0] * x[1] + 0.5 * x[2] * x[2] - x[0] * x[2]);
        for nd in hessian_field(&quad) {
            let want = [0.0, 1.0, -1.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0];
            for (got, w) in nd.hess.iter().zip(want) {
                assert!((got - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn poincare_ball_curvatures() {
        let d = Domain::unit_ball(3).unwrap();
        let f = synthetic(&d, 0.125, |x| (1.0 - x.iter().map(|c| c * c).sum::<f64>()) / 2.0);
        let (rep, pts) = curvature_report(&f, "ball").unwrap();
        assert!(!pts.is_empty());
        assert!((rep.min_ricci + 2.0).abs() < 1e-10 && (rep.max_ricci + 2.0).abs() < 1e-10);
        assert!((rep.sectional_range[0] + 1.0).abs() < 1e-10 && (rep.sectional_range[1] + 1.0).abs() < 1e-10);
        assert!(rep.trace_defect_max < 1e-10);
    }

    #[test]
    fn sectional_rejects_equal_axes() {
        assert!(sectional(1.0, &[0.0; 3], &[0.0; 9], 1, 1).is_err());
    }

    #[test]
    fn half_space_profile_is_exactly_hyperbolic() {
        // v = d for the half space x_1 > 0
        let (m, ev) = ricci(0.7, &[1.0, 0.0, 0.0, 0.0], &[0.0; 16]);
        assert!(ev.iter().all(|e| (e + 3.0).abs() < 1e-15));
        assert!((m[0] + 3.0).abs() < 1e-15);
    }

    #[test]
    fn ambient_terms_enter_linearly() {
        let mut ric = vec![0.0; 9];
        ric[0] = 2.0;
        let m = ricci_with_ambient(0.5, &[0.0; 3], &[0.0; 9], &ric, 6.0);
        // 0.25·2 − 0.25·6/4 − 3/2
        assert!((m[0] - (0.5 - 0.375 - 1.5)).abs() < 1e-15);
        assert!((m[4] - (-0.375 - 1.5)).abs() < 1e-15);
    }

    #[test]
    fn u_to_v_hessian_relation() {
        // ball: u = (2/(1 − r²))^{1/2} in 3D, v = (1 − r²)/2
        let x = [0.2, -0.1, 0.3];
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let w = 1.0 - r2;
        let u = (2.0 / w).sqrt();
        // ∂_i u = u · x_i / w, ∂_ij u = u (δ_ij / w + 3 x_i x_j / w²)
        let grad_u: Vec<f64> = x.iter().map(|c| u * c / w).collect();
        let mut hess_u = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                hess_u[i * 3 + j] = u * (delta / w + 3.0 * x[i] * x[j] / (w * w));
            }
        }
        let (v, g, hs) = v_derivatives_from_u(u, &grad_u, &hess_u);
        assert!((v - w / 2.0).abs() < 1e-14);
        for i in 0..3 {
            assert!((g[i] + x[i]).abs() < 1e-14);
            for j in 0..3 {
                let want = if i == j { -1.0 } else { 0.0 };
                assert!((hs[i * 3 + j] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pushforward_examples() {
        let unit = Sphere::new(vec![0.0; 3], 1.0);
        let id = mobius_pushforward(&unit, &Mobius::Identity).unwrap();
        let y = [0.1, 0.2, -0.3];
        assert_eq!(id.value_at(&y).unwrap(), ball_profile(&unit, &y));

        let dil = mobius_pushforward(&unit, &Mobius::Dilation(2.5)).unwrap();
        assert_eq!(dil.image.radius, 2.5);
        assert!((dil.value_at(&[0.5, 0.0, 0.0]).unwrap() - 2.5 * ball_profile(&unit, &[0.2, 0.0, 0.0])).abs() < 1e-15);

        let inv = Mobius::Inversion {
            center: vec![2.0, 0.5, 0.0],
            radius: 1.3,
        };
        let push = mobius_pushforward(&unit, &inv).unwrap();
        for k in 0..50 {
            let t = k as f64 / 50.0;
            let x = [0.9 * t * (3.0 * t).cos(), 0.5 * t, -0.4 * t];
            let y = inv.apply(&x).unwrap();
            let exact = ball_profile(&push.image, &y);
            assert!((push.value_at(&y).unwrap() - exact).abs() < 1e-10, "{k}");
        }
        let bad = Mobius::Inversion {
            center: vec![0.5, 0.0, 0.0],
            radius: 1.0,
        };
        assert!(mobius_pushforward(&unit, &bad).is_err());
    }
}
