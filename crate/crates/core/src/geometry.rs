//! Bounded domains in R^n with signed distance and boundary mean curvature.
//!
//! Conventions used everywhere else in the crate:
//! * signed distance is positive inside, zero on the boundary, negative outside;
//! * the mean curvature `H` is the sum of the principal curvatures with respect
//!   to the interior unit normal, so the sphere of radius `R` bounding a ball
//!   has `H = (n - 1) / R` and the inner sphere of an annulus has a negative `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};

/// Accuracy of the ellipsoid nearest-point projection.
pub const PROJECTION_TOL: f64 = 1e-12;
/// Maximum number of safeguarded Newton steps in the projection.
pub const PROJECTION_MAX_ITER: usize = 50;
/// How far from the boundary (relative to the domain size) a point handed to
/// [`Domain::mean_curvature`] may lie.
pub const ON_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Ball(Sphere),
    /// Centered at the origin.
    Annulus { inner: f64, outer: f64 },
    /// Axis-aligned, centered at the origin.
    Ellipsoid { semi_axes: Vec<f64> },
    BallMinusBalls { outer: Sphere, holes: Vec<Sphere> },
    /// `ball ∩ {(x - center)·normal <= offset}` with the rim replaced by a
    /// torus fillet of radius `smoothing_radius` on the domain.
    HalfSpaceCap {
        ball: Sphere,
        normal: Vec<f64>,
        offset: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainClass {
    Convex,
    Annular,
    MultiHole,
    Other,
}

/// A boundary point together with its interior unit normal and mean curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub position: Vec<f64>,
    pub interior_normal: Vec<f64>,
    pub mean_curvature: f64,
}

/// Result of projecting an arbitrary point onto the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub signed_distance: f64,
    pub boundary: BoundaryPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    shape: Shape,
    smoothing_radius: f64,
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidDomain(format!(
            "dimension must be at least 3, got {n}"
        )));
    }
    Ok(())
}

fn check_point(n: usize, x: &[f64], what: &str) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidDomain(format!(
            "{what} has {} coordinates, expected {n}",
            x.len()
        )));
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidDomain(format!("{what} is not finite")));
    }
    Ok(())
}

fn check_radius(r: f64, what: &str) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidDomain(format!(
            "{what} must be positive and finite, got {r}"
        )));
    }
    Ok(())
}

fn unit_e1(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e
}

impl Domain {
    pub fn ball(n: usize, center: Vec<f64>, radius: f64) -> Result<Self> {
        check_dim(n)?;
        check_point(n, &center, "ball center")?;
        check_radius(radius, "ball radius")?;
        Ok(Self {
            dim: n,
            shape: Shape::Ball(Sphere::new(center, radius)),
            smoothing_radius: 0.0,
        })
    }

    pub fn unit_ball(n: usize) -> Result<Self> {
        Self::ball(n, vec![0.0; n], 1.0)
    }

    pub fn annulus(n: usize, inner: f64, outer: f64) -> Result<Self> {
        check_dim(n)?;
        check_radius(inner, "annulus inner radius r0")?;
        check_radius(outer, "annulus outer radius R")?;
        if inner >= outer {
            return Err(Error::InvalidDomain(format!(
                "annulus needs r0 < R, got r0 = {inner}, R = {outer}"
            )));
        }
        Ok(Self {
            dim: n,
            shape: Shape::Annulus { inner, outer },
            smoothing_radius: 0.0,
        })
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        let n = semi_axes.len();
        check_dim(n)?;
        for a in &semi_axes {
            check_radius(*a, "ellipsoid semi-axis")?;
        }
        Ok(Self {
            dim: n,
            shape: Shape::Ellipsoid { semi_axes },
            smoothing_radius: 0.0,
        })
    }

    /// Outer ball with disjoint holes strictly inside it.
    pub fn ball_minus_balls(n: usize, outer: Sphere, holes: Vec<Sphere>) -> Result<Self> {
        Self::check_holes(n, &outer, &holes)?;
        for (k, hole) in holes.iter().enumerate() {
            let gap = outer.radius - norm(&sub(&hole.center, &outer.center)) - hole.radius;
            if gap <= 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "hole {k} is not strictly inside the outer ball"
                )));
            }
            for (l, other) in holes.iter().enumerate().skip(k + 1) {
                let sep = norm(&sub(&hole.center, &other.center)) - hole.radius - other.radius;
                if sep <= 0.0 {
                    return Err(Error::InvalidDomain(format!(
                        "holes {k} and {l} have intersecting closures"
                    )));
                }
            }
        }
        Ok(Self {
            dim: n,
            shape: Shape::BallMinusBalls { outer, holes },
            smoothing_radius: 0.0,
        })
    }

    /// Outer ball minus a union of balls that may overlap each other and the
    /// outer sphere. The signed distance stays exact inside the domain; outside
    /// it is a lower bound on the distance. The origin must stay inside.
    pub fn ball_minus_ball_union(n: usize, outer: Sphere, holes: Vec<Sphere>) -> Result<Self> {
        Self::check_holes(n, &outer, &holes)?;
        let dom = Self {
            dim: n,
            shape: Shape::BallMinusBalls { outer, holes },
            smoothing_radius: 0.0,
        };
        if dom.signed_distance(&vec![0.0; n])? <= 0.0 {
            return Err(Error::InvalidDomain(
                "the origin must lie inside a ball-union complement".into(),
            ));
        }
        Ok(dom)
    }

    fn check_holes(n: usize, outer: &Sphere, holes: &[Sphere]) -> Result<()> {
        check_dim(n)?;
        check_point(n, &outer.center, "outer center")?;
        check_radius(outer.radius, "outer radius")?;
        for hole in holes {
            check_point(n, &hole.center, "hole center")?;
            check_radius(hole.radius, "hole radius")?;
        }
        Ok(())
    }

    /// `ball ∩ {(x - c)·normal <= offset}` with a fillet of radius `smoothing`
    /// around the rim. `smoothing = 0` keeps the sharp rim.
    pub fn half_space_cap(
        n: usize,
        ball: Sphere,
        normal: Vec<f64>,
        offset: f64,
        smoothing: f64,
    ) -> Result<Self> {
        check_dim(n)?;
        check_point(n, &ball.center, "cap ball center")?;
        check_radius(ball.radius, "cap ball radius")?;
        check_point(n, &normal, "cap normal")?;
        let len = norm(&normal);
        if len == 0.0 {
            return Err(Error::InvalidDomain("cap normal is zero".into()));
        }
        let normal: Vec<f64> = normal.iter().map(|c| c / len).collect();
        if !(smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::InvalidDomain(format!(
                "smoothing radius must be non-negative, got {smoothing}"
            )));
        }
        let re = ball.radius - smoothing;
        let oe = offset - smoothing;
        if re <= 0.0 || oe.abs() >= re {
            return Err(Error::InvalidDomain(format!(
                "cutting plane offset {offset} with smoothing {smoothing} does not cut the ball of radius {}",
                ball.radius
            )));
        }
        Ok(Self {
            dim: n,
            shape: Shape::HalfSpaceCap {
                ball,
                normal,
                offset,
            },
            smoothing_radius: smoothing,
        })
    }

    /// Default fillet radius for a cap: 5% of the ball radius.
    pub fn default_cap_smoothing(radius: f64) -> f64 {
        0.05 * radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn smoothing_radius(&self) -> f64 {
        self.smoothing_radius
    }

    pub fn classify(&self) -> DomainClass {
        match &self.shape {
            Shape::Ball(_) | Shape::Ellipsoid { .. } | Shape::HalfSpaceCap { .. } => {
                DomainClass::Convex
            }
            Shape::Annulus { .. } => DomainClass::Annular,
            Shape::BallMinusBalls { holes, .. } if holes.is_empty() => DomainClass::Convex,
            Shape::BallMinusBalls { .. } => DomainClass::MultiHole,
        }
    }

    /// Axis-aligned box containing the closure of the domain.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let around = |c: &[f64], r: f64| {
            (
                c.iter().map(|x| x - r).collect::<Vec<_>>(),
                c.iter().map(|x| x + r).collect::<Vec<_>>(),
            )
        };
        match &self.shape {
            Shape::Ball(s) => around(&s.center, s.radius),
            Shape::Annulus { outer, .. } => around(&vec![0.0; n], *outer),
            Shape::Ellipsoid { semi_axes } => (
                semi_axes.iter().map(|a| -a).collect(),
                semi_axes.clone(),
            ),
            Shape::BallMinusBalls { outer, .. } => around(&outer.center, outer.radius),
            Shape::HalfSpaceCap { ball, .. } => around(&ball.center, ball.radius),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        match &self.shape {
            Shape::Ellipsoid { semi_axes } => 2.0 * semi_axes.iter().cloned().fold(0.0, f64::max),
            _ => lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| b - a)
                .fold(0.0, f64::max),
        }
    }

    /// Characteristic length used to scale geometric tolerances.
    fn scale(&self) -> f64 {
        0.5 * self.diameter()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.signed_distance(x)? > 0.0)
    }

    pub fn signed_distance(&self, x: &[f64]) -> Result<f64> {
        check_point(self.dim, x, "query point")?;
        match &self.shape {
            Shape::Ball(s) => Ok(s.radius - norm(&sub(x, &s.center))),
            Shape::Annulus { inner, outer } => {
                let r = norm(x);
                Ok((r - inner).min(outer - r))
            }
            Shape::BallMinusBalls { outer, holes } => Ok(ball_minus_balls_distance(x, outer, holes).0),
            Shape::Ellipsoid { .. } | Shape::HalfSpaceCap { .. } => {
                Ok(self.project(x)?.signed_distance)
            }
        }
    }

    /// Nearest boundary point of `x`, its interior normal and mean curvature,
    /// and the signed distance of `x`.
    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        check_point(self.dim, x, "query point")?;
        let n = self.dim;
        let nf = (n - 1) as f64;
        match &self.shape {
            Shape::Ball(s) => Ok(sphere_projection(x, s, true, nf)),
            Shape::Annulus { inner, outer } => {
                let r = norm(x);
                let origin = vec![0.0; n];
                if r - inner < outer - r {
                    Ok(sphere_projection(x, &Sphere::new(origin, *inner), false, nf))
                } else {
                    Ok(sphere_projection(x, &Sphere::new(origin, *outer), true, nf))
                }
            }
            Shape::BallMinusBalls { outer, holes } => {
                let (_, active) = ball_minus_balls_distance(x, outer, holes);
                Ok(match active {
                    None => sphere_projection(x, outer, true, nf),
                    Some(k) => sphere_projection(x, &holes[k], false, nf),
                })
            }
            Shape::Ellipsoid { semi_axes } => ellipsoid_projection(x, semi_axes),
            Shape::HalfSpaceCap {
                ball,
                normal,
                offset,
            } => cap_projection(x, ball, normal, *offset, self.smoothing_radius),
        }
    }

    /// Interior normal and mean curvature at a point on the boundary.
    pub fn mean_curvature(&self, p: &[f64]) -> Result<BoundaryPoint> {
        let proj = self.project(p)?;
        let tol = ON_BOUNDARY_TOL * self.scale().max(1.0);
        if proj.signed_distance.abs() > tol {
            return Err(Error::Precondition(format!(
                "point {p:?} is at distance {:e} from the boundary",
                proj.signed_distance
            )));
        }
        Ok(BoundaryPoint {
            position: p.to_vec(),
            ..proj.boundary
        })
    }
}

fn ball_minus_balls_distance(x: &[f64], outer: &Sphere, holes: &[Sphere]) -> (f64, Option<usize>) {
    let mut best = outer.radius - norm(&sub(x, &outer.center));
    let mut active = None;
    for (k, hole) in holes.iter().enumerate() {
        let d = norm(&sub(x, &hole.center)) - hole.radius;
        if d < best {
            best = d;
            active = Some(k);
        }
    }
    (best, active)
}

/// Projection onto a sphere. `bounds_inside` says whether the domain is the
/// inside of the sphere (outer boundary) or its outside (a hole).
fn sphere_projection(x: &[f64], s: &Sphere, bounds_inside: bool, nf: f64) -> Projection {
    let rel = sub(x, &s.center);
    let r = norm(&rel);
    let dir = if r > 0.0 {
        rel.iter().map(|c| c / r).collect::<Vec<_>>()
    } else {
        unit_e1(x.len())
    };
    let position: Vec<f64> = s
        .center
        .iter()
        .zip(&dir)
        .map(|(c, d)| c + s.radius * d)
        .collect();
    let (sd, normal, h) = if bounds_inside {
        (s.radius - r, dir.iter().map(|d| -d).collect(), nf / s.radius)
    } else {
        (r - s.radius, dir, -nf / s.radius)
    };
    Projection {
        signed_distance: sd,
        boundary: BoundaryPoint {
            position,
            interior_normal: normal,
            mean_curvature: h,
        },
    }
}

/// Nearest point on the ellipsoid `sum (x_i / a_i)^2 = 1`.
///
/// Works in the positive orthant. The nearest point is `p_i = a_i^2 y_i /
/// (a_i^2 + t)` where `t` is the root of `F(t) = sum (a_i y_i / (a_i^2 + t))^2 - 1`
/// on `(-a_m^2, inf)`, `a_m` the smallest axis carrying a nonzero coordinate;
/// when the smallest axis overall has a zero coordinate the root may sit at
/// `t = -a_j^2` instead.
fn ellipsoid_projection(x: &[f64], axes: &[f64]) -> Result<Projection> {
    let n = axes.len();
    let y: Vec<f64> = x.iter().map(|c| c.abs()).collect();
    let nz: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
    let a_m = nz.iter().map(|&i| axes[i]).fold(f64::INFINITY, f64::min);

    // smallest axis among the zero coordinates, if it is strictly the smallest
    let zero_axis = (0..n)
        .filter(|&i| y[i] == 0.0)
        .min_by(|&i, &j| axes[i].total_cmp(&axes[j]))
        .filter(|&j| axes[j] < a_m);

    let mut p = vec![0.0; n];
    let mut on_axis = false;
    if let Some(j) = zero_axis {
        let aj2 = axes[j] * axes[j];
        let s: f64 = nz
            .iter()
            .map(|&i| (axes[i] * y[i] / (axes[i] * axes[i] - aj2)).powi(2))
            .sum();
        if s < 1.0 {
            for &i in &nz {
                p[i] = axes[i] * axes[i] * y[i] / (axes[i] * axes[i] - aj2);
            }
            p[j] = axes[j] * (1.0 - s).sqrt();
            on_axis = true;
        }
    }
    if !on_axis {
        let t = ellipsoid_root(&y, axes, &nz, a_m)?;
        for &i in &nz {
            p[i] = axes[i] * axes[i] * y[i] / (axes[i] * axes[i] + t);
        }
    }
    // restore signs
    for i in 0..n {
        if x[i] < 0.0 {
            p[i] = -p[i];
        }
    }
    let level: f64 = x.iter().zip(axes).map(|(c, a)| (c / a).powi(2)).sum();
    let dist = norm(&sub(x, &p));
    let sd = if level < 1.0 { dist } else { -dist };

    // interior normal is -grad(phi)/|grad(phi)|, phi = sum x_i^2/a_i^2 - 1
    let grad: Vec<f64> = p.iter().zip(axes).map(|(c, a)| 2.0 * c / (a * a)).collect();
    let g = norm(&grad);
    let normal: Vec<f64> = grad.iter().map(|c| -c / g).collect();
    let lap: f64 = axes.iter().map(|a| 2.0 / (a * a)).sum();
    let ghg: f64 = grad
        .iter()
        .zip(axes)
        .map(|(gi, a)| gi * gi * 2.0 / (a * a))
        .sum();
    let h = (lap * g * g - ghg) / (g * g * g);
    Ok(Projection {
        signed_distance: sd,
        boundary: BoundaryPoint {
            position: p,
            interior_normal: normal,
            mean_curvature: h,
        },
    })
}

/// Safeguarded Newton for the decreasing convex secular function, seeded from
/// the radially scaled guess.
fn ellipsoid_root(y: &[f64], axes: &[f64], nz: &[usize], a_m: f64) -> Result<f64> {
    if nz.is_empty() {
        // center of a ball-like ellipsoid with every axis equal; any axis works
        return Ok(-a_m * a_m);
    }
    let am2 = a_m * a_m;
    let f = |t: f64| -> (f64, f64) {
        let mut val = -1.0;
        let mut der = 0.0;
        for &i in nz {
            let a2 = axes[i] * axes[i];
            let q = axes[i] * y[i] / (a2 + t);
            val += q * q;
            der -= 2.0 * q * q / (a2 + t);
        }
        (val, der)
    };
    let ym = nz
        .iter()
        .filter(|&&i| axes[i] == a_m)
        .map(|&i| y[i])
        .fold(0.0, f64::max);
    let mut lo = -am2 + a_m * ym;
    let mut hi = -am2 + nz.iter().map(|&i| (axes[i] * y[i]).powi(2)).sum::<f64>().sqrt();
    let level: f64 = nz.iter().map(|&i| (y[i] / axes[i]).powi(2)).sum();
    let mut t = (am2 * (level.sqrt() - 1.0)).clamp(lo, hi);
    let scale = am2.max(hi.abs());
    for _ in 0..PROJECTION_MAX_ITER {
        let (val, der) = f(t);
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if val.abs() <= 1e-15 || hi - lo <= PROJECTION_TOL * scale * 1e-3 {
            return Ok(t);
        }
        let newton = t - val / der;
        if (newton - t).abs() <= 1e-16 * scale {
            return Ok(newton);
        }
        t = if newton > lo && newton < hi && der < 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let (val, _) = f(t);
    if val.abs() <= 1e-12 {
        return Ok(t);
    }
    Err(Error::Projection {
        iterations: PROJECTION_MAX_ITER,
        last_iterate: t,
    })
}

/// Projection for the filleted cap. The body is the dilation by the fillet
/// radius `s` of the convex core `K = B(c, R - s) ∩ {z <= offset - s}`, and
/// everything reduces to the meridian half-plane `(rho, z)`.
fn cap_projection(x: &[f64], ball: &Sphere, nu: &[f64], offset: f64, s: f64) -> Result<Projection> {
    let n = x.len();
    let rel = sub(x, &ball.center);
    let z = dot(&rel, nu);
    let perp: Vec<f64> = rel.iter().zip(nu).map(|(r, v)| r - z * v).collect();
    let rho = norm(&perp);
    let rho_hat: Vec<f64> = if rho > 1e-300 {
        perp.iter().map(|c| c / rho).collect()
    } else {
        // any unit vector orthogonal to nu
        let k = (0..n)
            .min_by(|&i, &j| nu[i].abs().total_cmp(&nu[j].abs()))
            .unwrap_or(0);
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let ez = dot(&e, nu);
        let w: Vec<f64> = e.iter().zip(nu).map(|(a, b)| a - ez * b).collect();
        let l = norm(&w);
        w.iter().map(|c| c / l).collect()
    };

    let re = ball.radius - s;
    let oe = offset - s;
    let rho_e = (re * re - oe * oe).sqrt();
    let corner = (rho_e, oe);
    let len = rho.hypot(z);

    enum Feature {
        Sphere,
        Plane,
        Rim,
    }

    // nearest point q on K's boundary, outward normal m of K at q, signed depth
    let sphere_depth = re - len;
    let plane_depth = oe - z;
    let rim_tol = 1e-12 * ball.radius;
    let (q, m, depth, feature) = if sphere_depth.abs() <= rim_tol && plane_depth.abs() <= rim_tol {
        let m = (rho_e / re, oe / re);
        (corner, m, 0.0, Feature::Rim)
    } else if sphere_depth >= 0.0 && plane_depth >= 0.0 {
        if sphere_depth <= plane_depth {
            let dir = if len > 0.0 { (rho / len, z / len) } else { (0.0, 1.0) };
            let q = (re * dir.0, re * dir.1);
            // a point whose radial foot lands above the plane is closer to the plane
            (q, dir, sphere_depth, Feature::Sphere)
        } else {
            ((rho, oe), (0.0, 1.0), plane_depth, Feature::Plane)
        }
    } else {
        let mut best: Option<((f64, f64), f64, Feature)> = None;
        let mut consider = |q: (f64, f64), f: Feature| {
            let d = (rho - q.0).hypot(z - q.1);
            if best.as_ref().is_none_or(|b| d < b.1) {
                best = Some((q, d, f));
            }
        };
        if len > 0.0 {
            let q = (re * rho / len, re * z / len);
            if q.1 <= oe && len >= re {
                consider(q, Feature::Sphere);
            }
        }
        if rho <= rho_e && z >= oe {
            consider((rho, oe), Feature::Plane);
        }
        consider(corner, Feature::Rim);
        let (q, d, f) = best.expect("corner candidate always present");
        let m = if d > 0.0 {
            ((rho - q.0) / d, (z - q.1) / d)
        } else {
            match f {
                Feature::Plane => (0.0, 1.0),
                _ => (q.0 / re, q.1 / re),
            }
        };
        (q, m, -d, f)
    };

    // boundary point of the dilated body
    let p2 = (q.0 + s * m.0, q.1 + s * m.1);
    let nf = (n - 2) as f64;
    let h = match feature {
        Feature::Sphere => (n - 1) as f64 / ball.radius,
        Feature::Plane => 0.0,
        Feature::Rim => {
            if s == 0.0 {
                return Err(Error::NonSmooth { point: x.to_vec() });
            }
            let tangential = if p2.0 > 0.0 { m.0 / p2.0 } else { 1.0 / s };
            1.0 / s + nf * tangential
        }
    };
    let position: Vec<f64> = (0..n)
        .map(|i| ball.center[i] + p2.1 * nu[i] + p2.0 * rho_hat[i])
        .collect();
    let normal: Vec<f64> = (0..n).map(|i| -(m.1 * nu[i] + m.0 * rho_hat[i])).collect();
    Ok(Projection {
        signed_distance: s + depth,
        boundary: BoundaryPoint {
            position,
            interior_normal: normal,
            mean_curvature: h,
        },
    })
}
