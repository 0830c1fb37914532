//! The original u-problem with the infinite boundary value truncated to `M`:
//! `Δ_h u = (n(n−2)/4) u^{(n+2)/(n−2)}` on interior nodes, `u = M` on cut nodes.

use rayon::prelude::*;

use super::field::{GridField, NodeKind};
use super::krylov::{bicgstab, EllMatrix};
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Returns the field of `u`. Newton starts from the constant supersolution
/// `u = M`, so the iterates decrease towards the solution.
pub fn solve_u_truncated(domain: &Domain, h: f64, m_bound: f64, tol: f64) -> Result<GridField> {
    if !(m_bound > 0.0 && m_bound.is_finite()) {
        return Err(Error::Precondition(format!("boundary value M must be positive, got {m_bound}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let mut field = GridField::build(domain, h)?;
    field.check_connected()?;
    let n = field.n;
    let nf = n as f64;
    let c = nf * (nf - 2.0) / 4.0;
    let p = (nf + 2.0) / (nf - 2.0);
    let top = c * p * m_bound.powf(p);
    if !top.is_finite() || !(top * h * h).is_finite() {
        return Err(Error::Overflow(format!("M^{p} overflows for M = {m_bound:e}")));
    }

    let nodes = field.interior_indices();
    let m = nodes.len();
    let mut slot = vec![usize::MAX; field.len()];
    for (u, &i) in nodes.iter().enumerate() {
        slot[i] = u;
    }
    let w = 2 * n;
    // neighbour slot, or usize::MAX for a node held at M
    let mut nbr = vec![usize::MAX; m * w];
    for (u, &i) in nodes.iter().enumerate() {
        for a in 0..n {
            for (s, dir) in [-1, 1].into_iter().enumerate() {
                let j = field.neighbor(i, a, dir).expect("interior nodes have lattice neighbours");
                nbr[u * w + 2 * a + s] = slot[j];
            }
        }
    }
    let h2 = h * h;
    let residual = |u: &[f64]| -> (Vec<f64>, f64) {
        let out: Vec<(f64, f64)> = (0..m)
            .into_par_iter()
            .map(|k| {
                let mut sum = 0.0;
                let mut mag = 2.0 * nf * u[k].abs();
                for s in 0..w {
                    let j = nbr[k * w + s];
                    let x = if j == usize::MAX { m_bound } else { u[j] };
                    sum += x;
                    mag += x.abs();
                }
                let src = c * u[k].powf(p);
                let f = (sum - 2.0 * nf * u[k]) / h2 - src;
                (f, f.abs() / (mag / h2 + src))
            })
            .collect();
        let rel = out.iter().fold(0.0f64, |a, x| a.max(x.1));
        (out.into_iter().map(|x| x.0).collect(), rel)
    };

    let mut u = vec![m_bound; m];
    let (mut f, mut rel) = residual(&u);
    let mut history = vec![rel];
    let mut iterations = 0;
    while rel > tol {
        if iterations >= 200 {
            return Err(Error::Divergence {
                solver: "truncated u Newton",
                history,
            });
        }
        iterations += 1;
        let diag: Vec<f64> = u.iter().map(|&x| -2.0 * nf / h2 - c * p * x.powf(p - 1.0)).collect();
        let mut cols = vec![u32::MAX; m * w];
        for k in 0..m * w {
            if nbr[k] != usize::MAX {
                cols[k] = nbr[k] as u32;
            }
        }
        let jac = EllMatrix {
            rows: m,
            width: w,
            diag,
            cols,
            vals: vec![1.0 / h2; m * w],
        };
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let (du, _) = bicgstab(&jac, &rhs, 1e-12, 5000);
        let f_two = super::krylov::norm(&f);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + lambda * b).collect();
            if trial.iter().all(|&x| x > 0.0) {
                let (ft, relt) = residual(&trial);
                if super::krylov::norm(&ft) < (1.0 - 1e-4 * lambda) * f_two || relt <= tol {
                    accepted = Some((trial, ft, relt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((ut, ft, relt)) = accepted else {
            return Err(Error::Divergence {
                solver: "truncated u Newton",
                history,
            });
        };
        u = ut;
        f = ft;
        rel = relt;
        history.push(rel);
    }
    for i in 0..field.len() {
        field.values[i] = match field.mask[i] {
            NodeKind::Interior => u[slot[i]],
            NodeKind::Cut => m_bound,
            NodeKind::Exterior => 0.0,
        };
    }
    Ok(field)
}

/// `v = u^{−2/(n−2)}` node-wise (exterior nodes stay zero).
pub fn u_to_v(field: &GridField) -> GridField {
    let mut out = field.clone();
    let e = -2.0 / (field.n as f64 - 2.0);
    for i in 0..out.len() {
        if out.mask[i] != NodeKind::Exterior {
            out.values[i] = out.values[i].powf(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_in_m() {
        let d = Domain::unit_ball(3).unwrap();
        let h = 0.125;
        let fields: Vec<GridField> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&m| solve_u_truncated(&d, h, m, 1e-12).unwrap())
            .collect();
        for pair in fields.windows(2) {
            for i in pair[0].interior_indices() {
                assert!(pair[0].values[i] <= pair[1].values[i] * (1.0 + 1e-10));
                assert!(pair[0].values[i] > 0.0);
            }
        }
        let center = fields[0].index(&[fields[0].dims[0] / 2; 3]);
        let v: Vec<f64> = fields.iter().map(|f| u_to_v(f).values[center]).collect();
        assert!(v[0] > v[1] && v[1] > v[2]);
    }

    #[test]
    fn overflow_guard() {
        let d = Domain::unit_ball(3).unwrap();
        assert!(matches!(solve_u_truncated(&d, 0.25, 1e70, 1e-8), Err(Error::Overflow(_))));
    }
}
