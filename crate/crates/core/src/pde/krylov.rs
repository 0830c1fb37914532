//! Jacobi-preconditioned BiCGSTAB with reproducible reductions.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Dot product whose rounding does not depend on the thread count: fixed-size
/// chunks are summed independently and the partial sums added in order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse operator with a diagonal and up to `width` off-diagonal entries per
/// row; a column index `>= rows` marks an absent entry.
pub struct EllMatrix {
    pub rows: usize,
    pub width: usize,
    pub diag: Vec<f64>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl EllMatrix {
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width;
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * CHUNK;
            for (k, yi) in out.iter_mut().enumerate() {
                let i = base + k;
                let mut s = self.diag[i] * x[i];
                for j in 0..w {
                    let col = self.cols[i * w + j] as usize;
                    if col < self.rows {
                        s += self.vals[i * w + j] * x[col];
                    }
                }
                *yi = s;
            }
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` to `‖b − A x‖ ≤ rtol ‖b‖`, starting from `x = 0`.
pub fn bicgstab(a: &EllMatrix, b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, KrylovOutcome) {
    let m = a.rows;
    let inv_diag: Vec<f64> = a.diag.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |src: &[f64], dst: &mut [f64]| {
        dst.par_iter_mut()
            .zip(src.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(d, (s, w))| *d = s * w)
    };
    let b_norm = norm(b);
    let mut x = vec![0.0; m];
    if b_norm == 0.0 {
        return (
            x,
            KrylovOutcome {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut p = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut t = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; m];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut best = (x.clone(), 1.0);
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(pi, (ri, vi))| *pi = ri + beta * (*pi - omega * vi));
        precond(&p, &mut y);
        a.apply(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        s.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(si, (ri, vi))| *si = ri - alpha * vi);
        let s_rel = norm(&s) / b_norm;
        if s_rel <= rtol {
            x.par_iter_mut().zip(y.par_iter()).for_each(|(xi, yi)| *xi += alpha * yi);
            return (
                x,
                KrylovOutcome {
                    iterations: it,
                    relative_residual: s_rel,
                    converged: true,
                },
            );
        }
        precond(&s, &mut z);
        a.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.par_iter_mut()
            .zip(y.par_iter().zip(z.par_iter()))
            .for_each(|(xi, (yi, zi))| *xi += alpha * yi + omega * zi);
        r.par_iter_mut()
            .zip(s.par_iter().zip(t.par_iter()))
            .for_each(|(ri, (si, ti))| *ri = si - omega * ti);
        let rel = norm(&r) / b_norm;
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        if rel <= rtol {
            return (
                x,
                KrylovOutcome {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                },
            );
        }
        if !rel.is_finite() {
            break;
        }
    }
    let (x, rel) = best;
    (
        x,
        KrylovOutcome {
            iterations: max_iter,
            relative_residual: rel,
            converged: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convection_diffusion(m: usize) -> EllMatrix {
        // 1D -u'' + 0.3 u' on a uniform grid: nonsymmetric tridiagonal
        let mut cols = vec![u32::MAX; 2 * m];
        let mut vals = vec![0.0; 2 * m];
        for i in 0..m {
            if i > 0 {
                cols[2 * i] = (i - 1) as u32;
                vals[2 * i] = -1.0 - 0.15;
            }
            if i + 1 < m {
                cols[2 * i + 1] = (i + 1) as u32;
                vals[2 * i + 1] = -1.0 + 0.15;
            }
        }
        EllMatrix {
            rows: m,
            width: 2,
            diag: vec![2.0; m],
            cols,
            vals,
        }
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let a = convection_diffusion(200);
        let x_true: Vec<f64> = (0..200).map(|i| (i as f64 * 0.05).sin()).collect();
        let mut b = vec![0.0; 200];
        a.apply(&x_true, &mut b);
        let (x, out) = bicgstab(&a, &b, 1e-12, 2000);
        assert!(out.converged);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn dot_is_reproducible() {
        let a: Vec<f64> = (0..100_000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let d1 = dot(&a, &a);
        let d2 = dot(&a, &a);
        assert_eq!(d1.to_bits(), d2.to_bits());
    }
}
