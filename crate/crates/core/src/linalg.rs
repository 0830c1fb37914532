//! Small dense helpers: symmetric eigenvalues and vector arithmetic.
//!
//! Matrices are row-major `n * n` slices.

use std::f64::consts::PI;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
///
/// Uses the trigonometric closed form for 3x3 and cyclic Jacobi otherwise.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    let mut ev = match n {
        1 => vec![a[0]],
        2 => sym2_eigenvalues(a),
        3 => {
            let ev = sym3_eigenvalues(a);
            // the trigonometric form loses half the digits near a double root
            let spread = ev.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let close = (0..3).any(|i| {
                (0..i).any(|j| (ev[i] - ev[j]).abs() <= 1e-4 * spread && ev[i] != ev[j])
            });
            if close {
                jacobi_eigenvalues(a, 3)
            } else {
                ev
            }
        }
        _ => jacobi_eigenvalues(a, n),
    };
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

fn sym2_eigenvalues(a: &[f64]) -> Vec<f64> {
    let m = 0.5 * (a[0] + a[3]);
    let d = 0.5 * (a[0] - a[3]);
    let r = d.hypot(a[1]);
    vec![m - r, m + r]
}

/// Closed-form eigenvalues of a symmetric 3x3 matrix (Smith's trigonometric
/// method). Deterministic ordering: descending before the caller sorts.
pub fn sym3_eigenvalues(a: &[f64]) -> Vec<f64> {
    let (a00, a01, a02) = (a[0], a[1], a[2]);
    let (a11, a12, a22) = (a[4], a[5], a[8]);
    let p1 = a01 * a01 + a02 * a02 + a12 * a12;
    let q = (a00 + a11 + a22) / 3.0;
    let p2 = (a00 - q).powi(2) + (a11 - q).powi(2) + (a22 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p <= f64::EPSILON * q.abs().max(f64::MIN_POSITIVE) {
        return vec![q, q, q];
    }
    let b00 = (a00 - q) / p;
    let b11 = (a11 - q) / p;
    let b22 = (a22 - q) / p;
    let b01 = a01 / p;
    let b02 = a02 / p;
    let b12 = a12 / p;
    let det = b00 * (b11 * b22 - b12 * b12) - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02);
    let r = (0.5 * det).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    vec![e1, e2, e3]
}

/// Cyclic Jacobi rotations until the off-diagonal mass is at rounding level.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotate3(diag: [f64; 3], angle: f64) -> Vec<f64> {
        // R diag R^T with R a rotation about (1,1,1)/sqrt(3)
        let k = [1.0 / 3f64.sqrt(); 3];
        let (c, s) = (angle.cos(), angle.sin());
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let cross = match (i, j) {
                    (0, 1) => -k[2],
                    (0, 2) => k[1],
                    (1, 0) => k[2],
                    (1, 2) => -k[0],
                    (2, 0) => -k[1],
                    (2, 1) => k[0],
                    _ => 0.0,
                };
                r[i][j] = c * delta + s * cross + (1.0 - c) * k[i] * k[j];
            }
        }
        let mut out = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[i * 3 + j] = (0..3).map(|l| r[i][l] * diag[l] * r[j][l]).sum();
            }
        }
        out
    }

    #[test]
    fn closed_form_matches_jacobi() {
        for (diag, ang) in [([-3.0, 1.0, 2.5], 0.3), ([1.0, 1.0, -2.0], 1.1), ([0.0, 0.0, 0.0], 0.2)] {
            let m = rotate3(diag, ang);
            let a = sym_eigenvalues(&m, 3);
            let mut b = jacobi_eigenvalues(&m, 3);
            b.sort_by(|x, y| x.total_cmp(y));
            let mut d = diag.to_vec();
            d.sort_by(|x, y| x.total_cmp(y));
            for k in 0..3 {
                assert!((a[k] - d[k]).abs() < 1e-12, "{a:?} vs {d:?}");
                assert!((b[k] - d[k]).abs() < 1e-12, "{b:?} vs {d:?}");
            }
        }
    }

    #[test]
    fn multiple_of_identity() {
        let m = [-2.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, -2.0];
        assert_eq!(sym_eigenvalues(&m, 3), vec![-2.0, -2.0, -2.0]);
    }

    #[test]
    fn jacobi_four_by_four() {
        // tridiagonal 2,-1 Toeplitz: eigenvalues 2 - 2 cos(k pi / 5)
        let n = 4;
        let mut m = vec![0.0; 16];
        for i in 0..n {
            m[i * n + i] = 2.0;
            if i + 1 < n {
                m[i * n + i + 1] = -1.0;
                m[(i + 1) * n + i] = -1.0;
            }
        }
        let ev = sym_eigenvalues(&m, n);
        for (k, e) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * PI / 5.0).cos();
            assert!((e - exact).abs() < 1e-13);
        }
    }
}
