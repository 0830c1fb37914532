//! Adaptive Dormand–Prince 5(4) integrator for small first-order systems.

pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

pub enum Outcome {
    /// Reached the end point; final state.
    Completed(Vec<f64>),
    /// `stop` returned true.
    Stopped,
    /// Step size collapsed or the step budget ran out.
    Failed,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`.
pub fn integrate<F, S>(f: F, t0: f64, y0: &[f64], t1: f64, tol: &Tolerances, stop: S) -> Outcome
where
    F: Fn(f64, &[f64], &mut [f64]),
    S: Fn(f64, &[f64]) -> bool,
{
    let m = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = (t1 - t0) * 1e-3;
    let mut k = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    f(t, &y, &mut k[0]);
    for _ in 0..tol.max_steps {
        if t >= t1 {
            return Outcome::Completed(y);
        }
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..m {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            let (_, tail) = k.split_at_mut(s);
            f(t + C[s] * h, &tmp, &mut tail[0]);
        }
        let mut err: f64 = 0.0;
        let mut y_new = vec![0.0; m];
        for i in 0..m {
            let hi5: f64 = (0..7).map(|j| B5[j] * k[j][i]).sum();
            let hi4: f64 = (0..7).map(|j| B4[j] * k[j][i]).sum();
            y_new[i] = y[i] + h * hi5;
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((h * (hi5 - hi4)).abs() / sc);
        }
        if !err.is_finite() {
            h *= 0.2;
            if h.abs() < 1e-15 * t1.abs().max(1.0) {
                return Outcome::Failed;
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            // FSAL: the last stage is f at the new point
            k.swap(0, 6);
            if stop(t, &y) {
                return Outcome::Stopped;
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() < 1e-15 * t1.abs().max(1.0) {
            return Outcome::Failed;
        }
    }
    Outcome::Failed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let tol = Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 100_000,
        };
        let out = integrate(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 2.0, &tol, |_, _| false);
        match out {
            Outcome::Completed(y) => assert!((y[0] - 2f64.exp()).abs() < 1e-10),
            _ => panic!("integration failed"),
        }
    }

    #[test]
    fn blow_up_is_caught_by_stop() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 100_000,
        };
        let at = std::cell::Cell::new(0.0);
        let out = integrate(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &[1.0], 2.0, &tol, |t, y| {
            at.set(t);
            y[0] > 1e6
        });
        assert!(matches!(out, Outcome::Stopped), "expected the stop condition to fire");
        assert!((at.get() - 1.0).abs() < 1e-5);
    }
}
