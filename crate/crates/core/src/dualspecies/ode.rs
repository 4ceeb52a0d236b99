//! Adaptive Dormand–Prince 5(4) integrator for small dense systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; 0 picks one from the first derivative.
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, h_init: 0.0, max_steps: 10_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `t0` and returns the state at each time
/// of `t_out` (ascending, all ≥ `t0`).
pub fn dopri5<F>(mut f: F, t0: f64, y0: &[f64], t_out: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    if t_out.first().is_some_and(|&t| t < t0) || t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("output times must ascend from t0".into()));
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut y_stage = vec![0.0; n];
    let mut t = t0;
    f(t, &y, &mut k[0]);
    let mut h = if opts.h_init > 0.0 {
        opts.h_init
    } else {
        let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dnorm = k[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let span = t_out.last().map_or(1.0, |&te| (te - t0).max(f64::MIN_POSITIVE));
        if dnorm > 0.0 {
            (0.01 * (ynorm + opts.atol / opts.rtol) / dnorm).min(span)
        } else {
            span
        }
    };
    let mut out = Vec::with_capacity(t_out.len());
    let mut steps = 0usize;
    for &target in t_out {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::NotConverged(format!("more than {} integrator steps", opts.max_steps)));
            }
            let h_min = 1e-14 * t.abs().max(target.abs()).max(f64::MIN_POSITIVE);
            if h < h_min {
                return Err(Error::StepUnderflow { t, h });
            }
            let clamped = t + h >= target;
            let h_try = if clamped { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += h_try * a * k[j][i];
                    }
                    y_stage[i] = acc;
                }
                f(t + C[s] * h_try, &y_stage, &mut k[s]);
            }
            // stage 7 is evaluated at the fifth-order solution (FSAL)
            y_new.copy_from_slice(&y_stage);
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += (B5[s] - B4[s]) * k[s][i];
                }
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (h_try * e / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(t));
            }
            steps += 1;
            if err <= 1.0 {
                t = if clamped { target } else { t + h_try };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !clamped || h_try * grow > h {
                    h = h_try * grow;
                }
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
