//! Least-squares fit of a complex series to c·exp((iω − Γ)t).

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    /// Amplitude at the first sample time.
    pub amplitude: C64,
    pub gamma: f64,
    pub omega: f64,
    /// ‖z − model‖ / ‖z‖
    pub residual: f64,
}

fn model(c: C64, gamma: f64, omega: f64, t: f64) -> C64 {
    c * C64::new(-gamma * t, omega * t).exp()
}

fn sse(t: &[f64], z: &[C64], c: C64, gamma: f64, omega: f64) -> f64 {
    t.iter().zip(z).map(|(&tk, &zk)| (zk - model(c, gamma, omega, tk)).norm_sqr()).sum()
}

/// Linear regressions of log|z| and unwrapped arg z against t.
fn initial_guess(t: &[f64], z: &[C64]) -> (C64, f64, f64) {
    let n = t.len() as f64;
    let mut phase = Vec::with_capacity(t.len());
    let mut prev = z[0].arg();
    let mut offset = 0.0;
    for zk in z {
        let a = zk.arg();
        let mut d = a - prev;
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
            offset -= std::f64::consts::TAU;
        }
        while d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
            offset += std::f64::consts::TAU;
        }
        prev = a;
        phase.push(a + offset);
    }
    let logamp: Vec<f64> = z.iter().map(|zk| zk.norm().max(f64::MIN_POSITIVE).ln()).collect();
    let tm = t.iter().sum::<f64>() / n;
    let var: f64 = t.iter().map(|tk| (tk - tm).powi(2)).sum();
    let slope = |y: &[f64]| {
        let ym = y.iter().sum::<f64>() / n;
        let cov: f64 = t.iter().zip(y).map(|(tk, yk)| (tk - tm) * (yk - ym)).sum();
        let s = if var > 0.0 { cov / var } else { 0.0 };
        (s, ym - s * tm)
    };
    let (w, p0) = slope(&phase);
    let (g, a0) = slope(&logamp);
    (C64::from_polar(a0.exp(), p0), -g, w)
}

/// Fits `z(t) ≈ c·exp((iω − Γ)(t − t₀))`, t₀ = first sample.
///
/// Starts from log-amplitude and unwrapped-phase regressions, then refines all
/// four real parameters with damped Gauss–Newton.
pub fn fit_complex_exponential(t: &[f64], z: &[C64]) -> Result<ExpFit> {
    if t.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), got: z.len() });
    }
    if t.len() < 4 {
        return Err(Error::InvalidParameter("need at least 4 samples to fit".into()));
    }
    let t0 = t[0];
    let ts: Vec<f64> = t.iter().map(|tk| tk - t0).collect();
    let norm2: f64 = z.iter().map(|zk| zk.norm_sqr()).sum();
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::VanishingCoherence(norm2.sqrt()));
    }
    let span = ts.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let (mut c, mut gamma, mut omega) = initial_guess(&ts, z);
    let mut cost = sse(&ts, z, c, gamma, omega);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        // parameters: Re c, Im c, Γ·span, ω·span
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&tk, &zk) in ts.iter().zip(z) {
            let e = C64::new(-gamma * tk, omega * tk).exp();
            let m = c * e;
            let r = zk - m;
            let cols = [e, C64::new(0.0, 1.0) * e, -m * (tk / span), C64::new(0.0, 1.0) * m * (tk / span)];
            for a in 0..4 {
                jtr[a] += cols[a].re * r.re + cols[a].im * r.im;
                for b in 0..4 {
                    jtj[(a, b)] += cols[a].re * cols[b].re + cols[a].im * cols[b].im;
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for a in 0..4 {
                damped[(a, a)] *= 1.0 + lambda;
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let cn = c + C64::new(step[0], step[1]);
            let (gn, wn) = (gamma + step[2] / span, omega + step[3] / span);
            let new_cost = sse(&ts, z, cn, gn, wn);
            if new_cost.is_finite() && new_cost <= cost {
                let rel = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                c = cn;
                gamma = gn;
                omega = wn;
                cost = new_cost;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(ExpFit { amplitude: c, gamma, omega, residual: (cost / norm2).sqrt() })
}
