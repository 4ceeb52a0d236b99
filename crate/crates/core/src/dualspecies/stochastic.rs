//! Time-domain integration of the coupled Bloch equations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::noise::noise_intensities;
use super::ode::{dopri5, OdeOptions};
use super::{bloch_rhs, derive_rates, DualSpeciesParams, PolarizationState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Off,
    Seeded(u64),
}

/// Integrates from `state0` at `t_grid[0]` and returns the state at every
/// grid time.
///
/// Without noise an adaptive Dormand–Prince 5(4) at rtol 1e-9 is used. With
/// noise the drift is advanced by fixed RK4 steps of at most 1/(200·fastest
/// rate) and each step is bracketed by two half-variance Gaussian kicks.
pub fn integrate(
    params: &DualSpeciesParams,
    state0: &PolarizationState,
    t_grid: &[f64],
    noise: NoiseMode,
) -> Result<Vec<PolarizationState>> {
    let r = derive_rates(params)?;
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("t_grid must be finite and strictly ascending".into()));
    }
    let (nh, nk) = state0.norms();
    if nh > 1.0 + 1e-9 || nk > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter(format!("initial polarization norms ({nh}, {nk}) exceed 1")));
    }
    let (gh, gk) = (params.gamma_h(), params.gamma_k());
    let (b_z, b_perp, omega) = (params.b_z, params.b_perp, params.omega_drive);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| bloch_rhs(&r, gh, gk, b_z, b_perp, omega, 1.0, t, y, dy);
    let y0 = state0.to_array();

    let seed = match noise {
        NoiseMode::Off => {
            let opts = OdeOptions::default();
            let out = dopri5(rhs, t_grid[0], &y0, t_grid, &opts)?;
            let states: Vec<PolarizationState> = out.iter().map(|y| PolarizationState::from_slice(y)).collect();
            for (s, t) in states.iter().zip(t_grid) {
                let (a, b) = s.norms();
                if a > 1.0 + 1e-9 || b > 1.0 + 1e-9 {
                    return Err(Error::Numerical(format!("|P| exceeded 1 at t = {t}")));
                }
            }
            return Ok(states);
        }
        NoiseMode::Seeded(seed) => seed,
    };

    let max_rate = [
        r.gamma_h, r.gamma_k, r.gamma_hk, r.gamma_kh, r.omega_h.abs(), r.omega_k.abs(),
        omega.abs(), gh * b_perp.abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    let h_max = if max_rate > 0.0 { 1.0 / (200.0 * max_rate) } else { f64::INFINITY };
    let (s_h, s_k) = noise_intensities(params, &r);
    let sd = [s_h.sqrt(), s_h.sqrt(), s_h.sqrt(), s_k.sqrt(), s_k.sqrt(), s_k.sqrt()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut y = y0;
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(PolarizationState::from_slice(&y));
    let mut k = [[0.0; 6]; 4];
    let mut tmp = [0.0; 6];
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let n = (span / h_max).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let kick = (h / 2.0).sqrt();
        for step in 0..n {
            let t = w[0] + step as f64 * h;
            for (yi, s) in y.iter_mut().zip(&sd) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *yi += s * kick * z;
            }
            rhs(t, &y, &mut k[0]);
            for i in 0..6 {
                tmp[i] = y[i] + 0.5 * h * k[0][i];
            }
            rhs(t + 0.5 * h, &tmp, &mut k[1]);
            for i in 0..6 {
                tmp[i] = y[i] + 0.5 * h * k[1][i];
            }
            rhs(t + 0.5 * h, &tmp, &mut k[2]);
            for i in 0..6 {
                tmp[i] = y[i] + h * k[2][i];
            }
            rhs(t + h, &tmp, &mut k[3]);
            for i in 0..6 {
                y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            for (yi, s) in y.iter_mut().zip(&sd) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *yi += s * kick * z;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(w[1]));
        }
        out.push(PolarizationState::from_slice(&y));
    }
    Ok(out)
}
