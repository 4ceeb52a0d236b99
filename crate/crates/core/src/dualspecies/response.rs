//! Driven response of the transverse potassium polarization.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ode::{dopri5, OdeOptions};
use super::{bloch_rhs, derive_rates, DualSpeciesParams, Rates};
use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMethod {
    /// Time-domain periodic steady state, demodulated.
    OdeLockin,
    /// Closed-form rotating-wave expression.
    Analytic,
    /// Stationary point of the full nonlinear rotating-frame equations.
    RotatingFrame,
}

/// Complex amplitude of P_K+ at e^{+iωt}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub omega: f64,
    pub amplitude: C64,
    pub method: ResponseMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockinOptions {
    pub ode: OdeOptions,
    /// Relative cycle-to-cycle change of the demodulated amplitude.
    pub tol: f64,
    pub max_cycles: usize,
}

impl Default for LockinOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions { rtol: 1e-11, atol: 1e-15, ..OdeOptions::default() },
            tol: 1e-6,
            max_cycles: 200,
        }
    }
}

/// ⟨P_K+(ω)⟩ = iγ_K B_⊥ P_Kz / (Γ_H [1 − (Γ_K − i(ω_K − ω))(Γ_H − i(ω_H − ω)) / (Γ_KH Γ_HK)])
pub fn analytic_response(params: &DualSpeciesParams, omega: f64) -> Result<ResponsePoint> {
    let r = derive_rates(params)?;
    let a = C64::new(r.gamma_k, -(r.omega_k - omega)) / r.gamma_kh;
    let b = C64::new(r.gamma_h, -(r.omega_h - omega)) / r.gamma_hk;
    let num = C64::new(0.0, params.gamma_k() * params.b_perp * r.p_kz);
    Ok(ResponsePoint { omega, amplitude: num / (r.gamma_h * (1.0 - a * b)), method: ResponseMethod::Analytic })
}

/// Stationary (P_H, P_K) in the frame rotating at `omega` about ẑ, keeping
/// the co-rotating half of the drive. Not linearized in B_⊥.
pub fn rotating_frame_stationary(
    params: &DualSpeciesParams,
    r: &Rates,
    b_z: f64,
    omega: f64,
) -> Result<Vector6<f64>> {
    let mut m = Matrix6::zeros();
    for (off, g, gamma) in [(0, params.gamma_h(), r.gamma_h), (3, params.gamma_k(), r.gamma_k)] {
        let w = [g * params.b_perp / 2.0, 0.0, g * b_z - omega];
        let blk = nalgebra::Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
            - nalgebra::Matrix3::identity() * gamma;
        m.fixed_view_mut::<3, 3>(off, off).copy_from(&blk);
    }
    for i in 0..3 {
        m[(i, 3 + i)] = r.gamma_hk;
        m[(3 + i, i)] = r.gamma_kh;
    }
    let mut b = Vector6::zeros();
    b[5] = -r.gamma_p;
    m.lu()
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("singular rotating-frame system".into()))
}

/// Rotating-frame stationary amplitude x_K + i y_K for every ω.
pub fn rotating_frame_response(params: &DualSpeciesParams, omega_grid: &[f64]) -> Result<Vec<ResponsePoint>> {
    let r = derive_rates(params)?;
    omega_grid
        .iter()
        .map(|&omega| {
            let x = rotating_frame_stationary(params, &r, params.b_z, omega)?;
            Ok(ResponsePoint { omega, amplitude: C64::new(x[3], x[4]), method: ResponseMethod::RotatingFrame })
        })
        .collect()
}

struct Cycle<'a> {
    params: &'a DualSpeciesParams,
    r: &'a Rates,
    omega: f64,
    period: f64,
    opts: &'a OdeOptions,
}

impl Cycle<'_> {
    /// One drive period from `p0` at t = 0. Returns P(T) and (1/T)∫ P_K+ e^{−iωt} dt.
    fn run(&self, p0: &[f64], pump: f64) -> Result<(Vector6<f64>, C64)> {
        let (gh, gk) = (self.params.gamma_h(), self.params.gamma_k());
        let (b_z, b_perp, omega) = (self.params.b_z, self.params.b_perp, self.omega);
        let r = self.r;
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            bloch_rhs(r, gh, gk, b_z, b_perp, omega, pump, t, &y[..6], &mut dy[..6]);
            let z = C64::new(y[3], y[4]) * C64::from_polar(1.0, -omega * t);
            dy[6] = z.re;
            dy[7] = z.im;
        };
        let mut y0 = [0.0; 8];
        y0[..6].copy_from_slice(p0);
        let out = dopri5(rhs, 0.0, &y0, &[self.period], self.opts)?;
        let y = &out[0];
        Ok((Vector6::from_column_slice(&y[..6]), C64::new(y[6], y[7]) / self.period))
    }
}

/// Demodulated amplitude at one drive frequency.
///
/// The one-period map P ↦ M P + c is affine; its fixed point (I − M)⁻¹ c is the
/// periodic steady state. Further cycles are integrated from there until the
/// demodulated amplitude changes by less than `opts.tol` relative.
pub fn lockin_point(params: &DualSpeciesParams, r: &Rates, omega: f64, opts: &LockinOptions) -> Result<C64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("drive frequency must be > 0, got {omega}")));
    }
    let cyc = Cycle { params, r, omega, period: TAU / omega, opts: &opts.ode };
    let (c, _) = cyc.run(&[0.0; 6], 1.0)?;
    let mut m = DMatrix::<f64>::zeros(6, 6);
    for j in 0..6 {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        let (col, _) = cyc.run(&e, 0.0)?;
        m.set_column(j, &col);
    }
    let lhs = DMatrix::<f64>::identity(6, 6) - &m;
    let lu = lhs.lu();
    let mut p = lu
        .solve(&DVector::from_column_slice(c.as_slice()))
        .ok_or_else(|| Error::Numerical(format!("singular monodromy at ω = {omega}")))?;
    let (mut p_next, mut amp) = cyc.run(p.as_slice(), 1.0)?;
    // One residual correction absorbs the conditioning of I − M near resonance.
    if let Some(dp) = lu.solve(&DVector::from_column_slice((p_next - Vector6::from_column_slice(p.as_slice())).as_slice())) {
        p += dp;
        (p_next, amp) = cyc.run(p.as_slice(), 1.0)?;
    }
    for _ in 0..opts.max_cycles {
        let (p2, amp2) = cyc.run(p_next.as_slice(), 1.0)?;
        if !(amp2.re.is_finite() && amp2.im.is_finite()) {
            return Err(Error::NonFinite(omega));
        }
        if (amp2 - amp).norm() <= opts.tol * amp2.norm() {
            return Ok(amp2);
        }
        p_next = p2;
        amp = amp2;
    }
    Err(Error::NotConverged(format!(
        "lock-in at ω = {omega} rad/s not periodic after {} cycles",
        opts.max_cycles
    )))
}

/// Time-domain lock-in spectrum over `omega_grid`, evaluated in parallel.
pub fn lockin_response(
    params: &DualSpeciesParams,
    omega_grid: &[f64],
    opts: &LockinOptions,
) -> Result<Vec<ResponsePoint>> {
    let r = derive_rates(params)?;
    if params.gamma_h() * params.b_perp > 2.0 * r.gamma_h {
        log::warn!(
            "drive γ_H B_⊥ = {:.3e} rad/s exceeds 2Γ_H = {:.3e}; response is nonlinear",
            params.gamma_h() * params.b_perp,
            2.0 * r.gamma_h
        );
    }
    omega_grid
        .par_iter()
        .map(|&omega| {
            Ok(ResponsePoint { omega, amplitude: lockin_point(params, &r, omega, opts)?, method: ResponseMethod::OdeLockin })
        })
        .collect()
}
