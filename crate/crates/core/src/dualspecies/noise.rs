//! Projection-noise spectra of the transverse polarization.
//!
//! The transverse subsystem x = (P_Hx, P_Hy, P_Kx, P_Ky) obeys
//! dx = A x dt + dW with ⟨dW dWᵀ⟩ = diag(σ_H², σ_H², σ_K², σ_K²) dt and
//! σ_q² = 2Γ_q/(n_q V), so an isolated species has variance 1/(n_q V) per component.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix4};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{derive_rates, DualSpeciesParams, Rates};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Single-sided PSD of P_Kx (1/(rad/s)), split by noise source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePsd {
    pub omega: f64,
    pub total: f64,
    pub hydrogen: f64,
    pub potassium: f64,
}

/// (σ_H², σ_K²); a species with zero density contributes no noise.
pub fn noise_intensities(params: &DualSpeciesParams, r: &Rates) -> (f64, f64) {
    let s = |gamma: f64, n: f64| if n > 0.0 { 2.0 * gamma / (n * params.volume) } else { 0.0 };
    (s(r.gamma_h, params.n_h), s(r.gamma_k, params.n_k))
}

/// Transverse drift at B_⊥ = 0.
pub fn transverse_drift(r: &Rates) -> Matrix4<f64> {
    Matrix4::new(
        -r.gamma_h, -r.omega_h, r.gamma_hk, 0.0,
        r.omega_h, -r.gamma_h, 0.0, r.gamma_hk,
        r.gamma_kh, 0.0, -r.gamma_k, -r.omega_k,
        0.0, r.gamma_kh, r.omega_k, -r.gamma_k,
    )
}

pub(crate) fn psd_at(a: &Matrix4<f64>, s_h: f64, s_k: f64, omega: f64) -> Result<NoisePsd> {
    let m = Matrix4::<C64>::from_fn(|i, j| {
        let d = if i == j { C64::new(0.0, omega) } else { C64::new(0.0, 0.0) };
        d - a[(i, j)]
    });
    let g = m.try_inverse().ok_or_else(|| Error::Numerical(format!("iω − A singular at ω = {omega}")))?;
    // Row of G for P_Kx.
    let row = |j: usize| g[(2, j)].norm_sqr();
    let hydrogen = 2.0 * s_h * (row(0) + row(1));
    let potassium = 2.0 * s_k * (row(2) + row(3));
    Ok(NoisePsd { omega, total: hydrogen + potassium, hydrogen, potassium })
}

/// S(ω) = 2 [G Q G†]_{Kx,Kx} with G = (iω − A)⁻¹, linearized about the
/// undriven state (`b_perp` is ignored).
pub fn noise_psd(params: &DualSpeciesParams, omega_grid: &[f64]) -> Result<Vec<NoisePsd>> {
    let r = derive_rates(params)?;
    let a = transverse_drift(&r);
    let (s_h, s_k) = noise_intensities(params, &r);
    omega_grid.iter().map(|&w| psd_at(&a, s_h, s_k, w)).collect()
}

/// Stationary covariance Σ of the transverse subsystem: A Σ + Σ Aᵀ + Q = 0.
pub fn transverse_covariance(params: &DualSpeciesParams) -> Result<Matrix4<f64>> {
    let r = derive_rates(params)?;
    let a = transverse_drift(&r);
    let (s_h, s_k) = noise_intensities(params, &r);
    let a_dyn = DMatrix::from_column_slice(4, 4, a.as_slice());
    let id = DMatrix::<f64>::identity(4, 4);
    let lhs = id.kronecker(&a_dyn) + a_dyn.kronecker(&id);
    let q = Matrix4::from_diagonal(&nalgebra::Vector4::new(s_h, s_h, s_k, s_k));
    let rhs = DVector::from_iterator(16, q.iter().map(|v| -v));
    let sol = lhs.lu().solve(&rhs).ok_or_else(|| Error::Unstable("transverse drift is singular".into()))?;
    Ok(Matrix4::from_column_slice(sol.as_slice()))
}

/// Welch estimate with Hann windows and 50 % overlap. Returns angular
/// frequencies and the single-sided PSD normalized so Σ S Δω/2π is the mean square.
pub fn periodogram(x: &[f64], dt: f64, segment_len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if segment_len < 4 || segment_len > x.len() {
        return Err(Error::InvalidParameter(format!(
            "segment length {segment_len} must be in [4, {}]",
            x.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let n = segment_len;
    let w: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos()).collect();
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let step = n / 2;
    let mut segments = 0usize;
    let mut start = 0;
    while start + n <= x.len() {
        for k in 0..n {
            buf[k] = C64::new(w[k] * x[start + k], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let omega = (0..=half).map(|k| std::f64::consts::TAU * k as f64 / (n as f64 * dt)).collect();
    let s = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
            one_sided * dt * a / (w2 * segments as f64)
        })
        .collect();
    Ok((omega, s))
}
