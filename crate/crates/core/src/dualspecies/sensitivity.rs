//! Projection-noise-limited field sensitivity of the phase readout.

use serde::{Deserialize, Serialize};

use super::noise::{noise_intensities, psd_at, transverse_drift};
use super::response::rotating_frame_stationary;
use super::{derive_rates, spectral_abscissa, DualSpeciesParams, Rates};
use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    /// δB·√V in T·√(cm³/Hz).
    pub delta_b: f64,
    /// Same in aT·√(cm³/Hz).
    pub delta_b_at: f64,
    /// |dχ/dB_z|, rad/T.
    pub slope: f64,
    /// Phase-noise ASD, rad/√Hz.
    pub noise_asd: f64,
    /// Rotating-frame P_K+ at the operating point.
    pub amplitude: C64,
    /// Single-sided PSD of P_Kx at the drive frequency and its split by source.
    pub psd: f64,
    pub psd_hydrogen: f64,
    pub psd_potassium: f64,
    /// δB√V (aT·√(cm³/Hz)) from each noise source alone; they add in quadrature.
    pub delta_b_hydrogen_at: f64,
    pub delta_b_potassium_at: f64,
    pub rates: Rates,
}

fn phase_at(params: &DualSpeciesParams, r: &Rates, b_z: f64) -> Result<C64> {
    let x = rotating_frame_stationary(params, r, b_z, params.omega_drive)?;
    Ok(C64::new(x[3], x[4]))
}

/// Sensitivity of χ = arg⟨P_K+⟩ read out at the fixed drive frequency.
///
/// The signal is the stationary rotating-frame response (nonlinear in B_⊥);
/// the noise is the linear transverse PSD of P_Kx at ω_drive, turned into a
/// phase ASD √(2S)/|P_K+|. δB = ASD / |dχ/dB_z|, scaled by √V.
pub fn sensitivity(params: &DualSpeciesParams) -> Result<SensitivityResult> {
    let r = derive_rates(params)?;
    if params.gamma_h() * params.b_perp > 2.0 * r.gamma_h {
        return Err(Error::InvalidParameter(format!(
            "drive γ_H B_⊥ = {:.4e} rad/s exceeds the linearity bound 2Γ_H = {:.4e}",
            params.gamma_h() * params.b_perp,
            2.0 * r.gamma_h
        )));
    }
    if !(params.b_perp > 0.0) {
        return Err(Error::VanishingSlope);
    }
    let abscissa = spectral_abscissa(params, &r)?;
    if !(abscissa < 0.0) {
        return Err(Error::Unstable(format!("drift eigenvalue with real part {abscissa:e}")));
    }
    let h = 1e-3 * r.gamma_h / params.gamma_h();
    let z = phase_at(params, &r, params.b_z)?;
    let zp = phase_at(params, &r, params.b_z + h)?;
    let zm = phase_at(params, &r, params.b_z - h)?;
    let dchi = (zp / zm).arg();
    let slope = (dchi / (2.0 * h)).abs();
    let amp = z.norm();
    if !(slope.is_finite() && amp > 0.0) || slope * r.gamma_h / params.gamma_h() < 1e-12 {
        return Err(Error::VanishingSlope);
    }
    let (s_h, s_k) = noise_intensities(params, &r);
    let psd = psd_at(&transverse_drift(&r), s_h, s_k, params.omega_drive)?;
    let to_db = |s: f64| (2.0 * s).sqrt() / amp / slope * params.volume.sqrt();
    let delta_b = to_db(psd.total);
    if !(delta_b.is_finite() && delta_b > 0.0) {
        return Err(Error::NonFinite(delta_b));
    }
    Ok(SensitivityResult {
        delta_b,
        delta_b_at: delta_b * 1e18,
        slope,
        noise_asd: (2.0 * psd.total).sqrt() / amp,
        amplitude: z,
        psd: psd.total,
        psd_hydrogen: psd.hydrogen,
        psd_potassium: psd.potassium,
        delta_b_hydrogen_at: to_db(psd.hydrogen) * 1e18,
        delta_b_potassium_at: to_db(psd.potassium) * 1e18,
        rates: r,
    })
}
