//! Coupled hydrogen–potassium Bloch equations:
//!
//! dP_H/dt = γ_H B×P_H + Γ_HK P_K − Γ_H P_H + ξ_H
//! dP_K/dt = γ_K B×P_K + Γ_KH P_H − Γ_K P_K + Γ_p ẑ + ξ_K
//!
//! with B(t) = B_z ẑ + B_⊥ cos(ωt) x̂. All frequencies are angular.

mod noise;
pub mod ode;
mod qk;
mod response;
mod sensitivity;
mod stochastic;

pub use noise::{noise_intensities, noise_psd, periodogram, transverse_covariance, transverse_drift, NoisePsd};
pub use qk::{potassium_q, potassium_q_table};
pub use response::{
    analytic_response, lockin_point, lockin_response, rotating_frame_response, rotating_frame_stationary,
    LockinOptions,
    ResponseMethod, ResponsePoint,
};
pub use sensitivity::{sensitivity, SensitivityResult};
pub use stochastic::{integrate, NoiseMode};

use nalgebra::{Matrix2, Matrix6, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig, re, CMat};

/// k_HK, cm³/s.
pub const K_HK: f64 = 5.4e-10;

/// How the hydrogen transverse relaxation is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HydrogenRelaxation {
    /// Γ_H held fixed; R_sd^H is whatever remains after exchange with K.
    FixedTotal { gamma_h: f64 },
    /// R_sd^H held fixed; Γ_H = Γ_HK + R_sd^H / q_H.
    FixedSd { r_sd_h: f64 },
}

/// Potassium slowing-down factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SlowingDownK {
    /// q_K = q(P_Kz), solved jointly with P_Kz.
    SelfConsistent,
    Fixed { q_k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSpeciesParams {
    /// rad/(s·T)
    pub gamma_e: f64,
    /// cm⁻³
    pub n_k: f64,
    /// cm⁻³
    pub n_h: f64,
    /// cm³/s
    pub k_hk: f64,
    pub q_h: f64,
    pub q_k: SlowingDownK,
    /// Γ_p = R_p / q_K, 1/s.
    pub gamma_p: f64,
    pub r_sd_k: f64,
    pub r_se_k: f64,
    pub hydrogen: HydrogenRelaxation,
    /// T
    pub b_z: f64,
    /// T
    pub b_perp: f64,
    /// rad/s
    pub omega_drive: f64,
    /// cm³
    pub volume: f64,
}

impl DualSpeciesParams {
    /// Operating point with n_K = 1.2e11 cm⁻³, n_H = 2.7e16 cm⁻³, Γ_H = 40 s⁻¹,
    /// B_⊥ = 0.35 nT, Γ_p = 1.2e7 s⁻¹ at B_z = 50 µT, drive on the hydrogen resonance.
    pub fn star() -> Self {
        let mut p = Self {
            gamma_e: crate::GAMMA_E,
            n_k: 1.2e11,
            n_h: 2.7e16,
            k_hk: K_HK,
            q_h: 2.0,
            q_k: SlowingDownK::SelfConsistent,
            gamma_p: 1.2e7,
            r_sd_k: 0.0,
            r_se_k: 0.0,
            hydrogen: HydrogenRelaxation::FixedTotal { gamma_h: 40.0 },
            b_z: 50e-6,
            b_perp: 0.35e-9,
            omega_drive: 0.0,
            volume: 1.0,
        };
        p.omega_drive = p.omega_h();
        p
    }

    pub fn gamma_h(&self) -> f64 {
        self.gamma_e / 2.0
    }

    pub fn gamma_k(&self) -> f64 {
        self.gamma_e / 4.0
    }

    pub fn omega_h(&self) -> f64 {
        self.gamma_h() * self.b_z
    }

    pub fn omega_k(&self) -> f64 {
        self.gamma_k() * self.b_z
    }

    /// Same parameters with the drive on the hydrogen resonance.
    pub fn tuned(mut self) -> Self {
        self.omega_drive = self.omega_h();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let finite = [
            self.gamma_e, self.n_k, self.n_h, self.k_hk, self.q_h, self.gamma_p, self.r_sd_k,
            self.r_se_k, self.b_z, self.b_perp, self.omega_drive, self.volume,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        if !(self.n_k > 0.0 && self.n_h >= 0.0) {
            return bad(format!("densities must be positive (n_K = {}, n_H = {})", self.n_k, self.n_h));
        }
        if !(self.volume > 0.0) {
            return bad(format!("volume must be > 0, got {}", self.volume));
        }
        if [self.k_hk, self.gamma_p, self.r_sd_k, self.r_se_k].iter().any(|&r| r < 0.0) {
            return bad("rates must be >= 0".into());
        }
        if !(self.q_h >= 1.0) {
            return bad(format!("q_H must be >= 1, got {}", self.q_h));
        }
        match self.q_k {
            SlowingDownK::Fixed { q_k } if !(q_k >= 1.0 && q_k.is_finite()) => {
                return bad(format!("q_K must be >= 1, got {q_k}"));
            }
            _ => {}
        }
        match self.hydrogen {
            HydrogenRelaxation::FixedTotal { gamma_h } if !(gamma_h > 0.0 && gamma_h.is_finite()) => {
                bad(format!("Γ_H must be > 0, got {gamma_h}"))
            }
            HydrogenRelaxation::FixedSd { r_sd_h } if !(r_sd_h >= 0.0 && r_sd_h.is_finite()) => {
                bad(format!("R_sd^H must be >= 0, got {r_sd_h}"))
            }
            _ => Ok(()),
        }
    }
}

/// Rates derived from [`DualSpeciesParams`]; recomputed on every call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gamma_hk: f64,
    pub gamma_kh: f64,
    pub gamma_k: f64,
    pub gamma_h: f64,
    pub gamma_p: f64,
    pub r_sd_h: f64,
    pub q_h: f64,
    pub q_k: f64,
    pub omega_h: f64,
    pub omega_k: f64,
    /// Steady longitudinal polarizations at B_⊥ = 0.
    pub p_kz: f64,
    pub p_hz: f64,
}

fn rates_for_qk(p: &DualSpeciesParams, q_k: f64) -> Result<Rates> {
    let gamma_hk = p.k_hk * p.n_k / p.q_h;
    let gamma_kh = p.k_hk * p.n_h / q_k;
    let gamma_k = p.gamma_p + gamma_kh + (p.r_sd_k + p.r_se_k) / q_k;
    let (gamma_h, r_sd_h) = match p.hydrogen {
        HydrogenRelaxation::FixedTotal { gamma_h } => {
            if gamma_h < gamma_hk {
                return Err(Error::Infeasible(format!(
                    "Γ_H = {gamma_h} s⁻¹ is below the exchange rate Γ_HK = {gamma_hk} s⁻¹"
                )));
            }
            (gamma_h, (gamma_h - gamma_hk) * p.q_h)
        }
        HydrogenRelaxation::FixedSd { r_sd_h } => (gamma_hk + r_sd_h / p.q_h, r_sd_h),
    };
    let det = gamma_k * gamma_h - gamma_kh * gamma_hk;
    if !(det > 0.0) || !(gamma_h > 0.0) {
        return Err(Error::Unstable(format!(
            "longitudinal drift is not Hurwitz (Γ_KΓ_H − Γ_KHΓ_HK = {det:e})"
        )));
    }
    let p_kz = p.gamma_p * gamma_h / det;
    Ok(Rates {
        gamma_hk,
        gamma_kh,
        gamma_k,
        gamma_h,
        gamma_p: p.gamma_p,
        r_sd_h,
        q_h: p.q_h,
        q_k,
        omega_h: p.omega_h(),
        omega_k: p.omega_k(),
        p_kz,
        p_hz: gamma_hk / gamma_h * p_kz,
    })
}

/// Γ_HK = k n_K / q_H, Γ_KH = k n_H / q_K, Γ_K, Γ_H and the steady polarization.
///
/// In self-consistent mode q_K = q(P_Kz(q_K)) is found by bisection on [4, 6].
pub fn derive_rates(p: &DualSpeciesParams) -> Result<Rates> {
    p.validate()?;
    match p.q_k {
        SlowingDownK::Fixed { q_k } => rates_for_qk(p, q_k),
        SlowingDownK::SelfConsistent => {
            let residual = |q: f64| -> Result<(f64, Rates)> {
                let r = rates_for_qk(p, q)?;
                Ok((potassium_q(r.p_kz) - q, r))
            };
            let (mut lo, mut hi) = (4.0, potassium_q(0.0));
            let (f_lo, r_lo) = residual(lo)?;
            if f_lo <= 0.0 {
                return Ok(r_lo);
            }
            let (f_hi, r_hi) = residual(hi)?;
            if f_hi >= 0.0 {
                return Ok(r_hi);
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if residual(mid)?.0 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            rates_for_qk(p, 0.5 * (lo + hi))
        }
    }
}

/// Longitudinal and transverse polarizations of both species.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolarizationState {
    pub p_h: [f64; 3],
    pub p_k: [f64; 3],
}

impl PolarizationState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.p_h[0], self.p_h[1], self.p_h[2], self.p_k[0], self.p_k[1], self.p_k[2]]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self { p_h: [y[0], y[1], y[2]], p_k: [y[3], y[4], y[5]] }
    }

    pub fn norms(&self) -> (f64, f64) {
        let n = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        (n(&self.p_h), n(&self.p_k))
    }
}

/// Drift matrix of (P_H, P_K) for a static field `b`.
pub fn drift_matrix(r: &Rates, gamma_h: f64, gamma_k: f64, b: [f64; 3]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let cross = |g: f64| {
        let w = [g * b[0], g * b[1], g * b[2]];
        // (w × P)_i
        nalgebra::Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
    };
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(cross(gamma_h) - nalgebra::Matrix3::identity() * r.gamma_h));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(cross(gamma_k) - nalgebra::Matrix3::identity() * r.gamma_k));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(nalgebra::Matrix3::identity() * r.gamma_hk));
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(nalgebra::Matrix3::identity() * r.gamma_kh));
    m
}

/// Largest real part of the drift eigenvalues at B_⊥ = 0.
pub fn spectral_abscissa(p: &DualSpeciesParams, r: &Rates) -> Result<f64> {
    let m = drift_matrix(r, p.gamma_h(), p.gamma_k(), [0.0, 0.0, p.b_z]);
    let c = CMat::from_fn(6, 6, |i, j| re(m[(i, j)]));
    let (vals, _) = eig(&c)?;
    Ok(vals.iter().fold(f64::NEG_INFINITY, |a, z| a.max(z.re)))
}

/// Closed-form stationary state at B_⊥ = 0: transverse components vanish and
/// the longitudinal pair solves the 2×2 balance.
pub fn steady_state(p: &DualSpeciesParams) -> Result<PolarizationState> {
    if p.b_perp != 0.0 {
        return Err(Error::InvalidParameter("steady_state requires b_perp = 0".into()));
    }
    let r = derive_rates(p)?;
    let abscissa = spectral_abscissa(p, &r)?;
    if !(abscissa < 0.0) {
        return Err(Error::Unstable(format!("drift eigenvalue with real part {abscissa:e}")));
    }
    Ok(PolarizationState { p_h: [0.0, 0.0, r.p_hz], p_k: [0.0, 0.0, r.p_kz] })
}

/// Right-hand side of the Bloch equations in the lab frame. `pump` scales the
/// Γ_p ẑ source (0 gives the homogeneous system used for Floquet shooting).
#[allow(clippy::too_many_arguments)]
pub(crate) fn bloch_rhs(
    r: &Rates,
    gamma_h: f64,
    gamma_k: f64,
    b_z: f64,
    b_perp: f64,
    omega: f64,
    pump: f64,
    t: f64,
    y: &[f64],
    dy: &mut [f64],
) {
    let b = [b_perp * (omega * t).cos(), 0.0, b_z];
    let cross = |g: f64, p: &[f64], out: &mut [f64]| {
        out[0] = g * (b[1] * p[2] - b[2] * p[1]);
        out[1] = g * (b[2] * p[0] - b[0] * p[2]);
        out[2] = g * (b[0] * p[1] - b[1] * p[0]);
    };
    cross(gamma_h, &y[0..3], &mut dy[0..3]);
    cross(gamma_k, &y[3..6], &mut dy[3..6]);
    for i in 0..3 {
        dy[i] += r.gamma_hk * y[3 + i] - r.gamma_h * y[i];
        dy[3 + i] += r.gamma_kh * y[i] - r.gamma_k * y[3 + i];
    }
    dy[5] += pump * r.gamma_p;
}

/// Longitudinal stationary solution by direct 2×2 solve; used to cross-check
/// the closed form.
pub fn longitudinal_solve(r: &Rates) -> Option<(f64, f64)> {
    let m = Matrix2::new(-r.gamma_h, r.gamma_hk, r.gamma_kh, -r.gamma_k);
    let rhs = Vector2::new(0.0, -r.gamma_p);
    m.lu().solve(&rhs).map(|x| (x[0], x[1]))
}
