//! TOML run configuration.
//!
//! A file holds an optional `[run]` table and one table per subcommand. Unknown
//! keys are rejected everywhere. Dimensional values are strings with a unit
//! suffix (see [`crate::units`]); dimensionless values are plain numbers.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serfsim_core::collision::PhiMode;
use serfsim_core::dualspecies::{DualSpeciesParams, HydrogenRelaxation, SlowingDownK, K_HK};
use serfsim_core::meanfield::MeanFieldParams;
use serfsim_core::optimize::{log_grid, OptimizeSpec};
use serfsim_core::spin::NuclearSpin;

use crate::units::{parse_quantity, Dim};

/// Built-in configurations, addressable by name through `--config`.
pub const BUILTIN: &[(&str, &str)] = &[
    ("fig2ab", include_str!("../configs/fig2ab.toml")),
    ("fig2c", include_str!("../configs/fig2c.toml")),
    ("fig2d", include_str!("../configs/fig2d.toml")),
    ("fig3b-cross", include_str!("../configs/fig3b-cross.toml")),
    ("fig3b-star", include_str!("../configs/fig3b-star.toml")),
    ("fig4", include_str!("../configs/fig4.toml")),
    ("sensitivity", include_str!("../configs/sensitivity.toml")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|b| b.0 == name).map(|b| b.1)
}

/// 28 MHz/mT
const GAMMA_E_DEFAULT: &str = "28 MHz/mT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    /// 0 uses every available core.
    pub threads: Option<usize>,
    pub plot: Option<bool>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub fig2ab: Option<Fig2abConfig>,
    pub fig2c: Option<Fig2cConfig>,
    pub fig2d: Option<Fig2dConfig>,
    pub fig3b: Option<Fig3bConfig>,
    pub fig4: Option<Fig4Config>,
    pub sensitivity: Option<SensitivityConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string() + &span_hint(text, e.span()))
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => format!(" (line {})", text[..s.start.min(text.len())].lines().count().max(1)),
        None => String::new(),
    }
}

/// Resolves a quantity, prefixing errors with the key name.
fn q(key: &str, s: &str, dim: Dim) -> Result<f64, String> {
    parse_quantity(s, dim).map_err(|e| format!("{key}: {e}"))
}

fn positive(key: &str, v: f64) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{key}: must be > 0, got {v}"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, String> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{key}: must be >= 0, got {v}"))
    }
}

/// `"3/2"` → I = 3/2.
pub fn parse_spin(s: &str) -> Result<NuclearSpin, String> {
    let two_i = match s.trim().split_once('/') {
        Some((num, "2")) => num.trim().parse::<u32>().ok(),
        _ => None,
    };
    two_i
        .and_then(|n| NuclearSpin::new(n).ok())
        .ok_or_else(|| format!("spins: `{s}` is not a half-integer nuclear spin like \"3/2\""))
}

fn spins(list: &[String]) -> Result<Vec<NuclearSpin>, String> {
    if list.is_empty() {
        return Err("spins: list is empty".into());
    }
    list.iter().map(|s| parse_spin(s)).collect()
}

pub fn spin_label(spin: NuclearSpin) -> String {
    format!("{}/2", spin.two_i())
}

fn polarizations(key: &str, p: &[f64]) -> Result<Vec<f64>, String> {
    if let Some(v) = p.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(format!("{key}: polarization {v} outside (0, 1)"));
    }
    Ok(p.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2abConfig {
    pub spins: Vec<String>,
    #[serde(rename = "R_se")]
    pub r_se: String,
    #[serde(rename = "T1")]
    pub t1: String,
    pub gamma_e: Option<String>,
    /// Grid of γ_e B / R_se, log-spaced.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub points: usize,
    /// Reference field reported in its own row per spin.
    pub marker: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2ab {
    pub params: Vec<MeanFieldParams>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub points: usize,
    pub marker: Option<f64>,
}

impl Fig2abConfig {
    pub fn resolve(&self) -> Result<Fig2ab, String> {
        let r_se = non_negative("R_se", q("R_se", &self.r_se, Dim::Rate)?)?;
        let t1 = positive("T1", q("T1", &self.t1, Dim::Time)?)?;
        let gamma_e = q("gamma_e", self.gamma_e.as_deref().unwrap_or(GAMMA_E_DEFAULT), Dim::Gyromagnetic)?;
        positive("ratio_min", self.ratio_min)?;
        if !(self.ratio_max >= self.ratio_min && self.ratio_max.is_finite()) {
            return Err("ratio_max: must be finite and >= ratio_min".into());
        }
        if self.points > 0 && r_se == 0.0 {
            return Err("R_se: field grid is defined relative to R_se, which must be > 0".into());
        }
        let marker = match &self.marker {
            Some(m) => Some(positive("marker", q("marker", m, Dim::Field)?)?),
            None => None,
        };
        let params = spins(&self.spins)?
            .into_iter()
            .map(|spin| MeanFieldParams { spin, r_se, t1, gamma_e, b_z: 0.0 })
            .collect();
        Ok(Fig2ab { params, ratio_min: self.ratio_min, ratio_max: self.ratio_max, points: self.points, marker })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2cConfig {
    pub spins: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    /// Uniform φ grid on [0, 2π).
    pub phi_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2c {
    pub spins: Vec<NuclearSpin>,
    pub p: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Fig2cConfig {
    pub fn resolve(&self) -> Result<Fig2c, String> {
        let n = self.phi_points;
        let phi = (0..n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect();
        Ok(Fig2c { spins: spins(&self.spins)?, p: polarizations("P", &self.p)?, phi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2dConfig {
    pub spins: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "R_se")]
    pub r_se: String,
    /// γ_e B_z / R_se
    pub field_ratio: f64,
    pub n_trajectories: usize,
    pub mode: PhiMode,
    pub n_samples: usize,
    /// rad
    pub tip_angle: f64,
    /// Precession periods simulated after the transient, at q = 6.
    pub periods: f64,
    pub gamma_e: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2d {
    pub spins: Vec<NuclearSpin>,
    pub p: Vec<f64>,
    pub base: serfsim_core::collision::McConfig,
}

impl Fig2dConfig {
    pub fn resolve(&self, seed: u64) -> Result<Fig2d, String> {
        let r_se = positive("R_se", q("R_se", &self.r_se, Dim::Rate)?)?;
        let gamma_e = q("gamma_e", self.gamma_e.as_deref().unwrap_or(GAMMA_E_DEFAULT), Dim::Gyromagnetic)?;
        positive("field_ratio", self.field_ratio)?;
        positive("periods", self.periods)?;
        if let Some(v) = self.p.iter().find(|v| !(0.0..=0.99).contains(*v)) {
            return Err(format!("P: polarization {v} outside [0, 0.99]"));
        }
        let spins = spins(&self.spins)?;
        let mut base = serfsim_core::collision::McConfig {
            spin: spins[0],
            p0: 0.0,
            tip_angle: self.tip_angle,
            b_z: self.field_ratio * r_se / gamma_e,
            r_se,
            duration: 1.0,
            seed,
            n_trajectories: self.n_trajectories,
            phi_mode: self.mode,
            gamma_e,
            n_samples: self.n_samples,
        };
        base.duration = serfsim_core::collision::duration_for(&base, 6.0, self.periods);
        base.validate().map_err(|e| e.to_string())?;
        Ok(Fig2d { spins, p: self.p.clone(), base })
    }
}

/// `q_K = "self_consistent"` or a fixed number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QkSetting {
    Fixed(f64),
    Mode(String),
}

/// Dual-species parameters. Exactly one of `Gamma_H` and `R_sd_H` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualParamsConfig {
    #[serde(rename = "n_K")]
    pub n_k: Option<String>,
    #[serde(rename = "n_H")]
    pub n_h: Option<String>,
    #[serde(rename = "k_HK")]
    pub k_hk: Option<String>,
    #[serde(rename = "q_H")]
    pub q_h: f64,
    #[serde(rename = "q_K")]
    pub q_k: QkSetting,
    #[serde(rename = "Gamma_p")]
    pub gamma_p: String,
    #[serde(rename = "R_sd_K")]
    pub r_sd_k: Option<String>,
    #[serde(rename = "R_se_K")]
    pub r_se_k: Option<String>,
    #[serde(rename = "Gamma_H")]
    pub gamma_h: Option<String>,
    #[serde(rename = "R_sd_H")]
    pub r_sd_h: Option<String>,
    #[serde(rename = "B_z")]
    pub b_z: String,
    #[serde(rename = "B_perp")]
    pub b_perp: String,
    /// Defaults to the hydrogen resonance γ_H B_z.
    pub drive: Option<String>,
    #[serde(rename = "V")]
    pub volume: String,
    pub gamma_e: Option<String>,
}

impl DualParamsConfig {
    /// `with_densities = false` forbids n_K and n_H, which a map supplies.
    pub fn resolve(&self, with_densities: bool) -> Result<DualSpeciesParams, String> {
        let density = |key: &str, v: &Option<String>| -> Result<f64, String> {
            match (v, with_densities) {
                (Some(s), true) => q(key, s, Dim::Density),
                (None, true) => Err(format!("{key}: missing")),
                (Some(_), false) => Err(format!("{key}: set by the map grid, remove it here")),
                (None, false) => Ok(1.0),
            }
        };
        let rate = |key: &str, v: &Option<String>| -> Result<f64, String> {
            v.as_deref().map_or(Ok(0.0), |s| q(key, s, Dim::Rate))
        };
        if self.r_se_k.is_none() {
            log::warn!("R_se_K not given; potassium self-exchange relaxation set to 0");
        }
        let q_k = match &self.q_k {
            QkSetting::Fixed(v) => SlowingDownK::Fixed { q_k: *v },
            QkSetting::Mode(m) if m == "self_consistent" => SlowingDownK::SelfConsistent,
            QkSetting::Mode(m) => return Err(format!("q_K: expected a number or \"self_consistent\", got `{m}`")),
        };
        let hydrogen = match (&self.gamma_h, &self.r_sd_h) {
            (Some(g), None) => HydrogenRelaxation::FixedTotal { gamma_h: q("Gamma_H", g, Dim::Rate)? },
            (None, Some(r)) => HydrogenRelaxation::FixedSd { r_sd_h: q("R_sd_H", r, Dim::Rate)? },
            _ => return Err("give exactly one of Gamma_H and R_sd_H".into()),
        };
        let mut p = DualSpeciesParams {
            gamma_e: q("gamma_e", self.gamma_e.as_deref().unwrap_or(GAMMA_E_DEFAULT), Dim::Gyromagnetic)?,
            n_k: density("n_K", &self.n_k)?,
            n_h: density("n_H", &self.n_h)?,
            k_hk: self.k_hk.as_deref().map_or(Ok(K_HK), |s| q("k_HK", s, Dim::RateCoefficient))?,
            q_h: self.q_h,
            q_k,
            gamma_p: q("Gamma_p", &self.gamma_p, Dim::Rate)?,
            r_sd_k: rate("R_sd_K", &self.r_sd_k)?,
            r_se_k: rate("R_se_K", &self.r_se_k)?,
            hydrogen,
            b_z: q("B_z", &self.b_z, Dim::Field)?,
            b_perp: q("B_perp", &self.b_perp, Dim::Field)?,
            omega_drive: 0.0,
            volume: q("V", &self.volume, Dim::Volume)?,
        };
        p.omega_drive = match &self.drive {
            Some(s) => q("drive", s, Dim::Frequency)?,
            None => p.omega_h(),
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3bSet {
    pub label: String,
    pub params: DualParamsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3bConfig {
    /// Wide linear grid covering the potassium line.
    pub f_min: String,
    pub f_max: String,
    pub points: usize,
    /// Extra points within ± `span` of each set's hydrogen resonance.
    pub span: String,
    pub span_points: usize,
    /// Skip the time-domain lock-in and emit the closed form only.
    #[serde(default)]
    pub analytic_only: bool,
    pub sets: Vec<Fig3bSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3b {
    pub sets: Vec<(String, DualSpeciesParams, Vec<f64>)>,
    /// rad/s
    pub span: f64,
    pub analytic_only: bool,
}

impl Fig3bConfig {
    pub fn resolve(&self) -> Result<Fig3b, String> {
        let lo = positive("f_min", q("f_min", &self.f_min, Dim::Frequency)?)?;
        let hi = q("f_max", &self.f_max, Dim::Frequency)?;
        if !(hi >= lo) {
            return Err("f_max: must be >= f_min".into());
        }
        let span = non_negative("span", q("span", &self.span, Dim::Frequency)?)?;
        if self.sets.is_empty() {
            return Err("sets: at least one parameter set is required".into());
        }
        let mut sets = Vec::new();
        for s in &self.sets {
            let p = s.params.resolve(true).map_err(|e| format!("sets[{}]: {e}", s.label))?;
            let mut grid = linear(lo, hi, self.points);
            let wh = p.omega_h();
            grid.extend(linear(wh - span, wh + span, self.span_points));
            grid.retain(|w| *w > 0.0);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            sets.push((s.label.clone(), p, grid));
        }
        Ok(Fig3b { sets, span, analytic_only: self.analytic_only })
    }
}

fn linear(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig4Config {
    #[serde(rename = "n_K_min")]
    pub n_k_min: String,
    #[serde(rename = "n_K_max")]
    pub n_k_max: String,
    #[serde(rename = "n_K_points")]
    pub n_k_points: usize,
    #[serde(rename = "n_H_min")]
    pub n_h_min: String,
    #[serde(rename = "n_H_max")]
    pub n_h_max: String,
    #[serde(rename = "n_H_points")]
    pub n_h_points: usize,
    #[serde(rename = "Gamma_p_min")]
    pub gamma_p_min: String,
    #[serde(rename = "Gamma_p_max")]
    pub gamma_p_max: String,
    #[serde(rename = "B_perp_min")]
    pub b_perp_min: String,
    #[serde(rename = "B_perp_max")]
    pub b_perp_max: String,
    pub rel_tol: f64,
    pub max_evals: usize,
    pub base: DualParamsConfig,
}

impl Fig4Config {
    pub fn resolve(&self) -> Result<OptimizeSpec, String> {
        let d = |k: &str, s: &str| q(k, s, Dim::Density);
        let spec = OptimizeSpec {
            n_k_grid: log_grid(d("n_K_min", &self.n_k_min)?, d("n_K_max", &self.n_k_max)?, self.n_k_points),
            n_h_grid: log_grid(d("n_H_min", &self.n_h_min)?, d("n_H_max", &self.n_h_max)?, self.n_h_points),
            gamma_p_bounds: (
                q("Gamma_p_min", &self.gamma_p_min, Dim::Rate)?,
                q("Gamma_p_max", &self.gamma_p_max, Dim::Rate)?,
            ),
            b_perp_bounds: (q("B_perp_min", &self.b_perp_min, Dim::Field)?, q("B_perp_max", &self.b_perp_max, Dim::Field)?),
            base: self.base.resolve(false).map_err(|e| format!("base: {e}"))?,
            rel_tol: self.rel_tol,
            max_evals: self.max_evals,
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub params: DualParamsConfig,
}

impl SensitivityConfig {
    pub fn resolve(&self) -> Result<DualSpeciesParams, String> {
        self.params.resolve(true)
    }
}
