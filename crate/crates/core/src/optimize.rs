//! Per-cell optimization of the pumping rate and drive amplitude, and the
//! (n_K, n_H) sensitivity map built from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dualspecies::{derive_rates, sensitivity, DualSpeciesParams};
use crate::error::{Error, Result};

/// Fixed start lattice in the unit square of (log Γ_p, log B_⊥).
const START_LATTICE: [(f64, f64); 8] = [
    (0.125, 0.25),
    (0.375, 0.25),
    (0.625, 0.25),
    (0.875, 0.25),
    (0.125, 0.75),
    (0.375, 0.75),
    (0.625, 0.75),
    (0.875, 0.75),
];

/// Window over which the best objective must settle for a start to count as converged.
const SETTLE_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSpec {
    /// cm⁻³, ascending.
    pub n_k_grid: Vec<f64>,
    /// cm⁻³, ascending.
    pub n_h_grid: Vec<f64>,
    /// s⁻¹
    pub gamma_p_bounds: (f64, f64),
    /// T; the upper end is further capped at 2Γ_H/γ_H.
    pub b_perp_bounds: (f64, f64),
    /// Supplies every fixed input (B_z, V, Γ_H mode, R_sd^K, R_se^K, q's).
    /// Densities, Γ_p, B_⊥ and the drive frequency are overwritten per cell.
    pub base: DualSpeciesParams,
    pub rel_tol: f64,
    /// Objective evaluations per start.
    pub max_evals: usize,
}

/// Logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
            .collect(),
    }
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            n_k_grid: log_grid(1e10, 1e13, 24),
            n_h_grid: log_grid(1e14, 1e18, 24),
            gamma_p_bounds: (1e2, 1e9),
            b_perp_bounds: (1e-14, 1e-8),
            base: DualSpeciesParams::star(),
            rel_tol: 1e-3,
            max_evals: 400,
        }
    }
}

impl OptimizeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        for g in [&self.n_k_grid, &self.n_h_grid] {
            if g.iter().any(|v| !(v.is_finite() && *v > 0.0)) || g.windows(2).any(|w| !(w[1] > w[0])) {
                return bad("density grids must be positive, finite and strictly ascending");
            }
        }
        for (lo, hi) in [self.gamma_p_bounds, self.b_perp_bounds] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return bad("bounds must be positive and ordered");
            }
        }
        if !(self.rel_tol > 0.0) || self.max_evals < SETTLE_WINDOW + 3 {
            return bad("rel_tol must be > 0 and max_evals at least 23");
        }
        self.base.validate()
    }

    fn cell_params(&self, n_k: f64, n_h: f64) -> DualSpeciesParams {
        DualSpeciesParams { n_k, n_h, ..self.base }.tuned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedPoint {
    pub n_k: f64,
    pub n_h: f64,
    pub gamma_p: f64,
    pub b_perp: f64,
    /// aT·√(cm³/Hz)
    pub delta_b_at: f64,
    /// Upper drive bound actually used, T.
    pub b_perp_max: f64,
    /// Total objective evaluations over all starts.
    pub evaluations: usize,
    /// The winning start settled within `rel_tol` over its last 20 evaluations.
    pub converged: bool,
}

struct NmOutcome {
    x: [f64; 2],
    f: f64,
    evals: usize,
    converged: bool,
}

/// Nelder–Mead on a box, with trial points clamped to the box.
fn nelder_mead<F: FnMut([f64; 2]) -> f64>(
    mut f: F,
    x0: [f64; 2],
    step: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    max_evals: usize,
    rel_tol: f64,
) -> NmOutcome {
    let clamp = |x: [f64; 2]| [x[0].clamp(lo[0], hi[0]), x[1].clamp(lo[1], hi[1])];
    let mut best_hist: Vec<f64> = Vec::with_capacity(max_evals);
    let mut evals = 0usize;
    let mut eval = |x: [f64; 2], hist: &mut Vec<f64>| {
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        let prev = hist.last().copied().unwrap_or(f64::INFINITY);
        hist.push(prev.min(v));
        v
    };
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    for k in 0..3 {
        let mut x = x0;
        if k > 0 {
            let d = k - 1;
            x[d] += step[d];
            if x[d] > hi[d] {
                x[d] = x0[d] - step[d];
            }
        }
        let x = clamp(x);
        simplex.push((x, eval(x, &mut best_hist)));
        evals += 1;
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[2].1);
        let size = (0..2)
            .map(|d| (simplex[1].0[d] - simplex[0].0[d]).abs().max((simplex[2].0[d] - simplex[0].0[d]).abs()))
            .fold(0.0, f64::max);
        if fb.is_finite() && (fw - fb).abs() <= 1e-12 * fb.abs() && size < 1e-9 {
            break;
        }
        let c = [(simplex[0].0[0] + simplex[1].0[0]) / 2.0, (simplex[0].0[1] + simplex[1].0[1]) / 2.0];
        let w = simplex[2].0;
        let along = |t: f64| clamp([c[0] + t * (w[0] - c[0]), c[1] + t * (w[1] - c[1])]);
        let xr = along(-1.0);
        let fr = eval(xr, &mut best_hist);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(xe, &mut best_hist);
            evals += 1;
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < fw {
            let x = along(-0.5);
            (x, eval(x, &mut best_hist))
        } else {
            let x = along(0.5);
            (x, eval(x, &mut best_hist))
        };
        evals += 1;
        if fc < fr.min(fw) {
            simplex[2] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let b = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            let x = clamp([b[0] + 0.5 * (v.0[0] - b[0]), b[1] + 0.5 * (v.0[1] - b[1])]);
            *v = (x, eval(x, &mut best_hist));
            evals += 1;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let fb = simplex[0].1;
    let converged = fb.is_finite()
        && best_hist.len() > SETTLE_WINDOW
        && (best_hist[best_hist.len() - 1 - SETTLE_WINDOW] - fb) <= rel_tol * fb.abs();
    NmOutcome { x: simplex[0].0, f: fb, evals, converged }
}

/// Minimizes δB over (log Γ_p, log B_⊥) from the eight lattice starts.
pub fn optimize_point(n_k: f64, n_h: f64, spec: &OptimizeSpec) -> Result<OptimizedPoint> {
    spec.validate()?;
    let base = spec.cell_params(n_k, n_h);
    let probe = DualSpeciesParams { gamma_p: spec.gamma_p_bounds.0, ..base };
    let r = derive_rates(&probe)?;
    // Γ_H does not depend on Γ_p in either hydrogen mode.
    let b_cap = 2.0 * r.gamma_h / base.gamma_h();
    let b_hi = spec.b_perp_bounds.1.min(b_cap);
    if !(b_hi > spec.b_perp_bounds.0) {
        return Err(Error::Infeasible(format!(
            "drive bound 2Γ_H/γ_H = {b_cap:e} T is below the lower B_⊥ bound"
        )));
    }
    let lo = [spec.gamma_p_bounds.0.ln(), spec.b_perp_bounds.0.ln()];
    let hi = [spec.gamma_p_bounds.1.ln(), b_hi.ln()];
    let objective = |x: [f64; 2]| {
        let p = DualSpeciesParams { gamma_p: x[0].exp(), b_perp: x[1].exp().min(b_hi), ..base };
        sensitivity(&p).map(|s| s.delta_b_at).unwrap_or(f64::INFINITY)
    };
    let step = [0.1 * (hi[0] - lo[0]), 0.1 * (hi[1] - lo[1])];
    let mut best: Option<NmOutcome> = None;
    let mut total = 0;
    for (fu, fv) in START_LATTICE {
        let x0 = [lo[0] + fu * (hi[0] - lo[0]), lo[1] + fv * (hi[1] - lo[1])];
        let out = nelder_mead(objective, x0, step, lo, hi, spec.max_evals, spec.rel_tol);
        total += out.evals;
        if best.as_ref().is_none_or(|b| out.f < b.f) {
            best = Some(out);
        }
    }
    let best = best.filter(|b| b.f.is_finite()).ok_or_else(|| {
        Error::Infeasible(format!("no feasible (Γ_p, B_⊥) at n_K = {n_k:e}, n_H = {n_h:e}"))
    })?;
    Ok(OptimizedPoint {
        n_k,
        n_h,
        gamma_p: best.x[0].exp(),
        b_perp: best.x[1].exp().min(b_hi),
        delta_b_at: best.f,
        b_perp_max: b_hi,
        evaluations: total,
        converged: best.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub n_k: f64,
    pub n_h: f64,
    /// `None` marks an infeasible cell.
    pub point: Option<OptimizedPoint>,
    pub infeasible_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMap {
    pub n_k_grid: Vec<f64>,
    pub n_h_grid: Vec<f64>,
    /// Row-major over (n_K index, n_H index).
    pub cells: Vec<MapCell>,
    /// (n_K index, n_H index) of the smallest δB.
    pub argmin: Option<(usize, usize)>,
}

impl SensitivityMap {
    pub fn cell(&self, i_k: usize, i_h: usize) -> &MapCell {
        &self.cells[i_k * self.n_h_grid.len() + i_h]
    }

    /// Largest relative increase of δB between neighbouring feasible cells
    /// along n_H; zero if the map never gets worse with more hydrogen.
    pub fn worst_increase_along_n_h(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_k_grid.len() {
            for j in 1..self.n_h_grid.len() {
                if let (Some(a), Some(b)) = (self.cell(i, j - 1).point, self.cell(i, j).point) {
                    worst = worst.max((b.delta_b_at - a.delta_b_at) / a.delta_b_at);
                }
            }
        }
        worst
    }
}

/// Evaluates every cell in parallel; infeasible cells are recorded, not fatal.
pub fn sensitivity_map(spec: &OptimizeSpec) -> Result<SensitivityMap> {
    spec.validate()?;
    let coords: Vec<(f64, f64)> =
        spec.n_k_grid.iter().flat_map(|&k| spec.n_h_grid.iter().map(move |&h| (k, h))).collect();
    let cells: Vec<MapCell> = coords
        .par_iter()
        .map(|&(n_k, n_h)| match optimize_point(n_k, n_h, spec) {
            Ok(p) => MapCell { n_k, n_h, point: Some(p), infeasible_reason: None },
            Err(e) => MapCell { n_k, n_h, point: None, infeasible_reason: Some(e.to_string()) },
        })
        .collect();
    let nh = spec.n_h_grid.len();
    let argmin = cells
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.point.map(|p| (k, p.delta_b_at)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| (k / nh, k % nh));
    Ok(SensitivityMap { n_k_grid: spec.n_k_grid.clone(), n_h_grid: spec.n_h_grid.clone(), cells, argmin })
}
