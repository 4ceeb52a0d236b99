//! Binary spin-exchange collisions: the two-atom unitary, the single-collision
//! spin-transfer metric ε, and a Monte Carlo of atom pairs that precess between
//! Poisson-distributed collisions and are decorrelated after each one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_complex_exponential;
use crate::linalg::{commutator, hermitian_map, kron, trace_product, CMat, C64, I};
use crate::spin::{
    manifold_hamiltonian, project_block_diagonal, rotation_operator, spin_temperature_state,
    DensityMatrix, NuclearSpin, OperatorSet, PairOperatorSet,
};

/// A collision phase and the two nuclear spins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionSpec {
    phi: f64,
    pub spin_a: NuclearSpin,
    pub spin_b: NuclearSpin,
}

impl CollisionSpec {
    pub fn new(phi: f64, spin_a: NuclearSpin, spin_b: NuclearSpin) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!("phase must be finite, got {phi}")));
        }
        Ok(Self { phi: phi.rem_euclid(std::f64::consts::TAU), spin_a, spin_b })
    }

    /// Phase in [0, 2π).
    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// U = Π_T + e^{iφ} Π_S, evaluated as 1 + (e^{iφ} − 1) Π_S.
pub fn collision_unitary(pair: &PairOperatorSet, phi: f64) -> CMat {
    let n = pair.dim();
    CMat::identity(n, n) + &pair.pi_s * (C64::from_polar(1.0, phi) - C64::new(1.0, 0.0))
}

fn check_dims(pair: &PairOperatorSet, rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<()> {
    if rho_a.dim() != pair.a.dim() {
        return Err(Error::DimensionMismatch { expected: pair.a.dim(), got: rho_a.dim() });
    }
    if rho_b.dim() != pair.b.dim() {
        return Err(Error::DimensionMismatch { expected: pair.b.dim(), got: rho_b.dim() });
    }
    Ok(())
}

/// U (ρ_a ⊗ ρ_b) U†
pub fn apply_collision(
    pair: &PairOperatorSet,
    rho_a: &DensityMatrix,
    rho_b: &DensityMatrix,
    phi: f64,
) -> Result<DensityMatrix> {
    check_dims(pair, rho_a, rho_b)?;
    let u = collision_unitary(pair, phi);
    let out = &u * kron(rho_a.matrix(), rho_b.matrix()) * u.adjoint();
    DensityMatrix::new((&out + out.adjoint()).scale(0.5))
}

/// Uniform average over φ of the collision: Π_T ρ Π_T + Π_S ρ Π_S.
pub fn phase_averaged(pair: &PairOperatorSet, rho: &CMat) -> CMat {
    &pair.pi_t * rho * &pair.pi_t + &pair.pi_s * rho * &pair.pi_s
}

/// Spin transferred into (`upper`) and out of (`lower`) the upper hyperfine
/// manifold, relative to the incoming total transverse coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epsilon {
    pub upper: f64,
    pub lower: f64,
}

/// Single-collision transfer of transverse coherence between manifolds.
///
/// Upper- and lower-manifold F_+ are summed over both atoms. The complex
/// change is projected on the phase of the incoming coherence.
pub fn epsilon_plus(
    pair: &PairOperatorSet,
    rho_a: &DensityMatrix,
    rho_b: &DensityMatrix,
    phi: f64,
) -> Result<Epsilon> {
    check_dims(pair, rho_a, rho_b)?;
    let fpa = pair.lift_a(&pair.a.f_plus_a) + pair.lift_b(&pair.b.f_plus_a);
    let fpb = pair.lift_a(&pair.a.f_plus_b) + pair.lift_b(&pair.b.f_plus_b);
    let rho_in = kron(rho_a.matrix(), rho_b.matrix());
    let u = collision_unitary(pair, phi);
    let rho_out = &u * &rho_in * u.adjoint();
    let in_a = trace_product(&rho_in, &fpa);
    let in_b = trace_product(&rho_in, &fpb);
    let out_a = trace_product(&rho_out, &fpa);
    let out_b = trace_product(&rho_out, &fpb);
    let denom = in_a + in_b;
    if denom.norm() <= 1e-12 {
        return Err(Error::VanishingCoherence(denom.norm()));
    }
    let project = |delta: C64| (delta * denom.conj()).re / denom.norm_sqr();
    Ok(Epsilon { upper: project(out_a - in_a), lower: project(out_b - in_b) })
}

/// STD(P, x̂) after a quarter period of manifold precession about ẑ, with
/// inter-manifold coherences removed: the upper manifold points along +ŷ and
/// the lower along −ŷ. This is the input state for ε curves.
pub fn counter_precessed_state(ops: &OperatorSet, p: f64) -> Result<DensityMatrix> {
    let rho = spin_temperature_state(ops, p, [1.0, 0.0, 0.0])?;
    // exp(−iHt) at γBt = π/2 does not depend on B
    let k = manifold_hamiltonian(ops, [0.0, 0.0, 1.0], ops.basis().spin().multiplicity() as f64);
    let u = hermitian_map(&k, |lam| (-I * std::f64::consts::FRAC_PI_2 * lam).exp());
    let out = project_block_diagonal(ops, &(&u * rho.matrix() * u.adjoint()));
    DensityMatrix::new((&out + out.adjoint()).scale(0.5))
}

/// ε over a phase grid for identical atoms in [`counter_precessed_state`].
pub fn epsilon_curve(spin: NuclearSpin, p: f64, phi_grid: &[f64]) -> Result<Vec<Epsilon>> {
    let ops = OperatorSet::for_spin(spin);
    let pair = PairOperatorSet::new(&ops, &ops);
    let rho = counter_precessed_state(&ops, p)?;
    phi_grid.iter().map(|&phi| epsilon_plus(&pair, &rho, &rho, phi)).collect()
}

/// Reduced state of atom a after one collision with a partner of electron
/// spin `s_b`:
///
/// Tr_b[U(ρ_a⊗ρ_b)U†] = cos²(φ/2) ρ_a + sin²(φ/2) φ(ρ_a)(1 + 4⟨S⟩_b·S) + i sin φ [ρ_a, ⟨S⟩_b·S]
///
/// where φ(ρ) = ρ/4 + S·ρS. With `phi = None` the uniform phase average is
/// used (cos² and sin² → 1/2, sin φ → 0).
pub fn collide_reduced(ops: &OperatorSet, rho_a: &CMat, s_b: [f64; 3], phi: Option<f64>) -> CMat {
    let (c2, s2, sn) = match phi {
        Some(phi) => ((phi / 2.0).cos().powi(2), (phi / 2.0).sin().powi(2), phi.sin()),
        None => (0.5, 0.5, 0.0),
    };
    let mut nuclear = rho_a.scale(0.25);
    for s in &ops.s {
        nuclear += s * rho_a * s;
    }
    let sb_dot_s = ops.s_dot(s_b);
    let d = ops.dim();
    let mut out = rho_a.scale(c2);
    out += (&nuclear * (CMat::identity(d, d) + sb_dot_s.scale(4.0))).scale(s2);
    if sn != 0.0 {
        out += commutator(rho_a, &sb_dot_s) * (I * sn);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMode {
    /// φ drawn uniformly in [0, 2π) for each collision.
    Stochastic,
    /// Uniform phase average applied at each collision.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub spin: NuclearSpin,
    pub p0: f64,
    /// Initial tip of the spin-temperature axis from ẑ about x̂, rad.
    pub tip_angle: f64,
    pub b_z: f64,
    /// Collision rate, 1/s.
    pub r_se: f64,
    pub duration: f64,
    pub seed: u64,
    pub n_trajectories: usize,
    pub phi_mode: PhiMode,
    pub gamma_e: f64,
    /// Output samples, uniformly spaced on [0, duration].
    pub n_samples: usize,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(0.0..1.0).contains(&self.p0) {
            return bad(format!("p0 must lie in [0, 1), got {}", self.p0));
        }
        if !(self.tip_angle > 0.0 && self.tip_angle <= 0.1) {
            return bad(format!("tip_angle must lie in (0, 0.1], got {}", self.tip_angle));
        }
        if self.n_trajectories < 1 {
            return bad("n_trajectories must be >= 1".into());
        }
        if self.n_samples < 2 {
            return bad("n_samples must be >= 2".into());
        }
        if !(self.r_se >= 0.0) || !self.r_se.is_finite() {
            return bad(format!("r_se must be >= 0, got {}", self.r_se));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !self.b_z.is_finite() || !self.gamma_e.is_finite() {
            return bad("b_z and gamma_e must be finite".into());
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.n_samples;
        (0..n).map(|k| self.duration * k as f64 / (n - 1) as f64).collect()
    }
}

/// Ensemble-averaged transverse coherence of atom a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSeries {
    pub t: Vec<f64>,
    /// ⟨Π_a F_+ Π_a⟩
    pub f_plus_upper: Vec<C64>,
    /// ⟨F_+⟩ summed over both manifolds.
    pub f_plus_total: Vec<C64>,
    /// Standard error of the upper-manifold mean, |complex deviation|.
    pub stderr_upper: Vec<f64>,
}

/// Sparse linear map on block-diagonal coefficient vectors.
#[derive(Debug, Clone, Default)]
struct SparseMap {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseMap {
    fn from_fn(index: &[(usize, usize)], d: usize, f: impl Fn(&CMat) -> CMat) -> Self {
        let mut entries = Vec::new();
        for (src, &(i, j)) in index.iter().enumerate() {
            let mut e = CMat::zeros(d, d);
            e[(i, j)] = C64::new(1.0, 0.0);
            let out = f(&e);
            for (dst, &(a, b)) in index.iter().enumerate() {
                let z = out[(a, b)];
                if z.norm() > 1e-15 {
                    entries.push((dst, src, z));
                }
            }
        }
        Self { entries }
    }

    fn apply_add(&self, v: &[C64], scale: C64, out: &mut [C64]) {
        if scale.im == 0.0 {
            let s = scale.re;
            for &(dst, src, z) in &self.entries {
                out[dst] += (z * v[src]).scale(s);
            }
        } else {
            for &(dst, src, z) in &self.entries {
                out[dst] += z * v[src] * scale;
            }
        }
    }
}

/// [`collide_reduced`] followed by block-diagonal projection, precompiled as
/// sparse maps on the vector of intra-manifold matrix elements.
#[derive(Debug, Clone)]
struct ReducedKernel {
    index: Vec<(usize, usize)>,
    /// Position of (j, i) for each (i, j).
    transpose: Vec<usize>,
    /// (E_i − E_j) in units of the manifold Larmor frequency.
    larmor_order: Vec<i32>,
    max_order: usize,
    nuclear: SparseMap,
    nuclear_s: [SparseMap; 3],
    comm_s: [SparseMap; 3],
    s_obs: [Vec<C64>; 3],
    f_plus_upper_obs: Vec<C64>,
    f_plus_obs: Vec<C64>,
}

impl ReducedKernel {
    fn new(ops: &OperatorSet) -> Self {
        let d = ops.dim();
        let mut index = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if ops.manifold_of(i) == ops.manifold_of(j) {
                    index.push((i, j));
                }
            }
        }
        let transpose = index
            .iter()
            .map(|&(i, j)| index.iter().position(|&p| p == (j, i)).expect("block index is symmetric"))
            .collect();
        let levels = ops.basis().levels();
        let larmor_order: Vec<i32> = index
            .iter()
            .map(|&(i, j)| {
                let sign = levels[i].manifold.sign() as i32;
                sign * (levels[i].two_m - levels[j].two_m) / 2
            })
            .collect();
        let max_order = larmor_order.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
        let nuclear_of = |r: &CMat| {
            let mut n = r.scale(0.25);
            for s in &ops.s {
                n += s * r * s;
            }
            n
        };
        let proj = |m: CMat| project_block_diagonal(ops, &m);
        let nuclear = SparseMap::from_fn(&index, d, |r| proj(nuclear_of(r)));
        let nuclear_s = std::array::from_fn(|k| SparseMap::from_fn(&index, d, |r| proj(nuclear_of(r) * &ops.s[k])));
        let comm_s = std::array::from_fn(|k| SparseMap::from_fn(&index, d, |r| proj(commutator(r, &ops.s[k]))));
        let obs = |op: &CMat| index.iter().map(|&(i, j)| op[(j, i)]).collect::<Vec<C64>>();
        let s_obs = std::array::from_fn(|k| obs(&ops.s[k]));
        Self {
            f_plus_upper_obs: obs(&ops.f_plus_a),
            f_plus_obs: obs(&ops.f_plus()),
            index,
            transpose,
            larmor_order,
            max_order,
            nuclear,
            nuclear_s,
            comm_s,
            s_obs,
        }
    }

    fn vectorize(&self, rho: &CMat) -> Vec<C64> {
        self.index.iter().map(|&(i, j)| rho[(i, j)]).collect()
    }

    fn expect(obs: &[C64], v: &[C64]) -> C64 {
        obs.iter().zip(v).map(|(o, x)| o * x).sum()
    }

    fn electron_spin(&self, v: &[C64]) -> [f64; 3] {
        std::array::from_fn(|k| Self::expect(&self.s_obs[k], v).re)
    }

    /// Free precession by `angle` = γ·B·Δt.
    fn precess(&self, v: &mut [C64], angle: f64) {
        let base = C64::from_polar(1.0, -angle);
        // Orders never exceed 2F ≤ 2I + 1, so a small stack table covers common spins.
        let mut small = [C64::new(1.0, 0.0); 16];
        let mut large = Vec::new();
        let pos: &mut [C64] = if self.max_order < 16 {
            &mut small[..=self.max_order]
        } else {
            large.resize(self.max_order + 1, C64::new(1.0, 0.0));
            &mut large
        };
        for k in 1..pos.len() {
            pos[k] = pos[k - 1] * base;
        }
        for (x, &k) in v.iter_mut().zip(&self.larmor_order) {
            let p = pos[k.unsigned_abs() as usize];
            *x *= if k >= 0 { p } else { p.conj() };
        }
    }

    /// Writes the collided (and re-Hermitized) state of `v` into `dst`; `work`
    /// is scratch of the same length.
    fn collide(&self, v: &[C64], s_b: [f64; 3], phi: Option<f64>, work: &mut [C64], dst: &mut [C64]) {
        let (c2, s2, sn) = match phi {
            Some(phi) => ((phi / 2.0).cos().powi(2), (phi / 2.0).sin().powi(2), phi.sin()),
            None => (0.5, 0.5, 0.0),
        };
        for (w, x) in work.iter_mut().zip(v) {
            *w = x.scale(c2);
        }
        self.nuclear.apply_add(v, C64::new(s2, 0.0), work);
        for k in 0..3 {
            if s_b[k] != 0.0 {
                self.nuclear_s[k].apply_add(v, C64::new(4.0 * s2 * s_b[k], 0.0), work);
                if sn != 0.0 {
                    self.comm_s[k].apply_add(v, C64::new(0.0, sn * s_b[k]), work);
                }
            }
        }
        for (k, d) in dst.iter_mut().enumerate() {
            *d = (work[k] + work[self.transpose[k]].conj()) * 0.5;
        }
    }
}

struct Trajectory {
    upper: Vec<C64>,
    total: Vec<C64>,
}

fn run_trajectory(cfg: &McConfig, kernel: &ReducedKernel, v0: &[C64], larmor: f64, times: &[f64], index: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let exp_dist = (cfg.r_se > 0.0).then(|| Exp::new(cfg.r_se).expect("positive rate"));
    let mut a = v0.to_vec();
    let mut b = v0.to_vec();
    let mut work = vec![C64::new(0.0, 0.0); v0.len()];
    let mut next_a = work.clone();
    let mut next_b = work.clone();
    let mut t_last = 0.0;
    let mut next = exp_dist.as_ref().map_or(f64::INFINITY, |e| e.sample(&mut rng));
    let mut upper = Vec::with_capacity(times.len());
    let mut total = Vec::with_capacity(times.len());
    for &t in times {
        while next <= t {
            let phi = match cfg.phi_mode {
                PhiMode::Stochastic => Some(rng.random::<f64>() * std::f64::consts::TAU),
                PhiMode::Averaged => None,
            };
            kernel.precess(&mut a, larmor * (next - t_last));
            if a == b {
                // identical partners stay identical; share the work
                let s = kernel.electron_spin(&a);
                kernel.collide(&a, s, phi, &mut work, &mut next_a);
                std::mem::swap(&mut a, &mut next_a);
                b.copy_from_slice(&a);
            } else {
                kernel.precess(&mut b, larmor * (next - t_last));
                let (sa, sb) = (kernel.electron_spin(&a), kernel.electron_spin(&b));
                kernel.collide(&a, sb, phi, &mut work, &mut next_a);
                kernel.collide(&b, sa, phi, &mut work, &mut next_b);
                std::mem::swap(&mut a, &mut next_a);
                std::mem::swap(&mut b, &mut next_b);
            }
            t_last = next;
            next += exp_dist.as_ref().map_or(f64::INFINITY, |e| e.sample(&mut rng));
        }
        let mut now = a.clone();
        kernel.precess(&mut now, larmor * (t - t_last));
        upper.push(ReducedKernel::expect(&kernel.f_plus_upper_obs, &now));
        total.push(ReducedKernel::expect(&kernel.f_plus_obs, &now));
    }
    Trajectory { upper, total }
}

/// Monte Carlo of identical atom pairs. Each trajectory starts both atoms in
/// STD(P0, ẑ) tipped by `tip_angle` about x̂, precesses them exactly between
/// Poisson collisions at rate `r_se`, and after each collision keeps only the
/// product of the reduced states. Trajectory `k` uses ChaCha8 seeded with
/// `seed` on stream `k`; sums run in trajectory order.
pub fn mc_evolve(cfg: &McConfig) -> Result<McSeries> {
    cfg.validate()?;
    if cfg.r_se > 0.0 && (cfg.gamma_e * cfg.b_z).abs() > 0.1 * cfg.r_se {
        log::warn!(
            "γ_e·B_z = {:.3e} exceeds 0.1·r_se = {:.3e}; outside the weak-field regime",
            cfg.gamma_e * cfg.b_z,
            0.1 * cfg.r_se
        );
    }
    let ops = OperatorSet::for_spin(cfg.spin);
    let kernel = ReducedKernel::new(&ops);
    let larmor = cfg.gamma_e * cfg.b_z / cfg.spin.multiplicity() as f64;
    let z = spin_temperature_state(&ops, cfg.p0, [0.0, 0.0, 1.0])?;
    let r = rotation_operator(&ops, [1.0, 0.0, 0.0], cfg.tip_angle)?;
    let tipped = &r * z.matrix() * r.adjoint();
    let v0 = kernel.vectorize(&(&tipped + tipped.adjoint()).scale(0.5));
    let times = cfg.times();
    let trajs: Vec<Trajectory> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|k| run_trajectory(cfg, &kernel, &v0, larmor, &times, k))
        .collect();
    let n = trajs.len() as f64;
    let m = times.len();
    let mut upper = vec![C64::new(0.0, 0.0); m];
    let mut total = vec![C64::new(0.0, 0.0); m];
    for tr in &trajs {
        for k in 0..m {
            upper[k] += tr.upper[k];
            total[k] += tr.total[k];
        }
    }
    for k in 0..m {
        upper[k] /= n;
        total[k] /= n;
    }
    let stderr_upper = (0..m)
        .map(|k| {
            if trajs.len() < 2 {
                return 0.0;
            }
            let ss: f64 = trajs.iter().map(|tr| (tr.upper[k] - upper[k]).norm_sqr()).sum();
            (ss / (n * (n - 1.0))).sqrt()
        })
        .collect();
    Ok(McSeries { t: times, f_plus_upper: upper, f_plus_total: total, stderr_upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowingDownResult {
    pub p: f64,
    /// γ_e / γ_fitted
    pub q: f64,
    /// rad/(s·T)
    pub gamma_fitted: f64,
    /// Fitted transverse decay rate, 1/s.
    pub decay_fitted: f64,
    pub fit_residual: f64,
    /// Residual ≥ 0.05: the fit is not trusted.
    pub flagged: bool,
}

/// Fit window start: skip 3 collision times.
pub fn fit_window_start(cfg: &McConfig) -> f64 {
    if cfg.r_se > 0.0 {
        3.0 / cfg.r_se
    } else {
        0.0
    }
}

/// Fits the upper-manifold coherence of an MC run after the initial transient.
pub fn fit_series(cfg: &McConfig, series: &McSeries) -> Result<SlowingDownResult> {
    let t0 = fit_window_start(cfg);
    let (t, z): (Vec<f64>, Vec<C64>) = series
        .t
        .iter()
        .zip(&series.f_plus_upper)
        .filter(|(t, _)| **t >= t0)
        .map(|(t, z)| (*t, *z))
        .unzip();
    let fit = fit_complex_exponential(&t, &z)?;
    let gamma_fitted = fit.omega / cfg.b_z;
    Ok(SlowingDownResult {
        p: cfg.p0,
        q: cfg.gamma_e / gamma_fitted,
        gamma_fitted,
        decay_fitted: fit.gamma,
        fit_residual: fit.residual,
        flagged: !(fit.residual < 0.05),
    })
}

/// q(P) from one MC run per polarization, sharing every other setting of `base`.
pub fn slowing_down_curve(spin: NuclearSpin, p_grid: &[f64], base: &McConfig) -> Result<Vec<SlowingDownResult>> {
    if let Some(p) = p_grid.iter().find(|p| !(0.0..=0.99).contains(*p)) {
        return Err(Error::InvalidParameter(format!("polarization {p} outside [0, 0.99]")));
    }
    p_grid
        .iter()
        .map(|&p| {
            let cfg = McConfig { spin, p0: p, ..*base };
            let series = mc_evolve(&cfg)?;
            fit_series(&cfg, &series)
        })
        .collect()
}

/// Duration covering the transient plus `periods` precession periods at rate
/// γ_e B / q_max.
pub fn duration_for(cfg: &McConfig, q_max: f64, periods: f64) -> f64 {
    fit_window_start(cfg) + periods * std::f64::consts::TAU * q_max / (cfg.gamma_e * cfg.b_z).abs()
}
