//! Low-polarization mean-field dynamics of one species: secular Zeeman
//! precession, spin-exchange collisions at rate `r_se` and uniform relaxation
//! toward the unpolarized state at rate `1/t1`.
//!
//! Density matrices are restricted to the block-diagonal (intra-manifold)
//! operator subspace; inter-manifold coherences never appear.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig, expm, re, CMat, C64, I};
use crate::spin::{manifold_hamiltonian, project_block_diagonal, DensityMatrix, NuclearSpin, OperatorSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    pub spin: NuclearSpin,
    /// Spin-exchange rate, 1/s.
    pub r_se: f64,
    /// Longitudinal lifetime, s. `f64::INFINITY` disables relaxation.
    pub t1: f64,
    /// rad/(s·T)
    pub gamma_e: f64,
    /// T
    pub b_z: f64,
}

impl MeanFieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_se >= 0.0) || !self.r_se.is_finite() {
            return Err(Error::InvalidParameter(format!("r_se must be >= 0, got {}", self.r_se)));
        }
        if !(self.t1 > 0.0) {
            return Err(Error::InvalidParameter(format!("t1 must be > 0, got {}", self.t1)));
        }
        if !self.gamma_e.is_finite() || !self.b_z.is_finite() {
            return Err(Error::InvalidParameter("gamma_e and b_z must be finite".into()));
        }
        Ok(())
    }

    pub fn with_field(mut self, b_z: f64) -> Self {
        self.b_z = b_z;
        self
    }
}

/// Transverse decay rate and precession frequency of the dominant mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationResult {
    pub b_z: f64,
    /// 1/s
    pub gamma: f64,
    /// rad/s
    pub omega: f64,
    /// rad/(s·T)
    pub gamma_eff: f64,
    pub mode_overlap: f64,
    /// Second-best mode's overlap is within 5% of the selected one.
    pub degenerate: bool,
}

/// Mean-field generator on the block-diagonal operator subspace.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    /// Matrix element (row, col) of ρ carried by each vector component.
    pub index: Vec<(usize, usize)>,
    pub matrix: CMat,
}

struct Generator {
    ops: OperatorSet,
    h: CMat,
    r_se: f64,
    inv_t1: f64,
}

impl Generator {
    fn new(params: &MeanFieldParams) -> Result<Self> {
        params.validate()?;
        let ops = OperatorSet::for_spin(params.spin);
        let h = manifold_hamiltonian(&ops, [0.0, 0.0, params.b_z], params.gamma_e);
        Ok(Self { ops, h, r_se: params.r_se, inv_t1: 1.0 / params.t1 })
    }

    /// dρ/dt for an arbitrary (not necessarily Hermitian) block-diagonal operator.
    fn apply(&self, rho: &CMat) -> CMat {
        let d = self.ops.dim();
        let mut out = (&self.h * rho - rho * &self.h) * (-I);
        if self.r_se != 0.0 {
            // φ(ρ) = ρ/4 + Σ S_i ρ S_i removes electron polarization; the
            // mean-field term puts it back so that exchange conserves ⟨F⟩.
            let mut ex = rho.scale(0.25 - 1.0);
            for s in &self.ops.s {
                ex += s * rho * s;
                let tr = crate::linalg::trace_product(rho, s);
                ex += s * (tr * (4.0 / d as f64));
            }
            out += ex.scale(self.r_se);
        }
        if self.inv_t1 != 0.0 {
            let tr = rho.trace();
            let mut relax = -rho.clone();
            for k in 0..d {
                relax[(k, k)] += tr / d as f64;
            }
            out += relax.scale(self.inv_t1);
        }
        project_block_diagonal(&self.ops, &out)
    }

    fn block_index(&self) -> Vec<(usize, usize)> {
        let d = self.ops.dim();
        let mut idx = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if self.ops.manifold_of(i) == self.ops.manifold_of(j) {
                    idx.push((i, j));
                }
            }
        }
        idx
    }

    fn matrix_on(&self, index: &[(usize, usize)]) -> CMat {
        let d = self.ops.dim();
        let n = index.len();
        let mut m = CMat::zeros(n, n);
        for (c, &(i, j)) in index.iter().enumerate() {
            let mut e = CMat::zeros(d, d);
            e[(i, j)] = re(1.0);
            let out = self.apply(&e);
            for (r, &(a, b)) in index.iter().enumerate() {
                m[(r, c)] = out[(a, b)];
            }
        }
        m
    }
}

pub fn liouvillian(params: &MeanFieldParams) -> Result<Liouvillian> {
    let g = Generator::new(params)?;
    let index = g.block_index();
    let matrix = g.matrix_on(&index);
    Ok(Liouvillian { index, matrix })
}

impl Liouvillian {
    pub fn vectorize(&self, rho: &CMat) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_iterator(self.index.len(), self.index.iter().map(|&(i, j)| rho[(i, j)]))
    }

    pub fn unvectorize(&self, v: &nalgebra::DVector<C64>, dim: usize) -> CMat {
        let mut m = CMat::zeros(dim, dim);
        for (k, &(i, j)) in self.index.iter().enumerate() {
            m[(i, j)] = v[k];
        }
        m
    }
}

/// Dominant mode of the ΔF_z = +1 coherence sector, selected by overlap with Π_a F_+ Π_a.
pub fn transverse_mode(params: &MeanFieldParams) -> Result<RelaxationResult> {
    if !(params.b_z > 0.0) {
        return Err(Error::InvalidParameter(format!("b_z must be > 0, got {}", params.b_z)));
    }
    let g = Generator::new(params)?;
    let levels = g.ops.basis().levels().to_vec();
    let sector: Vec<(usize, usize)> = g
        .block_index()
        .into_iter()
        .filter(|&(i, j)| levels[j].two_m - levels[i].two_m == 2)
        .collect();
    let m = g.matrix_on(&sector);
    let (vals, vecs) = eig(&m)?;
    // Tr(ρ F+) = Σ ρ_ij (F+)_ji
    let obs: Vec<C64> = sector.iter().map(|&(i, j)| g.ops.f_plus_a[(j, i)]).collect();
    let obs_norm = obs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut scored: Vec<(f64, usize)> = (0..vals.len())
        .map(|k| {
            let v = vecs.column(k);
            let dot: C64 = obs.iter().zip(v.iter()).map(|(o, x)| o * x).sum();
            (dot.norm() / (obs_norm * v.norm()), k)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| (-vals[a.1].re).total_cmp(&(-vals[b.1].re)))
    });
    let (overlap, k) = scored[0];
    let degenerate = scored.get(1).is_some_and(|&(o2, _)| overlap - o2 < 0.05 * overlap);
    let lam = vals[k];
    Ok(RelaxationResult {
        b_z: params.b_z,
        gamma: -lam.re,
        omega: lam.im,
        gamma_eff: lam.im / params.b_z,
        mode_overlap: overlap,
        degenerate,
    })
}

/// One result per field, in grid order.
pub fn sweep_field(params: &MeanFieldParams, b_grid: &[f64]) -> Result<Vec<RelaxationResult>> {
    if b_grid.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidParameter("field grid must be positive".into()));
    }
    if b_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("field grid must be ascending".into()));
    }
    b_grid.par_iter().map(|&b| transverse_mode(&params.with_field(b))).collect()
}

/// Log-spaced fields with γ_e·B/r_se from `ratio_lo` to `ratio_hi`.
pub fn field_grid(r_se: f64, gamma_e: f64, ratio_lo: f64, ratio_hi: f64, points: usize) -> Vec<f64> {
    let (l0, l1) = (ratio_lo.log10(), ratio_hi.log10());
    (0..points)
        .map(|k| {
            let t = if points > 1 { k as f64 / (points - 1) as f64 } else { 0.0 };
            10f64.powf(l0 + t * (l1 - l0)) * r_se / gamma_e
        })
        .collect()
}

/// Exact propagation of ρ0 on `t_grid` by matrix exponentials of the generator.
///
/// The initial state is projected onto the block-diagonal subspace before
/// propagation; the entry at t = 0 is ρ0 itself.
pub fn evolve(rho0: &DensityMatrix, params: &MeanFieldParams, t_grid: &[f64]) -> Result<Vec<DensityMatrix>> {
    let ops = OperatorSet::for_spin(params.spin);
    if rho0.dim() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: rho0.dim() });
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be ascending from 0".into()));
    }
    let l = liouvillian(params)?;
    let mut props: HashMap<u64, CMat> = HashMap::new();
    let mut v = l.vectorize(&project_block_diagonal(&ops, rho0.matrix()));
    let mut t_prev = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dt = t - t_prev;
        if t == 0.0 {
            out.push(rho0.clone());
            continue;
        }
        if dt > 0.0 {
            let p = props.entry(dt.to_bits()).or_insert_with(|| expm(&(&l.matrix * re(dt))));
            v = &*p * v;
        }
        t_prev = t;
        let m = l.unvectorize(&v, ops.dim());
        out.push(DensityMatrix::from_trusted((&m + m.adjoint()).scale(0.5)));
    }
    Ok(out)
}
