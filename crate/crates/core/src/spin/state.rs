use super::OperatorSet;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_map, hermiticity_error, re, trace_product, CMat, C64, I};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    pub fn new(matrix: CMat) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        let herm = hermiticity_error(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = matrix.trace();
        if (tr - re(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidParameter(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(matrix))
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_trusted(matrix: CMat) -> Self {
        Self(matrix)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMat::identity(dim, dim).unscale(dim as f64))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Tr(ρ A).
    pub fn expect(&self, op: &CMat) -> C64 {
        trace_product(&self.0, op)
    }
}

impl TryFrom<CMat> for DensityMatrix {
    type Error = Error;
    fn try_from(m: CMat) -> Result<Self> {
        Self::new(m)
    }
}

impl From<DensityMatrix> for CMat {
    fn from(d: DensityMatrix) -> CMat {
        d.0
    }
}

fn unit(axis: [f64; 3]) -> Result<[f64; 3]> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm < 1e-12 {
        return Err(Error::InvalidParameter(format!("axis {axis:?} has no direction")));
    }
    Ok(axis.map(|x| x / norm))
}

/// ρ ∝ exp(β F·n) with electron polarization P along n, β = ln((1+P)/(1−P)).
pub fn spin_temperature_state(ops: &OperatorSet, p: f64, axis: [f64; 3]) -> Result<DensityMatrix> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "polarization must lie in [0, 1), got {p}; use stretched_state for P = 1"
        )));
    }
    let n = unit(axis)?;
    let beta = ((1.0 + p) / (1.0 - p)).ln();
    let fn_ = ops.f_dot(n);
    let top = hermitian_eigenvalues(&fn_).last().copied().unwrap_or(0.0);
    let unnorm = hermitian_map(&fn_, |lam| re((beta * (lam - top)).exp()));
    let tr = unnorm.trace();
    let mut rho = unnorm / tr;
    rho = (&rho + rho.adjoint()).scale(0.5);
    let pol = 2.0 * trace_product(&rho, &ops.s_dot(n)).re;
    if (pol - p).abs() > 1e-10 {
        return Err(Error::Numerical(format!("STD electron polarization {pol} differs from {p}")));
    }
    DensityMatrix::new(rho)
}

/// The fully polarized state |F = I+1/2, m = F⟩ along `axis`.
pub fn stretched_state(ops: &OperatorSet, axis: [f64; 3]) -> Result<DensityMatrix> {
    let n = unit(axis)?;
    let fn_ = ops.f_dot(n);
    let fmax = (ops.basis().spin().two_i() as f64 + 1.0) / 2.0;
    let rho = hermitian_map(&fn_, |lam| re(if (lam - fmax).abs() < 1e-6 { 1.0 } else { 0.0 }));
    DensityMatrix::new((&rho + rho.adjoint()).scale(0.5))
}

/// exp(−iθ F·n).
pub fn rotation_operator(ops: &OperatorSet, axis: [f64; 3], angle: f64) -> Result<CMat> {
    let n = unit(axis)?;
    Ok(hermitian_map(&ops.f_dot(n), |lam| (-I * angle * lam).exp()))
}
