//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermiticity_error(a: &CMat) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// Applies a scalar function to a Hermitian matrix through its eigendecomposition.
pub fn hermitian_map<F>(h: &CMat, f: F) -> CMat
where
    F: Fn(f64) -> C64,
{
    let herm = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        let fk = f(*lam);
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= fk;
        }
    }
    scaled * v.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let herm = (h + h.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigendecomposition of a general complex matrix.
///
/// Eigenvalues come from the complex Schur form `A = Q T Q†`; eigenvectors are
/// obtained by back substitution on `T` and mapped back through `Q`. Columns of
/// the returned matrix are unit-norm eigenvectors.
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let tiny = f64::EPSILON * scale;
    let mut vecs = CMat::zeros(n, n);
    for k in 0..n {
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = re(1.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - t[(k, k)];
            if denom.norm() < tiny {
                denom = re(tiny);
            }
            y[i] = -acc / denom;
        }
        let yv = nalgebra::DVector::from_vec(y);
        let v = &q * yv;
        let norm = v.norm();
        vecs.set_column(k, &(v / re(norm)));
    }
    Ok((values, vecs))
}

/// Matrix exponential (Padé scaling and squaring, via `nalgebra`).
pub fn expm(a: &CMat) -> CMat {
    a.exp()
}

/// Tr_b of an operator on the product space `a ⊗ b`.
pub fn partial_trace_second(rho: &CMat, da: usize, db: usize) -> CMat {
    let mut out = CMat::zeros(da, da);
    for i in 0..da {
        for j in 0..da {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..db {
                acc += rho[(i * db + k, j * db + k)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Tr_a of an operator on the product space `a ⊗ b`.
pub fn partial_trace_first(rho: &CMat, da: usize, db: usize) -> CMat {
    let mut out = CMat::zeros(db, db);
    for i in 0..db {
        for j in 0..db {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..da {
                acc += rho[(k * db + i, k * db + j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Tr(A B) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMat {
        CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(0.0, 1.0),
                re(1.0),
                re(0.0),
                re(0.0),
                C64::new(-1.0, 2.0),
                re(1.0),
                re(2.0),
                re(0.0),
                C64::new(0.5, -1.0),
            ],
        )
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = sample();
        let (vals, vecs) = eig(&a).unwrap();
        for (k, lam) in vals.iter().enumerate() {
            let v = vecs.column(k).into_owned();
            let resid = (&a * &v - &v * *lam).norm();
            assert!(resid < 1e-12, "residual {resid}");
        }
    }

    #[test]
    fn partial_traces_of_product() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(0.25), re(0.75)]));
        let s = sample();
        let b = hermitian_map(&(&s + s.adjoint()), |x| re(x.exp()));
        let b = &b / b.trace();
        let ab = kron(&a, &b);
        assert!(max_abs(&(partial_trace_second(&ab, 2, 3) - &a)) < 1e-14);
        assert!(max_abs(&(partial_trace_first(&ab, 2, 3) - &b)) < 1e-14);
    }

    #[test]
    fn hermitian_exponential_matches_pade() {
        let h = {
            let s = sample();
            (&s + s.adjoint()).scale(0.5)
        };
        let a = hermitian_map(&h, |x| (I * x).exp());
        let b = expm(&(h.map(|z| z * I)));
        assert!(max_abs(&(a - b)) < 1e-12);
    }
}
