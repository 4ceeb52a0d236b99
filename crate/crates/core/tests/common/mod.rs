//! Shared test oracles.

use serfsim_core::linalg::{eig, kron, re, CMat, C64};
use serfsim_core::meanfield::MeanFieldParams;
use serfsim_core::spin::{manifold_hamiltonian, OperatorSet};

fn vec_of(m: &CMat) -> nalgebra::DVector<C64> {
    // column stacking
    nalgebra::DVector::from_iterator(m.len(), m.iter().copied())
}

/// Builds the full d²×d² generator from Kronecker products (column-stacked
/// vec, vec(AXB) = (Bᵀ⊗A) vec X), sandwiches it between block-diagonal
/// projectors and returns the eigenvalue whose eigenvector best overlaps
/// Π_a F_+ Π_a.
pub fn kron_oracle(p: &MeanFieldParams) -> C64 {
    let ops = OperatorSet::for_spin(p.spin);
    let d = ops.dim();
    let id = CMat::identity(d, d);
    let h = manifold_hamiltonian(&ops, [0.0, 0.0, p.b_z], p.gamma_e);
    let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * C64::new(0.0, -1.0);
    let mut ex = CMat::identity(d * d, d * d).scale(-0.75);
    for s in &ops.s {
        ex += kron(&s.transpose(), s);
        ex += (vec_of(s) * vec_of(&s.transpose()).transpose()).scale(4.0 / d as f64);
    }
    l += ex.scale(p.r_se);
    let v1 = vec_of(&id);
    let relax = (&v1 * v1.transpose()).unscale(d as f64) - CMat::identity(d * d, d * d);
    l += relax.scale(1.0 / p.t1);
    let mut proj = CMat::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            if ops.manifold_of(i) == ops.manifold_of(j) {
                proj[(i + j * d, i + j * d)] = re(1.0);
            }
        }
    }
    let l = &proj * l * &proj;
    let (vals, vecs) = eig(&l).unwrap();
    let obs = vec_of(&ops.f_plus_a.transpose());
    let mut best = (0.0, C64::new(0.0, 0.0));
    for (k, lam) in vals.iter().enumerate() {
        let v = vecs.column(k);
        let ov = obs.iter().zip(v.iter()).map(|(o, x)| o * x).sum::<C64>().norm() / v.norm();
        if ov > best.0 + 1e-9 {
            best = (ov, *lam);
        }
    }
    best.1
}
