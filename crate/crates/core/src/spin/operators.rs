use std::sync::Arc;

use nalgebra::DMatrix;

use super::{clebsch_gordan, AtomBasis, Manifold, NuclearSpin};
use crate::linalg::{kron, re, CMat, C64, I};

/// Spin-j angular momentum matrices in the |j, m⟩ basis, m descending.
fn angular_momentum(two_j: i32) -> [CMat; 3] {
    let n = (two_j + 1) as usize;
    let j = two_j as f64 / 2.0;
    let m_of = |k: usize| j - k as f64;
    let mut jp = CMat::zeros(n, n);
    let mut jz = CMat::zeros(n, n);
    for k in 0..n {
        jz[(k, k)] = re(m_of(k));
        if k > 0 {
            // ⟨m+1| J+ |m⟩ with row k-1 holding m+1
            let m = m_of(k);
            jp[(k - 1, k)] = re((j * (j + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm).scale(0.5);
    let jy = (&jp - &jm) * C64::new(0.0, -0.5);
    [jx, jy, jz]
}

/// Spin operators of one atom in the coupled |F, m⟩ basis.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    basis: AtomBasis,
    pub s: [CMat; 3],
    pub i: [CMat; 3],
    pub f: [CMat; 3],
    pub pi_a: CMat,
    pub pi_b: CMat,
    /// Π_a (F_x + i F_y) Π_a
    pub f_plus_a: CMat,
    /// Π_b (F_x + i F_y) Π_b
    pub f_plus_b: CMat,
    /// Manifold of each basis index.
    manifold: Arc<[Manifold]>,
}

impl OperatorSet {
    pub fn new(basis: &AtomBasis) -> Self {
        let two_i = basis.spin().two_i() as i32;
        let ni = (two_i + 1) as usize;
        let dim = basis.dim();
        let id_i = CMat::identity(ni, ni);
        let id_s = CMat::identity(2, 2);
        let s_elec = angular_momentum(1);
        let i_nuc = angular_momentum(two_i);

        // Rows: coupled levels; columns: product states |m_I, m_S⟩, m_I major.
        let mut u = DMatrix::<f64>::zeros(dim, dim);
        for (r, lvl) in basis.levels().iter().enumerate() {
            for a in 0..ni {
                let two_mi = two_i - 2 * a as i32;
                for b in 0..2 {
                    let two_ms = 1 - 2 * b as i32;
                    u[(r, a * 2 + b)] =
                        clebsch_gordan(two_i, two_mi, 1, two_ms, lvl.two_f, lvl.two_m);
                }
            }
        }
        let u = u.map(re);
        let ut = u.adjoint();
        let coupled = |op: CMat| &u * op * &ut;

        let s: [CMat; 3] = std::array::from_fn(|k| coupled(kron(&id_i, &s_elec[k])));
        let i: [CMat; 3] = std::array::from_fn(|k| coupled(kron(&i_nuc[k], &id_s)));
        let f: [CMat; 3] = std::array::from_fn(|k| &s[k] + &i[k]);

        let manifold: Arc<[Manifold]> = basis.levels().iter().map(|l| l.manifold).collect();
        let proj = |which: Manifold| {
            let diag = manifold.iter().map(|&m| re(if m == which { 1.0 } else { 0.0 }));
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(dim, diag))
        };
        let pi_a = proj(Manifold::Upper);
        let pi_b = proj(Manifold::Lower);
        let f_plus = &f[0] + &f[1] * I;
        let f_plus_a = &pi_a * &f_plus * &pi_a;
        let f_plus_b = &pi_b * &f_plus * &pi_b;

        Self { basis: basis.clone(), s, i, f, pi_a, pi_b, f_plus_a, f_plus_b, manifold }
    }

    pub fn for_spin(spin: NuclearSpin) -> Self {
        Self::new(&AtomBasis::new(spin))
    }

    pub fn basis(&self) -> &AtomBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn manifold_of(&self, index: usize) -> Manifold {
        self.manifold[index]
    }

    pub fn f_dot(&self, n: [f64; 3]) -> CMat {
        dot(&self.f, n)
    }

    pub fn s_dot(&self, n: [f64; 3]) -> CMat {
        dot(&self.s, n)
    }

    /// F_x + i F_y over both manifolds (block-diagonal part only).
    pub fn f_plus(&self) -> CMat {
        &self.f_plus_a + &self.f_plus_b
    }
}

pub(crate) fn dot(ops: &[CMat; 3], n: [f64; 3]) -> CMat {
    ops[0].scale(n[0]) + ops[1].scale(n[1]) + ops[2].scale(n[2])
}

/// Secular Zeeman Hamiltonian: both manifolds precess at γ_e/(2I+1), in
/// opposite senses, with no inter-manifold matrix elements.
pub fn manifold_hamiltonian(ops: &OperatorSet, b: [f64; 3], gamma_e: f64) -> CMat {
    let gamma = gamma_e / ops.basis().spin().multiplicity() as f64;
    let fb = ops.f_dot(b);
    let dim = ops.dim();
    let mut h = CMat::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let (mr, mc) = (ops.manifold_of(r), ops.manifold_of(c));
            if mr == mc {
                h[(r, c)] = fb[(r, c)] * (gamma * mr.sign());
            }
        }
    }
    h
}

/// Zeroes the inter-manifold (hyperfine) coherences.
pub fn project_block_diagonal(ops: &OperatorSet, rho: &CMat) -> CMat {
    let mut out = rho.clone();
    for r in 0..ops.dim() {
        for c in 0..ops.dim() {
            if ops.manifold_of(r) != ops.manifold_of(c) {
                out[(r, c)] = C64::new(0.0, 0.0);
            }
        }
    }
    out
}
