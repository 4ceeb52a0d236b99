use super::OperatorSet;
use crate::linalg::{kron, CMat};

/// Operators on the two-atom space `a ⊗ b`.
#[derive(Debug, Clone)]
pub struct PairOperatorSet {
    pub a: OperatorSet,
    pub b: OperatorSet,
    /// Electron singlet projector 1/4 − S_a·S_b.
    pub pi_s: CMat,
    pub pi_t: CMat,
}

impl PairOperatorSet {
    pub fn new(a: &OperatorSet, b: &OperatorSet) -> Self {
        let mut sa_sb = CMat::zeros(a.dim() * b.dim(), a.dim() * b.dim());
        for k in 0..3 {
            sa_sb += kron(&a.s[k], &b.s[k]);
        }
        let n = sa_sb.nrows();
        let id = CMat::identity(n, n);
        let pi_s = id.scale(0.25) - sa_sb;
        let pi_t = &id - &pi_s;
        Self { a: a.clone(), b: b.clone(), pi_s, pi_t }
    }

    pub fn dim(&self) -> usize {
        self.a.dim() * self.b.dim()
    }

    /// A ⊗ 1
    pub fn lift_a(&self, op: &CMat) -> CMat {
        kron(op, &CMat::identity(self.b.dim(), self.b.dim()))
    }

    /// 1 ⊗ B
    pub fn lift_b(&self, op: &CMat) -> CMat {
        kron(&CMat::identity(self.a.dim(), self.a.dim()), op)
    }

    pub fn total_f(&self, k: usize) -> CMat {
        self.lift_a(&self.a.f[k]) + self.lift_b(&self.b.f[k])
    }

    /// Electron swap X = Π_T − Π_S.
    pub fn electron_swap(&self) -> CMat {
        &self.pi_t - &self.pi_s
    }

    /// (2I_a+1)(2I_b+1), the expected trace of Π_S.
    pub fn singlet_rank(&self) -> f64 {
        (self.a.basis().spin().multiplicity() * self.b.basis().spin().multiplicity()) as f64
    }
}
