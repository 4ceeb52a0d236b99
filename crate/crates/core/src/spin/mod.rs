//! Level structure, spin operators and states of an alkali-like atom with
//! electron spin 1/2 and half-integer nuclear spin I.

mod cg;
mod operators;
mod pair;
mod state;

pub use cg::clebsch_gordan;
pub use operators::{manifold_hamiltonian, project_block_diagonal, OperatorSet};
pub use pair::PairOperatorSet;
pub use state::{rotation_operator, spin_temperature_state, stretched_state, DensityMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nuclear spin stored as `2I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct NuclearSpin {
    two_i: u32,
}

impl NuclearSpin {
    pub const HALF: NuclearSpin = NuclearSpin { two_i: 1 };
    pub const THREE_HALVES: NuclearSpin = NuclearSpin { two_i: 3 };

    /// `two_i` must be odd and positive.
    pub fn new(two_i: u32) -> Result<Self> {
        if two_i == 0 || two_i.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "2I must be a positive odd integer, got {two_i}"
            )));
        }
        Ok(Self { two_i })
    }

    pub fn two_i(self) -> u32 {
        self.two_i
    }

    pub fn value(self) -> f64 {
        self.two_i as f64 / 2.0
    }

    /// `2I + 1`, the ratio between γ_e and the low-polarization manifold rate
    /// in the absence of spin exchange.
    pub fn multiplicity(self) -> usize {
        self.two_i as usize + 1
    }
}

impl TryFrom<u32> for NuclearSpin {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<NuclearSpin> for u32 {
    fn from(s: NuclearSpin) -> u32 {
        s.two_i
    }
}

impl std::fmt::Display for NuclearSpin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/2", self.two_i)
    }
}

/// Hyperfine manifold: `Upper` is F = I + 1/2, `Lower` is F = I − 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Upper,
    Lower,
}

impl Manifold {
    /// Sense of precession under the secular Hamiltonian.
    pub fn sign(self) -> f64 {
        match self {
            Manifold::Upper => 1.0,
            Manifold::Lower => -1.0,
        }
    }
}

/// A coupled-basis level |F, m⟩, with doubled quantum numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Level {
    pub two_f: i32,
    pub two_m: i32,
    pub manifold: Manifold,
}

impl Level {
    pub fn f(&self) -> f64 {
        self.two_f as f64 / 2.0
    }
    pub fn m(&self) -> f64 {
        self.two_m as f64 / 2.0
    }
}

/// Ordered |F, m⟩ levels: upper manifold first, m descending in each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomBasis {
    spin: NuclearSpin,
    levels: Vec<Level>,
}

impl AtomBasis {
    pub fn new(spin: NuclearSpin) -> Self {
        let two_i = spin.two_i() as i32;
        let mut levels = Vec::with_capacity(2 * (two_i as usize + 1));
        for (two_f, manifold) in [(two_i + 1, Manifold::Upper), (two_i - 1, Manifold::Lower)] {
            let mut two_m = two_f;
            while two_m >= -two_f {
                levels.push(Level { two_f, two_m, manifold });
                two_m -= 2;
            }
        }
        Self { spin, levels }
    }

    pub fn spin(&self) -> NuclearSpin {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Number of levels in the upper manifold (`2I + 2`).
    pub fn upper_dim(&self) -> usize {
        self.spin.two_i() as usize + 2
    }

    pub fn lower_dim(&self) -> usize {
        self.spin.two_i() as usize
    }

    pub fn index_of(&self, two_f: i32, two_m: i32) -> Option<usize> {
        self.levels.iter().position(|l| l.two_f == two_f && l.two_m == two_m)
    }
}

/// Shorthand for [`AtomBasis::new`].
pub fn build_basis(spin: NuclearSpin) -> AtomBasis {
    AtomBasis::new(spin)
}
