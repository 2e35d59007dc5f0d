//! Semi-classical states: uniform superpositions over a set of basis states.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidingState {
    pub dim: usize,
    /// Sorted, distinct basis indices; each carries amplitude `1/sqrt(|S|)`.
    pub support: Vec<usize>,
}

impl GuidingState {
    pub fn new(dim: usize, mut support: Vec<usize>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::invalid("guiding state needs a non-empty support"));
        }
        if let Some(&i) = support.iter().find(|&&i| i >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: i + 1,
            });
        }
        Ok(GuidingState { dim, support })
    }

    pub fn amplitude(&self) -> f64 {
        1.0 / (self.support.len() as f64).sqrt()
    }

    pub fn to_vector(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim];
        let a = C64::new(self.amplitude(), 0.0);
        for &i in &self.support {
            v[i] = a;
        }
        v
    }

    /// `|u> (x) |bit>` for one appended qubit.
    pub fn with_flag(&self, bit: u8) -> Self {
        GuidingState {
            dim: self.dim * 2,
            support: self.support.iter().map(|&i| 2 * i + bit as usize).collect(),
        }
    }

    /// `|u> (x) |+>` for one appended qubit.
    pub fn with_plus(&self) -> Self {
        GuidingState {
            dim: self.dim * 2,
            support: self.support.iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect(),
        }
    }

    /// `<u|v>` without materializing `u`.
    pub fn overlap(&self, v: &[C64]) -> C64 {
        let s: C64 = self.support.iter().map(|&i| v[i]).sum();
        s * self.amplitude()
    }
}
