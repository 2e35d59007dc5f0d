//! Circuits of single-qubit gates and CZ, their statevector simulation, and
//! the pre-idling / CZ-lattice regularization used by the clock constructions.

mod json;
mod regularize;

pub use json::{CircuitJson, GateJson};
pub use regularize::{pre_idle, regularize, regularize_with, CzConjugation, RegularizedCircuit};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operators::layout::DENSE_QUBIT_CAP;
use crate::operators::small::{self, gates};

const UNITARY_TOL: f64 = 1e-12;
/// Qubit whose `|1>` outcome means "accept".
pub const OUTPUT_QUBIT: usize = 0;

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    Single {
        target: usize,
        matrix: Vec<C64>,
        name: Option<String>,
    },
    Cz {
        first: usize,
        second: usize,
    },
    Identity {
        target: usize,
    },
}

/// A gate applied at a 1-based time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub time: usize,
    pub kind: GateKind,
}

/// Named single-qubit gate matrix.
pub fn named(name: &str) -> Result<Vec<C64>> {
    Ok(match name {
        "X" => gates::x(),
        "Y" => gates::y(),
        "Z" => gates::z(),
        "H" => gates::h(),
        "T" => gates::t(),
        "I" => gates::i2(),
        _ => return Err(Error::invalid(format!("unknown gate name `{name}`"))),
    })
}

impl Gate {
    pub fn single(time: usize, target: usize, matrix: Vec<C64>) -> Result<Self> {
        if matrix.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: matrix.len(),
            });
        }
        let dev = small::unitary_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(Error::invalid(format!("gate at time {time} is not unitary (deviation {dev:.3e})")));
        }
        Ok(Gate {
            time,
            kind: GateKind::Single {
                target,
                matrix,
                name: None,
            },
        })
    }

    pub fn named(time: usize, target: usize, name: &str) -> Result<Self> {
        if name == "I" {
            return Ok(Self::identity(time, target));
        }
        Ok(Gate {
            time,
            kind: GateKind::Single {
                target,
                matrix: named(name)?,
                name: Some(name.to_string()),
            },
        })
    }

    pub fn cz(time: usize, first: usize, second: usize) -> Result<Self> {
        if first == second {
            return Err(Error::invalid(format!("CZ at time {time} acts twice on qubit {first}")));
        }
        Ok(Gate {
            time,
            kind: GateKind::Cz { first, second },
        })
    }

    pub fn identity(time: usize, target: usize) -> Self {
        Gate {
            time,
            kind: GateKind::Identity { target },
        }
    }

    pub fn is_cz(&self) -> bool {
        matches!(self.kind, GateKind::Cz { .. })
    }

    pub fn targets(&self) -> Vec<usize> {
        match &self.kind {
            GateKind::Single { target, .. } | GateKind::Identity { target } => vec![*target],
            GateKind::Cz { first, second } => vec![*first, *second],
        }
    }

    /// The gate's block on `targets()`, first target most significant.
    pub fn matrix(&self) -> Vec<C64> {
        match &self.kind {
            GateKind::Single { matrix, .. } => matrix.clone(),
            GateKind::Identity { .. } => gates::i2(),
            GateKind::Cz { .. } => gates::cz(),
        }
    }

    pub fn with_time(&self, time: usize) -> Self {
        Gate {
            time,
            kind: self.kind.clone(),
        }
    }

    /// Applies the gate in place to a `width`-qubit statevector.
    pub fn apply(&self, width: usize, psi: &mut [C64]) {
        match &self.kind {
            GateKind::Identity { .. } => {}
            GateKind::Single { target, matrix, .. } => {
                let bit = 1usize << (width - 1 - target);
                for i in 0..psi.len() {
                    if i & bit == 0 {
                        let (a, b) = (psi[i], psi[i | bit]);
                        psi[i] = matrix[0] * a + matrix[1] * b;
                        psi[i | bit] = matrix[2] * a + matrix[3] * b;
                    }
                }
            }
            GateKind::Cz { first, second } => {
                let mask = (1usize << (width - 1 - first)) | (1usize << (width - 1 - second));
                for (i, v) in psi.iter_mut().enumerate() {
                    if i & mask == mask {
                        *v = -*v;
                    }
                }
            }
        }
    }
}

/// A circuit on `n` input and `r` work qubits run on `|x, 0>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub r: usize,
    pub x: Vec<u8>,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize, r: usize, x: Vec<u8>, gates: Vec<Gate>) -> Result<Self> {
        let c = Circuit { n, r, x, gates };
        c.validate()?;
        Ok(c)
    }

    /// Builds from a gate list, assigning times 1, 2, ... in order.
    pub fn sequential(n: usize, r: usize, x: Vec<u8>, gates: Vec<Gate>) -> Result<Self> {
        let gates = gates
            .iter()
            .enumerate()
            .map(|(i, g)| g.with_time(i + 1))
            .collect();
        Self::new(n, r, x, gates)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.n {
            return Err(Error::invalid(format!(
                "input has {} bits but the input register has {}",
                self.x.len(),
                self.n
            )));
        }
        if self.x.iter().any(|&b| b > 1) {
            return Err(Error::invalid("input bits must be 0 or 1"));
        }
        if self.width() == 0 {
            return Err(Error::invalid("circuit has no qubits"));
        }
        for (i, g) in self.gates.iter().enumerate() {
            if g.time != i + 1 {
                return Err(Error::invalid(format!(
                    "gate {i} has time {} but times must run 1..T",
                    g.time
                )));
            }
            for q in g.targets() {
                if q >= self.width() {
                    return Err(Error::QubitOutOfRange {
                        index: q,
                        total: self.width(),
                    });
                }
            }
            if let GateKind::Cz { first, second } = g.kind {
                if first == second {
                    return Err(Error::invalid("CZ targets must differ"));
                }
            }
            if let GateKind::Single { matrix, .. } = &g.kind {
                if matrix.len() != 4 || small::unitary_deviation(matrix) > UNITARY_TOL {
                    return Err(Error::invalid(format!("gate at time {} is not unitary", g.time)));
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.n + self.r
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn cz_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cz()).count()
    }

    /// Basis index of `|x, 0...0>` (qubit 0 most significant).
    pub fn input_index(&self) -> usize {
        self.x
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | b as usize)
            << self.r
    }

    fn check_cap(&self) -> Result<()> {
        if self.width() > DENSE_QUBIT_CAP {
            return Err(Error::CapExceeded {
                qubits: self.width(),
                cap: DENSE_QUBIT_CAP,
                backend: "statevector",
            });
        }
        Ok(())
    }

    /// States `U_t ... U_1 |i>` for `t = 0..=T`.
    pub fn trajectory_from(&self, basis_index: usize) -> Result<Vec<Vec<C64>>> {
        self.check_cap()?;
        let dim = 1usize << self.width();
        let mut psi = vec![small::ZERO; dim];
        psi[basis_index] = small::ONE;
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(psi.clone());
        for g in &self.gates {
            g.apply(self.width(), &mut psi);
            out.push(psi.clone());
        }
        Ok(out)
    }

    pub fn trajectory(&self) -> Result<Vec<Vec<C64>>> {
        self.trajectory_from(self.input_index())
    }

    pub fn final_state(&self) -> Result<Vec<C64>> {
        Ok(self.trajectory()?.pop().expect("trajectory is never empty"))
    }

    /// Probability of reading 1 on the output qubit after the whole circuit.
    pub fn acceptance_probability(&self) -> Result<f64> {
        let psi = self.final_state()?;
        let bit = 1usize << (self.width() - 1 - OUTPUT_QUBIT);
        Ok(psi
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Dense unitary of the gate product, for small widths.
    pub fn unitary(&self) -> Result<Vec<C64>> {
        self.check_cap()?;
        let dim = 1usize << self.width();
        let mut u = small::identity(dim);
        for g in &self.gates {
            u = small::matmul(&gate_unitary(g, self.width()), &u);
        }
        Ok(u)
    }
}

/// Full `2^width` matrix of one gate, assembled by Kronecker products.
pub fn gate_unitary(g: &Gate, width: usize) -> Vec<C64> {
    match &g.kind {
        GateKind::Cz { first, second } => {
            let dim = 1usize << width;
            let mask = (1usize << (width - 1 - first)) | (1usize << (width - 1 - second));
            let mut u = small::identity(dim);
            for i in 0..dim {
                if i & mask == mask {
                    u[i * dim + i] = -small::ONE;
                }
            }
            u
        }
        _ => {
            let t = g.targets()[0];
            let m = g.matrix();
            let blocks: Vec<Vec<C64>> = (0..width)
                .map(|q| if q == t { m.clone() } else { gates::i2() })
                .collect();
            let refs: Vec<&[C64]> = blocks.iter().map(Vec::as_slice).collect();
            small::kron_all(&refs)
        }
    }
}
