use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DENSE_QUBIT_CAP: usize = 14;
pub const SPARSE_QUBIT_CAP: usize = 24;
pub const CAP_ENV: &str = "GLHKIT_MAX_QUBITS";

/// Qubit cap for sparse materialization, overridable through `GLHKIT_MAX_QUBITS`.
pub fn sparse_qubit_cap() -> usize {
    std::env::var(CAP_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(SPARSE_QUBIT_CAP)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Named registers laid out contiguously; qubit 0 is the most significant
/// bit of a basis-state index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    total: usize,
}

impl RegisterLayout {
    pub fn new(regs: &[(&str, usize)]) -> Result<Self> {
        let mut layout = RegisterLayout {
            registers: Vec::new(),
            total: 0,
        };
        for (name, len) in regs {
            layout = layout.with_register(name, *len)?;
        }
        Ok(layout)
    }

    /// A layout with a single register `Q` of `n` qubits.
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(&[("Q", n)])
    }

    pub fn with_register(mut self, name: &str, len: usize) -> Result<Self> {
        if self.registers.iter().any(|r| r.name == name) {
            return Err(Error::invalid(format!("duplicate register name `{name}`")));
        }
        let total = self.total + len;
        let cap = sparse_qubit_cap();
        if total > cap {
            return Err(Error::CapExceeded {
                qubits: total,
                cap,
                backend: "sparse",
            });
        }
        self.registers.push(Register {
            name: name.to_string(),
            start: self.total,
            len,
        });
        self.total = total;
        Ok(self)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dim(&self) -> usize {
        1usize << self.total
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn len_of(&self, name: &str) -> usize {
        self.register(name).map_or(0, |r| r.len)
    }

    /// Global index of qubit `i` inside register `name`.
    pub fn qubit(&self, name: &str, i: usize) -> Result<usize> {
        let r = self
            .register(name)
            .ok_or_else(|| Error::invalid(format!("no register `{name}`")))?;
        if i >= r.len {
            return Err(Error::QubitOutOfRange {
                index: i,
                total: r.len,
            });
        }
        Ok(r.start + i)
    }

    /// Bit position (from the least significant end) of qubit `q`.
    pub fn shift(&self, q: usize) -> usize {
        self.total - 1 - q
    }

    /// Basis index from per-qubit bit values, qubit 0 first.
    pub fn index_of(bits: &[u8]) -> usize {
        bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registers_are_contiguous() {
        let l = RegisterLayout::new(&[("A", 2), ("B", 1), ("C", 3)]).unwrap();
        assert_eq!(l.total(), 6);
        assert_eq!(l.qubit("C", 0).unwrap(), 3);
        assert_eq!(l.qubit("B", 0).unwrap(), 2);
        assert!(l.qubit("B", 1).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(RegisterLayout::new(&[("A", 1), ("A", 2)]).is_err());
    }

    #[test]
    fn cap_enforced() {
        assert!(RegisterLayout::new(&[("A", SPARSE_QUBIT_CAP + 1)]).is_err());
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let l = RegisterLayout::flat(3).unwrap();
        assert_eq!(l.shift(0), 2);
        assert_eq!(RegisterLayout::index_of(&[1, 0, 0]), 4);
    }
}
