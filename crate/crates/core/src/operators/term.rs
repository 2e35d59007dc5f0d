use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::layout::RegisterLayout;
use super::small;
use super::sparse::{SparseHermitian, Triplets};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
pub const MAX_SUPPORT: usize = 6;

/// A Hermitian block acting on a few named qubits, scaled by `coefficient`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTerm {
    pub coefficient: f64,
    pub support: Vec<usize>,
    /// Row-major `2^k x 2^k` block; qubit `support[0]` is the most significant.
    pub matrix: Vec<C64>,
    pub label: String,
}

impl LocalTerm {
    pub fn new(
        coefficient: f64,
        support: Vec<usize>,
        matrix: Vec<C64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let k = support.len();
        if k == 0 || k > MAX_SUPPORT {
            return Err(Error::invalid(format!("support size {k} not in 1..={MAX_SUPPORT}")));
        }
        let d = 1usize << k;
        if matrix.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: matrix.len(),
            });
        }
        for (i, a) in support.iter().enumerate() {
            if support[i + 1..].contains(a) {
                return Err(Error::invalid(format!("qubit {a} repeated in support")));
            }
        }
        let dev = small::hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NonHermitian(dev));
        }
        Ok(LocalTerm {
            coefficient,
            support,
            matrix,
            label: label.into(),
        })
    }

    /// Diagonal projector `|bits><bits|` on `support`.
    pub fn projector(
        coefficient: f64,
        support: Vec<usize>,
        bits: &[u8],
        label: impl Into<String>,
    ) -> Result<Self> {
        Self::new(coefficient, support, small::projector_bits(bits), label)
    }

    pub fn locality(&self) -> usize {
        self.support.len()
    }

    /// The same term with an extra qubit appended to the support, carrying `block`.
    pub fn tensor_with(&self, qubit: usize, block: &[C64]) -> Result<Self> {
        let mut support = self.support.clone();
        support.push(qubit);
        Self::new(
            self.coefficient,
            support,
            small::kron(&self.matrix, block),
            self.label.clone(),
        )
    }

    /// The term with every support index moved by `f`.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> Self {
        LocalTerm {
            support: self.support.iter().map(|&q| f(q)).collect(),
            ..self.clone()
        }
    }
}

/// Embeds `coefficient * matrix` acting on `support` into the full register.
pub fn embed(term: &LocalTerm, layout: &RegisterLayout) -> Result<SparseHermitian> {
    let mut t = Triplets::new(layout.dim());
    embed_into(term, layout, 1.0, &mut t)?;
    t.build()
}

pub(crate) fn embed_into(
    term: &LocalTerm,
    layout: &RegisterLayout,
    scale: f64,
    out: &mut Triplets,
) -> Result<()> {
    let n = layout.total();
    for &q in &term.support {
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, total: n });
        }
    }
    let k = term.support.len();
    let d = 1usize << k;
    let shifts: Vec<usize> = term.support.iter().map(|&q| layout.shift(q)).collect();
    let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
    let scatter = |local: usize| -> usize {
        let mut g = 0;
        for (i, s) in shifts.iter().enumerate() {
            if (local >> (k - 1 - i)) & 1 == 1 {
                g |= 1 << s;
            }
        }
        g
    };
    let offsets: Vec<usize> = (0..d).map(scatter).collect();
    let nz: Vec<(usize, usize, C64)> = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, term.matrix[i * d + j] * (term.coefficient * scale)))
        .filter(|(_, _, v)| v.norm() > 0.0)
        .collect();
    let dim = layout.dim();
    for rest in 0..dim {
        if rest & mask != 0 {
            continue;
        }
        for &(i, j, v) in &nz {
            let (r, c) = (rest | offsets[i], rest | offsets[j]);
            if r <= c {
                out.push(r, c, v);
            }
        }
    }
    Ok(())
}

/// A sum of local terms over one layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSum {
    pub layout: RegisterLayout,
    pub terms: Vec<LocalTerm>,
    /// Declared bound on the support size of any term.
    pub bound: usize,
}

impl TermSum {
    pub fn new(layout: RegisterLayout, bound: usize) -> Self {
        TermSum {
            layout,
            terms: Vec::new(),
            bound,
        }
    }

    pub fn push(&mut self, term: LocalTerm) -> Result<()> {
        if term.locality() > self.bound {
            return Err(Error::invalid(format!(
                "term `{}` has locality {} above the bound {}",
                term.label,
                term.locality(),
                self.bound
            )));
        }
        let n = self.layout.total();
        if let Some(&q) = term.support.iter().find(|&&q| q >= n) {
            return Err(Error::QubitOutOfRange { index: q, total: n });
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn locality(&self) -> usize {
        self.terms.iter().map(LocalTerm::locality).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coefficient *= s;
        }
        out
    }

    /// Appends the terms of `other`, which must share the layout.
    pub fn extend(&mut self, other: &TermSum) -> Result<()> {
        if other.layout != self.layout {
            return Err(Error::invalid("term sums have different layouts"));
        }
        self.bound = self.bound.max(other.bound);
        self.terms.extend(other.terms.iter().cloned());
        Ok(())
    }

    pub fn assemble(&self) -> Result<SparseHermitian> {
        let dim = self.layout.dim();
        let est: usize = self
            .terms
            .iter()
            .map(|t| (dim >> t.locality()) * (1 << (2 * t.locality())) / 2)
            .sum();
        let mut trip = Triplets::with_capacity(dim, est.min(1 << 26));
        for t in &self.terms {
            embed_into(t, &self.layout, 1.0, &mut trip)?;
        }
        trip.build()
    }

    /// Assembles only the terms whose label satisfies `keep`.
    pub fn assemble_filtered(&self, keep: impl Fn(&str) -> bool) -> Result<SparseHermitian> {
        let mut trip = Triplets::new(self.layout.dim());
        for t in self.terms.iter().filter(|t| keep(&t.label)) {
            embed_into(t, &self.layout, 1.0, &mut trip)?;
        }
        trip.build()
    }
}

/// Assembles `sum_i s_i * S_i` for term sums sharing one layout.
pub fn assemble_weighted(parts: &[(f64, &TermSum)]) -> Result<SparseHermitian> {
    let layout = match parts.first() {
        Some((_, s)) => s.layout.clone(),
        None => return Err(Error::invalid("no term sums to assemble")),
    };
    let mut trip = Triplets::new(layout.dim());
    for (s, sum) in parts {
        if sum.layout != layout {
            return Err(Error::invalid("term sums have different layouts"));
        }
        for t in &sum.terms {
            embed_into(t, &layout, *s, &mut trip)?;
        }
    }
    trip.build()
}
