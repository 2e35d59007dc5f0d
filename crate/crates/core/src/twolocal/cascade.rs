use num_complex::Complex64 as C64;

use super::TwoLocalInstance;
use crate::error::{Error, Result};
use crate::operators::{restrict, SparseHermitian, SubspaceBasis, Triplets};

/// The nested subspaces `S_legal ⊃ S_prop1 ⊃ S_prop ⊃ S_in`.
#[derive(Clone, Debug)]
pub struct Cascade {
    pub legal: SubspaceBasis,
    pub prop1: SubspaceBasis,
    pub prop: SubspaceBasis,
    pub input: SubspaceBasis,
}

impl TwoLocalInstance {
    /// Clock ranges on which `H_prop1|S_legal` is block diagonal: `{0}`, then
    /// maximal runs joined by single-qubit propagation terms, cut at each CZ.
    pub fn prop1_blocks(&self) -> Vec<std::ops::RangeInclusive<usize>> {
        let mut out = vec![0..=0];
        let mut start = 1;
        for &c in &self.circuit.cz_times {
            out.push(start..=c - 1);
            start = c;
        }
        out.push(start..=self.clock_len());
        out
    }

    pub fn cascade(&self) -> Result<Cascade> {
        let dim = self.dim();
        let states = 1usize << self.system_qubits();
        let legal = SubspaceBasis::coordinate("S_legal", dim, &self.legal_coords());

        let mut cols = Vec::with_capacity(states * (self.circuit.t2() + 2));
        for b in self.prop1_blocks() {
            for i in 0..states {
                cols.push(self.history_from(i, b.clone())?);
            }
        }
        let prop1 = SubspaceBasis::new("S_prop1", dim, cols)?;

        let cols = (0..states)
            .map(|i| self.history_from(i, 1..=self.clock_len()))
            .collect::<Result<Vec<_>>>()?;
        let prop = SubspaceBasis::new("S_prop", dim, cols)?;
        let input = SubspaceBasis::new("S_in", dim, vec![self.history_state()?])?;
        Ok(Cascade {
            legal,
            prop1,
            prop,
            input,
        })
    }

    /// `sum_ab |ab><ab|_{f,s} (x) w_ab |v_ab><v_ab|` on the clock pair `(t-1, t)`,
    /// with `v = |t-1^> - |t^>` except `v = |t-1^> + |t^>` for `ab = 11`,
    /// and weights `2, 1/2, 1/2, 1`.
    pub fn block_form_operator(&self, t: usize) -> Result<SparseHermitian> {
        if !self.circuit.cz_times.contains(&t) {
            return Err(Error::invalid(format!("time {t} holds no CZ")));
        }
        let targets = self.circuit.gate(t).targets();
        let w = self.system_qubits();
        let bit = |z: usize, q: usize| (z >> (w - 1 - q)) & 1;
        let mut trip = Triplets::new(self.dim());
        for z in 0..1usize << w {
            let (weight, sign) = match (bit(z, targets[0]), bit(z, targets[1])) {
                (0, 0) => (2.0, -1.0),
                (1, 1) => (1.0, 1.0),
                _ => (0.5, -1.0),
            };
            let a = self.legal_index(z, t - 1);
            let b = self.legal_index(z, t);
            trip.push(a, a, C64::new(weight, 0.0));
            trip.push(b, b, C64::new(weight, 0.0));
            trip.push(a, b, C64::new(sign * weight, 0.0));
        }
        trip.build()
    }

    /// `H_time,t + H_qubit,t` for one CZ time.
    pub fn cz_terms(&self, t: usize) -> Result<SparseHermitian> {
        let q = format!("H_qubit,{t}");
        let m = format!("H_time,{t}");
        self.h_prop2.assemble_filtered(|l| l == q || l == m)
    }
}

/// Max entry difference between `(H_time,t + H_qubit,t)|S_prop1` and the
/// block form restricted to the same space.
pub fn block_form(inst: &TwoLocalInstance, cascade: &Cascade, t: usize) -> Result<f64> {
    let got = restrict(&inst.cz_terms(t)?, &cascade.prop1)?;
    let want = restrict(&inst.block_form_operator(t)?, &cascade.prop1)?;
    Ok(got.max_abs_diff(&want))
}
