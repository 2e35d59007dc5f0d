//! Two-local clock Hamiltonian
//! `H = J_in H_in + J_clock H_clock + J1 H_prop1 + J2 H_prop2 + (T+M) H_out`
//! built from a regularized circuit, with its history and guiding states.

mod cascade;
mod schedule;

pub use cascade::{block_form, Cascade};
pub use schedule::{
    f_poly, schedule, schur_poly, CoefficientSchedule, HierarchyCheck, ScheduleNorms, ScheduleRule,
    OVERFLOW_GUARD, PROP2_MARGIN,
};

use num_complex::Complex64 as C64;

use crate::circuits::RegularizedCircuit;
use crate::clock;
use crate::error::{Error, Result};
use crate::operators::small::{self, gates};
use crate::operators::{assemble_weighted, LocalTerm, RegisterLayout, SparseHermitian, TermSum};
use crate::state::GuidingState;

pub const LOCALITY: usize = 2;

#[derive(Clone, Debug)]
pub struct TwoLocalInstance {
    pub circuit: RegularizedCircuit,
    pub layout: RegisterLayout,
    pub h_in: TermSum,
    pub h_clock: TermSum,
    /// Unweighted; the assembled Hamiltonian carries it with weight `T+M`.
    pub h_out: TermSum,
    pub h_prop1: TermSum,
    /// `H_qubit,t` and `H_time,t` members, labelled by time.
    pub h_prop2: TermSum,
    pub epsilon: f64,
}

fn term(coefficient: f64, support: Vec<usize>, matrix: Vec<C64>, label: &str) -> Result<LocalTerm> {
    LocalTerm::new(coefficient, support, matrix, label)
}

/// `|10><10|` on two qubits.
fn p10() -> Vec<C64> {
    small::kron(&gates::p1(), &gates::p0())
}

/// `|11><00| + |00><11|` on two qubits.
fn double_flip() -> Vec<C64> {
    small::plus_adjoint(&small::kron(&gates::raise(), &gates::raise()))
}

/// `H_time,t` members for clock qubits addressed by `c(j)`, `j` 1-based.
pub fn time_terms(t: usize, c: &dyn Fn(usize) -> usize) -> Result<Vec<LocalTerm>> {
    let label = format!("H_time,{t}");
    let e = 1.0 / 8.0;
    let mut out = Vec::with_capacity(12);
    // forward window (t..t+3) and its mirror (t-3..t)
    for a in [t, t - 3] {
        let (b, c2, d) = (a + 1, a + 2, a + 3);
        out.push(term(e, vec![c(a), c(b)], p10(), &label)?);
        out.push(term(6.0 * e, vec![c(b), c(c2)], p10(), &label)?);
        out.push(term(e, vec![c(c2), c(d)], p10(), &label)?);
        out.push(term(2.0 * e, vec![c(b), c(c2)], double_flip(), &label)?);
        out.push(term(e, vec![c(b)], gates::x(), &label)?);
        out.push(term(e, vec![c(c2)], gates::x(), &label)?);
    }
    Ok(out)
}

/// `H_qubit,t` members: `(1/2)(-2|0><0|_f - 2|0><0|_s + |1><1|_f + |1><1|_s) (x) X_t`.
pub fn qubit_terms(t: usize, first: usize, second: usize, clock_t: usize) -> Result<Vec<LocalTerm>> {
    let label = format!("H_qubit,{t}");
    let mut out = Vec::with_capacity(4);
    for q in [first, second] {
        out.push(term(-1.0, vec![q, clock_t], small::kron(&gates::p0(), &gates::x()), &label)?);
        out.push(term(0.5, vec![q, clock_t], small::kron(&gates::p1(), &gates::x()), &label)?);
    }
    Ok(out)
}

impl TwoLocalInstance {
    /// Builds every term family literally from the circuit.
    pub fn build(c: &RegularizedCircuit) -> Result<Self> {
        c.check_cz_clearance()?;
        let tm = c.total_steps();
        if tm < 2 {
            return Err(Error::precondition("the clock needs at least two steps"));
        }
        let (n, r) = (c.base.n, c.base.r);
        let layout = RegisterLayout::new(&[("A", n), ("B", r), ("C", tm)])?;
        let sys = n + r;
        let ck = move |j: usize| sys + j - 1;

        let mut h_in = TermSum::new(layout.clone(), LOCALITY);
        for q in 0..sys {
            let bit = if q < n { c.base.x[q] } else { 0 };
            let wrong = if bit == 0 { gates::p1() } else { gates::p0() };
            h_in.push(term(1.0, vec![q, ck(2)], small::kron(&wrong, &gates::p0()), "H_in")?)?;
        }
        h_in.push(term(1.0, vec![ck(1)], gates::p0(), "H_in")?)?;

        let mut h_clock = TermSum::new(layout.clone(), LOCALITY);
        for j in 1..tm {
            let m = small::kron(&gates::p0(), &gates::p1());
            h_clock.push(term(1.0, vec![ck(j), ck(j + 1)], m, "H_clock")?)?;
        }

        let mut h_out = TermSum::new(layout.clone(), LOCALITY);
        let m = small::kron(&gates::p0(), &gates::p1());
        h_out.push(term(1.0, vec![crate::circuits::OUTPUT_QUBIT, ck(tm)], m, "H_out")?)?;

        let mut h_prop1 = TermSum::new(layout.clone(), LOCALITY);
        for t in c.t1().into_iter().filter(|&t| t >= 2) {
            let label = format!("H_prop,{t}");
            let g = c.gate(t);
            let q = g.targets()[0];
            h_prop1.push(term(0.5, vec![ck(t - 1), ck(t)], p10(), &label)?)?;
            if t < tm {
                h_prop1.push(term(0.5, vec![ck(t), ck(t + 1)], p10(), &label)?)?;
            } else {
                h_prop1.push(term(0.5, vec![ck(t)], gates::p1(), &label)?)?;
            }
            let hop = small::plus_adjoint(&small::kron(&g.matrix(), &gates::raise()));
            h_prop1.push(term(-0.5, vec![q, ck(t)], hop, &label)?)?;
        }

        let mut h_prop2 = TermSum::new(layout.clone(), LOCALITY);
        for &t in &c.cz_times {
            let tg = c.gate(t).targets();
            for x in qubit_terms(t, tg[0], tg[1], ck(t))? {
                h_prop2.push(x)?;
            }
            for x in time_terms(t, &ck)? {
                h_prop2.push(x)?;
            }
        }

        let epsilon = c.epsilon()?;
        Ok(TwoLocalInstance {
            circuit: c.clone(),
            layout,
            h_in,
            h_clock,
            h_out,
            h_prop1,
            h_prop2,
            epsilon,
        })
    }

    pub fn system_qubits(&self) -> usize {
        self.circuit.width()
    }

    /// `T + M`, also the number of clock qubits.
    pub fn clock_len(&self) -> usize {
        self.circuit.total_steps()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn out_weight(&self) -> f64 {
        self.clock_len() as f64
    }

    pub fn families(&self) -> [(&'static str, &TermSum); 5] {
        [
            ("H_in", &self.h_in),
            ("H_clock", &self.h_clock),
            ("H_out", &self.h_out),
            ("H_prop1", &self.h_prop1),
            ("H_prop2", &self.h_prop2),
        ]
    }

    pub fn locality(&self) -> usize {
        self.families().iter().map(|(_, s)| s.locality()).max().unwrap_or(0)
    }

    /// The weighted Hamiltonian for a coefficient schedule.
    pub fn assemble(&self, s: &CoefficientSchedule) -> Result<SparseHermitian> {
        assemble_weighted(&[
            (s.j_in, &self.h_in),
            (s.j_clock, &self.h_clock),
            (s.j1, &self.h_prop1),
            (s.j2, &self.h_prop2),
            (s.out_weight, &self.h_out),
        ])
    }

    pub fn legal_index(&self, z: usize, t: usize) -> usize {
        clock::legal_index(z, t, self.clock_len())
    }

    /// Coordinates of all `|z> (x) |t^>`, `t = 0..=T+M`, time-major.
    pub fn legal_coords(&self) -> Vec<usize> {
        clock::legal_coords(self.system_qubits(), self.clock_len(), 0..=self.clock_len())
    }

    /// `(1/sqrt(W)) sum_{t in times} U_t..U_1 |i> (x) |t^>`.
    pub fn history_from(&self, i: usize, times: std::ops::RangeInclusive<usize>) -> Result<Vec<C64>> {
        let traj = self.circuit.padded.trajectory_from(i)?;
        let w = times.clone().count();
        let s = C64::new(1.0 / (w as f64).sqrt(), 0.0);
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        for t in times {
            for (z, a) in traj[t].iter().enumerate() {
                if a.norm() > 0.0 {
                    v[self.legal_index(z, t)] += a * s;
                }
            }
        }
        Ok(v)
    }

    /// `|eta> = (1/sqrt(T+M)) sum_{t=1}^{T+M} U_t..U_1 |x,0> (x) |t^>`.
    pub fn history_state(&self) -> Result<Vec<C64>> {
        self.history_from(self.circuit.padded.input_index(), 1..=self.clock_len())
    }

    /// `|x,0> (x) (1/sqrt(M)) sum_{t=1}^{M} |t^>`.
    pub fn guiding_state(&self) -> Result<GuidingState> {
        let m = self.circuit.m();
        if m == 0 {
            return Err(Error::precondition("guiding state needs M >= 1"));
        }
        let z = self.circuit.padded.input_index();
        GuidingState::new(self.dim(), (1..=m).map(|t| self.legal_index(z, t)).collect())
    }
}

/// Shorthand for `TwoLocalInstance::build`.
pub fn build_terms(c: &RegularizedCircuit) -> Result<TwoLocalInstance> {
    TwoLocalInstance::build(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{regularize, regularize_with, Circuit, CzConjugation, Gate};
    use crate::operators::sparse;

    fn one_qubit(names: &[&str], m: usize) -> TwoLocalInstance {
        let g = names.iter().map(|n| Gate::named(0, 0, n).unwrap()).collect();
        let c = Circuit::sequential(1, 0, vec![0], g).unwrap();
        TwoLocalInstance::build(&regularize(&c, m, 1).unwrap()).unwrap()
    }

    fn cz_instance(conj: CzConjugation) -> TwoLocalInstance {
        let g = vec![Gate::cz(0, 0, 1).unwrap(), Gate::named(0, 0, "H").unwrap()];
        let c = Circuit::sequential(2, 0, vec![0, 0], g).unwrap();
        TwoLocalInstance::build(&regularize_with(&c, 4, 3, conj).unwrap()).unwrap()
    }

    fn energy(s: &TermSum, v: &[C64]) -> f64 {
        s.assemble().unwrap().expectation(v)
    }

    #[test]
    fn history_energies() {
        for (names, eps) in [(&["I"][..], 1.0), (&["X"][..], 0.0), (&["H"][..], 0.5)] {
            let inst = one_qubit(names, 4);
            assert!((inst.epsilon - eps).abs() < 1e-12);
            let eta = inst.history_state().unwrap();
            assert!((sparse::norm(&eta) - 1.0).abs() < 1e-12);
            for s in [&inst.h_in, &inst.h_clock, &inst.h_prop1, &inst.h_prop2] {
                assert!(energy(s, &eta).abs() < 1e-10);
            }
            assert!((energy(&inst.h_out, &eta) * inst.out_weight() - eps).abs() < 1e-9);
        }
    }

    #[test]
    fn prop1_annihilates_history_on_legal_space() {
        let inst = one_qubit(&["H", "T", "X"], 4);
        let eta = inst.history_state().unwrap();
        let r = inst.h_prop1.assemble().unwrap().matvec(&eta);
        let legal: f64 = inst.legal_coords().iter().map(|&i| r[i].norm_sqr()).sum();
        assert!(legal.sqrt() < 1e-10);
        // the one-qubit clock flips leak into illegal clock states
        assert!(sparse::norm(&r) > 0.1);
    }

    #[test]
    fn terms_are_two_local() {
        let inst = cz_instance(CzConjugation::ZConjugated);
        assert_eq!(inst.locality(), 2);
        assert_eq!(inst.layout.total(), 12);
    }

    #[test]
    fn cz_history_energy_is_epsilon() {
        let inst = cz_instance(CzConjugation::ZConjugated);
        let eta = inst.history_state().unwrap();
        assert!(energy(&inst.h_prop2, &eta).abs() < 1e-10);
        assert!((energy(&inst.h_out, &eta) * inst.out_weight() - 0.5).abs() < 1e-9);
    }

    /// Independent dense assembly of the printed sixteen-term `H_time,t`.
    #[test]
    fn time_term_matches_dense_oracle() {
        let len = 8;
        let t = 4;
        let layout = RegisterLayout::flat(len).unwrap();
        let ck = |j: usize| j - 1;
        let mut sum = TermSum::new(layout, 2);
        for x in time_terms(t, &ck).unwrap() {
            sum.push(x).unwrap();
        }
        let got = sum.assemble().unwrap().to_dense();
        let dim = 1usize << len;
        let bit = |i: usize, j: usize| (i >> (len - j)) & 1;
        let mut want = vec![0.0; dim * dim];
        let mut add = |r: usize, c: usize, v: f64| want[r * dim + c] += v / 8.0;
        for i in 0..dim {
            let p10 = |a: usize, b: usize| (bit(i, a) == 1 && bit(i, b) == 0) as u8 as f64;
            add(i, i, p10(t, t + 1) + 6.0 * p10(t + 1, t + 2) + p10(t + 2, t + 3));
            add(i, i, p10(t - 3, t - 2) + 6.0 * p10(t - 2, t - 1) + p10(t - 1, t));
            for (a, b) in [(t + 1, t + 2), (t - 2, t - 1)] {
                let flip = (1 << (len - a)) | (1 << (len - b));
                // |11><00| + |00><11|
                if bit(i, a) == bit(i, b) {
                    add(i ^ flip, i, 2.0);
                }
                for q in [a, b] {
                    add(i ^ (1 << (len - q)), i, 1.0);
                }
            }
        }
        for r in 0..dim {
            for c in 0..dim {
                assert!((got[(r, c)].re - want[r * dim + c]).abs() < 1e-14, "({r},{c})");
                assert_eq!(got[(r, c)].im, 0.0);
            }
        }
    }

    #[test]
    fn guiding_overlap_closed_form() {
        for (m, names) in [(6, &["X", "H"][..]), (4, &["H", "X"][..])] {
            let inst = one_qubit(names, m);
            let eta = inst.history_state().unwrap();
            let u = inst.guiding_state().unwrap();
            let t = names.len() as f64;
            let got = u.overlap(&eta).norm_sqr();
            assert!((got - m as f64 / (m as f64 + t)).abs() < 1e-12);
        }
    }

    #[test]
    fn clearance_enforced() {
        let g = vec![Gate::cz(0, 0, 1).unwrap()];
        let c = Circuit::sequential(2, 0, vec![0, 0], g).unwrap();
        // first lattice point 2 + 1 = 3 leaves only two steps before the CZ
        let r = regularize(&c, 2, 1).unwrap();
        assert!(TwoLocalInstance::build(&r).is_err());
    }
}
