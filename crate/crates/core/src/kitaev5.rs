//! Five-local clock Hamiltonian with unary clock, its weighted pre-idled form
//! `Ĥ5 = Δ(H_in + H_clock + H_prop) + H_out`, and the flag block encoding `H6`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuits::{RegularizedCircuit, OUTPUT_QUBIT};
use crate::clock;
use crate::error::{Error, Result};
use crate::operators::small::{self, gates};
use crate::operators::{assemble_weighted, LocalTerm, RegisterLayout, SparseHermitian, TermSum};
use crate::state::GuidingState;

pub const LOCALITY: usize = 5;
pub const FLAGGED_LOCALITY: usize = 6;

#[derive(Clone, Debug)]
pub struct Kitaev5Instance {
    pub circuit: RegularizedCircuit,
    pub layout: RegisterLayout,
    pub h_in: TermSum,
    pub h_out: TermSum,
    pub h_clock: TermSum,
    pub h_prop: TermSum,
}

/// Threshold metadata emitted alongside the weighted operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kitaev5Meta {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub beta_hat_const: f64,
}

/// `α̂ = (1 - α)/(T' + 1)`.
pub fn alpha_hat(alpha: f64, t_prime: usize) -> f64 {
    (1.0 - alpha) / (t_prime as f64 + 1.0)
}

/// `β̂ = const (1 - sqrt β)/T'^3`.
pub fn beta_hat(beta: f64, t_prime: usize, constant: f64) -> f64 {
    constant * (1.0 - beta.sqrt()) / (t_prime as f64).powi(3)
}

/// Clock support and block of `|t^><t^|` on a unary clock of `len` qubits.
/// Clock qubits are 1-based; the caller maps them to global indices.
fn clock_projector(t: usize, len: usize) -> (Vec<usize>, Vec<C64>) {
    if t == 0 {
        (vec![1], gates::p0())
    } else if t == len {
        (vec![len], gates::p1())
    } else {
        (vec![t, t + 1], small::kron(&gates::p1(), &gates::p0()))
    }
}

/// Clock support and block of `|t^><t-1^|`, guarded by the neighbouring bits.
fn clock_hop(t: usize, len: usize) -> (Vec<usize>, Vec<C64>) {
    match (t > 1, t < len) {
        (true, true) => (vec![t - 1, t, t + 1], small::ket_bra(0b110, 0b100, 8)),
        (false, true) => (vec![1, 2], small::ket_bra(0b10, 0b00, 4)),
        (true, false) => (vec![t - 1, t], small::ket_bra(0b11, 0b10, 4)),
        (false, false) => (vec![1], gates::raise()),
    }
}

impl Kitaev5Instance {
    pub fn build(c: &RegularizedCircuit) -> Result<Self> {
        let tp = c.total_steps();
        if tp == 0 {
            return Err(Error::precondition("the clock needs at least one step"));
        }
        let (n, r) = (c.base.n, c.base.r);
        let layout = RegisterLayout::new(&[("A", n), ("B", r), ("C", tp)])?;
        let sys = n + r;
        let ck = |j: usize| sys + j - 1;
        let global = |s: Vec<usize>| -> Vec<usize> { s.into_iter().map(ck).collect() };

        let mut h_in = TermSum::new(layout.clone(), LOCALITY);
        for q in 0..sys {
            let bit = if q < n { c.base.x[q] } else { 0 };
            let wrong = if bit == 0 { gates::p1() } else { gates::p0() };
            let m = small::kron(&wrong, &gates::p0());
            h_in.push(LocalTerm::new(1.0, vec![q, ck(1)], m, "H_in")?)?;
        }

        let mut h_out = TermSum::new(layout.clone(), LOCALITY);
        let (s, p) = clock_projector(tp, tp);
        let mut support = vec![OUTPUT_QUBIT];
        support.extend(global(s));
        h_out.push(LocalTerm::new(1.0, support, small::kron(&gates::p0(), &p), "H_out")?)?;

        let mut h_clock = TermSum::new(layout.clone(), LOCALITY);
        for j in 1..tp {
            let m = small::kron(&gates::p0(), &gates::p1());
            h_clock.push(LocalTerm::new(1.0, vec![ck(j), ck(j + 1)], m, "H_clock")?)?;
        }

        let mut h_prop = TermSum::new(layout.clone(), LOCALITY);
        for t in 1..=tp {
            let label = format!("H_prop,{t}");
            let g = c.gate(t);
            let (hs, hop) = clock_hop(t, tp);
            let mut support = g.targets();
            support.extend(global(hs));
            let m = small::plus_adjoint(&small::kron(&g.matrix(), &hop));
            h_prop.push(LocalTerm::new(-0.5, support, m, label.as_str())?)?;
            for s in [t, t - 1] {
                let (ps, pm) = clock_projector(s, tp);
                h_prop.push(LocalTerm::new(0.5, global(ps), pm, label.as_str())?)?;
            }
        }

        Ok(Kitaev5Instance {
            circuit: c.clone(),
            layout,
            h_in,
            h_out,
            h_clock,
            h_prop,
        })
    }

    /// `T' = T + M`.
    pub fn t_prime(&self) -> usize {
        self.circuit.total_steps()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn families(&self) -> [(&'static str, &TermSum); 4] {
        [
            ("H_in", &self.h_in),
            ("H_out", &self.h_out),
            ("H_clock", &self.h_clock),
            ("H_prop", &self.h_prop),
        ]
    }

    pub fn locality(&self) -> usize {
        self.families().iter().map(|(_, s)| s.locality()).max().unwrap_or(0)
    }

    /// `H5 = H_in + H_out + H_clock + H_prop`.
    pub fn h5(&self) -> Result<SparseHermitian> {
        self.weighted(1.0)
    }

    /// `Ĥ5 = Δ(H_in + H_clock + H_prop) + H_out`.
    pub fn weighted(&self, delta: f64) -> Result<SparseHermitian> {
        assemble_weighted(&[
            (delta, &self.h_in),
            (delta, &self.h_clock),
            (delta, &self.h_prop),
            (1.0, &self.h_out),
        ])
    }

    /// `Ĥ5` as one term sum.
    pub fn weighted_terms(&self, delta: f64) -> Result<TermSum> {
        let mut out = self.h_in.scaled(delta);
        out.extend(&self.h_clock.scaled(delta))?;
        out.extend(&self.h_prop.scaled(delta))?;
        out.extend(&self.h_out)?;
        Ok(out)
    }

    /// `H6 = ((α̂+β̂)/2) I (x) |0><0|_D + Ĥ5 (x) |1><1|_D` with `D` appended last.
    pub fn build_h6(&self, delta: f64, alpha_hat: f64, beta_hat: f64) -> Result<TermSum> {
        let layout = self.layout.clone().with_register("D", 1)?;
        let d = layout.qubit("D", 0)?;
        let mut out = TermSum::new(layout, FLAGGED_LOCALITY);
        let shift = 0.5 * (alpha_hat + beta_hat);
        out.push(LocalTerm::new(shift, vec![d], gates::p0(), "H6,flag0")?)?;
        for t in &self.weighted_terms(delta)?.terms {
            out.push(t.tensor_with(d, &gates::p1())?)?;
        }
        Ok(out)
    }

    pub fn meta(&self, delta: f64, alpha: f64, beta: f64, beta_hat_const: f64) -> Kitaev5Meta {
        let tp = self.t_prime();
        Kitaev5Meta {
            t: self.circuit.t(),
            m: self.circuit.m(),
            delta,
            alpha_hat: alpha_hat(alpha, tp),
            beta_hat: beta_hat(beta, tp, beta_hat_const),
            beta_hat_const,
        }
    }

    pub fn legal_index(&self, z: usize, t: usize) -> usize {
        clock::legal_index(z, t, self.t_prime())
    }

    /// `(1/sqrt(T'+1)) sum_{t=0}^{T'} U_t..U_1 |x,0> (x) |t^>`.
    pub fn history_state(&self) -> Result<Vec<C64>> {
        let traj = self.circuit.padded.trajectory()?;
        let s = 1.0 / ((self.t_prime() + 1) as f64).sqrt();
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        for (t, psi) in traj.iter().enumerate() {
            for (z, a) in psi.iter().enumerate() {
                if a.norm() > 0.0 {
                    v[self.legal_index(z, t)] += a * s;
                }
            }
        }
        Ok(v)
    }

    /// `|x,0> (x) (1/sqrt(M)) sum_{t=1}^{M} |t^>`, optionally `(x) |+>_D`.
    pub fn guiding_state(&self, with_flag: bool) -> Result<GuidingState> {
        let m = self.circuit.m();
        if m == 0 {
            return Err(Error::precondition("guiding state needs M >= 1"));
        }
        let z = self.circuit.padded.input_index();
        let u = GuidingState::new(self.dim(), (1..=m).map(|t| self.legal_index(z, t)).collect())?;
        Ok(if with_flag { u.with_plus() } else { u })
    }
}

pub fn build_h5(c: &RegularizedCircuit) -> Result<Kitaev5Instance> {
    Kitaev5Instance::build(c)
}
