//! Excited-state gadget: `H^(c) = H^(z) (x) |0><0|_F + H^(s) (x) |1><1|_F`.
//! The flag `F` is appended last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::eigen::{eigh, eigvalsh, ground_energy};
use crate::operators::small::{self, gates};
use crate::operators::{operator_norm, LocalTerm, RegisterLayout, SparseHermitian, TermSum};
use crate::state::GuidingState;

/// `H^(s)` lies in `[-1/4, 1/4]` only when `λ₀(H)` is at least this.
pub const QUARTER_BAND_FLOOR: f64 = -0.25;

/// How close `λ₀(H^(s))` may come to a ladder value before the level is ambiguous.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ExcitedInstance {
    pub base: TermSum,
    pub base_ground: f64,
    pub norm: f64,
    pub c: usize,
    pub d: usize,
    pub hz: TermSum,
    pub hs: TermSum,
    pub hc: TermSum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub c: usize,
    pub lambda_c: f64,
    pub lambda0_s: f64,
    pub difference: f64,
    pub negative_count: usize,
    pub min_negative: f64,
}

/// `ceil(log2 c)`.
pub fn ladder_depth(c: usize) -> usize {
    c.next_power_of_two().trailing_zeros() as usize
}

fn identity_term(coefficient: f64, label: &str) -> Result<LocalTerm> {
    LocalTerm::new(coefficient, vec![0], small::identity(2), label)
}

/// `sum_{i<=d} 2^i |1><1|_i + sum_{i>d} 2^(d+1) |1><1|_i - (c - 1/2) I`.
pub fn build_hz(layout: &RegisterLayout, c: usize) -> Result<TermSum> {
    let n = layout.total();
    if c == 0 || (n < usize::BITS as usize && c > 1usize << n) {
        return Err(Error::invalid(format!("level {c} not in 1..=2^{n}")));
    }
    let d = ladder_depth(c);
    let mut out = TermSum::new(layout.clone(), 1);
    for i in 0..n {
        let w = (1u64 << i.min(d + 1)) as f64;
        out.push(LocalTerm::new(w, vec![i], gates::p1(), "H_z")?)?;
    }
    out.push(identity_term(-(c as f64 - 0.5), "H_z")?)?;
    Ok(out)
}

/// `(1/2)(H + I/4)/(‖H‖ + 1/4) - I/4`.
pub fn build_hs(h: &SparseHermitian) -> Result<SparseHermitian> {
    let norm = operator_norm(h)?;
    let s = 0.5 / (norm + 0.25);
    Ok(h.scaled(s).shifted(0.25 * s - 0.25))
}

/// The compressed operator as a term sum, given `‖H‖`.
pub fn build_hs_terms(h: &TermSum, norm: f64) -> Result<TermSum> {
    let s = 0.5 / (norm + 0.25);
    let mut out = h.scaled(s);
    out.push(identity_term(0.25 * s - 0.25, "H_s")?)?;
    Ok(out)
}

pub fn build_hc(h: &TermSum, c: usize) -> Result<ExcitedInstance> {
    let dense = h.assemble()?;
    let base_ground = ground_energy(&dense)?;
    let norm = operator_norm(&dense)?;
    let s = 0.5 / (norm + 0.25);
    if s * (base_ground + 0.25) - 0.25 <= -0.5 + BOUNDARY_TOL {
        return Err(Error::precondition("H^(s) ground level reaches the ladder value -1/2"));
    }
    let hz = build_hz(&h.layout, c)?;
    let hs = build_hs_terms(h, norm)?;
    let layout = h.layout.clone().with_register("F", 1)?;
    let f = layout.qubit("F", 0)?;
    let mut hc = TermSum::new(layout, h.locality().max(1) + 1);
    for (part, flag) in [(&hz, gates::p0()), (&hs, gates::p1())] {
        for t in &part.terms {
            hc.push(t.tensor_with(f, &flag)?)?;
        }
    }
    Ok(ExcitedInstance {
        base: h.clone(),
        base_ground,
        norm,
        c,
        d: ladder_depth(c),
        hz,
        hs,
        hc,
    })
}

impl ExcitedInstance {
    /// True iff `eig(H^(s))` lies in `[-1/4, 1/4]`.
    pub fn in_quarter_band(&self) -> bool {
        self.base_ground >= QUARTER_BAND_FLOOR - 1e-12
    }

    /// `|u> (x) |1>_F`.
    pub fn lift(&self, u: &GuidingState) -> GuidingState {
        u.with_flag(1)
    }

    /// Dense check that level `c` of `H^(c)` is the ground level of `H^(s)`.
    pub fn level_report(&self) -> Result<LevelReport> {
        let z = eigvalsh(&self.hz.assemble()?)?;
        let s = eigvalsh(&self.hs.assemble()?)?;
        let full = eigvalsh(&self.hc.assemble()?)?;
        let lambda0_s = s[0];
        if z.iter().any(|v| (v - lambda0_s).abs() <= BOUNDARY_TOL) {
            return Err(Error::precondition("H^(s) ground level touches the ladder"));
        }
        let lambda_c = full[self.c];
        let negatives: Vec<f64> = z.iter().copied().filter(|&v| v < 0.0).collect();
        Ok(LevelReport {
            c: self.c,
            lambda_c,
            lambda0_s,
            difference: (lambda_c - lambda0_s).abs(),
            negative_count: negatives.len(),
            min_negative: negatives.first().copied().unwrap_or(f64::NAN),
        })
    }

    /// `|<u^(c)|ψ_c>|^2` summed over the degeneracy cluster of level `c`.
    pub fn lifted_fidelity(&self, u: &GuidingState) -> Result<f64> {
        let (vals, vecs) = eigh(&self.hc.assemble()?)?;
        let r = crate::operators::eigen::cluster_of(&vals, self.c, BOUNDARY_TOL);
        let lifted = self.lift(u);
        Ok(r.map(|i| lifted.overlap(&vecs[i]).norm_sqr()).sum())
    }
}
