use serde::{Deserialize, Serialize};

use super::{Circuit, Gate, GateKind, OUTPUT_QUBIT};
use crate::error::{Error, Result};

/// How each CZ is written into the regularized schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CzConjugation {
    /// The CZ alone.
    #[default]
    Plain,
    /// `Z_f, Z_s` on the two steps before the CZ and again on the two after.
    /// The four Z gates cancel, so semantics are unchanged.
    ZConjugated,
}

/// Clearance needed on each side of a CZ step by the two-local time terms.
pub const CZ_CLEARANCE: usize = 3;

/// A circuit padded with `M` leading identities, optionally with its CZ gates
/// placed on the lattice `L + M, 2L + M, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedCircuit {
    pub base: Circuit,
    /// Gates at times `1..=T+M`.
    pub padded: Circuit,
    pub idle: usize,
    pub interval: Option<usize>,
    pub cz_times: Vec<usize>,
    pub conjugation: CzConjugation,
}

impl RegularizedCircuit {
    /// `T + M`.
    pub fn total_steps(&self) -> usize {
        self.padded.len()
    }

    /// `T`: steps after the idle prefix.
    pub fn t(&self) -> usize {
        self.total_steps() - self.idle
    }

    pub fn m(&self) -> usize {
        self.idle
    }

    pub fn t2(&self) -> usize {
        self.cz_times.len()
    }

    /// Single-qubit time steps.
    pub fn t1(&self) -> Vec<usize> {
        (1..=self.total_steps())
            .filter(|t| !self.cz_times.contains(t))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.padded.width()
    }

    pub fn gate(&self, t: usize) -> &Gate {
        &self.padded.gates[t - 1]
    }

    pub fn acceptance_probability(&self) -> Result<f64> {
        self.padded.acceptance_probability()
    }

    /// `1 - acceptance_probability`.
    pub fn epsilon(&self) -> Result<f64> {
        Ok(1.0 - self.acceptance_probability()?)
    }

    /// Checks that every CZ leaves `CZ_CLEARANCE` clock steps on both sides.
    pub fn check_cz_clearance(&self) -> Result<()> {
        for &t in &self.cz_times {
            if t < CZ_CLEARANCE + 1 || t + CZ_CLEARANCE > self.total_steps() {
                return Err(Error::precondition(format!(
                    "CZ at time {t} needs {} clock steps on each side within 1..={}",
                    CZ_CLEARANCE,
                    self.total_steps()
                )));
            }
        }
        Ok(())
    }
}

/// Prepends `m` identity gates; CZ gates stay where they fall.
pub fn pre_idle(c: &Circuit, m: usize) -> Result<RegularizedCircuit> {
    let mut gates: Vec<Gate> = (1..=m).map(|t| Gate::identity(t, OUTPUT_QUBIT)).collect();
    gates.extend(c.gates.iter().map(|g| g.with_time(g.time + m)));
    let padded = Circuit::new(c.n, c.r, c.x.clone(), gates)?;
    let cz_times = padded.gates.iter().filter(|g| g.is_cz()).map(|g| g.time).collect();
    Ok(RegularizedCircuit {
        base: c.clone(),
        padded,
        idle: m,
        interval: None,
        cz_times,
        conjugation: CzConjugation::Plain,
    })
}

pub fn regularize(c: &Circuit, m: usize, l: usize) -> Result<RegularizedCircuit> {
    regularize_with(c, m, l, CzConjugation::Plain)
}

/// Greedy left-to-right schedule: original order kept, identities fill gaps,
/// the k-th CZ lands on step `kL + M`, and the tail is padded so the last CZ
/// keeps `CZ_CLEARANCE` steps after it.
pub fn regularize_with(
    c: &Circuit,
    m: usize,
    l: usize,
    conjugation: CzConjugation,
) -> Result<RegularizedCircuit> {
    if l == 0 || l >= m {
        return Err(Error::precondition(format!(
            "CZ interval L = {l} must satisfy 1 <= L < M = {m}"
        )));
    }
    let (pre, post) = match conjugation {
        CzConjugation::Plain => (0, 0),
        CzConjugation::ZConjugated => (2, 2),
    };
    let mut out: Vec<Gate> = (1..=m).map(|t| Gate::identity(t, OUTPUT_QUBIT)).collect();
    let mut cz_times = Vec::new();
    let mut remaining = c.cz_count();
    let lattice = |k: usize| k * l + m;
    let infeasible = |t: usize| {
        Error::precondition(format!(
            "original gate {t} cannot be scheduled: too many single-qubit gates before a CZ \
             for interval L = {l}"
        ))
    };
    for g in &c.gates {
        let next = out.len() + 1;
        match g.kind {
            GateKind::Cz { first, second } => {
                let p = lattice(cz_times.len() + 1);
                if p < next + pre {
                    return Err(infeasible(g.time));
                }
                while out.len() + 1 < p - pre {
                    out.push(Gate::identity(out.len() + 1, OUTPUT_QUBIT));
                }
                if pre > 0 {
                    out.push(Gate::named(p - 2, first, "Z")?);
                    out.push(Gate::named(p - 1, second, "Z")?);
                }
                out.push(Gate::cz(p, first, second)?);
                if post > 0 {
                    out.push(Gate::named(p + 1, first, "Z")?);
                    out.push(Gate::named(p + 2, second, "Z")?);
                }
                cz_times.push(p);
                remaining -= 1;
            }
            _ => {
                if remaining > 0 && next + pre >= lattice(cz_times.len() + 1) {
                    return Err(infeasible(g.time));
                }
                out.push(g.with_time(next));
            }
        }
    }
    if let Some(&last) = cz_times.last() {
        while out.len() < last + CZ_CLEARANCE {
            out.push(Gate::identity(out.len() + 1, OUTPUT_QUBIT));
        }
    }
    let padded = Circuit::new(c.n, c.r, c.x.clone(), out)?;
    Ok(RegularizedCircuit {
        base: c.clone(),
        padded,
        idle: m,
        interval: Some(l),
        cz_times,
        conjugation,
    })
}
