use serde::{Deserialize, Serialize};

use super::TwoLocalInstance;
use crate::error::{Error, Result};
use crate::operators::eigen::eigvalsh;
use crate::operators::{assemble_weighted, coupling_norm, operator_norm, restrict, TermSum};

/// Any weight above this is refused: float64 spectra lose the `O(1)` scale.
pub const OVERFLOW_GUARD: f64 = 1e15;

/// Penalty `J2 * gap(H_prop2|S_prop1)` in units of `Delta` under the calibrated rule.
pub const PROP2_MARGIN: f64 = 4.0;

const NULL_TOL: f64 = 1e-9;

/// `f(K) = 8K^2 + 2K`, the projection-lemma penalty for a perturbation of norm `K`.
pub fn f_poly(k: f64) -> f64 {
    8.0 * k * k + 2.0 * k
}

/// Second-order penalty `8B^2 + 2K` for off-block coupling `B` and block norm `K`.
pub fn schur_poly(b: f64, k: f64) -> f64 {
    8.0 * b * b + 2.0 * k
}

/// How each level's weight is derived.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleRule {
    /// Measured gaps and couplings:
    /// `J_in = 2 Delta K_in`,
    /// `J2 = PROP2_MARGIN Delta / g2`,
    /// `J1 = 2 M K1 + 8 B1^2 / g1` with `B1` the `J2 H_prop2` coupling out of `S_prop1`,
    /// `J_clock = 8 B_c^2 + 2 K_c` with `B_c` the coupling out of `S_legal`.
    #[default]
    Calibrated,
    /// `f(K) Delta` at every level, with `K` scaled by `1`, `T`, `M`, `1`.
    Literal,
}

/// Running partial-sum norms and, for the calibrated rule, the measured
/// gaps and couplings it uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleNorms {
    /// `||(T+M) H_out||`.
    pub out: f64,
    /// `||(T+M) H_out + J_in H_in||`.
    pub with_in: f64,
    /// `... + J2 H_prop2`.
    pub with_prop2: f64,
    /// `... + J1 H_prop1`.
    pub with_prop1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop1_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop2_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop2_coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_coupling: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSchedule {
    pub rule: ScheduleRule,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "T2")]
    pub t2: usize,
    #[serde(rename = "J_in")]
    pub j_in: f64,
    #[serde(rename = "J_clock")]
    pub j_clock: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    /// Weight of `H_out`, `T+M`.
    pub out_weight: f64,
    pub norms: ScheduleNorms,
}

/// One hierarchy inequality `J >= bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyCheck {
    pub name: String,
    pub weight: f64,
    pub bound: f64,
    pub pass: bool,
}

fn missing(what: &str) -> Error {
    Error::invalid(format!("calibrated schedule is missing `{what}`"))
}

impl CoefficientSchedule {
    fn bounds(&self) -> Result<[f64; 4]> {
        let n = &self.norms;
        let (t, m, d) = (self.t.max(1) as f64, self.m as f64, self.delta);
        Ok(match self.rule {
            ScheduleRule::Literal => [
                f_poly(n.out) * d,
                if self.t2 == 0 { 0.0 } else { f_poly(n.with_in * t) * d },
                f_poly(n.with_prop2 * m) * d,
                f_poly(n.with_prop1) * d,
            ],
            ScheduleRule::Calibrated => {
                let g1 = n.prop1_gap.ok_or_else(|| missing("prop1_gap"))?;
                let bc = n.clock_coupling.ok_or_else(|| missing("clock_coupling"))?;
                let (j2, b1) = if self.t2 == 0 {
                    (0.0, 0.0)
                } else {
                    let g2 = n.prop2_gap.ok_or_else(|| missing("prop2_gap"))?;
                    let b1 = n.prop2_coupling.ok_or_else(|| missing("prop2_coupling"))?;
                    (PROP2_MARGIN * d / g2, b1)
                };
                [
                    2.0 * n.out * d,
                    j2,
                    2.0 * m * n.with_prop2 + 8.0 * b1 * b1 / g1,
                    schur_poly(bc, n.with_prop1),
                ]
            }
        })
    }

    /// The four inequalities for this schedule's rule, against its recorded norms.
    pub fn hierarchy(&self) -> Result<Vec<HierarchyCheck>> {
        let b = self.bounds()?;
        let w = [self.j_in, self.j2, self.j1, self.j_clock];
        Ok(["J_in", "J2", "J1", "J_clock"]
            .iter()
            .zip(w.iter().zip(b))
            .map(|(name, (&weight, bound))| HierarchyCheck {
                name: name.to_string(),
                weight,
                bound,
                pass: weight >= bound * (1.0 - 1e-12),
            })
            .collect())
    }

    pub fn hierarchy_holds(&self) -> Result<bool> {
        Ok(self.hierarchy()?.iter().all(|c| c.pass))
    }

    pub fn max_weight(&self) -> f64 {
        [self.j_in, self.j_clock, self.j1, self.j2].into_iter().fold(0.0, f64::max)
    }
}

fn guard(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() || value > OVERFLOW_GUARD {
        return Err(Error::Overflow { name, value });
    }
    Ok(value)
}

/// Smallest eigenvalue above `NULL_TOL`, or `None` if the operator vanishes.
fn nonzero_gap(vals: &[f64]) -> Option<f64> {
    vals.iter().copied().filter(|&v| v > NULL_TOL).reduce(f64::min)
}

/// Computes `J_in, J2, J1, J_clock` bottom-up.
pub fn schedule(inst: &TwoLocalInstance, delta: f64, rule: ScheduleRule) -> Result<CoefficientSchedule> {
    if !(delta >= 1.0) {
        return Err(Error::precondition(format!("Delta = {delta} must be at least 1")));
    }
    let c = &inst.circuit;
    let ow = inst.out_weight();
    let (t, m) = (c.t().max(1) as f64, c.m() as f64);
    let has_prop2 = !inst.h_prop2.is_empty();
    let cascade = match rule {
        ScheduleRule::Calibrated => Some(inst.cascade()?),
        ScheduleRule::Literal => None,
    };

    let mut parts: Vec<(f64, &TermSum)> = vec![(ow, &inst.h_out)];
    let out = operator_norm(&assemble_weighted(&parts)?)?;
    let j_in = guard(
        "J_in",
        match rule {
            ScheduleRule::Calibrated => 2.0 * out * delta,
            ScheduleRule::Literal => f_poly(out) * delta,
        },
    )?;
    parts.push((j_in, &inst.h_in));
    let with_in = operator_norm(&assemble_weighted(&parts)?)?;

    let mut prop2_gap = None;
    let j2 = match (&cascade, has_prop2) {
        (_, false) => 0.0,
        (None, true) => guard("J2", f_poly(with_in * t) * delta)?,
        (Some(s), true) => {
            let r = restrict(&inst.h_prop2.assemble()?, &s.prop1)?;
            let g2 = nonzero_gap(&eigvalsh(&r)?)
                .ok_or_else(|| Error::invalid("H_prop2 vanishes on S_prop1"))?;
            prop2_gap = Some(g2);
            guard("J2", PROP2_MARGIN * delta / g2)?
        }
    };
    parts.push((j2, &inst.h_prop2));
    let with_prop2 = operator_norm(&assemble_weighted(&parts)?)?;

    let (mut prop1_gap, mut prop2_coupling) = (None, None);
    let j1 = match &cascade {
        None => guard("J1", f_poly(with_prop2 * m) * delta)?,
        Some(s) => {
            let r = restrict(&inst.h_prop1.assemble()?, &s.legal)?;
            let g1 = nonzero_gap(&eigvalsh(&r)?)
                .ok_or_else(|| Error::invalid("H_prop1 vanishes on S_legal"))?;
            let b1 = if has_prop2 {
                let p2 = inst.h_prop2.assemble()?.scaled(j2);
                coupling_norm(&p2, &s.prop1, Some(&s.legal))?
            } else {
                0.0
            };
            prop1_gap = Some(g1);
            prop2_coupling = has_prop2.then_some(b1);
            guard("J1", 2.0 * m * with_prop2 + 8.0 * b1 * b1 / g1)?
        }
    };
    parts.push((j1, &inst.h_prop1));
    let partial = assemble_weighted(&parts)?;
    let with_prop1 = operator_norm(&partial)?;

    let mut clock_coupling = None;
    let j_clock = match &cascade {
        None => guard("J_clock", f_poly(with_prop1) * delta)?,
        Some(s) => {
            let bc = coupling_norm(&partial, &s.legal, None)?;
            clock_coupling = Some(bc);
            guard("J_clock", schur_poly(bc, with_prop1))?
        }
    };

    Ok(CoefficientSchedule {
        rule,
        delta,
        m: c.m(),
        l: c.interval,
        t: c.t(),
        t2: c.t2(),
        j_in,
        j_clock,
        j1,
        j2,
        out_weight: ow,
        norms: ScheduleNorms {
            out,
            with_in,
            with_prop2,
            with_prop1,
            prop1_gap,
            prop2_gap,
            prop2_coupling,
            clock_coupling,
        },
    })
}
