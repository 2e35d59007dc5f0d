//! Packages an operator, a guiding state and thresholds into a checked
//! decision instance with a recorded truth label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decider::{Decision, GlhleInstance};
use crate::error::{Error, Result};
use crate::operators::eigen::{cluster_of, eigh, projector_weight, CLUSTER_TOL};
use crate::operators::{operator_norm, SparseHermitian};
use crate::state::GuidingState;

/// Divides by `‖H‖` times this, so the rescaled norm sits strictly below 1.
pub const NORM_SAFETY: f64 = 1.000001;
const ZETA_TOL: f64 = 1e-12;
/// Rounding slack when a threshold was read off the same spectrum.
const PROMISE_TOL: f64 = 1e-12;

/// Thresholds in the operator's own units, before normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromiseParams {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub zeta: f64,
    pub c: usize,
    /// Where `a` and `b` came from.
    pub provenance: String,
    /// Other threshold forms kept for comparison only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reference: BTreeMap<String, f64>,
}

impl PromiseParams {
    pub fn new(a: f64, b: f64, zeta: f64, c: usize, provenance: &str) -> Self {
        PromiseParams {
            a,
            b,
            delta: b - a,
            zeta,
            c,
            provenance: provenance.to_string(),
            reference: BTreeMap::new(),
        }
    }

    /// A yes-promise `a = λ`, `b = λ + δ`, or a no-promise `a = λ - δ`, `b = λ`.
    pub fn around(lambda: f64, delta: f64, yes: bool, zeta: f64, c: usize, provenance: &str) -> Self {
        if yes {
            Self::new(lambda, lambda + delta, zeta, c, provenance)
        } else {
            Self::new(lambda - delta, lambda, zeta, c, provenance)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || self.b - self.a < self.delta * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "need b - a >= delta > 0 (a = {}, b = {}, delta = {})",
                self.a, self.b, self.delta
            )));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::invalid(format!("zeta = {} outside (0, 1]", self.zeta)));
        }
        Ok(())
    }
}

/// Normalization factor `1 / (‖H‖ · NORM_SAFETY)`, or 1 for `H = 0`.
pub fn normalizer(h: &SparseHermitian) -> Result<f64> {
    let n = operator_norm(h)?;
    Ok(if n > 0.0 { 1.0 / (n * NORM_SAFETY) } else { 1.0 })
}

/// Rescales `H` and the thresholds, checks the promise on the exact spectrum,
/// checks `‖Π_c u‖^2 >= ζ` on the degeneracy cluster of level `c`, and
/// records the truth label.
pub fn make_instance(h: &SparseHermitian, u: &GuidingState, params: &PromiseParams) -> Result<GlhleInstance> {
    params.validate()?;
    if u.dim != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: u.dim,
        });
    }
    if params.c >= h.dim() {
        return Err(Error::invalid(format!("level {} beyond dimension {}", params.c, h.dim())));
    }
    let s = normalizer(h)?;
    let hn = h.scaled(s);
    let (a, b, delta) = (params.a * s, params.b * s, params.delta * s);
    let (vals, vecs) = eigh(&hn)?;
    let lambda = vals[params.c];
    let truth = if lambda <= a + PROMISE_TOL {
        Decision::Yes
    } else if lambda >= b - PROMISE_TOL {
        Decision::No
    } else {
        return Err(Error::precondition(format!(
            "promise violated: lambda_{} = {} lies strictly between a = {a} and b = {b} (normalized)",
            params.c, lambda
        )));
    };
    let cluster = cluster_of(&vals, params.c, CLUSTER_TOL);
    let weight = projector_weight(&vecs[cluster], &u.to_vector());
    if weight < params.zeta - ZETA_TOL {
        return Err(Error::precondition(format!(
            "guiding weight {weight} on level {} is below zeta = {}",
            params.c, params.zeta
        )));
    }
    let inst = GlhleInstance {
        h: hn,
        u: u.clone(),
        a,
        b,
        c: params.c,
        zeta: params.zeta,
        delta,
        truth: Some(truth),
    };
    inst.validate()?;
    Ok(inst)
}

/// `‖Π_c u‖^2` for an instance, on the degeneracy cluster of level `c`.
pub fn guiding_weight(inst: &GlhleInstance) -> Result<f64> {
    let (vals, vecs) = eigh(&inst.h)?;
    let cluster = cluster_of(&vals, inst.c, CLUSTER_TOL);
    Ok(projector_weight(&vecs[cluster], &inst.u.to_vector()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{regularize, Circuit, Gate};
    use crate::excited::build_hc;
    use crate::operators::small::{self, gates};
    use crate::operators::{LocalTerm, RegisterLayout, TermSum};
    use crate::twolocal::{schedule, ScheduleRule, TwoLocalInstance};

    #[test]
    fn accepting_twolocal_instance_is_yes() {
        let g = vec![Gate::named(0, 0, "X").unwrap()];
        let c = Circuit::sequential(1, 0, vec![0], g).unwrap();
        let inst = TwoLocalInstance::build(&regularize(&c, 4, 1).unwrap()).unwrap();
        let s = schedule(&inst, 16.0, ScheduleRule::Calibrated).unwrap();
        let h = inst.assemble(&s).unwrap();
        let u = inst.guiding_state().unwrap();
        // eigenvalue bounds: λ₀ <= ε for yes, λ₀ >= ε - 1/4 would be the no side
        let p = PromiseParams::new(inst.epsilon, inst.epsilon + 0.25, 0.5, 0, "eigenvalue bounds");
        let g = make_instance(&h, &u, &p).unwrap();
        assert_eq!(g.truth, Some(Decision::Yes));
        assert!((g.a - inst.epsilon * normalizer(&h).unwrap()).abs() < 1e-15);
        assert!(guiding_weight(&g).unwrap() >= g.zeta);
    }

    fn toy() -> TermSum {
        let mut h = TermSum::new(RegisterLayout::flat(2).unwrap(), 2);
        h.push(LocalTerm::new(0.7, vec![0], gates::p1(), "h").unwrap()).unwrap();
        h.push(LocalTerm::new(0.3, vec![1], gates::x(), "h").unwrap()).unwrap();
        h.push(LocalTerm::new(0.1, vec![0, 1], small::kron(&gates::z(), &gates::z()), "h").unwrap()).unwrap();
        h
    }

    #[test]
    fn excited_level_two_truth_from_spectrum() {
        let e = build_hc(&toy(), 2).unwrap();
        let h = e.hc.assemble().unwrap();
        let (vals, vecs) = eigh(&h).unwrap();
        let top = vecs[2].iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        let u = GuidingState::new(h.dim(), vec![top]).unwrap();
        let zeta = vecs[2][top].norm_sqr() * 0.999;
        let yes = make_instance(&h, &u, &PromiseParams::around(vals[2], 0.1, true, zeta, 2, "dense")).unwrap();
        assert_eq!(yes.truth, Some(Decision::Yes));
        let no = make_instance(&h, &u, &PromiseParams::around(vals[2], 0.1, false, zeta, 2, "dense")).unwrap();
        assert_eq!(no.truth, Some(Decision::No));
    }

    #[test]
    fn promise_gap_violation_is_rejected() {
        let h = SparseHermitian::from_diagonal(&[-0.5, 0.2, 0.9]);
        let u = GuidingState::new(3, vec![0]).unwrap();
        let p = PromiseParams::new(-0.6, -0.4, 1.0, 0, "test");
        let e = make_instance(&h, &u, &p).unwrap_err().to_string();
        assert!(e.contains("promise violated"), "{e}");
    }

    #[test]
    fn low_guiding_weight_is_rejected() {
        let h = SparseHermitian::from_diagonal(&[-0.5, 0.2, 0.9]);
        let u = GuidingState::new(3, vec![0, 1]).unwrap();
        assert!(make_instance(&h, &u, &PromiseParams::new(-0.5, 0.0, 0.6, 0, "t")).is_err());
        assert!(make_instance(&h, &u, &PromiseParams::new(-0.5, 0.0, 0.5, 0, "t")).is_ok());
    }

    #[test]
    fn scaling_leaves_weights_unchanged() {
        let h = toy().assemble().unwrap();
        let u = GuidingState::new(4, vec![0, 1]).unwrap();
        let (vals, _) = eigh(&h).unwrap();
        let p = PromiseParams::around(vals[0], 0.1, true, 0.01, 0, "t");
        let a = make_instance(&h, &u, &p).unwrap();
        let b = make_instance(&h.scaled(7.5), &u, &PromiseParams::around(vals[0] * 7.5, 0.75, true, 0.01, 0, "t")).unwrap();
        assert!((guiding_weight(&a).unwrap() - guiding_weight(&b).unwrap()).abs() < 1e-12);
        assert!(a.h.max_abs_diff(&b.h) < 1e-12);
        assert!(operator_norm(&a.h).unwrap() < 1.0);
    }
}
