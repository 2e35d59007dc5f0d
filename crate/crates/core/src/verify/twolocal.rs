use num_complex::Complex64 as C64;
use serde_json::Value;

use super::{merge, Direction, SpectralReport, EXACT_TOL, RELATIVE_TOL};
use crate::circuits::{gate_unitary, OUTPUT_QUBIT};
use crate::error::{Error, Result};
use crate::operators::eigen::{cluster_of, eigvalsh, projector_weight, CLUSTER_TOL, DENSE_NORM_LIMIT};
use crate::operators::{lowest_eigenpairs, restrict, sparse, Method, Partition, SparseHermitian, SubspaceBasis, Triplets};
use crate::twolocal::{block_form, schedule, CoefficientSchedule, ScheduleRule, TwoLocalInstance};

/// Tolerance on `|<eta|u>|^2 = M/(M+T)`.
pub const OVERLAP_TOL: f64 = 1e-12;
const UNIQUE_GAP: f64 = 1e-9;

/// Everything the Δ-dependent checks need, solved once.
///
/// A schedule that trips the overflow guard leaves every spectral value NaN
/// and records the error, so the reports still exist and fail.
#[derive(Clone, Debug)]
pub struct TwoLocalContext<'a> {
    pub inst: &'a TwoLocalInstance,
    pub delta: f64,
    pub rule: ScheduleRule,
    pub schedule: Option<CoefficientSchedule>,
    pub error: Option<String>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub history_energy: f64,
    /// `λ₀` of `H` on the orthogonal complement of `|eta>`.
    pub orthogonal_floor: f64,
    /// Weight of `|eta>` on the ground cluster.
    pub fidelity: f64,
    /// Weight of the guiding state on the ground cluster.
    pub guiding_fidelity: f64,
    pub residual: f64,
    pub dense_lambda0: Option<f64>,
}

impl<'a> TwoLocalContext<'a> {
    fn empty(inst: &'a TwoLocalInstance, delta: f64, rule: ScheduleRule) -> Self {
        TwoLocalContext {
            inst,
            delta,
            rule,
            schedule: None,
            error: None,
            lambda0: f64::NAN,
            lambda1: f64::NAN,
            history_energy: f64::NAN,
            orthogonal_floor: f64::NAN,
            fidelity: f64::NAN,
            guiding_fidelity: f64::NAN,
            residual: f64::NAN,
            dense_lambda0: None,
        }
    }

    pub fn new(inst: &'a TwoLocalInstance, delta: f64, rule: ScheduleRule) -> Result<Self> {
        let mut ctx = Self::empty(inst, delta, rule);
        let s = match schedule(inst, delta, rule) {
            Ok(s) => s,
            Err(e @ Error::Overflow { .. }) => {
                ctx.error = Some(e.to_string());
                return Ok(ctx);
            }
            Err(e) => return Err(e),
        };
        let h = inst.assemble(&s)?;
        Self::from_operator(inst, s, &h)
    }

    /// Solves on a given assembled operator, e.g. one read back from disk.
    pub fn from_operator(inst: &'a TwoLocalInstance, s: CoefficientSchedule, h: &SparseHermitian) -> Result<Self> {
        if h.dim() != inst.dim() {
            return Err(Error::DimensionMismatch {
                expected: inst.dim(),
                found: h.dim(),
            });
        }
        let mut ctx = Self::empty(inst, s.delta, s.rule);
        let eta = inst.history_state()?;
        let coords = inst.legal_coords();
        let low = lowest_eigenpairs(h, 2, &Method::Subspace(Partition::coordinates(coords.clone())))?;
        let vecs = low.eigenvectors.clone().ok_or_else(|| Error::invalid("solver returned no vectors"))?;
        let ground = cluster_of(&low.eigenvalues, 0, CLUSTER_TOL);
        let ground_vecs = &vecs[ground];

        ctx.lambda0 = low.eigenvalues[0];
        ctx.lambda1 = low.eigenvalues[1];
        ctx.residual = low.max_residual();
        ctx.history_energy = h.expectation(&eta);
        ctx.fidelity = projector_weight(ground_vecs, &eta);
        if inst.circuit.m() >= 1 {
            ctx.guiding_fidelity = projector_weight(ground_vecs, &inst.guiding_state()?.to_vector());
        }
        let inner = eta_complement(&eta, &coords)?;
        ctx.orthogonal_floor =
            lowest_eigenpairs(h, 1, &Method::Subspace(Partition::with_inner(coords, inner)))?.eigenvalues[0];
        if h.dim() <= DENSE_NORM_LIMIT {
            ctx.dense_lambda0 = Some(eigvalsh(h)?[0]);
        }
        ctx.schedule = Some(s);
        Ok(ctx)
    }

    fn tag(&self, r: SpectralReport) -> SpectralReport {
        let c = &self.inst.circuit;
        let mut r = r
            .with_meta("Delta", self.delta)
            .with_meta("epsilon", self.inst.epsilon)
            .with_meta("T", c.t())
            .with_meta("M", c.m())
            .with_meta("T2", c.t2())
            .with_meta("dim", self.inst.dim())
            .with_meta("backend", "subspace")
            .with_meta("rule", serde_json::to_value(self.rule).unwrap_or(Value::Null))
            .with_meta("residual", self.residual);
        if let Some(s) = &self.schedule {
            r = r.with_meta("max_weight", s.max_weight());
        }
        if let Some(d) = self.dense_lambda0 {
            r = r.with_meta("dense_lambda0", d);
        }
        if let Some(e) = &self.error {
            r = r.with_meta("error", e.as_str());
        }
        r
    }
}

/// Orthonormal basis of the complement of `|eta>` inside the legal coordinates,
/// in those coordinates.
fn eta_complement(eta: &[C64], coords: &[usize]) -> Result<Vec<Vec<C64>>> {
    let k = coords.len();
    let mut cols = Vec::with_capacity(k + 1);
    cols.push(coords.iter().map(|&i| eta[i]).collect::<Vec<_>>());
    for j in 0..k {
        let mut e = vec![C64::new(0.0, 0.0); k];
        e[j] = C64::new(1.0, 0.0);
        cols.push(e);
    }
    let b = SubspaceBasis::orthonormalize("eta_perp", k, &cols, 1e-8)?;
    Ok((1..b.dim()).map(|j| b.column(j)).collect())
}

/// `ε - 1/4 <= λ₀ <= ε`, uniqueness of `λ₀`, and `<eta|H|eta> = ε`.
pub fn check_eigenvalue_bounds(ctx: &TwoLocalContext) -> Vec<SpectralReport> {
    const A: &str = "eigenvalue bounds";
    let eps = ctx.inst.epsilon;
    vec![
        SpectralReport::bound("eigenvalue_bounds.lower", A, Direction::Lower, "epsilon - 1/4", eps - 0.25, ctx.lambda0, EXACT_TOL),
        SpectralReport::bound("eigenvalue_bounds.upper", A, Direction::Upper, "epsilon", eps, ctx.lambda0, EXACT_TOL),
        SpectralReport::bound(
            "eigenvalue_bounds.unique",
            A,
            Direction::Lower,
            "lambda1 - lambda0 > 1e-9",
            UNIQUE_GAP,
            ctx.lambda1 - ctx.lambda0,
            0.0,
        ),
        SpectralReport::bound("eigenvalue_bounds.history_energy", A, Direction::Equal, "epsilon", eps, ctx.history_energy, EXACT_TOL),
    ]
    .into_iter()
    .map(|r| ctx.tag(r))
    .collect()
}

/// Energy on the complement of `|eta>` is at least `Δ`; `λ₁ >= Δ - 1`.
pub fn check_orthogonal_energy(ctx: &TwoLocalContext) -> Vec<SpectralReport> {
    const A: &str = "orthogonal energy";
    let (d, tol) = (ctx.delta, RELATIVE_TOL * ctx.delta);
    vec![
        SpectralReport::bound("orthogonal_energy.floor", A, Direction::Lower, "Delta", d, ctx.orthogonal_floor, tol),
        SpectralReport::bound("orthogonal_energy.first_excited", A, Direction::Lower, "Delta - 1", d - 1.0, ctx.lambda1, tol),
    ]
    .into_iter()
    .map(|r| ctx.tag(r))
    .collect()
}

/// History-state fidelity, spectral gap, the guiding-state fidelity chain, and
/// the closed form `|<eta|u>|^2 = M/(M+T)`.
pub fn check_fidelity_and_gap(ctx: &TwoLocalContext) -> Result<Vec<SpectralReport>> {
    const A: &str = "fidelity and gap";
    let d = ctx.delta;
    let c = &ctx.inst.circuit;
    let mut out = vec![
        SpectralReport::bound("fidelity_and_gap.fidelity", A, Direction::Lower, "1 - 1/Delta", 1.0 - 1.0 / d, ctx.fidelity, EXACT_TOL),
        SpectralReport::bound(
            "fidelity_and_gap.gap",
            A,
            Direction::Lower,
            "Delta - 2",
            d - 2.0,
            ctx.lambda1 - ctx.lambda0,
            RELATIVE_TOL * d,
        ),
    ];
    let (t, m) = (c.t() as f64, c.m() as f64);
    if c.m() >= 1 {
        let u = ctx.inst.guiding_state()?;
        let exact = u.overlap(&ctx.inst.history_state()?).norm_sqr();
        let chain = 1.0 - ((t / m).sqrt() + (1.0 / d).sqrt()).powi(2);
        out.push(SpectralReport::bound(
            "fidelity_and_gap.guiding_overlap",
            A,
            Direction::Equal,
            "M/(M+T)",
            m / (m + t),
            exact,
            OVERLAP_TOL,
        ));
        out.push(SpectralReport::bound(
            "fidelity_and_gap.guiding_fidelity",
            A,
            Direction::Lower,
            "1 - (sqrt(T/M) + sqrt(1/Delta))^2",
            chain,
            ctx.guiding_fidelity,
            EXACT_TOL,
        ));
    }
    Ok(out.into_iter().map(|r| ctx.tag(r)).collect())
}

fn bit(z: usize, q: usize, width: usize) -> usize {
    (z >> (width - 1 - q)) & 1
}

/// `sum_q wrong_q (x) (|0^><0^| + |1^><1^|) + I (x) |0^><0^|` on the legal states.
fn input_display(inst: &TwoLocalInstance) -> Result<SparseHermitian> {
    let x = inst.circuit.padded.input_index();
    let mut trip = Triplets::new(inst.dim());
    for z in 0..1usize << inst.system_qubits() {
        let wrong = (z ^ x).count_ones() as f64;
        let (a, b) = (inst.legal_index(z, 0), inst.legal_index(z, 1));
        trip.push(a, a, C64::new(wrong + 1.0, 0.0));
        trip.push(b, b, C64::new(wrong, 0.0));
    }
    trip.build()
}

/// `|0><0|_out (x) |T+M^><T+M^|`.
fn output_display(inst: &TwoLocalInstance) -> Result<SparseHermitian> {
    let w = inst.system_qubits();
    let mut trip = Triplets::new(inst.dim());
    for z in (0..1usize << w).filter(|&z| bit(z, OUTPUT_QUBIT, w) == 0) {
        let a = inst.legal_index(z, inst.clock_len());
        trip.push(a, a, C64::new(1.0, 0.0));
    }
    trip.build()
}

/// `1/2 (|t-1^><t-1^| + |t^><t^|) - 1/2 (U_t (x) |t^><t-1^| + h.c.)`.
fn propagation_display(inst: &TwoLocalInstance, t: usize) -> Result<SparseHermitian> {
    let w = inst.system_qubits();
    let dim = 1usize << w;
    let u = gate_unitary(inst.circuit.gate(t), w);
    let mut trip = Triplets::new(inst.dim());
    for z in 0..dim {
        let (a, b) = (inst.legal_index(z, t - 1), inst.legal_index(z, t));
        trip.push(a, a, C64::new(0.5, 0.0));
        trip.push(b, b, C64::new(0.5, 0.0));
        for zp in 0..dim {
            let v = u[zp * dim + z];
            if v.norm() > 0.0 {
                trip.push(inst.legal_index(zp, t), a, -0.5 * v);
            }
        }
    }
    trip.build()
}

fn restricted_residual(got: &SparseHermitian, want: &SparseHermitian, s: &SubspaceBasis) -> Result<f64> {
    Ok(restrict(got, s)?.max_abs_diff(&restrict(want, s)?))
}

/// Restricted operator forms: each family on the legal clock states against
/// its display, and each CZ time's propagation block form on `S_prop1`.
pub fn check_restricted_forms(inst: &TwoLocalInstance) -> Result<Vec<SpectralReport>> {
    const A: &str = "restricted operator forms";
    let cascade = inst.cascade()?;
    let conj = serde_json::to_value(inst.circuit.conjugation).unwrap_or(Value::Null);
    let eq = |check: String, symbolic: &str, residual: f64| {
        SpectralReport::bound(&check, A, Direction::Equal, symbolic, 0.0, residual, EXACT_TOL)
            .with_meta("conjugation", conj.clone())
            .with_meta("T2", inst.circuit.t2())
    };

    let mut out = vec![
        eq(
            "restricted_forms.h_in".into(),
            "H_in|S_legal = display",
            restricted_residual(&inst.h_in.assemble()?, &input_display(inst)?, &cascade.legal)?,
        ),
        eq(
            "restricted_forms.h_out".into(),
            "H_out|S_legal = display",
            restricted_residual(&inst.h_out.assemble()?, &output_display(inst)?, &cascade.legal)?,
        ),
    ];
    let mut prop = 0.0f64;
    let times: Vec<usize> = inst.circuit.t1().into_iter().filter(|&t| t >= 2).collect();
    for &t in &times {
        let label = format!("H_prop,{t}");
        let got = inst.h_prop1.assemble_filtered(|l| l == label)?;
        prop = prop.max(restricted_residual(&got, &propagation_display(inst, t)?, &cascade.legal)?);
    }
    let mut r = eq("restricted_forms.h_prop".into(), "H_prop,t|S_legal = display", prop).with_meta("times", times);
    if inst.circuit.cz_times.is_empty() {
        r = r.with_meta("block_form", "skipped: no CZ steps");
    }
    out.push(r);

    let eta = inst.history_state()?;
    for &t in &inst.circuit.cz_times {
        out.push(
            eq(
                format!("restricted_forms.block_form.t{t}"),
                "(H_time,t + H_qubit,t)|S_prop1 = block form",
                block_form(inst, &cascade, t)?,
            )
            .with_meta("t", t),
        );
        let null = sparse::norm(&inst.block_form_operator(t)?.matvec(&eta));
        out.push(eq(format!("restricted_forms.eta_null.t{t}"), "block form |eta> = 0", null).with_meta("t", t));
    }
    Ok(out)
}

/// Every two-local check at one `Δ`, merged by check name.
pub fn twolocal_suite(inst: &TwoLocalInstance, delta: f64, rule: ScheduleRule) -> Result<Vec<SpectralReport>> {
    suite_from(&TwoLocalContext::new(inst, delta, rule)?)
}

/// Every two-local check on a solved context.
pub fn suite_from(ctx: &TwoLocalContext) -> Result<Vec<SpectralReport>> {
    let inst = ctx.inst;
    let mut out = check_eigenvalue_bounds(ctx);
    out.extend(check_orthogonal_energy(ctx));
    out.extend(check_fidelity_and_gap(ctx)?);
    out.extend(check_restricted_forms(inst)?);
    Ok(merge(out))
}
