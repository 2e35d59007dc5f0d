use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::{read, write_json, BuildArgs, CompileArgs, Construction, DecideArgs, GadgetArgs, Outcome, PipelineArgs, QpeArgs, VerifyArgs};
use crate::circuits::{pre_idle, regularize_with, Circuit};
use crate::decider::{decide as run_decision, monte_carlo, EnergySampler, GlhleInstance, QpeConfig};
use crate::error::{Error, Result};
use crate::excited::build_hc;
use crate::gadget::{build_heff, decompose, PauliHamiltonian, toy_spec, GadgetSpec};
use crate::glhle::{guiding_weight, make_instance, PromiseParams};
use crate::kitaev5::{alpha_hat, beta_hat, Kitaev5Instance};
use crate::operators::{SparseHermitian, TermSum};
use crate::state::GuidingState;
use crate::twolocal::{schedule, CoefficientSchedule, TwoLocalInstance};
use crate::verify::{
    beta_hat_sweep, excited_suite, gadget_suite, kitaev5_suite, kitaev6_suite, merge, propagation_gap_fit, suite_failed,
    suite_from, to_csv, SpectralReport, TwoLocalContext, EXACT_TOL,
};

/// Operator sizes accepted by the fitted-constant sweeps.
const FIT_WIDTHS: [usize; 3] = [4, 6, 8];
const FIT_STEPS: [usize; 3] = [2, 3, 4];

enum Built {
    TwoLocal(Box<TwoLocalInstance>, CoefficientSchedule),
    Kitaev(Box<Kitaev5Instance>),
}

/// One compiled construction and its artifacts.
struct Compiled {
    built: Built,
    h: SparseHermitian,
    terms: TermSum,
    u: GuidingState,
    schedule: Value,
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    Circuit::from_json(&read(path)?)
}

fn weighted_twolocal(inst: &TwoLocalInstance, s: &CoefficientSchedule) -> Result<TermSum> {
    let mut out = inst.h_in.scaled(s.j_in);
    for (w, part) in [(s.j_clock, &inst.h_clock), (s.j1, &inst.h_prop1), (s.j2, &inst.h_prop2), (s.out_weight, &inst.h_out)] {
        out.extend(&part.scaled(w))?;
    }
    Ok(out)
}

fn thresholds(b: &BuildArgs, k: &Kitaev5Instance) -> (f64, f64) {
    let tp = k.t_prime();
    (alpha_hat(b.alpha, tp), beta_hat(b.beta, tp, b.beta_const))
}

fn compile_build(b: &BuildArgs) -> Result<Compiled> {
    let c = load_circuit(&b.circuit)?;
    match b.construction {
        Construction::Twolocal => {
            let reg = regularize_with(&c, b.m, b.l, b.conjugation.into())?;
            let inst = TwoLocalInstance::build(&reg)?;
            let s = schedule(&inst, b.delta, b.rule.into())?;
            let h = inst.assemble(&s)?;
            let terms = weighted_twolocal(&inst, &s)?;
            let u = inst.guiding_state()?;
            let sched = json!({ "construction": "twolocal", "schedule": s });
            Ok(Compiled { built: Built::TwoLocal(Box::new(inst), s), h, terms, u, schedule: sched })
        }
        Construction::Kitaev5 | Construction::Kitaev6 => {
            let k = Kitaev5Instance::build(&pre_idle(&c, b.m)?)?;
            let meta = k.meta(b.delta, b.alpha, b.beta, b.beta_const);
            let (terms, u) = if b.construction == Construction::Kitaev5 {
                (k.weighted_terms(b.delta)?, k.guiding_state(false)?)
            } else {
                let (ah, bh) = thresholds(b, &k);
                (k.build_h6(b.delta, ah, bh)?, k.guiding_state(true)?)
            };
            let h = terms.assemble()?;
            let sched = json!({ "construction": b.construction, "thresholds": meta });
            Ok(Compiled { built: Built::Kitaev(Box::new(k)), h, terms, u, schedule: sched })
        }
    }
}

fn write_artifacts(dir: &Path, c: &Compiled, excited: Option<&crate::excited::ExcitedInstance>) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let (h, u) = match excited {
        Some(e) => (e.hc.assemble()?, e.lift(&c.u)),
        None => (c.h.clone(), c.u.clone()),
    };
    out.insert("operator".into(), write_json(dir, "operator.json", &h)?);
    out.insert("state".into(), write_json(dir, "state.json", &u)?);
    out.insert("schedule".into(), write_json(dir, "schedule.json", &c.schedule)?);
    Ok(out)
}

fn paths(a: &BTreeMap<String, PathBuf>) -> Value {
    a.iter().map(|(k, v)| (k.clone(), Value::from(v.display().to_string()))).collect::<serde_json::Map<_, _>>().into()
}

pub(super) fn compile(a: &CompileArgs) -> Result<Outcome> {
    let c = compile_build(&a.build).map_err(|e| e.in_stage("compile"))?;
    let e = a.excited.map(|lvl| build_hc(&c.terms, lvl)).transpose().map_err(|e| e.in_stage("excited"))?;
    let art = write_artifacts(&a.out, &c, e.as_ref())?;
    Ok(Outcome {
        value: json!({ "artifacts": paths(&art), "dim": c.h.dim(), "locality": c.terms.locality() }),
        reports: Vec::new(),
        failed: false,
    })
}

/// Runs the construction's suite on `h`, which must be the construction's operator.
fn verify_compiled(b: &BuildArgs, c: &Compiled, h: &SparseHermitian) -> Result<Vec<SpectralReport>> {
    match &c.built {
        Built::TwoLocal(inst, s) => suite_from(&TwoLocalContext::from_operator(inst, s.clone(), h)?),
        Built::Kitaev(k) => {
            let diff = if h.dim() == c.h.dim() { h.max_abs_diff(&c.h) } else { f64::INFINITY };
            if diff > EXACT_TOL {
                return Err(Error::invalid(format!("operator differs from the rebuilt construction by {diff:.3e}")));
            }
            if b.construction == Construction::Kitaev5 {
                kitaev5_suite(k, b.delta)
            } else {
                kitaev6_suite(k, b.delta, b.alpha, b.beta, b.beta_const)
            }
        }
    }
}

fn fits() -> Result<Vec<SpectralReport>> {
    Ok(vec![propagation_gap_fit(&FIT_WIDTHS)?, beta_hat_sweep(&FIT_STEPS)?])
}

fn report_value(reports: &[SpectralReport]) -> Result<Value> {
    Ok(json!({ "reports": serde_json::to_value(reports)?, "failed": suite_failed(reports) }))
}

pub(super) fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let mut reports = (|| {
        let c = compile_build(&a.build)?;
        match &a.operator {
            Some(p) => {
                let h: SparseHermitian = serde_json::from_str(&read(p)?)?;
                verify_compiled(&a.build, &c, &h)
            }
            None => verify_compiled(&a.build, &c, &c.h),
        }
    })()
    .map_err(|e| e.in_stage("verify"))?;
    if a.fits {
        reports.extend(fits().map_err(|e| e.in_stage("fits"))?);
    }
    let reports = merge(reports);
    if let Some(p) = &a.csv {
        std::fs::write(p, to_csv(&reports)?)?;
    }
    Ok(Outcome {
        value: report_value(&reports)?,
        failed: suite_failed(&reports),
        reports,
    })
}

fn load_gadget(a: &GadgetArgs) -> Result<(GadgetSpec, SparseHermitian)> {
    let (mut spec, h3) = if let Some(p) = &a.spec {
        let spec: GadgetSpec = serde_json::from_str(&read(p)?)?;
        let spec = spec.with_mu(a.mu);
        let h3 = spec.reassemble()?;
        (spec, h3)
    } else if let Some(p) = &a.decompose {
        let h: PauliHamiltonian = serde_json::from_str(&read(p)?)?;
        decompose(&h, a.mu, a.kappa)?
    } else if a.toy {
        let spec = toy_spec(a.mu)?;
        let h3 = spec.reassemble()?;
        (spec, h3)
    } else {
        return Err(Error::invalid("one of --spec, --decompose or --toy is required"));
    };
    if let Some(cr) = a.cr {
        spec.cr = cr;
    }
    Ok((spec, h3))
}

fn gadget_reports(a: &GadgetArgs) -> Result<(GadgetSpec, Vec<SpectralReport>)> {
    let (spec, h3) = load_gadget(a)?;
    let g = build_heff(&spec)?;
    let r = gadget_suite(&g, &h3)?;
    Ok((spec, r))
}

pub(super) fn gadget(a: &GadgetArgs) -> Result<Outcome> {
    let (spec, reports) = gadget_reports(a).map_err(|e| e.in_stage("gadget"))?;
    if let Some(dir) = &a.out {
        write_json(dir, "gadget_spec.json", &spec)?;
    }
    Ok(Outcome {
        value: report_value(&reports)?,
        failed: suite_failed(&reports),
        reports,
    })
}

fn qpe(q: &QpeArgs) -> QpeConfig {
    QpeConfig {
        bits: q.bits,
        p: q.p,
        reps: q.reps,
        seed: q.seed,
    }
}

fn decide_value(inst: &GlhleInstance, q: &QpeArgs, trials: Option<usize>) -> Result<Value> {
    let cfg = qpe(q);
    let sampler = EnergySampler::new(inst)?;
    let o = run_decision(inst, &sampler, &cfg, q.decide_rule.into(), 0)?;
    let mut v = json!({
        "decision": o.decision,
        "rule": o.rule,
        "statistic": o.statistic,
        "midpoint": o.midpoint,
        "success_bound": o.success_bound,
        "truth": inst.truth,
    });
    if let Some(t) = trials {
        v["monte_carlo"] = serde_json::to_value(monte_carlo(inst, &cfg, q.decide_rule.into(), t)?)?;
    }
    Ok(v)
}

pub(super) fn decide(a: &DecideArgs) -> Result<Outcome> {
    let value = (|| {
        let inst = GlhleInstance::from_json(&read(&a.instance)?)?;
        decide_value(&inst, &a.qpe, a.trials)
    })()
    .map_err(|e| e.in_stage("decide"))?;
    Ok(Outcome {
        value,
        reports: Vec::new(),
        failed: false,
    })
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub seed: u64,
    pub backend: &'static str,
    pub params: Value,
    pub artifacts: BTreeMap<String, PathBuf>,
    pub reports: Vec<SpectralReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Value>,
    pub failed: bool,
}

pub struct PipelineOutcome {
    pub manifest: Manifest,
    pub reports: Vec<SpectralReport>,
    pub failed: bool,
}

/// Yes below `a`, no above `b`, read off the construction's completeness and
/// soundness thresholds.
fn promise(b: &BuildArgs, c: &Compiled) -> PromiseParams {
    match &c.built {
        Built::TwoLocal(..) => PromiseParams::new(1.0 - b.alpha, 1.0 - b.beta - 0.25, 1.0, 0, "eigenvalue window"),
        Built::Kitaev(k) => {
            let (ah, bh) = thresholds(b, k);
            PromiseParams::new(ah, bh, 1.0, 0, "alpha_hat / beta_hat")
        }
    }
}

fn decision_instance(a: &PipelineArgs, c: &Compiled) -> Result<GlhleInstance> {
    let mut p = promise(&a.build, c);
    // ζ is measured rather than assumed
    p.zeta = f64::MIN_POSITIVE;
    let mut inst = make_instance(&c.h, &c.u, &p)?;
    inst.zeta = guiding_weight(&inst)? * (1.0 - 1e-9);
    inst.validate()?;
    Ok(inst)
}

fn params(a: &PipelineArgs) -> Value {
    let b = &a.build;
    json!({
        "circuit": b.circuit.display().to_string(),
        "construction": b.construction,
        "Delta": b.delta,
        "M": b.m,
        "L": b.l,
        "conjugation": format!("{:?}", b.conjugation),
        "rule": format!("{:?}", b.rule),
        "alpha": b.alpha,
        "beta": b.beta,
        "beta_const": b.beta_const,
        "excited": a.excited,
        "gadget_spec": a.gadget_spec.as_ref().map(|p| p.display().to_string()),
        "mu": a.mu,
        "decide": a.decide,
        "qpe": { "bits": a.qpe.bits, "p": a.qpe.p, "reps": a.qpe.reps, "rule": format!("{:?}", a.qpe.decide_rule) },
    })
}

/// compile, verify, then the optional excited, gadget and decide stages.
/// Writes every artifact, `reports.json`, `reports.csv` and `manifest.json` to `--out`.
pub fn run_pipeline(a: &PipelineArgs) -> Result<PipelineOutcome> {
    let c = compile_build(&a.build).map_err(|e| e.in_stage("compile"))?;
    let mut artifacts = write_artifacts(&a.out, &c, None).map_err(|e| e.in_stage("compile"))?;
    let mut reports = verify_compiled(&a.build, &c, &c.h).map_err(|e| e.in_stage("verify"))?;

    if let Some(lvl) = a.excited {
        let e = build_hc(&c.terms, lvl).map_err(|e| e.in_stage("excited"))?;
        reports.extend(excited_suite(&e).map_err(|e| e.in_stage("excited"))?);
        let dir = a.out.join("excited");
        for (k, v) in write_artifacts(&dir, &c, Some(&e))? {
            artifacts.insert(format!("excited_{k}"), v);
        }
    }
    if let Some(spec) = &a.gadget_spec {
        let g = GadgetArgs {
            spec: Some(spec.clone()),
            decompose: None,
            toy: false,
            mu: a.mu,
            cr: None,
            kappa: crate::gadget::DEFAULT_KAPPA,
            out: None,
        };
        let (spec, r) = gadget_reports(&g).map_err(|e| e.in_stage("gadget"))?;
        artifacts.insert("gadget_spec".into(), write_json(&a.out, "gadget_spec.json", &spec)?);
        reports.extend(r);
    }
    let decision = if a.decide {
        let v = decision_instance(a, &c)
            .and_then(|inst| {
                let p = write_json(&a.out, "instance.json", &inst)?;
                artifacts.insert("instance".into(), p);
                decide_value(&inst, &a.qpe, None)
            })
            .map_err(|e| e.in_stage("decide"))?;
        Some(v)
    } else {
        None
    };

    let reports = merge(reports);
    artifacts.insert("reports".into(), write_json(&a.out, "reports.json", &reports)?);
    let csv = a.out.join("reports.csv");
    std::fs::write(&csv, to_csv(&reports)?)?;
    artifacts.insert("reports_csv".into(), csv);
    artifacts.insert("manifest".into(), a.out.join("manifest.json"));

    let failed = suite_failed(&reports);
    // relative to `--out` so the directory can be moved
    let artifacts = artifacts
        .into_iter()
        .map(|(k, p)| {
            let r = p.strip_prefix(&a.out).map(Path::to_path_buf).unwrap_or(p);
            (k, r)
        })
        .collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: a.qpe.seed,
        backend: match c.built {
            Built::TwoLocal(..) => "subspace",
            Built::Kitaev(_) => "dense",
        },
        params: params(a),
        artifacts,
        reports: reports.clone(),
        decision,
        failed,
    };
    write_json(&a.out, "manifest.json", &manifest)?;
    Ok(PipelineOutcome { manifest, reports, failed })
}
