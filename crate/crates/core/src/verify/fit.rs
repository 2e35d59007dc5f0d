use serde::{Deserialize, Serialize};

use super::{csv_string, SpectralReport};
use crate::circuits::{pre_idle, regularize, Circuit, Gate};
use crate::error::{Error, Result};
use crate::kitaev5::Kitaev5Instance;
use crate::operators::eigen::{eigvalsh, ground_energy};
use crate::operators::restrict;
use crate::twolocal::TwoLocalInstance;

const NULL_TOL: f64 = 1e-9;

/// A trend table with a fitted constant; never carries a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fitted: f64,
    /// Whether the driving column moves in the expected direction across rows.
    pub monotone: bool,
}

impl FitTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::invalid(e.to_string());
        w.write_record(&self.columns).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(err)?;
        }
        csv_string(w)
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn single_qubit(names: &[&str]) -> Result<Circuit> {
    let g = names.iter().map(|n| Gate::named(0, 0, n)).collect::<Result<Vec<_>>>()?;
    Circuit::sequential(1, 0, vec![0], g)
}

/// Smallest nonzero eigenvalue of `H_prop1|S_legal` on the one-gate X circuit
/// for each `M`, fitted as `c / W^2` with `W = T + M`.
pub fn propagation_gap_fit(ms: &[usize]) -> Result<SpectralReport> {
    let c = single_qubit(&["X"])?;
    let mut rows = Vec::new();
    for &m in ms {
        let inst = TwoLocalInstance::build(&regularize(&c, m, 1)?)?;
        let legal = inst.cascade()?.legal;
        let vals = eigvalsh(&restrict(&inst.h_prop1.assemble()?, &legal)?)?;
        let gap = vals
            .into_iter()
            .filter(|&v| v > NULL_TOL)
            .reduce(f64::min)
            .ok_or_else(|| Error::invalid("H_prop1 vanishes on the legal states"))?;
        let w = inst.clock_len() as f64;
        rows.push(vec![m as f64, inst.circuit.t() as f64, w, gap, gap * w * w]);
    }
    // least squares for gap = c x with x = 1/W^2
    let (num, den) = rows.iter().fold((0.0, 0.0), |(n, d), r| {
        let x = 1.0 / (r[2] * r[2]);
        (n + r[3] * x, d + x * x)
    });
    let gaps: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let table = FitTable {
        columns: ["M", "T", "W", "gap", "gap_W2"].map(String::from).to_vec(),
        rows,
        fitted: num / den,
        monotone: strictly_decreasing(&gaps),
    };
    Ok(SpectralReport::fitted("fit.propagation_gap", "propagation gap scaling", "gap ~ c / W^2", table)
        .with_meta("circuit", "X")
        .with_meta("reference", std::f64::consts::PI.powi(2) / 2.0))
}

/// `λ₀(H5)` of a rejecting circuit (`H` then identities, acceptance `β = 1/2`)
/// for each total length `T`, fitted as `λ₀ = c (1 - sqrt β) / T'^3`.
pub fn beta_hat_sweep(ts: &[usize]) -> Result<SpectralReport> {
    let mut rows = Vec::new();
    let mut beta = f64::NAN;
    for &t in ts {
        if t == 0 {
            return Err(Error::precondition("T must be at least 1"));
        }
        let mut names = vec!["H"];
        names.resize(t, "I");
        let circ = pre_idle(&single_qubit(&names)?, 0)?;
        beta = circ.acceptance_probability()?;
        let k = Kitaev5Instance::build(&circ)?;
        let lam = ground_energy(&k.h5()?)?;
        let tp = k.t_prime() as f64;
        rows.push(vec![t as f64, tp, lam, lam * tp.powi(3) / (1.0 - beta.sqrt())]);
    }
    let lams: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let consts: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let table = FitTable {
        columns: ["T", "T_prime", "lambda0", "const"].map(String::from).to_vec(),
        rows,
        fitted: consts.iter().copied().fold(f64::INFINITY, f64::min),
        monotone: strictly_decreasing(&lams),
    };
    Ok(
        SpectralReport::fitted("fit.beta_hat", "soundness threshold scaling", "lambda0 >= c (1 - sqrt(beta)) / T'^3", table)
            .with_meta("beta", beta),
    )
}
