//! Guided eigenvalue-estimation sampler and the min-rule / majority-vote
//! deciders for low-energy decision instances.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::eigen::{clusters, eigh, projector_weight, CLUSTER_TOL};
use crate::operators::{operator_norm, SparseHermitian};
use crate::state::GuidingState;

/// Allowed slack on `‖H‖ <= 1`.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Yes,
    No,
}

/// A decision instance: is `λ_c(H) <= a` or `>= b`, given a guiding state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlhleInstance {
    #[serde(rename = "operator")]
    pub h: SparseHermitian,
    #[serde(rename = "guiding_state")]
    pub u: GuidingState,
    pub a: f64,
    pub b: f64,
    pub c: usize,
    pub zeta: f64,
    pub delta: f64,
    /// Ground truth measured when the instance was assembled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Decision>,
}

impl GlhleInstance {
    pub fn validate(&self) -> Result<()> {
        if self.u.dim != self.h.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.h.dim(),
                found: self.u.dim,
            });
        }
        if !(self.delta > 0.0) || self.b - self.a < self.delta * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "thresholds need b - a >= delta > 0 (a = {}, b = {}, delta = {})",
                self.a, self.b, self.delta
            )));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::invalid(format!("zeta = {} outside (0, 1]", self.zeta)));
        }
        let norm = operator_norm(&self.h)?;
        if norm > 1.0 + NORM_TOL {
            return Err(Error::invalid(format!("||H|| = {norm} exceeds 1")));
        }
        if self.c >= self.h.dim() {
            return Err(Error::invalid(format!("level {} beyond dimension {}", self.c, self.h.dim())));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let i: Self = serde_json::from_str(s)?;
        i.validate()?;
        Ok(i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpeConfig {
    /// Estimates live on the grid `k / 2^bits`.
    pub bits: u32,
    /// Per-shot success probability.
    pub p: f64,
    pub reps: usize,
    pub seed: u64,
}

impl QpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("p = {} outside (0, 1]", self.p)));
        }
        if self.bits == 0 || self.bits > 30 {
            return Err(Error::invalid(format!("bits = {} outside 1..=30", self.bits)));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        Ok(())
    }

    pub fn granularity(&self) -> f64 {
        (-(self.bits as f64)).exp2()
    }
}

/// `x -> (x + 1)/2`, taking `[-1, 1]` onto `[0, 1]`.
pub fn to_unit(x: f64) -> f64 {
    (x + 1.0) / 2.0
}

/// Nearest grid point, ties rounding up.
pub fn round_half_up(x: f64, bits: u32) -> f64 {
    let s = (bits as f64).exp2();
    (x * s + 0.5).floor() / s
}

/// Exact eigen-cluster statistics of an instance, on the unit interval.
#[derive(Clone, Debug)]
pub struct EnergySampler {
    /// Cluster energies after `to_unit`.
    pub energies: Vec<f64>,
    /// `‖Π_j u‖^2` per cluster.
    pub weights: Vec<f64>,
    cumulative: Vec<f64>,
    /// Eigenvalues of `H`, unmapped.
    pub spectrum: Vec<f64>,
}

impl EnergySampler {
    pub fn new(inst: &GlhleInstance) -> Result<Self> {
        let (vals, vecs) = eigh(&inst.h)?;
        let u: Vec<C64> = inst.u.to_vector();
        let mut energies = Vec::new();
        let mut weights = Vec::new();
        for r in clusters(&vals, CLUSTER_TOL) {
            let mean = vals[r.clone()].iter().sum::<f64>() / r.len() as f64;
            energies.push(to_unit(mean));
            weights.push(projector_weight(&vecs[r], &u));
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(EnergySampler {
            energies,
            weights,
            cumulative,
            spectrum: vals,
        })
    }

    /// One estimate for shot `shot`, with the sampled cluster (`None` on the
    /// failure branch). Every shot has its own RNG stream.
    pub fn draw(&self, cfg: &QpeConfig, shot: u64) -> (Option<usize>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(shot);
        if rng.gen::<f64>() < cfg.p {
            let r: f64 = rng.gen();
            let j = self.cumulative.iter().position(|&c| r < c).unwrap_or(self.energies.len() - 1);
            (Some(j), round_half_up(self.energies[j], cfg.bits))
        } else {
            let k = rng.gen_range(0..=1u64 << cfg.bits);
            (None, k as f64 * cfg.granularity())
        }
    }

    pub fn sample(&self, cfg: &QpeConfig, shot: u64) -> f64 {
        self.draw(cfg, shot).1
    }

    /// Empirical cluster frequencies over `shots` error-free shots.
    pub fn cluster_frequencies(&self, seed: u64, shots: u64) -> Vec<f64> {
        let cfg = QpeConfig { bits: 30, p: 1.0, reps: 1, seed };
        let mut counts = vec![0usize; self.energies.len()];
        for s in 0..shots {
            if let (Some(j), _) = self.draw(&cfg, s) {
                counts[j] += 1;
            }
        }
        counts.iter().map(|&c| c as f64 / shots as f64).collect()
    }
}

/// The sampled estimate for one shot; eigen-decomposes on every call.
pub fn sample_energy(inst: &GlhleInstance, cfg: &QpeConfig, shot: u64) -> Result<f64> {
    Ok(EnergySampler::new(inst)?.sample(cfg, shot))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Min,
    Majority,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub decision: Decision,
    pub rule: Rule,
    /// The value compared against the mapped midpoint.
    pub statistic: f64,
    pub midpoint: f64,
    /// Lower bound on the probability of answering correctly.
    pub success_bound: f64,
    pub samples: Vec<f64>,
}

fn midpoint(inst: &GlhleInstance) -> f64 {
    to_unit((inst.a + inst.b) / 2.0)
}

fn check_granularity(inst: &GlhleInstance, cfg: &QpeConfig) -> Result<()> {
    cfg.validate()?;
    // δ shrinks by half under the unit map
    let delta = inst.delta / 2.0;
    if cfg.granularity() >= delta / 2.0 {
        return Err(Error::precondition(format!(
            "grid 2^-{} is too coarse for delta = {} on the unit interval",
            cfg.bits, delta
        )));
    }
    Ok(())
}

fn shots(sampler: &EnergySampler, cfg: &QpeConfig, first: u64) -> Vec<f64> {
    (0..cfg.reps as u64).map(|k| sampler.sample(cfg, first + k)).collect()
}

/// Min rule: yes iff the smallest of `R` estimates is at most `(a + b)/2`.
pub fn decide_ground(inst: &GlhleInstance, sampler: &EnergySampler, cfg: &QpeConfig, first_shot: u64) -> Result<DecisionOutcome> {
    if inst.c != 0 {
        return Err(Error::precondition("the min rule decides the ground level only"));
    }
    check_granularity(inst, cfg)?;
    let samples = shots(sampler, cfg, first_shot);
    let stat = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mid = midpoint(inst);
    Ok(DecisionOutcome {
        decision: if stat <= mid { Decision::Yes } else { Decision::No },
        rule: Rule::Min,
        statistic: stat,
        midpoint: mid,
        success_bound: 1.0 - (1.0 - cfg.p * inst.zeta).powi(cfg.reps as i32),
        samples,
    })
}

/// Majority rule: the most frequent estimate (lowest on ties) against `(a + b)/2`.
/// Refuses when `p ζ <= 1/2`, where the target bin need not dominate.
pub fn decide_excited(inst: &GlhleInstance, sampler: &EnergySampler, cfg: &QpeConfig, first_shot: u64) -> Result<DecisionOutcome> {
    let q = cfg.p * inst.zeta;
    if q <= 0.5 {
        return Err(Error::precondition(format!(
            "p * zeta = {q} <= 1/2: the target level cannot be singled out by a majority vote"
        )));
    }
    check_granularity(inst, cfg)?;
    let samples = shots(sampler, cfg, first_shot);
    let mut bins: BTreeMap<u64, usize> = BTreeMap::new();
    let scale = (cfg.bits as f64).exp2();
    for s in &samples {
        *bins.entry((s * scale).round() as u64).or_default() += 1;
    }
    let (k, _) = bins
        .iter()
        .fold((0u64, 0usize), |best, (&k, &n)| if n > best.1 { (k, n) } else { best });
    let stat = k as f64 / scale;
    let mid = midpoint(inst);
    let r = cfg.reps as f64;
    Ok(DecisionOutcome {
        decision: if stat <= mid { Decision::Yes } else { Decision::No },
        rule: Rule::Majority,
        statistic: stat,
        midpoint: mid,
        success_bound: 1.0 - (-2.0 * r * (q - 0.5).powi(2)).exp(),
        samples,
    })
}

pub fn decide(inst: &GlhleInstance, sampler: &EnergySampler, cfg: &QpeConfig, rule: Rule, first_shot: u64) -> Result<DecisionOutcome> {
    match rule {
        Rule::Min => decide_ground(inst, sampler, cfg, first_shot),
        Rule::Majority => decide_excited(inst, sampler, cfg, first_shot),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub rule: Rule,
    pub trials: usize,
    pub correct: usize,
    pub rate: f64,
    pub success_bound: f64,
    pub truth: Decision,
}

/// Runs `trials` independent decisions; trial `k` uses shots `k R .. (k+1) R`.
pub fn monte_carlo(inst: &GlhleInstance, cfg: &QpeConfig, rule: Rule, trials: usize) -> Result<MonteCarloReport> {
    let truth = inst.truth.ok_or_else(|| Error::invalid("instance carries no truth label"))?;
    let sampler = EnergySampler::new(inst)?;
    let mut correct = 0;
    let mut bound = 0.0;
    for k in 0..trials as u64 {
        let o = decide(inst, &sampler, cfg, rule, k * cfg.reps as u64)?;
        bound = o.success_bound;
        if o.decision == truth {
            correct += 1;
        }
    }
    Ok(MonteCarloReport {
        rule,
        trials,
        correct,
        rate: correct as f64 / trials.max(1) as f64,
        success_bound: bound,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Diagonal `H` with `u` spread over two basis states.
    fn diag(vals: &[f64], support: Vec<usize>, a: f64, b: f64, c: usize, zeta: f64) -> GlhleInstance {
        GlhleInstance {
            h: SparseHermitian::from_diagonal(vals),
            u: GuidingState::new(vals.len(), support).unwrap(),
            a,
            b,
            c,
            zeta,
            delta: b - a,
            truth: None,
        }
    }

    fn cfg(p: f64, reps: usize, seed: u64) -> QpeConfig {
        QpeConfig { bits: 8, p, reps, seed }
    }

    #[test]
    fn exact_state_always_rounds_to_its_energy() {
        let i = diag(&[-0.5, 0.5], vec![0], -0.5, 0.0, 0, 1.0);
        let s = EnergySampler::new(&i).unwrap();
        for shot in 0..100 {
            assert_eq!(s.sample(&cfg(1.0, 1, 3), shot), 0.25);
        }
        let o = decide_ground(&i, &s, &cfg(1.0, 1, 3), 0).unwrap();
        assert_eq!(o.decision, Decision::Yes);
    }

    #[test]
    fn ground_frequency_matches_overlap() {
        // u = (e0 + e1 + e2)/sqrt(3), ζ = 1/3
        let i = diag(&[-0.4, 0.2, 0.6, 0.9], vec![0, 1, 2], -0.4, 0.0, 0, 1.0 / 3.0);
        let s = EnergySampler::new(&i).unwrap();
        let n = 10_000u64;
        let c = cfg(1.0, 1, 11);
        let hits = (0..n).filter(|&k| s.sample(&c, k) == round_half_up(to_unit(-0.4), 8)).count() as f64;
        let f = hits / n as f64;
        let sigma = (1.0 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
        assert!((f - 1.0 / 3.0).abs() <= 3.0 * sigma, "{f}");
    }

    #[test]
    fn failure_branch_is_uniform() {
        let i = diag(&[-0.4, 0.2], vec![0], -0.4, 0.0, 0, 1.0);
        let s = EnergySampler::new(&i).unwrap();
        let c = QpeConfig { bits: 4, p: f64::MIN_POSITIVE, reps: 1, seed: 5 };
        let n = 10_000u64;
        let mut xs: Vec<f64> = (0..n).map(|k| s.sample(&c, k)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // KS distance to the discrete uniform law on 17 grid points
        let ks = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let cdf = ((x * 16.0).round() + 1.0) / 17.0;
                (cdf - (k + 1) as f64 / n as f64).abs().min((cdf - 1.0 / 17.0 - k as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.36 / (n as f64).sqrt() + 1.0 / 17.0, "{ks}");
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn zero_overlap_below_b_never_says_yes() {
        let i = diag(&[-0.8, 0.4, 0.7], vec![1, 2], -0.8, 0.3, 0, 0.5);
        let s = EnergySampler::new(&i).unwrap();
        for k in 0..200 {
            let o = decide_ground(&i, &s, &cfg(1.0, 20, 9), k * 20).unwrap();
            assert!(o.statistic >= to_unit(0.3) - 1.0 / 256.0);
            assert_eq!(o.decision, Decision::No);
        }
    }

    #[test]
    fn majority_refuses_low_overlap() {
        let i = diag(&[-0.8, 0.4, 0.7], vec![0, 1], -0.8, 0.3, 1, 0.4);
        let s = EnergySampler::new(&i).unwrap();
        assert!(decide_excited(&i, &s, &cfg(1.0, 101, 1), 0).is_err());
    }

    #[test]
    fn majority_with_exact_state_is_deterministic() {
        let i = diag(&[-0.8, 0.1, 0.7], vec![1], 0.1, 0.5, 1, 1.0);
        let s = EnergySampler::new(&i).unwrap();
        for r in [1, 2, 7, 101] {
            assert_eq!(decide_excited(&i, &s, &cfg(1.0, r, 2), 0).unwrap().decision, Decision::Yes);
        }
    }

    #[test]
    fn coarse_grid_is_refused() {
        let i = diag(&[-0.5, 0.5], vec![0], -0.5, -0.4, 0, 1.0);
        let s = EnergySampler::new(&i).unwrap();
        assert!(decide_ground(&i, &s, &QpeConfig { bits: 4, p: 1.0, reps: 3, seed: 0 }, 0).is_err());
    }

    #[test]
    fn transcript_is_seeded() {
        let i = diag(&[-0.5, 0.1, 0.5], vec![0, 2], -0.5, 0.0, 0, 0.5);
        let s = EnergySampler::new(&i).unwrap();
        let a = decide_ground(&i, &s, &cfg(0.9, 25, 42), 0).unwrap();
        let b = decide_ground(&i, &s, &cfg(0.9, 25, 42), 0).unwrap();
        assert_eq!(a, b);
        let c = decide_ground(&i, &s, &cfg(0.9, 25, 43), 0).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn success_rate_grows_with_reps() {
        let mut i = diag(&[-0.5, 0.1, 0.5], vec![0, 1, 2], -0.5, 0.0, 0, 1.0 / 3.0);
        i.truth = Some(Decision::Yes);
        let rate = |r| monte_carlo(&i, &cfg(0.9, r, 7), Rule::Min, 1000).unwrap().rate;
        let (r1, r3, r6) = (rate(1), rate(3), rate(6));
        let band = 2.0 * (0.25f64 / 1000.0).sqrt();
        assert!(r3 + band >= r1 && r6 + band >= r3, "{r1} {r3} {r6}");
    }

    #[test]
    fn json_round_trip_validates() {
        let i = diag(&[-0.5, 0.5], vec![0], -0.5, 0.0, 0, 1.0);
        let s = serde_json::to_string(&i).unwrap();
        assert_eq!(GlhleInstance::from_json(&s).unwrap(), i);
        let mut bad = i.clone();
        bad.h = SparseHermitian::from_diagonal(&[-2.0, 0.5]);
        assert!(GlhleInstance::from_json(&serde_json::to_string(&bad).unwrap()).is_err());
    }
}
