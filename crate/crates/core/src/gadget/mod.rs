//! Three-to-two locality reduction: `H^(3) = c_r (Y - 6 sum_m B_m1 B_m2 B_m3)`
//! lifted to `H_eff` on `n + 3M` qubits and approximated by the 2-local `H~ = Q + P`.

mod decompose;
mod resolvent;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::eigen::{cluster_of, eigh_mat, eigvalsh, projector_weight, relative_gap, CLUSTER_TOL};
use crate::operators::small::{self, gates};
use crate::operators::{embed, operator_norm, LocalTerm, RegisterLayout, SparseHermitian, TermSum, Triplets};

pub use decompose::{decompose, PauliHamiltonian, PauliTerm};
pub use resolvent::{resolvent, self_energy, self_energy_from_resolvent, SelfEnergyReport};

pub const DEFAULT_KAPPA: f64 = 8.0;
pub const REASSEMBLY_TOL: f64 = 1e-10;
/// Largest `n + 3M` handled; everything here is dense.
pub const MAX_QUBITS: usize = 10;

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

/// One-qubit Hermitian block acting on a system qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub target: usize,
    pub matrix: Vec<C64>,
}

impl Block {
    pub fn new(target: usize, matrix: Vec<C64>) -> Self {
        Block { target, matrix }
    }

    /// `a I + b Z`.
    pub fn diagonal(target: usize, a: f64, b: f64) -> Self {
        Block::new(target, vec![small::c(a + b), small::ZERO, small::ZERO, small::c(a - b)])
    }

    fn eigenvalues(&self) -> (f64, f64) {
        let m = &self.matrix;
        let (a, d) = (m[0].re, m[3].re);
        let r = (0.25 * (a - d).powi(2) + m[1].norm_sqr()).sqrt();
        (0.5 * (a + d) - r, 0.5 * (a + d) + r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetSpec {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub cr: f64,
    pub mu: f64,
    #[serde(rename = "Y")]
    pub y: TermSum,
    #[serde(rename = "B")]
    pub b: Vec<[Block; 3]>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub limit: f64,
    /// Only enforced checks decide `pass`; the rest are recorded ratios.
    pub enforced: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl DecompositionReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.enforced && !c.pass).collect()
    }
}

impl GadgetSpec {
    pub fn with_mu(&self, mu: f64) -> Self {
        GadgetSpec { mu, ..self.clone() }
    }

    fn system_layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::new(&[("S", self.n)])
    }

    fn check_shape(&self) -> Result<()> {
        if self.b.len() != self.m {
            return Err(Error::invalid(format!("{} triples declared, {} given", self.m, self.b.len())));
        }
        if self.y.layout.total() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.y.layout.total(),
            });
        }
        for blk in self.b.iter().flatten() {
            if blk.target >= self.n {
                return Err(Error::QubitOutOfRange {
                    index: blk.target,
                    total: self.n,
                });
            }
            if blk.matrix.len() != 4 || small::hermitian_deviation(&blk.matrix) > 1e-12 {
                return Err(Error::invalid("blocks must be Hermitian 2x2"));
            }
        }
        if !(self.mu > 0.0) || !(self.cr >= 1.0) {
            return Err(Error::invalid("need mu > 0 and c_r >= 1"));
        }
        if self.n + 3 * self.m > MAX_QUBITS {
            return Err(Error::CapExceeded {
                qubits: self.n + 3 * self.m,
                cap: MAX_QUBITS,
                backend: "dense",
            });
        }
        Ok(())
    }

    /// `B_m1 B_m2 B_m3` on the system register.
    pub fn triple_product(&self, m: usize) -> Result<Mat<C64>> {
        let layout = self.system_layout()?;
        let mut out: Option<Mat<C64>> = None;
        for blk in &self.b[m] {
            let t = LocalTerm::new(1.0, vec![blk.target], blk.matrix.clone(), "B")?;
            let d = embed(&t, &layout)?.to_dense();
            out = Some(match out {
                None => d,
                Some(acc) => &acc * &d,
            });
        }
        out.ok_or_else(|| Error::invalid("empty triple"))
    }

    fn hermitian_triple(&self, m: usize) -> Result<SparseHermitian> {
        SparseHermitian::from_dense(&self.triple_product(m)?)
            .map_err(|_| Error::invalid(format!("triple {m} product is not Hermitian")))
    }

    /// `c_r (Y - 6 sum_m B_m1 B_m2 B_m3)`.
    pub fn reassemble(&self) -> Result<SparseHermitian> {
        self.check_shape()?;
        let mut parts = vec![(self.cr, self.y.assemble()?)];
        for m in 0..self.m {
            parts.push((-6.0 * self.cr, self.hermitian_triple(m)?));
        }
        let refs: Vec<(f64, &SparseHermitian)> = parts.iter().map(|(s, h)| (*s, h)).collect();
        SparseHermitian::lin_comb(&refs)
    }
}

pub fn validate_decomposition(h3: &SparseHermitian, spec: &GadgetSpec) -> Result<DecompositionReport> {
    spec.check_shape()?;
    if h3.dim() != 1 << spec.n {
        return Err(Error::DimensionMismatch {
            expected: 1 << spec.n,
            found: h3.dim(),
        });
    }
    let n3 = (spec.n as f64).powi(3);
    let mut checks = Vec::new();
    let mut push = |name: String, measured: f64, limit: f64, enforced: bool, pass: bool| {
        checks.push(Check {
            name,
            measured,
            limit,
            enforced,
            pass,
        })
    };
    for (m, triple) in spec.b.iter().enumerate() {
        for (i, blk) in triple.iter().enumerate() {
            let (lo, hi) = blk.eigenvalues();
            let floor = 1.0 / n3;
            push(format!("B[{m}][{i}] >= I/n^3"), lo, floor, true, lo >= floor - 1e-12);
            let cap = spec.kappa / n3;
            push(format!("|B[{m}][{i}]| <= kappa/n^3"), lo.abs().max(hi.abs()), cap, false, hi.abs().max(lo.abs()) <= cap);
        }
    }
    let ynorm = operator_norm(&spec.y.assemble()?)?;
    let ycap = spec.kappa / n3.powi(2);
    push("|Y| <= kappa/n^6".into(), ynorm, ycap, false, ynorm <= ycap);
    let diff = spec.reassemble()?.max_abs_diff(h3);
    push("reassembly".into(), diff, REASSEMBLY_TOL, true, diff <= REASSEMBLY_TOL);
    let pass = checks.iter().all(|c| !c.enforced || c.pass);
    Ok(DecompositionReport { checks, pass })
}

#[derive(Clone, Debug)]
pub struct GadgetInstance {
    pub spec: GadgetSpec,
    pub layout: RegisterLayout,
    /// `H_eff` on the full `n + 3M` register, logical `X` extended by zero.
    pub heff: SparseHermitian,
    /// Basis states with every triple in `|000>` or `|111>`, system-major.
    pub code_coords: Vec<usize>,
    pub q: TermSum,
    pub p: TermSum,
    /// `Λ = c_r μ^-3`.
    pub lambda: f64,
}

fn triple_mask(m: usize, total_m: usize) -> usize {
    0b111 << (3 * (total_m - 1 - m))
}

pub fn build_heff(spec: &GadgetSpec) -> Result<GadgetInstance> {
    spec.check_shape()?;
    let (n, mm) = (spec.n, spec.m);
    let layout = RegisterLayout::new(&[("S", n), ("G", 3 * mm)])?;
    let anc = 3 * mm;
    let dim = layout.dim();

    let mut trip = Triplets::new(dim);
    for t in &spec.y.terms {
        let lifted = LocalTerm { coefficient: t.coefficient * spec.cr, ..t.clone() };
        trip.extend_scaled(&embed(&lifted, &layout)?, 1.0);
    }
    for m in 0..mm {
        let bbb = spec.hermitian_triple(m)?;
        let mask = triple_mask(m, mm);
        for g in 0..1usize << anc {
            let bits = g & mask;
            if bits != 0 && bits != mask {
                continue;
            }
            let g2 = g ^ mask;
            for s1 in 0..1usize << n {
                for (s2, v) in bbb.row(s1) {
                    let (r, c) = ((s1 << anc) | g, (s2 << anc) | g2);
                    if r <= c {
                        trip.push(r, c, v * (-6.0 * spec.cr));
                    }
                }
            }
        }
    }
    let heff = trip.build()?;

    let mut code_coords = Vec::with_capacity((1 << n) << mm);
    for s in 0..1usize << n {
        for bits in 0..1usize << mm {
            let g: usize = (0..mm)
                .filter(|m| (bits >> (mm - 1 - m)) & 1 == 1)
                .map(|m| triple_mask(m, mm))
                .sum();
            code_coords.push((s << anc) | g);
        }
    }
    let (q, p) = build_gadget_on(spec, &layout)?;
    Ok(GadgetInstance {
        spec: spec.clone(),
        layout,
        heff,
        code_coords,
        q,
        p,
        lambda: spec.cr / spec.mu.powi(3),
    })
}

/// `Q` and `P` on a register of `n` system qubits followed by `3M` ancillas.
pub fn build_gadget(spec: &GadgetSpec) -> Result<(TermSum, TermSum)> {
    spec.check_shape()?;
    let layout = RegisterLayout::new(&[("S", spec.n), ("G", 3 * spec.m)])?;
    build_gadget_on(spec, &layout)
}

fn build_gadget_on(spec: &GadgetSpec, layout: &RegisterLayout) -> Result<(TermSum, TermSum)> {
    let (n, cr, mu) = (spec.n, spec.cr, spec.mu);
    let zz = small::kron(&gates::z(), &gates::z());
    let mut q = TermSum::new(layout.clone(), 2);
    let mut p = TermSum::new(layout.clone(), 2);
    let qs = -cr / (4.0 * mu.powi(3));
    for t in &spec.y.terms {
        p.push(LocalTerm { coefficient: t.coefficient * cr, ..t.clone() })?;
    }
    for (m, triple) in spec.b.iter().enumerate() {
        let a = [n + 3 * m, n + 3 * m + 1, n + 3 * m + 2];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            q.push(LocalTerm::new(qs, vec![a[i], a[j]], zz.clone(), "Q")?)?;
        }
        q.push(LocalTerm::new(-3.0 * qs, vec![a[0]], small::identity(2), "Q")?)?;
        for (i, blk) in triple.iter().enumerate() {
            let sq = small::matmul(&blk.matrix, &blk.matrix);
            p.push(LocalTerm::new(cr / mu, vec![blk.target], sq, "P")?)?;
            let bx = small::kron(&blk.matrix, &gates::x());
            p.push(LocalTerm::new(-cr / mu.powi(2), vec![blk.target, a[i]], bx, "P")?)?;
        }
    }
    Ok((q, p))
}

/// Low-sector closeness between `H~` below `Λ/2` and `H_eff` on the code space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub mu: f64,
    pub lambda: f64,
    pub p_norm: f64,
    pub low_dim: usize,
    pub code_dim: usize,
    pub differences: Vec<f64>,
    pub max_difference: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub level: usize,
    pub gamma: f64,
    pub measured: f64,
    pub bound: f64,
    pub vacuous: bool,
    pub margin: f64,
    pub pass: bool,
}

impl GadgetInstance {
    pub fn total_qubits(&self) -> usize {
        self.layout.total()
    }

    pub fn h_tilde(&self) -> Result<SparseHermitian> {
        SparseHermitian::lin_comb(&[(1.0, &self.q.assemble()?), (1.0, &self.p.assemble()?)])
    }

    pub fn p_norm(&self) -> Result<f64> {
        operator_norm(&self.p.assemble()?)
    }

    /// `H_eff` restricted to the code space.
    pub fn heff_code(&self) -> SparseHermitian {
        self.heff.principal_submatrix(&self.code_coords)
    }

    /// Columns of `P_+` in code coordinates: system states with every logical qubit in `|+>`.
    pub fn plus_basis(&self) -> Vec<Vec<C64>> {
        let per = 1usize << self.spec.m;
        let amp = C64::new(1.0 / (per as f64).sqrt(), 0.0);
        (0..1usize << self.spec.n)
            .map(|s| {
                let mut v = vec![small::ZERO; self.code_coords.len()];
                v[s * per..(s + 1) * per].iter_mut().for_each(|x| *x = amp);
                v
            })
            .collect()
    }

    /// `H_eff|_{P_+}` as a dense `2^n x 2^n` matrix.
    pub fn heff_plus(&self) -> Mat<C64> {
        let h = self.heff_code();
        let basis = self.plus_basis();
        let images: Vec<Vec<C64>> = basis.iter().map(|v| h.matvec(v)).collect();
        Mat::from_fn(basis.len(), basis.len(), |i, j| {
            crate::operators::sparse::dot(&basis[i], &images[j])
        })
    }

    /// Max difference between sorted `eig(H_eff|_{P_+})` and `eig(h3)`.
    pub fn plus_sector_residual(&self, h3: &SparseHermitian) -> Result<f64> {
        let (a, _) = eigh_mat(&self.heff_plus())?;
        let b = eigvalsh(h3)?;
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                found: a.len(),
            });
        }
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    fn require_small_p(&self) -> Result<f64> {
        let pn = self.p_norm()?;
        if pn > self.lambda / 2.0 {
            return Err(Error::precondition(format!(
                "‖P‖ = {pn} exceeds Λ/2 = {}; choose a smaller mu",
                self.lambda / 2.0
            )));
        }
        Ok(pn)
    }

    pub fn compare_spectra(&self) -> Result<ClosenessReport> {
        let p_norm = self.require_small_p()?;
        let eff = eigvalsh(&self.heff_code())?;
        let tilde = eigvalsh(&self.h_tilde()?)?;
        let low: Vec<f64> = tilde.into_iter().filter(|&v| v < self.lambda / 2.0).collect();
        let differences: Vec<f64> = low.iter().zip(&eff).map(|(a, b)| (a - b).abs()).collect();
        let max_difference = differences.iter().copied().fold(0.0, f64::max);
        let bound = self.spec.cr * self.spec.mu;
        Ok(ClosenessReport {
            mu: self.spec.mu,
            lambda: self.lambda,
            p_norm,
            low_dim: low.len(),
            code_dim: eff.len(),
            pass: low.len() == eff.len() && max_difference <= bound + 1e-9,
            differences,
            max_difference,
            bound,
        })
    }

    /// `|<v~_i|v_eff,i>|^2` against
    /// `1 - (‖P‖/(Λ - λ_i(H_eff) - c_r μ) + sqrt(2 c_r μ/γ_i))^2`.
    pub fn fidelity_bound_check(&self, i: usize) -> Result<FidelityReport> {
        let p_norm = self.require_small_p()?;
        let (ev, evecs) = eigh_mat(&self.heff_code().to_dense())?;
        if i >= ev.len() {
            return Err(Error::invalid(format!("level {i} outside the low sector of size {}", ev.len())));
        }
        let (tv, tvecs) = eigh_mat(&self.h_tilde()?.to_dense())?;
        let mut v_eff = vec![small::ZERO; self.layout.dim()];
        for (k, &c) in self.code_coords.iter().enumerate() {
            v_eff[c] = evecs[i][k];
        }
        let cluster = cluster_of(&tv, i, CLUSTER_TOL);
        let measured = projector_weight(&tvecs[cluster], &v_eff);
        let gamma = relative_gap(&ev, i);
        let crmu = self.spec.cr * self.spec.mu;
        let vacuous = gamma <= 2.0 * crmu;
        let denom = self.lambda - ev[i] - crmu;
        let bound = if denom <= 0.0 || gamma == 0.0 {
            f64::NEG_INFINITY
        } else {
            1.0 - (p_norm / denom + (2.0 * crmu / gamma).sqrt()).powi(2)
        };
        let margin = measured - bound;
        Ok(FidelityReport {
            level: i,
            gamma,
            measured,
            bound,
            vacuous,
            margin,
            pass: measured >= bound - 1e-9,
        })
    }

    /// Ascending order of the first `k` low levels of `H~`, mapped through their
    /// best-overlap `H_eff` partner; the identity permutation means ordering is respected.
    pub fn level_permutation(&self, k: usize) -> Result<Vec<usize>> {
        let (_, evecs) = eigh_mat(&self.heff_code().to_dense())?;
        let (_, tvecs) = eigh_mat(&self.h_tilde()?.to_dense())?;
        let k = k.min(evecs.len());
        let lifted: Vec<Vec<C64>> = evecs[..k]
            .iter()
            .map(|v| {
                let mut w = vec![small::ZERO; self.layout.dim()];
                for (j, &c) in self.code_coords.iter().enumerate() {
                    w[c] = v[j];
                }
                w
            })
            .collect();
        Ok(tvecs[..k]
            .iter()
            .map(|t| {
                (0..k)
                    .max_by(|&a, &b| {
                        let fa = crate::operators::sparse::dot(t, &lifted[a]).norm_sqr();
                        let fb = crate::operators::sparse::dot(t, &lifted[b]).norm_sqr();
                        fa.total_cmp(&fb)
                    })
                    .unwrap_or(0)
            })
            .collect())
    }

    /// Coordinates of the null space of `Q`.
    pub fn low_coords(&self) -> &[usize] {
        &self.code_coords
    }
}

/// The two-qubit, single-triple toy used throughout the checks.
pub fn toy_spec(mu: f64) -> Result<GadgetSpec> {
    let layout = RegisterLayout::new(&[("S", 2)])?;
    let mut y = TermSum::new(layout, 2);
    y.push(LocalTerm::new(0.02, vec![0, 1], small::kron(&gates::z(), &gates::z()), "Y")?)?;
    y.push(LocalTerm::new(0.05, vec![0], gates::x(), "Y")?)?;
    y.push(LocalTerm::new(0.03, vec![1], gates::x(), "Y")?)?;
    Ok(GadgetSpec {
        n: 2,
        m: 1,
        cr: 1.0,
        mu,
        y,
        b: vec![[
            Block::diagonal(0, 0.4, 0.25),
            Block::diagonal(1, 0.35, 0.2),
            Block::diagonal(0, 0.3, 0.15),
        ]],
        kappa: DEFAULT_KAPPA,
    })
}
