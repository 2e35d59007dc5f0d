use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::GadgetInstance;
use crate::error::{Error, Result};
use crate::operators::eigen::{eigh_mat, eigvalsh};
use crate::operators::{operator_norm, SparseHermitian};

const RESOLVENT_TOL: f64 = 1e-8;

fn block(m: &Mat<C64>, rows: &[usize], cols: &[usize]) -> Mat<C64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn complement(dim: usize, low: &[usize]) -> Vec<usize> {
    let mut keep = vec![true; dim];
    low.iter().for_each(|&i| keep[i] = false);
    (0..dim).filter(|&i| keep[i]).collect()
}

fn shifted_negative(m: &Mat<C64>, z: C64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let d = if i == j { z } else { C64::new(0.0, 0.0) };
        d - m[(i, j)]
    })
}

fn solve_checked(a: &Mat<C64>, b: &Mat<C64>) -> Result<Mat<C64>> {
    let x = a.partial_piv_lu().solve(b);
    let r = a * &x - b;
    let scale = b.norm_max().max(1.0) * (1.0 + a.norm_max() * x.norm_max());
    let res = r.norm_max() / scale;
    if !res.is_finite() || res > RESOLVENT_TOL {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: res,
        });
    }
    Ok(x)
}

/// `G(z) = (z I - H)^-1`.
pub fn resolvent(h: &SparseHermitian, z: C64) -> Result<Mat<C64>> {
    let norm = operator_norm(h)?;
    let gap = eigvalsh(h)?
        .iter()
        .map(|&l| (z - l).norm())
        .fold(f64::INFINITY, f64::min);
    if gap < 1e-6 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::precondition(format!("z is {gap:e} from the spectrum")));
    }
    let a = shifted_negative(&h.to_dense(), z);
    solve_checked(&a, &Mat::identity(h.dim(), h.dim()))
}

/// `Σ_-(z) = H_-- + H_-+ (z - H_++)^-1 H_+-` on the coordinates `low`.
/// Equal to `z I_- - G_--(z)^-1` wherever the resolvent exists, and still
/// defined at eigenvalues of `H` that avoid the spectrum of `H_++`.
pub fn self_energy(h: &SparseHermitian, low: &[usize], z: f64) -> Result<Mat<C64>> {
    let d = h.to_dense();
    let high = complement(h.dim(), low);
    let hmm = block(&d, low, low);
    if high.is_empty() {
        return Ok(hmm);
    }
    let hmp = block(&d, low, &high);
    let hpm = block(&d, &high, low);
    let hpp = block(&d, &high, &high);
    let a = shifted_negative(&hpp, C64::new(z, 0.0));
    let x = solve_checked(&a, &hpm)?;
    Ok(&hmm + &hmp * &x)
}

/// `z I_- - G_--(z)^-1` straight from the resolvent.
pub fn self_energy_from_resolvent(h: &SparseHermitian, low: &[usize], z: C64) -> Result<Mat<C64>> {
    let g = resolvent(h, z)?;
    let gmm = block(&g, low, low);
    let k = low.len();
    let inv = solve_checked(&gmm, &Mat::identity(k, k))?;
    Ok(shifted_negative(&inv, z))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyLevel {
    pub level: usize,
    pub energy: f64,
    /// `‖Σ_-(λ_i) v_- - λ_i v_-‖`.
    pub residual: f64,
    /// `‖Σ_-(λ_i) - H_eff‖` on the code space.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyReport {
    pub levels: Vec<SelfEnergyLevel>,
    pub max_residual: f64,
    pub max_deviation: f64,
    pub bound: f64,
}

fn spectral_norm(m: &Mat<C64>) -> Result<f64> {
    // Hermitian up to rounding; symmetrize before the eigensolve
    let h = Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let (vals, _) = eigh_mat(&h)?;
    Ok(vals.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

impl GadgetInstance {
    /// Eigen-relation of the self-energy for every `H~` level below `Λ/2`,
    /// partitioned by the null space of `Q`.
    pub fn self_energy_report(&self) -> Result<SelfEnergyReport> {
        let h = self.h_tilde()?;
        let (vals, vecs) = eigh_mat(&h.to_dense())?;
        let low = self.low_coords();
        let heff = self.heff_code().to_dense();
        let mut levels = Vec::new();
        for (i, &lam) in vals.iter().enumerate().filter(|(_, &l)| l < self.lambda / 2.0) {
            let sigma = self_energy(&h, low, lam)?;
            let v: Mat<C64> = Mat::from_fn(low.len(), 1, |k, _| vecs[i][low[k]]);
            let r = &sigma * &v - Mat::from_fn(low.len(), 1, |k, _| v[(k, 0)] * lam);
            let residual = r.norm_l2();
            let deviation = spectral_norm(&(&sigma - &heff))?;
            levels.push(SelfEnergyLevel {
                level: i,
                energy: lam,
                residual,
                deviation,
            });
        }
        Ok(SelfEnergyReport {
            max_residual: levels.iter().map(|l| l.residual).fold(0.0, f64::max),
            max_deviation: levels.iter().map(|l| l.deviation).fold(0.0, f64::max),
            bound: self.spec.cr * self.spec.mu,
            levels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::{build_heff, toy_spec};

    fn random_hermitian(d: usize, seed: u64) -> SparseHermitian {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mat::<C64>::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..d {
                let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        SparseHermitian::from_dense(&m).unwrap()
    }

    #[test]
    fn trivial_resolvents() {
        let g = resolvent(&SparseHermitian::zero(3), C64::new(1.0, 0.0)).unwrap();
        assert!((&g - &Mat::<C64>::identity(3, 3)).norm_max() < 1e-15);
        let g = resolvent(&SparseHermitian::from_diagonal(&[1.0, 2.0]), C64::new(3.0, 0.0)).unwrap();
        assert!((g[(0, 0)].re - 0.5).abs() < 1e-15 && (g[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!(resolvent(&SparseHermitian::from_diagonal(&[1.0, 2.0]), C64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn random_resolvent_identity() {
        let h = random_hermitian(16, 7);
        let z = C64::new(0.0, 1.0);
        let g = resolvent(&h, z).unwrap();
        let a = shifted_negative(&h.to_dense(), z);
        assert!((&a * &g - Mat::<C64>::identity(16, 16)).norm_max() < 1e-10);
    }

    #[test]
    fn schur_form_matches_definition() {
        let h = random_hermitian(12, 3);
        let low = [0, 3, 5, 9];
        let z = C64::new(0.37, 0.0);
        let a = self_energy(&h, &low, z.re).unwrap();
        let b = self_energy_from_resolvent(&h, &low, z).unwrap();
        assert!((&a - &b).norm_max() < 1e-9);
    }

    #[test]
    fn decoupled_blocks() {
        let h = SparseHermitian::from_diagonal(&[0.1, 5.0, -0.2, 7.0]);
        let s = self_energy(&h, &[0, 2], 0.3).unwrap();
        assert!((s[(0, 0)].re - 0.1).abs() < 1e-15 && (s[(1, 1)].re + 0.2).abs() < 1e-15);
        assert!(s[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn toy_eigen_relation() {
        for mu in [0.2, 0.1, 0.05] {
            let g = build_heff(&toy_spec(mu).unwrap()).unwrap();
            let r = g.self_energy_report().unwrap();
            assert_eq!(r.levels.len(), 8);
            assert!(r.max_residual <= 1e-7, "{r:?}");
            assert!(r.max_deviation.is_finite());
        }
    }
}
