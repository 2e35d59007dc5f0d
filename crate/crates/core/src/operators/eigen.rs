use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::DENSE_QUBIT_CAP;
use super::schur::{FeshbachSolver, Partition};
use super::sparse::{self, SparseHermitian};
use crate::error::{Error, Result};

pub const DENSE_TOL: f64 = 1e-9;
pub const KRYLOV_TOL: f64 = 1e-7;
/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Largest dimension for which `operator_norm` diagonalizes densely.
pub const DENSE_NORM_LIMIT: usize = 1024;

const LANCZOS_BASIS: usize = 120;
const LANCZOS_RESTARTS: usize = 400;
const LANCZOS_SEED: u64 = 0x5eed_1a2c;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Krylov,
    Subspace,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Dense => "dense",
            Backend::Krylov => "krylov",
            Backend::Subspace => "subspace",
        })
    }
}

/// How `lowest_eigenpairs` should solve.
#[derive(Clone, Debug)]
pub enum Method {
    Dense,
    Krylov,
    /// Exact Schur-complement reduction onto a coordinate subspace.
    Subspace(Partition),
}

#[derive(Clone, Debug)]
pub struct EigenSolveResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<Vec<C64>>>,
    pub residuals: Vec<f64>,
    pub backend: Backend,
}

impl EigenSolveResult {
    pub fn vector(&self, i: usize) -> Option<&[C64]> {
        self.eigenvectors.as_ref().map(|v| v[i].as_slice())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `lambda_1 - lambda_0`, if at least two values were computed.
    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() >= 2).then(|| self.eigenvalues[1] - self.eigenvalues[0])
    }
}

fn check_dense_cap(dim: usize) -> Result<()> {
    if dim > 1 << DENSE_QUBIT_CAP {
        return Err(Error::CapExceeded {
            qubits: dim.next_power_of_two().trailing_zeros() as usize,
            cap: DENSE_QUBIT_CAP,
            backend: "dense",
        });
    }
    Ok(())
}

fn evd_failure() -> Error {
    Error::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
    }
}

/// All eigenvalues, ascending.
pub fn eigvalsh(h: &SparseHermitian) -> Result<Vec<f64>> {
    check_dense_cap(h.dim())?;
    if h.dim() == 0 {
        return Ok(Vec::new());
    }
    let mut w = if h.is_real() {
        h.to_dense_real()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| evd_failure())?
    } else {
        h.to_dense()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| evd_failure())?
    };
    w.sort_by(f64::total_cmp);
    Ok(w)
}

/// Full dense eigendecomposition: ascending eigenvalues and matching unit columns.
pub fn eigh(h: &SparseHermitian) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    check_dense_cap(h.dim())?;
    eigh_dense(h)
}

fn eigh_dense(h: &SparseHermitian) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = h.dim();
    if h.is_real() {
        let e = h
            .to_dense_real()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| evd_failure())?;
        let s = e.S().column_vector();
        let u = e.U();
        let vals = (0..n).map(|i| s[i]).collect();
        let vecs = (0..n)
            .map(|j| (0..n).map(|i| C64::new(u[(i, j)], 0.0)).collect())
            .collect();
        Ok((vals, vecs))
    } else {
        let (vals, vecs) = eigh_mat(&h.to_dense())?;
        Ok((vals, vecs))
    }
}

/// Dense eigendecomposition of a Hermitian `faer` matrix (lower triangle read).
pub fn eigh_mat(m: &Mat<C64>) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = m.nrows();
    let e = m.self_adjoint_eigen(Side::Lower).map_err(|_| evd_failure())?;
    let s = e.S().column_vector();
    let u = e.U();
    let vals = (0..n).map(|i| s[i].re).collect();
    let vecs = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((vals, vecs))
}

pub fn residual(h: &SparseHermitian, lambda: f64, v: &[C64]) -> f64 {
    let mut r = h.matvec(v);
    sparse::axpy(C64::new(-lambda, 0.0), v, &mut r);
    sparse::norm(&r)
}

/// The `k` smallest eigenpairs.
pub fn lowest_eigenpairs(h: &SparseHermitian, k: usize, method: &Method) -> Result<EigenSolveResult> {
    if k == 0 || k > h.dim() {
        return Err(Error::precondition(format!(
            "requested {k} eigenpairs of a {}-dimensional operator",
            h.dim()
        )));
    }
    match method {
        Method::Dense => {
            let (vals, vecs) = eigh(h)?;
            let vecs: Vec<Vec<C64>> = vecs.into_iter().take(k).collect();
            let residuals = vals.iter().zip(&vecs).map(|(l, v)| residual(h, *l, v)).collect();
            Ok(EigenSolveResult {
                eigenvalues: vals[..k].to_vec(),
                eigenvectors: Some(vecs),
                residuals,
                backend: Backend::Dense,
            })
        }
        Method::Krylov => lanczos_lowest(h, k),
        Method::Subspace(p) => FeshbachSolver::new(h, p.clone())?.lowest(k),
    }
}

/// `λ₀`: dense for small operators, Lanczos otherwise.
pub fn ground_energy(h: &SparseHermitian) -> Result<f64> {
    let m = if h.dim() <= DENSE_NORM_LIMIT { Method::Dense } else { Method::Krylov };
    Ok(lowest_eigenpairs(h, 1, &m)?.eigenvalues[0])
}

/// Largest absolute row sum, an upper bound on the operator norm.
pub fn row_sum_bound(h: &SparseHermitian) -> f64 {
    (0..h.dim())
        .map(|r| h.row(r).map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `max |lambda|`: dense for small operators, Lanczos on both ends otherwise.
pub fn operator_norm(h: &SparseHermitian) -> Result<f64> {
    if h.nnz() == 0 {
        return Ok(0.0);
    }
    if h.dim() <= DENSE_NORM_LIMIT {
        let w = eigvalsh(h)?;
        return Ok(w.iter().fold(0.0f64, |a, x| a.max(x.abs())));
    }
    let lo = lanczos_lowest(h, 1)?.eigenvalues[0];
    let hi = -lanczos_lowest(&h.scaled(-1.0), 1)?.eigenvalues[0];
    Ok(lo.abs().max(hi.abs()))
}

/// Groups ascending eigenvalues into runs whose neighbours differ by at most `tol`.
pub fn clusters(eigenvalues: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=eigenvalues.len() {
        if i == eigenvalues.len() || eigenvalues[i] - eigenvalues[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// The degenerate cluster containing index `i`.
pub fn cluster_of(eigenvalues: &[f64], i: usize, tol: f64) -> std::ops::Range<usize> {
    clusters(eigenvalues, tol)
        .into_iter()
        .find(|r| r.contains(&i))
        .unwrap_or(i..i + 1)
}

/// `sum_j |<v_j|u>|^2` over the given (orthonormal) vectors.
pub fn projector_weight(vectors: &[Vec<C64>], u: &[C64]) -> f64 {
    vectors.iter().map(|v| sparse::dot(v, u).norm_sqr()).sum()
}

/// Minimum relative spectral gap `min_{j != i} |lambda_j - lambda_i|`.
pub fn relative_gap(eigenvalues: &[f64], i: usize) -> f64 {
    eigenvalues
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, l)| (l - eigenvalues[i]).abs())
        .fold(f64::INFINITY, f64::min)
}

fn project_out(v: &mut [C64], basis: &[Vec<C64>]) {
    for q in basis {
        let p = sparse::dot(q, v);
        sparse::axpy(-p, q, v);
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    sparse::normalize(&mut v);
    v
}

/// Smallest eigenpairs by Lanczos with full reorthogonalization. Each pair is
/// found on the operator deflated against the pairs already found, so
/// multiplicities are resolved one vector at a time.
fn lanczos_lowest(h: &SparseHermitian, k: usize) -> Result<EigenSolveResult> {
    let dim = h.dim();
    let scale = row_sum_bound(h).max(1.0);
    let tol = KRYLOV_TOL * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut found: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut vals = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for _ in 0..k {
        let mut start = random_unit(dim, &mut rng);
        let mut last = f64::INFINITY;
        let mut done = None;
        for restart in 0..LANCZOS_RESTARTS {
            let (theta, x) = lanczos_run(h, &found, start, dim - found.len())?;
            let mut r = h.matvec(&x);
            project_out(&mut r, &found);
            sparse::axpy(C64::new(-theta, 0.0), &x, &mut r);
            let res = sparse::norm(&r);
            last = res;
            if res <= tol {
                done = Some((theta, x));
                break;
            }
            start = x;
            if restart % 8 == 7 {
                // A small random kick keeps restarts from stalling on a
                // vector orthogonal to the target.
                let kick = random_unit(dim, &mut rng);
                sparse::axpy(C64::new(1e-3, 0.0), &kick, &mut start);
                sparse::normalize(&mut start);
            }
        }
        let (theta, x) = done.ok_or(Error::NoConvergence {
            iterations: LANCZOS_RESTARTS,
            residual: last,
        })?;
        residuals.push(residual(h, theta, &x));
        vals.push(theta);
        found.push(x);
    }
    // Deflation order is ascending in exact arithmetic; sort to be safe.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    Ok(EigenSolveResult {
        eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
        eigenvectors: Some(order.iter().map(|&i| found[i].clone()).collect()),
        backend: Backend::Krylov,
    })
}

/// One Lanczos pass from `start`, returning the lowest Ritz pair.
fn lanczos_run(
    h: &SparseHermitian,
    deflate: &[Vec<C64>],
    mut start: Vec<C64>,
    available: usize,
) -> Result<(f64, Vec<C64>)> {
    let m_max = LANCZOS_BASIS.min(available).max(1);
    project_out(&mut start, deflate);
    project_out(&mut start, deflate);
    if sparse::normalize(&mut start) < 1e-300 {
        return Err(Error::precondition("Lanczos start vector lies in the deflated space"));
    }
    let mut basis: Vec<Vec<C64>> = vec![start];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); h.dim()];
    loop {
        let j = basis.len() - 1;
        h.matvec_into(&basis[j], &mut w);
        project_out(&mut w, deflate);
        let a = sparse::dot(&basis[j], &w).re;
        alpha.push(a);
        if basis.len() == m_max {
            break;
        }
        for _ in 0..2 {
            project_out(&mut w, deflate);
            project_out(&mut w, &basis);
        }
        let b = sparse::normalize(&mut w);
        if b < 1e-12 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        basis.push(w.clone());
    }
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let e = t.self_adjoint_eigen(Side::Lower).map_err(|_| evd_failure())?;
    let s = e.S().column_vector();
    let u = e.U();
    let mut lo = 0;
    for i in 1..m {
        if s[i] < s[lo] {
            lo = i;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); h.dim()];
    for (i, q) in basis.iter().enumerate().take(m) {
        sparse::axpy(C64::new(u[(i, lo)], 0.0), q, &mut x);
    }
    project_out(&mut x, deflate);
    sparse::normalize(&mut x);
    Ok((s[lo], x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::sparse::Triplets;

    pub(crate) fn random_hermitian(n: usize, seed: u64) -> SparseHermitian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Triplets::new(n);
        for i in 0..n {
            t.push(i, i, C64::new(rng.gen::<f64>() - 0.5, 0.0));
            for j in i + 1..n {
                t.push(i, j, C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            }
        }
        t.build().unwrap()
    }

    #[test]
    fn diagonal_lowest_two() {
        let h = SparseHermitian::from_diagonal(&[5.0, 1.0, 3.0]);
        for m in [Method::Dense, Method::Krylov] {
            let r = lowest_eigenpairs(&h, 2, &m).unwrap();
            assert!((r.eigenvalues[0] - 1.0).abs() < 1e-10);
            assert!((r.eigenvalues[1] - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_operator() {
        let h = SparseHermitian::zero(4);
        let r = lowest_eigenpairs(&h, 1, &Method::Dense).unwrap();
        assert_eq!(r.eigenvalues, vec![0.0]);
        assert!((sparse::norm(r.vector(0).unwrap()) - 1.0).abs() < 1e-12);
        assert_eq!(operator_norm(&h).unwrap(), 0.0);
    }

    #[test]
    fn norm_of_small_diagonal() {
        let h = SparseHermitian::from_diagonal(&[-3.0, 2.0]);
        assert!((operator_norm(&h).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_norm_matches_dense() {
        let h = random_hermitian(64, 7);
        let w = eigvalsh(&h).unwrap();
        let want = w[0].abs().max(w[63].abs());
        assert!((operator_norm(&h).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn krylov_norm_path_matches_dense() {
        let h = random_hermitian(DENSE_NORM_LIMIT + 8, 3);
        let w = eigvalsh(&h).unwrap();
        let want = w[0].abs().max(w.last().unwrap().abs());
        assert!((operator_norm(&h).unwrap() - want).abs() < 1e-7 * want.max(1.0));
    }

    #[test]
    fn krylov_resolves_degeneracy() {
        let h = SparseHermitian::from_diagonal(&[2.0, 0.5, 0.5, 0.5, 1.0, 3.0, 4.0, 5.0]);
        let r = lowest_eigenpairs(&h, 4, &Method::Krylov).unwrap();
        for (a, b) in r.eigenvalues.iter().zip([0.5, 0.5, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_equals_eigenvalue_sum() {
        let h = random_hermitian(20, 11);
        let w = eigvalsh(&h).unwrap();
        assert!((w.iter().sum::<f64>() - h.trace()).abs() < 1e-8);
    }

    #[test]
    fn complex_dense_vectors_have_small_residuals() {
        let h = random_hermitian(12, 5);
        let r = lowest_eigenpairs(&h, 12, &Method::Dense).unwrap();
        assert!(r.max_residual() < DENSE_TOL);
        assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cluster_grouping() {
        let c = clusters(&[0.0, 0.0, 1.0, 1.0 + 1e-12, 2.0], 1e-9);
        assert_eq!(c, vec![0..2, 2..4, 4..5]);
        assert_eq!(cluster_of(&[0.0, 0.0, 1.0], 1, 1e-9), 0..2);
    }

    #[test]
    fn relative_gap_two_ways() {
        let w = [0.0, 0.3, 1.0, 1.1];
        assert!((relative_gap(&w, 2) - 0.1).abs() < 1e-15);
        assert_eq!(relative_gap(&w, 0), 0.3);
    }

    #[test]
    fn bad_k_rejected() {
        let h = SparseHermitian::identity(2);
        assert!(lowest_eigenpairs(&h, 0, &Method::Dense).is_err());
        assert!(lowest_eigenpairs(&h, 3, &Method::Dense).is_err());
    }
}
