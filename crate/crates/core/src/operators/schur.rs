//! Exact low-spectrum solver that folds a large, strongly penalized block
//! into an energy-dependent effective operator on a small coordinate block.
//!
//! With `H = [[H_PP, H_PQ], [H_QP, H_QQ]]` and `lambda` below the spectrum of
//! `H_QQ`, `lambda` is an eigenvalue of `H` iff it is an eigenvalue of
//! `H_eff(lambda) = H_PP - H_PQ (H_QQ - lambda)^-1 H_QP`. The m-th eigenvalue
//! of `H_eff(lambda)` decreases in `lambda`, so its fixed point is unique.

use faer::Mat;
use num_complex::Complex64 as C64;

use super::eigen::{eigh_mat, Backend, EigenSolveResult, CLUSTER_TOL};
use super::sparse::{self, SparseHermitian};
use crate::error::{Error, Result};

const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_ITERS: usize = 500;
const CG_TOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct Partition {
    /// Coordinates spanning the kept block `P`.
    pub coords: Vec<usize>,
    /// Optional orthonormal columns inside `span(coords)`, in `P` coordinates.
    /// When present the solve acts on `span(inner) + Q` only.
    pub inner: Option<Vec<Vec<C64>>>,
}

impl Partition {
    pub fn coordinates(coords: Vec<usize>) -> Self {
        Partition {
            coords,
            inner: None,
        }
    }

    pub fn with_inner(coords: Vec<usize>, inner: Vec<Vec<C64>>) -> Self {
        Partition {
            coords,
            inner: Some(inner),
        }
    }
}

pub struct FeshbachSolver<'a> {
    h: &'a SparseHermitian,
    part: Partition,
    q_idx: Vec<usize>,
    hpp: Mat<C64>,
    coupling: Vec<Vec<C64>>,
    hqq: SparseHermitian,
    precond: Vec<f64>,
    lower: f64,
    warm: Vec<Vec<C64>>,
}

impl<'a> FeshbachSolver<'a> {
    pub fn new(h: &'a SparseHermitian, part: Partition) -> Result<Self> {
        let dim = h.dim();
        let mut in_p = vec![usize::MAX; dim];
        for (k, &i) in part.coords.iter().enumerate() {
            if i >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: i + 1,
                });
            }
            in_p[i] = k;
        }
        let q_idx: Vec<usize> = (0..dim).filter(|&i| in_p[i] == usize::MAX).collect();
        let mut q_pos = vec![usize::MAX; dim];
        for (k, &i) in q_idx.iter().enumerate() {
            q_pos[i] = k;
        }
        let np = part.coords.len();
        let inner: Vec<Vec<C64>> = match &part.inner {
            Some(cols) => {
                if cols.iter().any(|c| c.len() != np) {
                    return Err(Error::invalid("inner basis columns must have one entry per kept coordinate"));
                }
                cols.clone()
            }
            None => (0..np)
                .map(|j| {
                    let mut e = vec![C64::new(0.0, 0.0); np];
                    e[j] = C64::new(1.0, 0.0);
                    e
                })
                .collect(),
        };
        let m = inner.len();
        if m == 0 {
            return Err(Error::precondition("kept block is empty"));
        }
        // Column i of H restricted to Q is the conjugate of row i.
        let mut h_qp: Vec<Vec<(usize, C64)>> = Vec::with_capacity(np);
        let mut h_pp = Mat::<C64>::zeros(np, np);
        for (k, &i) in part.coords.iter().enumerate() {
            let mut col = Vec::new();
            for (c, v) in h.row(i) {
                if q_pos[c] != usize::MAX {
                    col.push((q_pos[c], v.conj()));
                } else {
                    h_pp[(k, in_p[c])] = v;
                }
            }
            h_qp.push(col);
        }
        let coupling: Vec<Vec<C64>> = inner
            .iter()
            .map(|b| {
                let mut v = vec![C64::new(0.0, 0.0); q_idx.len()];
                for (k, col) in h_qp.iter().enumerate() {
                    if b[k].norm() == 0.0 {
                        continue;
                    }
                    for &(q, x) in col {
                        v[q] += x * b[k];
                    }
                }
                v
            })
            .collect();
        let hpp = Mat::<C64>::from_fn(m, m, |a, b| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..np {
                if inner[a][i].norm() == 0.0 {
                    continue;
                }
                for j in 0..np {
                    acc += inner[a][i].conj() * h_pp[(i, j)] * inner[b][j];
                }
            }
            acc
        });
        let hqq = h.principal_submatrix(&q_idx);
        let precond = hqq.diagonal();
        let lower = if q_idx.is_empty() {
            f64::INFINITY
        } else {
            hqq.gershgorin_lower()
        };
        let part = Partition {
            coords: part.coords,
            inner: Some(inner),
        };
        Ok(FeshbachSolver {
            h,
            part,
            warm: vec![Vec::new(); m],
            q_idx,
            hpp,
            coupling,
            hqq,
            precond,
            lower,
        })
    }

    /// Dimension of the kept block.
    pub fn kept_dim(&self) -> usize {
        self.coupling.len()
    }

    /// Gershgorin lower bound on the folded block.
    pub fn folded_lower_bound(&self) -> f64 {
        self.lower
    }

    fn check_energy(&self, lambda: f64) -> Result<()> {
        if lambda >= self.lower {
            return Err(Error::precondition(format!(
                "energy {lambda:.6e} is not below the folded block's lower bound {:.6e}",
                self.lower
            )));
        }
        Ok(())
    }

    /// `H_eff(lambda)` together with the solves `(H_QQ - lambda)^-1 H_QP` per column.
    fn effective_with_solves(&mut self, lambda: f64) -> Result<(Mat<C64>, Vec<Vec<C64>>)> {
        self.check_energy(lambda)?;
        let m = self.kept_dim();
        let mut solves = Vec::with_capacity(m);
        for j in 0..m {
            let x = pcg(
                &self.hqq,
                &self.precond,
                lambda,
                &self.coupling[j],
                &self.warm[j],
            )?;
            self.warm[j] = x.clone();
            solves.push(x);
        }
        let mut heff = self.hpp.clone();
        for a in 0..m {
            for b in 0..m {
                heff[(a, b)] -= sparse::dot(&self.coupling[a], &solves[b]);
            }
        }
        for a in 0..m {
            for b in a + 1..m {
                let s = (heff[(a, b)] + heff[(b, a)].conj()) * 0.5;
                heff[(a, b)] = s;
                heff[(b, a)] = s.conj();
            }
            heff[(a, a)].im = 0.0;
        }
        Ok((heff, solves))
    }

    pub fn effective(&mut self, lambda: f64) -> Result<Mat<C64>> {
        Ok(self.effective_with_solves(lambda)?.0)
    }

    fn fixed_point(&mut self, index: usize, start: f64) -> Result<f64> {
        let mut lambda = start.min(self.lower - 1e-9 * self.lower.abs().max(1.0));
        let mut step = f64::INFINITY;
        for _ in 0..FIXED_POINT_ITERS {
            let (heff, _) = self.effective_with_solves(lambda)?;
            let next = eigh_mat(&heff)?.0[index];
            step = (next - lambda).abs();
            lambda = next;
            if step <= FIXED_POINT_TOL * lambda.abs().max(1.0) {
                return Ok(lambda);
            }
        }
        Err(Error::NoConvergence {
            iterations: FIXED_POINT_ITERS,
            residual: step,
        })
    }

    fn embed(&self, coeffs: &[C64], folded: &[C64]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.h.dim()];
        let inner = self.part.inner.as_ref().expect("inner basis set in new");
        for (b, &a) in inner.iter().zip(coeffs) {
            for (k, &x) in b.iter().enumerate() {
                v[self.part.coords[k]] += a * x;
            }
        }
        for (k, &q) in self.q_idx.iter().enumerate() {
            v[q] = folded[k];
        }
        v
    }

    /// `||Pi (H v) - lambda v||` with `Pi` the projector onto the solved space.
    fn residual(&self, lambda: f64, v: &[C64]) -> f64 {
        let hv = self.h.matvec(v);
        let inner = self.part.inner.as_ref().expect("inner basis set in new");
        let mut acc = 0.0;
        for b in inner {
            let mut ph = C64::new(0.0, 0.0);
            let mut pv = C64::new(0.0, 0.0);
            for (k, &x) in b.iter().enumerate() {
                ph += x.conj() * hv[self.part.coords[k]];
                pv += x.conj() * v[self.part.coords[k]];
            }
            acc += (ph - pv * lambda).norm_sqr();
        }
        for &q in &self.q_idx {
            acc += (hv[q] - v[q] * lambda).norm_sqr();
        }
        acc.sqrt()
    }

    /// The `k` lowest eigenpairs, vectors embedded in the ambient space.
    pub fn lowest(&mut self, k: usize) -> Result<EigenSolveResult> {
        let m = self.kept_dim();
        if k == 0 || k > m {
            return Err(Error::precondition(format!(
                "requested {k} eigenpairs from a kept block of dimension {m}"
            )));
        }
        let starts = eigh_mat(&self.hpp)?.0;
        let mut vals: Vec<f64> = Vec::with_capacity(k);
        let mut vecs: Vec<Vec<C64>> = Vec::with_capacity(k);
        for index in 0..k {
            let lambda = self.fixed_point(index, starts[index])?;
            let (heff, solves) = self.effective_with_solves(lambda)?;
            let coeffs = eigh_mat(&heff)?.1.swap_remove(index);
            let mut folded = vec![C64::new(0.0, 0.0); self.q_idx.len()];
            for (x, &c) in solves.iter().zip(&coeffs) {
                sparse::axpy(-c, x, &mut folded);
            }
            let mut v = self.embed(&coeffs, &folded);
            // Vectors from a degenerate cluster come from separate solves.
            for (w, &l) in vecs.iter().zip(&vals) {
                if (l - lambda).abs() <= CLUSTER_TOL * lambda.abs().max(1.0) {
                    let p = sparse::dot(w, &v);
                    sparse::axpy(-p, w, &mut v);
                }
            }
            sparse::normalize(&mut v);
            vals.push(lambda);
            vecs.push(v);
        }
        let residuals = vals
            .iter()
            .zip(&vecs)
            .map(|(&l, v)| self.residual(l, v))
            .collect();
        Ok(EigenSolveResult {
            eigenvalues: vals,
            eigenvectors: Some(vecs),
            residuals,
            backend: Backend::Subspace,
        })
    }
}

/// Jacobi-preconditioned conjugate gradients for `(A - shift) x = b`.
fn pcg(a: &SparseHermitian, diag: &[f64], shift: f64, b: &[C64], warm: &[C64]) -> Result<Vec<C64>> {
    let n = b.len();
    let bnorm = sparse::norm(b);
    if bnorm == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); n]);
    }
    let apply = |x: &[C64], y: &mut [C64]| {
        a.matvec_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi -= xi * shift;
        }
    };
    let mut x = if warm.len() == n {
        warm.to_vec()
    } else {
        vec![C64::new(0.0, 0.0); n]
    };
    let mut ax = vec![C64::new(0.0, 0.0); n];
    apply(&x, &mut ax);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / (d - shift)).collect();
    let mut z: Vec<C64> = r.iter().zip(&inv).map(|(ri, s)| ri * s).collect();
    let mut p = z.clone();
    let mut rz = sparse::dot(&r, &z).re;
    let mut ap = vec![C64::new(0.0, 0.0); n];
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        if sparse::norm(&r) <= CG_TOL * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rz / sparse::dot(&p, &ap).re;
        sparse::axpy(C64::new(alpha, 0.0), &p, &mut x);
        sparse::axpy(C64::new(-alpha, 0.0), &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_next = sparse::dot(&r, &z).re;
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    let res = sparse::norm(&r) / bnorm;
    if res <= 1e3 * CG_TOL {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: res,
    })
}
