use num_complex::Complex64 as C64;

use super::eigen::eigh_mat;
use super::sparse::{self, SparseHermitian, Triplets, PRUNE};
use crate::error::{Error, Result};

pub const ORTHONORMAL_TOL: f64 = 1e-10;

pub type SparseVec = Vec<(usize, C64)>;

/// Orthonormal basis of a subspace, columns stored sparsely.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub name: String,
    ambient: usize,
    vectors: Vec<SparseVec>,
}

fn sparsify(v: &[C64]) -> SparseVec {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.norm() >= PRUNE)
        .map(|(i, x)| (i, *x))
        .collect()
}

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> C64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = C64::new(0.0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1.conj() * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

impl SubspaceBasis {
    /// Wraps dense columns, checking orthonormality.
    pub fn new(name: impl Into<String>, ambient: usize, columns: Vec<Vec<C64>>) -> Result<Self> {
        for c in &columns {
            if c.len() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    found: c.len(),
                });
            }
        }
        let b = SubspaceBasis {
            name: name.into(),
            ambient,
            vectors: columns.iter().map(|c| sparsify(c)).collect(),
        };
        let dev = b.gram_deviation();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "basis `{}` is not orthonormal (Gram deviation {dev:.3e})",
                b.name
            )));
        }
        Ok(b)
    }

    /// Span of computational basis states `indices`.
    pub fn coordinate(name: impl Into<String>, ambient: usize, indices: &[usize]) -> Self {
        SubspaceBasis {
            name: name.into(),
            ambient,
            vectors: indices.iter().map(|&i| vec![(i, C64::new(1.0, 0.0))]).collect(),
        }
    }

    /// Orthonormalizes `vectors` by modified Gram-Schmidt, dropping any whose
    /// residual norm falls below `drop_tol`.
    pub fn orthonormalize(
        name: impl Into<String>,
        ambient: usize,
        vectors: &[Vec<C64>],
        drop_tol: f64,
    ) -> Result<Self> {
        let mut kept: Vec<Vec<C64>> = Vec::new();
        for v in vectors {
            if v.len() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    found: v.len(),
                });
            }
            let mut w = v.clone();
            for _ in 0..2 {
                for q in &kept {
                    let p = sparse::dot(q, &w);
                    sparse::axpy(-p, q, &mut w);
                }
            }
            if sparse::normalize(&mut w) > drop_tol {
                kept.push(w);
            }
        }
        Self::new(name, ambient, kept)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[SparseVec] {
        &self.vectors
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.ambient];
        for &(i, x) in &self.vectors[j] {
            v[i] = x;
        }
        v
    }

    pub fn gram_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate().skip(i) {
                let g = sparse_dot(a, b);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Coefficients `B^dagger v`.
    pub fn coefficients(&self, v: &[C64]) -> Vec<C64> {
        self.vectors
            .iter()
            .map(|b| b.iter().map(|&(i, x)| x.conj() * v[i]).sum())
            .collect()
    }

    /// `B c`.
    pub fn expand(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.ambient];
        for (b, &a) in self.vectors.iter().zip(coeffs) {
            for &(i, x) in b {
                v[i] += a * x;
            }
        }
        v
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &[C64]) -> f64 {
        let p = self.expand(&self.coefficients(v));
        let d: Vec<C64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        sparse::norm(&d)
    }

    /// Largest residual of this basis' vectors against `outer`.
    pub fn inclusion_residual(&self, outer: &SubspaceBasis) -> f64 {
        (0..self.dim())
            .map(|j| outer.residual(&self.column(j)))
            .fold(0.0, f64::max)
    }
}

/// `B^dagger H B` for the basis matrix `B`.
pub fn restrict(h: &SparseHermitian, s: &SubspaceBasis) -> Result<SparseHermitian> {
    if s.ambient() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: s.ambient(),
        });
    }
    let m = s.dim();
    let hb: Vec<SparseVec> = (0..m)
        .map(|j| {
            let mut out: std::collections::BTreeMap<usize, C64> = Default::default();
            for &(i, x) in &s.vectors()[j] {
                for (r, v) in h.row(i) {
                    // column i of H equals the conjugate of row i
                    *out.entry(r).or_default() += v.conj() * x;
                }
            }
            out.into_iter().collect()
        })
        .collect();
    let mut t = Triplets::new(m);
    for a in 0..m {
        for b in a..m {
            let v = sparse_dot(&s.vectors()[a], &hb[b]);
            if v.norm() >= PRUNE {
                t.push(a, b, v);
            }
        }
    }
    t.build()
}

/// `||(P_outer - P_inner) H P_inner||`, the coupling out of `inner`.
/// `outer = None` means the whole space; `inner` must lie inside `outer`.
pub fn coupling_norm(
    h: &SparseHermitian,
    inner: &SubspaceBasis,
    outer: Option<&SubspaceBasis>,
) -> Result<f64> {
    let m = inner.dim();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let w = h.matvec(&inner.column(j));
        let mut r = match outer {
            Some(o) => o.expand(&o.coefficients(&w)),
            None => w,
        };
        let p = inner.expand(&inner.coefficients(&r));
        for (a, b) in r.iter_mut().zip(&p) {
            *a -= b;
        }
        cols.push(r);
    }
    let gram = faer::Mat::from_fn(m, m, |a, b| sparse::dot(&cols[a], &cols[b]));
    let top = eigh_mat(&gram)?.0.into_iter().fold(0.0, f64::max);
    Ok(top.sqrt())
}
