use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries with magnitude below this are dropped after arithmetic.
pub const PRUNE: f64 = 1e-14;
const DIAG_IMAG_TOL: f64 = 1e-12;

/// Hermitian operator in compressed-row form. Both triangles are stored so
/// that products are cheap; the canonical entry set is the upper triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "OperatorJson", try_from = "OperatorJson")]
pub struct SparseHermitian {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

/// Upper-triangle accumulator; duplicate positions are summed on build.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    dim: usize,
    items: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn new(dim: usize) -> Self {
        Triplets {
            dim,
            items: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        Triplets {
            dim,
            items: Vec::with_capacity(cap),
        }
    }

    /// Adds `v` at `(r, c)`; lower-triangle positions are folded onto the
    /// upper triangle by conjugation, so callers pushing a full Hermitian
    /// block must skip one of each mirrored pair.
    pub fn push(&mut self, r: usize, c: usize, v: C64) {
        if r <= c {
            self.items.push((r, c, v));
        } else {
            self.items.push((c, r, v.conj()));
        }
    }

    pub fn extend_scaled(&mut self, h: &SparseHermitian, s: f64) {
        for (r, c, v) in h.upper_entries() {
            self.items.push((r, c, v * s));
        }
    }

    pub fn build(mut self) -> Result<SparseHermitian> {
        self.items
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(self.items.len());
        for (r, c, v) in self.items {
            if r >= self.dim || c >= self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: r.max(c) + 1,
                });
            }
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut upper = Vec::with_capacity(merged.len());
        for (r, c, mut v) in merged {
            if r == c {
                if v.im.abs() > DIAG_IMAG_TOL * v.re.abs().max(1.0) {
                    return Err(Error::NonHermitian(v.im.abs()));
                }
                v.im = 0.0;
            }
            if v.norm() >= PRUNE {
                upper.push((r, c, v));
            }
        }
        Ok(SparseHermitian::from_upper_sorted(self.dim, &upper))
    }
}

impl SparseHermitian {
    fn from_upper_sorted(dim: usize, upper: &[(usize, usize, C64)]) -> Self {
        let mut counts = vec![0usize; dim + 1];
        for &(r, c, _) in upper {
            counts[r + 1] += 1;
            if r != c {
                counts[c + 1] += 1;
            }
        }
        for i in 0..dim {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[dim];
        let mut indices = vec![0usize; nnz];
        let mut values = vec![C64::new(0.0, 0.0); nnz];
        let mut next = counts.clone();
        // Lower-triangle entries of row c come from upper entries (r, c) with
        // r < c, visited in increasing r; upper entries of row r follow in
        // increasing c. Filling lower first keeps each row sorted.
        for &(r, c, v) in upper {
            if r != c {
                let p = next[c];
                indices[p] = r;
                values[p] = v.conj();
                next[c] += 1;
            }
        }
        for &(r, c, v) in upper {
            let p = next[r];
            indices[p] = c;
            values[p] = v;
            next[r] += 1;
        }
        SparseHermitian {
            dim,
            indptr: counts,
            indices,
            values,
        }
    }

    pub fn zero(dim: usize) -> Self {
        SparseHermitian {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let upper: Vec<_> = d
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= PRUNE)
            .map(|(i, v)| (i, i, C64::new(*v, 0.0)))
            .collect();
        Self::from_upper_sorted(d.len(), &upper)
    }

    /// Builds from a dense matrix, rejecting it if it is not Hermitian within `1e-12`.
    pub fn from_dense(m: &Mat<C64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.ncols(),
            });
        }
        let mut worst = 0.0f64;
        let mut t = Triplets::new(n);
        for i in 0..n {
            for j in i..n {
                let a = m[(i, j)];
                let b = m[(j, i)];
                let dev = (a - b.conj()).norm();
                worst = worst.max(dev / a.norm().max(1.0));
                let v = (a + b.conj()) * 0.5;
                if v.norm() >= PRUNE {
                    t.push(i, j, v);
                }
            }
        }
        if worst > 1e-12 {
            return Err(Error::NonHermitian(worst));
        }
        t.build()
    }

    /// Rank-one projector `|v><v|`.
    pub fn projector(v: &[C64]) -> Self {
        let support: Vec<usize> = (0..v.len()).filter(|&i| v[i].norm() >= PRUNE).collect();
        let mut t = Triplets::with_capacity(v.len(), support.len() * support.len());
        for (a, &i) in support.iter().enumerate() {
            for &j in &support[a..] {
                t.push(i, j, v[i] * v[j].conj());
            }
        }
        t.build().expect("projector is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[a..b].binary_search(&c) {
            Ok(p) => self.values[a + p],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            self.row(r)
                .filter(move |(c, _)| *c >= r)
                .map(move |(c, v)| (r, c, v))
        })
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, _)| c == r))
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            y[r] = acc;
        }
    }

    /// `<x|H|x>`, real up to rounding.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let hx = self.matvec(x);
        dot(x, &hx).re
    }

    pub fn scaled(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero(self.dim);
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// `sum_i s_i H_i`.
    pub fn lin_comb(items: &[(f64, &SparseHermitian)]) -> Result<Self> {
        let dim = items.first().map_or(0, |(_, h)| h.dim);
        let cap = items.iter().map(|(_, h)| h.nnz()).sum::<usize>();
        let mut t = Triplets::with_capacity(dim, cap);
        for (s, h) in items {
            if h.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: h.dim,
                });
            }
            if *s != 0.0 {
                t.extend_scaled(h, *s);
            }
        }
        t.build()
    }

    pub fn add(&self, other: &SparseHermitian) -> Result<Self> {
        Self::lin_comb(&[(1.0, self), (1.0, other)])
    }

    pub fn shifted(&self, shift: f64) -> Self {
        Self::lin_comb(&[(1.0, self), (shift, &Self::identity(self.dim))])
            .expect("same dimension")
    }

    /// `self (x) other` with `self` on the more significant qubits.
    pub fn kron(&self, other: &SparseHermitian) -> Self {
        let d = self.dim * other.dim;
        let mut t = Triplets::with_capacity(d, self.nnz() * other.nnz() / 2 + d);
        for r in 0..self.dim {
            for (c, a) in self.row(r) {
                for r2 in 0..other.dim {
                    for (c2, b) in other.row(r2) {
                        let (rr, cc) = (r * other.dim + r2, c * other.dim + c2);
                        if rr <= cc {
                            t.push(rr, cc, a * b);
                        }
                    }
                }
            }
        }
        t.build().expect("kron of Hermitian operators is Hermitian")
    }

    /// Principal submatrix on the given coordinates, in the given order.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut t = Triplets::new(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            for (c, v) in self.row(i) {
                let l = pos[c];
                if l != usize::MAX && k <= l {
                    t.push(k, l, v);
                }
            }
        }
        t.build().expect("principal submatrix is Hermitian")
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn to_dense_real(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v.re;
            }
        }
        m
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &SparseHermitian) -> f64 {
        let diff = Self::lin_comb(&[(1.0, self), (-1.0, other)]);
        match diff {
            Ok(d) => d.values.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }

    /// Sum of absolute off-diagonal entries per row subtracted from the
    /// diagonal, minimised over rows: a Gershgorin lower spectral bound.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                let mut d = 0.0;
                let mut off = 0.0;
                for (c, v) in self.row(r) {
                    if c == r {
                        d = v.re;
                    } else {
                        off += v.norm();
                    }
                }
                d - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// `y <- y + s x`
pub fn axpy(s: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Serialized operator: the upper triangle as `[row, col, re, im]` rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl From<SparseHermitian> for OperatorJson {
    fn from(h: SparseHermitian) -> Self {
        OperatorJson {
            dim: h.dim,
            entries: h.upper_entries().map(|(r, c, v)| (r, c, v.re, v.im)).collect(),
        }
    }
}

impl TryFrom<OperatorJson> for SparseHermitian {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        let mut t = Triplets::with_capacity(j.dim, j.entries.len());
        for (r, c, re, im) in j.entries {
            if r > c {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) lies below the diagonal"
                )));
            }
            t.push(r, c, C64::new(re, im));
        }
        t.build()
    }
}
