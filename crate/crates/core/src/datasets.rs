//! Sparse datasets: LibSVM text I/O, synthetic least-squares fixtures with a
//! prescribed Hessian spectrum, and uniform index-set sampling.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::rng::Rng;

/// One sparse feature row, borrowed from a [`Dataset`].
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl SparseRow<'_> {
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * w[j as usize])
            .sum()
    }

    /// `out += alpha * x`
    #[inline]
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            out[j as usize] += alpha * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Immutable sparse design matrix (CSR) plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset from sparse rows given as `(index, value)` pairs with
    /// 0-based, strictly increasing indices.
    pub fn from_sparse_rows(rows: &[Vec<(usize, f64)>], targets: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: targets.len() });
        }
        let mut b = Builder::new();
        for (row, &y) in rows.iter().zip(&targets) {
            b.push_row(row.iter().copied(), y);
        }
        b.finish(dim)
    }

    /// Builds a dataset from dense rows; exact zeros are dropped.
    pub fn from_dense_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        let sparse: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        Self::from_sparse_rows(&sparse, targets, dim)
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow { indices: &self.indices[a..b], values: &self.values[a..b] }
    }

    #[inline]
    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Keeps the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut b = Builder::new();
        for &i in rows {
            if i >= self.n() {
                return Err(Error::InvalidSize { k: i, n: self.n() });
            }
            let r = self.row(i);
            b.push_row(r.indices.iter().map(|&j| j as usize).zip(r.values.iter().copied()), self.targets[i]);
        }
        b.finish(self.dim)
    }

    /// Dense `(1/n) X^T X`.
    pub fn second_moment(&self) -> linalg::SymMatrix {
        let d = self.dim;
        let mut acc = vec![0.0; d * d];
        for i in 0..self.n() {
            let r = self.row(i);
            for (a, (&ja, &va)) in r.indices.iter().zip(r.values).enumerate() {
                for (&jb, &vb) in r.indices[a..].iter().zip(&r.values[a..]) {
                    acc[ja as usize * d + jb as usize] += va * vb;
                }
            }
        }
        let n = self.n().max(1) as f64;
        linalg::SymMatrix::from_upper_fn(d, |i, j| acc[i * d + j] / n)
    }
}

struct Builder {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    targets: Vec<f64>,
}

impl Builder {
    fn new() -> Self {
        Self { indptr: vec![0], indices: Vec::new(), values: Vec::new(), targets: Vec::new() }
    }

    fn push_row(&mut self, entries: impl Iterator<Item = (usize, f64)>, target: f64) {
        for (j, v) in entries {
            self.indices.push(j as u32);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
        self.targets.push(target);
    }

    fn finish(self, dim: usize) -> Result<Dataset> {
        if self.targets.is_empty() {
            return Err(Error::InvalidSize { k: 0, n: 0 });
        }
        for w in 0..self.targets.len() {
            let idx = &self.indices[self.indptr[w]..self.indptr[w + 1]];
            if idx.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::Config(format!("row {w}: indices not strictly increasing")));
            }
            if let Some(&last) = idx.last() {
                if last as usize >= dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: last as usize + 1 });
                }
            }
        }
        if !linalg::all_finite(&self.values) || !linalg::all_finite(&self.targets) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset {
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
            targets: self.targets,
            dim,
        })
    }
}

/// How LibSVM labels are stored in the parsed targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Positive labels become `+1`, everything else (`0`, `-1`, ...) becomes `-1`.
    #[default]
    Binary,
    /// Labels kept as parsed (regression targets).
    Raw,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Feature dimension; defaults to the largest index seen.
    pub dim: Option<usize>,
    pub labels: LabelMode,
}

/// Parses LibSVM text (`<label> <idx>:<val> ...`, 1-based indices).
///
/// Blank lines and `#` comments are ignored.
pub fn parse_libsvm<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Dataset> {
    let mut b = Builder::new();
    let mut max_index = 0usize;
    let mut row: Vec<(usize, f64)> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse { line: lineno, message };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| perr(format!("malformed label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(perr(format!("non-finite label {label_tok:?}")));
        }
        let target = match opts.labels {
            LabelMode::Binary => {
                if label > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LabelMode::Raw => label,
        };

        row.clear();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| perr(format!("malformed token {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| perr(format!("malformed index in {tok:?}")))?;
            if idx == 0 {
                return Err(perr(format!("index must be positive in {tok:?}")));
            }
            if idx <= prev {
                return Err(perr(format!("non-increasing index at line {lineno}")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| perr(format!("malformed value in {tok:?}")))?;
            if !val.is_finite() {
                return Err(perr(format!("non-finite value in {tok:?}")));
            }
            prev = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        b.push_row(row.iter().copied(), target);
    }

    if b.targets.is_empty() {
        return Err(Error::Parse { line: 0, message: "empty file".into() });
    }
    let dim = match opts.dim {
        Some(d) if d < max_index => {
            return Err(Error::Parse {
                line: 0,
                message: format!("dimension override {d} smaller than max index {max_index}"),
            })
        }
        Some(d) => d,
        None => max_index,
    };
    b.finish(dim)
}

/// Writes a dataset in LibSVM text format with shortest round-trip floats.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for i in 0..data.n() {
        line.clear();
        let y = data.target(i);
        if y == 1.0 {
            line.push_str("+1");
        } else {
            write!(line, "{y}").unwrap();
        }
        let r = data.row(i);
        for (&j, &v) in r.indices.iter().zip(r.values) {
            write!(line, " {}:{v}", j + 1).unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// A least-squares instance with known minimizer and Hessian spectrum.
#[derive(Debug, Clone)]
pub struct SyntheticQuadratic {
    pub data: Dataset,
    pub w_star: Vector,
}

/// Generates `n = 10 d` least-squares rows whose empirical second moment
/// `(1/n) X^T X` has eigenvalues evenly spaced on `[mu, l]`, with targets
/// interpolating a random `w_star`.
///
/// `X = sqrt(n) U diag(sqrt(lambda)) Q^T` where `U` (n x d) has orthonormal
/// columns and `Q` is a random orthogonal basis, so `X^T X / n = Q diag(lambda) Q^T`.
pub fn synth_quadratic(d: usize, mu: f64, l: f64, seed: u64) -> Result<SyntheticQuadratic> {
    if d == 0 {
        return Err(Error::InvalidConstants("dimension must be positive".into()));
    }
    if !(mu > 0.0) || !(mu <= l) || !l.is_finite() {
        return Err(Error::InvalidConstants(format!("need 0 < mu <= L, got mu = {mu}, L = {l}")));
    }
    if d == 1 && mu != l {
        return Err(Error::InvalidConstants("d = 1 admits a single eigenvalue; need mu = L".into()));
    }
    let n = 10 * d;
    let mut rng = Rng::new(seed);

    let spectrum: Vec<f64> = (0..d)
        .map(|k| if d == 1 { mu } else { mu + (l - mu) * k as f64 / (d - 1) as f64 })
        .collect();
    let u = orthonormal_columns(n, d, &mut rng);
    let q = orthonormal_columns(d, d, &mut rng);

    let scale = (n as f64).sqrt();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..d)
            .map(|j| {
                (0..d)
                    .map(|k| u[k][i] * spectrum[k].sqrt() * q[k][j])
                    .sum::<f64>()
                    * scale
            })
            .collect();
        rows.push(row);
    }
    let w_star: Vector = (0..d).map(|_| rng.standard_normal()).collect();
    let targets = rows.iter().map(|r| linalg::dot(r, &w_star)).collect();
    let data = Dataset::from_dense_rows(&rows, targets)?;
    Ok(SyntheticQuadratic { data, w_star })
}

/// `k` orthonormal vectors of length `n` by twice-applied modified Gram-Schmidt
/// on Gaussian draws.
fn orthonormal_columns(n: usize, k: usize, rng: &mut Rng) -> Vec<Vector> {
    let mut cols: Vec<Vector> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vector = (0..n).map(|_| rng.standard_normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let p = linalg::dot(c, &v);
                linalg::axpy(-p, c, &mut v);
            }
        }
        let nv = linalg::norm(&v);
        if nv < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        cols.push(v);
    }
    cols
}

/// Indices drawn uniformly without replacement from `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn from_vec(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl std::ops::Deref for IndexSet {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Draws `k` distinct indices from `0..n`.
pub fn sample_index_set(n: usize, k: usize, rng: &mut Rng) -> Result<IndexSet> {
    if k == 0 || k > n {
        return Err(Error::InvalidSize { k, n });
    }
    Ok(IndexSet(rand::seq::index::sample(rng, n, k).into_vec()))
}
