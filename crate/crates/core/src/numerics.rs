//! Dense matrices, kernels and a symmetric positive-definite solver.
//!
//! Everything here is sized for desk-scale problems (a few thousand rows at
//! most), so matrices are plain row-major `Vec<f64>` buffers.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting bad shapes and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite entry at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(invalid(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps a buffer produced by internal arithmetic on finite inputs.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, so zero-width matrices get empty rows
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_raw(idx.len(), self.cols, data)
    }

    /// Submatrix at the crossing of `rows` and `cols` index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix::from_raw(rows.len(), cols.len(), data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest |A_ij - A_ji|, or infinity for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.iter_rows() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// Kernel used by the SVMs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `exp(-|x - y|^2 / (2 width^2))`
    Gaussian {
        width: f64,
    },
}

impl KernelSpec {
    pub fn gaussian(width: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { width };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { width } if width.is_finite() && width > 0.0 => Ok(()),
            KernelSpec::Gaussian { width } => Err(invalid(format!(
                "gaussian width must be positive, got {width}"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Gaussian { width } => gaussian(squared_distance(a, b), width),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Gaussian { .. } => "gaussian",
        }
    }
}

#[inline]
pub(crate) fn gaussian(sq_dist: f64, width: f64) -> f64 {
    (-sq_dist / (2.0 * width * width)).exp()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Kernel matrix `K_ij = k(x_i, x_j)` over the rows of `x`.
pub fn gram(x: &Matrix, kernel: KernelSpec) -> Result<Matrix> {
    kernel.validate()?;
    if x.rows() == 0 {
        return Err(invalid("gram matrix needs at least one instance"));
    }
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                match kernel {
                    KernelSpec::Gaussian { .. } => 1.0,
                    KernelSpec::Linear => dot(x.row(i), x.row(i)),
                }
            } else {
                kernel.eval(x.row(i), x.row(j))
            };
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    Ok(k)
}

/// Mean Euclidean distance over all unordered pairs of rows.
pub fn average_pairwise_distance(x: &Matrix) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(invalid("average distance needs at least two instances"));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += euclidean(x.row(i), x.row(j));
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let mean = total / pairs;
    if mean <= 0.0 {
        return Err(invalid(
            "all instances are identical; average distance is zero",
        ));
    }
    Ok(mean)
}

/// Lower Cholesky factor, or the index of the first non-positive pivot.
fn cholesky(a: &Matrix, jitter: f64) -> std::result::Result<Matrix, usize> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j) + jitter;
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

fn cholesky_solve_in_place(l: &Matrix, b: &mut Matrix) {
    let n = l.rows();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = b.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * b.get(k, c);
            }
            b.set(i, c, s / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = b.get(i, c);
            for k in (i + 1)..n {
                s -= l.get(k, i) * b.get(k, c);
            }
            b.set(i, c, s / l.get(i, i));
        }
    }
}

/// Solves `A X = B` for symmetric positive-definite `A`.
///
/// If the plain factorization breaks down, the diagonal is bumped once by
/// `1e-10 * trace / n` before giving up.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(invalid(format!(
            "system matrix must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
        });
    }
    if a.asymmetry() > 1e-10 {
        return Err(invalid("system matrix is not symmetric"));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, b.cols()));
    }
    let l = match cholesky(a, 0.0) {
        Ok(l) => l,
        Err(_) => {
            let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
            let jitter = 1e-10 * trace.abs() / n as f64;
            cholesky(a, jitter).map_err(|pivot| Error::NotPositiveDefinite { pivot })?
        }
    };
    let mut x = b.clone();
    cholesky_solve_in_place(&l, &mut x);

    // one round of iterative refinement
    let ax = a.matmul(&x)?;
    let mut r = Matrix::from_raw(
        n,
        b.cols(),
        b.as_slice()
            .iter()
            .zip(ax.as_slice())
            .map(|(bv, av)| bv - av)
            .collect(),
    );
    cholesky_solve_in_place(&l, &mut r);
    for (xv, dv) in x.data.iter_mut().zip(&r.data) {
        *xv += dv;
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { pivot: n - 1 });
    }
    Ok(x)
}
