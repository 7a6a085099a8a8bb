//! Small dense linear algebra for information matrices.
//!
//! Everything here is sized for the handful-to-a-few-hundred parameter
//! models that screening designs deal with. Matrices are row-major `f64`.
//! Symmetric positive definite systems go through a Cholesky factorization
//! so that a singular information matrix is reported as an error instead
//! of being silently "solved".

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative pivot threshold: a Cholesky pivot must exceed this times the
/// largest diagonal entry.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Maximum relative asymmetry accepted by [`Cholesky::new`].
pub const SYMMETRY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("rank-2 update is singular (capacitance determinant {det:e})")]
    SingularUpdate { det: f64 },
}

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for a in 0..p {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..p {
                    g.data[a * p + b] += ra * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g.data[a * p + b] = g.data[b * p + a];
            }
        }
        g
    }

    /// `selfᵀ · other` without forming the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_matmul dimension mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `xᵀ · self · y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(self.rows, x.len());
        assert_eq!(self.cols, y.len());
        x.iter()
            .enumerate()
            .filter(|(_, &xi)| xi != 0.0)
            .map(|(i, &xi)| xi * dot(self.row(i), y))
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix::from_row_major(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix::from_row_major(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let data = self.data.iter().map(|a| a * s).collect();
        Matrix::from_row_major(self.rows, self.cols, data)
    }

    /// Adds `diag` to the main diagonal in place.
    pub fn add_diag(&mut self, diag: &[f64]) {
        assert_eq!(diag.len(), self.rows.min(self.cols));
        for (i, d) in diag.iter().enumerate() {
            self[(i, i)] += d;
        }
    }

    /// Submatrix picking the listed rows and columns, in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len().max(1), cols.len().max(1));
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    /// Keeps only the listed columns.
    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = m;
                self.data[j * n + i] = m;
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v:>10.5}")).collect();
            writeln!(f, "  {}", cells.join(" "))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `S = G·Gᵀ` of a symmetric positive
/// definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: Matrix,
}

impl Cholesky {
    pub fn new(s: &Matrix) -> Result<Self, LinalgError> {
        if !s.is_square() {
            return Err(LinalgError::NotSquare {
                rows: s.rows(),
                cols: s.cols(),
            });
        }
        let asymmetry = s.relative_asymmetry();
        if asymmetry > SYMMETRY_REL_TOL {
            return Err(LinalgError::NotSymmetric { asymmetry });
        }
        let n = s.rows();
        let max_diag = s.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let threshold = PIVOT_REL_TOL * max_diag.max(f64::MIN_POSITIVE);
        let mut g = Matrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = s[(j, j)];
            for k in 0..j {
                pivot -= g[(j, k)] * g[(j, k)];
            }
            if pivot.is_nan() || pivot <= threshold {
                return Err(LinalgError::NotPositiveDefinite { column: j, pivot });
            }
            let gjj = pivot.sqrt();
            g[(j, j)] = gjj;
            for i in (j + 1)..n {
                let mut acc = s[(i, j)];
                for k in 0..j {
                    acc -= g[(i, k)] * g[(j, k)];
                }
                g[(i, j)] = acc / gjj;
            }
        }
        Ok(Self { factor: g })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(y.len(), n, "solve dimension mismatch");
        let g = &self.factor;
        // forward: G z = y
        let mut z = y.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= g[(i, k)] * z[k];
            }
            z[i] = acc / g[(i, i)];
        }
        // backward: Gᵀ x = z
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in (i + 1)..n {
                acc -= g[(k, i)] * z[k];
            }
            z[i] = acc / g[(i, i)];
        }
        z
    }

    /// Solves for every column of `rhs`.
    pub fn solve_matrix(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(rhs.rows(), self.dim());
        let mut out = Matrix::zeros(rhs.rows(), rhs.cols());
        for j in 0..rhs.cols() {
            let x = self.solve(&rhs.column(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv.symmetrize();
        inv
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.factor.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

pub fn logdet(s: &Matrix) -> Result<f64, LinalgError> {
    Ok(Cholesky::new(s)?.logdet())
}

pub fn spd_inverse(s: &Matrix) -> Result<Matrix, LinalgError> {
    Ok(Cholesky::new(s)?.inverse())
}

/// Inverse of `S + l_new·l_newᵀ - l_old·l_oldᵀ` given `d = S⁻¹`.
///
/// Uses the Woodbury identity with `U = (l_new, -l_old)` and
/// `V = (l_new, l_old)`, so only a 2x2 capacitance matrix is inverted.
pub fn smw_rank2_inverse_update(
    d: &Matrix,
    l_new: &[f64],
    l_old: &[f64],
) -> Result<Matrix, LinalgError> {
    let n = d.rows();
    for len in [l_new.len(), l_old.len()] {
        if len != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let dn = d.mul_vec(l_new);
    let d_o = d.mul_vec(l_old);
    let v_nn = dot(l_new, &dn);
    let v_oo = dot(l_old, &d_o);
    let v_on = dot(l_old, &dn);
    // I + Vᵀ D U = [[1 + v_nn, -v_on], [v_on, 1 - v_oo]]
    let c11 = 1.0 + v_nn;
    let c12 = -v_on;
    let c21 = v_on;
    let c22 = 1.0 - v_oo;
    let det = c11 * c22 - c12 * c21;
    let scale = c11.abs().max(c22.abs()).max(1.0);
    if det.abs() <= 1e-12 * scale * scale {
        return Err(LinalgError::SingularUpdate { det });
    }
    let (i11, i12, i21, i22) = (c22 / det, -c12 / det, -c21 / det, c11 / det);
    // D U = (dn, -d_o), Vᵀ D = (dnᵀ; d_oᵀ)
    let mut out = d.clone();
    for r in 0..n {
        let a1 = dn[r];
        let a2 = -d_o[r];
        let w1 = a1 * i11 + a2 * i21;
        let w2 = a1 * i12 + a2 * i22;
        if w1 == 0.0 && w2 == 0.0 {
            continue;
        }
        let row = out.row_mut(r);
        for c in 0..n {
            row[c] -= w1 * dn[c] + w2 * d_o[c];
        }
    }
    out.symmetrize();
    Ok(out)
}
