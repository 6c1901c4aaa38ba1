use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Dense real matrix stored column-major (first index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Output columns handled per GEMM task. Fixed so that the summation order of
/// every output element is the same whether or not the product runs in
/// parallel.
const GEMM_COLUMN_BLOCK: usize = 64;
const GEMM_PARALLEL_FLOPS: usize = 1 << 20;

#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    fn plain(m: &'a Matrix) -> Self {
        Self {
            data: &m.data,
            rows: m.rows,
            cols: m.cols,
            rs: 1,
            cs: m.rows as isize,
        }
    }

    fn transposed(m: &'a Matrix) -> Self {
        Self {
            data: &m.data,
            rows: m.cols,
            cols: m.rows,
            rs: m.rows as isize,
            cs: 1,
        }
    }
}

fn gemm(a: View<'_>, b: View<'_>) -> Matrix {
    assert_eq!(
        a.cols, b.rows,
        "inner dimensions differ: {}x{} * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return Matrix::from_parts(m, n, out);
    }
    let block = |(j, chunk): (usize, &mut [f64])| {
        let j0 = j * GEMM_COLUMN_BLOCK;
        let width = chunk.len() / m;
        // SAFETY: `a` spans m x k and `b` spans k x n under their strides, the
        // column offset j0 + width <= n stays inside `b`, and `chunk` is an
        // exclusive m x width column-major block of the output.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                width,
                1.0,
                a.data.as_ptr(),
                a.rs,
                a.cs,
                b.data.as_ptr().offset(j0 as isize * b.cs),
                b.rs,
                b.cs,
                0.0,
                chunk.as_mut_ptr(),
                1,
                m as isize,
            );
        }
    };
    let width = m * GEMM_COLUMN_BLOCK;
    if m.saturating_mul(n).saturating_mul(k) >= GEMM_PARALLEL_FLOPS && n > GEMM_COLUMN_BLOCK {
        out.par_chunks_mut(width).enumerate().for_each(block);
    } else {
        out.chunks_mut(width).enumerate().for_each(block);
    }
    Matrix::from_parts(m, n, out)
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid!("matrix dimensions must be positive, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return Err(invalid!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_parts(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self::from_parts(rows, cols, data)
    }

    /// Square matrix with `diag` on its diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i + i * n] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "({r}, {c}) out of bounds");
        self.data[r + c * self.rows]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        assert!(r < self.rows && c < self.cols, "({r}, {c}) out of bounds");
        self.data[r + c * self.rows] = value;
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        gemm(View::plain(self), View::plain(rhs))
    }

    /// `selfᵀ * rhs`
    pub fn tr_matmul(&self, rhs: &Matrix) -> Matrix {
        gemm(View::transposed(self), View::plain(rhs))
    }

    /// `self * rhsᵀ`
    pub fn matmul_tr(&self, rhs: &Matrix) -> Matrix {
        gemm(View::plain(self), View::transposed(rhs))
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i + i * self.rows] += shift;
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Keeps the listed columns in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &c in cols {
            data.extend_from_slice(self.column(c));
        }
        Matrix::from_parts(self.rows, cols.len(), data)
    }

    /// Keeps the listed rows in order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for c in 0..self.cols {
            let col = self.column(c);
            data.extend(rows.iter().map(|&r| col[r]));
        }
        Matrix::from_parts(rows.len(), self.cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    fn pseudo(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut state = seed;
        Matrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn products_match_naive_loops() {
        for &(m, k, n) in &[(1, 1, 1), (3, 4, 5), (17, 9, 130), (70, 33, 65)] {
            let a = pseudo(m, k, 1);
            let b = pseudo(k, n, 2);
            let expected = naive(&a, &b);
            let got = a.matmul(&b);
            for (x, y) in got.data().iter().zip(expected.data()) {
                assert!((x - y).abs() < 1e-12);
            }
            let got_tn = a.transpose().tr_matmul(&b);
            let got_nt = a.matmul_tr(&b.transpose());
            assert_eq!(got_tn.data(), got.data());
            for (x, y) in got_nt.data().iter().zip(expected.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blocked_product_is_independent_of_width() {
        // A column of the product computed alone equals the same column of the
        // wide product bit for bit.
        let a = pseudo(40, 50, 3);
        let b = pseudo(50, 200, 4);
        let wide = a.matmul(&b);
        let single = a.matmul(&b.select_columns(&[137]));
        assert_eq!(single.column(0), wide.column(137));
    }

    #[test]
    fn selection_helpers() {
        let m = Matrix::from_fn(3, 4, |r, c| (r + 10 * c) as f64);
        let s = m.select_columns(&[3, 1]);
        assert_eq!(s.column(0), &[30.0, 31.0, 32.0]);
        let r = m.select_rows(&[2, 0]);
        assert_eq!(r.get(0, 1), 12.0);
        assert_eq!(r.get(1, 3), 30.0);
    }
}
