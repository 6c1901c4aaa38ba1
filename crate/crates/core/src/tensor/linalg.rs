use super::Matrix;
use crate::error::{invalid, Error, Result};

/// Lower Cholesky factor `A = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    // column-major; only the lower triangle is meaningful
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a`, reading only its lower triangle.
    pub fn factor(a: &Matrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(invalid!("matrix {}x{} is not square", a.rows(), a.cols()));
        }
        if !a.is_finite() {
            return Err(invalid!("matrix has non-finite entries"));
        }
        let n = a.rows();
        let mut l = a.data().to_vec();
        for j in 0..n {
            let d = l[j + j * n];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix is not positive definite (pivot {j} = {d:e})"
                )));
            }
            let d = d.sqrt();
            l[j + j * n] = d;
            l[j * n + j + 1..(j + 1) * n].iter_mut().for_each(|v| *v /= d);

            // Right-looking update of the trailing lower triangle.
            let (head, tail) = l.split_at_mut((j + 1) * n);
            let col_j = &head[j * n..];
            for (offset, col_k) in tail.chunks_exact_mut(n).enumerate() {
                let k = j + 1 + offset;
                let lkj = col_j[k];
                if lkj != 0.0 {
                    col_k[k..]
                        .iter_mut()
                        .zip(&col_j[k..])
                        .for_each(|(v, &x)| *v -= lkj * x);
                }
            }
        }
        Ok(Self { n, l })
    }

    /// As [`Cholesky::factor`], but a matrix that is positive definite in
    /// exact arithmetic and fails only through rounding gets a growing
    /// diagonal shift (from `n·ε·max|a_ii|`, at most 8 tries). Returns the
    /// shift used.
    pub fn factor_jittered(a: &Matrix) -> Result<(Self, f64)> {
        match Self::factor(a) {
            Ok(c) => return Ok((c, 0.0)),
            Err(Error::Numerical(_)) => {}
            Err(e) => return Err(e),
        }
        let n = a.rows();
        let scale = (0..n).fold(0.0f64, |m, i| m.max(a.get(i, i).abs()));
        let mut shift = (n as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut last = None;
        for _ in 0..8 {
            let mut shifted = a.clone();
            shifted.add_to_diagonal(shift);
            match Self::factor(&shifted) {
                Ok(c) => return Ok((c, shift)),
                Err(e) => last = Some(e),
            }
            shift *= 10.0;
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let l = &self.l;
        // L y = b
        for j in 0..n {
            let y = b[j] / l[j + j * n];
            b[j] = y;
            if y != 0.0 {
                b[j + 1..]
                    .iter_mut()
                    .zip(&l[j * n + j + 1..(j + 1) * n])
                    .for_each(|(v, &x)| *v -= y * x);
            }
        }
        // Lᵀ x = y
        for j in (0..n).rev() {
            let dot: f64 = b[j + 1..]
                .iter()
                .zip(&l[j * n + j + 1..(j + 1) * n])
                .map(|(v, x)| v * x)
                .sum();
            b[j] = (b[j] - dot) / l[j + j * n];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.n, "right-hand side rows mismatch");
        let mut data = b.data().to_vec();
        for col in data.chunks_exact_mut(self.n) {
            self.solve_in_place(col);
        }
        Matrix::from_parts(b.rows(), b.cols(), data)
    }
}

/// Solves `A X = B` for symmetric positive-definite `A`.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !b.is_finite() {
        return Err(invalid!("right-hand side has non-finite entries"));
    }
    if b.rows() != a.rows() {
        return Err(invalid!(
            "right-hand side has {} rows, system has {}",
            b.rows(),
            a.rows()
        ));
    }
    Ok(Cholesky::factor(a)?.solve(b))
}

/// Singular values in nonincreasing order, computed by one-sided Jacobi
/// rotations.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_finite() {
        return Err(invalid!("matrix has non-finite entries"));
    }
    // Orthogonalize the columns of the taller orientation.
    let a = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let (rows, cols) = (a.rows(), a.cols());
    let mut cols_data: Vec<Vec<f64>> = (0..cols).map(|c| a.column(c).to_vec()).collect();

    const MAX_SWEEPS: usize = 80;
    let tol = f64::EPSILON * rows as f64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = {
                    let (x, y) = (&cols_data[p], &cols_data[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (u, v) in x.iter().zip(y) {
                        alpha += u * u;
                        beta += v * v;
                        gamma += u * v;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols_data.split_at_mut(q);
                for (u, v) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (x, y) = (*u, *v);
                    *u = c * x - s * y;
                    *v = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = cols_data
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}
