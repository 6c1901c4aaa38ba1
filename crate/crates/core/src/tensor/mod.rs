//! Dense N-way tensors with first-index-fastest (column-major) storage.
//!
//! Modes are numbered from zero. The element `(i_0, ..., i_{N-1})` lives at
//! offset `i_0 + I_0 * (i_1 + I_1 * (i_2 + ...))`. Every reshaping operation
//! in the crate (transpose, unfold, fold, contract) uses this one rule; when
//! several modes are merged into a single matrix index, the first listed mode
//! varies fastest.

mod linalg;
mod matrix;

pub use linalg::{singular_values, spd_solve, Cholesky};
pub use matrix::Matrix;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(invalid!("tensor order must be at least 1"));
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return Err(invalid!("dimension {pos} is zero in shape {shape:?}"));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid!("shape {shape:?} overflows the element count"))
}

/// First-index-fastest strides of `shape`.
pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &d in shape {
        strides.push(acc);
        acc *= d;
    }
    strides
}

fn check_permutation(perm: &[usize], order: usize) -> Result<()> {
    if perm.len() != order {
        return Err(invalid!(
            "permutation {perm:?} has length {} but tensor order is {order}",
            perm.len()
        ));
    }
    let mut seen = vec![false; order];
    for &p in perm {
        if p >= order || seen[p] {
            return Err(invalid!("{perm:?} is not a permutation of 0..{order}"));
        }
        seen[p] = true;
    }
    Ok(())
}

fn check_mode_split(order: usize, row_modes: &[usize], col_modes: &[usize]) -> Result<Vec<usize>> {
    if row_modes.is_empty() {
        return Err(invalid!("row mode list must be nonempty"));
    }
    let perm: Vec<usize> = row_modes.iter().chain(col_modes).copied().collect();
    check_permutation(&perm, order).map_err(|_| {
        invalid!(
            "mode split rows={row_modes:?} cols={col_modes:?} must partition 0..{order}"
        )
    })?;
    Ok(perm)
}

/// Gathers `data` (with `shape`) into the layout of its transpose by `perm`.
fn permute_data(shape: &[usize], data: &[f64], perm: &[usize]) -> Vec<f64> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    let n = shape.len();
    let in_strides = strides_of(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();

    let mut out = Vec::with_capacity(data.len());
    let inner = out_shape[0];
    let inner_step = step[0];
    let mut idx = vec![0usize; n];
    let mut base = 0usize;
    for _ in 0..data.len() / inner {
        out.extend((0..inner).map(|j| data[base + j * inner_step]));
        for ax in 1..n {
            idx[ax] += 1;
            base += step[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            base -= step[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

impl DenseTensor {
    /// Builds a tensor from a shape and first-index-fastest data.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(invalid!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid!("non-finite value at linear index {pos}"));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.fill(value);
        Ok(t)
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, shape);
        }
        Self::new(shape.to_vec(), data)
    }

    /// Internal constructor for values already known to be consistent.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
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

    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.order(), "index order mismatch");
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in index.iter().zip(&self.shape) {
            assert!(i < d, "index {index:?} out of bounds for shape {:?}", self.shape);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|v| v * alpha).collect())
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(invalid!(
                "shape mismatch {:?} vs {:?}",
                self.shape,
                other.shape
            ));
        }
        Ok(Self::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// `‖self − other‖_F / ‖other‖_F`; zero when both vanish.
    pub fn relative_error(&self, reference: &Self) -> Result<f64> {
        let diff = self.sub(reference)?.fro_norm();
        let norm = reference.fro_norm();
        Ok(if norm > 0.0 {
            diff / norm
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        })
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.len() {
            return Err(invalid!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            ));
        }
        Ok(Self::from_parts(shape.to_vec(), self.data.clone()))
    }

    /// Generalized transposition: `out.shape[i] = self.shape[perm[i]]`.
    pub fn transpose(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.order())?;
        let shape = perm.iter().map(|&p| self.shape[p]).collect();
        Ok(Self::from_parts(shape, permute_data(&self.shape, &self.data, perm)))
    }

    /// Generalized unfolding `X_[rows; cols]`.
    pub fn unfold(&self, row_modes: &[usize], col_modes: &[usize]) -> Result<Matrix> {
        let perm = check_mode_split(self.order(), row_modes, col_modes)?;
        let rows = row_modes.iter().map(|&m| self.shape[m]).product();
        let cols = col_modes.iter().map(|&m| self.shape[m]).product();
        Ok(Matrix::from_parts(
            rows,
            cols,
            permute_data(&self.shape, &self.data, &perm),
        ))
    }

    /// Mode-`k` unfolding with the remaining modes ascending.
    pub fn unfold_mode(&self, k: usize) -> Result<Matrix> {
        if k >= self.order() {
            return Err(invalid!("mode {k} out of range for order {}", self.order()));
        }
        let others: Vec<usize> = (0..self.order()).filter(|&j| j != k).collect();
        self.unfold(&[k], &others)
    }

    /// Inverse of [`DenseTensor::unfold`] for the same shape and mode split.
    pub fn fold(m: &Matrix, shape: &[usize], row_modes: &[usize], col_modes: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let perm = check_mode_split(shape.len(), row_modes, col_modes)?;
        let rows: usize = row_modes.iter().map(|&k| shape[k]).product();
        let cols: usize = col_modes.iter().map(|&k| shape[k]).product();
        // Vectors have the same layout in either orientation.
        let vector_match = m.len() == rows * cols
            && (m.rows() == 1 || m.cols() == 1)
            && (rows == 1 || cols == 1);
        if (m.rows() != rows || m.cols() != cols) && !vector_match {
            return Err(invalid!(
                "matrix {}x{} does not match shape {shape:?} split rows={row_modes:?} cols={col_modes:?}",
                m.rows(),
                m.cols()
            ));
        }
        if let Some(pos) = m.data().iter().position(|v| !v.is_finite()) {
            return Err(invalid!("non-finite value at linear index {pos}"));
        }
        let permuted_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        Ok(Self::from_parts(
            shape.to_vec(),
            permute_data(&permuted_shape, m.data(), &inverse),
        ))
    }

    /// Inverse of [`DenseTensor::unfold_mode`].
    pub fn fold_mode(m: &Matrix, shape: &[usize], k: usize) -> Result<Self> {
        if k >= shape.len() {
            return Err(invalid!("mode {k} out of range for shape {shape:?}"));
        }
        let others: Vec<usize> = (0..shape.len()).filter(|&j| j != k).collect();
        Self::fold(m, shape, &[k], &others)
    }

    /// Tensor contraction pairing `modes_a[i]` of `a` with `modes_b[i]` of `b`.
    ///
    /// The result carries the free modes of `a` in ascending order followed by
    /// the free modes of `b` in ascending order. A full contraction yields a
    /// tensor of shape `[1]`.
    pub fn contract(a: &Self, modes_a: &[usize], b: &Self, modes_b: &[usize]) -> Result<Self> {
        if modes_a.len() != modes_b.len() {
            return Err(invalid!(
                "contracted mode lists differ in length: {modes_a:?} vs {modes_b:?}"
            ));
        }
        let free_a = free_modes(a.order(), modes_a)?;
        let free_b = free_modes(b.order(), modes_b)?;
        for (&ma, &mb) in modes_a.iter().zip(modes_b) {
            if a.shape[ma] != b.shape[mb] {
                return Err(invalid!(
                    "paired modes a[{ma}]={} and b[{mb}]={} differ",
                    a.shape[ma],
                    b.shape[mb]
                ));
            }
        }
        let perm_a: Vec<usize> = free_a.iter().chain(modes_a).copied().collect();
        let perm_b: Vec<usize> = modes_b.iter().chain(&free_b).copied().collect();
        let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
        let inner: usize = modes_a.iter().map(|&k| a.shape[k]).product();
        let n: usize = free_b.iter().map(|&k| b.shape[k]).product();

        let lhs = Matrix::from_parts(m, inner, permute_data(&a.shape, &a.data, &perm_a));
        let rhs = Matrix::from_parts(inner, n, permute_data(&b.shape, &b.data, &perm_b));
        let product = lhs.matmul(&rhs);

        let mut shape: Vec<usize> = free_a
            .iter()
            .map(|&k| a.shape[k])
            .chain(free_b.iter().map(|&k| b.shape[k]))
            .collect();
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Self::from_parts(shape, product.into_data()))
    }

    /// Multiplies every slice along `mode` by the matching entry of `scale`.
    pub fn scale_mode(&mut self, mode: usize, scale: &[f64]) {
        assert_eq!(self.shape[mode], scale.len(), "scale length must match mode size");
        let inner: usize = self.shape[..mode].iter().product();
        let dim = self.shape[mode];
        for block in self.data.chunks_exact_mut(inner * dim) {
            for (slice, &s) in block.chunks_exact_mut(inner).zip(scale) {
                slice.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    /// Keeps only the listed indices along `mode`, in the given order.
    pub fn select_mode(&self, mode: usize, keep: &[usize]) -> Result<Self> {
        if mode >= self.order() {
            return Err(invalid!("mode {mode} out of range for order {}", self.order()));
        }
        let dim = self.shape[mode];
        if keep.is_empty() || keep.iter().any(|&i| i >= dim) {
            return Err(invalid!("selection {keep:?} invalid for mode size {dim}"));
        }
        let inner: usize = self.shape[..mode].iter().product();
        let mut data = Vec::with_capacity(self.len() / dim * keep.len());
        for block in self.data.chunks_exact(inner * dim) {
            for &i in keep {
                data.extend_from_slice(&block[i * inner..(i + 1) * inner]);
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = keep.len();
        Ok(Self::from_parts(shape, data))
    }
}

fn free_modes(order: usize, contracted: &[usize]) -> Result<Vec<usize>> {
    let mut used = vec![false; order];
    for &m in contracted {
        if m >= order || used[m] {
            return Err(invalid!(
                "contracted modes {contracted:?} invalid for order {order}"
            ));
        }
        used[m] = true;
    }
    Ok((0..order).filter(|&k| !used[k]).collect())
}

/// Advances a first-index-fastest multi-index; wraps to zero after the last.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}

impl TryFrom<&DenseTensor> for Matrix {
    type Error = Error;

    fn try_from(t: &DenseTensor) -> Result<Matrix> {
        match t.shape() {
            [r] => Ok(Matrix::from_parts(*r, 1, t.data().to_vec())),
            [r, c] => Ok(Matrix::from_parts(*r, *c, t.data().to_vec())),
            s => Err(invalid!("tensor of shape {s:?} is not a matrix")),
        }
    }
}
