//! Starting point for the solver: edge ranks and diagonals from the singular
//! values of averaged two-mode slices, and constant cores.

use crate::error::{invalid, Result};
use crate::network::{core_shape, edge_pairs, RankMatrix, SvdInsTnModel};
use crate::solver::shrink_scalar;
use crate::tensor::{singular_values, DenseTensor, Matrix};

#[derive(Clone, Debug)]
pub struct InitResult {
    pub ranks: RankMatrix,
    /// Post-shrink diagonals in lexicographic edge order, zeros removed.
    pub diagonals: Vec<Vec<f64>>,
    /// Averaged slices `X_{t,l}` in the same order.
    pub slice_means: Vec<Matrix>,
}

/// Mean of all mode-`(t, l)` slices: an `I_t × I_l` matrix.
pub fn slice_mean(x: &DenseTensor, t: usize, l: usize) -> Result<Matrix> {
    let n = x.order();
    if t >= l || l >= n {
        return Err(invalid!("invalid mode pair ({t}, {l}) for order {n}"));
    }
    let rest: Vec<usize> = (0..n).filter(|&j| j != t && j != l).collect();
    let unfolded = x.unfold(&[t, l], &rest)?;
    let (rows, cols) = (unfolded.rows(), unfolded.cols());
    let mut mean = vec![0.0; rows];
    for c in 0..cols {
        mean.iter_mut()
            .zip(unfolded.column(c))
            .for_each(|(m, v)| *m += v);
    }
    let inv = 1.0 / cols as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Matrix::new(x.shape()[t], x.shape()[l], mean)
}

/// Shrinks singular values with the threshold `γ·max(s)/(|s|+ε)` and drops
/// the zeros; keeps the largest value if everything vanishes.
fn shrink_spectrum(sigma: &[f64], gamma: f64, epsilon: f64) -> Vec<f64> {
    let max = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kept: Vec<f64> = sigma
        .iter()
        .map(|&s| shrink_scalar(s, gamma * max / (s.abs() + epsilon)))
        .filter(|&v| v != 0.0)
        .collect();
    if kept.is_empty() {
        log::warn!("initial shrink removed every singular value; keeping the largest");
        vec![sigma.first().copied().filter(|&v| v > 0.0).unwrap_or(1.0)]
    } else {
        kept
    }
}

pub fn init_diagonals(x: &DenseTensor, gamma: f64, epsilon: f64) -> Result<InitResult> {
    init_diagonals_with(x, gamma, epsilon, true)
}

/// As [`init_diagonals`]; with `shrink = false` every singular value is kept,
/// so each edge starts at its upper bound `min(I_t, I_l)`.
pub fn init_diagonals_with(x: &DenseTensor, gamma: f64, epsilon: f64, shrink: bool) -> Result<InitResult> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(invalid!("gamma must be a finite nonnegative number, got {gamma}"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid!("epsilon must be positive, got {epsilon}"));
    }
    let n = x.order();
    if n < 2 {
        return Err(invalid!("tensor order must be at least 2, got {n}"));
    }
    let mut diagonals = Vec::new();
    let mut slice_means = Vec::new();
    for (t, l) in edge_pairs(n) {
        let mean = slice_mean(x, t, l)?;
        let sigma = singular_values(&mean)?;
        let s = if shrink {
            shrink_spectrum(&sigma, gamma, epsilon)
        } else {
            // A zero spectrum would make every diagonal vanish.
            sigma.iter().map(|&v| if v > 0.0 { v } else { f64::EPSILON }).collect()
        };
        diagonals.push(s);
        slice_means.push(mean);
    }
    let ranks = RankMatrix::new(n, diagonals.iter().map(Vec::len).collect())?;
    Ok(InitResult {
        ranks,
        diagonals,
        slice_means,
    })
}

/// Cores with every entry equal to `1/√I_k`.
pub fn init_cores(dims: &[usize], ranks: &RankMatrix) -> Result<Vec<DenseTensor>> {
    (0..dims.len())
        .map(|k| DenseTensor::filled(&core_shape(dims, ranks, k), 1.0 / (dims[k] as f64).sqrt()))
        .collect()
}

/// Upper bound `min(I_t, I_l)` on every edge rank.
pub fn rank_upper_bound(dims: &[usize]) -> Result<RankMatrix> {
    RankMatrix::from_fn(dims.len(), |t, l| dims[t].min(dims[l]))
}

/// Solver starting model for `x`.
pub fn initial_model(x: &DenseTensor, gamma: f64, epsilon: f64, shrink: bool) -> Result<SvdInsTnModel> {
    let init = init_diagonals_with(x, gamma, epsilon, shrink)?;
    let cores = init_cores(x.shape(), &init.ranks)?;
    SvdInsTnModel::new(x.shape().to_vec(), init.ranks, cores, init.diagonals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn order_two_slice_mean_is_the_matrix() {
        let x = DenseTensor::new(vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        let m = slice_mean(&x, 0, 1).unwrap();
        assert_eq!(m.data(), x.data());
    }

    #[test]
    fn constant_tensor_slice_mean() {
        let x = DenseTensor::filled(&[2, 3, 4], 1.5).unwrap();
        let m = slice_mean(&x, 0, 2).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        assert!(m.data().iter().all(|&v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn slice_mean_matches_direct_average() {
        let mut next = lcg(3);
        let x = DenseTensor::from_fn(&[2, 3, 2], |_| next()).unwrap();
        let m = slice_mean(&x, 0, 1).unwrap();
        for a in 0..2 {
            for b in 0..3 {
                let direct = 0.5 * (x.get(&[a, b, 0]) + x.get(&[a, b, 1]));
                assert!((m.get(a, b) - direct).abs() < 1e-15);
            }
        }
        let m = slice_mean(&x, 1, 2).unwrap();
        assert!((m.get(2, 1) - 0.5 * (x.get(&[0, 2, 1]) + x.get(&[1, 2, 1]))).abs() < 1e-15);
        assert!(slice_mean(&x, 2, 1).is_err());
    }

    #[test]
    fn vanishing_gamma_keeps_full_spectrum() {
        let mut next = lcg(4);
        let x = DenseTensor::from_fn(&[3, 4, 5], |_| next()).unwrap();
        let init = init_diagonals(&x, 1e-14, 1e-10).unwrap();
        assert_eq!(init.ranks, rank_upper_bound(&[3, 4, 5]).unwrap());
    }

    #[test]
    fn shrink_removes_small_values() {
        let s = shrink_spectrum(&[10.0, 0.01], 0.1, 1e-12);
        assert_eq!(s.len(), 1);
        assert!((s[0] - (10.0 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn shrink_keeps_largest_when_all_vanish() {
        let s = shrink_spectrum(&[1e-3, 1e-4], 10.0, 1e-10);
        assert_eq!(s, vec![1e-3]);
    }

    #[test]
    fn constant_cores() {
        let ranks = RankMatrix::new(3, vec![2, 1, 3]).unwrap();
        let cores = init_cores(&[4, 9, 16], &ranks).unwrap();
        assert_eq!(cores[0].shape(), &[4, 2, 1]);
        assert_eq!(cores[1].shape(), &[2, 9, 3]);
        assert!(cores[0].data().iter().all(|&v| v == 0.5));
        assert!(cores[2].data().iter().all(|&v| v == 0.25));
        let flat = init_cores(&[4, 9], &RankMatrix::filled(2, 1).unwrap()).unwrap();
        assert_eq!(flat[1].shape(), &[1, 9]);
    }

    #[test]
    fn upper_bound_values() {
        let b = rank_upper_bound(&[16, 18, 20, 22]).unwrap();
        assert_eq!(b.get(0, 1), 16);
        assert_eq!(b.get(2, 3), 20);
        assert_eq!(b.get(1, 3), 18);
        assert!(rank_upper_bound(&[5, 5, 5]).unwrap().entries().iter().all(|&r| r == 5));
    }

    #[test]
    fn unshrunk_init_uses_upper_bound() {
        let mut next = lcg(5);
        let x = DenseTensor::from_fn(&[3, 2, 4], |_| next()).unwrap();
        let init = init_diagonals_with(&x, 0.5, 1e-10, false).unwrap();
        assert_eq!(init.ranks, rank_upper_bound(x.shape()).unwrap());
        let shrunk = init_diagonals(&x, 0.5, 1e-10).unwrap();
        assert!(shrunk.ranks.entries().iter().zip(init.ranks.entries()).all(|(a, b)| a <= b));
    }
}
