//! Tensor completion: solver sweeps interleaved with a masked update of the
//! working tensor,
//!
//! ```text
//! X ← P_Ωᶜ((STN(G, S) + ρ X̂) / (1 + ρ)) + P_Ω(F)
//! ```
//!
//! so observed entries are pinned to the data while missing ones follow the
//! network.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::init::initial_model;
use crate::network::{compression_ratio_from_counts, param_count, RankMatrix, SvdInsTnModel};
use crate::solver::{normalization_factor, pam_sweep, SolverConfig, SolverState};
use crate::tensor::DenseTensor;

/// The set Ω of observed entries, stored as one flag per entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    dims: Vec<usize>,
    observed: Vec<bool>,
}

impl ObservationMask {
    pub fn new(dims: Vec<usize>, observed: Vec<bool>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) {
            return Err(invalid!("mask dims must be positive, got {dims:?}"));
        }
        if observed.len() != len {
            return Err(invalid!("mask has {} flags, shape needs {len}", observed.len()));
        }
        if !observed.contains(&true) {
            return Err(invalid!("mask has no observed entries"));
        }
        Ok(Self { dims, observed })
    }

    /// Nonzero entries are observed.
    pub fn from_tensor(t: &DenseTensor) -> Result<Self> {
        Self::new(t.shape().to_vec(), t.data().iter().map(|&v| v != 0.0).collect())
    }

    pub fn full(dims: &[usize]) -> Result<Self> {
        Self::new(dims.to_vec(), vec![true; dims.iter().product()])
    }

    /// Exactly `round(missing_fraction · n)` entries missing, chosen
    /// uniformly by `rng`; at least one entry stays observed.
    pub fn random(dims: &[usize], missing_fraction: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&missing_fraction) {
            return Err(invalid!("missing fraction must lie in [0, 1], got {missing_fraction}"));
        }
        let n: usize = dims.iter().product();
        let missing = ((missing_fraction * n as f64).round() as usize).min(n.saturating_sub(1));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut observed = vec![true; n];
        for &i in &order[..missing] {
            observed[i] = false;
        }
        Self::new(dims.to_vec(), observed)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn flags(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&b| b).count()
    }

    pub fn missing_count(&self) -> usize {
        self.observed.len() - self.observed_count()
    }

    /// 1 on observed entries, 0 elsewhere.
    pub fn to_tensor(&self) -> DenseTensor {
        let data = self.observed.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        DenseTensor::from_parts(self.dims.clone(), data)
    }

    fn check(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() != self.dims.as_slice() {
            return Err(invalid!(
                "tensor shape {:?} does not match mask shape {:?}",
                x.shape(),
                self.dims
            ));
        }
        Ok(())
    }
}

/// `P_Ω(x)` when `keep_observed`, otherwise `P_Ωᶜ(x)`.
pub fn project(x: &DenseTensor, mask: &ObservationMask, keep_observed: bool) -> Result<DenseTensor> {
    mask.check(x)?;
    let data = x
        .data()
        .iter()
        .zip(&mask.observed)
        .map(|(&v, &obs)| if obs == keep_observed { v } else { 0.0 })
        .collect();
    Ok(DenseTensor::from_parts(x.shape().to_vec(), data))
}

/// One working-tensor update: missing entries become
/// `(stn + ρ·x_hat)/(1 + ρ)`, observed entries are copied from `f`.
pub fn blend_update(
    stn: &DenseTensor,
    x_hat: &DenseTensor,
    f: &DenseTensor,
    mask: &ObservationMask,
    rho: f64,
) -> Result<DenseTensor> {
    for t in [stn, x_hat, f] {
        mask.check(t)?;
    }
    let inv = 1.0 / (1.0 + rho);
    let data = (0..f.len())
        .map(|i| {
            if mask.observed[i] {
                f.data()[i]
            } else {
                (stn.data()[i] + rho * x_hat.data()[i]) * inv
            }
        })
        .collect();
    Ok(DenseTensor::from_parts(f.shape().to_vec(), data))
}

/// `‖P(estimate − truth)‖_F / ‖P(truth)‖_F` over the observed (`observed =
/// true`) or missing entries.
pub fn masked_relative_error(
    estimate: &DenseTensor,
    truth: &DenseTensor,
    mask: &ObservationMask,
    observed: bool,
) -> Result<f64> {
    mask.check(estimate)?;
    mask.check(truth)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&e, &t), &obs) in estimate.data().iter().zip(truth.data()).zip(&mask.observed) {
        if obs == observed {
            num += (e - t) * (e - t);
            den += t * t;
        }
    }
    if den == 0.0 {
        return Err(invalid!("reference is zero on the selected entries"));
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub solver: SolverConfig,
    /// Cap on working-tensor updates (one solver sweep each).
    pub max_iters: usize,
    /// Stop once `‖X_i − X_{i−1}‖_F / ‖X_{i−1}‖_F` falls below this.
    pub tol: f64,
}

pub const DEFAULT_COMPLETION_GAMMA: f64 = 0.0003;
/// Completion fits a network to partly invented data, so it runs at a
/// smaller data scale than decomposition, where the ridge weight on the cores
/// keeps the network from reproducing the zero-filled entries.
pub const DEFAULT_COMPLETION_DATA_SCALE: f64 = 1.0;

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig {
                gamma: DEFAULT_COMPLETION_GAMMA,
                data_scale: Some(DEFAULT_COMPLETION_DATA_SCALE),
                ..SolverConfig::default()
            },
            max_iters: 500,
            tol: 1e-5,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.max_iters == 0 {
            return Err(invalid!("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid!("completion tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub ranks: RankMatrix,
    pub compression_ratio: f64,
    /// Fit of the network to the observed entries.
    pub observed_relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    /// Per-iteration relative change of the working tensor.
    pub change_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Completes `f` from the entries flagged in `mask`. Values of `f` off the
/// mask are ignored; the missing entries start at zero. Observed entries of
/// the returned tensor are copied bit-for-bit from `f`.
pub fn complete(
    f: &DenseTensor,
    mask: &ObservationMask,
    config: &CompletionConfig,
) -> Result<(DenseTensor, SvdInsTnModel, CompletionReport)> {
    config.validate()?;
    mask.check(f)?;
    if f.order() < 2 {
        return Err(invalid!("tensor order must be at least 2, got {}", f.order()));
    }
    let start = Instant::now();
    let solver = &config.solver;
    let observed_values = f.data().iter().zip(&mask.observed).filter(|(_, &o)| o).map(|(v, _)| v);
    let factor = normalization_factor(observed_values, solver.data_scale);
    let target = project(&f.scaled(factor), mask, true)?;

    let mut x = target.clone();
    let mut state = SolverState::new(initial_model(&x, solver.gamma, solver.epsilon, true)?);
    let mut change_trace = Vec::new();
    let mut converged = false;
    while change_trace.len() < config.max_iters {
        pam_sweep(&mut state, &x, solver)?;
        let next = blend_update(state.reconstruction(), &x, &target, mask, solver.rho)?;
        let denom = x.fro_norm();
        let change = if denom > 0.0 { next.sub(&x)?.fro_norm() / denom } else { f64::INFINITY };
        x = next;
        change_trace.push(change);
        log::debug!(
            "completion iteration {}: change {change:.3e}, ranks {:?}",
            change_trace.len(),
            state.model().ranks().entries()
        );
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let mut warnings = state.warnings().to_vec();
    if !converged {
        let message = format!("stopped after {} completion iterations without converging", config.max_iters);
        log::warn!("{message}");
        warnings.push(message);
    }

    let output: Vec<f64> = (0..f.len())
        .map(|i| if mask.observed[i] { f.data()[i] } else { x.data()[i] / factor })
        .collect();
    let output = DenseTensor::new(f.shape().to_vec(), output)?;
    let observed_relative_error = masked_relative_error(state.reconstruction(), &target, mask, true)
        .unwrap_or(f64::NAN);
    let model = state.into_model().scaled(1.0 / factor);
    let report = CompletionReport {
        ranks: model.ranks().clone(),
        compression_ratio: compression_ratio_from_counts(param_count(&model), f.len()),
        observed_relative_error,
        iterations: change_trace.len(),
        converged,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        change_trace,
        warnings,
    };
    Ok((output, model, report))
}

/// `10·log10(peak² / MSE)`; `+∞` when the tensors are identical.
pub fn psnr(estimate: &DenseTensor, truth: &DenseTensor, peak: f64) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(invalid!("shapes {:?} and {:?} differ", estimate.shape(), truth.shape()));
    }
    if !(peak > 0.0) {
        return Err(invalid!("peak must be positive, got {peak}"));
    }
    let mse = estimate.sub(truth)?.fro_norm().powi(2) / truth.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (peak * peak / mse).log10() })
}

/// Average of [`psnr`] over the slices along `frame_mode`.
pub fn mean_psnr(estimate: &DenseTensor, truth: &DenseTensor, peak: f64, frame_mode: usize) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(invalid!("shapes {:?} and {:?} differ", estimate.shape(), truth.shape()));
    }
    if frame_mode >= truth.order() {
        return Err(invalid!("frame mode {frame_mode} out of range for order {}", truth.order()));
    }
    let frames = truth.shape()[frame_mode];
    let mut total = 0.0;
    for i in 0..frames {
        let e = estimate.select_mode(frame_mode, &[i])?;
        let t = truth.select_mode(frame_mode, &[i])?;
        total += psnr(&e, &t, peak)?;
    }
    Ok(total / frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn projections_partition() {
        let x = random_tensor(&[3, 4, 2], 1);
        let full = ObservationMask::full(&[3, 4, 2]).unwrap();
        assert_eq!(project(&x, &full, true).unwrap(), x);
        assert!(project(&x, &full, false).unwrap().data().iter().all(|&v| v == 0.0));

        let mask = ObservationMask::random(&[3, 4, 2], 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(mask.missing_count(), 12);
        let a = project(&x, &mask, true).unwrap();
        let b = project(&x, &mask, false).unwrap();
        let sum: Vec<f64> = a.data().iter().zip(b.data()).map(|(p, q)| p + q).collect();
        assert_eq!(sum, x.data());
    }

    #[test]
    fn mask_validation() {
        assert!(ObservationMask::new(vec![2, 2], vec![false; 4]).is_err());
        assert!(ObservationMask::new(vec![2, 2], vec![true; 3]).is_err());
        let t = DenseTensor::new(vec![2, 2], vec![0.0, 2.0, 0.0, -1.0]).unwrap();
        let m = ObservationMask::from_tensor(&t).unwrap();
        assert_eq!(m.flags(), &[false, true, false, true]);
        assert_eq!(m.to_tensor().data(), &[0.0, 1.0, 0.0, 1.0]);
        let x = random_tensor(&[2, 3], 0);
        assert!(project(&x, &m, true).is_err());
    }

    #[test]
    fn blend_properties() {
        let stn = random_tensor(&[3, 3, 3], 3);
        let x_hat = random_tensor(&[3, 3, 3], 4);
        let f = random_tensor(&[3, 3, 3], 5);
        let mask = ObservationMask::random(&[3, 3, 3], 0.4, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let out = blend_update(&stn, &x_hat, &f, &mask, 0.001).unwrap();
        for i in 0..f.len() {
            if mask.flags()[i] {
                assert_eq!(out.data()[i].to_bits(), f.data()[i].to_bits());
            } else {
                let (a, b) = (stn.data()[i], x_hat.data()[i]);
                assert!(out.data()[i] >= a.min(b) && out.data()[i] <= a.max(b));
            }
        }
        let pinned = blend_update(&stn, &x_hat, &f, &mask, 1e8).unwrap();
        let missing: Vec<usize> = (0..f.len()).filter(|&i| !mask.flags()[i]).collect();
        let diff: f64 = missing.iter().map(|&i| (pinned.data()[i] - x_hat.data()[i]).powi(2)).sum();
        let norm: f64 = missing.iter().map(|&i| x_hat.data()[i].powi(2)).sum();
        assert!((diff / norm).sqrt() <= 1e-6);
    }

    #[test]
    fn psnr_values() {
        let truth = random_tensor(&[4, 4, 3], 7);
        assert_eq!(psnr(&truth, &truth, 1.0).unwrap(), f64::INFINITY);
        let shifted = DenseTensor::from_fn(&[4, 4, 3], |i| truth.get(i) + 0.1).unwrap();
        let direct = 10.0 * (1.0f64 / 0.01).log10();
        assert!((psnr(&shifted, &truth, 1.0).unwrap() - direct).abs() < 1e-9);
        assert!((direct - 20.0).abs() < 1e-12);
        assert!((mean_psnr(&shifted, &truth, 1.0, 2).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&shifted, &truth, 0.0).is_err());
        assert!(mean_psnr(&shifted, &truth, 1.0, 3).is_err());
    }

    #[test]
    fn full_mask_returns_observations() {
        let x = random_tensor(&[3, 4, 3], 8);
        let mask = ObservationMask::full(x.shape()).unwrap();
        let config = CompletionConfig {
            max_iters: 5,
            ..CompletionConfig::default()
        };
        let (out, _, report) = complete(&x, &mask, &config).unwrap();
        assert_eq!(out, x);
        assert_eq!(report.change_trace.len(), report.iterations);
    }

    #[test]
    fn rank_one_completion_beats_zero_fill() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<Vec<f64>> = [4, 4, 4]
            .iter()
            .map(|&n| (0..n).map(|_| 0.5 + rng.random::<f64>()).collect())
            .collect();
        let truth = DenseTensor::from_fn(&[4, 4, 4], |i| u[0][i[0]] * u[1][i[1]] * u[2][i[2]]).unwrap();
        let mask = ObservationMask::random(&[4, 4, 4], 0.5, &mut rng).unwrap();
        let observed = project(&truth, &mask, true).unwrap();
        let (out, _, _) = complete(&observed, &mask, &CompletionConfig::default()).unwrap();
        let re = masked_relative_error(&out, &truth, &mask, false).unwrap();
        let baseline = masked_relative_error(&observed, &truth, &mask, false).unwrap();
        assert!(re < baseline);
        assert!(re <= 0.05, "held-out RE {re}");
        for i in 0..truth.len() {
            if mask.flags()[i] {
                assert_eq!(out.data()[i].to_bits(), truth.data()[i].to_bits());
            }
        }
    }
}
