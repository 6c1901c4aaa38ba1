//! Proximal alternating minimization of
//!
//! ```text
//! ½‖X − STN(G, S)‖²_F + Σ λ_{t,l} ‖s_{t,l} ⊙ w_{t,l}‖₁ + μ/2 Σ ‖G_k‖²_F
//! ```
//!
//! Each outer sweep solves every core subproblem exactly (a ridge system with
//! a proximal pull toward the previous core), runs a few ADMM rounds with
//! reweighted soft-thresholding on every diagonal factor, and then deletes
//! diagonal entries that reached exactly zero along with the matching core
//! slices. Ranks therefore only ever decrease.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::init::initial_model;
use crate::network::{
    compression_ratio, env_edge, env_matrix_core, evaluate, prune_edge, RankMatrix, SvdInsTnModel,
};
use crate::tensor::{Cholesky, DenseTensor, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sparsity level; larger values prune more aggressively.
    pub gamma: f64,
    /// Proximal weight toward the previous iterate.
    pub rho: f64,
    /// Tikhonov weight on the cores.
    pub mu: f64,
    /// ADMM penalty, shared by every edge.
    pub beta: f64,
    /// Guard in the reweighting `1/(|v| + ε)` and in the initial shrink.
    pub epsilon: f64,
    /// Stop once the relative change of the reconstruction falls below this.
    pub tol: f64,
    pub max_outer: usize,
    pub inner_admm_iters: usize,
    /// Target root-mean-square entry size the data are rescaled to before
    /// solving; `None` solves on the data as given. The ridge weight `μ` and
    /// the initial shrink act on absolute magnitudes, so this fixes the scale
    /// they are measured against.
    pub data_scale: Option<f64>,
}

pub const DEFAULT_DATA_SCALE: f64 = 10.0;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0015,
            rho: 0.001,
            mu: 1.0,
            beta: 1.0,
            epsilon: 1e-10,
            tol: 1e-5,
            max_outer: 200,
            inner_admm_iters: 5,
            data_scale: Some(DEFAULT_DATA_SCALE),
        }
    }
}

impl SolverConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("mu", self.mu),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid!("{name} must be positive and finite, got {value}"));
            }
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid!("gamma must be nonnegative and finite, got {}", self.gamma));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid!("tol must be nonnegative, got {}", self.tol));
        }
        if let Some(scale) = self.data_scale {
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(invalid!("data_scale must be positive and finite, got {scale}"));
            }
        }
        if self.max_outer == 0 || self.inner_admm_iters == 0 {
            return Err(invalid!("iteration counts must be at least 1"));
        }
        Ok(())
    }
}

/// Soft threshold `max(a − b, 0) + min(a + b, 0)`.
pub fn shrink_scalar(a: f64, b: f64) -> f64 {
    (a - b).max(0.0) + (a + b).min(0.0)
}

/// Elementwise soft threshold of `a` by the nonnegative thresholds `b`.
pub fn shrink(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(invalid!("shrink needs equal lengths, got {} and {}", a.len(), b.len()));
    }
    if b.iter().any(|&v| !(v >= 0.0)) {
        return Err(invalid!("shrink thresholds must be nonnegative"));
    }
    Ok(a.iter().zip(b).map(|(&x, &t)| shrink_scalar(x, t)).collect())
}

/// Value of the regularized objective; `lambdas` and `weights` follow the
/// lexicographic edge order of the model.
pub fn objective(
    model: &SvdInsTnModel,
    x: &DenseTensor,
    lambdas: &[f64],
    weights: &[Vec<f64>],
    mu: f64,
) -> Result<f64> {
    let edges = model.ranks().edge_count();
    if lambdas.len() != edges || weights.len() != edges {
        return Err(invalid!("expected {edges} lambdas and weight vectors"));
    }
    let fit = 0.5 * x.sub(&evaluate(model))?.fro_norm().powi(2);
    let mut sparsity = 0.0;
    for ((s, w), &lambda) in model.diagonals().iter().zip(weights).zip(lambdas) {
        if s.len() != w.len() {
            return Err(invalid!("weight length {} does not match rank {}", w.len(), s.len()));
        }
        sparsity += lambda * s.iter().zip(w).map(|(a, b)| (a * b).abs()).sum::<f64>();
    }
    let ridge = 0.5 * mu * model.cores().iter().map(|g| g.fro_norm().powi(2)).sum::<f64>();
    Ok(fit + sparsity + ridge)
}

/// Everything the sweep carries between updates.
#[derive(Clone, Debug)]
pub struct SolverState {
    model: SvdInsTnModel,
    multipliers: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    lambdas: Vec<f64>,
    prev_diagonals: Vec<Vec<f64>>,
    prev_reconstruction: DenseTensor,
    reconstruction: DenseTensor,
    iteration: usize,
    change_trace: Vec<f64>,
    re_trace: Vec<f64>,
    warnings: Vec<String>,
}

impl SolverState {
    pub fn new(model: SvdInsTnModel) -> Self {
        let reconstruction = evaluate(&model);
        let zeros: Vec<Vec<f64>> = model.diagonals().iter().map(|s| vec![0.0; s.len()]).collect();
        let ones: Vec<Vec<f64>> = model.diagonals().iter().map(|s| vec![1.0; s.len()]).collect();
        let edges = model.ranks().edge_count();
        Self {
            prev_diagonals: model.diagonals().to_vec(),
            multipliers: zeros,
            weights: ones,
            lambdas: vec![0.0; edges],
            prev_reconstruction: reconstruction.clone(),
            reconstruction,
            model,
            iteration: 0,
            change_trace: Vec::new(),
            re_trace: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn model(&self) -> &SvdInsTnModel {
        &self.model
    }

    pub fn into_model(self) -> SvdInsTnModel {
        self.model
    }

    pub fn multipliers(&self) -> &[Vec<f64>] {
        &self.multipliers
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Diagonals at the entry of their most recent subproblem.
    pub fn prev_diagonals(&self) -> &[Vec<f64>] {
        &self.prev_diagonals
    }

    /// Reconstruction at the start of the latest sweep.
    pub fn prev_reconstruction(&self) -> &DenseTensor {
        &self.prev_reconstruction
    }

    pub fn reconstruction(&self) -> &DenseTensor {
        &self.reconstruction
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Per-sweep `‖recon_i − recon_{i−1}‖_F / ‖recon_{i−1}‖_F`.
    pub fn change_trace(&self) -> &[f64] {
        &self.change_trace
    }

    /// Per-sweep relative error against the fitting target.
    pub fn re_trace(&self) -> &[f64] {
        &self.re_trace
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    fn check_target(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() != self.model.dims() {
            return Err(invalid!(
                "target shape {:?} does not match model dims {:?}",
                x.shape(),
                self.model.dims()
            ));
        }
        Ok(())
    }
}

/// `λ_{t,l} = γ · max|s_{t,l}| · (ρ + β)` from the current diagonals.
pub fn update_lambdas(state: &mut SolverState, config: &SolverConfig) {
    state.lambdas = state
        .model
        .diagonals()
        .iter()
        .map(|s| {
            let max = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            config.gamma * max * (config.rho + config.beta)
        })
        .collect();
}

/// Exact minimizer of the core-`k` subproblem:
/// `G_(k) = (X_(k) M_kᵀ + ρ Ĝ_(k)) (M_k M_kᵀ + (μ+ρ) I)⁻¹`, with `Ĝ` the core
/// on entry.
pub fn update_core(state: &mut SolverState, x: &DenseTensor, k: usize, config: &SolverConfig) -> Result<()> {
    state.check_target(x)?;
    if k >= state.model.order() {
        return Err(invalid!("core {k} out of range"));
    }
    let env = env_matrix_core(&state.model, k)?;
    let anchor = state.model.core(k).unfold_mode(k)?;
    let target = x.unfold_mode(k)?;

    let mut system = env.matmul_tr(&env);
    system.add_to_diagonal(config.mu + config.rho);
    // Transposed normal equations: A Gᵀ = M Xᵀ + ρ Ĝᵀ.
    let mut rhs = env.matmul_tr(&target);
    rhs.axpy(config.rho, &anchor.transpose());
    let (chol, shift) = Cholesky::factor_jittered(&system)?;
    if shift > 0.0 {
        log::debug!("core {k} system needed a diagonal shift of {shift:e}");
    }
    let solution = chol.solve(&rhs).transpose();
    let shape = state.model.core(k).shape().to_vec();
    let core = DenseTensor::fold_mode(&solution, &shape, k)
        .map_err(|_| Error::Numerical(format!("core {k} update produced non-finite values")))?;
    state.model.replace_core(k, core);
    Ok(())
}

/// `inner_admm_iters` ADMM rounds on the diagonal of edge `(t, l)`.
pub fn update_diagonal(
    state: &mut SolverState,
    x: &DenseTensor,
    t: usize,
    l: usize,
    config: &SolverConfig,
) -> Result<()> {
    state.check_target(x)?;
    let env = env_edge(&state.model, t, l)?;
    let e = state.model.ranks().edge_index(t, l);
    let rank = env.rank();
    let (rho, beta) = (config.rho, config.beta);
    let lambda = state.lambdas[e];

    let hx = env.proj(x)?;
    let mut system: Matrix = env.gram().clone();
    system.add_to_diagonal(beta);
    let (chol, shift) = Cholesky::factor_jittered(&system)?;
    if shift > 0.0 {
        log::debug!("edge ({t}, {l}) system needed a diagonal shift of {shift:e}");
    }

    let anchor = state.model.diagonal(t, l).to_vec();
    let mut s = anchor.clone();
    let mut p = state.multipliers[e].clone();
    let mut w = vec![1.0; rank];
    let mut v = vec![0.0; rank];
    for _ in 0..config.inner_admm_iters {
        let rhs: Vec<f64> = (0..rank).map(|i| hx[i] + beta * s[i] + p[i]).collect();
        let q = chol.solve_vec(&rhs);
        for i in 0..rank {
            v[i] = (rho * anchor[i] + beta * q[i] - p[i]) / (rho + beta);
            w[i] = 1.0 / (v[i].abs() + config.epsilon);
            s[i] = shrink_scalar(v[i], lambda * w[i] / (rho + beta));
            p[i] += beta * (s[i] - q[i]);
        }
    }
    if !s.iter().chain(&p).all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("diagonal ({t}, {l}) update diverged")));
    }
    if s.iter().all(|&v| v == 0.0) {
        let keep = (0..rank)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .expect("rank >= 1");
        s[keep] = v[keep];
        state.warn(format!(
            "sweep {}: every entry of diagonal ({t}, {l}) was thresholded to zero; kept index {keep}",
            state.iteration + 1
        ));
    }
    state.model.replace_diagonal(t, l, s);
    state.prev_diagonals[e] = anchor;
    state.multipliers[e] = p;
    state.weights[e] = w;
    Ok(())
}

/// Deletes exactly-zero diagonal entries on every edge, resizing multipliers,
/// weights and anchors alongside.
pub fn prune_zero_entries(state: &mut SolverState) -> Result<()> {
    let edges: Vec<(usize, usize)> = state.model.ranks().edges().collect();
    for (e, (t, l)) in edges.into_iter().enumerate() {
        let s = state.model.diagonal(t, l);
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] != 0.0).collect();
        if keep.len() == s.len() {
            continue;
        }
        state.model = prune_edge(&state.model, t, l, &keep)?;
        for v in [
            &mut state.multipliers[e],
            &mut state.weights[e],
            &mut state.prev_diagonals[e],
        ] {
            *v = keep.iter().map(|&i| v[i]).collect();
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSummary {
    /// `‖recon − X̂‖_F / ‖X̂‖_F` with `X̂` the reconstruction before the sweep.
    pub change: f64,
    pub relative_error: f64,
    pub converged: bool,
}

fn relative_change(current: &DenseTensor, previous: &DenseTensor) -> Result<f64> {
    current.relative_error(previous)
}

/// One outer iteration: λ schedule, all core updates, all diagonal updates,
/// pruning, and the convergence test on the reconstruction.
pub fn pam_sweep(state: &mut SolverState, x: &DenseTensor, config: &SolverConfig) -> Result<SweepSummary> {
    config.validate()?;
    state.check_target(x)?;
    state.prev_reconstruction = state.reconstruction.clone();
    update_lambdas(state, config);
    for k in 0..state.model.order() {
        update_core(state, x, k, config)?;
    }
    let edges: Vec<(usize, usize)> = state.model.ranks().edges().collect();
    for (t, l) in edges {
        update_diagonal(state, x, t, l, config)?;
    }
    prune_zero_entries(state)?;
    state.reconstruction = evaluate(&state.model);

    let change = relative_change(&state.reconstruction, &state.prev_reconstruction)?;
    let relative_error = state.reconstruction.relative_error(x)?;
    state.iteration += 1;
    state.change_trace.push(change);
    state.re_trace.push(relative_error);
    Ok(SweepSummary {
        change,
        relative_error,
        converged: change < config.tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    pub ranks: RankMatrix,
    pub compression_ratio: f64,
    pub relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub re_trace: Vec<f64>,
    pub change_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Runs sweeps from `model` until convergence or `max_outer`.
pub fn decompose_from(
    x: &DenseTensor,
    model: SvdInsTnModel,
    config: &SolverConfig,
) -> Result<(SvdInsTnModel, DecomposeReport)> {
    config.validate()?;
    let start = Instant::now();
    let mut state = SolverState::new(model);
    state.check_target(x)?;
    let mut converged = false;
    while state.iteration < config.max_outer {
        let summary = pam_sweep(&mut state, x, config)?;
        log::debug!(
            "sweep {}: change {:.3e}, RE {:.3e}, ranks {:?}",
            state.iteration,
            summary.change,
            summary.relative_error,
            state.model.ranks().entries()
        );
        if summary.converged {
            converged = true;
            break;
        }
    }
    if !converged {
        let last = state.change_trace.last().copied().unwrap_or(f64::NAN);
        state.warn(format!(
            "stopped after {} sweeps without converging (last change {last:.3e})",
            config.max_outer
        ));
    }
    let report = DecomposeReport {
        ranks: state.model.ranks().clone(),
        compression_ratio: compression_ratio(&state.model, x),
        relative_error: state.reconstruction.relative_error(x)?,
        iterations: state.iteration,
        converged,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        re_trace: state.re_trace.clone(),
        change_trace: state.change_trace.clone(),
        warnings: state.warnings.clone(),
    };
    Ok((state.model, report))
}

/// Factor that brings the root-mean-square entry of `values` to `scale`;
/// 1 when `scale` is `None` or the values are all zero.
pub fn normalization_factor<'a>(values: impl IntoIterator<Item = &'a f64>, scale: Option<f64>) -> f64 {
    let Some(scale) = scale else { return 1.0 };
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v * v;
        count += 1;
    }
    let rms = (sum / count.max(1) as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        scale / rms
    } else {
        1.0
    }
}

/// Initializes from `x` and runs the solver. With `data_scale` set, the
/// solver works on a rescaled copy of `x` and the returned model is scaled
/// back, so it approximates `x` itself.
pub fn decompose(x: &DenseTensor, config: &SolverConfig) -> Result<(SvdInsTnModel, DecomposeReport)> {
    decompose_with_init(x, config, true)
}

/// As [`decompose`]; `shrink_init = false` starts every edge at the upper
/// bound `min(I_t, I_l)` instead of the shrunk slice spectra.
pub fn decompose_with_init(
    x: &DenseTensor,
    config: &SolverConfig,
    shrink_init: bool,
) -> Result<(SvdInsTnModel, DecomposeReport)> {
    config.validate()?;
    if x.order() < 2 {
        return Err(invalid!("tensor order must be at least 2, got {}", x.order()));
    }
    let start = Instant::now();
    let factor = normalization_factor(x.data(), config.data_scale);
    let target = if factor == 1.0 { x.clone() } else { x.scaled(factor) };
    let model = initial_model(&target, config.gamma, config.epsilon, shrink_init)?;
    let (model, mut report) = decompose_from(&target, model, config)?;
    let model = if factor == 1.0 { model } else { model.scaled(1.0 / factor) };
    report.relative_error = evaluate(&model).relative_error(x)?;
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((model, report))
}
