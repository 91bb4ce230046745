//! Jammer-learning machinery: loss functions, budget-respecting
//! reparameterization, a finite-difference gradient engine with common random
//! numbers, Adam, and the training loop.

use crate::fec::IterationOutputs;
use crate::grid::SoftBits;
use crate::jammer::PowerAllocation;
use crate::seeds;
use crate::sim::{Scenario, simulate_frame};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Loss between transmitted bits and soft estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    L1,
    Mse,
}

/// Probability clamp for the BCE logarithms.
const BCE_CLAMP: f64 = 1e-12;

/// Mean loss between bits and probability-domain estimates.
///
/// BCE = −(1/N)·Σ [b·log(b̂) + (1−b)·log(1−b̂)] with b̂ clamped to
/// [1e-12, 1−1e-12]; L1 = (1/N)·Σ |b−b̂|; MSE = (1/N)·Σ (b−b̂)².
pub fn loss(bits: &[u8], soft: &SoftBits, kind: LossKind) -> Result<f64> {
    if bits.is_empty() || bits.len() != soft.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} bits vs {} estimates",
            bits.len(),
            soft.len()
        )));
    }
    let n = bits.len() as f64;
    let total: f64 = bits
        .iter()
        .zip(&soft.values)
        .map(|(&b, &p)| match kind {
            LossKind::Bce => {
                let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                if b == 1 { -p.ln() } else { -(1.0 - p).ln() }
            }
            LossKind::L1 => (b as f64 - p).abs(),
            LossKind::Mse => (b as f64 - p) * (b as f64 - p),
        })
        .sum();
    Ok(total / n)
}

/// Unweighted mean of [`loss`] over every decoding iteration's output.
pub fn multi_loss(bits: &[u8], outs: &IterationOutputs, kind: LossKind) -> Result<f64> {
    if outs.iterations.is_empty() {
        return Err(Error::InvalidParameter("no decoder iterations to average".into()));
    }
    let mut total = 0.0;
    for it in &outs.iterations {
        total += loss(bits, it, kind)?;
    }
    Ok(total / outs.iterations.len() as f64)
}

/// Unconstrained trainable parameters, one per OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableParams {
    pub theta: Vec<f64>,
}

impl TrainableParams {
    pub fn zeros(n_symbols: usize) -> Self {
        TrainableParams { theta: vec![0.0; n_symbols] }
    }
}

/// Budget-saturating softmax reparameterization:
/// `rho = rho_max · N_s · softmax(theta)`, so `mean(rho) = rho_max` exactly.
///
/// A maximizing adversary spends its full budget, and near-zero per-symbol
/// allocations remain representable.
pub fn reparam_power(theta: &[f64], rho_max: f64) -> Result<PowerAllocation> {
    if theta.is_empty() {
        return Err(Error::InvalidParameter("empty parameter vector".into()));
    }
    let max = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let n = theta.len() as f64;
    let rho: Vec<f64> = exps.iter().map(|e| rho_max * n * e / sum).collect();
    PowerAllocation::new(rho, rho_max)
}

/// Adam optimizer state with the de-facto standard moment defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn with_lr(n_params: usize, lr: f64) -> Self {
        AdamState { lr, ..Self::new(n_params) }
    }
}

/// One Adam update with bias correction; `theta` moves against the gradient.
pub fn adam_step(state: &mut AdamState, theta: &mut [f64], grad: &[f64]) -> Result<()> {
    if theta.len() != grad.len() || theta.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            theta.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for i in 0..theta.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        theta[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Mean negative jammer loss over a batch of frames (the minimization
/// objective; the jammer maximizes the loss).
///
/// The scenario's jammer power allocation is replaced by the
/// reparameterization of `theta`. Frames use seeds derived from (`seed`,
/// frame index) only, so two evaluations with the same seed see identical
/// channels, bits, noise, and unit jammer symbols — the common-random-numbers
/// property the finite-difference gradient relies on.
pub fn eval_pipeline(
    theta: &[f64],
    scn: &Scenario,
    ebn0_db: f64,
    kind: LossKind,
    batch: usize,
    seed: u64,
) -> Result<f64> {
    if batch == 0 {
        return Err(Error::InvalidParameter("batch must be at least 1".into()));
    }
    let jam = scn
        .jammer
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("learning needs a jammer in the scenario".into()))?;
    if theta.len() != scn.grid.n_symbols() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters for {} OFDM symbols",
            theta.len(),
            scn.grid.n_symbols()
        )));
    }
    let pa = reparam_power(theta, jam.power.rho_max())?;
    let scn = scn.with_jammer_power(pa)?;
    let noise = scn.noise_for_ebn0(ebn0_db);
    let mut total = 0.0;
    for frame in 0..batch {
        let out = simulate_frame(&scn, &noise, seeds::derive(seed, &[frame as u64]))?;
        total += match (&out.info_bits, &out.decoder_iterations) {
            (Some(info), Some(iters)) => multi_loss(info, iters, kind)?,
            _ => loss(&out.tx_data_bits, &out.soft, kind)?,
        };
    }
    Ok(-(total / batch as f64))
}

/// Central-difference gradient `(f(θ+h·e_i) − f(θ−h·e_i)) / 2h` of an
/// arbitrary objective; coordinates evaluate in parallel.
pub fn central_difference<F>(f: F, theta: &[f64], fd_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if !(fd_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    (0..theta.len())
        .into_par_iter()
        .map(|i| {
            let mut plus = theta.to_vec();
            plus[i] += fd_step;
            let mut minus = theta.to_vec();
            minus[i] -= fd_step;
            Ok((f(&plus)? - f(&minus)?) / (2.0 * fd_step))
        })
        .collect()
}

/// [`central_difference`] of [`eval_pipeline`] with common random numbers:
/// every evaluation reuses the identical seed, so channel, bit, noise, and
/// jammer-symbol realizations cancel out of the differences.
pub fn grad_fd(
    theta: &[f64],
    scn: &Scenario,
    ebn0_db: f64,
    kind: LossKind,
    batch: usize,
    fd_step: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    central_difference(
        |t| eval_pipeline(t, scn, ebn0_db, kind, batch, seed),
        theta,
        fd_step,
    )
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub snr_db: f64,
    pub loss: LossKind,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 500,
            batch: 32,
            snr_db: 0.0,
            loss: LossKind::L1,
            fd_step: 1e-2,
            seed: 0,
        }
    }
}

/// Learned allocation plus the per-step objective trace.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub theta: Vec<f64>,
    pub power: PowerAllocation,
    /// Objective (mean negative loss) evaluated at the start of each step.
    pub history: Vec<f64>,
}

/// Gradient-descent training loop: evaluate, differentiate, Adam-update.
/// Every step draws fresh frame data through seeds derived from
/// (`config.seed`, step).
pub fn train(config: &TrainConfig, scn: &Scenario) -> Result<TrainResult> {
    if config.steps == 0 || config.batch == 0 {
        return Err(Error::InvalidParameter("steps and batch must be at least 1".into()));
    }
    scn.validate()?;
    let jam = scn
        .jammer
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("training needs a jammer in the scenario".into()))?;
    let n = scn.grid.n_symbols();
    let mut theta = TrainableParams::zeros(n).theta;
    let mut adam = AdamState::new(n);
    let mut history = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let step_seed = seeds::derive(config.seed, &[0x5445, step as u64]);
        history.push(eval_pipeline(
            &theta,
            scn,
            config.snr_db,
            config.loss,
            config.batch,
            step_seed,
        )?);
        let grad = grad_fd(
            &theta,
            scn,
            config.snr_db,
            config.loss,
            config.batch,
            config.fd_step,
            step_seed,
        )?;
        adam_step(&mut adam, &mut theta, &grad)?;
    }
    let power = reparam_power(&theta, jam.power.rho_max())?;
    Ok(TrainResult { theta, power, history })
}
