use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::coherence::{sequence_delta_l1, sequence_objective, RegTarget};
use crate::bitstream::ResidualMode;
use crate::error::{Error, Result};
use crate::hyponet::{backprop_modulation, clip_gradients, modulate_all, BaseParams, HypoNetConfig, UniqueParams};
use crate::kernels::Tensor3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// Independent fitting iterations per clip.
    pub iterations: usize,
    /// Joint iterations with the temporal penalty, after independent fitting.
    pub finetune_iterations: usize,
    pub adam: AdamConfig,
    /// Optimizer of the joint stage, restarted from zero moments.
    pub finetune_adam: AdamConfig,
    pub lambda_temp: f64,
    pub reg_target: RegTarget,
    pub residual_mode: ResidualMode,
    /// `None` means no keyframes after clip 0.
    pub keyframe_interval: Option<u32>,
    /// Start clip `i > 0` from clip `i - 1`'s solution instead of identity tokens.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            finetune_iterations: 500,
            adam: AdamConfig::with_learning_rate(1e-2),
            finetune_adam: AdamConfig::with_learning_rate(1e-3),
            lambda_temp: 0.1,
            reg_target: RegTarget::Modulated,
            residual_mode: ResidualMode::Previous,
            keyframe_interval: None,
            warm_start: true,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.lambda_temp >= 0.0 && self.lambda_temp.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda_temp)));
        }
        if self.keyframe_interval == Some(0) {
            return Err(Error::Config("keyframe interval must be positive".into()));
        }
        self.adam.validate()?;
        self.finetune_adam.validate()
    }
}

/// Outcome of fitting one clip or a sequence of clips at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub unique: Vec<UniqueParams<f32>>,
    /// Objective before every step of the last optimization stage.
    pub loss_trace: Vec<f64>,
    /// Objective after the last step.
    pub final_objective: f64,
    /// Per-clip MSE after fitting.
    pub clip_mse: Vec<f64>,
    pub final_mse: f64,
    /// Raw `sum |theta_i - theta_{i+1}|_1` on the regularization target.
    pub delta_l1: f64,
    /// Same quantity before the joint stage (equal to `delta_l1` if it was skipped).
    pub stage1_delta_l1: f64,
    /// Independent-stage traces, one per clip.
    pub stage1_traces: Vec<Vec<f64>>,
}

fn check_loss(loss: f64, what: &str, it: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{what} loss became {loss} at iteration {it}")))
    }
}

fn clip_mse(config: &HypoNetConfig, base: &BaseParams<f32>, unique: &UniqueParams<f32>, target: &[Tensor3<f32>]) -> Result<f64> {
    let m = modulate_all(config, base, unique)?;
    Ok(f64::from(clip_gradients(config, &m, target)?.0))
}

/// Fits one clip's tokens by Adam on reconstruction MSE, base frozen.
pub fn fit_unique(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    init: &UniqueParams<f32>,
    target: &[Tensor3<f32>],
    enc: &EncoderConfig,
) -> Result<FitResult> {
    enc.validate()?;
    base.check_shape(config)?;
    init.check_shape(config)?;
    let (unique, trace) = fit_clip(config, base, init, target, enc.iterations, &enc.adam)?;
    let mse = clip_mse(config, base, &unique, target)?;
    Ok(FitResult {
        unique: vec![unique],
        loss_trace: trace.clone(),
        final_objective: mse,
        clip_mse: vec![mse],
        final_mse: mse,
        delta_l1: 0.0,
        stage1_delta_l1: 0.0,
        stage1_traces: vec![trace],
    })
}

fn fit_clip(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    init: &UniqueParams<f32>,
    target: &[Tensor3<f32>],
    iterations: usize,
    adam: &AdamConfig,
) -> Result<(UniqueParams<f32>, Vec<f64>)> {
    let mut unique = init.clone();
    let mut flat = unique.to_flat();
    let mut state = AdamState::new(flat.len());
    let mut trace = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let m = modulate_all(config, base, &unique)?;
        let (loss, mg) = clip_gradients(config, &m, target)?;
        check_loss(f64::from(loss), "reconstruction", it)?;
        trace.push(f64::from(loss));
        let (du, _) = backprop_modulation(config, base, &unique, &mg)?;
        adam_step(&mut flat, &du.to_flat(), &mut state, adam)?;
        unique.copy_from_flat(&flat)?;
    }
    Ok((unique, trace))
}

/// Independent per-clip fits of every clip at one position.
pub fn fit_sequence_independent(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    clips: &[&[Tensor3<f32>]],
    enc: &EncoderConfig,
) -> Result<(Vec<UniqueParams<f32>>, Vec<Vec<f64>>)> {
    enc.validate()?;
    base.check_shape(config)?;
    if clips.is_empty() {
        return Err(Error::Config("cannot fit an empty clip sequence".into()));
    }
    let identity = UniqueParams::identity(config);
    let mut uniques: Vec<UniqueParams<f32>> = Vec::with_capacity(clips.len());
    let mut traces = Vec::with_capacity(clips.len());
    for clip in clips {
        let init = match uniques.last() {
            Some(prev) if enc.warm_start => prev,
            _ => &identity,
        };
        let (u, trace) = fit_clip(config, base, init, clip, enc.iterations, &enc.adam)?;
        uniques.push(u);
        traces.push(trace);
    }
    Ok((uniques, traces))
}

/// Joint finetuning of a fitted sequence on `sum MSE_i + lambda * L_temp`.
/// Returns the finetuned tokens and the objective before each step.
pub fn finetune_with_coherence(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    clips: &[&[Tensor3<f32>]],
    init: &[UniqueParams<f32>],
    enc: &EncoderConfig,
) -> Result<(Vec<UniqueParams<f32>>, Vec<f64>)> {
    enc.validate()?;
    let lambda = enc.lambda_temp as f32;
    let mut uniques = init.to_vec();
    let mut flats: Vec<Vec<f32>> = uniques.iter().map(UniqueParams::to_flat).collect();
    let mut states: Vec<AdamState<f32>> = flats.iter().map(|f| AdamState::new(f.len())).collect();
    let mut trace = Vec::with_capacity(enc.finetune_iterations);
    for it in 0..enc.finetune_iterations {
        let g = sequence_objective(config, base, &uniques, clips, lambda, enc.reg_target)?;
        check_loss(f64::from(g.objective), "finetune", it)?;
        trace.push(f64::from(g.objective));
        for ((u, flat), (state, du)) in uniques.iter_mut().zip(&mut flats).zip(states.iter_mut().zip(&g.unique)) {
            adam_step(flat, &du.to_flat(), state, &enc.finetune_adam)?;
            u.copy_from_flat(flat)?;
        }
    }
    Ok((uniques, trace))
}

/// Two-stage fit of all clips at one tubelet position: independent fits,
/// then joint finetuning with the temporal-coherence penalty.
pub fn fit_sequence_with_coherence(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    clips: &[&[Tensor3<f32>]],
    enc: &EncoderConfig,
) -> Result<FitResult> {
    let (stage1, traces) = fit_sequence_independent(config, base, clips, enc)?;
    finish_sequence(config, base, clips, stage1, traces, enc)
}

/// Runs the joint stage from given independent-stage results. Lets one
/// independent fit be shared by several `lambda` settings.
pub fn finish_sequence(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    clips: &[&[Tensor3<f32>]],
    stage1: Vec<UniqueParams<f32>>,
    stage1_traces: Vec<Vec<f64>>,
    enc: &EncoderConfig,
) -> Result<FitResult> {
    let stage1_delta_l1 = sequence_delta_l1(config, base, &stage1, enc.reg_target)?;
    let (unique, loss_trace) = if enc.finetune_iterations > 0 {
        finetune_with_coherence(config, base, clips, &stage1, enc)?
    } else {
        (stage1, Vec::new())
    };
    let end = sequence_objective(config, base, &unique, clips, enc.lambda_temp as f32, enc.reg_target)?;
    let final_objective = f64::from(end.objective);
    check_loss(final_objective, "finetune", enc.finetune_iterations)?;
    let clip_mse: Vec<f64> = end.mse.iter().map(|&m| f64::from(m)).collect();
    let final_mse = clip_mse.iter().sum::<f64>() / clip_mse.len() as f64;
    let delta_l1 = sequence_delta_l1(config, base, &unique, enc.reg_target)?;
    Ok(FitResult {
        unique,
        loss_trace,
        final_objective,
        clip_mse,
        final_mse,
        delta_l1,
        stage1_delta_l1,
        stage1_traces,
    })
}
