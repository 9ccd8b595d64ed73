use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::hyponet::{backprop_modulation, clip_gradients, modulate_all, BaseParams, HypoNetConfig, UniqueParams};
use crate::tubelet::Tubelet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    /// Full-corpus Adam steps.
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Seed of the base initialization.
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            adam: AdamConfig::with_learning_rate(1e-3),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainResult {
    pub base: BaseParams<f32>,
    /// Corpus-mean MSE before each epoch's step.
    pub loss_trace: Vec<f64>,
    /// Corpus-mean MSE after the last step.
    pub final_mse: f64,
}

fn check_corpus(corpus: &[Tubelet], config: &HypoNetConfig) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Config("pretraining corpus is empty".into()));
    }
    let (h, w) = (config.patch_height(), config.patch_width());
    for (i, t) in corpus.iter().enumerate() {
        if t.len() != config.clip_len || t.iter().any(|f| f.channels != 3 || f.height != h || f.width != w) {
            return Err(Error::Shape(format!(
                "corpus tubelet {i} is not {} frames of 3x{h}x{w}",
                config.clip_len
            )));
        }
    }
    Ok(())
}

/// Jointly fits the base and one free token set per corpus tubelet by Adam
/// on the corpus-mean MSE and returns the base.
pub fn pretrain_base(corpus: &[Tubelet], config: &HypoNetConfig, cfg: &PretrainConfig) -> Result<PretrainResult> {
    config.validate()?;
    cfg.adam.validate()?;
    check_corpus(corpus, config)?;
    let mut base = BaseParams::<f32>::init(config, cfg.seed)?;
    let mut base_flat = base.to_flat();
    let mut base_state = AdamState::new(base_flat.len());
    let mut uniques = vec![UniqueParams::<f32>::identity(config); corpus.len()];
    let mut unique_flats: Vec<Vec<f32>> = uniques.iter().map(UniqueParams::to_flat).collect();
    let mut unique_states: Vec<AdamState<f32>> = unique_flats.iter().map(|f| AdamState::new(f.len())).collect();
    let inv = 1.0 / corpus.len() as f32;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let per = uniques
            .par_iter()
            .zip(corpus.par_iter())
            .map(|(u, t)| {
                let m = modulate_all(config, &base, u)?;
                let (loss, mg) = clip_gradients(config, &m, t)?;
                let (du, db) = backprop_modulation(config, &base, u, &mg)?;
                Ok((loss, du, db))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut loss = 0.0f64;
        let mut base_grad = vec![0.0f32; base_flat.len()];
        for (i, (l, du, db)) in per.into_iter().enumerate() {
            loss += f64::from(l);
            let mut at = 0;
            for g in &db {
                for v in g.weight.iter().chain(&g.bias) {
                    base_grad[at] += v * inv;
                    at += 1;
                }
            }
            let g: Vec<f32> = du.to_flat().iter().map(|v| v * inv).collect();
            adam_step(&mut unique_flats[i], &g, &mut unique_states[i], &cfg.adam)?;
            uniques[i].copy_from_flat(&unique_flats[i])?;
        }
        let loss = loss / corpus.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("pretraining loss became {loss} at epoch {epoch}")));
        }
        trace.push(loss);
        adam_step(&mut base_flat, &base_grad, &mut base_state, &cfg.adam)?;
        base.copy_from_flat(&base_flat)?;
    }
    let final_mse = corpus
        .par_iter()
        .zip(uniques.par_iter())
        .map(|(t, u)| {
            let m = modulate_all(config, &base, u)?;
            Ok(f64::from(clip_gradients(config, &m, t)?.0))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / corpus.len() as f64;
    Ok(PretrainResult {
        base,
        loss_trace: trace,
        final_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Tensor3;

    fn gray_corpus(config: &HypoNetConfig, n: usize) -> Vec<Tubelet> {
        let f = Tensor3::filled(3, config.patch_height(), config.patch_width(), 0.4f32);
        vec![vec![f; config.clip_len]; n]
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let config = HypoNetConfig::micro();
        let cfg = PretrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let r = pretrain_base(&gray_corpus(&config, 2), &config, &cfg).unwrap();
        assert_eq!(r.base, BaseParams::init(&config, cfg.seed).unwrap());
        assert!(r.loss_trace.is_empty());
    }

    #[test]
    fn constant_gray_corpus_is_learned() {
        let config = HypoNetConfig::tiny();
        let cfg = PretrainConfig {
            epochs: 500,
            adam: AdamConfig::with_learning_rate(3e-3),
            seed: 1,
        };
        let r = pretrain_base(&gray_corpus(&config, 3), &config, &cfg).unwrap();
        assert!(r.final_mse < 1e-4, "{}", r.final_mse);
        assert!(r.final_mse <= r.loss_trace[0]);
        assert_eq!(r.loss_trace.len(), 500);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let config = HypoNetConfig::micro();
        let cfg = PretrainConfig {
            epochs: 15,
            ..Default::default()
        };
        let corpus = gray_corpus(&config, 3);
        let a = pretrain_base(&corpus, &config, &cfg).unwrap();
        let b = pretrain_base(&corpus, &config, &cfg).unwrap();
        assert_eq!(a.base, b.base);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn rejects_bad_corpus() {
        let config = HypoNetConfig::micro();
        let cfg = PretrainConfig::default();
        assert!(pretrain_base(&[], &config, &cfg).is_err());
        assert!(pretrain_base(&gray_corpus(&HypoNetConfig::tiny(), 1), &config, &cfg).is_err());
    }
}
