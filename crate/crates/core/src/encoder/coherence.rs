use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyponet::{backprop_modulation, clip_gradients, modulate_all, BaseParams, HypoNetConfig, UniqueParams};
use crate::kernels::{ConvLayerParams, Tensor3};
use crate::Real;

/// Which parameters the temporal penalty acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegTarget {
    /// Modulated weights of the modulated layers.
    #[default]
    Modulated,
    /// The unique tokens themselves.
    Unique,
    Both,
}

impl RegTarget {
    fn modulated(self) -> bool {
        matches!(self, RegTarget::Modulated | RegTarget::Both)
    }

    fn unique(self) -> bool {
        matches!(self, RegTarget::Unique | RegTarget::Both)
    }
}

impl fmt::Display for RegTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegTarget::Modulated => "modulated",
            RegTarget::Unique => "unique",
            RegTarget::Both => "both",
        })
    }
}

impl FromStr for RegTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "modulated" => Ok(RegTarget::Modulated),
            "unique" => Ok(RegTarget::Unique),
            "both" => Ok(RegTarget::Both),
            _ => Err(Error::Config(format!("unknown regularization target '{s}'"))),
        }
    }
}

#[inline]
fn sign<F: Real>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

/// `sum_i |x_i - x_{i+1}|_1` over consecutive vectors and its subgradient
/// `sign(x_i - x_{i+1}) + sign(x_i - x_{i-1})`, with `sign(0) = 0`.
pub fn temporal_l1<F: Real>(seq: &[&[F]]) -> Result<(F, Vec<Vec<F>>)> {
    let n = seq.first().map_or(0, |v| v.len());
    if seq.iter().any(|v| v.len() != n) {
        return Err(Error::Shape("temporal penalty over vectors of different lengths".into()));
    }
    let mut total = F::zero();
    let mut grads = vec![vec![F::zero(); n]; seq.len()];
    for i in 1..seq.len() {
        let (a, b) = (seq[i - 1], seq[i]);
        for j in 0..n {
            let d = a[j] - b[j];
            total += d.abs();
            let s = sign(d);
            grads[i - 1][j] += s;
            grads[i][j] -= s;
        }
    }
    Ok((total, grads))
}

fn modulated_flat<F: Real>(config: &HypoNetConfig, layers: &[ConvLayerParams<F>]) -> Vec<F> {
    config
        .modulated_layers()
        .flat_map(|l| layers[l].weight.iter().copied())
        .collect()
}

/// Raw `sum |theta_i - theta_{i+1}|_1` of a fitted sequence on `target`.
pub fn sequence_delta_l1(
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    uniques: &[UniqueParams<f32>],
    target: RegTarget,
) -> Result<f64> {
    let seq64: Vec<UniqueParams<f64>> = uniques.iter().map(|u| u.cast()).collect();
    let base64 = base.cast::<f64>();
    let mut total = 0.0;
    if target.modulated() {
        let flats = seq64
            .iter()
            .map(|u| modulate_all(config, &base64, u).map(|m| modulated_flat(config, &m)))
            .collect::<Result<Vec<_>>>()?;
        total += temporal_l1(&flats.iter().map(Vec::as_slice).collect::<Vec<_>>())?.0;
    }
    if target.unique() {
        let flats: Vec<Vec<f64>> = seq64.iter().map(UniqueParams::to_flat).collect();
        total += temporal_l1(&flats.iter().map(Vec::as_slice).collect::<Vec<_>>())?.0;
    }
    Ok(total)
}

/// Value and token gradients of the joint finetuning objective.
#[derive(Debug, Clone)]
pub struct SequenceGradients<F> {
    /// `sum_i mse_i + lambda * temporal`.
    pub objective: F,
    pub mse: Vec<F>,
    /// Size-normalized temporal penalty: each regularized vector's raw L1
    /// divided by its entry count.
    pub temporal: F,
    pub unique: Vec<UniqueParams<F>>,
}

/// `sum_i MSE_i + lambda * L_temp`, where `L_temp` is the mean absolute
/// difference between consecutive clips' regularized parameters, with exact
/// gradients with respect to every clip's tokens. The base is held fixed.
pub fn sequence_objective<F: Real>(
    config: &HypoNetConfig,
    base: &BaseParams<F>,
    uniques: &[UniqueParams<F>],
    targets: &[&[Tensor3<F>]],
    lambda: F,
    reg: RegTarget,
) -> Result<SequenceGradients<F>> {
    if uniques.len() != targets.len() || uniques.is_empty() {
        return Err(Error::Shape(format!(
            "{} token sets for {} target clips",
            uniques.len(),
            targets.len()
        )));
    }
    let per_clip = uniques
        .par_iter()
        .zip(targets.par_iter())
        .map(|(u, tgt)| {
            let m = modulate_all(config, base, u)?;
            let (mse, grads) = clip_gradients(config, &m, tgt)?;
            Ok((m, mse, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mse = Vec::with_capacity(per_clip.len());
    let mut layers = Vec::with_capacity(per_clip.len());
    let mut mgrads = Vec::with_capacity(per_clip.len());
    for (m, e, g) in per_clip {
        layers.push(m);
        mse.push(e);
        mgrads.push(g);
    }

    let mut temporal = F::zero();
    if reg.modulated() && uniques.len() > 1 {
        let flats: Vec<Vec<F>> = layers.iter().map(|m| modulated_flat(config, m)).collect();
        let count = F::lit(config.modulated_weight_count().max(1) as f64);
        let (l1, g) = temporal_l1(&flats.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
        temporal += l1 / count;
        let w = lambda / count;
        for (clip_grads, flat_g) in mgrads.iter_mut().zip(&g) {
            let mut at = 0;
            for l in config.modulated_layers() {
                for (a, &b) in clip_grads[l].weight.iter_mut().zip(&flat_g[at..]) {
                    *a += w * b;
                }
                at += clip_grads[l].weight.len();
            }
        }
    }
    let mut unique = uniques
        .par_iter()
        .zip(mgrads.par_iter())
        .map(|(u, g)| backprop_modulation(config, base, u, g).map(|(du, _)| du))
        .collect::<Result<Vec<_>>>()?;
    if reg.unique() && uniques.len() > 1 {
        let flats: Vec<Vec<F>> = uniques.iter().map(UniqueParams::to_flat).collect();
        let count = F::lit(config.unique_param_count().max(1) as f64);
        let (l1, g) = temporal_l1(&flats.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
        temporal += l1 / count;
        let w = lambda / count;
        for (du, flat_g) in unique.iter_mut().zip(&g) {
            let mut flat = du.to_flat();
            flat.iter_mut().zip(flat_g).for_each(|(a, &b)| *a += w * b);
            du.copy_from_flat(&flat)?;
        }
    }
    let objective = mse.iter().fold(F::zero(), |a, &b| a + b) + lambda * temporal;
    Ok(SequenceGradients {
        objective,
        mse,
        temporal,
        unique,
    })
}
