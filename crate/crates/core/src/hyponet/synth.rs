use super::params::{expand_unique, fold_expanded, modulate_backward};
use super::{BaseParams, HypoNetConfig, ParamSet, TokenMatrix, UniqueParams};
use crate::error::{Error, Result};
use crate::kernels::{
    conv2d_backward, conv2d_forward, gelu_backward, gelu_inplace, pixel_shuffle, pixel_shuffle_backward,
    time_positional_encoding, ConvLayerParams, Tensor3,
};
use crate::Real;

/// Weight and bias gradient of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<F> {
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

/// Loss value plus gradients with respect to the unique tokens and the base.
#[derive(Debug, Clone)]
pub struct HypoGradients<F> {
    pub loss: F,
    pub unique: UniqueParams<F>,
    pub base: Vec<LayerGrad<F>>,
}

struct FrameTrace<F> {
    /// Input of each layer's convolution.
    inputs: Vec<Tensor3<F>>,
    /// Post-shuffle pre-activation of each hidden layer.
    preacts: Vec<Tensor3<F>>,
}

fn check_layers<F: Real>(config: &HypoNetConfig, modulated: &[ConvLayerParams<F>]) -> Result<()> {
    if modulated.len() != config.num_layers() {
        return Err(Error::Shape(format!(
            "{} parameter layers for a {}-layer config",
            modulated.len(),
            config.num_layers()
        )));
    }
    for (l, p) in modulated.iter().enumerate() {
        if p.in_ch != config.in_channels(l) || p.out_ch != config.conv_out_channels(l) {
            return Err(Error::Shape(format!("layer {l} parameters do not match config")));
        }
    }
    Ok(())
}

fn forward<F: Real>(
    config: &HypoNetConfig,
    modulated: &[ConvLayerParams<F>],
    frame_index: usize,
    mut trace: Option<&mut FrameTrace<F>>,
) -> Result<Tensor3<F>> {
    let mut x = time_positional_encoding::<F>(frame_index, config.clip_len, config.pe_dim)?;
    let last = config.num_layers() - 1;
    for (l, spec) in config.layers.iter().enumerate() {
        let z = conv2d_forward(&x, &modulated[l])?;
        let mut u = pixel_shuffle(&z, spec.stride_h, spec.stride_w)?;
        if l == last {
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(x);
            }
            return Ok(u);
        }
        let next = if let Some(t) = trace.as_deref_mut() {
            let mut a = u.clone();
            gelu_inplace(&mut a.data);
            t.inputs.push(x);
            t.preacts.push(u);
            a
        } else {
            gelu_inplace(&mut u.data);
            u
        };
        x = next;
    }
    unreachable!("config validated to have at least one layer")
}

/// Renders one `3 x H_p x W_p` patch frame. No clamping is applied.
pub fn synthesize_frame<F: Real>(
    config: &HypoNetConfig,
    modulated: &[ConvLayerParams<F>],
    frame_index: usize,
) -> Result<Tensor3<F>> {
    config.validate()?;
    check_layers(config, modulated)?;
    forward(config, modulated, frame_index, None)
}

/// Renders every frame of a clip with one shared weight set.
pub fn synthesize_clip<F: Real>(config: &HypoNetConfig, modulated: &[ConvLayerParams<F>]) -> Result<Vec<Tensor3<F>>> {
    config.validate()?;
    check_layers(config, modulated)?;
    (0..config.clip_len)
        .map(|t| forward(config, modulated, t, None))
        .collect()
}

/// Mean squared error of the synthesized clip against `target`, and its
/// gradient with respect to each layer's (modulated) weights and biases.
pub fn clip_gradients<F: Real>(
    config: &HypoNetConfig,
    modulated: &[ConvLayerParams<F>],
    target: &[Tensor3<F>],
) -> Result<(F, Vec<LayerGrad<F>>)> {
    config.validate()?;
    check_layers(config, modulated)?;
    let (ph, pw) = (config.patch_height(), config.patch_width());
    if target.len() != config.clip_len || target.iter().any(|f| f.channels != 3 || f.height != ph || f.width != pw) {
        return Err(Error::Shape(format!(
            "target clip must be {} frames of 3x{ph}x{pw}",
            config.clip_len
        )));
    }
    let count = F::lit((config.clip_len * 3 * ph * pw) as f64);
    let mut grads: Vec<LayerGrad<F>> = modulated
        .iter()
        .map(|p| LayerGrad {
            weight: vec![F::zero(); p.weight.len()],
            bias: vec![F::zero(); p.bias.len()],
        })
        .collect();
    let mut sse = F::zero();
    let two = F::lit(2.0);

    for (t, tgt) in target.iter().enumerate() {
        let mut trace = FrameTrace {
            inputs: Vec::with_capacity(config.num_layers()),
            preacts: Vec::with_capacity(config.num_layers()),
        };
        let out = forward(config, modulated, t, Some(&mut trace))?;
        let mut g = out;
        for (o, &y) in g.data.iter_mut().zip(&tgt.data) {
            let d = *o - y;
            sse += d * d;
            *o = two * d / count;
        }
        for l in (0..config.num_layers()).rev() {
            let spec = &config.layers[l];
            if l < trace.preacts.len() {
                gelu_backward(&trace.preacts[l].data, &mut g.data);
            }
            let gz = pixel_shuffle_backward(&g, spec.stride_h, spec.stride_w)?;
            let cg = conv2d_backward(&trace.inputs[l], &modulated[l], &gz)?;
            for (a, b) in grads[l].weight.iter_mut().zip(&cg.weight) {
                *a += *b;
            }
            for (a, b) in grads[l].bias.iter_mut().zip(&cg.bias) {
                *a += *b;
            }
            g = cg.input;
        }
    }
    Ok((sse / count, grads))
}

/// Maps gradients on the modulated weights to gradients on the tokens and
/// on the base parameters.
pub fn backprop_modulation<F: Real>(
    config: &HypoNetConfig,
    base: &BaseParams<F>,
    unique: &UniqueParams<F>,
    modulated_grads: &[LayerGrad<F>],
) -> Result<(UniqueParams<F>, Vec<LayerGrad<F>>)> {
    let mut d_unique = unique.zeros_like();
    let mut d_base = Vec::with_capacity(config.num_layers());
    for (l, g) in modulated_grads.iter().enumerate() {
        let b = &base.layers[l];
        let tokens: &TokenMatrix<F> = &unique.layers[l];
        if tokens.is_empty() {
            d_base.push(g.clone());
            continue;
        }
        let e = expand_unique(tokens, b.weight.len())?;
        let mg = modulate_backward(&b.weight, &e, &g.weight);
        d_unique.layers[l].data = fold_expanded(&mg.expanded, tokens.data.len());
        d_base.push(LayerGrad {
            weight: mg.base_weight,
            bias: g.bias.clone(),
        });
    }
    Ok((d_unique, d_base))
}

/// Reconstruction loss and exact gradients through synthesis and modulation.
pub fn hyponet_gradients<F: Real>(
    config: &HypoNetConfig,
    params: &ParamSet<F>,
    target: &[Tensor3<F>],
) -> Result<HypoGradients<F>> {
    let (loss, mg) = clip_gradients(config, params.modulated(), target)?;
    let (unique, base) = backprop_modulation(config, params.base(), params.unique(), &mg)?;
    Ok(HypoGradients { loss, unique, base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unique(cfg: &HypoNetConfig, seed: u64) -> UniqueParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = UniqueParams::identity(cfg);
        for t in &mut u.layers {
            t.data.iter_mut().for_each(|v| *v = rng.gen_range(0.5..1.5));
        }
        u
    }

    fn random_clip(cfg: &HypoNetConfig, seed: u64) -> Vec<Tensor3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (cfg.patch_height(), cfg.patch_width());
        (0..cfg.clip_len)
            .map(|_| Tensor3::from_vec(3, h, w, (0..3 * h * w).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap())
            .collect()
    }

    #[test]
    fn patch_320x160_output_shape() {
        let cfg = HypoNetConfig::patch_320x160();
        let base = BaseParams::<f32>::init(&cfg, 0).unwrap();
        let out = synthesize_frame(&cfg, &base.layers, 0).unwrap();
        assert_eq!((out.channels, out.height, out.width), (3, 160, 320));
    }

    #[test]
    fn zero_weights_give_bias_gray() {
        let cfg = HypoNetConfig::micro();
        let mut base = BaseParams::<f32>::init(&cfg, 0).unwrap();
        for p in &mut base.layers {
            p.weight.fill(0.0);
            p.bias.fill(0.0);
        }
        base.layers.last_mut().unwrap().bias.fill(0.5);
        let out = synthesize_frame(&cfg, &base.layers, 1).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn frames_depend_on_time() {
        let mut cfg = HypoNetConfig::tiny();
        cfg.clip_len = 8;
        let base = BaseParams::<f32>::init(&cfg, 5).unwrap();
        let a = synthesize_frame(&cfg, &base.layers, 0).unwrap();
        let b = synthesize_frame(&cfg, &base.layers, 4).unwrap();
        assert_ne!(a, b);
        let clip = synthesize_clip(&cfg, &base.layers).unwrap();
        assert_eq!(clip.len(), 8);
        assert_eq!(clip.iter().map(|f| f.data.len()).sum::<usize>(), 8 * 3 * 32 * 32);
        assert_eq!(clip[0], a);
        assert_eq!(clip[4], b);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = HypoNetConfig::tiny();
        let base = BaseParams::<f32>::init(&cfg, 5).unwrap();
        let a = synthesize_frame(&cfg, &base.layers, 3).unwrap();
        let b = synthesize_frame(&cfg, &base.layers, 3).unwrap();
        assert_eq!(a.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn shape_theorem_for_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let n = rng.gen_range(1..=4);
            let layers = (0..n)
                .map(|l| {
                    let mod_ = l + 1 < n && rng.gen_bool(0.5);
                    super::super::LayerSpec::new(
                        if l == 0 { 1 } else { 3 },
                        rng.gen_range(1..=3),
                        rng.gen_range(1..=3),
                        if mod_ { 2 } else { 0 },
                        if mod_ { 3 } else { 0 },
                    )
                })
                .collect();
            let cfg = HypoNetConfig {
                pe_dim: 2 * rng.gen_range(1..=3),
                channel_width: rng.gen_range(1..=4),
                clip_len: 3,
                layers,
            };
            let base = BaseParams::<f32>::init(&cfg, 1).unwrap();
            let out = synthesize_frame(&cfg, &base.layers, 2).unwrap();
            assert_eq!((out.channels, out.height, out.width), (3, cfg.patch_height(), cfg.patch_width()));
        }
    }

    #[test]
    fn mismatched_params_rejected() {
        let cfg = HypoNetConfig::micro();
        let base = BaseParams::<f32>::init(&cfg, 0).unwrap();
        assert!(synthesize_frame(&cfg, &base.layers[..2], 0).is_err());
        assert!(synthesize_frame(&cfg, &base.layers, 2).is_err());
        let bad_target = vec![Tensor3::zeros(3, 4, 4); 2];
        assert!(matches!(clip_gradients(&cfg, &base.layers, &bad_target), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        let cfg = HypoNetConfig::micro();
        let base = BaseParams::<f64>::init(&cfg, 2).unwrap();
        let ps = ParamSet::new(&cfg, base, random_unique(&cfg, 3)).unwrap();
        let target = synthesize_clip(&cfg, ps.modulated()).unwrap();
        let g = hyponet_gradients(&cfg, &ps, &target).unwrap();
        assert_eq!(g.loss, 0.0);
        let norm: f64 = g.unique.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6);
        assert!(g.unique.layers[2].data.is_empty());
    }

    /// Analytic gradients computed in `F` against central differences of the
    /// loss evaluated in `f64`.
    fn check_token_gradients<F: Real>(seed: u64, tol: f64) {
        let cfg = HypoNetConfig::micro();
        let base64 = BaseParams::<f64>::init(&cfg, seed).unwrap();
        let unique64 = random_unique(&cfg, seed + 1);
        let target64 = random_clip(&cfg, seed + 2);
        let ps = ParamSet::new(&cfg, base64.cast::<F>(), unique64.cast::<F>()).unwrap();
        let target: Vec<Tensor3<F>> = target64.iter().map(Tensor3::cast).collect();
        let g = hyponet_gradients(&cfg, &ps, &target).unwrap();
        let flat = unique64.to_flat();
        let grad = g.unique.to_flat();
        let loss_at = |v: &[f64]| -> f64 {
            let u = UniqueParams::from_flat(&cfg, v).unwrap();
            let ps = ParamSet::new(&cfg, base64.clone(), u).unwrap();
            clip_gradients(&cfg, ps.modulated(), &target64).unwrap().0
        };
        let h = 1e-6;
        for j in 0..flat.len() {
            let (mut p, mut m) = (flat.clone(), flat.clone());
            p[j] += h;
            m[j] -= h;
            let fd = (loss_at(&p) - loss_at(&m)) / (2.0 * h);
            let a = grad[j].as_f64();
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            assert!(rel < tol, "token {j}: analytic {a} vs fd {fd} (rel {rel})");
        }
    }

    #[test]
    fn token_gradients_match_finite_differences_f64() {
        for seed in 0..3 {
            check_token_gradients::<f64>(seed * 10, 1e-5);
        }
    }

    #[test]
    fn token_gradients_match_finite_differences_f32() {
        for seed in 0..3 {
            check_token_gradients::<f32>(40 + seed, 1e-3);
        }
    }

    #[test]
    fn base_gradients_match_finite_differences() {
        let cfg = HypoNetConfig::micro();
        let base = BaseParams::<f64>::init(&cfg, 9).unwrap();
        let unique = random_unique(&cfg, 10);
        let target = random_clip(&cfg, 11);
        let ps = ParamSet::new(&cfg, base.clone(), unique.clone()).unwrap();
        let g = hyponet_gradients(&cfg, &ps, &target).unwrap();
        let flat = base.to_flat();
        let grad: Vec<f64> = g.base.iter().flat_map(|lg| lg.weight.iter().chain(&lg.bias).copied()).collect();
        let h = 1e-6;
        for j in (0..flat.len()).step_by(7) {
            let eval = |d: f64| {
                let mut v = flat.clone();
                v[j] += d;
                let mut b = base.clone();
                b.copy_from_flat(&v).unwrap();
                let ps = ParamSet::new(&cfg, b, unique.clone()).unwrap();
                clip_gradients(&cfg, ps.modulated(), &target).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-5, "base {j}: {} vs {fd}", grad[j]);
        }
    }
}
