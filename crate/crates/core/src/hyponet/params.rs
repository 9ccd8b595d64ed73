use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HypoNetConfig;
use crate::error::{Error, Result};
use crate::kernels::ConvLayerParams;
use crate::Real;

/// `rows x cols` token matrix stored row-major. Empty for unmodulated layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> TokenMatrix<F> {
    pub fn filled(rows: usize, cols: usize, value: F) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Clip-specific unique parameters: one token matrix per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct UniqueParams<F> {
    pub layers: Vec<TokenMatrix<F>>,
}

impl<F: Real> UniqueParams<F> {
    /// All-ones tokens, which leave the base weights untouched.
    pub fn identity(config: &HypoNetConfig) -> Self {
        Self::filled(config, F::one())
    }

    pub fn filled(config: &HypoNetConfig, value: F) -> Self {
        Self {
            layers: config
                .layers
                .iter()
                .map(|s| TokenMatrix::filled(s.tokens, s.token_dim, value))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|t| TokenMatrix::filled(t.rows, t.cols, F::zero()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenation of every layer's tokens in layer order.
    pub fn to_flat(&self) -> Vec<F> {
        self.layers.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Overwrites all tokens from a flat slice laid out like [`to_flat`](Self::to_flat).
    pub fn copy_from_flat(&mut self, flat: &[F]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::Shape(format!(
                "flat token vector has {} entries, expected {}",
                flat.len(),
                self.len()
            )));
        }
        let mut at = 0;
        for t in &mut self.layers {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn from_flat(config: &HypoNetConfig, flat: &[F]) -> Result<Self> {
        let mut u = Self::filled(config, F::zero());
        u.copy_from_flat(flat)?;
        Ok(u)
    }

    pub fn check_shape(&self, config: &HypoNetConfig) -> Result<()> {
        let ok = self.layers.len() == config.num_layers()
            && self
                .layers
                .iter()
                .zip(&config.layers)
                .all(|(t, s)| t.rows == s.tokens && t.cols == s.token_dim && t.data.len() == s.token_count());
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("unique tokens do not match hyponetwork config".into()))
        }
    }

    pub fn cast<G: Real>(&self) -> UniqueParams<G> {
        UniqueParams {
            layers: self
                .layers
                .iter()
                .map(|t| TokenMatrix {
                    rows: t.rows,
                    cols: t.cols,
                    data: t.data.iter().map(|&v| G::lit(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// Video-agnostic base parameters shared by every clip.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseParams<F> {
    pub layers: Vec<ConvLayerParams<F>>,
}

impl<F: Real> BaseParams<F> {
    /// Seeded initialization: weights uniform with variance `1 / fan_in`,
    /// zero biases, and a mid-gray bias on the output layer.
    pub fn init(config: &HypoNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(config.num_layers());
        for l in 0..config.num_layers() {
            let k = config.layers[l].kernel;
            let in_ch = config.in_channels(l);
            let mut p = ConvLayerParams::zeros(config.conv_out_channels(l), in_ch, k);
            let bound = (3.0 / (in_ch * k * k) as f64).sqrt();
            for w in &mut p.weight {
                *w = F::lit(rng.gen_range(-bound..bound));
            }
            if l + 1 == config.num_layers() {
                p.bias.fill(F::lit(0.5));
            }
            layers.push(p);
        }
        Ok(Self { layers })
    }

    pub fn check_shape(&self, config: &HypoNetConfig) -> Result<()> {
        if self.layers.len() != config.num_layers() {
            return Err(Error::Shape(format!(
                "base has {} layers, config has {}",
                self.layers.len(),
                config.num_layers()
            )));
        }
        for (l, p) in self.layers.iter().enumerate() {
            p.validate()?;
            if p.out_ch != config.conv_out_channels(l)
                || p.in_ch != config.in_channels(l)
                || p.kernel != config.layers[l].kernel
            {
                return Err(Error::Shape(format!("base layer {l} does not match config")));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|p| p.weight.len() + p.bias.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<F> {
        let mut v = Vec::with_capacity(self.param_count());
        for p in &self.layers {
            v.extend_from_slice(&p.weight);
            v.extend_from_slice(&p.bias);
        }
        v
    }

    pub fn copy_from_flat(&mut self, flat: &[F]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat base vector has {} entries, expected {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for p in &mut self.layers {
            let (nw, nb) = (p.weight.len(), p.bias.len());
            p.weight.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            p.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> BaseParams<G> {
        BaseParams {
            layers: self.layers.iter().map(ConvLayerParams::cast).collect(),
        }
    }
}

/// Flattens `tokens` row-major and tiles it cyclically to `target_count` entries.
pub fn expand_unique<F: Real>(tokens: &TokenMatrix<F>, target_count: usize) -> Result<Vec<F>> {
    if target_count == 0 {
        return Ok(Vec::new());
    }
    if tokens.data.is_empty() {
        return Err(Error::Shape(format!(
            "cannot expand an empty token matrix to {target_count} entries"
        )));
    }
    Ok(tokens.data.iter().copied().cycle().take(target_count).collect())
}

#[inline]
fn rms<F: Real>(v: &[F]) -> F {
    if v.is_empty() {
        return F::zero();
    }
    let ss: F = v.iter().map(|&x| x * x).sum();
    (ss / F::lit(v.len() as f64)).sqrt()
}

/// Elementwise product of the base weights with the expanded tokens,
/// rescaled so its RMS equals the base RMS. Biases pass through.
pub fn modulate<F: Real>(base_layer: &ConvLayerParams<F>, expanded: &[F]) -> Result<ConvLayerParams<F>> {
    modulate_layer(0, base_layer, expanded)
}

pub(crate) fn modulate_layer<F: Real>(
    layer: usize,
    base_layer: &ConvLayerParams<F>,
    expanded: &[F],
) -> Result<ConvLayerParams<F>> {
    if expanded.len() != base_layer.weight.len() {
        return Err(Error::Shape(format!(
            "layer {layer}: expanded tokens have {} entries, weight has {}",
            expanded.len(),
            base_layer.weight.len()
        )));
    }
    let mut weight: Vec<F> = base_layer.weight.iter().zip(expanded).map(|(&b, &e)| b * e).collect();
    let rms_base = rms(&base_layer.weight);
    if rms_base > F::zero() {
        let rms_mod = rms(&weight);
        if rms_mod == F::zero() || !rms_mod.is_finite() {
            return Err(Error::DegenerateModulation { layer });
        }
        let ratio = rms_base / rms_mod;
        for w in &mut weight {
            *w *= ratio;
        }
    }
    Ok(ConvLayerParams {
        out_ch: base_layer.out_ch,
        in_ch: base_layer.in_ch,
        kernel: base_layer.kernel,
        weight,
        bias: base_layer.bias.clone(),
    })
}

/// Gradients of the modulated weights flowing back through [`modulate`].
pub(crate) struct ModulationGrads<F> {
    pub expanded: Vec<F>,
    pub base_weight: Vec<F>,
}

/// Adjoint of the modulation: `W = kappa * m` with `m = b * e` and
/// `kappa = rms(b) / rms(m)`.
pub(crate) fn modulate_backward<F: Real>(base_w: &[F], expanded: &[F], grad_w: &[F]) -> ModulationGrads<F> {
    let n = F::lit(base_w.len() as f64);
    let m: Vec<F> = base_w.iter().zip(expanded).map(|(&b, &e)| b * e).collect();
    let sb: F = base_w.iter().map(|&b| b * b).sum();
    if sb == F::zero() {
        // W is identically zero for a zero base.
        return ModulationGrads {
            expanded: vec![F::zero(); base_w.len()],
            base_weight: grad_w.to_vec(),
        };
    }
    let sm: F = m.iter().map(|&x| x * x).sum();
    let kappa = (sb / sm).sqrt();
    let g_dot_m: F = grad_w.iter().zip(&m).map(|(&g, &x)| g * x).sum();
    // g . W = kappa * (g . m)
    let g_dot_w = kappa * g_dot_m;
    let proj = g_dot_m / sm;
    let rms_sq = sb / n;
    let mut d_exp = Vec::with_capacity(m.len());
    let mut d_base = Vec::with_capacity(m.len());
    for j in 0..m.len() {
        let dm = kappa * (grad_w[j] - m[j] * proj);
        d_exp.push(dm * base_w[j]);
        d_base.push(dm * expanded[j] + g_dot_w * base_w[j] / (n * rms_sq));
    }
    ModulationGrads {
        expanded: d_exp,
        base_weight: d_base,
    }
}

/// Folds gradients of the expanded vector back onto the cyclically tiled tokens.
pub(crate) fn fold_expanded<F: Real>(d_expanded: &[F], token_count: usize) -> Vec<F> {
    let mut out = vec![F::zero(); token_count];
    if token_count == 0 {
        return out;
    }
    for chunk in d_expanded.chunks(token_count) {
        for (o, &g) in out.iter_mut().zip(chunk) {
            *o += g;
        }
    }
    out
}

/// Computes the modulated weights for every layer. Unmodulated layers copy the base.
pub fn modulate_all<F: Real>(
    config: &HypoNetConfig,
    base: &BaseParams<F>,
    unique: &UniqueParams<F>,
) -> Result<Vec<ConvLayerParams<F>>> {
    base.check_shape(config)?;
    unique.check_shape(config)?;
    base.layers
        .iter()
        .zip(&unique.layers)
        .enumerate()
        .map(|(l, (b, t))| {
            if t.is_empty() {
                Ok(b.clone())
            } else {
                let e = expand_unique(t, b.weight.len())?;
                modulate_layer(l, b, &e)
            }
        })
        .collect()
}

/// Base, unique, and derived modulated parameters for one clip.
///
/// The modulated weights are recomputed whenever the tokens change.
#[derive(Debug, Clone)]
pub struct ParamSet<F> {
    base: BaseParams<F>,
    unique: UniqueParams<F>,
    modulated: Vec<ConvLayerParams<F>>,
}

impl<F: Real> ParamSet<F> {
    pub fn new(config: &HypoNetConfig, base: BaseParams<F>, unique: UniqueParams<F>) -> Result<Self> {
        let modulated = modulate_all(config, &base, &unique)?;
        Ok(Self {
            base,
            unique,
            modulated,
        })
    }

    pub fn base(&self) -> &BaseParams<F> {
        &self.base
    }

    pub fn unique(&self) -> &UniqueParams<F> {
        &self.unique
    }

    pub fn modulated(&self) -> &[ConvLayerParams<F>] {
        &self.modulated
    }

    pub fn set_unique(&mut self, config: &HypoNetConfig, unique: UniqueParams<F>) -> Result<()> {
        self.modulated = modulate_all(config, &self.base, &unique)?;
        self.unique = unique;
        Ok(())
    }

    pub fn into_parts(self) -> (BaseParams<F>, UniqueParams<F>) {
        (self.base, self.unique)
    }
}
