use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One NeRV block: convolution, pixel shuffle, then GELU (except the last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kernel: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    /// Number of unique token rows modulating this layer; 0 leaves it unmodulated.
    #[serde(default)]
    pub tokens: usize,
    #[serde(default)]
    pub token_dim: usize,
}

impl LayerSpec {
    pub const fn new(kernel: usize, stride_h: usize, stride_w: usize, tokens: usize, token_dim: usize) -> Self {
        Self {
            kernel,
            stride_h,
            stride_w,
            tokens,
            token_dim,
        }
    }

    #[inline]
    pub fn token_count(&self) -> usize {
        self.tokens * self.token_dim
    }

    #[inline]
    pub fn is_modulated(&self) -> bool {
        self.token_count() > 0
    }
}

/// Topology of the hyponetwork that renders one patch frame from a time index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypoNetConfig {
    pub pe_dim: usize,
    pub channel_width: usize,
    pub clip_len: usize,
    pub layers: Vec<LayerSpec>,
}

impl HypoNetConfig {
    /// 320x160 patches (width x height), four blocks, 65.2K base and 15.9K unique parameters.
    pub fn patch_320x160() -> Self {
        Self {
            pe_dim: 14,
            channel_width: 14,
            clip_len: 8,
            layers: vec![
                LayerSpec::new(1, 5, 5, 5, 196),
                LayerSpec::new(3, 4, 4, 56, 252),
                LayerSpec::new(3, 4, 4, 4, 196),
                LayerSpec::new(3, 2, 4, 0, 0),
            ],
        }
    }

    /// 320x240 patches.
    pub fn patch_320x240() -> Self {
        Self {
            pe_dim: 16,
            channel_width: 20,
            clip_len: 8,
            layers: vec![
                LayerSpec::new(1, 5, 5, 10, 200),
                LayerSpec::new(3, 4, 4, 80, 240),
                LayerSpec::new(3, 4, 4, 16, 240),
                LayerSpec::new(3, 3, 4, 0, 0),
            ],
        }
    }

    /// 384x270 patches.
    pub fn patch_384x270() -> Self {
        Self {
            pe_dim: 20,
            channel_width: 20,
            clip_len: 8,
            layers: vec![
                LayerSpec::new(1, 6, 6, 16, 180),
                LayerSpec::new(3, 5, 4, 100, 240),
                LayerSpec::new(3, 3, 4, 16, 180),
                LayerSpec::new(3, 3, 4, 0, 0),
            ],
        }
    }

    /// Desk-scale 32x32 configuration used by the synthetic benchmarks.
    pub fn tiny() -> Self {
        Self {
            pe_dim: 8,
            channel_width: 8,
            clip_len: 8,
            layers: vec![
                LayerSpec::new(1, 4, 4, 4, 32),
                LayerSpec::new(3, 2, 2, 16, 36),
                LayerSpec::new(3, 2, 2, 8, 36),
                LayerSpec::new(3, 2, 2, 0, 0),
            ],
        }
    }

    /// 8x8 patches, two-frame clips; small enough for exhaustive gradient checks.
    pub fn micro() -> Self {
        Self {
            pe_dim: 4,
            channel_width: 4,
            clip_len: 2,
            layers: vec![
                LayerSpec::new(1, 2, 2, 2, 8),
                LayerSpec::new(3, 2, 2, 4, 12),
                LayerSpec::new(3, 2, 2, 0, 0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("hyponetwork needs at least one layer".into()));
        }
        if self.pe_dim == 0 || self.pe_dim % 2 != 0 {
            return Err(Error::Config(format!("pe_dim must be even and > 0, got {}", self.pe_dim)));
        }
        if self.channel_width == 0 || self.clip_len == 0 {
            return Err(Error::Config("channel_width and clip_len must be positive".into()));
        }
        for (l, spec) in self.layers.iter().enumerate() {
            if spec.kernel != 1 && spec.kernel != 3 {
                return Err(Error::Config(format!("layer {l}: kernel {} not in {{1, 3}}", spec.kernel)));
            }
            if spec.stride_h == 0 || spec.stride_w == 0 {
                return Err(Error::Config(format!("layer {l}: strides must be positive")));
            }
            if (spec.tokens == 0) != (spec.token_dim == 0) {
                return Err(Error::Config(format!(
                    "layer {l}: token count and dim must both be zero or both positive"
                )));
            }
        }
        if self.layers.last().is_some_and(LayerSpec::is_modulated) {
            return Err(Error::Config("final layer must not be modulated".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn patch_height(&self) -> usize {
        self.layers.iter().map(|l| l.stride_h).product()
    }

    pub fn patch_width(&self) -> usize {
        self.layers.iter().map(|l| l.stride_w).product()
    }

    pub fn in_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            self.pe_dim
        } else {
            self.channel_width
        }
    }

    /// Channels after the layer's pixel shuffle.
    pub fn out_features(&self, layer: usize) -> usize {
        if layer + 1 == self.layers.len() {
            3
        } else {
            self.channel_width
        }
    }

    /// Channels produced by the layer's convolution, before the shuffle.
    pub fn conv_out_channels(&self, layer: usize) -> usize {
        let s = &self.layers[layer];
        self.out_features(layer) * s.stride_h * s.stride_w
    }

    pub fn weight_count(&self, layer: usize) -> usize {
        let k = self.layers[layer].kernel;
        self.conv_out_channels(layer) * self.in_channels(layer) * k * k
    }

    pub fn base_param_count(&self) -> usize {
        (0..self.num_layers())
            .map(|l| self.weight_count(l) + self.conv_out_channels(l))
            .sum()
    }

    pub fn unique_param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::token_count).sum()
    }

    /// Number of modulated weight entries, the domain of the coherence penalty.
    pub fn modulated_weight_count(&self) -> usize {
        (0..self.num_layers())
            .filter(|&l| self.layers[l].is_modulated())
            .map(|l| self.weight_count(l))
            .sum()
    }

    pub fn modulated_layers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_layers()).filter(|&l| self.layers[l].is_modulated())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patch_320x160_matches_published_counts() {
        let c = HypoNetConfig::patch_320x160();
        c.validate().unwrap();
        assert_eq!((c.patch_width(), c.patch_height()), (320, 160));
        assert_eq!(c.base_param_count(), 65_194);
        assert_eq!(c.unique_param_count(), 15_876);
    }

    #[test]
    fn larger_presets() {
        let c = HypoNetConfig::patch_320x240();
        c.validate().unwrap();
        assert_eq!((c.patch_width(), c.patch_height()), (320, 240));
        assert_eq!(c.unique_param_count(), 25_040);
        let c = HypoNetConfig::patch_384x270();
        c.validate().unwrap();
        assert_eq!((c.patch_width(), c.patch_height()), (384, 270));
        assert_eq!(c.unique_param_count(), 29_760);
    }

    #[test]
    fn desk_presets_validate() {
        for c in [HypoNetConfig::tiny(), HypoNetConfig::micro()] {
            c.validate().unwrap();
        }
        assert_eq!(HypoNetConfig::micro().patch_height(), 8);
        assert_eq!(HypoNetConfig::tiny().patch_width(), 32);
    }

    #[test]
    fn rejects_bad_layers() {
        let mut c = HypoNetConfig::micro();
        c.layers[2].tokens = 1;
        c.layers[2].token_dim = 1;
        assert!(c.validate().is_err());
        let mut c = HypoNetConfig::micro();
        c.layers[1].kernel = 5;
        assert!(c.validate().is_err());
        let mut c = HypoNetConfig::micro();
        c.pe_dim = 3;
        assert!(c.validate().is_err());
        let mut c = HypoNetConfig::micro();
        c.layers[0].token_dim = 0;
        assert!(c.validate().is_err());
    }
}
