//! TOML codec settings: hyponetwork topology, grid, encoder, and pretraining.
//!
//! ```toml
//! preset = "tiny"            # or give [hyponet] explicitly
//!
//! [grid]
//! overlap = [0, 0]
//! fusion = "crop"
//!
//! [encoder]
//! iterations = 1000
//! lambda_temp = 0.1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, PretrainConfig};
use crate::error::{Error, Result};
use crate::hyponet::HypoNetConfig;
use crate::tubelet::{plan_grid, FusionMode, TubeletGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    /// `(overlap_h, overlap_w)` in pixels.
    pub overlap: (usize, usize),
    /// Defaults to tile when the patches tile the frame, crop otherwise.
    pub fusion: Option<FusionMode>,
}

impl GridSettings {
    pub fn plan(&self, height: usize, width: usize, hyponet: &HypoNetConfig) -> Result<TubeletGrid> {
        let grid = plan_grid(
            height,
            width,
            hyponet.patch_height(),
            hyponet.patch_width(),
            self.overlap.0,
            self.overlap.1,
        )?;
        match self.fusion {
            Some(f) => grid.with_fusion(f),
            None => Ok(grid),
        }
    }
}

pub fn preset(name: &str) -> Result<HypoNetConfig> {
    match name {
        "tiny" => Ok(HypoNetConfig::tiny()),
        "micro" => Ok(HypoNetConfig::micro()),
        "320x160" => Ok(HypoNetConfig::patch_320x160()),
        "320x240" => Ok(HypoNetConfig::patch_320x240()),
        "384x270" => Ok(HypoNetConfig::patch_384x270()),
        _ => Err(Error::Config(format!(
            "unknown preset '{name}' (tiny, micro, 320x160, 320x240, 384x270)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    hyponet: Option<HypoNetConfig>,
    grid: GridSettings,
    encoder: EncoderConfig,
    pretrain: PretrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub hyponet: HypoNetConfig,
    pub grid: GridSettings,
    pub encoder: EncoderConfig,
    pub pretrain: PretrainConfig,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            hyponet: HypoNetConfig::tiny(),
            grid: GridSettings::default(),
            encoder: EncoderConfig::default(),
            pretrain: PretrainConfig::default(),
        }
    }
}

impl CodecConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let hyponet = match (raw.hyponet, raw.preset) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `preset` or `[hyponet]`, not both".into())),
            (Some(h), None) => h,
            (None, Some(p)) => preset(&p)?,
            (None, None) => HypoNetConfig::tiny(),
        };
        hyponet.validate()?;
        raw.encoder.validate()?;
        Ok(Self {
            hyponet,
            grid: raw.grid,
            encoder: raw.encoder,
            pretrain: raw.pretrain,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        let raw = RawConfig {
            preset: None,
            hyponet: Some(self.hyponet.clone()),
            grid: self.grid,
            encoder: self.encoder.clone(),
            pretrain: self.pretrain.clone(),
        };
        toml::to_string(&raw).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_presets() {
        let c = CodecConfig::from_toml("").unwrap();
        assert_eq!(c, CodecConfig::default());
        let c = CodecConfig::from_toml("preset = \"320x160\"\n[grid]\noverlap = [5, 0]\nfusion = \"blend\"").unwrap();
        assert_eq!(c.hyponet, HypoNetConfig::patch_320x160());
        let grid = c.grid.plan(720, 1280, &c.hyponet).unwrap();
        assert_eq!((grid.len(), grid.fusion), (20, FusionMode::Blend));
    }

    #[test]
    fn round_trip_through_toml() {
        let mut c = CodecConfig::default();
        c.encoder.lambda_temp = 0.3;
        c.encoder.keyframe_interval = Some(4);
        c.grid.overlap = (2, 4);
        c.hyponet = HypoNetConfig::micro();
        assert_eq!(CodecConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(CodecConfig::from_toml("preset = \"huge\"").is_err());
        assert!(CodecConfig::from_toml("colour = 3").is_err());
        assert!(CodecConfig::from_toml("[encoder]\nlambda_temp = -1.0").is_err());
        let both = format!("preset = \"tiny\"\n{}", CodecConfig::default().to_toml().unwrap());
        assert!(CodecConfig::from_toml(&both).is_err());
    }
}
