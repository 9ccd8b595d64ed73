//! Rate-distortion sweeps over quantization bits, `lambda`, and residual mode.

use std::time::Instant;

use crate::bitstream::{compute_bpp, ResidualMode};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::hyponet::{BaseParams, HypoNetConfig};
use crate::metrics::{psnr, ssim};
use crate::pipeline::{decode_container, encode_fit, finish_video, fit_independent, CodingParams};
use crate::tubelet::{TubeletGrid, VideoBuffer};

pub const CSV_HEADER: &str = "bits,lambda,mode,psnr_db,ssim,bpp,encode_s,decode_s";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub bits: u8,
    pub lambda: f64,
    pub mode: ResidualMode,
    pub psnr_db: f64,
    pub ssim: f64,
    pub bpp: f64,
    pub encode_s: f64,
    pub decode_s: f64,
}

impl RdPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.6},{:.6},{:.3},{:.3}",
            self.bits, self.lambda, self.mode, self.psnr_db, self.ssim, self.bpp, self.encode_s, self.decode_s
        )
    }
}

pub fn to_csv(points: &[RdPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub bits: Vec<u8>,
    pub lambdas: Vec<f64>,
    pub modes: Vec<ResidualMode>,
}

/// One point per `bits x lambda x mode`, ordered lambda-major then bits then
/// mode. The independent fit is shared by every lambda and each lambda's
/// joint fit by every coding setting; `encode_s` charges each point its
/// share of fitting plus its own coding time.
pub fn rd_sweep(
    video: &VideoBuffer,
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    grid: &TubeletGrid,
    enc: &EncoderConfig,
    sweep: &SweepGrid,
    base_fingerprint: u32,
) -> Result<Vec<RdPoint>> {
    if sweep.bits.is_empty() || sweep.lambdas.is_empty() || sweep.modes.is_empty() {
        return Err(Error::Config("rd sweep needs at least one bits, lambda, and mode value".into()));
    }
    let t = Instant::now();
    let stage1 = fit_independent(video, config, base, grid, enc)?;
    let stage1_s = t.elapsed().as_secs_f64();
    let per_lambda = (sweep.bits.len() * sweep.modes.len()) as f64;
    let mut points = Vec::new();
    for &lambda in &sweep.lambdas {
        let enc = EncoderConfig {
            lambda_temp: lambda,
            ..enc.clone()
        };
        let t = Instant::now();
        let fit = finish_video(&stage1, video.frames(), config, base, grid, &enc)?;
        let fit_s = (stage1_s / sweep.lambdas.len() as f64 + t.elapsed().as_secs_f64()) / per_lambda;
        for &bits in &sweep.bits {
            for &mode in &sweep.modes {
                let t = Instant::now();
                let coding = CodingParams {
                    bits,
                    mode,
                    keyframe_interval: enc.keyframe_interval,
                    base_fingerprint,
                };
                let encoded = encode_fit(&fit, config, &coding)?;
                let encode_s = fit_s + t.elapsed().as_secs_f64();
                let t = Instant::now();
                let decoded = decode_container(&encoded.container, base)?;
                let decode_s = t.elapsed().as_secs_f64();
                points.push(RdPoint {
                    bits,
                    lambda,
                    mode,
                    psnr_db: psnr(video, &decoded)?,
                    ssim: ssim(video, &decoded)?,
                    bpp: compute_bpp(&encoded.layout, video.height(), video.width(), video.frames()),
                    encode_s,
                    decode_s,
                });
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let p = RdPoint {
            bits: 4,
            lambda: 0.1,
            mode: ResidualMode::Previous,
            psnr_db: 30.0,
            ssim: 0.9,
            bpp: 0.25,
            encode_s: 1.0,
            decode_s: 0.5,
        };
        let csv = to_csv(&[p, p]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "4,0.1,previous,30.0000,0.900000,0.250000,1.000,0.500");
    }
}
