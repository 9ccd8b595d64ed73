//! Whole-video encode and decode built from the fitting, coding, and fusion
//! stages.

use rayon::prelude::*;

use crate::bitstream::{
    decode_stream, encode_stream, read_container_with_layout, write_container_with_layout, CodedContainer,
    ContainerHeader, ContainerLayout, GridParams, ResidualMode,
};
use crate::encoder::{finish_sequence, fit_sequence_independent, EncoderConfig, FitResult};
use crate::error::{Error, Result};
use crate::hyponet::{modulate_all, synthesize_clip, BaseParams, HypoNetConfig, UniqueParams};
use crate::tubelet::{extract_tubelet, reassemble_video, ClipView, Tubelet, TubeletGrid, VideoBuffer};

/// Tubelets of a video, `[position][clip]`, after padding the last clip.
pub fn video_tubelets(video: &VideoBuffer, config: &HypoNetConfig, grid: &TubeletGrid) -> Result<Vec<Vec<Tubelet>>> {
    check_grid(video, config, grid)?;
    let n = config.clip_len;
    let padded = video.padded_to_clip_multiple(n);
    let clips = padded.clip_count(n);
    grid.origins()
        .into_iter()
        .map(|origin| {
            (0..clips)
                .map(|c| extract_tubelet(&ClipView::new(&padded, c * n, n)?, grid, origin))
                .collect()
        })
        .collect()
}

fn check_grid(video: &VideoBuffer, config: &HypoNetConfig, grid: &TubeletGrid) -> Result<()> {
    config.validate()?;
    if grid.height != video.height() || grid.width != video.width() {
        return Err(Error::Shape(format!(
            "grid planned for {}x{}, video is {}x{}",
            grid.height,
            grid.width,
            video.height(),
            video.width()
        )));
    }
    if grid.patch_h != config.patch_height() || grid.patch_w != config.patch_width() {
        return Err(Error::Shape(format!(
            "grid patch {}x{} but the hyponetwork renders {}x{}",
            grid.patch_h,
            grid.patch_w,
            config.patch_height(),
            config.patch_width()
        )));
    }
    Ok(())
}

/// Independent-stage fit of every position, reusable across `lambda` values.
#[derive(Debug, Clone)]
pub struct IndependentFit {
    pub tubelets: Vec<Vec<Tubelet>>,
    pub unique: Vec<Vec<UniqueParams<f32>>>,
    pub traces: Vec<Vec<Vec<f64>>>,
}

/// Fitted tokens of a whole video.
#[derive(Debug, Clone)]
pub struct VideoFit {
    pub frames: usize,
    pub grid: TubeletGrid,
    /// One result per grid position, in position order.
    pub positions: Vec<FitResult>,
}

impl VideoFit {
    pub fn unique(&self) -> Vec<Vec<UniqueParams<f32>>> {
        self.positions.iter().map(|p| p.unique.clone()).collect()
    }

    /// Sum over positions of the raw consecutive-clip L1 distance.
    pub fn delta_l1(&self) -> f64 {
        self.positions.iter().map(|p| p.delta_l1).sum()
    }

    pub fn mean_mse(&self) -> f64 {
        self.positions.iter().map(|p| p.final_mse).sum::<f64>() / self.positions.len() as f64
    }
}

fn refs(clips: &[Tubelet]) -> Vec<&[crate::kernels::Tensor3<f32>]> {
    clips.iter().map(Vec::as_slice).collect()
}

pub fn fit_independent(
    video: &VideoBuffer,
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    grid: &TubeletGrid,
    enc: &EncoderConfig,
) -> Result<IndependentFit> {
    let tubelets = video_tubelets(video, config, grid)?;
    let fits = tubelets
        .par_iter()
        .map(|clips| fit_sequence_independent(config, base, &refs(clips), enc))
        .collect::<Result<Vec<_>>>()?;
    let (unique, traces) = fits.into_iter().unzip();
    Ok(IndependentFit {
        tubelets,
        unique,
        traces,
    })
}

/// Joint stage for every position, starting from a shared independent fit.
pub fn finish_video(
    stage1: &IndependentFit,
    frames: usize,
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    grid: &TubeletGrid,
    enc: &EncoderConfig,
) -> Result<VideoFit> {
    let positions = stage1
        .tubelets
        .par_iter()
        .zip(stage1.unique.par_iter().zip(stage1.traces.par_iter()))
        .map(|(clips, (u, t))| finish_sequence(config, base, &refs(clips), u.clone(), t.clone(), enc))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoFit {
        frames,
        grid: grid.clone(),
        positions,
    })
}

/// Two-stage fit of every tubelet position of `video`.
pub fn fit_video(
    video: &VideoBuffer,
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    grid: &TubeletGrid,
    enc: &EncoderConfig,
) -> Result<VideoFit> {
    let stage1 = fit_independent(video, config, base, grid, enc)?;
    finish_video(&stage1, video.frames(), config, base, grid, enc)
}

/// Coding settings independent of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodingParams {
    pub bits: u8,
    pub mode: ResidualMode,
    pub keyframe_interval: Option<u32>,
    pub base_fingerprint: u32,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub container: CodedContainer,
    pub bytes: Vec<u8>,
    pub layout: ContainerLayout,
    /// Decoder-side tokens, `[position][clip]`.
    pub recon: Vec<Vec<UniqueParams<f32>>>,
}

/// Quantizes and entropy-codes a fitted video into container bytes.
pub fn encode_fit(fit: &VideoFit, config: &HypoNetConfig, coding: &CodingParams) -> Result<Encoded> {
    let coded = fit
        .positions
        .par_iter()
        .enumerate()
        .map(|(p, r)| {
            encode_stream(
                &r.unique,
                coding.mode,
                Some(coding.bits),
                coding.keyframe_interval,
                p as u32,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (streams, recon): (Vec<_>, Vec<_>) = coded.into_iter().unzip();
    let header = ContainerHeader {
        height: fit.grid.height as u32,
        width: fit.grid.width as u32,
        frames: fit.frames as u32,
        hyponet: config.clone(),
        grid: GridParams::of(&fit.grid),
        residual_mode: coding.mode,
        keyframe_interval: coding.keyframe_interval,
        bits: coding.bits,
        base_fingerprint: coding.base_fingerprint,
    };
    let container = CodedContainer { header, streams };
    let (bytes, layout) = write_container_with_layout(&container)?;
    Ok(Encoded {
        container,
        bytes,
        layout,
        recon,
    })
}

/// Renders `[position][clip]` tokens and fuses them into a `frames`-long video.
pub fn render_video(
    unique: &[Vec<UniqueParams<f32>>],
    config: &HypoNetConfig,
    base: &BaseParams<f32>,
    grid: &TubeletGrid,
    frames: usize,
) -> Result<VideoBuffer> {
    let clips = unique
        .par_iter()
        .map(|seq| {
            seq.iter()
                .map(|u| synthesize_clip(config, &modulate_all(config, base, u)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    reassemble_video(&clips, grid, frames, config.clip_len)
}

/// Decodes a parsed container with the matching base parameters.
pub fn decode_container(container: &CodedContainer, base: &BaseParams<f32>) -> Result<VideoBuffer> {
    let h = &container.header;
    base.check_shape(&h.hyponet)?;
    let grid = h.grid()?;
    let unique = container
        .streams
        .par_iter()
        .map(|s| decode_stream(s, &h.hyponet))
        .collect::<Result<Vec<_>>>()?;
    render_video(&unique, &h.hyponet, base, &grid, h.frames as usize)
}

/// Parses container bytes and decodes them; refuses a base whose
/// fingerprint differs from the one recorded at encode time.
pub fn decode_bytes(bytes: &[u8], base: &BaseParams<f32>, base_fingerprint: u32) -> Result<(VideoBuffer, CodedContainer, ContainerLayout)> {
    let (container, layout) = read_container_with_layout(bytes)?;
    if container.header.base_fingerprint != base_fingerprint {
        return Err(Error::Format(format!(
            "container was encoded against base fingerprint {:08x}, got {:08x}",
            container.header.base_fingerprint, base_fingerprint
        )));
    }
    let video = decode_container(&container, base)?;
    Ok((video, container, layout))
}
