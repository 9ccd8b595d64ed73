//! C ABI over the `hypocodec` crate.
//!
//! Handles are opaque heap objects released with their `*_free` function.
//! Every fallible call returns an [`HcvStatus`]; on failure a message is
//! available from [`hcv_last_error`] on the calling thread. Video pixels
//! cross the boundary as planar RGB8, frame-major (`T x 3 x H x W`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::{ptr, slice};

use hypocodec::bitstream::{base_fingerprint, compute_bpp, read_base, read_container_with_layout, write_base, ResidualMode};
use hypocodec::config::{preset, GridSettings};
use hypocodec::encoder::EncoderConfig;
use hypocodec::hyponet::{BaseParams, HypoNetConfig};
use hypocodec::io::{video_from_bytes, video_to_bytes};
use hypocodec::metrics;
use hypocodec::pipeline::{decode_bytes, encode_fit, fit_video, CodingParams};
use hypocodec::tubelet::{FusionMode, VideoBuffer};
use hypocodec::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Format = 4,
    Checksum = 5,
    Truncated = 6,
    Numeric = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for HcvStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::SymbolOutOfRange { .. } => Self::InvalidArgument,
            Error::Shape(_) => Self::Shape,
            Error::Format(_) | Error::BadMagic { .. } | Error::Version { .. } => Self::Format,
            Error::Checksum { .. } => Self::Checksum,
            Error::Truncated(_) => Self::Truncated,
            Error::DegenerateModulation { .. } | Error::Divergence(_) | Error::NonFinite(_) => Self::Numeric,
            Error::Io(_) => Self::Io,
        }
    }
}

pub const HCV_FUSION_DEFAULT: u32 = 0;
pub const HCV_FUSION_TILE: u32 = 1;
pub const HCV_FUSION_CROP: u32 = 2;
pub const HCV_FUSION_BLEND: u32 = 3;

pub const HCV_RESIDUAL_NONE: u32 = 0;
pub const HCV_RESIDUAL_FIRST: u32 = 1;
pub const HCV_RESIDUAL_PREVIOUS: u32 = 2;

/// Encoder settings. Start from [`hcv_encode_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HcvEncodeParams {
    /// Quantizer bit depth, 4..=8.
    pub bits: u32,
    /// One of the `HCV_RESIDUAL_*` constants.
    pub residual_mode: u32,
    /// Keyframe every this many clips; 0 disables keyframes.
    pub keyframe_interval: u32,
    pub lambda_temp: f64,
    pub iterations: u32,
    pub finetune_iterations: u32,
    pub learning_rate: f64,
    pub finetune_learning_rate: f64,
    pub overlap_h: u32,
    pub overlap_w: u32,
    /// One of the `HCV_FUSION_*` constants.
    pub fusion: u32,
    /// Nonzero starts each clip from the previous clip's tokens.
    pub warm_start: u32,
}

/// Base parameters loaded from a base file.
pub struct HcvBase {
    config: HypoNetConfig,
    params: BaseParams<f32>,
    fingerprint: u32,
}

pub struct HcvVideo {
    video: VideoBuffer,
}

/// A byte buffer owned by the library; release with [`hcv_bytes_free`].
#[repr(C)]
pub struct HcvBytes {
    pub data: *mut u8,
    pub len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(HcvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(HcvStatus::from(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(HcvStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HcvStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Fail(HcvStatus::Panic, format!("internal panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            set_last_error("");
            HcvStatus::Ok
        }
        Err(Fail(status, msg)) => {
            set_last_error(&msg);
            status
        }
    }
}

unsafe fn bytes_arg<'a>(data: *const u8, len: usize) -> Result<&'a [u8], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Fail(HcvStatus::NullPointer, "null data pointer".into()));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(HcvStatus::NullPointer, format!("null {what}")))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(HcvStatus::NullPointer, "null output pointer".into()))
}

fn into_bytes(v: Vec<u8>) -> HcvBytes {
    let boxed = v.into_boxed_slice();
    let len = boxed.len();
    HcvBytes {
        data: Box::into_raw(boxed) as *mut u8,
        len,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hcv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hcv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn hcv_encode_params_default() -> HcvEncodeParams {
    let enc = EncoderConfig::default();
    HcvEncodeParams {
        bits: 4,
        residual_mode: HCV_RESIDUAL_PREVIOUS,
        keyframe_interval: 0,
        lambda_temp: enc.lambda_temp,
        iterations: enc.iterations as u32,
        finetune_iterations: enc.finetune_iterations as u32,
        learning_rate: enc.adam.learning_rate,
        finetune_learning_rate: enc.finetune_adam.learning_rate,
        overlap_h: 0,
        overlap_w: 0,
        fusion: HCV_FUSION_DEFAULT,
        warm_start: 1,
    }
}

/// Parses a base file.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_base_load(data: *const u8, len: usize, out: *mut *mut HcvBase) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let bytes = bytes_arg(data, len)?;
        let fingerprint = base_fingerprint(bytes)?;
        let (config, params) = read_base(bytes)?;
        *out = Box::into_raw(Box::new(HcvBase {
            config,
            params,
            fingerprint,
        }));
        Ok(())
    })
}

/// Randomly initialized base for a named preset (`tiny`, `micro`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_base_init(name: *const c_char, seed: u64, out: *mut *mut HcvBase) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        if name.is_null() {
            return Err(Fail(HcvStatus::NullPointer, "null preset name".into()));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| invalid("preset name is not UTF-8"))?;
        let config = preset(name)?;
        let params = BaseParams::init(&config, seed)?;
        let fingerprint = base_fingerprint(&write_base(&config, &params)?)?;
        *out = Box::into_raw(Box::new(HcvBase {
            config,
            params,
            fingerprint,
        }));
        Ok(())
    })
}

/// Serializes a base into base-file bytes.
///
/// # Safety
/// `base` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_base_save(base: *const HcvBase, out: *mut HcvBytes) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        let base = ref_arg(base, "base")?;
        *out = into_bytes(write_base(&base.config, &base.params)?);
        Ok(())
    })
}

/// Checksum that containers record to identify their base.
///
/// # Safety
/// `base` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hcv_base_fingerprint(base: *const HcvBase) -> u32 {
    base.as_ref().map_or(0, |b| b.fingerprint)
}

/// # Safety
/// `base` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcv_base_free(base: *mut HcvBase) {
    if !base.is_null() {
        drop(Box::from_raw(base));
    }
}

/// Builds a video from planar RGB8 frames (`T x 3 x H x W`).
///
/// # Safety
/// `rgb` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_video_from_rgb8(
    frames: usize,
    height: usize,
    width: usize,
    rgb: *const u8,
    len: usize,
    out: *mut *mut HcvVideo,
) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let bytes = bytes_arg(rgb, len)?;
        let video = video_from_bytes(frames, height, width, bytes)?;
        *out = Box::into_raw(Box::new(HcvVideo { video }));
        Ok(())
    })
}

/// Writes `frames`, `height`, `width` of a video; any output may be null.
///
/// # Safety
/// `video` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_video_dims(
    video: *const HcvVideo,
    frames: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> HcvStatus {
    guard(|| {
        let v = &ref_arg(video, "video")?.video;
        for (p, value) in [(frames, v.frames()), (height, v.height()), (width, v.width())] {
            if let Some(p) = p.as_mut() {
                *p = value;
            }
        }
        Ok(())
    })
}

/// Copies the video out as planar RGB8; `len` must equal `T*3*H*W`.
///
/// # Safety
/// `video` must be a live handle; `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hcv_video_to_rgb8(video: *const HcvVideo, out: *mut u8, len: usize) -> HcvStatus {
    guard(|| {
        let v = &ref_arg(video, "video")?.video;
        let bytes = video_to_bytes(v);
        if bytes.len() != len {
            return Err(invalid(format!("buffer holds {len} bytes, video needs {}", bytes.len())));
        }
        if out.is_null() {
            return Err(Fail(HcvStatus::NullPointer, "null output buffer".into()));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `video` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcv_video_free(video: *mut HcvVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

fn encoder_settings(p: &HcvEncodeParams) -> Result<(EncoderConfig, CodingParams, GridSettings), Fail> {
    let mode = match p.residual_mode {
        HCV_RESIDUAL_NONE => ResidualMode::None,
        HCV_RESIDUAL_FIRST => ResidualMode::First,
        HCV_RESIDUAL_PREVIOUS => ResidualMode::Previous,
        m => return Err(invalid(format!("unknown residual mode {m}"))),
    };
    let fusion = match p.fusion {
        HCV_FUSION_DEFAULT => None,
        HCV_FUSION_TILE => Some(FusionMode::Tile),
        HCV_FUSION_CROP => Some(FusionMode::Crop),
        HCV_FUSION_BLEND => Some(FusionMode::Blend),
        f => return Err(invalid(format!("unknown fusion mode {f}"))),
    };
    let bits = u8::try_from(p.bits).map_err(|_| invalid(format!("bit depth {} out of range", p.bits)))?;
    let keyframe_interval = (p.keyframe_interval != 0).then_some(p.keyframe_interval);
    let mut enc = EncoderConfig {
        iterations: p.iterations as usize,
        finetune_iterations: p.finetune_iterations as usize,
        lambda_temp: p.lambda_temp,
        residual_mode: mode,
        keyframe_interval,
        warm_start: p.warm_start != 0,
        ..EncoderConfig::default()
    };
    enc.adam.learning_rate = p.learning_rate;
    enc.finetune_adam.learning_rate = p.finetune_learning_rate;
    enc.validate()?;
    let coding = CodingParams {
        bits,
        mode,
        keyframe_interval,
        base_fingerprint: 0,
    };
    let grid = GridSettings {
        overlap: (p.overlap_h as usize, p.overlap_w as usize),
        fusion,
    };
    Ok((enc, coding, grid))
}

/// Fits and codes a video into container bytes.
///
/// # Safety
/// Handles must be live; `params` readable or null for defaults; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_encode(
    base: *const HcvBase,
    video: *const HcvVideo,
    params: *const HcvEncodeParams,
    out: *mut HcvBytes,
) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        let base = ref_arg(base, "base")?;
        let v = &ref_arg(video, "video")?.video;
        let params = params.as_ref().copied().unwrap_or_else(|| hcv_encode_params_default());
        let (enc, mut coding, settings) = encoder_settings(&params)?;
        coding.base_fingerprint = base.fingerprint;
        let grid = settings.plan(v.height(), v.width(), &base.config)?;
        let fit = fit_video(v, &base.config, &base.params, &grid, &enc)?;
        *out = into_bytes(encode_fit(&fit, &base.config, &coding)?.bytes);
        Ok(())
    })
}

/// Decodes container bytes; the container must reference `base`.
///
/// # Safety
/// `base` must be live; `data` must point to `len` bytes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_decode(
    base: *const HcvBase,
    data: *const u8,
    len: usize,
    out: *mut *mut HcvVideo,
) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = ptr::null_mut();
        let base = ref_arg(base, "base")?;
        let bytes = bytes_arg(data, len)?;
        let (video, _, _) = decode_bytes(bytes, &base.params, base.fingerprint)?;
        *out = Box::into_raw(Box::new(HcvVideo { video }));
        Ok(())
    })
}

/// Bits per pixel of a container (coded payload and histograms only).
///
/// # Safety
/// `data` must point to `len` bytes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_container_bpp(data: *const u8, len: usize, out: *mut f64) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        let (c, layout) = read_container_with_layout(bytes_arg(data, len)?)?;
        let h = &c.header;
        *out = compute_bpp(&layout, h.height as usize, h.width as usize, h.frames as usize);
        Ok(())
    })
}

/// PSNR in dB over all frames.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_psnr(a: *const HcvVideo, b: *const HcvVideo, out: *mut f64) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = metrics::psnr(&ref_arg(a, "video")?.video, &ref_arg(b, "video")?.video)?;
        Ok(())
    })
}

/// Mean SSIM over all frames.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hcv_ssim(a: *const HcvVideo, b: *const HcvVideo, out: *mut f64) -> HcvStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = metrics::ssim(&ref_arg(a, "video")?.video, &ref_arg(b, "video")?.video)?;
        Ok(())
    })
}

/// # Safety
/// `bytes` must be null or a buffer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcv_bytes_free(bytes: *mut HcvBytes) {
    let Some(b) = bytes.as_mut() else { return };
    if !b.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
    }
    b.data = ptr::null_mut();
    b.len = 0;
}
