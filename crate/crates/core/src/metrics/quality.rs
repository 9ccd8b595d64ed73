use crate::error::{Error, Result};
use crate::tubelet::VideoBuffer;

/// PSNR reported for identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_dims(a: &VideoBuffer, b: &VideoBuffer) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "videos differ in size: {}x{}x{} vs {}x{}x{}",
            a.frames(),
            a.height(),
            a.width(),
            b.frames(),
            b.height(),
            b.width()
        )))
    }
}

pub fn mse(a: &VideoBuffer, b: &VideoBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sse / a.data().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Peak signal-to-noise ratio for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &VideoBuffer, b: &VideoBuffer) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

fn gray(v: &VideoBuffer, t: usize) -> Vec<f64> {
    let plane = v.height() * v.width();
    let f = v.frame_data(t);
    (0..plane)
        .map(|i| (f64::from(f[i]) + f64::from(f[plane + i]) + f64::from(f[2 * plane + i])) / 3.0)
        .collect()
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Valid-mode separable filtering of an `h x w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_term(mx: f64, my: f64, vx: f64, vy: f64, cov: f64) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn frame_ssim(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        // frame smaller than the window: one global window
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
        let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
        let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        return ssim_term(mx, my, vx, vy, cov);
    }
    let k = gaussian_window();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let xx = filter_valid(&prod(x, x), h, w, &k);
    let yy = filter_valid(&prod(y, y), h, w, &k);
    let xy = filter_valid(&prod(x, y), h, w, &k);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            ssim_term(a, b, xx[i] - a * a, yy[i] - b * b, xy[i] - a * b)
        })
        .sum();
    total / mx.len() as f64
}

/// Mean SSIM over frames, computed on the RGB-mean channel with an 11x11
/// Gaussian window (sigma 1.5) over valid positions. Frames smaller than the
/// window use global statistics.
pub fn ssim(a: &VideoBuffer, b: &VideoBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let (h, w) = (a.height(), a.width());
    let total: f64 = (0..a.frames()).map(|t| frame_ssim(&gray(a, t), &gray(b, t), h, w)).sum();
    Ok(total / a.frames() as f64)
}
