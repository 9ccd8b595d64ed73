//! Reconstruction quality metrics.

mod quality;

pub use quality::{mse, psnr, psnr_from_mse, ssim, PSNR_CAP_DB};
