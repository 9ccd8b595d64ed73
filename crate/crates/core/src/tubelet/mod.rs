//! Patch-tubelet planning, extraction, and fusion of decoded patches.

mod fuse;
mod grid;
mod video;

pub use fuse::{
    axis_blend_weights, crop_ranges, extract_tubelet, fuse, fuse_blend, fuse_crop, reassemble_video, Tubelet,
};
pub use grid::{axis_positions, plan_grid, FusionMode, TubeletGrid};
pub use video::{ClipView, VideoBuffer};
