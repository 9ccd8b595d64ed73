use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How overlapping decoded patches are combined into a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Non-overlapping placement; requires the frame to be an exact multiple of the patch.
    Tile,
    /// Each overlap is split between the two neighbours; one owner per pixel.
    Crop,
    /// Normalized linear-ramp weighted average over overlaps.
    Blend,
}

impl FusionMode {
    pub fn code(self) -> u8 {
        match self {
            Self::Tile => 0,
            Self::Crop => 1,
            Self::Blend => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Self::Tile),
            1 => Ok(Self::Crop),
            2 => Ok(Self::Blend),
            _ => Err(Error::Format(format!("unknown fusion mode {code}"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tile => "tile",
            Self::Crop => "crop",
            Self::Blend => "blend",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tile" => Ok(Self::Tile),
            "crop" => Ok(Self::Crop),
            "blend" => Ok(Self::Blend),
            _ => Err(Error::Config(format!("unknown fusion mode {s:?}"))),
        }
    }
}

/// Placement of patch tubelets over a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TubeletGrid {
    pub height: usize,
    pub width: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    pub overlap_h: usize,
    pub overlap_w: usize,
    pub fusion: FusionMode,
    /// Row origins, ascending.
    pub ys: Vec<usize>,
    /// Column origins, ascending.
    pub xs: Vec<usize>,
}

/// Origins along one axis: stride `patch - overlap`, last origin clamped to
/// `dim - patch`.
pub fn axis_positions(dim: usize, patch: usize, overlap: usize) -> Vec<usize> {
    let stride = patch - overlap;
    let n = (dim - patch).div_ceil(stride) + 1;
    (0..n).map(|i| (i * stride).min(dim - patch)).collect()
}

/// Plans a grid of `patch_h x patch_w` patches over an `height x width` frame.
///
/// Fusion defaults to [`FusionMode::Tile`] when the patches tile the frame
/// exactly and to [`FusionMode::Crop`] otherwise.
pub fn plan_grid(
    height: usize,
    width: usize,
    patch_h: usize,
    patch_w: usize,
    overlap_h: usize,
    overlap_w: usize,
) -> Result<TubeletGrid> {
    if patch_h == 0 || patch_w == 0 || patch_h > height || patch_w > width {
        return Err(Error::Config(format!(
            "patch {patch_h}x{patch_w} does not fit frame {height}x{width}"
        )));
    }
    if overlap_h >= patch_h || overlap_w >= patch_w {
        return Err(Error::Config(format!(
            "overlap ({overlap_h}, {overlap_w}) must be smaller than patch {patch_h}x{patch_w}"
        )));
    }
    let ys = axis_positions(height, patch_h, overlap_h);
    let xs = axis_positions(width, patch_w, overlap_w);
    let tiles = overlap_h == 0 && overlap_w == 0 && height % patch_h == 0 && width % patch_w == 0;
    Ok(TubeletGrid {
        height,
        width,
        patch_h,
        patch_w,
        overlap_h,
        overlap_w,
        fusion: if tiles { FusionMode::Tile } else { FusionMode::Crop },
        ys,
        xs,
    })
}

impl TubeletGrid {
    pub fn with_fusion(mut self, fusion: FusionMode) -> Result<Self> {
        if fusion == FusionMode::Tile
            && (self.height % self.patch_h != 0
                || self.width % self.patch_w != 0
                || self.overlap_h != 0
                || self.overlap_w != 0)
        {
            return Err(Error::Config(format!(
                "tile fusion needs a {}x{} frame to be an exact multiple of {}x{} patches with no overlap",
                self.height, self.width, self.patch_h, self.patch_w
            )));
        }
        self.fusion = fusion;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ys.len() * self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(y, x)` origins in row-major order; the index is the position id.
    pub fn origins(&self) -> Vec<(usize, usize)> {
        self.ys
            .iter()
            .flat_map(|&y| self.xs.iter().map(move |&x| (y, x)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_tiling_640x480() {
        let g = plan_grid(480, 640, 160, 320, 0, 0).unwrap();
        assert_eq!((g.ys.len(), g.xs.len()), (3, 2));
        assert_eq!(g.len(), 6);
        assert_eq!(g.fusion, FusionMode::Tile);
    }

    #[test]
    fn overlapped_720p_counts() {
        assert_eq!(plan_grid(720, 1280, 160, 320, 5, 0).unwrap().len(), 20);
        assert_eq!(plan_grid(720, 1280, 160, 320, 0, 5).unwrap().len(), 25);
        assert_eq!(plan_grid(720, 1280, 160, 320, 20, 20).unwrap().len(), 25);
        assert_eq!(plan_grid(1080, 1920, 240, 320, 5, 0).unwrap().len(), 30);
        assert_eq!(plan_grid(1080, 1920, 240, 320, 10, 10).unwrap().len(), 35);
    }

    #[test]
    fn last_origin_clamped() {
        let ys = axis_positions(720, 160, 5);
        assert_eq!(ys, vec![0, 155, 310, 465, 560]);
    }

    #[test]
    fn invalid_grids() {
        assert!(plan_grid(100, 100, 120, 10, 0, 0).is_err());
        assert!(plan_grid(100, 100, 10, 10, 10, 0).is_err());
        let g = plan_grid(100, 100, 30, 30, 0, 0).unwrap();
        assert_eq!(g.fusion, FusionMode::Crop);
        assert!(g.with_fusion(FusionMode::Tile).is_err());
    }

    fn brute_force_count(dim: usize, patch: usize, overlap: usize) -> usize {
        // walk origins one stride at a time until the frame is covered
        let stride = patch - overlap;
        let mut covered = patch;
        let mut n = 1;
        while covered < dim {
            covered += stride;
            n += 1;
        }
        n
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn count_matches_brute_force(dim in 1usize..400, patch_frac in 0.01f64..1.0, ov_frac in 0.0f64..1.0) {
            let patch = ((dim as f64 * patch_frac) as usize).clamp(1, dim);
            let overlap = ((patch as f64 * ov_frac) as usize).min(patch - 1);
            let pos = axis_positions(dim, patch, overlap);
            prop_assert_eq!(pos.len(), brute_force_count(dim, patch, overlap));
            prop_assert!(pos.iter().all(|&p| p + patch <= dim));
            prop_assert_eq!(pos[0], 0);
            prop_assert_eq!(*pos.last().unwrap() + patch, dim);
            // coverage without gaps
            for w in pos.windows(2) {
                prop_assert!(w[1] > w[0] && w[1] <= w[0] + patch);
            }
        }
    }
}
