use super::{ClipView, FusionMode, TubeletGrid, VideoBuffer};
use crate::error::{Error, Result};
use crate::kernels::Tensor3;

/// `N` patch frames of `3 x H_p x W_p` cut from one clip at one grid origin.
pub type Tubelet = Vec<Tensor3<f32>>;

/// Copies the sub-volume at `origin = (y, x)` out of every frame of the clip.
pub fn extract_tubelet(clip: &ClipView<'_>, grid: &TubeletGrid, origin: (usize, usize)) -> Result<Tubelet> {
    let video = clip.video();
    let (oy, ox) = origin;
    if oy + grid.patch_h > video.height() || ox + grid.patch_w > video.width() {
        return Err(Error::Shape(format!(
            "origin ({oy}, {ox}) puts a {}x{} patch outside the {}x{} frame",
            grid.patch_h,
            grid.patch_w,
            video.height(),
            video.width()
        )));
    }
    let (ph, pw) = (grid.patch_h, grid.patch_w);
    let (fw, fh) = (video.width(), video.height());
    Ok((clip.start()..clip.start() + clip.len())
        .map(|t| {
            let frame = video.frame_data(t);
            let mut data = Vec::with_capacity(3 * ph * pw);
            for c in 0..3 {
                for y in 0..ph {
                    let row = (c * fh + oy + y) * fw + ox;
                    data.extend_from_slice(&frame[row..row + pw]);
                }
            }
            Tensor3 {
                channels: 3,
                height: ph,
                width: pw,
                data,
            }
        })
        .collect())
}

/// Half-open pixel range owned by each origin when overlaps are split,
/// the earlier patch keeping the extra pixel of an odd overlap.
pub fn crop_ranges(positions: &[usize], patch: usize, dim: usize) -> Vec<(usize, usize)> {
    let mut ranges = Vec::with_capacity(positions.len());
    let mut start = 0;
    for j in 0..positions.len() {
        let end = if j + 1 < positions.len() {
            let overlap = positions[j] + patch - positions[j + 1];
            positions[j + 1] + overlap.div_ceil(2)
        } else {
            dim
        };
        ranges.push((start, end));
        start = end;
    }
    ranges
}

/// Per-axis blend weights of each patch, indexed by local pixel offset.
///
/// Weights ramp linearly up across the overlap with the previous patch and
/// down across the overlap with the next one, and are 1 elsewhere.
pub fn axis_blend_weights(positions: &[usize], patch: usize) -> Vec<Vec<f64>> {
    (0..positions.len())
        .map(|j| {
            let left = if j > 0 { positions[j - 1] + patch - positions[j] } else { 0 };
            let right = if j + 1 < positions.len() {
                positions[j] + patch - positions[j + 1]
            } else {
                0
            };
            (0..patch)
                .map(|u| {
                    let mut w: f64 = 1.0;
                    if u < left {
                        w = w.min((u + 1) as f64 / (left + 1) as f64);
                    }
                    if u + right >= patch {
                        w = w.min((patch - u) as f64 / (right + 1) as f64);
                    }
                    w
                })
                .collect()
        })
        .collect()
}

fn check_patches(patches: &[Tensor3<f32>], grid: &TubeletGrid) -> Result<()> {
    if patches.len() != grid.len() {
        return Err(Error::Shape(format!(
            "{} patches supplied for {} grid origins",
            patches.len(),
            grid.len()
        )));
    }
    if let Some(p) = patches
        .iter()
        .find(|p| p.channels != 3 || p.height != grid.patch_h || p.width != grid.patch_w)
    {
        return Err(Error::Shape(format!(
            "patch {} does not match grid patch 3x{}x{}",
            p.shape_str(),
            grid.patch_h,
            grid.patch_w
        )));
    }
    Ok(())
}

/// Reassembles a frame by giving each pixel to exactly one patch.
pub fn fuse_crop(patches: &[Tensor3<f32>], grid: &TubeletGrid) -> Result<Tensor3<f32>> {
    check_patches(patches, grid)?;
    let rows = crop_ranges(&grid.ys, grid.patch_h, grid.height);
    let cols = crop_ranges(&grid.xs, grid.patch_w, grid.width);
    let mut out = Tensor3::zeros(3, grid.height, grid.width);
    for (iy, &(y0, y1)) in rows.iter().enumerate() {
        for (ix, &(x0, x1)) in cols.iter().enumerate() {
            let patch = &patches[iy * grid.xs.len() + ix];
            let (py, px) = (grid.ys[iy], grid.xs[ix]);
            for c in 0..3 {
                for y in y0..y1 {
                    let src = patch.index(c, y - py, x0 - px);
                    let dst = out.index(c, y, x0);
                    out.data[dst..dst + (x1 - x0)].copy_from_slice(&patch.data[src..src + (x1 - x0)]);
                }
            }
        }
    }
    Ok(out)
}

/// Normalized weighted average of overlapping patches.
pub fn fuse_blend(patches: &[Tensor3<f32>], grid: &TubeletGrid) -> Result<Tensor3<f32>> {
    check_patches(patches, grid)?;
    let wy = axis_blend_weights(&grid.ys, grid.patch_h);
    let wx = axis_blend_weights(&grid.xs, grid.patch_w);
    let (h, w) = (grid.height, grid.width);
    let mut acc = vec![0.0f64; 3 * h * w];
    let mut wsum = vec![0.0f64; h * w];
    for (iy, &py) in grid.ys.iter().enumerate() {
        for (ix, &px) in grid.xs.iter().enumerate() {
            let patch = &patches[iy * grid.xs.len() + ix];
            for y in 0..grid.patch_h {
                for x in 0..grid.patch_w {
                    let wt = wy[iy][y] * wx[ix][x];
                    let (fy, fx) = (py + y, px + x);
                    wsum[fy * w + fx] += wt;
                    for c in 0..3 {
                        acc[(c * h + fy) * w + fx] += wt * f64::from(patch.get(c, y, x));
                    }
                }
            }
        }
    }
    let mut out = Tensor3::zeros(3, h, w);
    for c in 0..3 {
        for p in 0..h * w {
            let s = wsum[p];
            assert!(s > 0.0, "blend weights vanish at pixel {p}; grid does not cover the frame");
            out.data[c * h * w + p] = (acc[c * h * w + p] / s) as f32;
        }
    }
    Ok(out)
}

/// Fuses according to the grid's fusion mode. Tile is crop without overlap.
pub fn fuse(patches: &[Tensor3<f32>], grid: &TubeletGrid) -> Result<Tensor3<f32>> {
    match grid.fusion {
        FusionMode::Tile | FusionMode::Crop => fuse_crop(patches, grid),
        FusionMode::Blend => fuse_blend(patches, grid),
    }
}

/// Rebuilds a `frames`-long video from decoded clips.
///
/// `clips[position][clip]` holds `clip_len` patch frames; surplus frames in
/// the final clip (from padding) are dropped. Output is clamped to `[0, 1]`.
pub fn reassemble_video(
    clips: &[Vec<Tubelet>],
    grid: &TubeletGrid,
    frames: usize,
    clip_len: usize,
) -> Result<VideoBuffer> {
    if clips.len() != grid.len() {
        return Err(Error::Shape(format!(
            "{} positions decoded, grid has {}",
            clips.len(),
            grid.len()
        )));
    }
    let n_clips = frames.div_ceil(clip_len);
    if let Some((p, c)) = clips.iter().enumerate().find(|(_, c)| c.len() != n_clips) {
        return Err(Error::Shape(format!(
            "position {p} has {} clips, expected {n_clips}",
            c.len()
        )));
    }
    let mut out = Vec::with_capacity(frames);
    let mut patches = Vec::with_capacity(grid.len());
    for t in 0..frames {
        let (ci, fi) = (t / clip_len, t % clip_len);
        patches.clear();
        for pos in clips {
            let clip = &pos[ci];
            if clip.len() != clip_len {
                return Err(Error::Shape(format!("clip has {} frames, expected {clip_len}", clip.len())));
            }
            patches.push(clip[fi].clone());
        }
        out.push(fuse(&patches, grid)?);
    }
    VideoBuffer::from_frames_clamped(&out)
}

#[cfg(test)]
mod tests {
    use super::super::plan_grid;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_video(frames: usize, h: usize, w: usize, seed: u64) -> VideoBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VideoBuffer::new(frames, h, w, (0..frames * 3 * h * w).map(|_| rng.gen::<f32>()).collect()).unwrap()
    }

    fn ground_truth_patches(video: &VideoBuffer, grid: &TubeletGrid, t: usize) -> Vec<Tensor3<f32>> {
        let clip = ClipView::new(video, t, 1).unwrap();
        grid.origins()
            .into_iter()
            .map(|o| extract_tubelet(&clip, grid, o).unwrap().remove(0))
            .collect()
    }

    #[test]
    fn extract_top_left_and_full_frame() {
        let v = random_video(4, 6, 8, 1);
        let grid = plan_grid(6, 8, 3, 4, 0, 0).unwrap();
        let clip = ClipView::new(&v, 1, 2).unwrap();
        let tub = extract_tubelet(&clip, &grid, (0, 0)).unwrap();
        assert_eq!(tub.len(), 2);
        for (i, f) in tub.iter().enumerate() {
            for c in 0..3 {
                for y in 0..3 {
                    for x in 0..4 {
                        assert_eq!(f.get(c, y, x), v.pixel(1 + i, c, y, x));
                    }
                }
            }
        }
        let full = plan_grid(6, 8, 6, 8, 0, 0).unwrap();
        let tub = extract_tubelet(&clip, &full, (0, 0)).unwrap();
        assert_eq!(tub[0], v.frame(1));
        assert!(extract_tubelet(&clip, &grid, (4, 0)).is_err());
    }

    #[test]
    fn overlapping_tubelets_agree() {
        let v = random_video(2, 10, 10, 2);
        let grid = plan_grid(10, 10, 6, 6, 2, 2).unwrap();
        let clip = ClipView::new(&v, 0, 2).unwrap();
        let a = extract_tubelet(&clip, &grid, (0, 0)).unwrap();
        let b = extract_tubelet(&clip, &grid, (0, 4)).unwrap();
        for c in 0..3 {
            for y in 0..6 {
                assert_eq!(a[1].get(c, y, 4), b[1].get(c, y, 0));
                assert_eq!(a[1].get(c, y, 5), b[1].get(c, y, 1));
            }
        }
    }

    #[test]
    fn crop_split_rule() {
        // two columns overlapping by 5: left keeps 3, right keeps 2
        let r = crop_ranges(&[0, 15], 20, 35);
        assert_eq!(r, vec![(0, 18), (18, 35)]);
        assert_eq!(18 - 15, 3);
        assert_eq!(20 - 3, 17);
    }

    #[test]
    fn fusion_reproduces_ground_truth() {
        let v = random_video(1, 37, 53, 3);
        for (oh, ow) in [(0, 0), (5, 0), (0, 5), (3, 7), (9, 9)] {
            let grid = plan_grid(37, 53, 12, 16, oh, ow).unwrap();
            let p = ground_truth_patches(&v, &grid, 0);
            assert_eq!(fuse_crop(&p, &grid).unwrap(), v.frame(0));
            let b = fuse_blend(&p, &grid).unwrap();
            for (x, y) in b.data.iter().zip(&v.frame(0).data) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tile_mode_reproduces_exactly() {
        let v = random_video(1, 32, 64, 4);
        let grid = plan_grid(32, 64, 16, 16, 0, 0).unwrap();
        assert_eq!(grid.fusion, FusionMode::Tile);
        let p = ground_truth_patches(&v, &grid, 0);
        assert_eq!(fuse(&p, &grid).unwrap(), v.frame(0));
        assert_eq!(fuse_blend(&p, &grid).unwrap(), fuse_crop(&p, &grid).unwrap());
    }

    #[test]
    fn constant_patches_stay_constant() {
        let grid = plan_grid(20, 30, 8, 12, 3, 4).unwrap();
        let p = vec![Tensor3::filled(3, 8, 12, 0.3f32); grid.len()];
        assert!(fuse_crop(&p, &grid).unwrap().data.iter().all(|&v| v == 0.3));
        assert!(fuse_blend(&p, &grid).unwrap().data.iter().all(|&v| (v - 0.3).abs() < 1e-7));
    }

    #[test]
    fn linear_ramp_over_four_columns() {
        let grid = plan_grid(4, 12, 4, 8, 0, 4).unwrap();
        assert_eq!(grid.xs, vec![0, 4]);
        let (a, b) = (0.2f32, 0.9f32);
        let p = vec![Tensor3::filled(3, 4, 8, a), Tensor3::filled(3, 4, 8, b)];
        let out = fuse_blend(&p, &grid).unwrap();
        for (k, w) in [0.8f32, 0.6, 0.4, 0.2].iter().enumerate() {
            let expect = a * w + b * (1.0 - w);
            assert!((out.get(0, 1, 4 + k) - expect).abs() < 1e-6);
        }
        assert_eq!(out.get(0, 0, 0), a);
        assert_eq!(out.get(0, 0, 11), b);
    }

    #[test]
    fn missing_patch_is_error() {
        let grid = plan_grid(8, 8, 4, 4, 0, 0).unwrap();
        let p = vec![Tensor3::<f32>::zeros(3, 4, 4); 3];
        assert!(fuse_crop(&p, &grid).is_err());
        assert!(fuse_blend(&p, &grid).is_err());
    }

    #[test]
    fn reassembly_drops_padding() {
        let v = random_video(12, 8, 8, 5);
        let padded = v.padded_to_clip_multiple(8);
        assert_eq!(padded.frames(), 16);
        let grid = plan_grid(8, 8, 4, 4, 0, 0).unwrap();
        let clips: Vec<Vec<Tubelet>> = grid
            .origins()
            .into_iter()
            .map(|o| {
                (0..2)
                    .map(|c| extract_tubelet(&ClipView::new(&padded, c * 8, 8).unwrap(), &grid, o).unwrap())
                    .collect()
            })
            .collect();
        let out = reassemble_video(&clips, &grid, 12, 8).unwrap();
        assert_eq!(out, v);
        assert!(reassemble_video(&clips[..3], &grid, 12, 8).is_err());
        assert!(reassemble_video(&clips, &grid, 17, 8).is_err());
    }
}
