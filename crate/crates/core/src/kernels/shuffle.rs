use super::Tensor3;
use crate::error::{Error, Result};
use crate::Real;

/// Channel-to-space rearrangement with independent height and width factors:
/// `out[c][rh*y + dy][rw*x + dx] = in[c*rh*rw + dy*rw + dx][y][x]`.
pub fn pixel_shuffle<F: Real>(input: &Tensor3<F>, rh: usize, rw: usize) -> Result<Tensor3<F>> {
    let block = rh * rw;
    if block == 0 || input.channels % block != 0 {
        return Err(Error::Shape(format!(
            "pixel shuffle {rh}x{rw} needs channels divisible by {block}, got {}",
            input.channels
        )));
    }
    let (c_out, h, w) = (input.channels / block, input.height, input.width);
    let (oh, ow) = (h * rh, w * rw);
    let mut out = Tensor3::zeros(c_out, oh, ow);
    for c in 0..c_out {
        for dy in 0..rh {
            for dx in 0..rw {
                let src = input.plane(c * block + dy * rw + dx);
                let dst_base = c * oh * ow;
                for y in 0..h {
                    let row = dst_base + (rh * y + dy) * ow + dx;
                    for x in 0..w {
                        out.data[row + rw * x] = src[y * w + x];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<F: Real>(input: &Tensor3<F>, rh: usize, rw: usize) -> Result<Tensor3<F>> {
    if rh == 0 || rw == 0 || input.height % rh != 0 || input.width % rw != 0 {
        return Err(Error::Shape(format!(
            "pixel unshuffle {rh}x{rw} needs spatial size divisible by factors, got {}",
            input.shape_str()
        )));
    }
    let block = rh * rw;
    let (h, w) = (input.height / rh, input.width / rw);
    let (ih, iw) = (input.height, input.width);
    let mut out = Tensor3::zeros(input.channels * block, h, w);
    for c in 0..input.channels {
        for dy in 0..rh {
            for dx in 0..rw {
                let dst = (c * block + dy * rw + dx) * h * w;
                let src_base = c * ih * iw;
                for y in 0..h {
                    let row = src_base + (rh * y + dy) * iw + dx;
                    for x in 0..w {
                        out.data[dst + y * w + x] = input.data[row + rw * x];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The shuffle is a permutation, so its adjoint is the inverse permutation.
pub fn pixel_shuffle_backward<F: Real>(grad_out: &Tensor3<F>, rh: usize, rw: usize) -> Result<Tensor3<F>> {
    pixel_unshuffle(grad_out, rh, rw)
}
