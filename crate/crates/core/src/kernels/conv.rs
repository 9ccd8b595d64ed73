use super::Tensor3;
use crate::error::{Error, Result};
use crate::Real;

/// Weights and bias of one square convolution with zero "same" padding.
///
/// `weight` is laid out `(out_ch, in_ch, k, k)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams<F> {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Real> ConvLayerParams<F> {
    pub fn zeros(out_ch: usize, in_ch: usize, kernel: usize) -> Self {
        Self {
            out_ch,
            in_ch,
            kernel,
            weight: vec![F::zero(); out_ch * in_ch * kernel * kernel],
            bias: vec![F::zero(); out_ch],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel != 1 && self.kernel != 3 {
            return Err(Error::Config(format!(
                "kernel size {} unsupported, expected 1 or 3",
                self.kernel
            )));
        }
        if self.weight.len() != self.weight_len() || self.bias.len() != self.out_ch {
            return Err(Error::Shape(format!(
                "conv params {}x{}x{k}x{k} have {} weights and {} biases",
                self.out_ch,
                self.in_ch,
                self.weight.len(),
                self.bias.len(),
                k = self.kernel
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    pub fn cast<G: Real>(&self) -> ConvLayerParams<G> {
        ConvLayerParams {
            out_ch: self.out_ch,
            in_ch: self.in_ch,
            kernel: self.kernel,
            weight: self.weight.iter().map(|&v| G::lit(v.as_f64())).collect(),
            bias: self.bias.iter().map(|&v| G::lit(v.as_f64())).collect(),
        }
    }
}

/// Gradients produced by [`conv2d_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<F> {
    pub input: Tensor3<F>,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

/// Valid output range along one axis for a tap offset `d`: rows `y` such that
/// `0 <= y + d < len`.
#[inline]
fn tap_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

pub fn conv2d_forward<F: Real>(input: &Tensor3<F>, params: &ConvLayerParams<F>) -> Result<Tensor3<F>> {
    params.validate()?;
    if input.channels != params.in_ch {
        return Err(Error::Config(format!(
            "conv expects {} input channels, got {}",
            params.in_ch, input.channels
        )));
    }
    let (h, w, k) = (input.height, input.width, params.kernel);
    let pad = (k as isize - 1) / 2;
    let hw = h * w;
    let mut out = Tensor3::zeros(params.out_ch, h, w);

    for o in 0..params.out_ch {
        let out_plane = &mut out.data[o * hw..(o + 1) * hw];
        out_plane.fill(params.bias[o]);
        for i in 0..params.in_ch {
            let in_plane = &input.data[i * hw..(i + 1) * hw];
            let wbase = (o * params.in_ch + i) * k * k;
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = tap_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = tap_range(w, dx);
                    let wv = params.weight[wbase + ky * k + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let orow = &mut out_plane[y * w + x0..y * w + x1];
                        let sx0 = (x0 as isize + dx) as usize;
                        let irow = &in_plane[sy * w + sx0..sy * w + sx0 + (x1 - x0)];
                        for (a, &b) in orow.iter_mut().zip(irow) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`conv2d_forward`]: gradients of `sum(grad_out * forward)` with
/// respect to the input, the weights and the bias.
pub fn conv2d_backward<F: Real>(
    input: &Tensor3<F>,
    params: &ConvLayerParams<F>,
    grad_out: &Tensor3<F>,
) -> Result<ConvGrads<F>> {
    params.validate()?;
    if input.channels != params.in_ch
        || grad_out.channels != params.out_ch
        || grad_out.height != input.height
        || grad_out.width != input.width
    {
        return Err(Error::Shape(format!(
            "conv backward: input {} and grad {} inconsistent with {}->{} channels",
            input.shape_str(),
            grad_out.shape_str(),
            params.in_ch,
            params.out_ch
        )));
    }
    let (h, w, k) = (input.height, input.width, params.kernel);
    let pad = (k as isize - 1) / 2;
    let hw = h * w;
    let mut g_in = Tensor3::zeros(params.in_ch, h, w);
    let mut g_w = vec![F::zero(); params.weight_len()];
    let mut g_b = vec![F::zero(); params.out_ch];

    for o in 0..params.out_ch {
        let go_plane = &grad_out.data[o * hw..(o + 1) * hw];
        g_b[o] = go_plane.iter().copied().sum();
        for i in 0..params.in_ch {
            let in_plane = &input.data[i * hw..(i + 1) * hw];
            let gi_plane = &mut g_in.data[i * hw..(i + 1) * hw];
            let wbase = (o * params.in_ch + i) * k * k;
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (y0, y1) = tap_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (x0, x1) = tap_range(w, dx);
                    let widx = wbase + ky * k + kx;
                    let wv = params.weight[widx];
                    let mut acc = F::zero();
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let n = x1 - x0;
                        let grow = &go_plane[y * w + x0..y * w + x1];
                        let irow = &in_plane[sy * w + sx0..sy * w + sx0 + n];
                        let girow = &mut gi_plane[sy * w + sx0..sy * w + sx0 + n];
                        for ((&g, &x), gi) in grow.iter().zip(irow).zip(girow.iter_mut()) {
                            acc += g * x;
                            *gi += wv * g;
                        }
                    }
                    g_w[widx] += acc;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}
