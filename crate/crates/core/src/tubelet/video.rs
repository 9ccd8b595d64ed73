use crate::error::{Error, Result};
use crate::kernels::Tensor3;

/// RGB video with pixel values in `[0, 1]`, stored `(frame, channel, row, column)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoBuffer {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl VideoBuffer {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty video {frames}x{height}x{width}")));
        }
        if data.len() != frames * 3 * height * width {
            return Err(Error::Shape(format!(
                "video {frames}x3x{height}x{width} needs {} values, got {}",
                frames * 3 * height * width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            frames,
            height,
            width,
            data,
        })
    }

    pub fn filled(frames: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(frames, height, width, vec![value; frames * 3 * height * width])
    }

    /// Builds a video from `3 x H x W` frames, clamping every value into `[0, 1]`.
    pub fn from_frames_clamped(frames: &[Tensor3<f32>]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("video needs at least one frame".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(frames.len() * 3 * h * w);
        for f in frames {
            if f.channels != 3 || f.height != h || f.width != w {
                return Err(Error::Shape(format!("frame {} does not match 3x{h}x{w}", f.shape_str())));
            }
            data.extend(f.data.iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }));
        }
        Self::new(frames.len(), h, w, data)
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame_len(&self) -> usize {
        3 * self.height * self.width
    }

    pub fn frame_data(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame(&self, t: usize) -> Tensor3<f32> {
        Tensor3 {
            channels: 3,
            height: self.height,
            width: self.width,
            data: self.frame_data(t).to_vec(),
        }
    }

    #[inline]
    pub fn pixel(&self, t: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[((t * 3 + c) * self.height + y) * self.width + x]
    }

    pub fn same_dims(&self, other: &Self) -> bool {
        self.frames == other.frames && self.height == other.height && self.width == other.width
    }

    /// Number of clips of length `clip_len` needed to cover the video.
    pub fn clip_count(&self, clip_len: usize) -> usize {
        self.frames.div_ceil(clip_len)
    }

    /// Copy extended to a multiple of `clip_len` frames by repeating the last frame.
    pub fn padded_to_clip_multiple(&self, clip_len: usize) -> Self {
        let target = self.clip_count(clip_len) * clip_len;
        let mut data = self.data.clone();
        let last = self.frame_data(self.frames - 1).to_vec();
        for _ in self.frames..target {
            data.extend_from_slice(&last);
        }
        Self {
            frames: target,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// First `frames` frames.
    pub fn truncated(&self, frames: usize) -> Result<Self> {
        if frames == 0 || frames > self.frames {
            return Err(Error::Shape(format!("cannot keep {frames} of {} frames", self.frames)));
        }
        Ok(Self {
            frames,
            height: self.height,
            width: self.width,
            data: self.data[..frames * self.frame_len()].to_vec(),
        })
    }
}

/// `len` consecutive frames of a video starting at `start`.
#[derive(Debug, Clone, Copy)]
pub struct ClipView<'a> {
    video: &'a VideoBuffer,
    start: usize,
    len: usize,
}

impl<'a> ClipView<'a> {
    pub fn new(video: &'a VideoBuffer, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > video.frames() {
            return Err(Error::Shape(format!(
                "clip [{start}, {}) outside video of {} frames",
                start + len,
                video.frames()
            )));
        }
        Ok(Self { video, start, len })
    }

    pub fn video(&self) -> &'a VideoBuffer {
        self.video
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
