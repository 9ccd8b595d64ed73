//! Deterministic synthetic test videos.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tubelet::VideoBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    MovingSinusoid,
    DriftingGradient,
    BouncingBox,
    Static,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [
        Pattern::MovingSinusoid,
        Pattern::DriftingGradient,
        Pattern::BouncingBox,
        Pattern::Static,
    ];
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::MovingSinusoid => "moving_sinusoid",
            Pattern::DriftingGradient => "drifting_gradient",
            Pattern::BouncingBox => "bouncing_box",
            Pattern::Static => "static",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.to_string() == s.replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown pattern '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub pattern: Pattern,
    /// Motion in pixels per frame.
    pub speed: f64,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

struct Wave {
    // cycles per pixel along x and y, and per-channel phase
    fx: f64,
    fy: f64,
    phase: [f64; 3],
    amp: [f64; 3],
    dir: (f64, f64),
}

fn wave(rng: &mut ChaCha8Rng, max_cycles: f64, h: usize, w: usize) -> Wave {
    let angle = rng.gen_range(0.0..TAU);
    let cycles = rng.gen_range(1.0..max_cycles);
    let size = h.max(w) as f64;
    Wave {
        fx: cycles * angle.cos() / size,
        fy: cycles * angle.sin() / size,
        phase: [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
        amp: [rng.gen_range(0.25..0.45), rng.gen_range(0.25..0.45), rng.gen_range(0.25..0.45)],
        dir: (angle.cos(), angle.sin()),
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<VideoBuffer> {
    let SyntheticSpec {
        pattern,
        speed,
        frames,
        height: h,
        width: w,
        seed,
    } = *spec;
    if frames == 0 || h == 0 || w == 0 {
        return Err(Error::Config(format!("synthetic video needs positive size, got {frames}x{h}x{w}")));
    }
    if !speed.is_finite() {
        return Err(Error::Config("speed must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = h * w;
    let mut data = vec![0.0f32; frames * 3 * plane];
    let mut put = |t: usize, c: usize, y: usize, x: usize, v: f64| {
        data[(t * 3 + c) * plane + y * w + x] = v.clamp(0.0, 1.0) as f32;
    };
    match pattern {
        Pattern::MovingSinusoid | Pattern::Static => {
            let waves = [wave(&mut rng, 3.0, h, w), wave(&mut rng, 2.0, h, w)];
            let speed = if pattern == Pattern::Static { 0.0 } else { speed };
            for t in 0..frames {
                let shift = speed * t as f64;
                for y in 0..h {
                    for x in 0..w {
                        for c in 0..3 {
                            let mut v = 0.5;
                            for wv in &waves {
                                let (px, py) = (x as f64 - shift * wv.dir.0, y as f64 - shift * wv.dir.1);
                                v += 0.5 * wv.amp[c] * (TAU * (wv.fx * px + wv.fy * py) + wv.phase[c]).sin();
                            }
                            put(t, c, y, x, v);
                        }
                    }
                }
            }
        }
        Pattern::DriftingGradient => {
            let wv = wave(&mut rng, 2.0, h, w);
            // a half period across the frame looks like a linear ramp
            let period = 2.0 * h.max(w) as f64;
            for t in 0..frames {
                let shift = speed * t as f64;
                for y in 0..h {
                    for x in 0..w {
                        let u = x as f64 * wv.dir.0 + y as f64 * wv.dir.1 - shift;
                        for c in 0..3 {
                            put(t, c, y, x, 0.5 + wv.amp[c] * (TAU * u / period + wv.phase[c]).cos());
                        }
                    }
                }
            }
        }
        Pattern::BouncingBox => {
            let bg: [f64; 3] = [rng.gen_range(0.1..0.4), rng.gen_range(0.1..0.4), rng.gen_range(0.1..0.4)];
            let fg: [f64; 3] = [rng.gen_range(0.6..0.9), rng.gen_range(0.6..0.9), rng.gen_range(0.6..0.9)];
            let (bh, bw) = ((h / 3).max(1) as f64, (w / 3).max(1) as f64);
            let angle = rng.gen_range(0.0..TAU);
            let (y0, x0) = (rng.gen_range(0.0..=h as f64 - bh), rng.gen_range(0.0..=w as f64 - bw));
            let bounce = |p: f64, span: f64| {
                if span <= 0.0 {
                    return 0.0;
                }
                let m = p.rem_euclid(2.0 * span);
                if m > span {
                    2.0 * span - m
                } else {
                    m
                }
            };
            for t in 0..frames {
                let by = bounce(y0 + speed * t as f64 * angle.sin(), h as f64 - bh);
                let bx = bounce(x0 + speed * t as f64 * angle.cos(), w as f64 - bw);
                for y in 0..h {
                    for x in 0..w {
                        // fractional pixel coverage keeps sub-pixel motion smooth
                        let cover = |p: usize, lo: f64, len: f64| {
                            let (a, b) = (p as f64, p as f64 + 1.0);
                            (b.min(lo + len) - a.max(lo)).clamp(0.0, 1.0)
                        };
                        let k = cover(y, by, bh) * cover(x, bx, bw);
                        for c in 0..3 {
                            put(t, c, y, x, bg[c] + k * (fg[c] - bg[c]));
                        }
                    }
                }
            }
        }
    }
    VideoBuffer::new(frames, h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pattern: Pattern, speed: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            pattern,
            speed,
            frames: 12,
            height: 24,
            width: 32,
            seed,
        }
    }

    fn frame_mse(v: &VideoBuffer, a: usize, b: usize) -> f64 {
        v.frame_data(a)
            .iter()
            .zip(v.frame_data(b))
            .map(|(x, y)| f64::from(x - y).powi(2))
            .sum::<f64>()
            / v.frame_len() as f64
    }

    #[test]
    fn static_frames_identical() {
        let v = generate_synthetic(&spec(Pattern::Static, 3.0, 1)).unwrap();
        assert!((1..v.frames()).all(|t| v.frame_data(t) == v.frame_data(0)));
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        for p in Pattern::ALL {
            let a = generate_synthetic(&spec(p, 1.0, 5)).unwrap();
            assert_eq!(a, generate_synthetic(&spec(p, 1.0, 5)).unwrap());
            assert_ne!(a, generate_synthetic(&spec(p, 1.0, 6)).unwrap());
        }
    }

    #[test]
    fn motion_is_smooth() {
        for p in [Pattern::MovingSinusoid, Pattern::DriftingGradient, Pattern::BouncingBox] {
            for seed in 0..3 {
                let v = generate_synthetic(&spec(p, 1.0, seed)).unwrap();
                for t in 0..v.frames() - 5 {
                    assert!(frame_mse(&v, t, t + 1) < frame_mse(&v, t, t + 5), "{p} seed {seed} t {t}");
                }
                let fast = generate_synthetic(&spec(p, 4.0, seed)).unwrap();
                assert!(frame_mse(&v, 0, 1) < frame_mse(&fast, 0, 1) + 1e-12);
            }
        }
    }

    #[test]
    fn pattern_names_parse() {
        for p in Pattern::ALL {
            assert_eq!(p.to_string().parse::<Pattern>().unwrap(), p);
        }
        assert_eq!("bouncing-box".parse::<Pattern>().unwrap(), Pattern::BouncingBox);
        assert!("plaid".parse::<Pattern>().is_err());
    }
}
