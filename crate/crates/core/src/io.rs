//! Video files: a directory of binary PPM (P6) frames, or raw planar RGB8
//! with a `key=value` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tubelet::VideoBuffer;

#[inline]
pub fn byte_to_unit(b: u8) -> f32 {
    f32::from(b) / 255.0
}

#[inline]
pub fn unit_to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Frame-major planar bytes `(t, c, y, x)`.
pub fn video_to_bytes(v: &VideoBuffer) -> Vec<u8> {
    v.data().iter().map(|&x| unit_to_byte(x)).collect()
}

pub fn video_from_bytes(frames: usize, height: usize, width: usize, bytes: &[u8]) -> Result<VideoBuffer> {
    VideoBuffer::new(frames, height, width, bytes.iter().map(|&b| byte_to_unit(b)).collect())
}

pub fn encode_ppm(v: &VideoBuffer, t: usize) -> Vec<u8> {
    let (h, w) = (v.height(), v.width());
    let plane = h * w;
    let f = v.frame_data(t);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * plane);
    for i in 0..plane {
        for c in 0..3 {
            out.push(unit_to_byte(f[c * plane + i]));
        }
    }
    out
}

/// Parses a P6 image with maxval 255 into planar RGB bytes.
pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("PPM header ended early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err(Error::Format("not a binary PPM (P6) image".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        token()?
            .parse()
            .map_err(|_| Error::Format(format!("bad PPM {what}")))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval != 255 {
        return Err(Error::Format(format!("PPM maxval {maxval} unsupported, need 255")));
    }
    if w == 0 || h == 0 {
        return Err(Error::Format("PPM has zero size".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    let body = &bytes[(pos + 1).min(bytes.len())..];
    let plane = w * h;
    if body.len() < 3 * plane {
        return Err(Error::Truncated(format!(
            "PPM raster has {} bytes, needs {}",
            body.len(),
            3 * plane
        )));
    }
    let mut planar = vec![0u8; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            planar[c * plane + i] = body[3 * i + c];
        }
    }
    Ok((h, w, planar))
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:05}.ppm")
}

/// Reads every `*.ppm` file of `dir` in file-name order.
pub fn read_ppm_dir(dir: &Path) -> Result<VideoBuffer> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ppm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Format(format!("no .ppm frames in {}", dir.display())));
    }
    let mut dims = None;
    let mut bytes = Vec::new();
    for f in &files {
        let (h, w, planar) = decode_ppm(&fs::read(f)?)?;
        if *dims.get_or_insert((h, w)) != (h, w) {
            return Err(Error::Shape(format!("{} is {w}x{h}, earlier frames differ", f.display())));
        }
        bytes.extend_from_slice(&planar);
    }
    let (h, w) = dims.expect("at least one frame");
    video_from_bytes(files.len(), h, w, &bytes)
}

/// Writes `frame_00000.ppm`, ... into `dir`, creating it if needed.
pub fn write_ppm_dir(dir: &Path, v: &VideoBuffer) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in 0..v.frames() {
        fs::write(dir.join(frame_file_name(t)), encode_ppm(v, t))?;
    }
    Ok(())
}

/// Raw-file metadata kept in the sidecar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMeta {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
}

impl RawMeta {
    pub fn to_text(&self) -> String {
        format!(
            "frames={}\nheight={}\nwidth={}\nfps={}\n",
            self.frames, self.height, self.width, self.fps
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut frames, mut height, mut width, mut fps) = (None, None, None, 30.0);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("sidecar line '{line}' is not key=value")))?;
            let bad = || Error::Format(format!("bad sidecar value '{line}'"));
            match k.trim() {
                "frames" => frames = Some(v.trim().parse().map_err(|_| bad())?),
                "height" => height = Some(v.trim().parse().map_err(|_| bad())?),
                "width" => width = Some(v.trim().parse().map_err(|_| bad())?),
                "fps" => fps = v.trim().parse().map_err(|_| bad())?,
                _ => {}
            }
        }
        let need = |v: Option<usize>, k: &str| v.ok_or_else(|| Error::Format(format!("sidecar lacks '{k}'")));
        Ok(Self {
            frames: need(frames, "frames")?,
            height: need(height, "height")?,
            width: need(width, "width")?,
            fps,
        })
    }
}

/// Sidecar path of a raw video: the raw path with `.meta` appended.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn read_raw(path: &Path) -> Result<VideoBuffer> {
    let meta = RawMeta::parse(&fs::read_to_string(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    let need = meta.frames * 3 * meta.height * meta.width;
    if bytes.len() != need {
        return Err(Error::Truncated(format!(
            "raw video {} has {} bytes, sidecar implies {need}",
            path.display(),
            bytes.len()
        )));
    }
    video_from_bytes(meta.frames, meta.height, meta.width, &bytes)
}

pub fn write_raw(path: &Path, v: &VideoBuffer, fps: f64) -> Result<()> {
    let meta = RawMeta {
        frames: v.frames(),
        height: v.height(),
        width: v.width(),
        fps,
    };
    fs::write(path, video_to_bytes(v))?;
    fs::write(sidecar_path(path), meta.to_text())?;
    Ok(())
}

/// Reads a PPM directory, or a raw file when `path` is not a directory.
pub fn read_video(path: &Path) -> Result<VideoBuffer> {
    if path.is_dir() {
        read_ppm_dir(path)
    } else {
        read_raw(path)
    }
}

/// `.rgb`/`.raw` paths get raw output; anything else becomes a PPM directory.
pub fn is_raw_path(path: &Path) -> bool {
    path.extension()
        .is_some_and(|x| x.eq_ignore_ascii_case("rgb") || x.eq_ignore_ascii_case("raw"))
}

pub fn write_video(path: &Path, v: &VideoBuffer) -> Result<()> {
    if is_raw_path(path) {
        write_raw(path, v, 30.0)
    } else {
        write_ppm_dir(path, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_byte_survives_the_real_domain() {
        for b in 0..=255u8 {
            assert_eq!(unit_to_byte(byte_to_unit(b)), b);
        }
        assert_eq!(byte_to_unit(255), 1.0);
        assert_eq!(byte_to_unit(0), 0.0);
        assert_eq!(unit_to_byte(1.7), 255);
        assert_eq!(unit_to_byte(-0.2), 0);
    }

    #[test]
    fn ppm_round_trip() {
        let bytes: Vec<u8> = (0..2 * 3 * 5 * 7).map(|i| (i * 37 % 256) as u8).collect();
        let v = video_from_bytes(2, 5, 7, &bytes).unwrap();
        for t in 0..2 {
            let (h, w, planar) = decode_ppm(&encode_ppm(&v, t)).unwrap();
            assert_eq!((h, w), (5, 7));
            assert_eq!(planar, bytes[t * 105..(t + 1) * 105]);
        }
    }

    #[test]
    fn ppm_header_comments_and_errors() {
        let mut img = b"P6 # comment\n2 1\n# another\n255\n".to_vec();
        img.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        assert_eq!(decode_ppm(&img).unwrap(), (1, 2, vec![1, 4, 2, 5, 3, 6]));
        assert!(decode_ppm(&img[..img.len() - 1]).is_err());
        assert!(decode_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0").is_err());
        assert!(decode_ppm(b"P6\n1").is_err());
    }

    #[test]
    fn sidecar_parsing() {
        let m = RawMeta {
            frames: 3,
            height: 4,
            width: 5,
            fps: 25.0,
        };
        assert_eq!(RawMeta::parse(&m.to_text()).unwrap(), m);
        assert!(RawMeta::parse("frames=3\nheight=4").is_err());
        assert!(RawMeta::parse("frames=x\nheight=4\nwidth=1").is_err());
        assert_eq!(sidecar_path(Path::new("a/b.rgb")), Path::new("a/b.rgb.meta"));
    }
}
