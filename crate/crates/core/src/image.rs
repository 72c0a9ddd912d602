//! Grayscale rasters, decoding, Gaussian scale space and gradients.

use std::io::{Cursor, Write};
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};

/// Luminance weights applied to RGB input.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Unconstrained real-valued raster, row-major, indexed as `(x, y)`.
///
/// Used for intermediate fields (smoothed images, tensor planes, cornerness)
/// where values may leave the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "empty raster {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite value {v}")));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Quarter turn: the pixel at `(x, y)` moves to `(y, width - 1 - x)`.
    pub fn rot90(&self) -> Plane {
        let (w, h) = (self.width, self.height);
        let mut out = Plane::zeros(h, w);
        for y in 0..h {
            for x in 0..w {
                out.set(y, w - 1 - x, self.get(x, y));
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Plane) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Plane);

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        GrayImage::from_plane(Plane::new(width, height, data)?)
    }

    pub fn from_plane(plane: Plane) -> Result<Self> {
        if let Some(v) = plane.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(GrayImage(plane))
    }

    /// Builds an image from a closure, clamping each value into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        GrayImage(Plane::from_fn(width, height, |x, y| {
            let v = f(x, y);
            if v.is_nan() {
                0.0
            } else {
                v.clamp(0.0, 1.0)
            }
        }))
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        GrayImage::from_fn(width, height, |_, _| value)
    }

    pub fn as_plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    pub fn smoothed(&self, sigma: f64) -> Result<GrayImage> {
        // A normalised kernel yields convex combinations; clamp only rounding.
        let p = gaussian_smooth(&self.0, sigma)?;
        Ok(GrayImage(p.map(|v| v.clamp(0.0, 1.0))))
    }

    pub fn rot90(&self) -> GrayImage {
        GrayImage(self.0.rot90())
    }
}

impl Deref for GrayImage {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

/// Per-pixel image gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub gx: Plane,
    pub gy: Plane,
}

/// Maps an out-of-range index onto `0..n` by symmetric reflection
/// (`... c b a | a b c ... | c b a ...`).
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Normalised 1-D Gaussian taps on `-radius..=radius`, radius `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "smoothing scale must be positive, got {sigma}"
        )));
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Separable Gaussian convolution with reflect padding; output has the
/// input's dimensions.
pub fn gaussian_smooth(img: &Plane, sigma: f64) -> Result<Plane> {
    let taps = gaussian_kernel(sigma)?;
    let radius = (taps.len() / 2) as isize;
    let (w, h) = (img.width, img.height);

    let mut rows = Plane::zeros(w, h);
    for y in 0..h {
        let line = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xi = reflect_index(x as isize + k as isize - radius, w);
                acc += t * line[xi];
            }
            rows.data[y * w + x] = acc;
        }
    }

    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yi = reflect_index(y as isize + k as isize - radius, h);
                acc += t * rows.data[yi * w + x];
            }
            out.data[y * w + x] = acc;
        }
    }
    Ok(out)
}

/// Central differences inside, one-sided differences on the border.
pub fn gradient(img: &Plane) -> Result<GradientField> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidParameter(format!(
            "gradient needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let mut gx = Plane::zeros(w, h);
    let mut gy = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let dx = if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(w - 1, y) - img.get(w - 2, y)
            } else {
                (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0
            };
            let dy = if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, h - 1) - img.get(x, h - 2)
            } else {
                (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0
            };
            gx.set(x, y, dx);
            gy.set(x, y, dy);
        }
    }
    Ok(GradientField { gx, gy })
}

/// Reads a binary PGM (P5) or PNG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, path)
}

/// Decodes in-memory PGM or PNG bytes; `path` is only used in error messages.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes, path)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes, path)
    } else if bytes.len() < 2 {
        Err(decode_err(path, "file too short"))
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "expected binary PGM (P5) or PNG".into(),
        })
    }
}

fn decode_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(decode_err(path, "truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(decode_err(path, "malformed PGM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err(path, "PGM header value out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(decode_err(path, "truncated PGM header")),
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(decode_err(path, "zero PGM dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("PGM maxval {maxval}"),
        });
    }
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| decode_err(path, "PGM dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < n * sample_bytes {
        return Err(decode_err(
            path,
            format!(
                "PGM raster truncated: {} of {} bytes",
                raster.len(),
                n * sample_bytes
            ),
        ));
    }
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let v = if sample_bytes == 1 {
            raster[i] as usize
        } else {
            u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
        };
        if v > maxval {
            return Err(decode_err(
                path,
                format!("sample {v} exceeds maxval {maxval}"),
            ));
        }
        data.push(v as f64 / scale);
    }
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| decode_err(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err(path, "PNG too large"))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| decode_err(path, e.to_string()))?;

    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("PNG color type {other:?}"),
            })
        }
    };
    let (sample_bytes, maxval) = match info.bit_depth {
        png::BitDepth::Eight => (1, 255.0),
        png::BitDepth::Sixteen => (2, 65535.0),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("PNG bit depth {other:?}"),
            })
        }
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let sample = |row: &[u8], i: usize| -> f64 {
        if sample_bytes == 1 {
            row[i] as f64 / maxval
        } else {
            u16::from_be_bytes([row[2 * i], row[2 * i + 1]]) as f64 / maxval
        }
    };
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &buf[y * info.line_size..(y + 1) * info.line_size];
        for x in 0..w {
            let v = if channels == 1 {
                sample(row, x)
            } else {
                LUMA_WEIGHTS[0] * sample(row, 3 * x)
                    + LUMA_WEIGHTS[1] * sample(row, 3 * x + 1)
                    + LUMA_WEIGHTS[2] * sample(row, 3 * x + 2)
            };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(w, h, data)
}

/// Encodes a binary PGM with the given maxval (values above 255 use two
/// bytes per sample).
pub fn encode_pgm(img: &GrayImage, maxval: u16) -> Vec<u8> {
    let maxval = maxval.max(1);
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let m = maxval as f64;
    for &v in img.data() {
        let q = (v * m).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(&encode_pgm(img, maxval)).map_err(io_err)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn smoothing_is_linear(
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            seed in 0u64..1000, sigma in 0.4f64..3.0,
        ) {
            let f = Plane::from_fn(12, 9, |x, y| (((x * 31 + y * 17) as u64 * (seed + 3)) % 97) as f64 / 97.0);
            let g = Plane::from_fn(12, 9, |x, y| (((x * 11 + y * 29) as u64 * (seed + 7)) % 89) as f64 / 89.0);
            let combo = Plane::from_fn(12, 9, |x, y| a * f.get(x, y) + b * g.get(x, y));
            let lhs = gaussian_smooth(&combo, sigma).unwrap();
            let sf = gaussian_smooth(&f, sigma).unwrap();
            let sg = gaussian_smooth(&g, sigma).unwrap();
            let rhs = Plane::from_fn(12, 9, |x, y| a * sf.get(x, y) + b * sg.get(x, y));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }
}
