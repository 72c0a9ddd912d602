//! Similarity transforms of images and the rotation/scaling variant suites.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const MAX_CANVAS: usize = 16384;
pub const SCALE_RANGE: (f64, f64) = (0.5, 2.0);
/// Ranges used by the variant suites.
pub const SUITE_ANGLES: (f64, f64) = (0.0, PI);
pub const SUITE_SCALES: (f64, f64) = (0.8, 1.2);

/// Sample coordinates this close to an integer are snapped to it, so that
/// quarter turns are exact pixel permutations.
const SNAP: f64 = 1e-9;

/// Scale about the image centre, then rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec {
    /// Counter-clockwise angle in radians (y axis pointing down).
    pub rotation: f64,
    pub scale: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::identity()
    }
}

impl TransformSpec {
    pub const fn identity() -> Self {
        TransformSpec {
            rotation: 0.0,
            scale: 1.0,
            dx: 0.0,
            dy: 0.0,
        }
    }

    pub fn rotation(theta: f64) -> Self {
        TransformSpec {
            rotation: theta,
            ..Self::identity()
        }
    }

    pub fn scaling(xi: f64) -> Self {
        TransformSpec {
            scale: xi,
            ..Self::identity()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&self.scale) {
            return Err(Error::InvalidParameter(format!(
                "scale {} outside [{}, {}]",
                self.scale, SCALE_RANGE.0, SCALE_RANGE.1
            )));
        }
        if ![self.rotation, self.dx, self.dy]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite transform".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantMode {
    Rotations,
    Scalings,
    Mixed,
}

impl std::str::FromStr for VariantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotations" => Ok(VariantMode::Rotations),
            "scalings" => Ok(VariantMode::Scalings),
            "mixed" => Ok(VariantMode::Mixed),
            _ => Err(Error::InvalidParameter(format!(
                "unknown variant mode `{s}`"
            ))),
        }
    }
}

impl std::fmt::Display for VariantMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VariantMode::Rotations => "rotations",
            VariantMode::Scalings => "scalings",
            VariantMode::Mixed => "mixed",
        })
    }
}

/// Median of the outermost ring of pixels.
pub fn border_median(img: &GrayImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut ring = Vec::with_capacity(2 * (w + h));
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                ring.push(img.get(x, y));
            }
        }
    }
    ring.sort_by(f64::total_cmp);
    let n = ring.len();
    if n % 2 == 1 {
        ring[n / 2]
    } else {
        0.5 * (ring[n / 2 - 1] + ring[n / 2])
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

fn canvas_extent(v: f64) -> usize {
    (v - 1e-6).ceil().max(1.0) as usize
}

/// Applies `t` with bilinear resampling. The canvas grows to hold the whole
/// transformed image plus the translation; uncovered pixels take the median
/// border intensity of the input.
pub fn apply(img: &GrayImage, t: &TransformSpec) -> Result<GrayImage> {
    t.validate()?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (sin, cos) = t.rotation.sin_cos();
    let (a, b) = ((t.scale * cos).abs(), (t.scale * sin).abs());
    let bw = canvas_extent(a * w + b * h);
    let bh = canvas_extent(b * w + a * h);
    let pad = |d: f64| if d == 0.0 { 0 } else { canvas_extent(d.abs()) };
    let out_w = bw + pad(t.dx);
    let out_h = bh + pad(t.dy);
    if out_w > MAX_CANVAS || out_h > MAX_CANVAS {
        return Err(Error::CanvasTooLarge {
            width: out_w,
            height: out_h,
        });
    }

    let background = border_median(img);
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let ocx = (bw as f64 - 1.0) / 2.0 + t.dx.max(0.0);
    let ocy = (bh as f64 - 1.0) / 2.0 + t.dy.max(0.0);
    let fetch = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
            background
        } else {
            img.get(x as usize, y as usize)
        }
    };

    // inverse map p = R^-1 (q - c') / scale + c, with R turning +x towards -y
    let out = GrayImage::from_fn(out_w, out_h, |qx, qy| {
        let (ux, uy) = (qx as f64 - ocx, qy as f64 - ocy);
        let px = snap((cos * ux - sin * uy) / t.scale + cx);
        let py = snap((sin * ux + cos * uy) / t.scale + cy);
        if px <= -1.0 || py <= -1.0 || px >= w || py >= h {
            return background;
        }
        let (x0, y0) = (px.floor(), py.floor());
        let (fx, fy) = (px - x0, py - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        if fx == 0.0 && fy == 0.0 {
            return fetch(x0, y0);
        }
        let top = fetch(x0, y0) * (1.0 - fx) + fetch(x0 + 1, y0) * fx;
        let bottom = fetch(x0, y0 + 1) * (1.0 - fx) + fetch(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    });
    Ok(out)
}

/// The transform parameters of a variant suite, without applying them.
pub fn suite_specs(mode: VariantMode, count: usize, seed: u64) -> Vec<TransformSpec> {
    let spread = |i: usize, (lo, hi): (f64, f64)| {
        if count <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (count - 1) as f64
        }
    };
    match mode {
        VariantMode::Rotations => (0..count)
            .map(|i| TransformSpec::rotation(spread(i, SUITE_ANGLES)))
            .collect(),
        VariantMode::Scalings => (0..count)
            .map(|i| TransformSpec::scaling(spread(i, SUITE_SCALES)))
            .collect(),
        VariantMode::Mixed => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let theta = rng.gen_range(SUITE_ANGLES.0..=SUITE_ANGLES.1);
                    let xi = rng.gen_range(SUITE_SCALES.0..=SUITE_SCALES.1);
                    TransformSpec {
                        rotation: theta,
                        scale: xi,
                        ..TransformSpec::identity()
                    }
                })
                .collect()
        }
    }
}

pub fn variant_suite(
    img: &GrayImage,
    mode: VariantMode,
    count: usize,
    seed: u64,
) -> Result<Vec<(TransformSpec, GrayImage)>> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "variant count must be at least 1".into(),
        ));
    }
    suite_specs(mode, count, seed)
        .into_iter()
        .map(|t| apply(img, &t).map(|v| (t, v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_image(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
            0.5 + 0.2 * (2.0 * PI * u).sin() * (PI * v).cos() + 0.1 * (2.0 * PI * (u + v)).cos()
        })
    }

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| ((x * 7 + y * 3 + x * y) % 13) as f64 / 13.0)
    }

    #[test]
    fn identity_is_exact() {
        let img = textured(21, 14);
        assert_eq!(apply(&img, &TransformSpec::identity()).unwrap(), img);
    }

    #[test]
    fn quarter_turn_is_a_permutation() {
        let img = textured(16, 16);
        let rot = apply(&img, &TransformSpec::rotation(PI / 2.0)).unwrap();
        assert_eq!((rot.width(), rot.height()), (16, 16));
        // counter-clockwise on screen matches Plane::rot90
        assert_eq!(rot, img.rot90());
        let half = apply(&img, &TransformSpec::rotation(PI)).unwrap();
        assert_eq!(half, img.rot90().rot90());
        let three = apply(&img, &TransformSpec::rotation(1.5 * PI)).unwrap();
        assert_eq!(three, img.rot90().rot90().rot90());
    }

    #[test]
    fn quarter_turn_of_rectangle() {
        let img = textured(20, 11);
        let rot = apply(&img, &TransformSpec::rotation(PI / 2.0)).unwrap();
        assert_eq!(rot, img.rot90());
    }

    #[test]
    fn integer_translation_pads() {
        let img = textured(9, 7);
        let t = TransformSpec {
            dx: 3.0,
            dy: -2.0,
            ..TransformSpec::identity()
        };
        let out = apply(&img, &t).unwrap();
        assert_eq!((out.width(), out.height()), (12, 9));
        for y in 0..7 {
            for x in 0..9 {
                assert_eq!(out.get(x + 3, y), img.get(x, y));
            }
        }
    }

    #[test]
    fn scale_roundtrip_on_smooth_image() {
        let img = smooth_image(64, 48);
        let up = apply(&img, &TransformSpec::scaling(2.0)).unwrap();
        assert_eq!((up.width(), up.height()), (128, 96));
        let back = apply(&up, &TransformSpec::scaling(0.5)).unwrap();
        assert_eq!((back.width(), back.height()), (64, 48));
        let mae = back
            .data()
            .iter()
            .zip(img.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / img.len() as f64;
        assert!(mae < 0.01, "mae {mae}");
    }

    #[test]
    fn composed_rotations_stay_close() {
        let img = GrayImage::from_fn(80, 80, |x, y| {
            let (dx, dy) = (x as f64 - 39.5, y as f64 - 39.5);
            let r2 = dx * dx + dy * dy;
            0.2 + 0.5 * (-r2 / 600.0).exp() + 0.1 * (dx / 9.0).sin() * (-r2 / 900.0).exp()
        });
        let (t1, t2) = (0.4, 0.7);
        let twice = apply(
            &apply(&img, &TransformSpec::rotation(t1)).unwrap(),
            &TransformSpec::rotation(t2),
        )
        .unwrap();
        let once = apply(&img, &TransformSpec::rotation(t1 + t2)).unwrap();
        // compare on the common centred window
        let (w, h) = (
            once.width().min(twice.width()),
            once.height().min(twice.height()),
        );
        let (ox1, oy1) = ((once.width() - w) / 2, (once.height() - h) / 2);
        let (ox2, oy2) = ((twice.width() - w) / 2, (twice.height() - h) / 2);
        let mut err = 0.0;
        for y in 0..h {
            for x in 0..w {
                err += (once.get(x + ox1, y + oy1) - twice.get(x + ox2, y + oy2)).abs();
            }
        }
        let mae = err / (w * h) as f64;
        assert!(mae < 0.02, "mae {mae}");
    }

    #[test]
    fn background_is_border_median() {
        let mut data = vec![0.0; 25];
        data[12] = 1.0;
        let img = GrayImage::new(5, 5, data).unwrap();
        assert_eq!(border_median(&img), 0.0);
        let rot = apply(&img, &TransformSpec::rotation(PI / 4.0)).unwrap();
        assert_eq!(rot.get(0, 0), 0.0);
    }

    #[test]
    fn scale_out_of_range_rejected() {
        let img = textured(8, 8);
        assert!(apply(&img, &TransformSpec::scaling(2.5)).is_err());
        assert!(apply(&img, &TransformSpec::scaling(0.4)).is_err());
    }

    #[test]
    fn oversized_canvas_rejected() {
        let img = GrayImage::constant(9000, 2, 0.5);
        assert!(matches!(
            apply(&img, &TransformSpec::scaling(2.0)),
            Err(Error::CanvasTooLarge { .. })
        ));
    }

    #[test]
    fn suites_cover_their_ranges() {
        let rot = suite_specs(VariantMode::Rotations, 9, 0);
        for (i, t) in rot.iter().enumerate() {
            assert!((t.rotation - i as f64 * PI / 8.0).abs() < 1e-15);
            assert_eq!(t.scale, 1.0);
        }
        let sc = suite_specs(VariantMode::Scalings, 9, 0);
        for (i, t) in sc.iter().enumerate() {
            assert!((t.scale - (0.8 + 0.05 * i as f64)).abs() < 1e-12);
        }
        let a = suite_specs(VariantMode::Mixed, 9, 42);
        assert_eq!(a, suite_specs(VariantMode::Mixed, 9, 42));
        assert_ne!(a, suite_specs(VariantMode::Mixed, 9, 43));
        assert!(a
            .iter()
            .all(|t| (0.0..=PI).contains(&t.rotation) && (0.8..=1.2).contains(&t.scale)));
    }

    #[test]
    fn variant_suite_applies_each_spec() {
        let img = textured(12, 12);
        let v = variant_suite(&img, VariantMode::Rotations, 3, 0).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v[0].1, img);
        assert!(variant_suite(&img, VariantMode::Mixed, 0, 0).is_err());
    }
}
