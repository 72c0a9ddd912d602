//! Smoothed Harris corner detection with object-dependent scale selection.
//!
//! The structure tensor is built from the gradient of the image smoothed at
//! scale `sigma` and integrated with a Gaussian window at `tau = 3 sigma`.
//! Corners are strict 8-neighbourhood maxima of the cornerness
//! `det J - kappa tr(J)^2`. [`detect_adaptive`] runs a first pass at a small
//! scale, measures the diameter of the detected points and re-detects at a
//! scale proportional to that diameter, so the final point set scales with
//! the imaged object.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::image::{gaussian_smooth, gradient, Plane};
use crate::params::HashParams;
use crate::Point;

/// Ratio between the integration window and the differentiation scale.
pub const TAU_OVER_SIGMA: f64 = 3.0;

/// Maxima below this fraction of the strongest cornerness are treated as
/// round-off and dropped.
const CORNERNESS_FLOOR: f64 = 1e-12;

/// Gaussian-windowed gradient outer products.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub jxx: Plane,
    pub jxy: Plane,
    pub jyy: Plane,
    pub sigma: f64,
    pub tau: f64,
}

impl TensorField {
    pub fn trace(&self) -> Plane {
        Plane::from_fn(self.jxx.width(), self.jxx.height(), |x, y| {
            self.jxx.get(x, y) + self.jyy.get(x, y)
        })
    }

    pub fn det(&self) -> Plane {
        Plane::from_fn(self.jxx.width(), self.jxx.height(), |x, y| {
            let xy = self.jxy.get(x, y);
            self.jxx.get(x, y) * self.jyy.get(x, y) - xy * xy
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: usize,
    pub y: usize,
    pub cornerness: f64,
}

impl Corner {
    pub fn point(&self) -> Point {
        Point::new(self.x as f64, self.y as f64)
    }
}

/// Detected corners sorted by decreasing cornerness, with the scale they
/// were detected at and the diameter of the point set.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSet {
    pub corners: Vec<Corner>,
    pub sigma_star: f64,
    pub diameter: f64,
}

impl CornerSet {
    pub fn new(corners: Vec<Corner>, sigma_star: f64) -> Self {
        let diameter = diameter(&corners.iter().map(Corner::point).collect::<Vec<_>>());
        CornerSet {
            corners,
            sigma_star,
            diameter,
        }
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn points(&self) -> Vec<Point> {
        self.corners.iter().map(Corner::point).collect()
    }

    /// `x,y,cornerness` rows preceded by a `#` line with the scale, diameter
    /// and count.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# sigma_star={},diameter={},n_c={}\nx,y,cornerness\n",
            self.sigma_star,
            self.diameter,
            self.len()
        );
        for c in &self.corners {
            s.push_str(&format!("{},{},{:.17e}\n", c.x, c.y, c.cornerness));
        }
        s
    }
}

pub fn structure_tensor(img: &Plane, sigma: f64) -> Result<TensorField> {
    let tau = TAU_OVER_SIGMA * sigma;
    let smoothed = gaussian_smooth(img, sigma)?;
    let g = gradient(&smoothed)?;
    let (w, h) = (img.width(), img.height());
    let xx = Plane::from_fn(w, h, |x, y| g.gx.get(x, y) * g.gx.get(x, y));
    let xy = Plane::from_fn(w, h, |x, y| g.gx.get(x, y) * g.gy.get(x, y));
    let yy = Plane::from_fn(w, h, |x, y| g.gy.get(x, y) * g.gy.get(x, y));
    Ok(TensorField {
        jxx: gaussian_smooth(&xx, tau)?,
        jxy: gaussian_smooth(&xy, tau)?,
        jyy: gaussian_smooth(&yy, tau)?,
        sigma,
        tau,
    })
}

pub fn cornerness(field: &TensorField, kappa: f64) -> Plane {
    Plane::from_fn(field.jxx.width(), field.jxx.height(), |x, y| {
        let (a, b, c) = (
            field.jxx.get(x, y),
            field.jxy.get(x, y),
            field.jyy.get(x, y),
        );
        let tr = a + c;
        a * c - b * b - kappa * tr * tr
    })
}

/// Orders by decreasing cornerness, then by `(y, x)` ascending.
fn rank(a: &Corner, b: &Corner) -> Ordering {
    b.cornerness
        .total_cmp(&a.cornerness)
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
}

/// Positive pixels strictly greater than every existing 8-neighbour, the
/// strongest `max_count` of them.
pub fn local_maxima(c: &Plane, max_count: usize) -> Vec<Corner> {
    let (w, h) = (c.width(), c.height());
    let peak = c.data().iter().copied().fold(0.0, f64::max);
    let floor = peak * CORNERNESS_FLOOR;
    let mut found = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = c.get(x, y);
            if v.is_nan() || v <= 0.0 || v <= floor {
                continue;
            }
            let mut is_max = true;
            'nb: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) && c.get(nx, ny) >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                found.push(Corner {
                    x,
                    y,
                    cornerness: v,
                });
            }
        }
    }
    found.sort_by(rank);
    found.truncate(max_count);
    found
}

/// Single-scale detection.
pub fn detect(img: &Plane, sigma: f64, kappa: f64, max_count: usize) -> Result<CornerSet> {
    if max_count == 0 {
        return Err(Error::InvalidParameter(
            "max_count must be at least 1".into(),
        ));
    }
    let field = structure_tensor(img, sigma)?;
    let c = cornerness(&field, kappa);
    Ok(CornerSet::new(local_maxima(&c, max_count), sigma))
}

/// Two-round detection: a dense pass at `sigma0`, then a pass at
/// `sigma* = max(rho * diam, sigma0)`.
pub fn detect_adaptive(img: &Plane, params: &HashParams) -> Result<CornerSet> {
    params.validate()?;
    let first = detect(img, params.sigma0, params.kappa, params.max_corners)?;
    if first.is_empty() {
        return Err(Error::NoCorners);
    }
    let sigma_star = (params.rho * first.diameter).max(params.sigma0);
    let second = detect(img, sigma_star, params.kappa, params.max_corners)?;
    if second.is_empty() {
        return Err(Error::NoCorners);
    }
    Ok(second)
}

/// Largest pairwise Euclidean distance, 0 for fewer than two points.
pub fn diameter(points: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.dist2(b));
        }
    }
    best.sqrt()
}
