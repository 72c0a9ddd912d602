//! Laplacian eigenbasis, graph Fourier transform, the spectral hash and the
//! distances between hashes.
//!
//! A [`SpectralHash`] pairs the ascending Laplacian eigenvalues with the
//! magnitudes of the graph Fourier coefficients of the saliency signal.
//! Inside a group of (numerically) equal eigenvalues the individual
//! coefficients depend on an arbitrary choice of basis, so the group is
//! stored as its total energy at the group's first index followed by zeros.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::GraphLaplacian;
use crate::harris::CornerSet;
use crate::image::Plane;

/// Relative tolerance under which two eigenvalues are the same group.
pub const GROUP_TOLERANCE: f64 = 1e-8;

const SYMMETRY_TOLERANCE: f64 = 1e-9;
const CLAMP_TOLERANCE: f64 = 1e-9;

/// Orthonormal eigenbasis sorted by ascending eigenvalue; column `j` of
/// `vectors` belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct Eigenbasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Full symmetric eigendecomposition of a graph Laplacian.
///
/// Eigenvalues are clamped so that the first is exactly zero and none is
/// negative.
pub fn eigendecompose(lap: &GraphLaplacian) -> Result<Eigenbasis> {
    let m = &lap.matrix;
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asym = m
        .iter()
        .zip(m.transpose().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigenbasis {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }

    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut values: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v < 0.0 && v >= -CLAMP_TOLERANCE * scale {
                0.0
            } else {
                v
            }
        })
        .collect();
    values[0] = 0.0;
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigenbasis { values, vectors })
}

/// Half-open index ranges of consecutive eigenvalues closer than
/// `GROUP_TOLERANCE * max(1, lambda_max)` to their predecessor.
pub fn eigenvalue_groups(values: &[f64]) -> Vec<(usize, usize)> {
    let Some(&max) = values.last() else {
        return vec![];
    };
    let tol = GROUP_TOLERANCE * max.max(1.0);
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..values.len() {
        if values[i] - values[i - 1] > tol {
            groups.push((start, i));
            start = i;
        }
    }
    groups.push((start, values.len()));
    groups
}

/// Population variance of the intensities whose pixel centres lie in the
/// closed disk of radius `radius` around each point, clipped to the image.
pub fn local_variance(img: &Plane, centres: &[(f64, f64)], radius: f64) -> Vec<f64> {
    let r2 = radius * radius;
    let reach = radius.floor() as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    centres
        .iter()
        .map(|&(cx, cy)| {
            let (ix, iy) = (cx.round() as i64, cy.round() as i64);
            let mut values = Vec::new();
            for y in (iy - reach - 1).max(0)..=(iy + reach + 1).min(h - 1) {
                for x in (ix - reach - 1).max(0)..=(ix + reach + 1).min(w - 1) {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    if dx * dx + dy * dy <= r2 {
                        values.push(img.get(x as usize, y as usize));
                    }
                }
            }
            if values.is_empty() {
                return 0.0;
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect()
}

/// Saliency signal: local intensity variance within `sigma*` of each corner.
pub fn saliency_function(img: &Plane, corners: &CornerSet) -> Result<Vec<f64>> {
    if corners.sigma_star.is_nan() || corners.sigma_star < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "variance radius must be at least one pixel, got {}",
            corners.sigma_star
        )));
    }
    let centres: Vec<_> = corners
        .corners
        .iter()
        .map(|c| (c.x as f64, c.y as f64))
        .collect();
    Ok(local_variance(img, &centres, corners.sigma_star))
}

/// Graph Fourier transform `B^T f`.
pub fn gft(f: &[f64], vectors: &DMatrix<f64>) -> Result<Vec<f64>> {
    if vectors.nrows() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.nrows(),
            got: f.len(),
        });
    }
    let coeffs = vectors.transpose() * DVector::from_column_slice(f);
    Ok(coeffs.iter().copied().collect())
}

/// Laplacian spectrum with the aligned Fourier magnitudes of the saliency
/// signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralHash {
    pub eigenvalues: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub group_bounds: Vec<(usize, usize)>,
    pub sigma_star: f64,
    pub diameter: f64,
    pub r: f64,
}

impl SpectralHash {
    /// Builds the hash from ascending eigenvalues and raw GFT coefficients,
    /// folding each degenerate group into its energy.
    pub fn from_coefficients(eigenvalues: Vec<f64>, coefficients: &[f64]) -> Result<Self> {
        if eigenvalues.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                got: coefficients.len(),
            });
        }
        let group_bounds = eigenvalue_groups(&eigenvalues);
        let mut magnitudes = vec![0.0; coefficients.len()];
        for &(s, e) in &group_bounds {
            magnitudes[s] = if e - s == 1 {
                coefficients[s].abs()
            } else {
                coefficients[s..e].iter().map(|c| c * c).sum::<f64>().sqrt()
            };
        }
        Ok(SpectralHash {
            eigenvalues,
            magnitudes,
            group_bounds,
            sigma_star: 0.0,
            diameter: 0.0,
            r: 0.0,
        })
    }

    pub fn n_c(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `(sqrt(lambda), magnitude)` for each group starting before index `k`.
    fn breakpoints(&self, k: usize) -> Vec<(f64, f64)> {
        self.group_bounds
            .iter()
            .take_while(|&&(s, _)| s < k)
            .map(|&(s, _)| (self.eigenvalues[s].max(0.0).sqrt(), self.magnitudes[s]))
            .collect()
    }
}

/// Magnitudes of `f` sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedHash {
    pub values: Vec<f64>,
}

impl OrderedHash {
    pub fn n_c(&self) -> usize {
        self.values.len()
    }
}

pub fn ordered_hash(f: &[f64]) -> OrderedHash {
    let mut values: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    OrderedHash { values }
}

/// Number of leading entries the distances compare: `k` limited to the
/// shorter hash.
pub fn effective_k(a: &SpectralHash, b: &SpectralHash, k: usize) -> usize {
    k.min(a.n_c()).min(b.n_c())
}

/// Value at `t` of the piecewise-linear curve through `pts` (abscissae
/// strictly increasing), held constant outside their range.
fn interpolate(pts: &[(f64, f64)], t: f64) -> f64 {
    match pts.iter().position(|&(x, _)| x >= t) {
        None => pts.last().map_or(0.0, |p| p.1),
        Some(0) => pts[0].1,
        Some(i) => {
            let (x0, y0) = pts[i - 1];
            let (x1, y1) = pts[i];
            y0 + (y1 - y0) * (t - x0) / (x1 - x0)
        }
    }
}

/// L2 distance between the interpolated spectra on `[0, sqrt(min(lambda_k,
/// lambda'_k))]`, integrated exactly segment by segment.
pub fn distance_sp(a: &SpectralHash, b: &SpectralHash, k: usize) -> Result<f64> {
    let k = effective_k(a, b, k);
    if k < 2 {
        return Err(Error::UndefinedDistance(format!(
            "need at least 2 coefficients, have {k}"
        )));
    }
    let pa = a.breakpoints(k);
    let pb = b.breakpoints(k);
    if pa.len() < 2 || pb.len() < 2 {
        return Err(Error::UndefinedDistance(
            "spectrum has fewer than 2 distinct eigenvalues".into(),
        ));
    }
    let upper = a.eigenvalues[k - 1]
        .min(b.eigenvalues[k - 1])
        .max(0.0)
        .sqrt();

    let mut knots: Vec<f64> = pa
        .iter()
        .chain(&pb)
        .map(|p| p.0)
        .filter(|&x| x > 0.0 && x < upper)
        .collect();
    knots.push(0.0);
    knots.push(upper);
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let diff = |t: f64| interpolate(&pa, t) - interpolate(&pb, t);
    let mut total = 0.0;
    for seg in knots.windows(2) {
        let h = seg[1] - seg[0];
        let (d0, d1) = (diff(seg[0]), diff(seg[1]));
        total += h * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    Ok(total.max(0.0).sqrt())
}

/// Euclidean distance between the first `k` eigenvalues.
pub fn distance_delta(a: &SpectralHash, b: &SpectralHash, k: usize) -> f64 {
    let k = effective_k(a, b, k);
    a.eigenvalues[..k]
        .iter()
        .zip(&b.eigenvalues[..k])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean distance between ordered hashes truncated to the shorter one.
pub fn distance_ord(a: &OrderedHash, b: &OrderedHash) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn distance_combined(a: &SpectralHash, b: &SpectralHash, k: usize) -> Result<f64> {
    Ok(distance_sp(a, b, k)? * distance_delta(a, b, k))
}
