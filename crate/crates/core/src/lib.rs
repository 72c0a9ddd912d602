//! Invariant spectral image hashing.
//!
//! An image is summarised by the salient points found by a smoothed Harris
//! detector at an object-dependent scale, a Gaussian-weighted graph joining
//! neighbouring points, and the graph Fourier transform of a local-variance
//! signal living on that graph. The magnitudes of the transform, paired with
//! the Laplacian eigenvalues, form a hash that does not depend on point order
//! and follows the image through rotation, translation and scaling.
//!
//! The crate also carries the machinery used to evaluate such hashes: image
//! transformations, ROC/AUC computation and a synthetic test corpus.

pub mod error;
pub mod eval;
pub mod graph;
pub mod harris;
pub mod hashfile;
pub mod image;
pub mod params;
pub mod pipeline;
pub mod quadtree;
pub mod spectral;
pub mod synth;
pub mod transform;

pub use error::{Error, Result, Stage};
pub use graph::{build_graph, laplacian, GraphLaplacian, SaliencyGraph};
pub use harris::{detect_adaptive, Corner, CornerSet};
pub use image::{GradientField, GrayImage, Plane};
pub use params::HashParams;
pub use pipeline::{analyze, compute_ish, Analysis};
pub use spectral::{
    distance_combined, distance_delta, distance_ord, distance_sp, ordered_hash, OrderedHash,
    SpectralHash,
};

/// 2-D point in pixel coordinates, x to the right and y downwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}
