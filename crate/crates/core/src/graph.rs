//! Saliency graph over detected corners and its combinatorial Laplacian.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::harris::{diameter, CornerSet};
use crate::quadtree::neighbor_pairs;
use crate::Point;

/// Gaussian weights are cut off beyond this many connectivity radii.
pub const CUTOFF_RADII: f64 = 3.0;

/// Undirected weighted graph on corner positions.
///
/// `weights[(i, j)] = exp(-|c_i - c_j|^2 / (2 r^2 d^2))` for `i != j` within
/// `3 r d`, zero otherwise, where `d` is the point-set diameter.
#[derive(Debug, Clone)]
pub struct SaliencyGraph {
    pub nodes: Vec<Point>,
    pub weights: DMatrix<f64>,
    pub r: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    pub matrix: DMatrix<f64>,
    pub degree: DVector<f64>,
}

pub fn build_graph(corners: &CornerSet, r: f64) -> Result<SaliencyGraph> {
    build_graph_from_points(&corners.points(), r)
}

pub fn build_graph_from_points(nodes: &[Point], r: f64) -> Result<SaliencyGraph> {
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {r}"
        )));
    }
    if nodes.len() < 2 {
        return Err(Error::DegenerateGraph(format!("{} node(s)", nodes.len())));
    }
    let d_star = diameter(nodes);
    if d_star.is_nan() || d_star <= 0.0 {
        return Err(Error::DegenerateGraph("all nodes coincide".into()));
    }
    let n = nodes.len();
    let cutoff = CUTOFF_RADII * r * d_star;
    let mut weights = DMatrix::zeros(n, n);
    // the tree search is padded; the inclusive cutoff test below is authoritative
    for (i, j) in neighbor_pairs(nodes, cutoff * (1.0 + 1e-9)) {
        let d = nodes[i].dist(&nodes[j]);
        if d <= cutoff {
            let w = edge_weight(d / d_star, r);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
    }
    Ok(SaliencyGraph {
        nodes: nodes.to_vec(),
        weights,
        r,
        diameter: d_star,
    })
}

#[inline]
fn edge_weight(rel_dist: f64, r: f64) -> f64 {
    (-(rel_dist * rel_dist) / (2.0 * r * r)).exp()
}

impl SaliencyGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Average number of nonzero weights per node.
    pub fn mean_degree(&self) -> f64 {
        let edges = self.weights.iter().filter(|&&w| w != 0.0).count();
        edges as f64 / self.len() as f64
    }

    /// Edge list CSV preceded by a `#` block of node coordinates.
    pub fn to_edge_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# nodes={} r={} diameter={}",
            self.len(),
            self.r,
            self.diameter
        );
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "# node {i},{},{}", p.x, p.y);
        }
        s.push_str("i,j,weight\n");
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    let _ = writeln!(s, "{i},{j},{w:.17e}");
                }
            }
        }
        s
    }
}

pub fn laplacian(g: &SaliencyGraph) -> GraphLaplacian {
    laplacian_from_weights(&g.weights)
}

/// `E - W` with `E` the diagonal of row sums.
pub fn laplacian_from_weights(w: &DMatrix<f64>) -> GraphLaplacian {
    let degree: DVector<f64> = DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum()));
    let mut matrix = -w.clone();
    for i in 0..w.nrows() {
        matrix[(i, i)] += degree[i];
    }
    GraphLaplacian { matrix, degree }
}
