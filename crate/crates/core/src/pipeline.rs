//! End-to-end hashing of one image.

use crate::error::{Error, Result, Stage};
use crate::graph::{build_graph, laplacian, SaliencyGraph};
use crate::harris::{detect_adaptive, CornerSet};
use crate::image::Plane;
use crate::params::HashParams;
use crate::spectral::{
    eigendecompose, gft, ordered_hash, saliency_function, OrderedHash, SpectralHash,
};

/// Everything the pipeline produces for one image.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub corners: CornerSet,
    pub graph: SaliencyGraph,
    /// Saliency signal, one value per corner.
    pub saliency: Vec<f64>,
    pub spectral: SpectralHash,
    pub ordered: OrderedHash,
}

/// Detect, build the graph, decompose, sample the saliency signal and
/// transform it. Errors carry the stage they came from.
pub fn analyze(img: &Plane, params: &HashParams) -> Result<Analysis> {
    params.validate()?;
    let corners = detect_adaptive(img, params).map_err(Error::at(Stage::Detect))?;
    let graph = build_graph(&corners, params.r).map_err(Error::at(Stage::Graph))?;
    let mean_degree = graph.mean_degree();
    if !(3.0..=8.0).contains(&mean_degree) {
        log::debug!("saliency graph mean degree {mean_degree:.2} outside [3, 8]");
    }
    let basis = eigendecompose(&laplacian(&graph)).map_err(Error::at(Stage::Spectrum))?;
    let saliency = saliency_function(img, &corners).map_err(Error::at(Stage::Saliency))?;
    let coefficients = gft(&saliency, &basis.vectors).map_err(Error::at(Stage::Spectrum))?;
    let mut spectral = SpectralHash::from_coefficients(basis.values, &coefficients)
        .map_err(Error::at(Stage::Spectrum))?;
    spectral.sigma_star = corners.sigma_star;
    spectral.diameter = graph.diameter;
    spectral.r = params.r;
    let ordered = ordered_hash(&saliency);
    Ok(Analysis {
        corners,
        graph,
        saliency,
        spectral,
        ordered,
    })
}

pub fn compute_ish(img: &Plane, params: &HashParams) -> Result<SpectralHash> {
    analyze(img, params).map(|a| a.spectral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;

    #[test]
    fn blank_image_fails_at_detection() {
        let err =
            compute_ish(&GrayImage::constant(50, 50, 0.2), &HashParams::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::HashFailure {
                stage: Stage::Detect,
                ..
            }
        ));
        assert!(err.is_no_corners());
    }

    #[test]
    fn single_corner_fails_at_graph() {
        // one bright quadrant touching the border leaves a single interior corner
        let img = GrayImage::from_fn(60, 60, |x, y| if x >= 30 && y >= 30 { 0.9 } else { 0.1 });
        match compute_ish(&img, &HashParams::default()) {
            Err(Error::HashFailure { stage, .. }) => assert_eq!(stage, Stage::Graph),
            Ok(h) => assert!(h.n_c() >= 2),
            Err(e) => panic!("unexpected {e}"),
        }
    }
}
