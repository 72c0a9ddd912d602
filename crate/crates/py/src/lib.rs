use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use ish_core::eval::{roc_from_scores, Metric};
use ish_core::hashfile::{HashRecord, FORMAT_VERSION};
use ish_core::transform::TransformSpec;
use ish_core::{Error, GrayImage, HashParams};

create_exception!(ish, IshError, PyException);
create_exception!(ish, NoCornersError, IshError);

fn to_py(e: Error) -> PyErr {
    match e.root() {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::InvalidParameter(_) | Error::InvalidImage(_) => PyValueError::new_err(e.to_string()),
        Error::NoCorners => NoCornersError::new_err(e.to_string()),
        _ => IshError::new_err(e.to_string()),
    }
}

/// Grayscale image with intensities in [0, 1].
#[pyclass(name = "Image", module = "ish", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage(GrayImage);

#[pymethods]
impl PyImage {
    /// Builds an image from row-major intensities.
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        GrayImage::new(width, height, data)
            .map(PyImage)
            .map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    /// Row-major intensities.
    fn pixels(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    /// Quarter turn counter-clockwise.
    fn rot90(&self) -> Self {
        PyImage(self.0.rot90())
    }

    /// Scales about the centre, rotates counter-clockwise by `rotation`
    /// radians and shifts by (`dx`, `dy`).
    #[pyo3(signature = (rotation=0.0, scale=1.0, dx=0.0, dy=0.0))]
    fn transform(&self, rotation: f64, scale: f64, dx: f64, dy: f64) -> PyResult<Self> {
        let spec = TransformSpec {
            rotation,
            scale,
            dx,
            dy,
        };
        ish_core::transform::apply(&self.0, &spec)
            .map(PyImage)
            .map_err(to_py)
    }

    fn save_pgm(&self, path: &str) -> PyResult<()> {
        ish_core::image::save_pgm(&self.0, path, 255).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

/// Hashing parameters.
#[pyclass(name = "Params", module = "ish", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    sigma0: f64,
    rho: f64,
    kappa: f64,
    r: f64,
    max_corners: usize,
    k: usize,
}

impl PyParams {
    fn core(&self) -> PyResult<HashParams> {
        let p = HashParams {
            sigma0: self.sigma0,
            rho: self.rho,
            kappa: self.kappa,
            r: self.r,
            max_corners: self.max_corners,
            k: self.k,
        };
        p.validate().map_err(to_py)?;
        Ok(p)
    }
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut p = HashParams::default();
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                p.set(&key, &value.str()?.to_cow()?).map_err(to_py)?;
            }
        }
        Ok(PyParams {
            sigma0: p.sigma0,
            rho: p.rho,
            kappa: p.kappa,
            r: p.r,
            max_corners: p.max_corners,
            k: p.k,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(sigma0={}, rho={}, kappa={}, r={}, max_corners={}, k={})",
            self.sigma0, self.rho, self.kappa, self.r, self.max_corners, self.k
        )
    }
}

fn params_or_default(params: Option<&PyParams>) -> PyResult<HashParams> {
    params.map_or_else(|| Ok(HashParams::default()), PyParams::core)
}

/// Spectral hash of one image together with its ordered hash.
#[pyclass(name = "Hash", module = "ish", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyHash(HashRecord);

#[pymethods]
impl PyHash {
    #[getter]
    fn n_c(&self) -> usize {
        self.0.hash.n_c()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.hash.eigenvalues.clone()
    }

    #[getter]
    fn magnitudes(&self) -> Vec<f64> {
        self.0.hash.magnitudes.clone()
    }

    #[getter]
    fn ordered(&self) -> Vec<f64> {
        self.0.ordered.values.clone()
    }

    #[getter]
    fn sigma_star(&self) -> f64 {
        self.0.hash.sigma_star
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.0.hash.diameter
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_binary())
    }

    /// Parses either the text or the binary encoding.
    #[staticmethod]
    fn parse(data: &[u8]) -> PyResult<Self> {
        HashRecord::parse(data).map(PyHash).map_err(to_py)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Hash(n_c={})", self.0.hash.n_c())
    }
}

/// Reads a binary PGM or PNG file.
#[pyfunction]
fn load_image(path: &str) -> PyResult<PyImage> {
    ish_core::image::load_image(path)
        .map(PyImage)
        .map_err(to_py)
}

/// Corners as `(x, y, cornerness)` tuples, strongest first.
#[pyfunction]
#[pyo3(signature = (image, params=None))]
fn detect(image: &PyImage, params: Option<&PyParams>) -> PyResult<Vec<(usize, usize, f64)>> {
    let set = ish_core::detect_adaptive(&image.0, &params_or_default(params)?).map_err(to_py)?;
    Ok(set
        .corners
        .iter()
        .map(|c| (c.x, c.y, c.cornerness))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (image, params=None))]
fn compute_ish(py: Python<'_>, image: &PyImage, params: Option<&PyParams>) -> PyResult<PyHash> {
    let params = params_or_default(params)?;
    let img = image.0.clone();
    let analysis = py
        .detach(|| ish_core::analyze(&img, &params))
        .map_err(to_py)?;
    let pixels: Vec<u8> = img.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    Ok(PyHash(HashRecord::new(
        analysis.spectral,
        analysis.ordered,
        &pixels,
    )))
}

/// Distance between two hashes under `metric` ("ord", "sp" or "sp_delta").
#[pyfunction]
#[pyo3(signature = (a, b, metric="sp", k=10))]
fn distance(a: &PyHash, b: &PyHash, metric: &str, k: usize) -> PyResult<f64> {
    let metric: Metric = metric.parse().map_err(to_py)?;
    let (a, b) = (&a.0, &b.0);
    match metric {
        Metric::Ord => Ok(ish_core::distance_ord(&a.ordered, &b.ordered)),
        Metric::Sp => ish_core::distance_sp(&a.hash, &b.hash, k).map_err(to_py),
        Metric::SpDelta => ish_core::distance_combined(&a.hash, &b.hash, k).map_err(to_py),
    }
}

/// `(threshold, fpr, tpr)` for one ROC point.
type RocRow = (f64, f64, f64);

/// ROC of "similar iff distance < threshold" over `(distance, similar)`
/// pairs: returns `(auc, [(threshold, fpr, tpr), ...])`.
#[pyfunction]
fn roc(scores: Vec<(f64, bool)>) -> PyResult<(f64, Vec<RocRow>)> {
    let report = roc_from_scores(scores).map_err(to_py)?;
    let points = report
        .points
        .iter()
        .map(|p| (p.threshold, p.fpr, p.tpr))
        .collect();
    Ok((report.auc, points))
}

/// `count` synthetic test images of `size` x `size` pixels.
#[pyfunction]
#[pyo3(signature = (count, size=320, seed=1))]
fn synth_corpus(count: usize, size: usize, seed: u64) -> Vec<PyImage> {
    ish_core::synth::corpus(count, size, seed)
        .into_iter()
        .map(PyImage)
        .collect()
}

#[pymodule]
fn ish(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FORMAT_VERSION", FORMAT_VERSION)?;
    m.add("IshError", m.py().get_type::<IshError>())?;
    m.add("NoCornersError", m.py().get_type::<NoCornersError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyHash>()?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(compute_ish, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(roc, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    Ok(())
}
