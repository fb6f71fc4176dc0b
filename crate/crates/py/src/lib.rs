//! Python bindings: images, noise synthesis, restoration and the codec.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use ::mbdl as core;
use core::codec::{CompressConfig, Mode};
use core::restore::RestorationConfig;

fn py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(py_err)
}

/// A bilevel raster; 1 is ink.
#[pyclass(name = "BinaryImage", module = "mbdl", from_py_object)]
#[derive(Clone)]
struct PyBinaryImage {
    inner: core::BinaryImage,
}

impl From<core::BinaryImage> for PyBinaryImage {
    fn from(inner: core::BinaryImage) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyBinaryImage {
    /// Blank image, or one built from `pixels` (row-major bytes of 0 and 1).
    #[new]
    #[pyo3(signature = (width, height, pixels=None))]
    fn new(width: usize, height: usize, pixels: Option<Vec<u8>>) -> PyResult<Self> {
        let inner = match pixels {
            Some(px) => core::BinaryImage::from_pixels(width, height, px),
            None => core::BinaryImage::new(width, height),
        };
        inner.map(Self::from).map_err(py_err)
    }

    /// Parse rows of `#` (ink) and `.`.
    #[staticmethod]
    fn from_ascii(rows: Vec<String>) -> PyResult<Self> {
        let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
        core::BinaryImage::from_ascii(&rows).map(Self::from).map_err(py_err)
    }

    /// Read a plain or raw PBM file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        core::pbm::load_any(path).map(Self::from).map_err(py_err)
    }

    /// Write a PBM file, raw unless `plain`.
    #[pyo3(signature = (path, plain=false))]
    fn save(&self, path: &str, plain: bool) -> PyResult<()> {
        let format = if plain {
            core::pbm::PbmFormat::Plain
        } else {
            core::pbm::PbmFormat::Raw
        };
        core::pbm::save_image(&self.inner, path, format).map_err(py_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn __getitem__(&self, index: (usize, usize)) -> PyResult<u8> {
        let (row, col) = index;
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err(format!("pixel ({row}, {col}) out of range")));
        }
        Ok(self.inner.at(row, col))
    }

    fn __setitem__(&mut self, index: (usize, usize), value: bool) -> PyResult<()> {
        let (row, col) = index;
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err(format!("pixel ({row}, {col}) out of range")));
        }
        self.inner.set(row, col, value);
        Ok(())
    }

    /// Row-major pixel bytes.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels())
    }

    fn count_ones(&self) -> usize {
        self.inner.count_ones()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "BinaryImage({}x{}, {} ink)",
            self.inner.width(),
            self.inner.height(),
            self.inner.count_ones()
        )
    }
}

/// Outcome of a restoration run.
#[pyclass(name = "Restoration", module = "mbdl", skip_from_py_object)]
struct PyRestoration {
    #[pyo3(get)]
    image: PyBinaryImage,
    /// Rows of (iteration, likelihood, prior, total, pixels flipped).
    #[pyo3(get)]
    trace: Vec<(usize, f64, f64, f64, usize)>,
    #[pyo3(get)]
    dictionary: Vec<PyBinaryImage>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    cost: f64,
}

fn restoration_config(sigma2: f64, max_iters: usize) -> RestorationConfig {
    RestorationConfig {
        filter_variance: sigma2,
        max_outer_iters: max_iters,
        ..RestorationConfig::default()
    }
}

/// Noisy observation of `clean`: Bernoulli pixels with the mean given by a
/// 3x3 Gaussian blur of variance `sigma2`.
#[pyfunction]
fn synthesize_noisy(clean: &PyBinaryImage, sigma2: f64, seed: u64) -> PyResult<PyBinaryImage> {
    let f = core::forward::build_filter(sigma2, 3).map_err(py_err)?;
    Ok(core::forward::synthesize_noisy(&clean.inner, &f, seed).into())
}

/// Number of differing pixels.
#[pyfunction]
fn error_count(a: &PyBinaryImage, b: &PyBinaryImage) -> PyResult<usize> {
    core::error_count(&a.inner, &b.inner).map(|d| d.0).map_err(py_err)
}

/// Generated text-like test page.
#[pyfunction]
#[pyo3(signature = (seed, width=640, height=512, glyphs=200))]
fn render_page(seed: u64, width: usize, height: usize, glyphs: usize) -> PyBinaryImage {
    let cfg = core::fixture::PageConfig { width, height, glyphs };
    core::fixture::render_page(&cfg, seed).into()
}

/// Restore a noisy page with the dictionary prior (`mbir-dl`) or the MRF
/// prior (`mbir-mrf`).
#[pyfunction]
#[pyo3(signature = (noisy, sigma2=0.2, mode="mbir-dl", max_iters=10))]
fn restore(
    py: Python<'_>,
    noisy: &PyBinaryImage,
    sigma2: f64,
    mode: &str,
    max_iters: usize,
) -> PyResult<PyRestoration> {
    let config = restoration_config(sigma2, max_iters);
    let y = noisy.inner.clone();
    let mode = parse_mode(mode)?;
    let state = py
        .detach(move || match mode {
            Mode::MbirDl => core::restore::restore(&y, &config),
            Mode::MbirMrf => core::restore::restore_mrf(&y, &config),
            m => Err(core::Error::Config(format!(
                "restore needs mbir-dl or mbir-mrf, not {m}"
            ))),
        })
        .map_err(py_err)?;
    Ok(PyRestoration {
        trace: state
            .trace
            .iter()
            .map(|t| {
                (
                    t.iteration,
                    t.likelihood_nats,
                    t.prior_nats,
                    t.total_nats,
                    t.pixels_flipped,
                )
            })
            .collect(),
        dictionary: state
            .dictionary
            .entries()
            .iter()
            .map(|e| e.bitmap.clone().into())
            .collect(),
        iterations: state.iteration,
        cost: state.total_cost(),
        image: state.image.into(),
    })
}

/// Compress `image` with one of `wxor-lossless`, `cee-lossless`, `mbir-mrf`
/// or `mbir-dl`. Returns the stream and a dict of sizes.
#[pyfunction]
#[pyo3(signature = (image, mode="cee-lossless", sigma2=0.2, max_iters=10))]
fn compress<'py>(
    py: Python<'py>,
    image: &PyBinaryImage,
    mode: &str,
    sigma2: f64,
    max_iters: usize,
) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyDict>)> {
    let config = CompressConfig {
        mode: parse_mode(mode)?,
        restoration: restoration_config(sigma2, max_iters),
        ..CompressConfig::default()
    };
    let x = image.inner.clone();
    let (bytes, report) = py.detach(move || core::codec::compress(&x, &config)).map_err(py_err)?;
    let info = PyDict::new(py);
    info.set_item("bytes", report.bytes)?;
    info.set_item("compression_ratio", report.compression_ratio())?;
    info.set_item("symbols", report.symbols)?;
    info.set_item("dictionary_entries", report.dictionary_entries)?;
    info.set_item("dictionary_bytes", report.segments.dictionary)?;
    info.set_item("placement_bytes", report.segments.placements)?;
    info.set_item("refinement_bytes", report.segments.refinements)?;
    info.set_item("residual_bytes", report.segments.residual)?;
    info.set_item("image", PyBinaryImage::from(report.image))?;
    Ok((PyBytes::new(py, &bytes), info))
}

/// Decode a stream produced by `compress`.
#[pyfunction]
fn decode(data: &[u8]) -> PyResult<PyBinaryImage> {
    core::codec::decode(data).map(PyBinaryImage::from).map_err(py_err)
}

#[pymodule]
fn mbdl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBinaryImage>()?;
    m.add_class::<PyRestoration>()?;
    m.add_function(wrap_pyfunction!(synthesize_noisy, m)?)?;
    m.add_function(wrap_pyfunction!(error_count, m)?)?;
    m.add_function(wrap_pyfunction!(render_page, m)?)?;
    m.add_function(wrap_pyfunction!(restore, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    Ok(())
}
