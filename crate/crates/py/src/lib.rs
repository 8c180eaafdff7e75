//! Python bindings. Models, cameras and images are opaque handles; plans and
//! reports cross the boundary as JSON strings so the schemas stay the ones
//! documented for the CLI.

use gscomp::adp::CandidateGrid;
use gscomp::foa::{self, CompressOptions, Constraint};
use gscomp::mpq::{self, ProbeGranularity, QuantizationPlan};
use gscomp::render::{self, ImageBuffer};
use gscomp::scenegen::{self, SceneSpec};
use gscomp::{fgc, importance, metrics, ply, Error};
use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Model", module = "gscomp_py")]
struct PyModel(gscomp::GaussianModel);

#[pymethods]
impl PyModel {
    #[new]
    fn new() -> Self {
        Self(gscomp::GaussianModel::new())
    }

    /// Build a model from a list of 59-float rows.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f32>>) -> PyResult<Self> {
        let mut m = gscomp::GaussianModel::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != gscomp::model::ROW_WIDTH {
                return Err(PyValueError::new_err(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    gscomp::model::ROW_WIDTH
                )));
            }
            m.push_row(r, false);
        }
        Ok(Self(m))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ply::load_ply(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        ply::write_ply(&self.0, path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Model(rows={}, sh_masked={})", self.0.len(), self.0.masked_rows())
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.0.len() {
            return Err(PyIndexError::new_err(format!("row {i} out of range")));
        }
        Ok(self.0.row(i).to_vec())
    }

    fn is_sh_masked(&self, i: usize) -> PyResult<bool> {
        if i >= self.0.len() {
            return Err(PyIndexError::new_err(format!("row {i} out of range")));
        }
        Ok(self.0.is_sh_masked(i))
    }

    /// Uncompressed size in bytes (59 little-endian floats per row).
    fn byte_size(&self) -> u64 {
        self.0.byte_size()
    }

    fn checksum(&self) -> u64 {
        self.0.checksum()
    }
}

#[pyclass(name = "Camera", module = "gscomp_py", from_py_object)]
#[derive(Clone)]
struct PyCamera(render::Camera);

#[pymethods]
impl PyCamera {
    #[staticmethod]
    #[pyo3(signature = (eye, target, width, height, fov_x_deg, up = [0.0, 0.0, 1.0]))]
    fn look_at(eye: [f64; 3], target: [f64; 3], width: u32, height: u32, fov_x_deg: f64, up: [f64; 3]) -> PyResult<Self> {
        let cam = render::Camera::look_at(eye, target, up, width, height, fov_x_deg.to_radians());
        cam.validate().map_err(to_py)?;
        Ok(Self(cam))
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    /// Pixel coordinates and depth of a world point, or None behind the camera.
    fn project(&self, point: [f64; 3]) -> Option<([f64; 2], f64)> {
        self.0.project_point(point)
    }
}

#[pyclass(name = "Image", module = "gscomp_py")]
struct PyImage(ImageBuffer);

#[pymethods]
impl PyImage {
    #[getter]
    fn width(&self) -> usize {
        self.0.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<[f32; 3]> {
        if x >= self.0.width || y >= self.0.height {
            return Err(PyIndexError::new_err(format!("pixel ({x}, {y}) out of range")));
        }
        Ok(self.0.pixel(x, y))
    }

    /// Row-major RGB floats.
    fn to_list(&self) -> Vec<f32> {
        self.0.rgb.clone()
    }

    fn mean(&self) -> f64 {
        self.0.mean_luminance()
    }
}

#[pyclass(name = "CompressResult", module = "gscomp_py", get_all)]
struct PyCompressResult {
    data: Py<PyBytes>,
    psnr_drop_db: f64,
    ssim: f64,
    input_bytes: u64,
    output_bytes: u64,
    ratio: f64,
    reduction_pct: f64,
    feasible: bool,
    evaluations: usize,
    plan_json: String,
    trace_jsonl: String,
}

fn cams(cameras: &[PyCamera]) -> Vec<render::Camera> {
    cameras.iter().map(|c| c.0.clone()).collect()
}

#[pyfunction]
fn load_cameras(path: &str) -> PyResult<Vec<PyCamera>> {
    Ok(render::load_cameras(path).map_err(to_py)?.into_iter().map(PyCamera).collect())
}

#[pyfunction]
fn save_cameras(cameras: Vec<PyCamera>, path: &str) -> PyResult<()> {
    render::save_cameras(&cams(&cameras), path).map_err(to_py)
}

/// Generate a synthetic scene; `spec_json` overrides the default spec fields.
#[pyfunction]
#[pyo3(signature = (spec_json = None))]
fn generate_scene(spec_json: Option<&str>) -> PyResult<(PyModel, Vec<PyCamera>)> {
    let spec: SceneSpec = match spec_json {
        Some(s) => serde_json::from_str(s).map_err(json_err)?,
        None => SceneSpec::default(),
    };
    let scene = scenegen::generate(&spec).map_err(to_py)?;
    Ok((PyModel(scene.model), scene.cameras.into_iter().map(PyCamera).collect()))
}

#[pyfunction]
fn render_view(py: Python<'_>, model: &PyModel, camera: &PyCamera) -> PyResult<PyImage> {
    let (img, _) = py
        .detach(|| render::render(&model.0, &camera.0, false))
        .map_err(to_py)?;
    Ok(PyImage(img))
}

#[pyfunction]
fn psnr(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    metrics::psnr(&a.0, &b.0).map_err(to_py)
}

#[pyfunction]
fn ssim(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    metrics::ssim(&a.0, &b.0).map_err(to_py)
}

/// Per-row importance scores.
#[pyfunction]
fn importance_scores(py: Python<'_>, model: &PyModel, cameras: Vec<PyCamera>) -> PyResult<Vec<f64>> {
    let cams = cams(&cameras);
    let s = py.detach(|| importance::compute_scores(&model.0, &cams)).map_err(to_py)?;
    Ok(s.scores)
}

/// INT4 gap in dB for each channel group, as (label, gap) pairs.
#[pyfunction]
#[pyo3(signature = (model, cameras, group_count = mpq::DEFAULT_GROUP_COUNT))]
fn sensitivity(
    py: Python<'_>,
    model: &PyModel,
    cameras: Vec<PyCamera>,
    group_count: u32,
) -> PyResult<Vec<(String, f64)>> {
    let cams = cams(&cameras);
    let eval = &cams[..cams.len().min(CompressOptions::default().max_eval_views)];
    let table = py
        .detach(|| {
            let base = render::render_views(&model.0, eval)?;
            mpq::probe_channel_sensitivity(&model.0, eval, &base, group_count, ProbeGranularity::Groups)
        })
        .map_err(to_py)?;
    Ok(table.entries.into_iter().map(|e| (e.label, e.gap_db)).collect())
}

/// Search for a plan meeting exactly one target and encode the model.
#[pyfunction]
#[pyo3(signature = (
    model, cameras, *, target_psnr_drop = None, target_bytes = None, target_ratio = None,
    plan_json = None, grid_json = None, joint = false, probe_sensitivity = false, input_bytes = None
))]
#[allow(clippy::too_many_arguments)]
fn compress(
    py: Python<'_>,
    model: &PyModel,
    cameras: Vec<PyCamera>,
    target_psnr_drop: Option<f64>,
    target_bytes: Option<u64>,
    target_ratio: Option<f64>,
    plan_json: Option<&str>,
    grid_json: Option<&str>,
    joint: bool,
    probe_sensitivity: bool,
    input_bytes: Option<u64>,
) -> PyResult<PyCompressResult> {
    let constraint = match (target_psnr_drop, target_bytes, target_ratio) {
        (Some(d), None, None) => Constraint::MaxPsnrDropDb(d),
        (None, Some(b), None) => Constraint::MaxCompressedBytes(b),
        (None, None, Some(r)) => Constraint::MinCompressionRatio(r),
        _ => return Err(PyValueError::new_err("exactly one target is required")),
    };
    let quant: QuantizationPlan = match plan_json {
        Some(s) => serde_json::from_str(s).map_err(json_err)?,
        None => QuantizationPlan::default(),
    };
    let grid: CandidateGrid = match grid_json {
        Some(s) => serde_json::from_str(s).map_err(json_err)?,
        None => CandidateGrid::default(),
    };
    let options = CompressOptions {
        grid,
        quant,
        joint,
        probe_sensitivity,
        input_bytes,
        ..Default::default()
    };
    let cams = cams(&cameras);
    let res = py
        .detach(|| foa::compress(&model.0, &cams, &constraint, &options))
        .map_err(to_py)?;
    Ok(PyCompressResult {
        data: PyBytes::new(py, &res.bytes).unbind(),
        psnr_drop_db: res.quality.psnr_drop_db,
        ssim: res.quality.ssim,
        input_bytes: res.input_bytes,
        output_bytes: res.output_bytes,
        ratio: res.ratio,
        reduction_pct: res.reduction_pct,
        feasible: res.feasible,
        evaluations: res.trace.evaluations(),
        plan_json: serde_json::to_string(&res.plan).map_err(json_err)?,
        trace_jsonl: res.trace.to_jsonl().map_err(to_py)?,
    })
}

/// Decode FGC bytes into a model.
#[pyfunction]
fn decompress(data: &[u8]) -> PyResult<PyModel> {
    let file = fgc::read_fgc(data).map_err(to_py)?;
    file.model.dequantize().map(PyModel).map_err(to_py)
}

/// Exact FGC size for the given row split and quantization plan.
#[pyfunction]
#[pyo3(signature = (n_full, n_sh_pruned, plan_json = None))]
fn estimate_size(n_full: usize, n_sh_pruned: usize, plan_json: Option<&str>) -> PyResult<u64> {
    let quant: QuantizationPlan = match plan_json {
        Some(s) => serde_json::from_str(s).map_err(json_err)?,
        None => QuantizationPlan::default(),
    };
    quant.validate().map_err(to_py)?;
    Ok(fgc::estimate_size(n_full, n_sh_pruned, &quant))
}

#[pymodule]
fn gscomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyCamera>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyCompressResult>()?;
    m.add_function(wrap_pyfunction!(load_cameras, m)?)?;
    m.add_function(wrap_pyfunction!(save_cameras, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(render_view, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(importance_scores, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(decompress, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_size, m)?)?;
    m.add("REFERENCE_PSNR_DB", metrics::REFERENCE_PSNR_DB)?;
    Ok(())
}
