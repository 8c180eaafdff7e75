//! CPU reference rasterizer: EWA projection, per-tile depth sort and
//! front-to-back alpha blending over a black background.
//!
//! Pixel `(i, j)` samples the image plane at `(i, j)`, so a Gaussian that
//! projects to `(cx, cy)` with integral principal point is centered on a pixel.
//! A Gaussian touches a pixel when the pixel lies inside its 3σ ellipse and its
//! alpha `opacity · exp(-d²/2)` is at least 1/255. Blending stops once the
//! remaining transmittance drops below 1e-4.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GaussianModel;
use crate::sh;

pub const TILE_SIZE: usize = 16;
pub const NEAR_PLANE: f64 = 0.01;
pub const LOW_PASS: f64 = 0.3;
pub const MIN_ALPHA: f32 = 1.0 / 255.0;
pub const MIN_TRANSMITTANCE: f32 = 1e-4;
/// Squared Mahalanobis radius of the 3σ footprint.
const FOOTPRINT_D2: f32 = 9.0;

/// Pinhole camera with an OpenCV-style frame (x right, y down, z forward).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major 4×4 rigid transform.
    pub world_to_camera: [f64; 16],
}

impl Camera {
    /// Camera at `eye` looking at `target`, with horizontal field of view
    /// `fov_x` in radians and square pixels.
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        width: u32,
        height: u32,
        fov_x: f64,
    ) -> Camera {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye).normalize();
        let right = forward.cross(&Vector3::from(up)).normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(rot * eye);
        let f = (width as f64 / 2.0) / (fov_x / 2.0).tan();
        let mut m = [0.0; 16];
        for r in 0..3 {
            for c in 0..3 {
                m[r * 4 + c] = rot[(r, c)];
            }
            m[r * 4 + 3] = t[r];
        }
        m[15] = 1.0;
        Camera {
            width,
            height,
            fx: f,
            fy: f,
            cx: (width / 2) as f64,
            cy: (height / 2) as f64,
            world_to_camera: m,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let m = &self.world_to_camera;
        Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10])
    }

    pub fn translation(&self) -> Vector3<f64> {
        let m = &self.world_to_camera;
        Vector3::new(m[3], m[7], m[11])
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.translation())
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Camera(format!(
                "image size {}x{} is empty",
                self.width, self.height
            )));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Camera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.world_to_camera.iter().any(|v| !v.is_finite()) {
            return Err(Error::Camera("non-finite pose".into()));
        }
        let m = &self.world_to_camera;
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::Camera("last pose row must be [0, 0, 0, 1]".into()));
        }
        let r = self.rotation();
        let err = (r * r.transpose() - Matrix3::identity()).abs().max();
        if err > 1e-5 {
            return Err(Error::Camera(format!(
                "rotation block is not orthonormal (error {err:.2e})"
            )));
        }
        Ok(())
    }

    /// Pixel coordinates and depth of a world point, if in front of the camera.
    pub fn project_point(&self, p: [f64; 3]) -> Option<([f64; 2], f64)> {
        let pc = self.rotation() * Vector3::from(p) + self.translation();
        if pc.z <= NEAR_PLANE {
            return None;
        }
        Some((
            [
                self.fx * pc.x / pc.z + self.cx,
                self.fy * pc.y / pc.z + self.cy,
            ],
            pc.z,
        ))
    }
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let cams: Vec<Camera> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    for c in &cams {
        c.validate()?;
    }
    Ok(cams)
}

pub fn save_cameras(cameras: &[Camera], path: impl AsRef<Path>) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), cameras)?;
    Ok(())
}

/// Linear float RGB raster, row-major, 3 floats per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f32>,
}

impl ImageBuffer {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0.0; width * height * 3],
        }
    }

    pub fn from_rgb(width: usize, height: usize, rgb: Vec<f32>) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "{} floats do not form a {width}x{height} RGB image",
                rgb.len()
            )));
        }
        Ok(Self { width, height, rgb })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn mean_luminance(&self) -> f64 {
        if self.rgb.is_empty() {
            return 0.0;
        }
        self.rgb.iter().map(|&v| v as f64).sum::<f64>() / self.rgb.len() as f64
    }

    /// Copy of channel `c` as a dense plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.rgb.iter().skip(c).step_by(3).map(|&v| v as f64).collect()
    }
}

/// Per-row count of pixels a Gaussian was blended into.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderStats {
    pub hits: Vec<u64>,
    pub views_rendered: u32,
}

impl RenderStats {
    pub fn new(rows: usize) -> Self {
        Self {
            hits: vec![0; rows],
            views_rendered: 0,
        }
    }

    pub fn merge(&mut self, other: &RenderStats) {
        assert_eq!(self.hits.len(), other.hits.len());
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        self.views_rendered += other.views_rendered;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub mean2d: [f64; 2],
    /// Screen-space covariance, low-pass term included.
    pub cov2d: [[f64; 2]; 2],
    pub depth: f64,
}

pub fn quat_to_matrix(q: [f32; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q.map(|v| v as f64);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// EWA projection of one Gaussian given activated attributes (unit
/// quaternion, positive scales). `None` when the center is behind the near
/// plane.
pub fn project_gaussian(
    position: [f32; 3],
    scales: [f32; 3],
    rotation: [f32; 4],
    camera: &Camera,
) -> Option<Projection> {
    let w = camera.rotation();
    let pc = w * Vector3::from(position.map(|v| v as f64)) + camera.translation();
    if pc.z <= NEAR_PLANE {
        return None;
    }
    let r = quat_to_matrix(rotation);
    let s = Matrix3::from_diagonal(&Vector3::from(scales.map(|v| v as f64)));
    let m = r * s;
    let cov3d = m * m.transpose();
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let j = Matrix2x3::new(
        camera.fx / z,
        0.0,
        -camera.fx * x / (z * z),
        0.0,
        camera.fy / z,
        -camera.fy * y / (z * z),
    );
    let t = j * w;
    let cov = t * cov3d * t.transpose();
    Some(Projection {
        mean2d: [camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy],
        cov2d: [
            [cov[(0, 0)] + LOW_PASS, cov[(0, 1)]],
            [cov[(1, 0)], cov[(1, 1)] + LOW_PASS],
        ],
        depth: z,
    })
}

/// View-dependent color of `row` seen along `dir` (unit, camera to Gaussian).
pub fn evaluate_row_sh(model: &GaussianModel, row: usize, dir: [f32; 3]) -> [f32; 3] {
    sh::evaluate_sh(&model.sh_coefficients(row), dir)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    pub tile_size: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            tile_size: TILE_SIZE,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Splat {
    row: u32,
    mean: [f32; 2],
    /// Inverse covariance (a, b, c) for `a·dx² + 2b·dx·dy + c·dy²`.
    conic: [f32; 3],
    opacity: f32,
    color: [f32; 3],
    depth: f32,
    // Inclusive pixel bounds of the 3σ box.
    x0: i32,
    x1: i32,
    y0: i32,
    y1: i32,
}

fn prepare_splat(model: &GaussianModel, row: usize, camera: &Camera, center: &Vector3<f64>) -> Option<Splat> {
    let opacity = model.opacity(row);
    if !(opacity >= MIN_ALPHA) {
        return None;
    }
    let rotation = model.rotation(row)?;
    let p = project_gaussian(model.position(row), model.scales(row), rotation, camera)?;
    let [[a, b], [_, c]] = p.cov2d;
    let det = a * c - b * b;
    if !(det > 0.0) {
        return None;
    }
    let rx = 3.0 * a.sqrt();
    let ry = 3.0 * c.sqrt();
    let (mx, my) = (p.mean2d[0], p.mean2d[1]);
    let x0 = (mx - rx).floor().max(-1.0);
    let x1 = (mx + rx).ceil().min(camera.width as f64);
    let y0 = (my - ry).floor().max(-1.0);
    let y1 = (my + ry).ceil().min(camera.height as f64);
    if x1 < 0.0 || y1 < 0.0 || x0 >= camera.width as f64 || y0 >= camera.height as f64 {
        return None;
    }
    let pos = model.position(row);
    let dir = Vector3::new(
        pos[0] as f64 - center.x,
        pos[1] as f64 - center.y,
        pos[2] as f64 - center.z,
    )
    .normalize();
    let rgb = evaluate_row_sh(model, row, [dir.x as f32, dir.y as f32, dir.z as f32]);
    Some(Splat {
        row: row as u32,
        mean: [mx as f32, my as f32],
        conic: [(c / det) as f32, (-b / det) as f32, (a / det) as f32],
        opacity,
        color: rgb.map(|v| v.max(0.0)),
        depth: p.depth as f32,
        x0: x0 as i32,
        x1: x1 as i32,
        y0: y0 as i32,
        y1: y1 as i32,
    })
}

/// Depth order with a content-based tie break, so the result never depends
/// on the input row order.
fn splat_order(model: &GaussianModel, a: &Splat, b: &Splat) -> Ordering {
    a.depth.total_cmp(&b.depth).then_with(|| {
        let (ra, rb) = (a.row as usize, b.row as usize);
        model
            .row(ra)
            .iter()
            .zip(model.row(rb))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then(model.is_sh_masked(ra).cmp(&model.is_sh_masked(rb)))
    })
}

pub fn render(
    model: &GaussianModel,
    camera: &Camera,
    collect_stats: bool,
) -> Result<(ImageBuffer, Option<RenderStats>)> {
    render_with(model, camera, collect_stats, &RenderOptions::default())
}

pub fn render_with(
    model: &GaussianModel,
    camera: &Camera,
    collect_stats: bool,
    options: &RenderOptions,
) -> Result<(ImageBuffer, Option<RenderStats>)> {
    camera.validate()?;
    if options.tile_size == 0 {
        return Err(Error::invalid("tile size must be positive"));
    }
    let width = camera.width as usize;
    let height = camera.height as usize;
    let ts = options.tile_size;
    let tiles_x = width.div_ceil(ts);
    let tiles_y = height.div_ceil(ts);

    let center = camera.center();
    let mut splats: Vec<Splat> = (0..model.len())
        .into_par_iter()
        .filter_map(|r| prepare_splat(model, r, camera, &center))
        .collect();
    splats.par_sort_unstable_by(|a, b| splat_order(model, a, b));

    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (k, s) in splats.iter().enumerate() {
        let tx0 = (s.x0.max(0) as usize) / ts;
        let tx1 = ((s.x1.max(0) as usize) / ts).min(tiles_x - 1);
        let ty0 = (s.y0.max(0) as usize) / ts;
        let ty1 = ((s.y1.max(0) as usize) / ts).min(tiles_y - 1);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tile_lists[ty * tiles_x + tx].push(k as u32);
            }
        }
    }

    let tiles: Vec<(Vec<f32>, Vec<u32>)> = tile_lists
        .par_iter()
        .enumerate()
        .map(|(t, list)| {
            let tx = t % tiles_x;
            let ty = t / tiles_x;
            blend_tile(&splats, list, tx * ts, ty * ts, ts, width, height, collect_stats)
        })
        .collect();

    let mut image = ImageBuffer::black(width, height);
    let mut stats = collect_stats.then(|| RenderStats::new(model.len()));
    for (t, (pixels, counts)) in tiles.into_iter().enumerate() {
        let x0 = (t % tiles_x) * ts;
        let y0 = (t / tiles_x) * ts;
        let tw = ts.min(width - x0);
        let th = ts.min(height - y0);
        for dy in 0..th {
            let dst = ((y0 + dy) * width + x0) * 3;
            let src = dy * tw * 3;
            image.rgb[dst..dst + tw * 3].copy_from_slice(&pixels[src..src + tw * 3]);
        }
        if let Some(stats) = stats.as_mut() {
            for (&k, &n) in tile_lists[t].iter().zip(&counts) {
                stats.hits[splats[k as usize].row as usize] += n as u64;
            }
        }
    }
    if let Some(stats) = stats.as_mut() {
        stats.views_rendered = 1;
    }
    Ok((image, stats))
}

#[allow(clippy::too_many_arguments)]
fn blend_tile(
    splats: &[Splat],
    list: &[u32],
    x0: usize,
    y0: usize,
    ts: usize,
    width: usize,
    height: usize,
    collect_stats: bool,
) -> (Vec<f32>, Vec<u32>) {
    let tw = ts.min(width - x0);
    let th = ts.min(height - y0);
    let mut pixels = vec![0.0f32; tw * th * 3];
    let mut counts = if collect_stats {
        vec![0u32; list.len()]
    } else {
        Vec::new()
    };
    // Splat-major traversal in global depth order: each pixel still sees its
    // contributors front to back, so the result matches a per-pixel loop.
    let mut trans = vec![1.0f32; tw * th];
    let mut live = tw * th;
    let (tx0, ty0) = (x0 as i32, y0 as i32);
    let (tx1, ty1) = ((x0 + tw) as i32 - 1, (y0 + th) as i32 - 1);
    for (j, &k) in list.iter().enumerate() {
        if live == 0 {
            break;
        }
        let s = &splats[k as usize];
        for py in s.y0.max(ty0)..=s.y1.min(ty1) {
            let ddy = s.mean[1] - py as f32;
            let row = (py - ty0) as usize * tw;
            for px in s.x0.max(tx0)..=s.x1.min(tx1) {
                let p = row + (px - tx0) as usize;
                let t = trans[p];
                if t < MIN_TRANSMITTANCE {
                    continue;
                }
                let ddx = s.mean[0] - px as f32;
                let d2 = s.conic[0] * ddx * ddx + 2.0 * s.conic[1] * ddx * ddy + s.conic[2] * ddy * ddy;
                if d2 > FOOTPRINT_D2 {
                    continue;
                }
                let alpha = s.opacity * (-0.5 * d2).exp();
                if alpha < MIN_ALPHA {
                    continue;
                }
                let w = alpha * t;
                let c = &mut pixels[p * 3..p * 3 + 3];
                c[0] += s.color[0] * w;
                c[1] += s.color[1] * w;
                c[2] += s.color[2] * w;
                if collect_stats {
                    counts[j] += 1;
                }
                let t = t * (1.0 - alpha);
                trans[p] = t;
                if t < MIN_TRANSMITTANCE {
                    live -= 1;
                }
            }
        }
    }
    for v in &mut pixels {
        *v = v.clamp(0.0, 1.0);
    }
    (pixels, counts)
}

/// Render every camera, in order.
pub fn render_views(model: &GaussianModel, cameras: &[Camera]) -> Result<Vec<ImageBuffer>> {
    cameras
        .iter()
        .map(|c| render(model, c, false).map(|(img, _)| img))
        .collect()
}

/// Hit counts summed over all cameras; the merge runs in camera order.
pub fn accumulate_stats(model: &GaussianModel, cameras: &[Camera]) -> Result<RenderStats> {
    Ok(render_views_with_stats(model, cameras)?.1)
}

/// Images and summed hit counts from one pass over the cameras.
pub fn render_views_with_stats(model: &GaussianModel, cameras: &[Camera]) -> Result<(Vec<ImageBuffer>, RenderStats)> {
    let per_view: Vec<(ImageBuffer, RenderStats)> = cameras
        .par_iter()
        .map(|c| render(model, c, true).map(|(img, s)| (img, s.expect("stats requested"))))
        .collect::<Result<_>>()?;
    let mut total = RenderStats::new(model.len());
    let mut images = Vec::with_capacity(per_view.len());
    for (img, s) in per_view {
        total.merge(&s);
        images.push(img);
    }
    Ok((images, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{activation, OPACITY, ROTATION, ROW_WIDTH, SCALE, SH_BASE};

    pub(crate) fn splat_row(pos: [f32; 3], scale: f32, opacity: f32, color: [f32; 3]) -> Vec<f32> {
        let mut row = vec![0.0f32; ROW_WIDTH];
        row[..3].copy_from_slice(&pos);
        for c in 0..3 {
            row[SH_BASE.start + c] = (color[c] - 0.5) / sh::C0;
        }
        row[OPACITY] = activation::logit(opacity as f64) as f32;
        for c in SCALE {
            row[c] = activation::log_scale(scale as f64) as f32;
        }
        row[ROTATION.start] = 1.0;
        row
    }

    fn identity_camera(w: u32, h: u32, f: f64) -> Camera {
        let mut m = [0.0; 16];
        m[0] = 1.0;
        m[5] = 1.0;
        m[10] = 1.0;
        m[15] = 1.0;
        Camera {
            width: w,
            height: h,
            fx: f,
            fy: f,
            cx: (w / 2) as f64,
            cy: (h / 2) as f64,
            world_to_camera: m,
        }
    }

    #[test]
    fn on_axis_projects_to_principal_point() {
        let cam = identity_camera(64, 48, 50.0);
        let p = project_gaussian([0.0, 0.0, 1.0], [0.1; 3], [1.0, 0.0, 0.0, 0.0], &cam).unwrap();
        assert_eq!(p.mean2d, [32.0, 24.0]);
        assert_eq!(p.depth, 1.0);
    }

    #[test]
    fn behind_camera_is_culled() {
        let cam = identity_camera(64, 48, 50.0);
        assert!(project_gaussian([0.0, 0.0, -1.0], [0.1; 3], [1.0, 0.0, 0.0, 0.0], &cam).is_none());
    }

    #[test]
    fn isotropic_covariance_matches_jacobian_oracle() {
        // Oracle: push a small circle of world offsets through the pinhole
        // map and fit the 2D covariance by central differences.
        let cam = Camera::look_at([0.3, -0.2, -4.0], [0.1, 0.1, 0.0], [0.0, -1.0, 0.0], 80, 60, 1.0);
        let pos = [0.25f32, 0.05, 0.4];
        let s = 0.05f32;
        let q = crate::model::activation::normalize_quat([0.3, 0.5, -0.1, 0.8]).unwrap();
        let p = project_gaussian(pos, [s; 3], q, &cam).unwrap();
        let h = 1e-5;
        let mut jac = [[0.0f64; 3]; 2];
        for k in 0..3 {
            let mut a = pos.map(|v| v as f64);
            let mut b = a;
            a[k] += h;
            b[k] -= h;
            let (pa, _) = cam.project_point(a).unwrap();
            let (pb, _) = cam.project_point(b).unwrap();
            jac[0][k] = (pa[0] - pb[0]) / (2.0 * h);
            jac[1][k] = (pa[1] - pb[1]) / (2.0 * h);
        }
        let s2 = (s as f64) * (s as f64);
        for r in 0..2 {
            for c in 0..2 {
                let expected: f64 = (0..3).map(|k| jac[r][k] * jac[c][k] * s2).sum();
                let got = p.cov2d[r][c] - if r == c { LOW_PASS } else { 0.0 };
                assert!((got - expected).abs() < 1e-6 * expected.abs().max(1.0), "{r}{c}: {got} vs {expected}");
            }
        }
        // On-axis closed form: (f·s/z)² I.
        let cam = identity_camera(64, 48, 50.0);
        let p = project_gaussian([0.0, 0.0, 2.0], [0.1; 3], [1.0, 0.0, 0.0, 0.0], &cam).unwrap();
        let expected = (50.0 * 0.1f32 as f64 / 2.0).powi(2);
        assert!((p.cov2d[0][0] - LOW_PASS - expected).abs() < 1e-9);
        assert!(p.cov2d[0][1].abs() < 1e-12);
    }

    #[test]
    fn empty_model_is_black() {
        let cam = identity_camera(20, 20, 20.0);
        let (img, stats) = render(&GaussianModel::new(), &cam, true).unwrap();
        assert!(img.rgb.iter().all(|&v| v == 0.0));
        assert!(stats.unwrap().hits.is_empty());
    }

    #[test]
    fn single_splat_center_pixel() {
        let cam = identity_camera(33, 33, 40.0);
        let mut m = GaussianModel::new();
        m.push_row(&splat_row([0.0, 0.0, 2.0], 0.05, 0.8, [0.6, 0.3, 0.9]), false);
        let (img, stats) = render(&m, &cam, true).unwrap();
        let px = img.pixel(16, 16);
        let color = sh::evaluate_sh(&m.sh_coefficients(0), [0.0, 0.0, 1.0]);
        for c in 0..3 {
            assert!((px[c] - color[c] * m.opacity(0)).abs() < 1e-6);
        }
        assert!(stats.unwrap().hits[0] > 0);
    }

    #[test]
    fn bad_camera_is_rejected() {
        let mut cam = identity_camera(8, 8, 10.0);
        cam.fx = 0.0;
        assert!(matches!(render(&GaussianModel::new(), &cam, false), Err(Error::Camera(_))));
        let mut cam = identity_camera(8, 8, 10.0);
        cam.world_to_camera[0] = 2.0;
        assert!(matches!(cam.validate(), Err(Error::Camera(_))));
    }

    #[test]
    fn look_at_centers_target() {
        let cam = Camera::look_at([2.0, -1.0, 3.0], [0.1, 0.2, 0.3], [0.0, 0.0, 1.0], 64, 48, 1.0);
        cam.validate().unwrap();
        let (px, depth) = cam.project_point([0.1, 0.2, 0.3]).unwrap();
        assert!((px[0] - 32.0).abs() < 1e-9 && (px[1] - 24.0).abs() < 1e-9);
        assert!(depth > 0.0);
        let c = cam.center();
        assert!((c - Vector3::new(2.0, -1.0, 3.0)).norm() < 1e-12);
    }
}
