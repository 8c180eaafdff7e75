//! Deterministic synthetic scenes and orbit cameras.
//!
//! Random numbers come from ChaCha8 keyed with the seed (little-endian in the
//! first 8 key bytes, the rest zero) and are consumed in a fixed per-row order
//! documented in `docs/formats.md`, so another implementation can reproduce a
//! fixture bit for bit.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{activation, GaussianModel, OPACITY, POSITION, ROTATION, ROW_WIDTH, SCALE, SH_ADV, SH_BASE};
use crate::ply;
use crate::render::{self, Camera};
use crate::sh::C0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_gaussians: usize,
    /// Positions are uniform in `[-extent, extent]³`.
    pub extent: f64,
    /// Activated opacity of regular rows, uniform in the interval.
    pub opacity_range: [f64; 2],
    /// Activated per-axis scale of regular rows, log-uniform in the interval.
    pub scale_range: [f64; 2],
    /// Per-channel base color, uniform in the interval.
    pub color_range: [f64; 2],
    /// RMS of the degree-1..3 SH coefficients relative to the RMS of the
    /// base coefficient.
    pub sh_energy: f64,
    /// Fraction of rows made nearly transparent and tiny.
    pub low_importance_fraction: f64,
    pub low_opacity: f64,
    /// Scale multiplier applied to low-importance rows.
    pub low_scale_factor: f64,
    pub n_cameras: usize,
    pub orbit_radius: f64,
    pub orbit_elevation_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub fov_x_deg: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_gaussians: 100_000,
            extent: 1.0,
            opacity_range: [0.05, 0.6],
            scale_range: [0.006, 0.03],
            color_range: [0.05, 0.95],
            sh_energy: 0.2,
            low_importance_fraction: 0.3,
            low_opacity: 0.002,
            low_scale_factor: 0.1,
            n_cameras: 32,
            orbit_radius: 3.5,
            orbit_elevation_deg: 20.0,
            image_width: 128,
            image_height: 128,
            fov_x_deg: 60.0,
        }
    }
}

fn interval_ok(r: [f64; 2], lo: f64, hi: f64) -> bool {
    r[0].is_finite() && r[1].is_finite() && lo <= r[0] && r[0] <= r[1] && r[1] <= hi
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(format!("scene spec: {m}")));
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return fail("extent must be positive");
        }
        if !interval_ok(self.opacity_range, 0.0, 1.0) || self.opacity_range[0] <= 0.0 || self.opacity_range[1] >= 1.0 {
            return fail("opacity_range must lie inside (0, 1)");
        }
        if !interval_ok(self.scale_range, 0.0, f64::MAX) || self.scale_range[0] <= 0.0 {
            return fail("scale_range must be positive and ordered");
        }
        if !interval_ok(self.color_range, 0.0, 1.0) {
            return fail("color_range must lie inside [0, 1]");
        }
        if !(self.sh_energy >= 0.0 && self.sh_energy.is_finite()) {
            return fail("sh_energy must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.low_importance_fraction) {
            return fail("low_importance_fraction must lie in [0, 1]");
        }
        if !(self.low_opacity > 0.0 && self.low_opacity < 1.0) {
            return fail("low_opacity must lie inside (0, 1)");
        }
        if !(self.low_scale_factor > 0.0 && self.low_scale_factor.is_finite()) {
            return fail("low_scale_factor must be positive");
        }
        if self.n_cameras == 0 {
            return fail("n_cameras must be at least 1");
        }
        if !(self.orbit_radius > self.extent * 3f64.sqrt()) {
            return fail("orbit_radius must clear the scene bounds");
        }
        if self.image_width == 0 || self.image_height == 0 {
            return fail("image size must be positive");
        }
        if !(self.fov_x_deg > 0.0 && self.fov_x_deg < 180.0) {
            return fail("fov_x_deg must lie in (0, 180)");
        }
        if !self.orbit_elevation_deg.is_finite() || self.orbit_elevation_deg.abs() >= 90.0 {
            return fail("orbit_elevation_deg must lie in (-90, 90)");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Seeded stream of uniforms and normals.
pub struct SceneRng(ChaCha8Rng);

impl SceneRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self(ChaCha8Rng::from_seed(key))
    }

    /// Uniform in `[0, 1)` from the top 53 bits of the next word.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal by Box–Muller; consumes two uniforms, uses the cosine
    /// branch only.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Uniform rotation as a unit quaternion (w, x, y, z), Shoemake's method.
    pub fn quaternion(&mut self) -> [f64; 4] {
        let (u1, u2, u3) = (self.uniform(), self.uniform(), self.uniform());
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
        [b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin()]
    }
}

/// Interleave the low 10 bits of three coordinates.
fn morton3(x: u32, y: u32, z: u32) -> u32 {
    fn spread(v: u32) -> u32 {
        let mut v = v & 0x3ff;
        v = (v | (v << 16)) & 0x0300_00ff;
        v = (v | (v << 8)) & 0x0300_f00f;
        v = (v | (v << 4)) & 0x030c_30c3;
        v = (v | (v << 2)) & 0x0924_9249;
        v
    }
    spread(x) | (spread(y) << 1) | (spread(z) << 2)
}

/// Which generated rows were made low-importance, in output row order.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub model: GaussianModel,
    pub cameras: Vec<Camera>,
    pub low_importance: Vec<bool>,
}

pub fn orbit_cameras(spec: &SceneSpec) -> Vec<Camera> {
    let el = spec.orbit_elevation_deg.to_radians();
    (0..spec.n_cameras)
        .map(|k| {
            let az = 2.0 * PI * k as f64 / spec.n_cameras as f64;
            let eye = [
                spec.orbit_radius * el.cos() * az.cos(),
                spec.orbit_radius * el.cos() * az.sin(),
                spec.orbit_radius * el.sin(),
            ];
            Camera::look_at(
                eye,
                [0.0; 3],
                [0.0, 0.0, 1.0],
                spec.image_width,
                spec.image_height,
                spec.fov_x_deg.to_radians(),
            )
        })
        .collect()
}

/// Generate the scene. Rows are emitted in Morton order of their positions so
/// that neighbouring rows are spatial neighbours.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = SceneRng::new(spec.seed);
    let dc_half_range = (spec.color_range[1] - spec.color_range[0]) / 2.0 / C0 as f64;
    // RMS of a uniform variable on [-h, h] is h / sqrt(3).
    let sh_sigma = spec.sh_energy * dc_half_range / 3f64.sqrt();
    let (ls0, ls1) = (spec.scale_range[0].ln(), spec.scale_range[1].ln());
    let (o0, o1) = (spec.opacity_range[0], spec.opacity_range[1]);

    let mut rows: Vec<([f32; ROW_WIDTH], bool)> = Vec::with_capacity(spec.n_gaussians);
    for _ in 0..spec.n_gaussians {
        let mut row = [0.0f32; ROW_WIDTH];
        for c in POSITION {
            row[c] = rng.range(-spec.extent, spec.extent) as f32;
        }
        let low = rng.uniform() < spec.low_importance_fraction;
        for c in SCALE {
            let mut s = rng.range(ls0, ls1);
            if low {
                s += spec.low_scale_factor.ln();
            }
            row[c] = s as f32;
        }
        let q = rng.quaternion();
        for (k, c) in ROTATION.enumerate() {
            row[c] = q[k] as f32;
        }
        let o = rng.range(o0, o1);
        row[OPACITY] = activation::logit(if low { spec.low_opacity } else { o }) as f32;
        for c in SH_BASE {
            let color = rng.range(spec.color_range[0], spec.color_range[1]);
            row[c] = ((color - 0.5) / C0 as f64) as f32;
        }
        for c in SH_ADV {
            // Degree of this coefficient within its color channel.
            let k = (c - SH_ADV.start) % 15 + 1;
            let degree = if k < 4 { 1.0 } else if k < 9 { 2.0 } else { 3.0 };
            row[c] = (rng.normal() * sh_sigma / degree) as f32;
        }
        rows.push((row, low));
    }

    let cell = |v: f32| -> u32 {
        let t = (v as f64 + spec.extent) / (2.0 * spec.extent);
        (t * 1024.0).clamp(0.0, 1023.0) as u32
    };
    let mut order: Vec<(u32, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, (r, _))| (morton3(cell(r[0]), cell(r[1]), cell(r[2])), i))
        .collect();
    order.sort_unstable();

    let mut model = GaussianModel::with_capacity(rows.len());
    let mut low_importance = Vec::with_capacity(rows.len());
    for &(_, i) in &order {
        model.push_row(&rows[i].0, false);
        low_importance.push(rows[i].1);
    }
    Ok(Scene {
        model,
        cameras: orbit_cameras(spec),
        low_importance,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixturePaths {
    pub model: PathBuf,
    pub cameras: PathBuf,
}

/// Write `model.ply` and `cameras.json` into `dir`, creating it if needed.
pub fn write_fixture(spec: &SceneSpec, dir: impl AsRef<Path>) -> Result<FixturePaths> {
    let scene = generate(spec)?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let paths = FixturePaths {
        model: dir.join("model.ply"),
        cameras: dir.join("cameras.json"),
    };
    ply::write_ply(&scene.model, &paths.model)?;
    render::save_cameras(&scene.cameras, &paths.cameras)?;
    Ok(paths)
}
