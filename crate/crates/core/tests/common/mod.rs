#![allow(dead_code)]

use gscomp::model::{activation, OPACITY, POSITION, ROTATION, ROW_WIDTH, SCALE, SH_BASE};
use gscomp::render::Camera;
use gscomp::scenegen::SceneSpec;
use gscomp::sh::C0;

/// Camera at the origin looking down +z, image center on an integer pixel.
pub fn identity_camera(width: u32, height: u32, f: f64) -> Camera {
    let mut m = [0.0; 16];
    m[0] = 1.0;
    m[5] = 1.0;
    m[10] = 1.0;
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

/// Isotropic, view-independent Gaussian with activated attributes.
pub fn splat(position: [f32; 3], scale: f32, opacity: f32, color: [f32; 3]) -> Vec<f32> {
    let mut row = vec![0.0f32; ROW_WIDTH];
    for (k, c) in POSITION.enumerate() {
        row[c] = position[k];
    }
    for c in SCALE {
        row[c] = (scale as f64).ln() as f32;
    }
    row[ROTATION.start] = 1.0;
    row[OPACITY] = activation::logit(opacity as f64) as f32;
    for (k, c) in SH_BASE.enumerate() {
        row[c] = (color[k] - 0.5) / C0;
    }
    row
}

/// A scene small enough for per-test generation.
pub fn small_spec(seed: u64, n: usize) -> SceneSpec {
    SceneSpec {
        seed,
        n_gaussians: n,
        n_cameras: 8,
        image_width: 64,
        image_height: 64,
        scale_range: [0.01, 0.05],
        ..SceneSpec::default()
    }
}
