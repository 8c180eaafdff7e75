//! PSNR, SSIM, compression ratio and the render-vs-render quality report.
//!
//! Quality is always measured between a candidate render and the render of
//! the uncompressed model. Since that reference is itself lossless by
//! construction, a "PSNR drop" needs a nominal quality for the uncompressed
//! model: with reference PSNR `P` (noise power `σ² = 10^(-P/10)`) and the
//! candidate's extra error `mse` taken as independent of the reference
//! error, the drop is `10·log10(1 + mse/σ²)`. [`REFERENCE_PSNR_DB`] is the
//! default `P`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GaussianModel;
use crate::render::{self, Camera, ImageBuffer};

pub const PSNR_CAP_DB: f64 = 100.0;
const MSE_FLOOR: f64 = 1e-10;

/// Mean PSNR of uncompressed 3D-GS scenes on the usual benchmark scenes.
pub const REFERENCE_PSNR_DB: f64 = 27.05;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
    pub psnr_drop_db: f64,
    /// Always null; there is no perceptual network here.
    pub lpips: Option<f64>,
}

fn check_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    if a.rgb.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .rgb
        .iter()
        .zip(&b.rgb)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.rgb.len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < MSE_FLOOR {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// PSNR with peak 1.0, capped at 100 dB.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_drop_db(mse: f64, reference_psnr_db: f64) -> f64 {
    let noise = 10f64.powf(-reference_psnr_db / 10.0);
    10.0 * (1.0 + mse / noise).log10()
}

pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable "valid" filtering: output is `(h - 10) × (w - 10)`.
fn filter_valid(plane: &[f64], width: usize, height: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    let k = gaussian_window();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, width, height, &k);
    let mu_b = filter_valid(b, width, height, &k);
    let e_aa = filter_valid(&aa, width, height, &k);
    let e_bb = filter_valid(&bb, width, height, &k);
    let e_ab = filter_valid(&ab, width, height, &k);
    let n = mu_a.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    sum / n as f64
}

/// Mean SSIM over all valid 11×11 windows (Gaussian σ = 1.5), per channel
/// on linear values, averaged over RGB.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: a.width,
            height: a.height,
            window: SSIM_WINDOW,
        });
    }
    let total: f64 = (0..3)
        .map(|c| ssim_plane(&a.channel(c), &b.channel(c), a.width, a.height))
        .sum();
    Ok(total / 3.0)
}

/// Per-view PSNR/SSIM averaged over views (PSNR averaged in dB).
pub fn quality_from_views(
    reference: &[ImageBuffer],
    candidate: &[ImageBuffer],
    reference_psnr_db: f64,
) -> Result<QualityReport> {
    if reference.len() != candidate.len() || reference.is_empty() {
        return Err(Error::invalid(format!(
            "need matching non-empty view sets, got {} and {}",
            reference.len(),
            candidate.len()
        )));
    }
    let per_view: Vec<(f64, f64, f64)> = reference
        .par_iter()
        .zip(candidate)
        .map(|(r, c)| {
            let m = mse(r, c)?;
            Ok((m, psnr_from_mse(m), ssim(r, c)?))
        })
        .collect::<Result<_>>()?;
    let n = per_view.len() as f64;
    Ok(QualityReport {
        psnr: per_view.iter().map(|v| v.1).sum::<f64>() / n,
        ssim: per_view.iter().map(|v| v.2).sum::<f64>() / n,
        mse: per_view.iter().map(|v| v.0).sum::<f64>() / n,
        psnr_drop_db: per_view
            .iter()
            .map(|v| psnr_drop_db(v.0, reference_psnr_db))
            .sum::<f64>()
            / n,
        lpips: None,
    })
}

fn render_all(model: &GaussianModel, cameras: &[Camera]) -> Result<Vec<ImageBuffer>> {
    cameras
        .par_iter()
        .map(|c| render::render(model, c, false).map(|(img, _)| img))
        .collect()
}

/// Render `candidate` from every camera and compare against precomputed
/// `baseline` renders.
pub fn quality_against(
    baseline: &[ImageBuffer],
    candidate: &GaussianModel,
    cameras: &[Camera],
    reference_psnr_db: f64,
) -> Result<QualityReport> {
    let renders = render_all(candidate, cameras)?;
    quality_from_views(baseline, &renders, reference_psnr_db)
}

/// Quality of `model_b` relative to `model_a` over `cameras`.
pub fn mean_quality(
    model_a: &GaussianModel,
    model_b: &GaussianModel,
    cameras: &[Camera],
) -> Result<QualityReport> {
    if cameras.is_empty() {
        return Err(Error::invalid("at least one camera is required"));
    }
    let a = render_all(model_a, cameras)?;
    quality_against(&a, model_b, cameras, REFERENCE_PSNR_DB)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionRatio {
    pub ratio: f64,
    pub reduction_pct: f64,
}

pub fn compression_ratio(original_bytes: f64, compressed_bytes: f64) -> Result<CompressionRatio> {
    if !(original_bytes > 0.0) || !(compressed_bytes > 0.0) {
        return Err(Error::invalid(format!(
            "sizes must be positive (original {original_bytes}, compressed {compressed_bytes})"
        )));
    }
    Ok(CompressionRatio {
        ratio: original_bytes / compressed_bytes,
        reduction_pct: 100.0 * (1.0 - compressed_bytes / original_bytes),
    })
}
