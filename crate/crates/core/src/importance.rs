//! Global significance score: blended-pixel hits × opacity × normalized
//! volume, summed over every view.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GaussianModel;
use crate::render::{self, Camera, RenderStats};

pub const DEFAULT_VOLUME_PERCENTILE: f64 = 0.9;
pub const DEFAULT_VOLUME_EXPONENT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceConfig {
    /// Percentile of the volume distribution used as the cap, in (0, 1].
    pub volume_percentile: f64,
    pub volume_exponent: f64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            volume_percentile: DEFAULT_VOLUME_PERCENTILE,
            volume_exponent: DEFAULT_VOLUME_EXPONENT,
        }
    }
}

impl ImportanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume_percentile > 0.0 && self.volume_percentile <= 1.0) {
            return Err(Error::invalid(format!(
                "volume percentile {} outside (0, 1]",
                self.volume_percentile
            )));
        }
        if !(self.volume_exponent >= 0.0 && self.volume_exponent.is_finite()) {
            return Err(Error::invalid(format!(
                "volume exponent {} must be finite and nonnegative",
                self.volume_exponent
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub scores: Vec<f64>,
    pub rank_descending: Vec<usize>,
    pub volume_cap: f64,
    pub hits: Vec<u64>,
}

impl ImportanceScores {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// All-equal scores: the ranking is the row order.
    pub fn trivial(rows: usize) -> Self {
        Self {
            scores: vec![1.0; rows],
            rank_descending: (0..rows).collect(),
            volume_cap: 1.0,
            hits: vec![0; rows],
        }
    }

    /// Scores supplied directly, e.g. by tests or an external tool.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid(format!("score {i} is {}", scores[i])));
        }
        let rank_descending = rank_descending(&scores);
        let n = scores.len();
        Ok(Self {
            scores,
            rank_descending,
            volume_cap: 1.0,
            hits: vec![0; n],
        })
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for &s in &self.scores {
            out.write_all(&(s as f32).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "row,hits,score,rank")?;
        let mut rank = vec![0usize; self.len()];
        for (r, &row) in self.rank_descending.iter().enumerate() {
            rank[row] = r;
        }
        for (i, s) in self.scores.iter().enumerate() {
            writeln!(out, "{i},{},{s},{}", self.hits[i], rank[i])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Row indices by descending score, ties by ascending index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Normalized volume factor `(min(v, cap) / cap)^0.1` for activated scales.
pub fn gaussian_volume(scales: [f64; 3], cap: f64) -> Result<f64> {
    volume_factor(scales, cap, DEFAULT_VOLUME_EXPONENT)
}

pub fn volume_factor(scales: [f64; 3], cap: f64, exponent: f64) -> Result<f64> {
    if scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid(format!("nonpositive scale {scales:?}")));
    }
    Ok(gamma(scales.iter().product(), cap, exponent))
}

fn gamma(volume: f64, cap: f64, exponent: f64) -> f64 {
    if !(cap > 0.0) {
        return 1.0;
    }
    (volume.min(cap) / cap).powf(exponent)
}

/// Nearest-rank percentile of `values` (ascending), 0 for an empty slice.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

fn row_volume(model: &GaussianModel, row: usize) -> f64 {
    model.scales(row).iter().map(|&s| s as f64).product()
}

/// Combine precomputed hit counts with opacity and volume.
pub fn from_hits(model: &GaussianModel, stats: &RenderStats, config: &ImportanceConfig) -> Result<ImportanceScores> {
    config.validate()?;
    if stats.hits.len() != model.len() {
        return Err(Error::RowCountMismatch {
            model: model.len(),
            scores: stats.hits.len(),
        });
    }
    let volumes: Vec<f64> = (0..model.len()).map(|r| row_volume(model, r)).collect();
    let cap = percentile(&volumes, config.volume_percentile);
    let scores: Vec<f64> = (0..model.len())
        .map(|r| {
            let hits = stats.hits[r];
            if hits == 0 {
                return 0.0;
            }
            hits as f64 * model.opacity(r) as f64 * gamma(volumes[r], cap, config.volume_exponent)
        })
        .collect();
    Ok(ImportanceScores {
        rank_descending: rank_descending(&scores),
        scores,
        volume_cap: cap,
        hits: stats.hits.clone(),
    })
}

pub fn compute_scores(model: &GaussianModel, cameras: &[Camera]) -> Result<ImportanceScores> {
    compute_scores_with(model, cameras, &ImportanceConfig::default())
}

pub fn compute_scores_with(
    model: &GaussianModel,
    cameras: &[Camera],
    config: &ImportanceConfig,
) -> Result<ImportanceScores> {
    if cameras.is_empty() {
        return Err(Error::invalid("importance needs at least one camera"));
    }
    let stats = render::accumulate_stats(model, cameras)?;
    from_hits(model, &stats, config)
}
