//! Semi-structured pruning: keep the most important rows whole, strip the
//! view-dependent SH block from a middle band and drop the tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgc;
use crate::importance::ImportanceScores;
use crate::model::{GaussianModel, BASE_WIDTH, ROW_WIDTH};
use crate::mpq::QuantizationPlan;
use crate::ply;

/// Weight of an SH-masked row's score in the frontier's quality proxy.
pub const MASKED_SCORE_WEIGHT: f64 = 0.9;

/// Slack that keeps fractions such as 0.3 · 10 from rounding the wrong way.
const COUNT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruningPlan {
    /// Fraction of rows kept with every attribute.
    pub alpha: f64,
    /// Fraction of rows removed.
    pub beta: f64,
}

/// Row counts a plan produces for a model of a given size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneCounts {
    pub full: usize,
    pub masked: usize,
    pub removed: usize,
}

impl PruningPlan {
    pub const IDENTITY: PruningPlan = PruningPlan { alpha: 1.0, beta: 0.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        if !ok(self.alpha) || !ok(self.beta) || self.alpha + self.beta > 1.0 + COUNT_EPS {
            return Err(Error::invalid(format!(
                "pruning plan alpha={} beta={} needs both in [0, 1] with alpha + beta <= 1",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn masked_fraction(&self) -> f64 {
        (1.0 - self.alpha - self.beta).max(0.0)
    }

    /// `ceil(alpha·n)` full rows and `floor(beta·n)` removed rows; the rest
    /// are masked.
    pub fn counts(&self, n: usize) -> PruneCounts {
        let nf = n as f64;
        let full = ((self.alpha * nf - COUNT_EPS).ceil().max(0.0) as usize).min(n);
        let removed = ((self.beta * nf + COUNT_EPS).floor().max(0.0) as usize).min(n - full);
        PruneCounts {
            full,
            masked: n - full - removed,
            removed,
        }
    }
}

fn check_rows(model: &GaussianModel, scores: &ImportanceScores) -> Result<()> {
    if scores.len() != model.len() || scores.rank_descending.len() != model.len() {
        return Err(Error::RowCountMismatch {
            model: model.len(),
            scores: scores.len(),
        });
    }
    Ok(())
}

/// Prune a copy of `model`. Rows come out in descending importance: full rows,
/// then SH-masked rows. Rows already masked in the input stay masked.
pub fn apply_pruning(model: &GaussianModel, scores: &ImportanceScores, plan: &PruningPlan) -> Result<GaussianModel> {
    plan.validate()?;
    check_rows(model, scores)?;
    let counts = plan.counts(model.len());
    let kept = &scores.rank_descending[..counts.full + counts.masked];
    let mut out = model.select_rows(kept);
    for r in counts.full..kept.len() {
        out.set_sh_mask(r, true);
    }
    Ok(out)
}

/// Remove the bottom `ratio` of rows; no SH masking.
pub fn row_prune_only(model: &GaussianModel, scores: &ImportanceScores, ratio: f64) -> Result<GaussianModel> {
    apply_pruning(model, scores, &PruningPlan::new(1.0 - ratio, ratio)?)
}

/// Mask SH on the bottom `ratio` of rows; nothing removed.
pub fn sh_prune_only(model: &GaussianModel, scores: &ImportanceScores, ratio: f64) -> Result<GaussianModel> {
    apply_pruning(model, scores, &PruningPlan::new(1.0 - ratio, 0.0)?)
}

/// Uncompressed size of a pruned model with the given counts.
pub fn pruned_byte_size(counts: PruneCounts) -> u64 {
    ply::header_len(counts.full + counts.masked) as u64
        + (counts.full * ROW_WIDTH * 4) as u64
        + (counts.masked * BASE_WIDTH * 4) as u64
}

/// A point on the search lattice: remove `row_prune` of the rows, then mask
/// SH on `sh_fraction` of the survivors (the least important ones).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub row_prune: f64,
    pub sh_fraction: f64,
}

impl GridPoint {
    pub fn plan(&self) -> PruningPlan {
        PruningPlan {
            alpha: ((1.0 - self.row_prune) * (1.0 - self.sh_fraction)).clamp(0.0, 1.0),
            beta: self.row_prune,
        }
    }
}

/// Cartesian lattice of pruning levels, as read from grid JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub row_prune: Vec<f64>,
    pub sh_fraction: Vec<f64>,
}

impl Default for CandidateGrid {
    fn default() -> Self {
        Self {
            row_prune: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            sh_fraction: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl CandidateGrid {
    pub fn validate(&self) -> Result<()> {
        if self.row_prune.is_empty() || self.sh_fraction.is_empty() {
            return Err(Error::invalid("candidate grid is empty"));
        }
        for &v in self.row_prune.iter().chain(&self.sh_fraction) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("grid value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<GridPoint> {
        self.row_prune
            .iter()
            .flat_map(|&row_prune| {
                self.sh_fraction.iter().map(move |&sh_fraction| GridPoint {
                    row_prune,
                    sh_fraction,
                })
            })
            .collect()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let grid: CandidateGrid = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        grid.validate()?;
        Ok(grid)
    }
}

/// A pruning plan paired with a quantization plan and its cheap estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: GridPoint,
    pub pruning: PruningPlan,
    pub quant: QuantizationPlan,
    pub counts: PruneCounts,
    /// Exact container size this candidate will be written at.
    pub estimated_bytes: u64,
    /// Uncompressed size of the pruned model.
    pub pruned_bytes: u64,
    /// Importance retained, masked rows weighted by [`MASKED_SCORE_WEIGHT`].
    pub retained_score: f64,
}

fn retained_score(scores: &ImportanceScores, counts: PruneCounts) -> f64 {
    let r = &scores.rank_descending;
    let full: f64 = r[..counts.full].iter().map(|&i| scores.scores[i]).sum();
    let masked: f64 = r[counts.full..counts.full + counts.masked]
        .iter()
        .map(|&i| scores.scores[i])
        .sum();
    full + MASKED_SCORE_WEIGHT * masked
}

pub fn make_candidate(scores: &ImportanceScores, point: GridPoint, quant: &QuantizationPlan) -> Candidate {
    let pruning = point.plan();
    let counts = pruning.counts(scores.len());
    Candidate {
        point,
        pruning,
        quant: quant.clone(),
        counts,
        estimated_bytes: fgc::estimate_size(counts.full, counts.masked, quant),
        pruned_bytes: pruned_byte_size(counts),
        retained_score: retained_score(scores, counts),
    }
}

/// Every grid point as a candidate, in grid order.
pub fn enumerate_candidates(
    grid: &CandidateGrid,
    scores: &ImportanceScores,
    quant: &QuantizationPlan,
) -> Result<Vec<Candidate>> {
    grid.validate()?;
    Ok(grid.points().into_iter().map(|p| make_candidate(scores, p, quant)).collect())
}

fn frontier_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.estimated_bytes
        .cmp(&a.estimated_bytes)
        .then(b.pruning.alpha.total_cmp(&a.pruning.alpha))
        .then(b.retained_score.total_cmp(&a.retained_score))
}

/// Drop candidates beaten on both size and retained score, and order the rest
/// by estimated size descending (ties toward larger alpha). Index 0 is the
/// quality end of the path.
pub fn candidate_frontier(mut candidates: Vec<Candidate>) -> Vec<Candidate> {
    candidates.sort_by(frontier_order);
    // Walking from the smallest candidate upward, a candidate survives only if
    // it retains strictly more than everything smaller than it.
    let mut keep = vec![false; candidates.len()];
    let mut best = f64::NEG_INFINITY;
    let mut i = candidates.len();
    while i > 0 {
        // Group equal sizes; within a group the first (largest alpha) of the
        // best scorers represents it.
        let end = i;
        let size = candidates[i - 1].estimated_bytes;
        while i > 0 && candidates[i - 1].estimated_bytes == size {
            i -= 1;
        }
        let group = i..end;
        let top = group
            .clone()
            .map(|k| candidates[k].retained_score)
            .fold(f64::NEG_INFINITY, f64::max);
        if top > best {
            let k = group.clone().find(|&k| candidates[k].retained_score == top).unwrap();
            keep[k] = true;
            best = top;
        }
    }
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Candidate path over the grid with a fixed quantization plan.
pub fn default_path(
    grid: &CandidateGrid,
    scores: &ImportanceScores,
    quant: &QuantizationPlan,
) -> Result<Vec<Candidate>> {
    Ok(candidate_frontier(enumerate_candidates(grid, scores, quant)?))
}
