//! Online search over the ordered candidate path, and the end-to-end
//! compression pipeline built on it.
//!
//! The path runs from the largest (highest quality) candidate at index 0 to
//! the smallest. Under a quality constraint the satisfying candidates form a
//! prefix and the search looks for its last element; under a size constraint
//! they form a suffix and the search looks for its first element. Either way
//! it starts at the midpoint and steps one candidate at a time toward the
//! boundary, so a path of length `n` costs at most `n / 2 + 1` evaluations.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::adp::{self, Candidate, CandidateGrid, PruningPlan};
use crate::error::{Error, Result};
use crate::fgc::{self, CompressionPlan};
use crate::importance::{self, ImportanceConfig, ImportanceScores};
use crate::metrics::{self, QualityReport, REFERENCE_PSNR_DB};
use crate::model::GaussianModel;
use crate::mpq::{self, ProbeGranularity, QuantizationPlan, DEFAULT_INT4_THRESHOLD_DB};
use crate::render::{self, Camera, ImageBuffer};

pub const DEFAULT_EVAL_VIEWS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Constraint {
    MaxPsnrDropDb(f64),
    MaxCompressedBytes(u64),
    MinCompressionRatio(f64),
}

impl Constraint {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Constraint::MaxPsnrDropDb(x) | Constraint::MinCompressionRatio(x) => x > 0.0 && x.is_finite(),
            Constraint::MaxCompressedBytes(b) => b > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("constraint {self:?} must be positive")))
        }
    }

    /// Size constraints are satisfied by a suffix of the path rather than a
    /// prefix.
    pub fn is_size_constraint(&self) -> bool {
        !matches!(self, Constraint::MaxPsnrDropDb(_))
    }

    pub fn satisfied(&self, eval: &Evaluation, input_bytes: u64) -> bool {
        match *self {
            Constraint::MaxPsnrDropDb(x) => eval.psnr_drop_db <= x,
            Constraint::MaxCompressedBytes(b) => eval.estimated_bytes <= b,
            Constraint::MinCompressionRatio(r) => input_bytes as f64 >= r * eval.estimated_bytes as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub psnr_drop_db: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub estimated_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub candidate_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<CompressionPlan>,
    pub psnr_drop_db: f64,
    pub ssim: f64,
    pub estimated_bytes: u64,
    pub satisfied: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub steps: Vec<TraceStep>,
    /// Index of the returned candidate (the best-effort one when infeasible).
    pub chosen: Option<usize>,
    pub feasible: bool,
    /// Evaluated neighbours that broke the expected monotone order.
    pub non_monotone_steps: usize,
}

impl SearchTrace {
    pub fn evaluations(&self) -> usize {
        self.steps.len()
    }

    /// One JSON object per step, then a closing `result` record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.steps {
            let mut v = serde_json::to_value(s)?;
            v["kind"] = "step".into();
            out.push_str(&serde_json::to_string(&v)?);
            out.push('\n');
        }
        let chosen_plan = self
            .chosen
            .and_then(|c| self.steps.iter().find(|s| s.candidate_index == c))
            .and_then(|s| s.plan.clone());
        let result = serde_json::json!({
            "kind": "result",
            "chosen_index": self.chosen,
            "feasible": self.feasible,
            "plan": chosen_plan,
            "evaluations": self.steps.len(),
        });
        out.push_str(&serde_json::to_string(&result)?);
        out.push('\n');
        Ok(out)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl()?.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub chosen: usize,
    pub feasible: bool,
    pub evaluation: Evaluation,
    pub trace: SearchTrace,
}

/// Monotone boundary search over a path of `len` candidates. `evaluate` is
/// called at most once per index.
pub fn search<F>(len: usize, constraint: &Constraint, input_bytes: u64, mut evaluate: F) -> Result<SearchOutcome>
where
    F: FnMut(usize) -> Result<Evaluation>,
{
    constraint.validate()?;
    if len == 0 {
        return Err(Error::EmptyPath);
    }
    let mut trace = SearchTrace::default();
    let mut evals: Vec<Option<Evaluation>> = vec![None; len];
    let mut probe = |i: usize, trace: &mut SearchTrace| -> Result<(Evaluation, bool)> {
        let t = Instant::now();
        let e = evaluate(i)?;
        let ok = constraint.satisfied(&e, input_bytes);
        trace.steps.push(TraceStep {
            step: trace.steps.len(),
            candidate_index: i,
            plan: None,
            psnr_drop_db: e.psnr_drop_db,
            ssim: e.ssim,
            estimated_bytes: e.estimated_bytes,
            satisfied: ok,
            wall_time_s: t.elapsed().as_secs_f64().max(1e-9),
        });
        debug!("candidate {i}: drop {:.4} dB, {} B, ok={ok}", e.psnr_drop_db, e.estimated_bytes);
        Ok((e, ok))
    };

    // Direction in which satisfying candidates lie: toward the end of the
    // path for quality constraints, toward the start for size constraints.
    let green_up = !constraint.is_size_constraint();
    let mid = (len - 1) / 2;
    let (e, ok) = probe(mid, &mut trace)?;
    evals[mid] = Some(e);

    let step = |i: usize, up: bool| -> Option<usize> {
        if up {
            (i + 1 < len).then_some(i + 1)
        } else {
            i.checked_sub(1)
        }
    };

    let mut best = if ok { Some(mid) } else { None };
    // Satisfied: push outward while it holds. Violated: retreat until it holds.
    let dir_up = if ok { green_up } else { !green_up };
    let mut cur = mid;
    while let Some(next) = step(cur, dir_up) {
        let (e, ok_next) = probe(next, &mut trace)?;
        if let Some(prev) = evals[cur] {
            let expected = if next > cur {
                e.psnr_drop_db >= prev.psnr_drop_db && e.estimated_bytes <= prev.estimated_bytes
            } else {
                e.psnr_drop_db <= prev.psnr_drop_db && e.estimated_bytes >= prev.estimated_bytes
            };
            if !expected {
                trace.non_monotone_steps += 1;
            }
        }
        evals[next] = Some(e);
        cur = next;
        if ok {
            if !ok_next {
                break;
            }
            best = Some(next);
        } else if ok_next {
            best = Some(next);
            break;
        }
    }

    let feasible = best.is_some();
    let chosen = match best {
        Some(b) => b,
        None => {
            // Best effort: the quality end for quality targets, the smallest
            // candidate for size targets. Both ends were evaluated by the
            // retreat above.
            if green_up {
                0
            } else {
                len - 1
            }
        }
    };
    if !feasible {
        warn!("no candidate satisfies {constraint:?}; returning candidate {chosen}");
    }
    trace.chosen = Some(chosen);
    trace.feasible = feasible;
    let evaluation = evals[chosen].expect("chosen candidate was evaluated");
    Ok(SearchOutcome {
        chosen,
        feasible,
        evaluation,
        trace,
    })
}

/// Shared, read-only state for evaluating candidates of one input model.
pub struct EvalContext<'a> {
    pub model: &'a GaussianModel,
    pub scores: &'a ImportanceScores,
    pub cameras: &'a [Camera],
    pub baseline: &'a [ImageBuffer],
    pub reference_psnr_db: f64,
}

impl EvalContext<'_> {
    /// Prune and quantize a copy of the input for `plan`.
    pub fn build(&self, plan: &CompressionPlan) -> Result<(mpq::QuantizedModel, GaussianModel)> {
        let pruned = adp::apply_pruning(self.model, self.scores, &plan.pruning)?;
        mpq::apply_quantization(&pruned, &plan.quant)
    }

    pub fn evaluate(&self, plan: &CompressionPlan) -> Result<(Evaluation, QualityReport)> {
        let (q, decoded) = self.build(plan)?;
        let report = metrics::quality_against(self.baseline, &decoded, self.cameras, self.reference_psnr_db)?;
        Ok((
            Evaluation {
                psnr_drop_db: report.psnr_drop_db,
                psnr: report.psnr,
                ssim: report.ssim,
                estimated_bytes: fgc::estimate_compressed_size(&q),
            },
            report,
        ))
    }
}

/// Copy → prune → quantize → dequantize → evaluate for one candidate.
pub fn evaluate_candidate(
    model: &GaussianModel,
    scores: &ImportanceScores,
    plan: &CompressionPlan,
    cameras: &[Camera],
    baseline: &[ImageBuffer],
) -> Result<Evaluation> {
    let ctx = EvalContext {
        model,
        scores,
        cameras,
        baseline,
        reference_psnr_db: REFERENCE_PSNR_DB,
    };
    Ok(ctx.evaluate(plan)?.0)
}

pub fn candidate_plan(c: &Candidate) -> CompressionPlan {
    CompressionPlan {
        pruning: c.pruning,
        quant: c.quant.clone(),
    }
}

/// Search `path` with real evaluations; the trace records each step's plan.
pub fn search_path(
    ctx: &EvalContext<'_>,
    path: &[Candidate],
    constraint: &Constraint,
    input_bytes: u64,
) -> Result<SearchOutcome> {
    let mut outcome = search(path.len(), constraint, input_bytes, |i| {
        Ok(ctx.evaluate(&candidate_plan(&path[i]))?.0)
    })?;
    for s in &mut outcome.trace.steps {
        s.plan = Some(candidate_plan(&path[s.candidate_index]));
    }
    Ok(outcome)
}

/// Add uniform-INT8 and uniform-INT4 variants at the two ends of the path,
/// when they extend it.
pub fn extend_joint(path: &mut Vec<Candidate>, scores: &ImportanceScores) {
    let Some(first) = path.first().cloned() else {
        return;
    };
    let last = path.last().cloned().unwrap();
    let group_count = first.quant.group_count;
    let hi = adp::make_candidate(scores, first.point, &QuantizationPlan::uniform(8, group_count));
    if hi.estimated_bytes > first.estimated_bytes {
        path.insert(0, hi);
    }
    let lo = adp::make_candidate(scores, last.point, &QuantizationPlan::uniform(4, group_count));
    if lo.estimated_bytes < last.estimated_bytes {
        path.push(lo);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeBreakdown {
    pub load: f64,
    pub scoring: f64,
    pub adaptation: f64,
    pub storage: f64,
}

impl TimeBreakdown {
    pub fn total(&self) -> f64 {
        self.load + self.scoring + self.adaptation + self.storage
    }
}

#[derive(Clone, Debug)]
pub struct CompressOptions {
    pub grid: CandidateGrid,
    pub quant: QuantizationPlan,
    /// Re-derive bit-widths from an INT4 sensitivity probe before searching.
    pub probe_sensitivity: bool,
    pub int4_threshold_db: f64,
    pub joint: bool,
    pub max_eval_views: usize,
    pub importance: ImportanceConfig,
    /// Cameras for importance scoring; the evaluation cameras when absent.
    pub training_cameras: Option<Vec<Camera>>,
    pub reference_psnr_db: f64,
    /// Size the ratio is measured against; the model's uncompressed size
    /// without normals when absent.
    pub input_bytes: Option<u64>,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            grid: CandidateGrid::default(),
            quant: QuantizationPlan::default(),
            probe_sensitivity: false,
            int4_threshold_db: DEFAULT_INT4_THRESHOLD_DB,
            joint: false,
            max_eval_views: DEFAULT_EVAL_VIEWS,
            importance: ImportanceConfig::default(),
            training_cameras: None,
            reference_psnr_db: REFERENCE_PSNR_DB,
            input_bytes: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompressResult {
    pub bytes: Vec<u8>,
    pub plan: CompressionPlan,
    pub quality: QualityReport,
    pub trace: SearchTrace,
    pub feasible: bool,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub ratio: f64,
    pub reduction_pct: f64,
    pub time: TimeBreakdown,
    pub path: Vec<Candidate>,
}

/// Score, search and write. `time.load` is left for the caller to fill.
pub fn compress(
    model: &GaussianModel,
    cameras: &[Camera],
    constraint: &Constraint,
    options: &CompressOptions,
) -> Result<CompressResult> {
    constraint.validate()?;
    options.quant.validate()?;
    if cameras.is_empty() {
        return Err(Error::invalid("compression needs at least one camera"));
    }
    let eval_cams = &cameras[..cameras.len().min(options.max_eval_views.max(1))];
    let mut time = TimeBreakdown::default();

    let t = Instant::now();
    let score_cams = match &options.training_cameras {
        Some(c) if !c.is_empty() => c.as_slice(),
        _ => {
            info!("no training cameras given; scoring importance with the evaluation cameras");
            cameras
        }
    };
    let (scores, baseline) = if std::ptr::eq(score_cams, cameras) && eval_cams.len() == cameras.len() {
        let (images, stats) = render::render_views_with_stats(model, cameras)?;
        (importance::from_hits(model, &stats, &options.importance)?, images)
    } else {
        (
            importance::compute_scores_with(model, score_cams, &options.importance)?,
            render::render_views(model, eval_cams)?,
        )
    };
    time.scoring = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let quant = if options.probe_sensitivity {
        let gaps = mpq::probe_channel_sensitivity(
            model,
            eval_cams,
            &baseline,
            options.quant.group_count,
            ProbeGranularity::Groups,
        )?;
        mpq::assign_bitwidths(&gaps, options.int4_threshold_db, options.quant.group_count)
    } else {
        options.quant.clone()
    };
    let mut path = adp::default_path(&options.grid, &scores, &quant)?;
    if options.joint {
        extend_joint(&mut path, &scores);
    }
    info!("candidate path has {} entries", path.len());
    let ctx = EvalContext {
        model,
        scores: &scores,
        cameras: eval_cams,
        baseline: &baseline,
        reference_psnr_db: options.reference_psnr_db,
    };
    let input_bytes = options.input_bytes.unwrap_or_else(|| model.byte_size());
    let outcome = search_path(&ctx, &path, constraint, input_bytes)?;
    time.adaptation = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let plan = candidate_plan(&path[outcome.chosen]);
    let (q, decoded) = ctx.build(&plan)?;
    let bytes = fgc::write_fgc(&q, &plan.pruning)?;
    time.storage = t.elapsed().as_secs_f64();
    let quality = metrics::quality_against(&baseline, &decoded, eval_cams, options.reference_psnr_db)?;

    let output_bytes = bytes.len() as u64;
    let ratio = metrics::compression_ratio(input_bytes as f64, output_bytes as f64)?;
    Ok(CompressResult {
        bytes,
        plan,
        quality,
        feasible: outcome.feasible,
        trace: outcome.trace,
        input_bytes,
        output_bytes,
        ratio: ratio.ratio,
        reduction_pct: ratio.reduction_pct,
        time,
        path,
    })
}

/// Evaluate every candidate (no search); used for rate-distortion sweeps.
pub fn sweep(ctx: &EvalContext<'_>, candidates: &[Candidate]) -> Result<Vec<Evaluation>> {
    candidates
        .iter()
        .map(|c| Ok(ctx.evaluate(&candidate_plan(c))?.0))
        .collect()
}

/// Plan helper for callers that want a specific point rather than a search.
pub fn plan_for(pruning: PruningPlan, quant: QuantizationPlan) -> CompressionPlan {
    CompressionPlan { pruning, quant }
}
