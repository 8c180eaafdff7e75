//! Channel-wise INT4/INT8 round-to-nearest quantization with per-subgroup
//! ranges.
//!
//! A channel of `n` rows is split into contiguous groups of
//! `ceil(n / group_count)` rows; each group gets its own `[min, max]`. Codes are
//! `round((x - min) / (max - min) · (2^b - 1))` evaluated in f32 with ties
//! rounded away from zero, and decode as the f64 interpolation
//! `min·(1 - t) + max·t` with `t = code / (2^b - 1)`, cast back to f32. Both
//! ends of a group therefore decode exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, REFERENCE_PSNR_DB};
use crate::model::{ChannelGroup, GaussianModel, BASE_CHANNELS, ROW_WIDTH, SH_ADV};
use crate::render::{Camera, ImageBuffer};

pub const DEFAULT_GROUP_COUNT: u32 = 1000;
pub const DEFAULT_INT4_THRESHOLD_DB: f64 = 0.25;
pub const SUPPORTED_BITWIDTHS: [u8; 2] = [4, 8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationPlan {
    /// One entry per channel, each 4 or 8.
    pub bitwidths: Vec<u8>,
    pub group_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub int4_threshold_db: Option<f64>,
}

impl Default for QuantizationPlan {
    /// Geometry and opacity at 8 bits, both SH blocks at 4 bits.
    fn default() -> Self {
        let mut bitwidths = vec![8u8; ROW_WIDTH];
        for g in [ChannelGroup::ShBase, ChannelGroup::ShAdv] {
            for c in g.columns() {
                bitwidths[c] = 4;
            }
        }
        Self {
            bitwidths,
            group_count: DEFAULT_GROUP_COUNT,
            int4_threshold_db: None,
        }
    }
}

impl QuantizationPlan {
    pub fn uniform(bits: u8, group_count: u32) -> Self {
        Self {
            bitwidths: vec![bits; ROW_WIDTH],
            group_count,
            int4_threshold_db: None,
        }
    }

    pub fn with_group_count(mut self, group_count: u32) -> Self {
        self.group_count = group_count;
        self
    }

    /// Set every channel of `group` to `bits`.
    pub fn with_group_bits(mut self, group: ChannelGroup, bits: u8) -> Self {
        for c in group.columns() {
            self.bitwidths[c] = bits;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bitwidths.len() != ROW_WIDTH {
            return Err(Error::invalid(format!(
                "plan has {} bit-widths, expected {ROW_WIDTH}",
                self.bitwidths.len()
            )));
        }
        if let Some(b) = self.bitwidths.iter().find(|b| !SUPPORTED_BITWIDTHS.contains(b)) {
            return Err(Error::invalid(format!("unsupported bit-width {b}")));
        }
        if self.group_count == 0 {
            return Err(Error::invalid("group count must be at least 1"));
        }
        Ok(())
    }

    /// Bits per row in the full segment.
    pub fn full_row_bits(&self) -> u64 {
        self.bitwidths.iter().map(|&b| b as u64).sum()
    }

    /// Bits per row in the SH-pruned segment.
    pub fn base_row_bits(&self) -> u64 {
        BASE_CHANNELS.iter().map(|&c| self.bitwidths[c] as u64).sum()
    }

    /// Short name used in reports: `int8`, `int4`, `default` or `custom`.
    pub fn profile_name(&self) -> &'static str {
        if self.bitwidths.iter().all(|&b| b == 8) {
            "int8"
        } else if self.bitwidths.iter().all(|&b| b == 4) {
            "int4"
        } else if self.bitwidths == QuantizationPlan::default().bitwidths {
            "default"
        } else {
            "custom"
        }
    }
}

/// `(rows per group, number of non-empty groups)` for a segment.
pub fn group_layout(rows: usize, group_count: u32) -> (usize, usize) {
    if rows == 0 {
        return (0, 0);
    }
    let size = rows.div_ceil(group_count.max(1) as usize);
    (size, rows.div_ceil(size))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRange {
    pub min: f32,
    pub max: f32,
}

impl GroupRange {
    /// Spacing between adjacent decode levels.
    pub fn step(&self, bitwidth: u8) -> f64 {
        (self.max as f64 - self.min as f64) / levels(bitwidth) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedChannel {
    pub bitwidth: u8,
    pub group_size: usize,
    pub ranges: Vec<GroupRange>,
    pub codes: Vec<u8>,
}

fn levels(bitwidth: u8) -> u32 {
    (1u32 << bitwidth) - 1
}

fn check_bitwidth(bitwidth: u8) -> Result<()> {
    if SUPPORTED_BITWIDTHS.contains(&bitwidth) {
        Ok(())
    } else {
        Err(Error::invalid(format!("unsupported bit-width {bitwidth}")))
    }
}

#[inline]
fn encode(x: f32, range: GroupRange, lv: f32) -> u8 {
    if range.max == range.min {
        return 0;
    }
    let span = range.max - range.min;
    let t = if span.is_finite() {
        (x - range.min) / span * lv
    } else {
        ((x as f64 - range.min as f64) / (range.max as f64 - range.min as f64) * lv as f64) as f32
    };
    t.round().clamp(0.0, lv) as u8
}

#[inline]
fn decode(code: u8, range: GroupRange, lv: u32) -> f32 {
    let t = code as f64 / lv as f64;
    (range.min as f64 * (1.0 - t) + range.max as f64 * t) as f32
}

/// Quantize one channel's values (row order) into per-group ranges and codes.
pub fn quantize_channel(values: &[f32], bitwidth: u8, group_count: u32) -> Result<QuantizedChannel> {
    check_bitwidth(bitwidth)?;
    if group_count == 0 {
        return Err(Error::invalid("group count must be at least 1"));
    }
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row,
            channel: String::from("<quantized channel>"),
        });
    }
    let (group_size, n_groups) = group_layout(values.len(), group_count);
    let lv = levels(bitwidth) as f32;
    let mut ranges = Vec::with_capacity(n_groups);
    let mut codes = Vec::with_capacity(values.len());
    if group_size > 0 {
        for chunk in values.chunks(group_size) {
            let range = chunk.iter().fold(
                GroupRange {
                    min: f32::INFINITY,
                    max: f32::NEG_INFINITY,
                },
                |r, &v| GroupRange {
                    min: r.min.min(v),
                    max: r.max.max(v),
                },
            );
            codes.extend(chunk.iter().map(|&x| encode(x, range, lv)));
            ranges.push(range);
        }
    }
    Ok(QuantizedChannel {
        bitwidth,
        group_size,
        ranges,
        codes,
    })
}

/// Re-encode `values` against fixed ranges (the layout of `like`).
pub fn encode_with_ranges(values: &[f32], like: &QuantizedChannel) -> Vec<u8> {
    let lv = levels(like.bitwidth) as f32;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| encode(x, like.ranges[i / like.group_size], lv))
        .collect()
}

pub fn dequantize_channel(channel: &QuantizedChannel) -> Result<Vec<f32>> {
    let lv = levels(channel.bitwidth);
    if let Some(&code) = channel.codes.iter().find(|&&c| c as u32 > lv) {
        return Err(Error::CodeOutOfRange {
            code: code as u32,
            bitwidth: channel.bitwidth,
        });
    }
    if channel.codes.is_empty() {
        return Ok(Vec::new());
    }
    let expected_groups = channel.codes.len().div_ceil(channel.group_size.max(1));
    if channel.group_size == 0 || channel.ranges.len() != expected_groups {
        return Err(Error::Format(format!(
            "{} codes with group size {} need {} ranges, found {}",
            channel.codes.len(),
            channel.group_size,
            expected_groups,
            channel.ranges.len()
        )));
    }
    Ok(channel
        .codes
        .iter()
        .enumerate()
        .map(|(i, &c)| decode(c, channel.ranges[i / channel.group_size], lv))
        .collect())
}

/// Quantized rows of one segment; `channels[k]` holds column `columns()[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedSegment {
    pub rows: usize,
    pub channels: Vec<QuantizedChannel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// Rows that keep all 59 channels.
    Full,
    /// Rows whose SH_adv block was pruned; only the 14 base channels.
    ShPruned,
}

impl Segment {
    pub fn columns(self) -> &'static [usize] {
        static ALL: [usize; ROW_WIDTH] = {
            let mut a = [0usize; ROW_WIDTH];
            let mut i = 0;
            while i < ROW_WIDTH {
                a[i] = i;
                i += 1;
            }
            a
        };
        match self {
            Segment::Full => &ALL,
            Segment::ShPruned => &BASE_CHANNELS,
        }
    }
}

/// Code-level representation of a pruned model: full rows first, then
/// SH-pruned rows.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedModel {
    pub bitwidths: Vec<u8>,
    pub group_count: u32,
    pub full: QuantizedSegment,
    pub sh_pruned: QuantizedSegment,
}

impl QuantizedModel {
    pub fn rows(&self) -> usize {
        self.full.rows + self.sh_pruned.rows
    }

    pub fn segment(&self, seg: Segment) -> &QuantizedSegment {
        match seg {
            Segment::Full => &self.full,
            Segment::ShPruned => &self.sh_pruned,
        }
    }

    pub fn payload_bits(&self) -> u64 {
        let full: u64 = self.bitwidths.iter().map(|&b| b as u64).sum();
        let base: u64 = BASE_CHANNELS.iter().map(|&c| self.bitwidths[c] as u64).sum();
        self.full.rows as u64 * full + self.sh_pruned.rows as u64 * base
    }

    /// Decode into a model; SH-pruned rows come back masked with zero SH_adv.
    pub fn dequantize(&self) -> Result<GaussianModel> {
        let n = self.rows();
        let mut model = GaussianModel::zeros(n);
        for (seg, offset) in [(Segment::Full, 0), (Segment::ShPruned, self.full.rows)] {
            let s = self.segment(seg);
            let columns = seg.columns();
            if s.channels.len() != columns.len() {
                return Err(Error::Format(format!(
                    "segment has {} channels, expected {}",
                    s.channels.len(),
                    columns.len()
                )));
            }
            let decoded: Vec<Vec<f32>> = s
                .channels
                .par_iter()
                .map(dequantize_channel)
                .collect::<Result<_>>()?;
            for (values, &col) in decoded.iter().zip(columns) {
                if values.len() != s.rows {
                    return Err(Error::Format(format!(
                        "channel {col} decodes {} rows, segment has {}",
                        values.len(),
                        s.rows
                    )));
                }
                for (r, &v) in values.iter().enumerate() {
                    model.set(offset + r, col, v);
                }
            }
            if seg == Segment::ShPruned {
                for r in 0..s.rows {
                    model.set_sh_mask(offset + r, true);
                }
            }
        }
        Ok(model)
    }
}

fn quantize_segment(
    model: &GaussianModel,
    rows: &[usize],
    seg: Segment,
    plan: &QuantizationPlan,
) -> Result<QuantizedSegment> {
    let channels = seg
        .columns()
        .par_iter()
        .map(|&col| {
            let values: Vec<f32> = rows.iter().map(|&r| model.get(r, col)).collect();
            quantize_channel(&values, plan.bitwidths[col], plan.group_count).map_err(|e| match e {
                Error::NonFinite { row, .. } => Error::NonFinite {
                    row: rows[row],
                    channel: model.schema().name(col).to_string(),
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    Ok(QuantizedSegment {
        rows: rows.len(),
        channels,
    })
}

/// Quantize a (pruned) model. Unmasked rows form the full segment and masked
/// rows the SH-pruned segment, each keeping its relative order.
///
/// Returns the code-level model and its decoded form; the decoded model lists
/// full rows before SH-pruned ones.
pub fn apply_quantization(
    model: &GaussianModel,
    plan: &QuantizationPlan,
) -> Result<(QuantizedModel, GaussianModel)> {
    plan.validate()?;
    let (full_rows, sh_rows): (Vec<usize>, Vec<usize>) =
        (0..model.len()).partition(|&r| !model.is_sh_masked(r));
    let q = QuantizedModel {
        bitwidths: plan.bitwidths.clone(),
        group_count: plan.group_count,
        full: quantize_segment(model, &full_rows, Segment::Full, plan)?,
        sh_pruned: quantize_segment(model, &sh_rows, Segment::ShPruned, plan)?,
    };
    let decoded = q.dequantize()?;
    Ok((q, decoded))
}

/// One probed unit (a channel group or a single channel) and its INT4 gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub label: String,
    pub channels: Vec<usize>,
    pub gap_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    /// Mean PSNR of the all-INT8 configuration against the baseline.
    pub int8_psnr: f64,
    pub entries: Vec<GapEntry>,
}

impl GapTable {
    pub fn gap(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.gap_db)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeGranularity {
    /// The six semantic channel groups.
    Groups,
    /// Each of the 59 channels on its own.
    Channels,
}

fn probe_units(granularity: ProbeGranularity) -> Vec<(String, Vec<usize>)> {
    match granularity {
        ProbeGranularity::Groups => ChannelGroup::ALL
            .iter()
            .map(|g| (g.name().to_string(), g.columns().collect()))
            .collect(),
        ProbeGranularity::Channels => {
            let schema = crate::model::ChannelSchema::standard();
            (0..ROW_WIDTH)
                .map(|c| (schema.name(c).to_string(), vec![c]))
                .collect()
        }
    }
}

fn probe_psnr(
    model: &GaussianModel,
    plan: &QuantizationPlan,
    cameras: &[Camera],
    baseline: &[ImageBuffer],
) -> Result<f64> {
    let (_, decoded) = apply_quantization(model, plan)?;
    Ok(metrics::quality_against(baseline, &decoded, cameras, REFERENCE_PSNR_DB)?.psnr)
}

/// INT4 sensitivity: for each unit, quantize it at 4 bits and everything
/// else at 8, and record the PSNR lost against the all-INT8 configuration.
/// The input model is not modified.
pub fn probe_channel_sensitivity(
    model: &GaussianModel,
    cameras: &[Camera],
    baseline: &[ImageBuffer],
    group_count: u32,
    granularity: ProbeGranularity,
) -> Result<GapTable> {
    if cameras.len() != baseline.len() || cameras.is_empty() {
        return Err(Error::invalid("need one baseline render per camera"));
    }
    let int8 = QuantizationPlan::uniform(8, group_count);
    let int8_psnr = probe_psnr(model, &int8, cameras, baseline)?;
    let entries = probe_units(granularity)
        .into_par_iter()
        .map(|(label, channels)| {
            let mut plan = int8.clone();
            for &c in &channels {
                plan.bitwidths[c] = 4;
            }
            let psnr = probe_psnr(model, &plan, cameras, baseline)?;
            Ok(GapEntry {
                label,
                channels,
                gap_db: int8_psnr - psnr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapTable { int8_psnr, entries })
}

/// INT4 for every unit whose gap is at most `threshold_db`, INT8 otherwise.
pub fn assign_bitwidths(gaps: &GapTable, threshold_db: f64, group_count: u32) -> QuantizationPlan {
    let mut plan = QuantizationPlan::uniform(8, group_count);
    for e in &gaps.entries {
        if e.gap_db <= threshold_db {
            for &c in &e.channels {
                plan.bitwidths[c] = 4;
            }
        }
    }
    plan.int4_threshold_db = Some(threshold_db);
    plan
}

/// Sum of squared reconstruction errors over every stored element.
pub fn reconstruction_sse(model: &GaussianModel, decoded_in_segment_order: &GaussianModel) -> f64 {
    let (full_rows, sh_rows): (Vec<usize>, Vec<usize>) =
        (0..model.len()).partition(|&r| !model.is_sh_masked(r));
    let mut sse = 0.0;
    for (k, &r) in full_rows.iter().chain(&sh_rows).enumerate() {
        let masked = model.is_sh_masked(r);
        for c in 0..ROW_WIDTH {
            if masked && SH_ADV.contains(&c) {
                continue;
            }
            let d = model.get(r, c) as f64 - decoded_in_segment_order.get(k, c) as f64;
            sse += d * d;
        }
    }
    sse
}
