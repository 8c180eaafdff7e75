//! In-memory Gaussian table, its channel schema and activation conventions.
//!
//! Every Gaussian is one row of [`ROW_WIDTH`] raw (pre-activation) floats in
//! the same column order as the on-disk PLY layout minus normals:
//!
//! | columns  | group      | storage                     |
//! |----------|------------|-----------------------------|
//! | 0..3     | Position   | as-is                       |
//! | 3..6     | SH base    | as-is (degree-0 SH, RGB)    |
//! | 6..51    | SH adv     | as-is (degrees 1-3, RGB-major) |
//! | 51       | Opacity    | logit                       |
//! | 52..55   | Scale      | log                         |
//! | 55..59   | Rotation   | unnormalized quaternion wxyz |

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::Hasher;
use std::ops::Range;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ply;

pub const ROW_WIDTH: usize = 59;
pub const SH_ADV_WIDTH: usize = 45;
/// Channels kept by a row whose SH_adv block is pruned.
pub const BASE_WIDTH: usize = ROW_WIDTH - SH_ADV_WIDTH;

pub const POSITION: Range<usize> = 0..3;
pub const SH_BASE: Range<usize> = 3..6;
pub const SH_ADV: Range<usize> = 6..51;
pub const OPACITY: usize = 51;
pub const SCALE: Range<usize> = 52..55;
pub const ROTATION: Range<usize> = 55..59;

/// Column indices of the 14 channels that survive SH pruning, in row order.
pub const BASE_CHANNELS: [usize; BASE_WIDTH] = [0, 1, 2, 3, 4, 5, 51, 52, 53, 54, 55, 56, 57, 58];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelGroup {
    Position,
    Scale,
    Rotation,
    Opacity,
    #[serde(rename = "SHBase")]
    ShBase,
    #[serde(rename = "SHAdv")]
    ShAdv,
}

impl ChannelGroup {
    pub const ALL: [ChannelGroup; 6] = [
        ChannelGroup::Position,
        ChannelGroup::Scale,
        ChannelGroup::Rotation,
        ChannelGroup::Opacity,
        ChannelGroup::ShBase,
        ChannelGroup::ShAdv,
    ];

    pub fn width(self) -> usize {
        self.columns().len()
    }

    pub fn columns(self) -> Range<usize> {
        match self {
            ChannelGroup::Position => POSITION,
            ChannelGroup::Scale => SCALE,
            ChannelGroup::Rotation => ROTATION,
            ChannelGroup::Opacity => OPACITY..OPACITY + 1,
            ChannelGroup::ShBase => SH_BASE,
            ChannelGroup::ShAdv => SH_ADV,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelGroup::Position => "Position",
            ChannelGroup::Scale => "Scale",
            ChannelGroup::Rotation => "Rotation",
            ChannelGroup::Opacity => "Opacity",
            ChannelGroup::ShBase => "SHBase",
            ChannelGroup::ShAdv => "SHAdv",
        }
    }
}

impl fmt::Display for ChannelGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    pub name: String,
    pub group: ChannelGroup,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSchema {
    channels: Vec<Channel>,
}

static STANDARD_SCHEMA: LazyLock<ChannelSchema> = LazyLock::new(|| {
    let mut channels = Vec::with_capacity(ROW_WIDTH);
    let mut push = |name: String, group| channels.push(Channel { name, group });
    for axis in ["x", "y", "z"] {
        push(axis.to_string(), ChannelGroup::Position);
    }
    for i in 0..3 {
        push(format!("f_dc_{i}"), ChannelGroup::ShBase);
    }
    for i in 0..SH_ADV_WIDTH {
        push(format!("f_rest_{i}"), ChannelGroup::ShAdv);
    }
    push("opacity".to_string(), ChannelGroup::Opacity);
    for i in 0..3 {
        push(format!("scale_{i}"), ChannelGroup::Scale);
    }
    for i in 0..4 {
        push(format!("rot_{i}"), ChannelGroup::Rotation);
    }
    ChannelSchema { channels }
});

impl ChannelSchema {
    /// The fixed 59-column schema for degree-3 SH models.
    pub fn standard() -> &'static ChannelSchema {
        &STANDARD_SCHEMA
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn total_width(&self) -> usize {
        self.channels.len()
    }

    pub fn name(&self, column: usize) -> &str {
        &self.channels[column].name
    }

    pub fn group(&self, column: usize) -> ChannelGroup {
        self.channels[column].group
    }

    pub fn group_width(&self, group: ChannelGroup) -> usize {
        self.channels.iter().filter(|c| c.group == group).count()
    }
}

/// Raw-to-activated conversions. Evaluated in f64 so that the stored f32
/// value survives a round trip.
pub mod activation {
    pub fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    pub fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    pub fn scale(log_scale: f64) -> f64 {
        log_scale.exp()
    }

    pub fn log_scale(scale: f64) -> f64 {
        scale.ln()
    }

    /// Unit quaternion, or `None` when the input has (near) zero norm.
    pub fn normalize_quat(q: [f32; 4]) -> Option<[f32; 4]> {
        let norm = q.iter().map(|v| v * v).sum::<f32>().sqrt();
        if !(norm > 1e-12) || !norm.is_finite() {
            return None;
        }
        Some(q.map(|v| v / norm))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    NonFinite,
    DegenerateRotation,
    OpacityOutOfRange,
    NonPositiveScale,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub channel: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {} channel {}: {:?}", self.row, self.channel, self.rule)
    }
}

/// `N × 59` raw attribute table plus a per-row SH_adv mask.
///
/// A masked row keeps its SH_adv floats in memory but they are treated as
/// zeros by the renderer, serializers and size accounting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussianModel {
    data: Vec<f32>,
    sh_mask: Vec<bool>,
}

impl GaussianModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(rows: usize) -> Self {
        Self {
            data: Vec::with_capacity(rows * ROW_WIDTH),
            sh_mask: Vec::with_capacity(rows),
        }
    }

    pub fn zeros(rows: usize) -> Self {
        Self {
            data: vec![0.0; rows * ROW_WIDTH],
            sh_mask: vec![false; rows],
        }
    }

    pub fn from_rows(data: Vec<f32>) -> Result<Self> {
        if data.len() % ROW_WIDTH != 0 {
            return Err(Error::invalid(format!(
                "attribute buffer of {} floats is not a multiple of {ROW_WIDTH}",
                data.len()
            )));
        }
        let rows = data.len() / ROW_WIDTH;
        Ok(Self {
            data,
            sh_mask: vec![false; rows],
        })
    }

    pub fn schema(&self) -> &'static ChannelSchema {
        ChannelSchema::standard()
    }

    pub fn len(&self) -> usize {
        self.sh_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sh_mask.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * ROW_WIDTH..(i + 1) * ROW_WIDTH]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * ROW_WIDTH..(i + 1) * ROW_WIDTH]
    }

    pub fn push_row(&mut self, row: &[f32], sh_masked: bool) {
        assert_eq!(row.len(), ROW_WIDTH, "row must have {ROW_WIDTH} channels");
        self.data.extend_from_slice(row);
        self.sh_mask.push(sh_masked);
    }

    pub fn get(&self, row: usize, column: usize) -> f32 {
        self.data[row * ROW_WIDTH + column]
    }

    pub fn set(&mut self, row: usize, column: usize, value: f32) {
        self.data[row * ROW_WIDTH + column] = value;
    }

    pub fn sh_mask(&self) -> &[bool] {
        &self.sh_mask
    }

    pub fn is_sh_masked(&self, row: usize) -> bool {
        self.sh_mask[row]
    }

    pub fn set_sh_mask(&mut self, row: usize, masked: bool) {
        self.sh_mask[row] = masked;
    }

    pub fn masked_rows(&self) -> usize {
        self.sh_mask.iter().filter(|&&m| m).count()
    }

    /// Copy rows in the given order into a new model, masks included.
    pub fn select_rows(&self, rows: &[usize]) -> GaussianModel {
        let mut out = GaussianModel::with_capacity(rows.len());
        for &r in rows {
            out.push_row(self.row(r), self.sh_mask[r]);
        }
        out
    }

    /// Independent copy that reports allocation failure instead of aborting.
    pub fn deep_copy(&self) -> Result<GaussianModel> {
        let mut data = Vec::new();
        data.try_reserve_exact(self.data.len())
            .map_err(|_| Error::Resource(self.data.len() * 4))?;
        data.extend_from_slice(&self.data);
        let mut sh_mask = Vec::new();
        sh_mask
            .try_reserve_exact(self.sh_mask.len())
            .map_err(|_| Error::Resource(self.sh_mask.len()))?;
        sh_mask.extend_from_slice(&self.sh_mask);
        Ok(GaussianModel { data, sh_mask })
    }

    /// Hash over every attribute bit pattern and mask bit.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        h.write_usize(self.len());
        for v in &self.data {
            h.write_u32(v.to_bits());
        }
        for &m in &self.sh_mask {
            h.write_u8(m as u8);
        }
        h.finish()
    }

    pub fn position(&self, i: usize) -> [f32; 3] {
        let r = self.row(i);
        [r[0], r[1], r[2]]
    }

    pub fn opacity(&self, i: usize) -> f32 {
        activation::sigmoid(self.get(i, OPACITY) as f64) as f32
    }

    pub fn scales(&self, i: usize) -> [f32; 3] {
        let r = self.row(i);
        [r[52], r[53], r[54]].map(|v| activation::scale(v as f64) as f32)
    }

    pub fn rotation(&self, i: usize) -> Option<[f32; 4]> {
        let r = self.row(i);
        activation::normalize_quat([r[55], r[56], r[57], r[58]])
    }

    /// SH coefficients as 16 RGB triples, degree 0 first. Masked rows report
    /// zeros for degrees 1-3.
    pub fn sh_coefficients(&self, i: usize) -> [[f32; 3]; 16] {
        let r = self.row(i);
        let mut out = [[0.0f32; 3]; 16];
        out[0] = [r[3], r[4], r[5]];
        if !self.sh_mask[i] {
            // f_rest is stored color-major: 15 coefficients for R, then G, then B.
            for (k, coeff) in out.iter_mut().enumerate().skip(1) {
                for (c, slot) in coeff.iter_mut().enumerate() {
                    *slot = r[SH_ADV.start + c * 15 + (k - 1)];
                }
            }
        }
        out
    }

    /// Check finiteness and activation invariants for every row.
    pub fn validate(&self) -> Vec<Violation> {
        let schema = self.schema();
        let mut out = Vec::new();
        for i in 0..self.len() {
            let row = self.row(i);
            let mut finite = true;
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    finite = false;
                    out.push(Violation {
                        row: i,
                        channel: schema.name(c).to_string(),
                        rule: Rule::NonFinite,
                    });
                }
            }
            if !finite {
                continue;
            }
            if self.rotation(i).is_none() {
                out.push(Violation {
                    row: i,
                    channel: "rot".to_string(),
                    rule: Rule::DegenerateRotation,
                });
            }
            let opacity = self.opacity(i);
            if !(0.0..=1.0).contains(&opacity) {
                out.push(Violation {
                    row: i,
                    channel: "opacity".to_string(),
                    rule: Rule::OpacityOutOfRange,
                });
            }
            for (k, s) in self.scales(i).iter().enumerate() {
                if !(*s > 0.0) || !s.is_finite() {
                    out.push(Violation {
                        row: i,
                        channel: schema.name(SCALE.start + k).to_string(),
                        rule: Rule::NonPositiveScale,
                    });
                }
            }
        }
        out
    }

    /// Uncompressed size: PLY header plus 59 floats per full row and 14 per
    /// SH-masked row.
    pub fn byte_size(&self) -> u64 {
        let masked = self.masked_rows() as u64;
        let full = self.len() as u64 - masked;
        ply::header_len(self.len()) as u64
            + full * (ROW_WIDTH as u64) * 4
            + masked * (BASE_WIDTH as u64) * 4
    }
}

/// Free-function form of [`GaussianModel::byte_size`].
pub fn model_byte_size(model: &GaussianModel) -> u64 {
    model.byte_size()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_row() -> Vec<f32> {
        let mut row = vec![0.0f32; ROW_WIDTH];
        row[ROTATION.start] = 1.0;
        row
    }

    #[test]
    fn schema_widths() {
        let schema = ChannelSchema::standard();
        assert_eq!(schema.total_width(), 59);
        let widths: Vec<usize> = ChannelGroup::ALL
            .iter()
            .map(|&g| schema.group_width(g))
            .collect();
        assert_eq!(widths, vec![3, 3, 4, 1, 3, 45]);
        assert_eq!(widths.iter().sum::<usize>(), 59);
        for g in ChannelGroup::ALL {
            assert_eq!(g.width(), schema.group_width(g));
            for c in g.columns() {
                assert_eq!(schema.group(c), g);
            }
        }
        assert_eq!(schema.name(51), "opacity");
        assert_eq!(schema.name(6), "f_rest_0");
        assert_eq!(schema.name(58), "rot_3");
    }

    #[test]
    fn base_channels_exclude_sh_adv() {
        for c in BASE_CHANNELS {
            assert!(!SH_ADV.contains(&c));
        }
        assert_eq!(BASE_CHANNELS.len() + SH_ADV_WIDTH, ROW_WIDTH);
    }

    #[test]
    fn nan_position_is_reported() {
        let mut m = GaussianModel::new();
        m.push_row(&unit_row(), false);
        m.push_row(&unit_row(), false);
        m.set(1, 2, f32::NAN);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row, 1);
        assert_eq!(v[0].channel, "z");
        assert_eq!(v[0].rule, Rule::NonFinite);
    }

    #[test]
    fn zero_quaternion_is_reported() {
        let mut m = GaussianModel::new();
        let mut row = unit_row();
        row[ROTATION.start] = 0.0;
        m.push_row(&row, false);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::DegenerateRotation);
    }

    #[test]
    fn copy_is_isolated() {
        let mut m = GaussianModel::new();
        for _ in 0..5 {
            m.push_row(&unit_row(), false);
        }
        let before = m.checksum();
        let copy = m.deep_copy().unwrap();
        assert_eq!(copy.checksum(), before);
        let mut copy = copy.select_rows(&[]);
        assert!(copy.is_empty());
        copy.push_row(&unit_row(), true);
        assert_eq!(m.len(), 5);
        assert_eq!(m.checksum(), before);
        assert!(GaussianModel::new().deep_copy().unwrap().is_empty());
    }

    #[test]
    fn byte_size_counts_masked_rows_as_base_only() {
        let header = ply::header_len(1) as u64;
        let mut m = GaussianModel::new();
        m.push_row(&unit_row(), false);
        assert_eq!(m.byte_size(), 59 * 4 + header);
        m.set_sh_mask(0, true);
        assert_eq!(m.byte_size(), 14 * 4 + header);
    }

    #[test]
    fn masked_row_hides_sh_adv() {
        let mut m = GaussianModel::new();
        let mut row = unit_row();
        for v in &mut row[SH_ADV] {
            *v = 0.5;
        }
        // f_rest_15 is the first green coefficient of degree 1.
        row[SH_ADV.start + 15] = 2.0;
        m.push_row(&row, false);
        assert_eq!(m.sh_coefficients(0)[1], [0.5, 2.0, 0.5]);
        m.set_sh_mask(0, true);
        assert!(m.sh_coefficients(0)[1..].iter().all(|c| *c == [0.0; 3]));
    }

    #[test]
    fn activations_round_trip() {
        for &x in &[-8.0f32, -1.5, -0.1, 0.3, 2.0, 7.5] {
            let x = x as f64;
            let back = activation::logit(activation::sigmoid(x));
            assert!((back - x).abs() <= 1e-6 * x.abs(), "{x} -> {back}");
            let back = activation::log_scale(activation::scale(x));
            assert!((back - x).abs() <= 1e-6 * x.abs(), "{x} -> {back}");
        }
    }
}
