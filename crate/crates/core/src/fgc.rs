//! FGC container: segment counts, the plan that produced the file, per-group
//! ranges and the bit-packed codes. All integers and floats little-endian.
//!
//! ```text
//! header   28 B  magic "FGC1", version u32, flags u32 (0), n_full u32,
//!                n_sh_pruned u32, payload_bits u64
//! plan     79 B  alpha f64, beta f64, group_count u32, 59 × bitwidth u8
//! ranges         full segment: 59 channels × groups × (min f32, max f32)
//!                SH-pruned segment: 14 base channels × groups × (min, max)
//! payload        codes, channel-major, full segment then SH-pruned segment,
//!                LSB-first, zero-padded to a whole byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adp::PruningPlan;
use crate::bitpack::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::model::{BASE_CHANNELS, ROW_WIDTH};
use crate::mpq::{self, GroupRange, QuantizationPlan, QuantizedChannel, QuantizedModel, QuantizedSegment, Segment};

pub const MAGIC: [u8; 4] = *b"FGC1";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: u64 = 28;
pub const PLAN_BYTES: u64 = 8 + 8 + 4 + ROW_WIDTH as u64;

/// Pruning and quantization choices that together define a compressed file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlan {
    pub pruning: PruningPlan,
    pub quant: QuantizationPlan,
}

/// A decoded container.
#[derive(Clone, Debug, PartialEq)]
pub struct FgcFile {
    pub pruning: PruningPlan,
    pub model: QuantizedModel,
}

impl FgcFile {
    pub fn plan(&self) -> CompressionPlan {
        CompressionPlan {
            pruning: self.pruning,
            quant: QuantizationPlan {
                bitwidths: self.model.bitwidths.clone(),
                group_count: self.model.group_count,
                int4_threshold_db: None,
            },
        }
    }
}

fn range_table_bytes(rows: usize, channels: usize, group_count: u32) -> u64 {
    let (_, groups) = mpq::group_layout(rows, group_count);
    (channels * groups * 8) as u64
}

/// Exact file size for the given segment sizes and quantization plan.
pub fn estimate_size(n_full: usize, n_sh_pruned: usize, quant: &QuantizationPlan) -> u64 {
    let bits = n_full as u64 * quant.full_row_bits() + n_sh_pruned as u64 * quant.base_row_bits();
    HEADER_BYTES
        + PLAN_BYTES
        + range_table_bytes(n_full, ROW_WIDTH, quant.group_count)
        + range_table_bytes(n_sh_pruned, BASE_CHANNELS.len(), quant.group_count)
        + bits.div_ceil(8)
}

pub fn estimate_compressed_size(model: &QuantizedModel) -> u64 {
    let quant = QuantizationPlan {
        bitwidths: model.bitwidths.clone(),
        group_count: model.group_count,
        int4_threshold_db: None,
    };
    estimate_size(model.full.rows, model.sh_pruned.rows, &quant)
}

pub fn write_fgc(model: &QuantizedModel, pruning: &PruningPlan) -> Result<Vec<u8>> {
    if model.bitwidths.len() != ROW_WIDTH {
        return Err(Error::PlanMismatch(format!(
            "{} bit-widths, expected {ROW_WIDTH}",
            model.bitwidths.len()
        )));
    }
    let size = estimate_compressed_size(model);
    let mut out = Vec::with_capacity(size as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(model.full.rows as u32).to_le_bytes());
    out.extend_from_slice(&(model.sh_pruned.rows as u32).to_le_bytes());
    out.extend_from_slice(&model.payload_bits().to_le_bytes());

    out.extend_from_slice(&pruning.alpha.to_le_bytes());
    out.extend_from_slice(&pruning.beta.to_le_bytes());
    out.extend_from_slice(&model.group_count.to_le_bytes());
    out.extend_from_slice(&model.bitwidths);

    for seg in [Segment::Full, Segment::ShPruned] {
        let s = model.segment(seg);
        check_segment(s, seg, model)?;
        for ch in &s.channels {
            for r in &ch.ranges {
                out.extend_from_slice(&r.min.to_le_bytes());
                out.extend_from_slice(&r.max.to_le_bytes());
            }
        }
    }

    let mut bits = BitWriter::with_capacity_bits(model.payload_bits());
    for seg in [Segment::Full, Segment::ShPruned] {
        for ch in &model.segment(seg).channels {
            for &c in &ch.codes {
                bits.write(c as u32, ch.bitwidth);
            }
        }
    }
    out.extend_from_slice(&bits.into_bytes());
    debug_assert_eq!(out.len() as u64, size);
    Ok(out)
}

fn check_segment(s: &QuantizedSegment, seg: Segment, model: &QuantizedModel) -> Result<()> {
    let columns = seg.columns();
    if s.channels.len() != columns.len() {
        return Err(Error::PlanMismatch(format!(
            "segment has {} channels, expected {}",
            s.channels.len(),
            columns.len()
        )));
    }
    let (size, groups) = mpq::group_layout(s.rows, model.group_count);
    for (ch, &col) in s.channels.iter().zip(columns) {
        if ch.bitwidth != model.bitwidths[col]
            || ch.codes.len() != s.rows
            || ch.ranges.len() != groups
            || (s.rows > 0 && ch.group_size != size)
        {
            return Err(Error::PlanMismatch(format!("channel {col} disagrees with the plan")));
        }
    }
    Ok(())
}

pub fn save_fgc(model: &QuantizedModel, pruning: &PruningPlan, path: impl AsRef<Path>) -> Result<u64> {
    let bytes = write_fgc(model, pruning)?;
    std::fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    total: u64,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Truncated {
                expected: self.total.max((self.pos + n) as u64),
                actual: self.data.len() as u64,
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_fgc(data: &[u8]) -> Result<FgcFile> {
    let mut cur = Cursor {
        data,
        pos: 0,
        total: HEADER_BYTES + PLAN_BYTES,
    };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let _flags = cur.u32()?;
    let n_full = cur.u32()? as usize;
    let n_sh = cur.u32()? as usize;
    let payload_bits = cur.u64()?;

    let pruning = PruningPlan {
        alpha: cur.f64()?,
        beta: cur.f64()?,
    };
    pruning
        .validate()
        .map_err(|e| Error::Format(format!("stored pruning plan: {e}")))?;
    let group_count = cur.u32()?;
    let bitwidths = cur.take(ROW_WIDTH)?.to_vec();
    let quant = QuantizationPlan {
        bitwidths: bitwidths.clone(),
        group_count,
        int4_threshold_db: None,
    };
    quant
        .validate()
        .map_err(|e| Error::Format(format!("stored quantization plan: {e}")))?;

    let expected_bits = n_full as u64 * quant.full_row_bits() + n_sh as u64 * quant.base_row_bits();
    if payload_bits != expected_bits {
        return Err(Error::Format(format!(
            "header declares {payload_bits} payload bits, segment sizes imply {expected_bits}"
        )));
    }
    let total = estimate_size(n_full, n_sh, &quant);
    cur.total = total;
    if (data.len() as u64) > total {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            data.len() as u64 - total
        )));
    }

    let mut segments = Vec::with_capacity(2);
    for (seg, rows) in [(Segment::Full, n_full), (Segment::ShPruned, n_sh)] {
        let (group_size, groups) = mpq::group_layout(rows, group_count);
        let mut channels = Vec::with_capacity(seg.columns().len());
        for &col in seg.columns() {
            let mut ranges = Vec::with_capacity(groups);
            for _ in 0..groups {
                let r = GroupRange {
                    min: cur.f32()?,
                    max: cur.f32()?,
                };
                if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max) {
                    return Err(Error::Format(format!(
                        "channel {col} has invalid range [{}, {}]",
                        r.min, r.max
                    )));
                }
                ranges.push(r);
            }
            channels.push(QuantizedChannel {
                bitwidth: bitwidths[col],
                group_size,
                ranges,
                codes: Vec::new(),
            });
        }
        segments.push(QuantizedSegment { rows, channels });
    }

    let payload = cur.take(payload_bits.div_ceil(8) as usize)?;
    let mut reader = BitReader::new(payload);
    for s in &mut segments {
        for ch in &mut s.channels {
            ch.codes.reserve_exact(s.rows);
            for _ in 0..s.rows {
                ch.codes.push(reader.read(ch.bitwidth)? as u8);
            }
        }
    }
    let sh_pruned = segments.pop().unwrap();
    let full = segments.pop().unwrap();
    Ok(FgcFile {
        pruning,
        model: QuantizedModel {
            bitwidths,
            group_count,
            full,
            sh_pruned,
        },
    })
}

pub fn load_fgc(path: impl AsRef<Path>) -> Result<FgcFile> {
    read_fgc(&std::fs::read(path)?)
}
