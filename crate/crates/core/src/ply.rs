//! Binary little-endian PLY in the layout written by the reference 3D-GS
//! trainer: 62 float properties per vertex, normals included.
//!
//! Normals are dropped on load and written back as zeros.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::model::{GaussianModel, ROW_WIDTH, SH_ADV};

pub const PLY_PROPERTY_COUNT: usize = 62;
const VERTEX_BYTES: usize = PLY_PROPERTY_COUNT * 4;
const NORMALS: std::ops::Range<usize> = 3..6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endianness {
    Little,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlyHeaderInfo {
    pub vertex_count: usize,
    pub property_names: Vec<String>,
    pub endianness: Endianness,
}

/// The 62 property names in file order.
pub static PROPERTY_NAMES: LazyLock<Vec<String>> = LazyLock::new(|| {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..45).map(|i| format!("f_rest_{i}")));
    names.push("opacity".to_string());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
});

pub fn header(vertex_count: usize) -> String {
    let mut h = String::with_capacity(1500);
    h.push_str("ply\nformat binary_little_endian 1.0\n");
    h.push_str(&format!("element vertex {vertex_count}\n"));
    for name in PROPERTY_NAMES.iter() {
        h.push_str("property float ");
        h.push_str(name);
        h.push('\n');
    }
    h.push_str("end_header\n");
    h
}

/// Exact byte length of the header [`write_ply`] emits for `vertex_count` rows.
pub fn header_len(vertex_count: usize) -> usize {
    header(vertex_count).len()
}

fn read_header_line<R: BufRead>(reader: &mut R, buf: &mut Vec<u8>) -> Result<String> {
    buf.clear();
    let n = reader.read_until(b'\n', buf)?;
    if n == 0 {
        return Err(Error::PlyHeader("unexpected end of file in header".into()));
    }
    let line = std::str::from_utf8(buf)
        .map_err(|_| Error::PlyHeader("header is not valid ASCII".into()))?;
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

pub fn read_header<R: BufRead>(reader: &mut R) -> Result<PlyHeaderInfo> {
    let mut buf = Vec::new();
    if read_header_line(reader, &mut buf)? != "ply" {
        return Err(Error::PlyHeader("missing `ply` magic line".into()));
    }
    let mut format_seen = false;
    let mut vertex_count = None;
    let mut property_names = Vec::new();
    let mut in_vertex = false;
    loop {
        let line = read_header_line(reader, &mut buf)?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                let kind = tokens.next().unwrap_or("");
                if kind != "binary_little_endian" {
                    return Err(Error::PlyHeader(format!("unsupported format `{kind}`")));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = tokens.next().unwrap_or("");
                let count: usize = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::PlyHeader(format!("bad element line `{line}`")))?;
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(Error::PlyHeader("duplicate vertex element".into()));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else if count == 0 {
                    in_vertex = false;
                } else {
                    return Err(Error::PlyHeader(format!("unsupported element `{name}`")));
                }
            }
            Some("property") => {
                if !in_vertex {
                    continue;
                }
                let ty = tokens.next().unwrap_or("");
                let name = tokens.next().unwrap_or("");
                if ty != "float" && ty != "float32" {
                    return Err(Error::PlyHeader(format!(
                        "property `{name}` has type `{ty}`, expected float"
                    )));
                }
                property_names.push(name.to_string());
            }
            Some(other) => {
                return Err(Error::PlyHeader(format!("unexpected header keyword `{other}`")));
            }
        }
    }
    if !format_seen {
        return Err(Error::PlyHeader("missing format line".into()));
    }
    let vertex_count =
        vertex_count.ok_or_else(|| Error::PlyHeader("missing vertex element".into()))?;
    for (index, expected) in PROPERTY_NAMES.iter().enumerate() {
        let found = property_names.get(index).map(String::as_str).unwrap_or("<none>");
        if found != expected {
            return Err(Error::PlyProperty {
                index,
                expected: expected.clone(),
                found: found.to_string(),
            });
        }
    }
    if property_names.len() != PLY_PROPERTY_COUNT {
        return Err(Error::PlyProperty {
            index: PLY_PROPERTY_COUNT,
            expected: "<end of properties>".into(),
            found: property_names[PLY_PROPERTY_COUNT].clone(),
        });
    }
    Ok(PlyHeaderInfo {
        vertex_count,
        property_names,
        endianness: Endianness::Little,
    })
}

pub fn read_ply<R: BufRead>(mut reader: R) -> Result<GaussianModel> {
    let info = read_header(&mut reader)?;
    let n = info.vertex_count;
    let expected = (n as u64) * VERTEX_BYTES as u64;
    let mut model = GaussianModel::with_capacity(n);
    let mut vertex = [0u8; VERTEX_BYTES];
    let mut row = [0f32; ROW_WIDTH];
    for i in 0..n {
        read_full(&mut reader, &mut vertex).map_err(|e| match e {
            ReadFull::Short(got) => Error::Truncated {
                expected,
                actual: (i * VERTEX_BYTES + got) as u64,
            },
            ReadFull::Io(e) => Error::Io(e),
        })?;
        let mut c = 0;
        for p in 0..PLY_PROPERTY_COUNT {
            if NORMALS.contains(&p) {
                continue;
            }
            let v = f32::from_le_bytes(vertex[p * 4..p * 4 + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    channel: PROPERTY_NAMES[p].clone(),
                });
            }
            row[c] = v;
            c += 1;
        }
        model.push_row(&row, false);
    }
    Ok(model)
}

enum ReadFull {
    Short(usize),
    Io(std::io::Error),
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), ReadFull> {
    let mut got = 0;
    while got < buf.len() {
        match reader.read(&mut buf[got..]) {
            Ok(0) => return Err(ReadFull::Short(got)),
            Ok(k) => got += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(ReadFull::Io(e)),
        }
    }
    Ok(())
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianModel> {
    let file = File::open(path)?;
    read_ply(BufReader::with_capacity(1 << 20, file))
}

/// Serialize `model`; SH-masked rows are written with zero SH_adv.
pub fn write_ply_to<W: Write>(model: &GaussianModel, mut writer: W) -> Result<()> {
    writer.write_all(header(model.len()).as_bytes())?;
    let mut vertex = [0u8; VERTEX_BYTES];
    for i in 0..model.len() {
        let row = model.row(i);
        let masked = model.is_sh_masked(i);
        let mut p = 0;
        for (c, &v) in row.iter().enumerate() {
            if p == NORMALS.start {
                vertex[p * 4..(p + 3) * 4].fill(0);
                p += 3;
            }
            let v = if masked && SH_ADV.contains(&c) { 0.0 } else { v };
            vertex[p * 4..p * 4 + 4].copy_from_slice(&v.to_le_bytes());
            p += 1;
        }
        writer.write_all(&vertex)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_ply(model: &GaussianModel, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_ply_to(model, BufWriter::with_capacity(1 << 20, file))
}
