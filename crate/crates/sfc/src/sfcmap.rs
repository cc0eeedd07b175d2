//! SFCMAP text format.
//!
//! ```text
//! SFCMAP 1
//! dims nx ny nz
//! res r
//! origin ox oy oz
//! 0100…            (nx·ny·nz characters, x fastest, then y, then z)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sfc_core::env::VoxelMap;

use crate::{Result, SfcError};

pub const HEADER: &str = "SFCMAP 1";

pub fn to_string(map: &VoxelMap) -> String {
    let [nx, ny, nz] = map.dims();
    let [ox, oy, oz] = map.origin();
    let mut out = String::with_capacity(map.len() + 64);
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "dims {nx} {ny} {nz}");
    let _ = writeln!(out, "res {}", map.resolution());
    let _ = writeln!(out, "origin {ox} {oy} {oz}");
    out.extend(map.occupancy().iter().map(|&o| if o { '1' } else { '0' }));
    out.push('\n');
    out
}

fn fields<'a>(line: Option<&'a str>, key: &str, field: &'static str, count: usize) -> Result<Vec<&'a str>> {
    let line = line.ok_or_else(|| SfcError::parse(field, "missing line"))?;
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(key) {
        return Err(SfcError::parse(field, format!("expected '{key} …', got '{line}'")));
    }
    let values: Vec<&str> = parts.collect();
    if values.len() != count {
        return Err(SfcError::parse(field, format!("expected {count} values, got {}", values.len())));
    }
    Ok(values)
}

pub fn parse(text: &str) -> Result<VoxelMap> {
    let mut lines = text.split('\n');
    if lines.next() != Some(HEADER) {
        return Err(SfcError::parse("header", format!("expected '{HEADER}'")));
    }
    let dims = fields(lines.next(), "dims", "dims", 3)?;
    let mut d = [0usize; 3];
    for (slot, v) in d.iter_mut().zip(&dims) {
        *slot = v.parse().map_err(|_| SfcError::parse("dims", format!("'{v}' is not a count")))?;
    }
    let res = fields(lines.next(), "res", "res", 1)?[0];
    let res: f64 = res.parse().map_err(|_| SfcError::parse("res", format!("'{res}' is not a number")))?;
    let origin = fields(lines.next(), "origin", "origin", 3)?;
    let mut o = [0.0; 3];
    for (slot, v) in o.iter_mut().zip(&origin) {
        *slot = v.parse().map_err(|_| SfcError::parse("origin", format!("'{v}' is not a number")))?;
    }
    let data = lines.next().ok_or_else(|| SfcError::parse("data", "missing line"))?;
    if lines.next() != Some("") || lines.next().is_some() {
        return Err(SfcError::parse("data", "expected a single trailing newline"));
    }
    let occupancy = data
        .bytes()
        .map(|c| match c {
            b'0' => Ok(false),
            b'1' => Ok(true),
            other => Err(SfcError::parse("data", format!("unexpected character {:?}", other as char))),
        })
        .collect::<Result<Vec<bool>>>()?;
    let expected = d.iter().product::<usize>();
    if occupancy.len() != expected {
        return Err(SfcError::parse("data", format!("data length mismatch: {} characters for {expected} voxels", occupancy.len())));
    }
    VoxelMap::from_occupancy(d, res, o, occupancy).map_err(|e| SfcError::parse("dims", e.to_string()))
}

pub fn load(path: &Path) -> Result<VoxelMap> {
    let text = std::fs::read_to_string(path).map_err(|e| SfcError::io(path, e))?;
    parse(&text)
}

pub fn save(path: &Path, map: &VoxelMap) -> Result<()> {
    std::fs::write(path, to_string(map)).map_err(|e| SfcError::io(path, e))
}
