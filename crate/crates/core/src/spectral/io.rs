//! Field files. Binary layout, little-endian: magic `FLD1`, `d: u64`,
//! `M: u64`, `L: f64`, then `M^d` values (last axis fastest).

use std::io::{BufRead, Read, Write};

use super::{GridField, SpatialGrid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FLD1";

fn bad(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Format { what, reason: reason.into() }
}

pub fn write_field<W: Write>(mut w: W, u: &GridField) -> Result<()> {
    let g = u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.dimension() as u64).to_le_bytes())?;
    w.write_all(&(g.points() as u64).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    for v in u.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<GridField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| bad("FLD1 field", e.to_string()))?;
    if &magic != MAGIC {
        return Err(bad("FLD1 field", "wrong magic"));
    }
    let mut word = || -> Result<[u8; 8]> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|e| bad("FLD1 field", e.to_string()))?;
        Ok(b)
    };
    let d = u64::from_le_bytes(word()?) as usize;
    let m = u64::from_le_bytes(word()?) as usize;
    let l = f64::from_le_bytes(word()?);
    let grid = SpatialGrid::new(d, l, m)?;
    let values = (0..grid.len())
        .map(|_| word().map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    GridField::new(grid, values)
}

/// One row per node: coordinates then value.
pub fn write_field_csv<W: Write>(mut w: W, u: &GridField) -> Result<()> {
    let g = u.grid();
    writeln!(w, "{}", if g.dimension() == 1 { "x,value" } else { "x,y,value" })?;
    for (i, v) in u.values().iter().enumerate() {
        let x = g.node(i);
        if g.dimension() == 1 {
            writeln!(w, "{:?},{:?}", x[0], v)?;
        } else {
            writeln!(w, "{:?},{:?},{:?}", x[0], x[1], v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV layout of [`write_field_csv`] onto a known grid.
pub fn read_field_csv<R: BufRead>(r: R, grid: SpatialGrid) -> Result<GridField> {
    let mut values = Vec::with_capacity(grid.len());
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or_default();
        values.push(last.trim().parse::<f64>().map_err(|e| bad("field CSV", format!("line {}: {e}", n + 1)))?);
    }
    GridField::new(grid, values)
}
