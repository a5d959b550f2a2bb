//! Path cache (`FBM1`) and CSV export.
//!
//! Cache layout, all little-endian: magic `FBM1`, `m: u64`, `K: u64`,
//! `H: f64`, `seed: u64`, `T: f64`, then `K` blocks of `m + 1` node values.

use std::io::{BufRead, Read, Write};

use super::{FbmEnsemble, FbmPath, HurstIndex, SamplerKind, TimeGrid};
use crate::error::{Error, Result};
use crate::rng;

const MAGIC: &[u8; 4] = b"FBM1";

pub fn write_cache<W: Write>(mut w: W, ens: &FbmEnsemble) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(ens.grid.cells() as u64).to_le_bytes())?;
    w.write_all(&(ens.paths.len() as u64).to_le_bytes())?;
    w.write_all(&ens.hurst.value().to_le_bytes())?;
    w.write_all(&ens.seed.to_le_bytes())?;
    w.write_all(&ens.grid.horizon().to_le_bytes())?;
    for p in &ens.paths {
        for v in &p.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format { what: "FBM1 cache", reason: reason.into() }
}

fn read8<R: Read>(r: &mut R) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| bad(e.to_string()))?;
    Ok(b)
}

/// Reads a cache written by [`write_cache`]. Stream ids are restored as
/// replicate 0, paths `0..K`; the sampler kind is not stored.
pub fn read_cache<R: Read>(mut r: R) -> Result<FbmEnsemble> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
    if &magic != MAGIC {
        return Err(bad("wrong magic"));
    }
    let m = u64::from_le_bytes(read8(&mut r)?) as usize;
    let k = u64::from_le_bytes(read8(&mut r)?) as usize;
    let hurst = HurstIndex::new(f64::from_le_bytes(read8(&mut r)?))?;
    let seed = u64::from_le_bytes(read8(&mut r)?);
    let grid = TimeGrid::new(f64::from_le_bytes(read8(&mut r)?), m)?;
    let mut paths = Vec::with_capacity(k);
    for _ in 0..k {
        let values = (0..=m)
            .map(|_| read8(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        paths.push(FbmPath { grid, hurst, values });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad(format!("{} trailing bytes", rest.len())));
    }
    Ok(FbmEnsemble {
        grid,
        hurst,
        seed,
        streams: (0..k as u32).map(|i| rng::stream_id(0, i)).collect(),
        paths,
        method: SamplerKind::Cholesky,
        fallback: None,
    })
}

/// One row per node: `t, path_0, ..., path_{K-1}`.
pub fn write_csv<W: Write>(mut w: W, ens: &FbmEnsemble) -> Result<()> {
    write!(w, "t")?;
    for k in 0..ens.paths.len() {
        write!(w, ",path_{k}")?;
    }
    writeln!(w)?;
    for j in 0..=ens.grid.cells() {
        write!(w, "{:?}", ens.grid.node(j))?;
        for p in &ens.paths {
            write!(w, ",{:?}", p.values[j])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses the CSV layout of [`write_csv`]; the grid is rebuilt from the `t` column.
pub fn read_csv<R: BufRead>(r: R, hurst: HurstIndex) -> Result<Vec<FbmPath>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| csv_bad("empty input"))??;
    let k = header.split(',').count().saturating_sub(1);
    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); k];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(|c| c.trim().parse::<f64>());
        times.push(cells.next().ok_or_else(|| csv_bad("missing t"))?.map_err(|e| csv_bad(e.to_string()))?);
        for col in cols.iter_mut() {
            let v = cells.next().ok_or_else(|| csv_bad("short row"))?;
            col.push(v.map_err(|e| csv_bad(e.to_string()))?);
        }
    }
    if times.len() < 2 {
        return Err(csv_bad("need at least two nodes"));
    }
    let grid = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
    Ok(cols
        .into_iter()
        .map(|values| FbmPath { grid, hurst, values })
        .collect())
}

fn csv_bad(reason: impl Into<String>) -> Error {
    Error::Format { what: "path CSV", reason: reason.into() }
}
