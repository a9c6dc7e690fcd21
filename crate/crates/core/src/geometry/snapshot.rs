//! Field snapshots: a flat little-endian binary layout and CSV.
//!
//! Binary layout: the 8-byte magic `VELFIELD`, then `u32` version, `u32`
//! component count, three `u64` grid dimensions `(n_r, n_φ, n_ψ)`, the `f64`
//! radius, and finally node-major `f64` values.

use std::io::{Read, Write};

use super::grid::BallGrid;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VELFIELD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dims: (usize, usize, usize),
    pub r0: f64,
    pub components: usize,
    pub values: Vec<f64>,
}

pub fn write_snapshot<W: Write>(mut w: W, grid: &BallGrid, components: usize, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() * components {
        return Err(Error::Grid("snapshot size does not match the grid".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(components as u32).to_le_bytes())?;
    for d in [grid.n_r, grid.n_phi, grid.n_psi] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&grid.r0.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a field snapshot".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::Io("unsupported snapshot version".into()));
    }
    r.read_exact(&mut b4)?;
    let components = u32::from_le_bytes(b4) as usize;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut b8)?;
        *d = u64::from_le_bytes(b8) as usize;
    }
    r.read_exact(&mut b8)?;
    let r0 = f64::from_le_bytes(b8);
    let n = dims[0] * dims[1] * dims[2] * components;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok(Snapshot {
        dims: (dims[0], dims[1], dims[2]),
        r0,
        components,
        values,
    })
}

/// One row per node: indices, position, then the components.
pub fn write_snapshot_csv<W: Write>(w: W, grid: &BallGrid, components: usize, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() * components {
        return Err(Error::Grid("snapshot size does not match the grid".into()));
    }
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["i", "j", "k", "y1", "y2", "y3"].iter().map(|s| s.to_string()).collect();
    header.extend((0..components).map(|c| format!("v{c}")));
    out.write_record(&header).map_err(io)?;
    for (idx, y) in grid.positions().iter().enumerate() {
        let (i, j, k) = grid.unindex(idx);
        let mut row = vec![i.to_string(), j.to_string(), k.to_string()];
        row.extend(y.iter().map(|v| format!("{v:.17e}")));
        row.extend(values[idx * components..(idx + 1) * components].iter().map(|v| format!("{v:.17e}")));
        out.write_record(&row).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}
