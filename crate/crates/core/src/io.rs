//! Field serialization: flat binary layout with a JSON sidecar, plus CSV
//! export for plotting.
//!
//! Binary layout (little endian): u32 dim, u32 resolution, f64 radius,
//! then resolution^dim row-major f64 samples.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct FieldMeta {
    pub dim: usize,
    pub resolution: usize,
    pub radius: f64,
    pub spacing: f64,
    pub symmetry: String,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Write the binary field and its JSON sidecar (`<path>.json`).
pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.resolution() as u32).to_le_bytes())?;
    w.write_all(&g.radius().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let meta = FieldMeta {
        dim: g.dim(),
        resolution: g.resolution(),
        radius: g.radius(),
        spacing: g.spacing(),
        symmetry: "even-in-xn".to_string(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let resolution = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let radius = f64::from_le_bytes(b8);
    let grid = Grid::new(dim, resolution, radius)?;
    let mut values = Vec::with_capacity(grid.node_count());
    for _ in 0..grid.node_count() {
        r.read_exact(&mut b8)
            .map_err(|_| Error::Format("field payload truncated".into()))?;
        values.push(f64::from_le_bytes(b8));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::Format("trailing bytes after field payload".into()));
    }
    ScalarField::from_values(grid, values)
}

/// CSV export: one row per node, coordinate columns then the value.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=g.dim()).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},value", header.join(","))?;
    for flat in 0..g.node_count() {
        let p = g.point(g.multi(flat));
        for a in 0..g.dim() {
            write!(w, "{:.17e},", p[a])?;
        }
        writeln!(w, "{:.17e}", field.values()[flat])?;
    }
    w.flush()?;
    Ok(())
}
