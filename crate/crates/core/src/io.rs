//! Grid dumps, tables and run manifests.
//!
//! A grid dump is a pair of files: `<stem>.toml` holds the header and
//! `<stem>.bin` the samples as little-endian `f64` pairs `(re, im)`,
//! row-major with rows indexed by `y`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beltrami::{BeltramiField, GridSpec};
use crate::solver::DiscreteMap;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    /// `"field"` or `"map"`.
    pub kind: String,
    pub half_width: f64,
    /// Cells per side; a field stores `n^2` samples, a map `(n + 1)^2`.
    pub n: usize,
    pub seed: u64,
    pub partition_ref: Option<String>,
    pub truncation: Option<f64>,
    pub samples: usize,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("toml"), stem.with_extension("bin"))
}

fn write_samples(path: &Path, values: &[Complex64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_samples(path: &Path, expected: usize) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != 16 * expected {
        return Err(Error::Format(format!("{} holds {} bytes, expected {}", path.display(), bytes.len(), 16 * expected)));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

fn write_header(path: &Path, h: &DumpHeader) -> Result<()> {
    fs::write(path, toml::to_string(h)?)?;
    Ok(())
}

fn read_header(path: &Path, kind: &str) -> Result<DumpHeader> {
    let h: DumpHeader = toml::from_str(&fs::read_to_string(path)?)?;
    if h.kind != kind {
        return Err(Error::Format(format!("expected a {kind} dump, found {}", h.kind)));
    }
    Ok(h)
}

pub fn write_field(field: &BeltramiField, stem: &Path) -> Result<()> {
    let (hp, bp) = paths(stem);
    write_header(
        &hp,
        &DumpHeader {
            kind: "field".into(),
            half_width: field.grid.half_width,
            n: field.grid.n,
            seed: field.seed,
            partition_ref: field.partition_ref.clone(),
            truncation: field.truncation,
            samples: field.values().len(),
        },
    )?;
    write_samples(&bp, field.values())
}

/// Reads a field dump. Piece labels and region bounds are not stored.
pub fn read_field(stem: &Path) -> Result<BeltramiField> {
    let (hp, bp) = paths(stem);
    let h = read_header(&hp, "field")?;
    let grid = GridSpec::new(h.half_width, h.n)?;
    let values = read_samples(&bp, grid.len())?;
    let mut f = BeltramiField::from_samples(grid, values, None, h.seed)?;
    f.partition_ref = h.partition_ref;
    f.truncation = h.truncation;
    Ok(f)
}

pub fn write_map(map: &DiscreteMap, seed: u64, stem: &Path) -> Result<()> {
    let (hp, bp) = paths(stem);
    write_header(
        &hp,
        &DumpHeader {
            kind: "map".into(),
            half_width: map.half_width,
            n: map.n,
            seed,
            partition_ref: None,
            truncation: map.meta.truncation,
            samples: map.values().len(),
        },
    )?;
    write_samples(&bp, map.values())
}

pub fn read_map(stem: &Path) -> Result<DiscreteMap> {
    let (hp, bp) = paths(stem);
    let h = read_header(&hp, "map")?;
    let values = read_samples(&bp, (h.n + 1) * (h.n + 1))?;
    let mut m = DiscreteMap::from_values(h.half_width, h.n, values)?;
    m.meta.truncation = h.truncation;
    Ok(m)
}

/// Table `iteration,residual`.
pub fn write_convergence_log<W: Write>(history: &[(usize, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "residual"])?;
    for (k, r) in history {
        w.write_record([k.to_string(), format!("{r:.6e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Delimited table with a header row; floats in `{:.9e}`.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid("row length differs from the header"));
        }
        w.write_record(r.iter().map(|v| format!("{v:.9e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Record of a run: seeds, grids and ladders, plus free-form entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub grids: Vec<GridSpec>,
    pub ladders: BTreeMap<String, Vec<f64>>,
    pub outputs: Vec<String>,
    pub notes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest { command: command.into(), version: env!("CARGO_PKG_VERSION").into(), ..Default::default() }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, toml::to_string(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(toml::from_str(&fs::read_to_string(path)?)?)
    }
}
