//! Structured result emission: CSV tables, JSON manifests and the binary
//! matrix container.
//!
//! Container layout: magic bytes `DSPM1`, then rows and cols as little-endian
//! u64, then the matrix entries as little-endian f64 in row-major order.
//! Every writer goes through a temp-file rename so files are atomic.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

pub const MATRIX_MAGIC: &[u8; 5] = b"DSPM1";

/// Atomically write `bytes` to `path` (temp file + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().context("output path has no parent directory")?;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let mut buf = Vec::with_capacity(5 + 16 + rows * cols * 8);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            buf.extend_from_slice(&m[[i, j]].to_le_bytes());
        }
    }
    atomic_write(path, &buf)
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < 21 || &bytes[0..5] != MATRIX_MAGIC {
        bail!("{} is not a DSPM1 matrix file", path.display());
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let expect = 21 + rows * cols * 8;
    if bytes.len() != expect {
        bail!(
            "{}: expected {} bytes for a {}×{} matrix, found {}",
            path.display(),
            expect,
            rows,
            cols,
            bytes.len()
        );
    }
    let mut m = Array2::zeros((rows, cols));
    let mut off = 21;
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            off += 8;
        }
    }
    Ok(m)
}

/// One row of the per-feature result table.
#[derive(Debug, Clone)]
pub struct FeatureRow {
    pub feature: usize,
    pub pos: Vec<f64>,
    pub beta_norm: f64,
    pub stat: f64,
    pub pval: f64,
    pub pval_corrected: f64,
}

/// Write the per-feature table (header row, '.' decimal, LF line endings).
/// Floats use the shortest round-trippable representation.
pub fn write_features_csv(path: &Path, rows: &[FeatureRow], dim: usize) -> Result<()> {
    let mut out = String::new();
    out.push_str("feature");
    for k in 0..dim {
        out.push_str(&format!(",pos_{k}"));
    }
    out.push_str(",beta_norm,stat,pval,pval_corrected\n");
    for r in rows {
        out.push_str(&r.feature.to_string());
        for k in 0..dim {
            out.push_str(&format!(",{}", r.pos[k]));
        }
        out.push_str(&format!(
            ",{},{},{},{}\n",
            r.beta_norm, r.stat, r.pval, r.pval_corrected
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Read back the p-value columns of a features table.
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().context("empty features file")?;
    let cols: Vec<&str> = header.split(',').collect();
    let dim = cols.iter().filter(|c| c.starts_with("pos_")).count();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 5 {
            bail!("{}:{}: expected {} fields, got {}", path.display(), lineno + 2, dim + 5, fields.len());
        }
        let parse = |s: &str| -> Result<f64> {
            Ok(s.parse::<f64>().with_context(|| format!("bad float {s:?}"))?)
        };
        rows.push(FeatureRow {
            feature: fields[0].parse()?,
            pos: fields[1..1 + dim].iter().map(|s| parse(s)).collect::<Result<_>>()?,
            beta_norm: parse(fields[dim + 1])?,
            stat: parse(fields[dim + 2])?,
            pval: parse(fields[dim + 3])?,
            pval_corrected: parse(fields[dim + 4])?,
        });
    }
    Ok(rows)
}

/// Generic small CSV writer: header plus rows of display-formatted fields.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}
