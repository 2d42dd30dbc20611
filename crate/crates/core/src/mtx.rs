//! Matrix Market coordinate format for complex operators.
//!
//! Files are written as `coordinate complex general` with 1-based indices and
//! only the nonzero entries. Grid metadata goes into `%` comment lines of the
//! form `% key: value`, which the reader returns verbatim.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{c64, CMat, ZERO};

const HEADER: &str = "%%MatrixMarket matrix coordinate complex general";

#[derive(Debug, Clone)]
pub struct MatrixMarket {
    pub matrix: CMat,
    pub metadata: BTreeMap<String, String>,
}

pub fn grid_metadata(g: &GridSpec) -> Vec<(String, String)> {
    vec![
        ("grid.dim".into(), g.dim.to_string()),
        ("grid.half_width".into(), format!("{:?}", g.half_width)),
        ("grid.points".into(), g.points.to_string()),
        ("grid.bulk_width".into(), g.bulk_width.to_string()),
        ("grid.spacing".into(), format!("{:?}", g.spacing())),
    ]
}

pub fn write<W: Write>(mut out: W, matrix: &CMat, metadata: &[(String, String)]) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for (k, v) in metadata {
        writeln!(out, "% {k}: {v}")?;
    }
    let mut entries = Vec::new();
    for j in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            let z = matrix[(i, j)];
            if z != ZERO {
                entries.push((i, j, z));
            }
        }
    }
    writeln!(out, "{} {} {}", matrix.nrows(), matrix.ncols(), entries.len())?;
    for (i, j, z) in entries {
        writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, z.re, z.im)?;
    }
    Ok(())
}

pub fn write_file(path: &Path, matrix: &CMat, metadata: &[(String, String)]) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf, matrix, metadata).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads `coordinate` files with `real` or `complex` fields and `general`,
/// `symmetric` or `hermitian` symmetry.
pub fn read<R: BufRead>(input: R) -> Result<MatrixMarket> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty input".into()))?
        .map_err(|e| Error::MatrixMarket(e.to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::MatrixMarket(format!("unsupported header `{header}`")));
    }
    let complex = match tokens[3].as_str() {
        "complex" => true,
        "real" | "integer" => false,
        other => return Err(Error::MatrixMarket(format!("unsupported field `{other}`"))),
    };
    let symmetry = tokens[4].clone();
    if !["general", "symmetric", "hermitian"].contains(&symmetry.as_str()) {
        return Err(Error::MatrixMarket(format!("unsupported symmetry `{symmetry}`")));
    }

    let mut metadata = BTreeMap::new();
    let mut size: Option<(usize, usize, usize)> = None;
    let mut matrix = CMat::zeros(0, 0);
    let mut seen = 0usize;
    for line in lines {
        let line = line.map_err(|e| Error::MatrixMarket(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('%') {
            if let Some((k, v)) = comment.split_once(':') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::MatrixMarket(format!("bad size line `{trimmed}`")));
                if fields.len() != 3 {
                    return Err(Error::MatrixMarket(format!("bad size line `{trimmed}`")));
                }
                let (r, c, n) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                size = Some((r, c, n));
                matrix = CMat::zeros(r, c);
            }
            Some((r, c, _)) => {
                let want = if complex { 4 } else { 3 };
                if fields.len() != want {
                    return Err(Error::MatrixMarket(format!("bad entry line `{trimmed}`")));
                }
                let i: usize = fields[0].parse().map_err(|_| Error::MatrixMarket(format!("bad row in `{trimmed}`")))?;
                let j: usize = fields[1].parse().map_err(|_| Error::MatrixMarket(format!("bad column in `{trimmed}`")))?;
                if i == 0 || j == 0 || i > r || j > c {
                    return Err(Error::MatrixMarket(format!("index out of range in `{trimmed}`")));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| Error::MatrixMarket(format!("bad value in `{trimmed}`")));
                let re = num(fields[2])?;
                let im = if complex { num(fields[3])? } else { 0.0 };
                let z = c64::new(re, im);
                matrix[(i - 1, j - 1)] = z;
                if i != j {
                    match symmetry.as_str() {
                        "symmetric" => matrix[(j - 1, i - 1)] = z,
                        "hermitian" => matrix[(j - 1, i - 1)] = z.conj(),
                        _ => {}
                    }
                }
                seen += 1;
            }
        }
    }
    let (_, _, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    if seen != nnz {
        return Err(Error::MatrixMarket(format!("expected {nnz} entries, found {seen}")));
    }
    Ok(MatrixMarket { matrix, metadata })
}

pub fn read_file(path: &Path) -> Result<MatrixMarket> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read(BufReader::new(f))
}
