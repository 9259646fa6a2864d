use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"MFSCOPE1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[serde(alias = "bin")]
    Binary,
}

impl Format {
    /// `.bin` files are binary, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => Format::Binary,
            _ => Format::Csv,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "bin" | "binary" => Ok(Format::Binary),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a cloud. For CSV, `skip_header` drops the first line.
pub fn load_points(path: &Path, format: Format, skip_header: bool) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let cloud = match format {
        Format::Csv => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
                row: 0,
                column: 0,
                message: format!("not UTF-8: {e}"),
            })?;
            parse_csv(text, skip_header)?
        }
        Format::Binary => parse_binary(&bytes)?,
    };
    Ok(cloud.with_provenance(path.display().to_string()))
}

pub(crate) fn parse_csv(text: &str, skip_header: bool) -> Result<PointCloud> {
    let mut dim = None;
    let mut coords = Vec::new();
    let mut row = 0;
    for line in text.lines().skip(usize::from(skip_header)) {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let mut width = 0;
        for (c, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("non-finite value '{field}'"),
                });
            }
            coords.push(v);
            width += 1;
        }
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    row,
                    column: width.min(d) + 1,
                    message: format!("expected {d} fields, found {width}"),
                })
            }
            _ => {}
        }
    }
    let Some(dim) = dim else {
        return Err(Error::EmptyInput("CSV contains no rows".into()));
    };
    PointCloud::from_flat(dim, coords, "csv")
}

pub(crate) fn parse_binary(bytes: &[u8]) -> Result<PointCloud> {
    let header_err = |message: &str| Error::Parse {
        row: 0,
        column: 0,
        message: message.to_string(),
    };
    if bytes.is_empty() {
        return Err(Error::EmptyInput("binary file is empty".into()));
    }
    if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
        return Err(header_err("missing MFSCOPE1 header"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput(format!("header declares N={n}, D={d}")));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(24))
        .ok_or_else(|| header_err("header dimensions overflow"))?;
    if bytes.len() as u64 != expected {
        return Err(header_err(&format!(
            "payload holds {} bytes, header N={n}, D={d} needs {}",
            bytes.len() - 24,
            expected - 24
        )));
    }
    let coords: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    PointCloud::from_flat(d as usize, coords, "binary")
}

/// Writes a cloud. CSV values carry 17 significant digits.
pub fn save_points(cloud: &PointCloud, path: &Path, format: Format) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(cloud, &mut buf),
        Format::Binary => {
            buf.reserve(24 + 8 * cloud.coords().len());
            buf.extend_from_slice(BINARY_MAGIC);
            buf.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
            buf.extend_from_slice(&(cloud.dim() as u64).to_le_bytes());
            for v in cloud.coords() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, buf).map_err(io_err(path))
}

fn write_csv(cloud: &PointCloud, out: &mut Vec<u8>) {
    for p in cloud.points() {
        for (c, v) in p.iter().enumerate() {
            if c > 0 {
                out.push(b',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push(b'\n');
    }
}
