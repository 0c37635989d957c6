//! File formats: pretty JSON, P2 rasters with a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cconvex::{PotentialField, PotentialFieldJson};
use crate::error::{MkError, Result};
use crate::measures::{DiscreteMeasure, DiscreteMeasureJson, GridMeasure, GridMeasureJson};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| MkError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| MkError::Validation(format!("{}: {e}", path.display())))
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_discrete(path: &Path) -> Result<DiscreteMeasure> {
    DiscreteMeasure::from_json(read_json::<DiscreteMeasureJson>(path)?)
}

pub fn read_grid(path: &Path) -> Result<GridMeasure> {
    GridMeasure::from_json(read_json::<GridMeasureJson>(path)?)
}

pub fn read_potential(path: &Path) -> Result<PotentialField> {
    PotentialField::from_json(read_json::<PotentialFieldJson>(path)?)
}

/// Affine map `pixel = round(scale * value + offset)` used for a grey raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub width: usize,
    pub height: usize,
    pub scale: f64,
    pub offset: f64,
    pub lo: f64,
    pub hi: f64,
    /// Pixels written as 0 because the value was missing.
    pub masked: usize,
    /// Label names indexed by grey level, for label rasters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<Vec<String>>,
}

/// `<raster>.json` next to the raster.
pub fn sidecar_path(raster: &Path) -> PathBuf {
    let mut s = raster.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Lattice index of each pixel: first axis left to right, second axis bottom to top.
fn pixel_order(shape: &[usize]) -> Result<(usize, usize, Vec<usize>)> {
    match *shape {
        [n] => Ok((n, 1, (0..n).collect())),
        [nx, ny] => {
            let mut order = Vec::with_capacity(nx * ny);
            for r in 0..ny {
                for i in 0..nx {
                    order.push(i * ny + (ny - 1 - r));
                }
            }
            Ok((nx, ny, order))
        }
        _ => Err(MkError::Validation("rasters need a 1-D or 2-D grid".into())),
    }
}

fn pgm_text(width: usize, height: usize, pixels: &[u8]) -> String {
    let mut s = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks(width) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Writes `values` (row-major over `shape`, `None` masked) as a grey P2 image plus sidecar.
pub fn write_scalar_raster(path: &Path, shape: &[usize], values: &[Option<f64>]) -> Result<RasterSidecar> {
    let (width, height, order) = pixel_order(shape)?;
    if values.len() != order.len() {
        return Err(MkError::Validation("raster values do not match the grid".into()));
    }
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if finite.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let offset = -scale * lo;
    let mut masked = 0;
    let pixels: Vec<u8> = order
        .iter()
        .map(|&k| match values[k] {
            Some(v) if v.is_finite() => (scale * v + offset).round().clamp(0.0, 255.0) as u8,
            _ => {
                masked += 1;
                0
            }
        })
        .collect();
    fs::write(path, pgm_text(width, height, &pixels))?;
    let side = RasterSidecar { width, height, scale, offset, lo, hi, masked, palette: None };
    write_json(&sidecar_path(path), &side)?;
    Ok(side)
}

/// Label raster: grey level `i` for label `i`, 255 for unlabelled cells.
pub fn write_label_raster(path: &Path, shape: &[usize], labels: &[Option<usize>], palette: Vec<String>) -> Result<RasterSidecar> {
    let (width, height, order) = pixel_order(shape)?;
    if labels.len() != order.len() || palette.len() > 255 {
        return Err(MkError::Validation("label raster does not match the grid".into()));
    }
    let mut masked = 0;
    let pixels: Vec<u8> = order
        .iter()
        .map(|&k| match labels[k] {
            Some(l) => l as u8,
            None => {
                masked += 1;
                255
            }
        })
        .collect();
    fs::write(path, pgm_text(width, height, &pixels))?;
    let side = RasterSidecar { width, height, scale: 1.0, offset: 0.0, lo: 0.0, hi: 255.0, masked, palette: Some(palette) };
    write_json(&sidecar_path(path), &side)?;
    Ok(side)
}

/// Parses a P2 file into `(width, height, pixels)` in file order.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.lines().filter(|l| !l.starts_with('#')).flat_map(|l| l.split_whitespace());
    if tokens.next() != Some("P2") {
        return Err(MkError::Validation(format!("{} is not a P2 image", path.display())));
    }
    let mut num = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| MkError::Validation(format!("truncated image {}", path.display())))
    };
    let (w, h, max) = (num()?, num()?, num()?);
    if max > 255 {
        return Err(MkError::Validation("only 8-bit images are read".into()));
    }
    let pixels = (0..w * h).map(|_| num().map(|v| v as u8)).collect::<Result<Vec<u8>>>()?;
    Ok((w, h, pixels))
}
