//! Grid serialization: the JSON grid document and per-bin CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binning::{Axes, BinSpec1D, BinSpec2D, Grid, GridKind};
use crate::error::{Error, Result};
use crate::regions::RegionThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Invalid(format!(
                "unknown export format '{other}' (expected csv or json)"
            ))),
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ExportFormat::Csv),
            "json" => Some(ExportFormat::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDocument {
    pub variable: String,
    pub lo: f64,
    pub hi: f64,
    pub nbins: usize,
    pub edges: Vec<f64>,
}

/// On-disk form of a grid. `values` is row-major (x bin major) and empty
/// profile bins are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub kind: GridKind,
    pub axes: Vec<AxisDocument>,
    pub values: Vec<Option<f64>>,
    pub total_weight: f64,
    pub outside_weight: f64,
    pub outside_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lnl_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<RegionThresholds>,
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl GridDocument {
    pub fn new(grid: &Grid, thresholds: Option<&RegionThresholds>) -> Self {
        let axes = grid
            .axes
            .specs()
            .into_iter()
            .map(|s| AxisDocument {
                variable: s.variable.clone(),
                lo: s.lo,
                hi: s.hi,
                nbins: s.nbins,
                edges: s.edges(),
            })
            .collect();
        GridDocument {
            kind: grid.kind,
            axes,
            values: grid.values.iter().copied().map(finite_or_null).collect(),
            total_weight: grid.total_weight,
            outside_weight: grid.outside_weight,
            outside_count: grid.outside_count,
            lnl_max: match grid.kind {
                GridKind::Profile => finite_or_null(grid.lnl_max),
                GridKind::Posterior => None,
            },
            thresholds: thresholds.cloned(),
        }
    }

    /// Rebuilds the grid, checking the document's internal consistency.
    pub fn to_grid(&self) -> Result<Grid> {
        let specs = self
            .axes
            .iter()
            .map(|a| {
                let spec = BinSpec1D::new(a.variable.clone(), a.lo, a.hi, a.nbins)?;
                if spec.edges() != a.edges {
                    return Err(Error::Document(format!(
                        "edges of '{}' do not match its limits and bin count",
                        a.variable
                    )));
                }
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let axes = match <[BinSpec1D; 2]>::try_from(specs) {
            Ok([x, y]) => Axes::Two(BinSpec2D::new(x, y)?),
            Err(mut specs) if specs.len() == 1 => Axes::One(specs.remove(0)),
            Err(specs) => {
                return Err(Error::Document(format!(
                    "expected 1 or 2 axes, found {}",
                    specs.len()
                )))
            }
        };
        if self.values.len() != axes.n_cells() {
            return Err(Error::Document(format!(
                "{} values for {} bins",
                self.values.len(),
                axes.n_cells()
            )));
        }
        let values = match self.kind {
            GridKind::Posterior => self
                .values
                .iter()
                .map(|v| v.ok_or_else(|| Error::Document("null value in posterior grid".into())))
                .collect::<Result<Vec<_>>>()?,
            GridKind::Profile => self
                .values
                .iter()
                .map(|v| v.unwrap_or(f64::NEG_INFINITY))
                .collect(),
        };
        Ok(Grid {
            axes,
            kind: self.kind,
            values,
            outside_count: self.outside_count,
            outside_weight: self.outside_weight,
            total_weight: self.total_weight,
            lnl_max: match self.kind {
                GridKind::Profile => self.lnl_max.unwrap_or(f64::NEG_INFINITY),
                GridKind::Posterior => f64::NEG_INFINITY,
            },
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("grid document serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }
}

/// One line per bin: bin center(s) then the value, empty for an empty
/// profile bin. Numbers use the shortest representation that parses back to
/// the same `f64`.
pub fn grid_to_csv(grid: &Grid) -> String {
    let x_centers = grid.x_spec().centers();
    let y_centers = grid.y_spec().map(BinSpec1D::centers);
    let mut out = String::new();
    for (cell, value) in grid.values.iter().enumerate() {
        match &y_centers {
            None => write!(out, "{}", x_centers[cell]).unwrap(),
            Some(ys) => {
                let (ix, iy) = (cell / ys.len(), cell % ys.len());
                write!(out, "{},{}", x_centers[ix], ys[iy]).unwrap()
            }
        }
        out.push(',');
        if value.is_finite() {
            write!(out, "{value}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn export_grid(
    grid: &Grid,
    thresholds: Option<&RegionThresholds>,
    format: ExportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ExportFormat::Json => GridDocument::new(grid, thresholds).to_json(),
        ExportFormat::Csv => grid_to_csv(grid),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_grid_document(path: impl AsRef<Path>) -> Result<GridDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GridDocument::from_json(&text).map_err(|e| Error::Document(format!("{}: {e}", path.display())))
}

/// Reads a JSON grid document back into a grid and its thresholds.
pub fn import_grid(path: impl AsRef<Path>) -> Result<(Grid, Option<RegionThresholds>)> {
    let doc = read_grid_document(path)?;
    Ok((doc.to_grid()?, doc.thresholds))
}
