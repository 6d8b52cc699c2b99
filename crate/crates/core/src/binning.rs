//! Streaming 1D/2D binning of chain samples.
//!
//! A posterior grid holds, per bin, the sum of the weights of the samples
//! falling in it; a profile grid holds the largest log-likelihood among them.
//! Grids are built chunk by chunk from a [`ChainStore`] and partial grids
//! combine with [`merge_grids`] (sum for posteriors, max for profiles), so
//! the dataset never has to fit in memory.
//!
//! Bins are uniform and half-open, `[edge_i, edge_{i+1})`, except the last,
//! which also contains `hi`. Samples outside the limits are not binned but
//! are counted in `outside_count` / `outside_weight`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{ChainStore, ColumnReader, LOGLIKE, WEIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec1D {
    pub variable: String,
    pub lo: f64,
    pub hi: f64,
    pub nbins: usize,
}

impl BinSpec1D {
    pub fn new(variable: impl Into<String>, lo: f64, hi: f64, nbins: usize) -> Result<Self> {
        let spec = BinSpec1D {
            variable: variable.into(),
            lo,
            hi,
            nbins,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::BinSpec(format!(
                "limits of '{}' must be finite",
                self.variable
            )));
        }
        if self.lo >= self.hi {
            return Err(Error::BinSpec(format!(
                "'{}': lower limit {} must be below upper limit {}",
                self.variable, self.lo, self.hi
            )));
        }
        if self.nbins == 0 {
            return Err(Error::BinSpec(format!(
                "'{}': need at least one bin",
                self.variable
            )));
        }
        if self.edges().windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BinSpec(format!(
                "'{}': {} bins are too narrow to resolve [{}, {}]",
                self.variable, self.nbins, self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.nbins as f64
    }

    /// Left edge of bin `i`; `edge(nbins)` is exactly `hi`.
    pub fn edge(&self, i: usize) -> f64 {
        if i >= self.nbins {
            self.hi
        } else {
            self.lo + i as f64 * self.width()
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.nbins).map(|i| self.edge(i)).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nbins)
            .map(|i| 0.5 * (self.edge(i) + self.edge(i + 1)))
            .collect()
    }

    /// Bin holding `value`, or `None` when it lies outside `[lo, hi]`.
    /// Consistent with [`BinSpec1D::edge`]: `edge(i) <= value < edge(i + 1)`.
    pub fn bin_index(&self, value: f64) -> Result<Option<usize>> {
        if value.is_nan() {
            return Err(Error::NanValue(self.variable.clone()));
        }
        Ok(self.locate(value))
    }

    #[inline]
    fn locate(&self, value: f64) -> Option<usize> {
        if !(value >= self.lo && value <= self.hi) {
            return None;
        }
        let last = self.nbins - 1;
        if value == self.hi {
            return Some(last);
        }
        let guess = ((value - self.lo) / self.width()).floor();
        let mut k = if guess < 0.0 {
            0
        } else {
            (guess as usize).min(last)
        };
        // The division can land one bin off near an edge; settle against the
        // edges themselves.
        while k > 0 && value < self.edge(k) {
            k -= 1;
        }
        while k < last && value >= self.edge(k + 1) {
            k += 1;
        }
        Some(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec2D {
    pub x: BinSpec1D,
    pub y: BinSpec1D,
}

impl BinSpec2D {
    pub fn new(x: BinSpec1D, y: BinSpec1D) -> Result<Self> {
        let spec = BinSpec2D { x, y };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        if self.x.variable == self.y.variable {
            return Err(Error::BinSpec(format!(
                "x and y must be different variables (both are '{}')",
                self.x.variable
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Axes {
    One(BinSpec1D),
    Two(BinSpec2D),
}

impl Axes {
    pub fn dimensions(&self) -> usize {
        match self {
            Axes::One(_) => 1,
            Axes::Two(_) => 2,
        }
    }

    pub fn specs(&self) -> Vec<&BinSpec1D> {
        match self {
            Axes::One(x) => vec![x],
            Axes::Two(s) => vec![&s.x, &s.y],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.specs().iter().map(|s| s.nbins).product()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Axes::One(x) => x.validate(),
            Axes::Two(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Posterior,
    Profile,
}

/// Binned posterior mass or profile log-likelihood.
///
/// For 2D grids `values` is row-major with the x bin as the row:
/// `values[ix * ny + iy]`. Empty profile bins hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Axes,
    pub kind: GridKind,
    pub values: Vec<f64>,
    pub outside_count: u64,
    pub outside_weight: f64,
    pub total_weight: f64,
    /// Largest log-likelihood among binned samples; `-inf` for posterior
    /// grids and for profile grids with no binned sample.
    pub lnl_max: f64,
}

impl Grid {
    pub fn empty(axes: Axes, kind: GridKind) -> Self {
        let fill = match kind {
            GridKind::Posterior => 0.0,
            GridKind::Profile => f64::NEG_INFINITY,
        };
        Grid {
            values: vec![fill; axes.n_cells()],
            axes,
            kind,
            outside_count: 0,
            outside_weight: 0.0,
            total_weight: 0.0,
            lnl_max: f64::NEG_INFINITY,
        }
    }

    pub fn dimensions(&self) -> usize {
        self.axes.dimensions()
    }

    /// `(nx, ny)`; `ny` is 1 for 1D grids.
    pub fn shape(&self) -> (usize, usize) {
        match &self.axes {
            Axes::One(x) => (x.nbins, 1),
            Axes::Two(s) => (s.x.nbins, s.y.nbins),
        }
    }

    pub fn x_spec(&self) -> &BinSpec1D {
        match &self.axes {
            Axes::One(x) => x,
            Axes::Two(s) => &s.x,
        }
    }

    pub fn y_spec(&self) -> Option<&BinSpec1D> {
        match &self.axes {
            Axes::One(_) => None,
            Axes::Two(s) => Some(&s.y),
        }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        let (_, ny) = self.shape();
        self.values[ix * ny + iy]
    }

    /// Sum of the binned values, in storage order.
    pub fn binned_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Per-x-bin sums over y (2D) or the values themselves (1D).
    pub fn marginal_x(&self) -> Vec<f64> {
        let (nx, ny) = self.shape();
        (0..nx)
            .map(|ix| self.values[ix * ny..(ix + 1) * ny].iter().sum())
            .collect()
    }

    /// Per-y-bin sums over x. Only meaningful for 2D grids.
    pub fn marginal_y(&self) -> Vec<f64> {
        let (nx, ny) = self.shape();
        (0..ny)
            .map(|iy| (0..nx).map(|ix| self.values[ix * ny + iy]).sum())
            .collect()
    }

    /// Weighted mean of bin centers along x (posterior grids).
    pub fn mean_x(&self) -> f64 {
        weighted_mean(&self.x_spec().centers(), &self.marginal_x())
    }

    /// Weighted mean of bin centers along y (2D posterior grids).
    pub fn mean_y(&self) -> Option<f64> {
        self.y_spec()
            .map(|y| weighted_mean(&y.centers(), &self.marginal_y()))
    }

    #[inline]
    fn cell(&self, x: f64, y: Option<f64>) -> Option<usize> {
        match (&self.axes, y) {
            (Axes::One(spec), _) => spec.locate(x),
            (Axes::Two(spec), Some(y)) => {
                let ix = spec.x.locate(x)?;
                let iy = spec.y.locate(y)?;
                Some(ix * spec.y.nbins + iy)
            }
            (Axes::Two(_), None) => unreachable!("2D grid fed without y values"),
        }
    }

    /// Folds one block of samples into the grid, row by row in order.
    fn accumulate(&mut self, block: &Block<'_>, first_row: usize) -> Result<()> {
        for i in 0..block.weights.len() {
            let w = block.weights[i];
            let x = block.xs[i];
            if x.is_nan() {
                return Err(nan_error(&self.x_spec().variable, first_row + i));
            }
            let y = match block.ys {
                Some(ys) => {
                    if ys[i].is_nan() {
                        let name = &self.y_spec().unwrap().variable;
                        return Err(nan_error(name, first_row + i));
                    }
                    Some(ys[i])
                }
                None => None,
            };
            self.total_weight += w;
            match self.cell(x, y) {
                None => {
                    self.outside_count += 1;
                    self.outside_weight += w;
                }
                Some(cell) => match self.kind {
                    GridKind::Posterior => self.values[cell] += w,
                    GridKind::Profile => {
                        let l = block.loglikes.expect("profile needs loglike")[i];
                        if l > self.values[cell] {
                            self.values[cell] = l;
                        }
                        if l > self.lnl_max {
                            self.lnl_max = l;
                        }
                    }
                },
            }
        }
        Ok(())
    }
}

fn nan_error(column: &str, row: usize) -> Error {
    Error::Invalid(format!("NaN in column '{column}' at row {row}"))
}

fn weighted_mean(centers: &[f64], mass: &[f64]) -> f64 {
    let total: f64 = mass.iter().sum();
    centers.iter().zip(mass).map(|(c, m)| c * m).sum::<f64>() / total
}

/// Column slices for one chunk.
struct Block<'a> {
    weights: &'a [f64],
    loglikes: Option<&'a [f64]>,
    xs: &'a [f64],
    ys: Option<&'a [f64]>,
}

/// Combines two partial grids over the same axes: sums for posteriors,
/// element-wise maxima for profiles.
pub fn merge_grids(a: &Grid, b: &Grid) -> Result<Grid> {
    if a.kind != b.kind {
        return Err(Error::GridMismatch(format!(
            "cannot merge {:?} grid with {:?} grid",
            a.kind, b.kind
        )));
    }
    if a.axes != b.axes {
        return Err(Error::GridMismatch("bin specifications differ".into()));
    }
    let values = match a.kind {
        GridKind::Posterior => a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
        GridKind::Profile => a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| if y > x { y } else { x })
            .collect(),
    };
    Ok(Grid {
        axes: a.axes.clone(),
        kind: a.kind,
        values,
        outside_count: a.outside_count + b.outside_count,
        outside_weight: a.outside_weight + b.outside_weight,
        total_weight: a.total_weight + b.total_weight,
        lnl_max: if b.lnl_max > a.lnl_max {
            b.lnl_max
        } else {
            a.lnl_max
        },
    })
}

/// How a store is reduced to a grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Reduction {
    /// One pass in row order, folding each chunk into a single running grid.
    /// Bit-identical to an in-memory pass over the whole dataset for every
    /// chunk size; holds one chunk per column at a time.
    #[default]
    Sequential,
    /// Chunks binned concurrently into partial grids, merged in ascending
    /// chunk order. Reproducible run to run, but posterior sums are grouped
    /// per chunk so they can differ from `Sequential` in the last bits. Holds
    /// up to one chunk per column per worker thread.
    Parallel,
}

pub fn marginalize_1d(store: &ChainStore, spec: &BinSpec1D) -> Result<Grid> {
    bin_store(
        store,
        Axes::One(spec.clone()),
        GridKind::Posterior,
        Reduction::Sequential,
    )
}

pub fn marginalize_2d(store: &ChainStore, spec: &BinSpec2D) -> Result<Grid> {
    bin_store(
        store,
        Axes::Two(spec.clone()),
        GridKind::Posterior,
        Reduction::Sequential,
    )
}

pub fn profile_1d(store: &ChainStore, spec: &BinSpec1D) -> Result<Grid> {
    bin_store(
        store,
        Axes::One(spec.clone()),
        GridKind::Profile,
        Reduction::Sequential,
    )
}

pub fn profile_2d(store: &ChainStore, spec: &BinSpec2D) -> Result<Grid> {
    bin_store(
        store,
        Axes::Two(spec.clone()),
        GridKind::Profile,
        Reduction::Sequential,
    )
}

struct Readers {
    weights: ColumnReader,
    loglikes: Option<ColumnReader>,
    xs: ColumnReader,
    ys: Option<ColumnReader>,
}

impl Readers {
    fn open(store: &ChainStore, axes: &Axes, kind: GridKind) -> Result<Self> {
        let specs = axes.specs();
        Ok(Readers {
            weights: store.column_reader(WEIGHT)?,
            loglikes: match kind {
                GridKind::Profile => Some(store.column_reader(LOGLIKE)?),
                GridKind::Posterior => None,
            },
            xs: store.column_reader(&specs[0].variable)?,
            ys: specs
                .get(1)
                .map(|s| store.column_reader(&s.variable))
                .transpose()?,
        })
    }

    fn bin_chunk(&mut self, grid: &mut Grid, index: usize, first_row: usize) -> Result<()> {
        let weights = self.weights.read_chunk(index)?;
        let loglikes = self
            .loglikes
            .as_mut()
            .map(|r| r.read_chunk(index))
            .transpose()?;
        let xs = self.xs.read_chunk(index)?;
        let ys = self.ys.as_mut().map(|r| r.read_chunk(index)).transpose()?;
        let block = Block {
            weights: &weights,
            loglikes: loglikes.as_deref(),
            xs: &xs,
            ys: ys.as_deref(),
        };
        grid.accumulate(&block, first_row)
    }
}

/// Bins every sample of `store` over `axes`.
pub fn bin_store(
    store: &ChainStore,
    axes: Axes,
    kind: GridKind,
    reduction: Reduction,
) -> Result<Grid> {
    axes.validate()?;
    for spec in axes.specs() {
        if !store.has_column(&spec.variable) {
            return Err(Error::UnknownColumn(spec.variable.clone()));
        }
    }

    match reduction {
        Reduction::Sequential => {
            let mut readers = Readers::open(store, &axes, kind)?;
            let mut grid = Grid::empty(axes, kind);
            for index in 0..store.n_chunks() {
                readers.bin_chunk(&mut grid, index, store.chunk_range(index).start)?;
            }
            Ok(grid)
        }
        Reduction::Parallel => {
            let partials = (0..store.n_chunks())
                .into_par_iter()
                .map_init(
                    || Readers::open(store, &axes, kind),
                    |readers, index| {
                        let readers = readers
                            .as_mut()
                            .map_err(|e| Error::Invalid(e.to_string()))?;
                        let mut partial = Grid::empty(axes.clone(), kind);
                        readers.bin_chunk(&mut partial, index, store.chunk_range(index).start)?;
                        Ok(partial)
                    },
                )
                .collect::<Result<Vec<_>>>()?;
            let mut grid = Grid::empty(axes, kind);
            for partial in &partials {
                grid = merge_grids(&grid, partial)?;
            }
            Ok(grid)
        }
    }
}
