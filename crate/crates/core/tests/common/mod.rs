//! Shared fixtures and independent in-memory oracles for integration tests.
#![allow(dead_code)]

pub mod pipeline;

use std::path::Path;

use chainforge::binning::{Axes, Grid, GridKind};
use chainforge::store::{ChainStore, StoreWriter};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

/// Whole dataset held in memory, column-wise.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub weight: Vec<f64>,
    pub loglike: Vec<f64>,
    pub names: Vec<String>,
    pub params: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn column(&self, name: &str) -> &[f64] {
        match name {
            "weight" => &self.weight,
            "loglike" => &self.loglike,
            _ => {
                let i = self.names.iter().position(|n| n == name).expect("column");
                &self.params[i]
            }
        }
    }

    pub fn random(rng: &mut StdRng, n: usize, n_params: usize) -> Self {
        let names: Vec<String> = (0..n_params).map(|i| format!("p{i}")).collect();
        let weight = (0..n).map(|_| rng.random::<f64>().powi(3) * 1e-3).collect();
        let loglike = (0..n).map(|_| -rng.random::<f64>() * 400.0).collect();
        let params = (0..n_params)
            .map(|_| {
                let center = rng.random_range(-2.0..2.0);
                let spread = rng.random_range(0.1..3.0);
                let normal = Normal::new(center, spread).unwrap();
                (0..n).map(|_| normal.sample(rng)).collect()
            })
            .collect();
        Dataset {
            weight,
            loglike,
            names,
            params,
        }
    }

    pub fn write_store(&self, path: &Path, chunk_rows: usize) -> ChainStore {
        let mut w = StoreWriter::create(path, &self.names, chunk_rows, true).unwrap();
        let mut cols: Vec<&[f64]> = vec![&self.weight, &self.loglike];
        cols.extend(self.params.iter().map(Vec::as_slice));
        w.push_columns(&cols).unwrap();
        w.finish().unwrap()
    }

    pub fn permuted(&self, rng: &mut StdRng) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let pick = |v: &Vec<f64>| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset {
            weight: pick(&self.weight),
            loglike: pick(&self.loglike),
            names: self.names.clone(),
            params: self.params.iter().map(pick).collect(),
        }
    }

    pub fn split_at(&self, k: usize) -> (Self, Self) {
        let part = |r: std::ops::Range<usize>| Dataset {
            weight: self.weight[r.clone()].to_vec(),
            loglike: self.loglike[r.clone()].to_vec(),
            names: self.names.clone(),
            params: self.params.iter().map(|p| p[r.clone()].to_vec()).collect(),
        };
        (part(0..k), part(k..self.len()))
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Edges of a uniform axis: `lo + i * ((hi - lo) / n)`, last edge `hi`.
pub fn oracle_edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let width = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + i as f64 * width })
        .collect()
}

/// Bin by binary search over the edges; `hi` belongs to the last bin.
pub fn oracle_bin(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if v < edges[0] || v > edges[n] {
        return None;
    }
    if v == edges[n] {
        return Some(n - 1);
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

/// Single in-memory pass over all rows, in row order.
pub fn oracle_grid(ds: &Dataset, axes: &Axes, kind: GridKind) -> Grid {
    let specs = axes.specs();
    let edges: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| oracle_edges(s.lo, s.hi, s.nbins))
        .collect();
    let cols: Vec<&[f64]> = specs.iter().map(|s| ds.column(&s.variable)).collect();
    let ny = if specs.len() == 2 { specs[1].nbins } else { 1 };

    let mut grid = Grid::empty(axes.clone(), kind);
    for row in 0..ds.len() {
        let w = ds.weight[row];
        grid.total_weight += w;
        let ix = oracle_bin(&edges[0], cols[0][row]);
        let iy = if cols.len() == 2 {
            oracle_bin(&edges[1], cols[1][row])
        } else {
            Some(0)
        };
        let (Some(ix), Some(iy)) = (ix, iy) else {
            grid.outside_count += 1;
            grid.outside_weight += w;
            continue;
        };
        let cell = ix * ny + iy;
        match kind {
            GridKind::Posterior => grid.values[cell] += w,
            GridKind::Profile => {
                let l = ds.loglike[row];
                grid.values[cell] = grid.values[cell].max(l);
                grid.lnl_max = grid.lnl_max.max(l);
            }
        }
    }
    grid
}

/// Bitwise equality of every numeric field.
pub fn grids_bit_identical(a: &Grid, b: &Grid) -> bool {
    a.axes == b.axes
        && a.kind == b.kind
        && a.outside_count == b.outside_count
        && a.outside_weight.to_bits() == b.outside_weight.to_bits()
        && a.total_weight.to_bits() == b.total_weight.to_bits()
        && a.lnl_max.to_bits() == b.lnl_max.to_bits()
        && a.values.len() == b.values.len()
        && a.values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Exhaustive HPD threshold: the largest bin value `t` such that the bins
/// with value `>= t` (summed in descending order) reach `p * M`.
pub fn oracle_hpd(values: &[f64], p: f64) -> f64 {
    let mut desc = values.to_vec();
    desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total = desc.iter().fold(0.0, |acc, v| acc + v);
    let mut candidates = desc.clone();
    candidates.dedup();
    candidates
        .into_iter()
        .filter(|&t| {
            let mass = desc.iter().filter(|&&v| v >= t).fold(0.0, |acc, v| acc + v);
            mass >= p * total
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact comparison of what a profile grid is about (per-bin maxima, best fit,
/// outside count); the weight bookkeeping sums are compared at `1e-12`.
pub fn profiles_match(a: &Grid, b: &Grid) -> bool {
    a.axes == b.axes
        && a.values
            .iter()
            .map(|v| v.to_bits())
            .eq(b.values.iter().map(|v| v.to_bits()))
        && a.lnl_max.to_bits() == b.lnl_max.to_bits()
        && a.outside_count == b.outside_count
        && rel_close(a.total_weight, b.total_weight, 1e-12)
        && rel_close(a.outside_weight, b.outside_weight, 1e-12)
}
