use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Periodic-in-`x`, truncated half-line-in-`y` tensor grid.
///
/// `x_i = i dx` with `dx = 2 pi / nx`; `y_j = j dy` with `dy = y_max / (ny - 1)`,
/// so row `0` is the wall and row `ny - 1` the truncation height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub y_max: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, y_max: f64) -> Result<Self> {
        let g = Self { nx, ny, y_max };
        let errs = g.violations();
        if errs.is_empty() {
            Ok(g)
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.nx < 8 {
            errs.push(format!("grid.nx = {} violates Nx >= 8", self.nx));
        }
        if self.ny < 16 {
            errs.push(format!("grid.ny = {} violates Ny >= 16", self.ny));
        }
        if !(self.y_max >= 10.0) {
            errs.push(format!("grid.y_max = {} violates Y_max >= 10", self.y_max));
        }
        errs
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        self.y_max / (self.ny - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trapezoid weights in `y` (periodic rectangle rule in `x` is uniform `dx`).
    pub fn y_weights(&self) -> Vec<f64> {
        let dy = self.dy();
        let mut w = vec![dy; self.ny];
        w[0] = 0.5 * dy;
        w[self.ny - 1] = 0.5 * dy;
        w
    }
}

/// Scalar field stored column-major: `data[i * ny + j]` is node `(x_i, y_j)`,
/// so each `x`-column is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: &GridSpec, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len(), "field size mismatch");
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data,
        }
    }

    pub fn from_fn<F>(grid: &GridSpec, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        let mut out = Self::zeros(grid);
        let g = *grid;
        par::for_each_chunk_mut(&mut out.data, grid.ny, |i, col| {
            let x = g.x(i);
            for (j, v) in col.iter_mut().enumerate() {
                *v = f(x, g.y(j));
            }
        });
        out
    }

    pub fn from_columns(grid: &GridSpec, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(columns.len(), grid.nx);
        let mut data = Vec::with_capacity(grid.len());
        for c in columns {
            assert_eq!(c.len(), grid.ny);
            data.extend_from_slice(&c);
        }
        Self {
            nx: grid.nx,
            ny: grid.ny,
            data,
        }
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ny + j] = v;
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.ny..(i + 1) * self.ny]
    }

    #[inline]
    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ny..(i + 1) * self.ny]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        Field {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `int int f dx dy` with the periodic rectangle rule in `x` and trapezoid in `y`.
    /// Column sums are formed first and then added in index order.
    pub fn integrate(&self, grid: &GridSpec) -> f64 {
        let w = grid.y_weights();
        let cols = par::map_indexed(self.nx, |i| {
            self.column(i)
                .iter()
                .zip(&w)
                .map(|(v, w)| v * w)
                .sum::<f64>()
        });
        cols.iter().sum::<f64>() * grid.dx()
    }
}
