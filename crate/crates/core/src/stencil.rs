//! Second-order finite-difference operators: periodic central differences in
//! `x`, central differences in `y` with one-sided second-order closures at the
//! wall and at the truncation height.

use crate::grid::{Field, GridSpec};
use crate::par;

/// `d/dy` at row `j` of a column.
#[inline]
pub fn ddy(col: &[f64], j: usize, dy: f64) -> f64 {
    let n = col.len();
    if j == 0 {
        (-3.0 * col[0] + 4.0 * col[1] - col[2]) / (2.0 * dy)
    } else if j == n - 1 {
        (3.0 * col[n - 1] - 4.0 * col[n - 2] + col[n - 3]) / (2.0 * dy)
    } else {
        (col[j + 1] - col[j - 1]) / (2.0 * dy)
    }
}

/// `d^2/dy^2` at row `j` of a column.
#[inline]
pub fn d2y(col: &[f64], j: usize, dy: f64) -> f64 {
    let n = col.len();
    if j == 0 {
        (2.0 * col[0] - 5.0 * col[1] + 4.0 * col[2] - col[3]) / (dy * dy)
    } else if j == n - 1 {
        (2.0 * col[n - 1] - 5.0 * col[n - 2] + 4.0 * col[n - 3] - col[n - 4]) / (dy * dy)
    } else {
        (col[j + 1] - 2.0 * col[j] + col[j - 1]) / (dy * dy)
    }
}

/// Periodic neighbour column index `i + k` (`k` in `-2..=2`).
#[inline]
pub fn wrap(i: usize, k: isize, nx: usize) -> usize {
    ((i as isize + k).rem_euclid(nx as isize)) as usize
}

/// `d^k/dx^k` (`k <= 3`) of a field with compact periodic central stencils.
pub fn dx_pow(f: &Field, grid: &GridSpec, k: usize) -> Field {
    if k == 0 {
        return f.clone();
    }
    let nx = grid.nx;
    let dx = grid.dx();
    let mut out = Field::zeros(grid);
    par::for_each_chunk_mut(out.as_mut_slice(), grid.ny, |i, col| {
        let c = |kk: isize| f.column(wrap(i, kk, nx));
        match k {
            1 => {
                let (p, m) = (c(1), c(-1));
                for j in 0..col.len() {
                    col[j] = (p[j] - m[j]) / (2.0 * dx);
                }
            }
            2 => {
                let (p, o, m) = (c(1), c(0), c(-1));
                for j in 0..col.len() {
                    col[j] = (p[j] - 2.0 * o[j] + m[j]) / (dx * dx);
                }
            }
            3 => {
                let (p2, p1, m1, m2) = (c(2), c(1), c(-1), c(-2));
                for j in 0..col.len() {
                    col[j] = (p2[j] - 2.0 * p1[j] + 2.0 * m1[j] - m2[j]) / (2.0 * dx * dx * dx);
                }
            }
            _ => panic!("dx_pow supports orders 0..=3, got {k}"),
        }
    });
    out
}

pub fn dy_field(f: &Field, grid: &GridSpec) -> Field {
    let dy = grid.dy();
    let mut out = Field::zeros(grid);
    par::for_each_chunk_mut(out.as_mut_slice(), grid.ny, |i, col| {
        let src = f.column(i);
        for (j, v) in col.iter_mut().enumerate() {
            *v = ddy(src, j, dy);
        }
    });
    out
}

pub fn d2y_field(f: &Field, grid: &GridSpec) -> Field {
    let dy = grid.dy();
    let mut out = Field::zeros(grid);
    par::for_each_chunk_mut(out.as_mut_slice(), grid.ny, |i, col| {
        let src = f.column(i);
        for (j, v) in col.iter_mut().enumerate() {
            *v = d2y(src, j, dy);
        }
    });
    out
}
