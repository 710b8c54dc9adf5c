//! Stream-function change of vertical coordinate and reconstruction of the
//! physical unknowns.
//!
//! Physical coordinates `(x, y)` map to `(x, psi)` with `psi = int_0^y h ds`,
//! so `dy/dpsi = 1/h`. Both directions use the composite trapezoid rule for the
//! map and monotone cubic (PCHIP) interpolation for resampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::model::{coeffs_unchecked, Regime, Traces};
use crate::par;
use crate::solver::{frame, Problem, State};
use crate::stencil::{d2y, ddy, dx_pow};

/// Smallest admissible `h` for the change of variables.
pub const H_THRESHOLD: f64 = 0.5;

/// Piecewise cubic Hermite interpolant with Fritsch-Butland slopes.
/// Outside the sample range the end values are extended constantly.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 2 {
            return Err(Error::Domain(format!(
                "pchip needs matching samples (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        if let Some(k) = (1..n).find(|&k| !(x[k] > x[k - 1])) {
            return Err(Error::Domain(format!(
                "pchip abscissae not strictly increasing at index {k}"
            )));
        }
        let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= xq) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (xq - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        // written so that constant data is reproduced exactly
        self.y[k] + h01 * (self.y[k + 1] - self.y[k]) + h * (h10 * self.d[k] + h11 * self.d[k + 1])
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }
}

/// Running integral `int_0^{y_j} f` by the trapezoid rule on a uniform grid.
pub fn cumulative_trapezoid(values: &[f64], dy: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dy * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

fn check_threshold(h: &Field) -> Result<f64> {
    let mut h_min = f64::INFINITY;
    for i in 0..h.nx() {
        for (j, &v) in h.column(i).iter().enumerate() {
            if !(v >= H_THRESHOLD) {
                return Err(Error::DegenerateTransform {
                    column: i,
                    row: j,
                    value: v,
                    threshold: H_THRESHOLD,
                });
            }
            h_min = h_min.min(v);
        }
    }
    Ok(h_min)
}

/// `psi(x, y)` sampled on the physical grid with the per-column inverse maps.
#[derive(Debug, Clone)]
pub struct TransformMap {
    pub grid: GridSpec,
    pub psi: Field,
    pub h_min: f64,
    inverse: Vec<Pchip>,
}

impl TransformMap {
    /// Physical height of the node `psi_bar` in column `i`.
    pub fn y_of_psi(&self, i: usize, psi_bar: f64) -> f64 {
        self.inverse[i].eval(psi_bar)
    }

    /// Smallest `psi(Y_max)` over the columns.
    pub fn psi_top(&self) -> f64 {
        self.inverse
            .iter()
            .map(Pchip::x_max)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn stream_function(h_phys: &Field, grid: &GridSpec) -> Result<TransformMap> {
    let h_min = check_threshold(h_phys)?;
    let dy = grid.dy();
    let columns: Vec<Vec<f64>> =
        par::map_indexed(grid.nx, |i| cumulative_trapezoid(h_phys.column(i), dy));
    let ys: Vec<f64> = (0..grid.ny).map(|j| grid.y(j)).collect();
    let inverse = columns
        .iter()
        .map(|c| Pchip::new(c.clone(), ys.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransformMap {
        grid: *grid,
        psi: Field::from_columns(grid, columns),
        h_min,
        inverse,
    })
}

/// Fields resampled onto another grid; `extrapolated` counts target nodes
/// that fell beyond the sampled range and received the far-field value.
#[derive(Debug, Clone)]
pub struct Resampled {
    pub fields: Vec<Field>,
    pub extrapolated: usize,
}

fn resample(
    fields: &[Field],
    source_nodes: &[Vec<f64>],
    target: &GridSpec,
    at: impl Fn(usize, usize) -> f64 + Sync + Send,
) -> Result<Resampled> {
    let nx = target.nx;
    let per_column: Vec<Result<(Vec<Vec<f64>>, usize)>> = par::map_indexed(nx, |i| {
        let nodes = &source_nodes[i];
        let top = nodes[nodes.len() - 1];
        let queries: Vec<f64> = (0..target.ny).map(|j| at(i, j)).collect();
        let extrapolated = queries.iter().filter(|&&q| q > top * (1.0 + 1e-12)).count();
        let cols = fields
            .iter()
            .map(|f| {
                let p = Pchip::new(nodes.clone(), f.column(i).to_vec())?;
                Ok(queries.iter().map(|&q| p.eval(q)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok((cols, extrapolated))
    });
    let mut out: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(nx); fields.len()];
    let mut extrapolated = 0;
    for r in per_column {
        let (cols, e) = r?;
        extrapolated += e;
        for (c, col) in cols.into_iter().enumerate() {
            out[c].push(col);
        }
    }
    if extrapolated > 0 {
        log::warn!(
            "{extrapolated} target nodes beyond the mapped range, far-field values extended"
        );
    }
    Ok(Resampled {
        fields: out
            .into_iter()
            .map(|cols| Field::from_columns(target, cols))
            .collect(),
        extrapolated,
    })
}

fn check_columns(fields: &[Field], grid: &GridSpec) -> Result<()> {
    for f in fields {
        if f.nx() != grid.nx || f.ny() != grid.ny {
            return Err(Error::Domain(format!(
                "field is {}x{}, grid is {}x{}",
                f.nx(),
                f.ny(),
                grid.nx,
                grid.ny
            )));
        }
    }
    Ok(())
}

/// Samples physical fields at `y_of_psi(psi_bar_k)` for the nodes of `target`.
pub fn to_transformed(
    fields: &[Field],
    map: &TransformMap,
    target: &GridSpec,
) -> Result<Resampled> {
    check_columns(fields, &map.grid)?;
    if target.nx != map.grid.nx {
        return Err(Error::Domain("transform keeps the x-grid".into()));
    }
    let ys: Vec<f64> = (0..map.grid.ny).map(|j| map.grid.y(j)).collect();
    // Interpolate in y at the pulled-back heights; count overflow in psi.
    let psi_top: Vec<f64> = map.inverse.iter().map(Pchip::x_max).collect();
    let mut r = resample(fields, &vec![ys; target.nx], target, |i, j| {
        map.y_of_psi(i, target.y(j))
    })?;
    r.extrapolated = (0..target.nx)
        .map(|i| {
            (0..target.ny)
                .filter(|&j| target.y(j) > psi_top[i] * (1.0 + 1e-12))
                .count()
        })
        .sum();
    Ok(r)
}

/// Fields on the physical grid together with `y(psi_bar)` per column.
#[derive(Debug, Clone)]
pub struct PhysicalFields {
    pub fields: Vec<Field>,
    pub y_map: Field,
    pub extrapolated: usize,
}

/// Inverse change of variables: `y(psi_bar) = int_0^psi_bar ds / h`, then
/// resampling onto the uniform physical grid `phys`.
pub fn from_transformed(
    fields: &[Field],
    h_trans: &Field,
    trans: &GridSpec,
    phys: &GridSpec,
) -> Result<PhysicalFields> {
    check_columns(fields, trans)?;
    check_columns(std::slice::from_ref(h_trans), trans)?;
    if trans.nx != phys.nx {
        return Err(Error::Domain("transform keeps the x-grid".into()));
    }
    check_threshold(h_trans)?;
    let dpsi = trans.dy();
    let y_cols: Vec<Vec<f64>> = par::map_indexed(trans.nx, |i| {
        let inv: Vec<f64> = h_trans.column(i).iter().map(|h| 1.0 / h).collect();
        cumulative_trapezoid(&inv, dpsi)
    });
    let r = resample(fields, &y_cols, phys, |_, j| phys.y(j))?;
    Ok(PhysicalFields {
        fields: r.fields,
        y_map: Field::from_columns(trans, y_cols),
        extrapolated: r.extrapolated,
    })
}

/// `g = -int_0^y d_x h ds`.
pub fn recover_g(h: &Field, grid: &GridSpec) -> Field {
    let hx = dx_pow(h, grid, 1);
    let dy = grid.dy();
    let cols = par::map_indexed(grid.nx, |i| {
        cumulative_trapezoid(hx.column(i), dy)
            .into_iter()
            .map(|v| -v)
            .collect()
    });
    Field::from_columns(grid, cols)
}

fn integrate_columns(rhs: &Field, grid: &GridSpec) -> Field {
    let dy = grid.dy();
    Field::from_columns(
        grid,
        par::map_indexed(grid.nx, |i| cumulative_trapezoid(rhs.column(i), dy)),
    )
}

/// Isentropic `v` from `d_x u + d_y v = C h ((h d_x + g d_y) u + d_y^2 h~)`, `v(0) = 0`.
pub fn recover_v_isentropic(
    u: &Field,
    h_t: &Field,
    g: &Field,
    grid: &GridSpec,
    gamma: f64,
) -> Field {
    let ux = dx_pow(u, grid, 1);
    let dy = grid.dy();
    let cols = par::map_indexed(grid.nx, |i| {
        let (uc, hc, gc, uxc) = (u.column(i), h_t.column(i), g.column(i), ux.column(i));
        (0..grid.ny)
            .map(|j| {
                let h = 1.0 + hc[j];
                let c = coeffs_unchecked(h, gamma).c;
                c * h * (h * uxc[j] + gc[j] * ddy(uc, j, dy) + d2y(hc, j, dy)) - uxc[j]
            })
            .collect()
    });
    integrate_columns(&Field::from_columns(grid, cols), grid)
}

/// Non-isentropic `v` from
/// `d_x u + d_y v = (1-a)/Q h ((h d_x + g d_y) u + d_y^2 h) + a/Q (d_y^2 theta + (d_y u)^2 + (d_y h)^2) - (1-a)/Q (P_t + P_x u)`
/// with `Q = P + (1 - 2a) h^2 / 2`.
pub fn recover_v_non_isentropic(
    u: &Field,
    theta: &Field,
    h: &Field,
    g: &Field,
    traces: &[Traces],
    a: f64,
    grid: &GridSpec,
) -> Field {
    let ux = dx_pow(u, grid, 1);
    let dy = grid.dy();
    let cols = par::map_indexed(grid.nx, |i| {
        let tr = &traces[i];
        let (uc, tc, hc, gc, uxc) = (
            u.column(i),
            theta.column(i),
            h.column(i),
            g.column(i),
            ux.column(i),
        );
        (0..grid.ny)
            .map(|j| {
                let hh = hc[j];
                let q = tr.p + 0.5 * (1.0 - 2.0 * a) * hh * hh;
                let (uy, hy) = (ddy(uc, j, dy), ddy(hc, j, dy));
                (1.0 - a) / q * hh * (hh * uxc[j] + gc[j] * uy + d2y(hc, j, dy))
                    + a / q * (d2y(tc, j, dy) + uy * uy + hy * hy)
                    - (1.0 - a) / q * (tr.p_t + tr.p_x * uc[j])
                    - uxc[j]
            })
            .collect()
    });
    integrate_columns(&Field::from_columns(grid, cols), grid)
}

/// Physical-coordinate view of a solver state.
#[derive(Debug, Clone)]
pub struct PhysicalSnapshot {
    pub grid: GridSpec,
    pub t: f64,
    /// `y(psi_bar)` on the transformed nodes.
    pub y_map: Field,
    pub u: Field,
    /// Full `h`.
    pub h: Field,
    /// Full temperature (non-isentropic only).
    pub theta: Option<Field>,
    pub v: Field,
    pub g: Field,
    pub extrapolated: usize,
}

/// Maps a state back to the physical grid `phys` (same `x`-grid) and
/// reconstructs `v` and `g`.
pub fn recover_vg(problem: &Problem, state: &State, phys: &GridSpec) -> Result<PhysicalSnapshot> {
    let grid = &problem.grid;
    let t = state.t;
    let comps = &state.comps;
    match problem.regime() {
        Regime::Isentropic => {
            let h = comps[1].map(|v| 1.0 + v);
            let back = from_transformed(&[comps[0].clone(), comps[1].clone()], &h, grid, phys)?;
            let (u, h_t) = (&back.fields[0], &back.fields[1]);
            let g = recover_g(h_t, phys);
            let v = recover_v_isentropic(u, h_t, &g, phys, problem.params.gamma);
            Ok(PhysicalSnapshot {
                grid: *phys,
                t,
                y_map: back.y_map,
                u: u.clone(),
                h: h_t.map(|v| 1.0 + v),
                theta: None,
                v,
                g,
                extrapolated: back.extrapolated,
            })
        }
        Regime::NonIsentropic => {
            let (traces, cut) = frame(problem, t);
            let mut theta = Field::zeros(grid);
            let mut h = Field::zeros(grid);
            for i in 0..grid.nx {
                let tr = &traces[i];
                for j in 0..grid.ny {
                    let chi = cut[j].chi;
                    theta.set(
                        i,
                        j,
                        comps[1].get(i, j) + chi * tr.theta + (1.0 - chi) * tr.theta_star,
                    );
                    let q = comps[2].get(i, j) + 0.5 * tr.h * tr.h;
                    if !(q > 0.0) {
                        return Err(Error::DegenerateTransform {
                            column: i,
                            row: j,
                            value: q,
                            threshold: H_THRESHOLD,
                        });
                    }
                    h.set(i, j, (2.0 * q).sqrt());
                }
            }
            let back = from_transformed(&[comps[0].clone(), theta, h.clone()], &h, grid, phys)?;
            let (u, theta, h) = (&back.fields[0], &back.fields[1], &back.fields[2]);
            let g = recover_g(h, phys);
            let v = recover_v_non_isentropic(u, theta, h, &g, &traces, problem.params.a(), phys);
            Ok(PhysicalSnapshot {
                grid: *phys,
                t,
                y_map: back.y_map,
                u: u.clone(),
                h: h.clone(),
                theta: Some(theta.clone()),
                v,
                g,
                extrapolated: back.extrapolated,
            })
        }
    }
}

/// Amplitude of the round-trip profile used by the acceptance study.
pub const ROUNDTRIP_DELTA: f64 = 0.02;

/// The smooth profile used for round-trip studies, monotone in `y` per column:
/// `h = 1 + delta (1 + cos x / 2) e^{-y}`, `u = delta sin x e^{-y}`.
///
/// Monotone columns keep the PCHIP slopes unlimited, so the round trip is
/// limited by the trapezoid map only. Interior extrema bring in the O(dy^2)
/// limiter error of monotone interpolation.
pub fn roundtrip_profile(grid: &GridSpec, delta: f64) -> (Field, Field) {
    let h = Field::from_fn(grid, move |x, y| {
        1.0 + delta * (1.0 + 0.5 * x.cos()) * (-y).exp()
    });
    let u = Field::from_fn(grid, move |x, y| delta * x.sin() * (-y).exp());
    (h, u)
}

/// Sup-norm error of `from_transformed(to_transformed(f))` on the round-trip
/// profile, over `(u, h)`.
pub fn roundtrip_error(grid: &GridSpec, delta: f64) -> Result<f64> {
    let (h, u) = roundtrip_profile(grid, delta);
    let map = stream_function(&h, grid)?;
    let fwd = to_transformed(&[u.clone(), h.clone()], &map, grid)?;
    let back = from_transformed(&fwd.fields, &fwd.fields[1], grid, grid)?;
    Ok(back.fields[0]
        .max_abs_diff(&u)
        .max(back.fields[1].max_abs_diff(&h)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub delta: f64,
    pub nx: usize,
    pub y_max: f64,
    /// `(Ny, sup error)`.
    pub rows: Vec<(usize, f64)>,
    /// `log2` of successive error ratios.
    pub orders: Vec<f64>,
}

impl RoundtripReport {
    pub fn finest_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.1)
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Round-trip errors over a ladder of `Ny` at fixed `nx` and `Y_max`.
pub fn roundtrip_study(
    ladder: &[usize],
    nx: usize,
    y_max: f64,
    delta: f64,
) -> Result<RoundtripReport> {
    let rows = par::map_slice(ladder, |&ny| {
        let g = GridSpec::new(nx, ny, y_max)?;
        Ok((ny, roundtrip_error(&g, delta)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let orders = rows.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    Ok(RoundtripReport {
        delta,
        nx,
        y_max,
        rows,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(ny: usize) -> GridSpec {
        GridSpec::new(16, ny, 20.0).unwrap()
    }

    #[test]
    fn pchip_reproduces_constants_and_lines() {
        let x: Vec<f64> = (0..10).map(|k| (k as f64).powf(1.3)).collect();
        let c = Pchip::new(x.clone(), vec![2.5; 10]).unwrap();
        let l = Pchip::new(x.clone(), x.iter().map(|v| 3.0 * v - 1.0).collect()).unwrap();
        for q in [0.0, 0.3, 1.7, 5.5, 12.0, 100.0] {
            assert_eq!(c.eval(q), 2.5);
            if q <= x[9] {
                assert!((l.eval(q) - (3.0 * q - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let x: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let y = vec![0.0, 0.0, 0.1, 3.0, 3.1, 3.1, 7.0, 7.0];
        let p = Pchip::new(x, y).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=700 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v >= last - 1e-15);
            last = v;
        }
    }

    #[test]
    fn unit_h_is_the_identity() {
        let g = grid(65);
        let h = Field::from_fn(&g, |_, _| 1.0);
        let map = stream_function(&h, &g).unwrap();
        for j in 0..g.ny {
            assert!((map.psi.get(3, j) - g.y(j)).abs() < 1e-12);
        }
        let f = Field::from_fn(&g, |x, y| x.sin() * (-y).exp());
        let r = to_transformed(&[f.clone()], &map, &g).unwrap();
        assert!(r.fields[0].max_abs_diff(&f) < 1e-12);
        let back = from_transformed(&[f.clone()], &h, &g, &g).unwrap();
        assert!(back.fields[0].max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn constants_survive_both_directions_exactly() {
        let g = grid(65);
        let (h, _) = roundtrip_profile(&g, 0.3);
        let c = Field::from_fn(&g, |_, _| -0.75);
        let map = stream_function(&h, &g).unwrap();
        let fwd = to_transformed(&[c.clone()], &map, &g).unwrap();
        assert_eq!(fwd.fields[0], c);
        let back = from_transformed(&[c.clone()], &h, &g, &g).unwrap();
        assert_eq!(back.fields[0], c);
    }

    #[test]
    fn psi_matches_antiderivative_at_second_order() {
        let err = |ny| {
            let g = grid(ny);
            let h = Field::from_fn(&g, |_, y| 1.0 + (-y).exp());
            let map = stream_function(&h, &g).unwrap();
            (0..g.ny)
                .map(|j| {
                    let y = g.y(j);
                    (map.psi.get(0, j) - (y + 1.0 - (-y).exp())).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(101), err(201));
        assert!(e1 < 1e-2);
        assert!((e1 / e2).log2() > 1.9);
    }

    #[test]
    fn psi_is_strictly_increasing() {
        let g = grid(129);
        let (h, _) = roundtrip_profile(&g, 0.4);
        let map = stream_function(&h, &g).unwrap();
        for i in 0..g.nx {
            let c = map.psi.column(i);
            for j in 1..g.ny {
                assert!(c[j] - c[j - 1] >= 0.5 * g.dy());
            }
        }
    }

    #[test]
    fn low_h_is_rejected() {
        let g = grid(33);
        let h = Field::from_fn(&g, |_, y| if (y - 5.0).abs() < 1.0 { 0.3 } else { 1.0 });
        assert!(matches!(
            stream_function(&h, &g),
            Err(Error::DegenerateTransform { .. })
        ));
    }

    #[test]
    fn composition_with_exp_profile_is_second_order() {
        let err = |ny| {
            let g = grid(ny);
            let h = Field::from_fn(&g, |_, y| 1.0 + (-y).exp());
            let u = Field::from_fn(&g, |_, y| (-y).exp());
            let map = stream_function(&h, &g).unwrap();
            let r = to_transformed(&[u], &map, &g).unwrap();
            // psi = y + 1 - e^{-y}; invert by Newton for the oracle
            (0..g.ny)
                .map(|j| {
                    let pb = g.y(j);
                    let mut y = pb;
                    for _ in 0..50 {
                        y -= (y + 1.0 - (-y).exp() - pb) / (1.0 + (-y).exp());
                    }
                    (r.fields[0].get(0, j) - (-y).exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(101), err(201));
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn inverse_map_matches_closed_form() {
        // h = 1 + e^{-s}/2  =>  y = s - ln((2 + e^{-s})/3) ... via int ds / (1 + e^{-s}/2)
        let err = |ny| {
            let g = grid(ny);
            let h = Field::from_fn(&g, |_, s| 1.0 + 0.5 * (-s).exp());
            let back = from_transformed(&[h.clone()], &h, &g, &g).unwrap();
            (0..g.ny)
                .map(|j| {
                    let s = g.y(j);
                    let exact = (2.0 * s.exp() + 1.0).ln() - 3f64.ln();
                    (back.y_map.get(0, j) - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(101), err(201));
        assert!(e1 < 1e-3);
        assert!((e1 / e2).log2() > 1.9);
    }

    #[test]
    fn zero_fields_give_zero_v_and_g() {
        let g = grid(65);
        let z = Field::zeros(&g);
        let gg = recover_g(&z, &g);
        assert_eq!(gg.max_abs(), 0.0);
        assert_eq!(recover_v_isentropic(&z, &z, &gg, &g, 1.4).max_abs(), 0.0);
    }

    #[test]
    fn g_matches_closed_form() {
        let d = 0.1;
        let err = |ny| {
            let g = GridSpec::new(64, ny, 20.0).unwrap();
            let h = Field::from_fn(&g, move |x, y| d * x.sin() * (-y).exp());
            let gg = recover_g(&h, &g);
            let exact = Field::from_fn(&g, move |x, y| d * x.cos() * ((-y).exp() - 1.0));
            gg.max_abs_diff(&exact)
        };
        let (e1, e2) = (err(101), err(201));
        // x-error dominates at fixed nx; y-quadrature error still decays
        assert!(e1 < 2e-3, "{e1}");
        assert!(e2 <= e1);
    }

    #[test]
    fn recovered_g_satisfies_the_divergence_identity() {
        let g = GridSpec::new(32, 201, 20.0).unwrap();
        let h = Field::from_fn(&g, |x, y| 0.1 * x.cos() * y * (-y).exp());
        let gg = recover_g(&h, &g);
        let hx = dx_pow(&h, &g, 1);
        let dy = g.dy();
        for i in 0..g.nx {
            for j in 1..g.ny - 1 {
                let gy = ddy(gg.column(i), j, dy);
                // central difference of a trapezoid integral: dy^2/4 |d_y^2 h_x| <= 0.05 dy^2
                let r = (hx.get(i, j) + gy).abs();
                assert!(r <= 0.05 * dy * dy, "{i} {j} {r}");
            }
        }
    }

    #[test]
    fn roundtrip_is_second_order() {
        let es: Vec<f64> = [128, 256, 512]
            .iter()
            .map(|&n| roundtrip_error(&grid(n), ROUNDTRIP_DELTA).unwrap())
            .collect();
        for w in es.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{es:?}");
        }
    }

    #[test]
    fn v_matches_fine_quadrature_of_the_constraint() {
        let d = 1e-3;
        let gamma = 1.4;
        let g = GridSpec::new(128, 2001, 20.0).unwrap();
        let u = Field::from_fn(&g, move |x, y| d * x.sin() * y * (-y).exp());
        let ht = Field::from_fn(&g, move |x, y| d * x.cos() * (-y * y).exp());
        let gg = recover_g(&ht, &g);
        let v = recover_v_isentropic(&u, &ht, &gg, &g, gamma);
        // oracle: analytic integrands, composite Simpson on a 10x finer mesh
        let rhs = move |x: f64, y: f64, gval: f64| {
            let e = (-y).exp();
            let ux = d * x.cos() * y * e;
            let uy = d * x.sin() * (1.0 - y) * e;
            let g2 = (-y * y).exp();
            let hyy = d * x.cos() * (4.0 * y * y - 2.0) * g2;
            let h = 1.0 + d * x.cos() * g2;
            let c = coeffs_unchecked(h, gamma).c;
            c * h * (h * ux + gval * uy + hyy) - ux
        };
        let mut worst = 0.0f64;
        for i in [0, 17, 45, 90] {
            let x = g.x(i);
            let n = 20000;
            let hs = 20.0 / n as f64;
            // g = -int h~_x = d sin x int_0^y e^{-s^2}
            let mut gcum = vec![0.0; n + 1];
            for k in 1..=n {
                let (a, b) = ((k - 1) as f64 * hs, k as f64 * hs);
                let m = 0.5 * (a + b);
                let f = |s: f64| d * x.sin() * (-s * s).exp();
                gcum[k] = gcum[k - 1] + hs / 6.0 * (f(a) + 4.0 * f(m) + f(b));
            }
            let mut vcum = 0.0;
            let step = n / (g.ny - 1);
            for k in 1..=n {
                let (a, b) = ((k - 1) as f64 * hs, k as f64 * hs);
                let m = 0.5 * (a + b);
                let gm = 0.5 * (gcum[k - 1] + gcum[k]);
                vcum +=
                    hs / 6.0 * (rhs(x, a, gcum[k - 1]) + 4.0 * rhs(x, m, gm) + rhs(x, b, gcum[k]));
                if k % step == 0 {
                    worst = worst.max((v.get(i, k / step) - vcum).abs());
                }
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn equilibrium_states_recover_zero_v_and_g() {
        use crate::model::{
            make_outflow, BoundaryTemperature, Envelope, EnvelopeShape, ModelParams, OutflowFamily,
        };
        let g = GridSpec::new(16, 65, 20.0).unwrap();
        let iso = Problem::isentropic(ModelParams::isentropic(1.4), g).unwrap();
        let snap = recover_vg(&iso, &State::zeros(Regime::Isentropic, &g), &g).unwrap();
        assert_eq!(snap.v.max_abs(), 0.0);
        assert_eq!(snap.g.max_abs(), 0.0);
        assert!(snap.h.max_abs_diff(&Field::from_fn(&g, |_, _| 1.0)) < 1e-15);

        let o = make_outflow(
            OutflowFamily::UniformSteady {
                p: 1.5,
                theta: 1.0,
                h: 1.0,
            },
            BoundaryTemperature::default(),
            Envelope {
                epsilon: 0.1,
                sigma: 0.5,
                g: EnvelopeShape::Constant { g0: 1.0 },
            },
            1.0,
            1.0,
        )
        .unwrap();
        let non = Problem::new(ModelParams::non_isentropic(1.0), g, Some(o)).unwrap();
        let snap = recover_vg(&non, &State::zeros(Regime::NonIsentropic, &g), &g).unwrap();
        assert!(snap.v.max_abs() < 1e-14);
        assert!(snap.g.max_abs() < 1e-14);
        assert!(
            snap.theta
                .unwrap()
                .max_abs_diff(&Field::from_fn(&g, |_, _| 1.0))
                < 1e-14
        );
    }
}
