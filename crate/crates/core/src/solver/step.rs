use nalgebra::{Matrix3, Vector3};

use super::physics::{
    check_h, isentropic_point, isentropic_speeds, non_isentropic_point, non_isentropic_speeds, Jet,
};
use super::problem::{ExplicitScheme, Problem};
use super::state::{apply_bcs_comps, State};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::{full_point, CutoffValues, NonIsentropicPoint, Regime, Traces};
use crate::par;
use crate::stencil::{d2y, wrap};
use crate::tridiag::{solve_block_tridiagonal, solve_tridiagonal};

const DIFFUSION_FLOOR: f64 = 1e-10;

/// Frozen diffusion coefficients at interior nodes (boundary rows unused).
#[derive(Debug, Clone)]
pub enum Diffusion {
    /// One diffusivity field per component.
    Diagonal(Vec<Field>),
    /// `S^{-1} B` per node, column-major like [`Field`].
    Block(Vec<Matrix3<f64>>),
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub tendency: Vec<Field>,
    pub diffusion: Diffusion,
}

/// Outflow traces per column and cut-off values per row at time `t`.
pub(crate) fn frame(problem: &Problem, t: f64) -> (Vec<Traces>, Vec<CutoffValues>) {
    let g = problem.grid;
    match problem.regime() {
        Regime::Isentropic => (Vec::new(), Vec::new()),
        Regime::NonIsentropic => {
            let o = problem.outflow_ref();
            let tr = (0..g.nx).map(|i| o.traces(t, g.x(i))).collect();
            let cut = (0..g.ny).map(|j| problem.cutoff.eval(g.y(j))).collect();
            (tr, cut)
        }
    }
}

#[inline]
fn jet(comps: &[Field], i: usize, j: usize, nx: usize, dx: f64, dy: f64) -> Jet {
    let (ip, im) = (wrap(i, 1, nx), wrap(i, -1, nx));
    let mut out = Jet::default();
    for (c, f) in comps.iter().enumerate() {
        let col = f.column(i);
        out.v[c] = col[j];
        out.dx[c] = (f.get(ip, j) - f.get(im, j)) / (2.0 * dx);
        out.dy[c] = (col[j + 1] - col[j - 1]) / (2.0 * dy);
    }
    out
}

/// Minimum over all nodes of `h` (isentropic) or `q` (non-isentropic),
/// failing on the first inadmissible node in index order.
pub fn check_admissible(problem: &Problem, t: f64, comps: &[Field]) -> Result<f64> {
    let g = problem.grid;
    let (tr, cut) = frame(problem, t);
    let params = &problem.params;
    let cols = par::map_indexed(g.nx, |i| -> Result<f64> {
        let mut m = f64::INFINITY;
        for j in 0..g.ny {
            let v = match problem.regime() {
                Regime::Isentropic => check_h(comps[1].get(i, j), params)?,
                Regime::NonIsentropic => {
                    let pt = NonIsentropicPoint {
                        u: comps[0].get(i, j),
                        theta_t: comps[1].get(i, j),
                        q_t: comps[2].get(i, j),
                    };
                    full_point(&pt, &tr[i], cut[j].chi, params)?.q
                }
            };
            m = m.min(v);
        }
        Ok(m)
    });
    let mut m = f64::INFINITY;
    for c in cols {
        m = m.min(c?);
    }
    Ok(m)
}

/// Explicit tendency (everything except the `d_y^2` diffusion) and the
/// frozen diffusion coefficients, at interior rows.
pub fn evaluate(problem: &Problem, t: f64, comps: &[Field]) -> Result<Evaluation> {
    let g = problem.grid;
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx(), g.dy());
    let nc = problem.ncomp();
    let (tr, cut) = frame(problem, t);
    let params = &problem.params;
    let forcing = problem.forcing.as_deref();

    type Col = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Matrix3<f64>>);
    let cols = par::map_indexed(nx, |i| -> Result<Col> {
        let mut tend = vec![vec![0.0; ny]; nc];
        let mut diag = Vec::new();
        let mut block = Vec::new();
        match problem.regime() {
            Regime::Isentropic => diag = vec![vec![0.0; ny]; 2],
            Regime::NonIsentropic => block = vec![Matrix3::zeros(); ny],
        }
        let x = g.x(i);
        for j in 1..ny - 1 {
            let jt = jet(comps, i, j, nx, dx, dy);
            let src = forcing.map(|f| f.eval(t, x, g.y(j)));
            match problem.regime() {
                Regime::Isentropic => {
                    let (tn, k) = isentropic_point(&jt, params)?;
                    for c in 0..2 {
                        if !(k[c] >= DIFFUSION_FLOOR) {
                            return Err(Error::DegenerateDiffusion {
                                value: k[c],
                                floor: DIFFUSION_FLOOR,
                            });
                        }
                        tend[c][j] = tn[c] + src.map_or(0.0, |s| s[c]);
                        diag[c][j] = k[c];
                    }
                }
                Regime::NonIsentropic => {
                    let (tn, k) = non_isentropic_point(&jt, &tr[i], &cut[j], params)?;
                    let det = k.determinant();
                    if !(det >= DIFFUSION_FLOOR.powi(3)) {
                        return Err(Error::DegenerateDiffusion {
                            value: det,
                            floor: DIFFUSION_FLOOR.powi(3),
                        });
                    }
                    for c in 0..3 {
                        tend[c][j] = tn[c] + src.map_or(0.0, |s| s[c]);
                    }
                    block[j] = k;
                }
            }
        }
        Ok((tend, diag, block))
    });

    let mut tendency: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(nx); nc];
    let mut diag_cols: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(nx); 2];
    let mut blocks = Vec::new();
    for col in cols {
        let (tend, diag, block) = col?;
        for (c, v) in tend.into_iter().enumerate() {
            tendency[c].push(v);
        }
        for (c, v) in diag.into_iter().enumerate() {
            diag_cols[c].push(v);
        }
        blocks.extend(block);
    }
    let tendency = tendency
        .into_iter()
        .map(|cols| Field::from_columns(&g, cols))
        .collect();
    let diffusion = match problem.regime() {
        Regime::Isentropic => Diffusion::Diagonal(
            diag_cols
                .into_iter()
                .map(|cols| Field::from_columns(&g, cols))
                .collect(),
        ),
        Regime::NonIsentropic => Diffusion::Block(blocks),
    };
    Ok(Evaluation {
        tendency,
        diffusion,
    })
}

/// The explicit part of the right-hand side alone.
pub fn rhs_explicit(problem: &Problem, t: f64, comps: &[Field]) -> Result<Vec<Field>> {
    Ok(evaluate(problem, t, comps)?.tendency)
}

/// Full `d_t v` (explicit part plus diffusion) with boundary rows taken from
/// the time derivative of the boundary closures.
pub fn pde_rate(problem: &Problem, t: f64, comps: &[Field]) -> Result<Vec<Field>> {
    let g = problem.grid;
    let (ny, dy) = (g.ny, g.dy());
    let ev = evaluate(problem, t, comps)?;
    let nc = comps.len();
    let mut out = ev.tendency;
    for (c, rate) in out.iter_mut().enumerate() {
        let neumann = c == nc - 1;
        par::for_each_chunk_mut(rate.as_mut_slice(), ny, |i, col| {
            let v = comps[c].column(i);
            for j in 1..ny - 1 {
                col[j] += match &ev.diffusion {
                    Diffusion::Diagonal(k) => k[c].get(i, j) * d2y(v, j, dy),
                    Diffusion::Block(k) => {
                        let m = &k[i * ny + j];
                        (0..nc)
                            .map(|b| m[(c, b)] * d2y(comps[b].column(i), j, dy))
                            .sum::<f64>()
                    }
                };
            }
            col[0] = if neumann {
                (4.0 * col[1] - col[2]) / 3.0
            } else {
                0.0
            };
            col[ny - 1] = 0.0;
        });
    }
    Ok(out)
}

fn axpy(base: &[Field], dt: f64, rate: &[Field]) -> Vec<Field> {
    base.iter()
        .zip(rate)
        .map(|(v, r)| v.zip_map(r, |a, b| a + dt * b))
        .collect()
}

fn blend(wa: f64, a: &[Field], wb: f64, b: &[Field]) -> Vec<Field> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.zip_map(y, |p, q| wa * p + wb * q))
        .collect()
}

/// Implicit Euler for `d_t v = K d_y^2 v` with `K` frozen, column by column.
pub fn implicit_diffusion(
    problem: &Problem,
    diffusion: &Diffusion,
    rhs: &[Field],
    dt: f64,
) -> Result<Vec<Field>> {
    let g = problem.grid;
    let (nx, ny, dy) = (g.nx, g.ny, g.dy());
    let m = ny - 2;
    let nc = rhs.len();
    let lam = dt / (dy * dy);
    let cols = par::map_indexed(nx, |i| -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; ny]; nc];
        match diffusion {
            Diffusion::Diagonal(k) => {
                for c in 0..nc {
                    let neumann = c == nc - 1;
                    let kc = k[c].column(i);
                    let mut lower = vec![0.0; m];
                    let mut diag = vec![0.0; m];
                    let mut upper = vec![0.0; m];
                    let mut b: Vec<f64> = rhs[c].column(i)[1..ny - 1].to_vec();
                    for r in 0..m {
                        let l = lam * kc[r + 1];
                        lower[r] = -l;
                        diag[r] = 1.0 + 2.0 * l;
                        upper[r] = -l;
                    }
                    if neumann {
                        let l = lam * kc[1];
                        diag[0] = 1.0 + 2.0 * l / 3.0;
                        upper[0] = -2.0 * l / 3.0;
                    }
                    solve_tridiagonal(&lower, &diag, &upper, &mut b)?;
                    out[c][1..ny - 1].copy_from_slice(&b);
                }
            }
            Diffusion::Block(k) => {
                let p1 = Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 4.0 / 3.0));
                let p2 = Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, -1.0 / 3.0));
                let mut lower = vec![Matrix3::zeros(); m];
                let mut diag = vec![Matrix3::zeros(); m];
                let mut upper = vec![Matrix3::zeros(); m];
                let mut b = vec![Vector3::zeros(); m];
                for r in 0..m {
                    let j = r + 1;
                    let l = lam * k[i * ny + j];
                    lower[r] = -l;
                    diag[r] = Matrix3::identity() + 2.0 * l;
                    upper[r] = -l;
                    b[r] = Vector3::new(rhs[0].get(i, j), rhs[1].get(i, j), rhs[2].get(i, j));
                }
                let l1 = lower[0];
                diag[0] += l1 * p1;
                upper[0] += l1 * p2;
                solve_block_tridiagonal(&lower, &diag, &upper, &mut b)?;
                for r in 0..m {
                    for c in 0..3 {
                        out[c][r + 1] = b[r][c];
                    }
                }
            }
        }
        Ok(out)
    });
    let mut per_comp: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(nx); nc];
    for col in cols {
        for (c, v) in col?.into_iter().enumerate() {
            per_comp[c].push(v);
        }
    }
    let mut out: Vec<Field> = per_comp
        .into_iter()
        .map(|cols| Field::from_columns(&g, cols))
        .collect();
    apply_bcs_comps(problem.regime(), &mut out);
    Ok(out)
}

/// One IMEX step: explicit update of the non-diffusive terms, then implicit
/// Euler on the diffusion with coefficients frozen at `t^n`.
pub fn step_imex(problem: &Problem, state: &State, dt: f64) -> Result<State> {
    let t = state.t;
    let v = &state.comps;
    let ev = evaluate(problem, t, v)?;
    let regime = problem.regime();
    let star = match problem.stepping.scheme {
        ExplicitScheme::Euler => axpy(v, dt, &ev.tendency),
        ExplicitScheme::SspRk3 => {
            let mut v1 = axpy(v, dt, &ev.tendency);
            apply_bcs_comps(regime, &mut v1);
            let t1 = rhs_explicit(problem, t + dt, &v1)?;
            let mut v2 = blend(0.75, v, 0.25, &axpy(&v1, dt, &t1));
            apply_bcs_comps(regime, &mut v2);
            let t2 = rhs_explicit(problem, t + 0.5 * dt, &v2)?;
            blend(1.0 / 3.0, v, 2.0 / 3.0, &axpy(&v2, dt, &t2))
        }
    };
    let next = implicit_diffusion(problem, &ev.diffusion, &star, dt)?;
    if next
        .iter()
        .any(|f| !f.as_slice().iter().all(|x| x.is_finite()))
    {
        return Err(Error::StepFailure {
            t,
            reason: "non-finite values after step".into(),
        });
    }
    check_admissible(problem, t + dt, &next)?;
    Ok(state.advance_to(t + dt, next))
}

/// Advective step size: `cfl * min(dx / s_x, dy / s_y)`, capped by `dy`
/// and by the optional `dt_max`.
pub fn stable_dt(problem: &Problem, state: &State) -> Result<f64> {
    let g = problem.grid;
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx(), g.dy());
    let (tr, cut) = frame(problem, state.t);
    let params = &problem.params;
    let comps = &state.comps;
    let cols = par::map_indexed(nx, |i| -> Result<(f64, f64)> {
        let (mut sx, mut sy) = (0.0f64, 0.0f64);
        for j in 1..ny - 1 {
            let jt = jet(comps, i, j, nx, dx, dy);
            let (a, b) = match problem.regime() {
                Regime::Isentropic => isentropic_speeds(&jt, params)?,
                Regime::NonIsentropic => non_isentropic_speeds(&jt, &tr[i], &cut[j], params)?,
            };
            sx = sx.max(a);
            sy = sy.max(b);
        }
        Ok((sx, sy))
    });
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for c in cols {
        let (a, b) = c?;
        sx = sx.max(a);
        sy = sy.max(b);
    }
    let cfl = problem.stepping.cfl;
    let mut dt = dy;
    if sx > 0.0 {
        dt = dt.min(cfl * dx / sx);
    }
    if sy > 0.0 {
        dt = dt.min(cfl * dy / sy);
    }
    if let Some(m) = problem.stepping.dt_max {
        dt = dt.min(m);
    }
    Ok(dt)
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::Admissibility { .. }
            | Error::SingularSystem { .. }
            | Error::DegenerateDiffusion { .. }
            | Error::StepFailure { .. }
    )
}

/// `step_imex` with up to `max_halvings` retries at half the step size.
/// Returns the new state and the step actually taken.
pub fn advance(problem: &Problem, state: &State, dt: f64) -> Result<(State, f64)> {
    let mut dt = dt;
    let mut last = None;
    for _ in 0..=problem.stepping.max_halvings {
        match step_imex(problem, state, dt) {
            Ok(s) => return Ok((s, dt)),
            Err(e) if recoverable(&e) => {
                log::debug!("step at t = {} with dt = {dt} rejected: {e}", state.t);
                last = Some(e);
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepFailure {
        t: state.t,
        reason: format!(
            "rejected after {} halvings: {}",
            problem.stepping.max_halvings,
            last.map(|e| e.to_string()).unwrap_or_default()
        ),
    })
}
