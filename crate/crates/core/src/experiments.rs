//! Campaigns on top of the solver: lifespan sweeps, manufactured-solution
//! convergence studies and the randomized algebra suite.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{gronwall_check, GronwallFit, GronwallSample};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::model::{
    coeffs_unchecked, make_outflow, matrices_at, validate_outflow, BoundaryTemperature, CutoffSpec,
    Envelope, EnvelopeShape, FullPoint, ModelParams, OutflowFamily, OutflowSpec, Regime,
};
use crate::par;
use crate::solver::{
    init_state, manufactured_source, run, step_imex, Manufactured, Problem, Profile, RunSpec,
    State, Stepping,
};

/// Lifespan exponent of the lower bound `T >= C eps^{-4/3}`.
pub const LIFESPAN_EXPONENT: f64 = -4.0 / 3.0;

// ---------------------------------------------------------------- sweeps

/// Outflow of a sweep entry, rescaled with `eps`: the envelope is
/// `f = eps^{1+sigma} g(t)` and the boundary-temperature gap takes
/// `gap_fraction` of the largest value the envelope admits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutflowTemplate {
    pub family: OutflowFamily,
    pub r: f64,
    pub sigma: f64,
    pub g: EnvelopeShape,
    pub gap_fraction: f64,
    #[serde(default)]
    pub gap_decay: Option<f64>,
    #[serde(default)]
    pub gap_ramp: Option<f64>,
}

/// Samples of `[0, t_max]` used to bound the gap against the envelope.
const GAP_SAMPLES: usize = 4000;

impl OutflowTemplate {
    fn boundary(&self, gap0: f64) -> BoundaryTemperature {
        BoundaryTemperature {
            gap0,
            gap_decay: self.gap_decay,
            gap_ramp: self.gap_ramp,
        }
    }

    /// Largest `gap0` whose constant-in-`x` contributions to the `H^3(T)`
    /// smallness list (`Theta - theta*` and `theta*_t`) stay under `f(t)` on
    /// `[0, t_max]`.
    pub fn admissible_gap(&self, envelope: &Envelope, t_max: f64) -> f64 {
        let unit = self.boundary(1.0);
        (0..=GAP_SAMPLES)
            .map(|k| {
                let t = t_max * k as f64 / GAP_SAMPLES as f64;
                let (g, gt) = unit.gap(t);
                envelope.f(t) / ((2.0 * PI).sqrt() * g.hypot(gt))
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn build(&self, eps: f64, t_max: f64) -> Result<OutflowSpec> {
        let envelope = Envelope {
            epsilon: eps,
            sigma: self.sigma,
            g: self.g,
        };
        let gap0 = self.gap_fraction * self.admissible_gap(&envelope, t_max);
        make_outflow(
            self.family.clone(),
            self.boundary(gap0),
            envelope,
            self.r,
            t_max,
        )
    }
}

/// Everything a sweep entry shares except `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub profile: Profile,
    pub outflow: Option<OutflowTemplate>,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default)]
    pub cutoff: CutoffSpec,
    pub t_end: f64,
    pub max_steps: Option<usize>,
    /// Upper end of the `c0` grid of the Gronwall fit.
    #[serde(default = "default_c0_max")]
    pub c0_max: f64,
}

fn default_c0_max() -> f64 {
    0.5
}

impl SweepBase {
    /// The documented breach-inducing baseline: non-isentropic, `R = 1`,
    /// uniform outflow `(P, Theta, H) = (3/2, 1, 1)`, and a wall temperature
    /// `theta* = Theta - gap0 ramp(t/20)` whose gap takes 99% of the constant
    /// envelope `f = 0.26 eps^2` (`sigma = 1`), with the `C^infinity` cut-off.
    /// The initial data is the `SineExp` shape with a fourth-order wall
    /// factor on a `32 x 128` grid with `Y_max = 20`; the horizon is
    /// `t = 1000` or `10^4` steps. The forced response contributes
    /// `O(eps^4)` to `E`, so `E` peaks near `6 eps^2` at `eps = 0.08` and
    /// near `1.5 eps^2` at `eps = 0.04`.
    pub fn breach_baseline() -> Self {
        Self {
            params: ModelParams::non_isentropic(1.0),
            grid: GridSpec {
                nx: 32,
                ny: 128,
                y_max: 20.0,
            },
            profile: Profile::SineExp { wall_order: 4 },
            outflow: Some(OutflowTemplate {
                family: OutflowFamily::UniformSteady {
                    p: 1.5,
                    theta: 1.0,
                    h: 1.0,
                },
                r: 1.0,
                sigma: 1.0,
                g: EnvelopeShape::Constant { g0: 0.26 },
                gap_fraction: 0.99,
                gap_decay: None,
                gap_ramp: Some(20.0),
            }),
            stepping: Stepping::default(),
            cutoff: CutoffSpec::smooth(),
            t_end: 1000.0,
            max_steps: Some(10_000),
            c0_max: default_c0_max(),
        }
    }

    pub fn problem_for(&self, eps: f64) -> Result<Problem> {
        let outflow = match &self.outflow {
            Some(t) => Some(t.build(eps, self.t_end)?),
            None => None,
        };
        let mut p = match self.params.regime {
            Regime::Isentropic => Problem::isentropic(self.params, self.grid)?,
            Regime::NonIsentropic => Problem::new(self.params, self.grid, outflow)?,
        };
        p.cutoff = self.cutoff;
        Ok(p.with_stepping(self.stepping))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    /// First crossing of `4 eps^2`; `None` means no breach within the horizon.
    pub t_breach4: Option<f64>,
    pub t_breach8: Option<f64>,
    pub termination: String,
    pub steps: usize,
    pub t_final: f64,
    /// Best Gronwall fit of the energy log, when the log is long enough.
    pub gronwall: Option<GronwallFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// `ln T_k - (intercept + slope ln eps_k)`.
    pub residuals: Vec<f64>,
}

/// One-sided check `T(eps) >= C_fit eps^{-4/3}` anchored at the largest `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub anchor_epsilon: f64,
    pub c_fit: f64,
    /// `(eps, T / (C_fit eps^{-4/3}))` for every smaller `eps`; `None` when no breach.
    pub ratios: Vec<(f64, Option<f64>)>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub fit: Option<ExponentFit>,
    /// `None` when the anchor did not breach.
    pub theorem: Option<TheoremCheck>,
}

/// Ordinary least squares of `ln T` on `ln eps`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "exponent fit needs at least 2 breached entries, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData(
            "exponent fit needs distinct eps".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(ExponentFit {
        slope,
        intercept,
        residuals,
    })
}

/// Fit over the entries with a `4 eps^2` breach.
pub fn fit_exponent(entries: &[SweepEntry]) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.t_breach4.map(|t| (e.epsilon, t)))
        .collect();
    fit_power_law(&pts)
}

pub fn theorem_check(entries: &[SweepEntry]) -> Option<TheoremCheck> {
    let anchor = entries
        .iter()
        .max_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).unwrap())?;
    let t0 = anchor.t_breach4?;
    let c_fit = t0 * anchor.epsilon.powf(-LIFESPAN_EXPONENT);
    let ratios: Vec<(f64, Option<f64>)> = entries
        .iter()
        .filter(|e| e.epsilon < anchor.epsilon)
        .map(|e| {
            (
                e.epsilon,
                e.t_breach4
                    .map(|t| t / (c_fit * e.epsilon.powf(LIFESPAN_EXPONENT))),
            )
        })
        .collect();
    // relative slack for the equality case
    let holds = ratios
        .iter()
        .all(|(_, r)| r.is_none_or(|r| r >= 1.0 - 1e-9));
    Some(TheoremCheck {
        anchor_epsilon: anchor.epsilon,
        c_fit,
        ratios,
        holds,
    })
}

/// Orders the entries by decreasing `eps` and attaches the fit and the check.
pub fn summarize_sweep(mut entries: Vec<SweepEntry>) -> SweepResult {
    entries.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
    SweepResult {
        fit: fit_exponent(&entries).ok(),
        theorem: theorem_check(&entries),
        entries,
    }
}

/// Runs one sweep entry; numerical failures are errors.
pub fn sweep_entry(eps: f64, base: &SweepBase) -> Result<SweepEntry> {
    let problem = base.problem_for(eps)?;
    let initial = init_state(eps, &base.profile, &problem)?;
    let mut spec = RunSpec::new(eps, base.t_end);
    spec.max_steps = base.max_steps;
    let traj = run(&problem, initial, &spec)?;
    if traj.termination.is_numerical_failure() {
        return Err(Error::StepFailure {
            t: traj.final_state.t,
            reason: format!("sweep entry eps = {eps}: {:?}", traj.termination),
        });
    }
    let log: Vec<GronwallSample> = traj
        .rows
        .iter()
        .map(|r| GronwallSample {
            t: r.t,
            e: r.e,
            d: r.d,
            f: r.f,
        })
        .collect();
    let gronwall = gronwall_check(&log, base.c0_max)
        .ok()
        .and_then(|rep| rep.best_fit().cloned());
    Ok(SweepEntry {
        epsilon: eps,
        t_breach4: traj.breach4.map(|c| c.t),
        t_breach8: traj.breach8.map(|c| c.t),
        termination: traj.termination.label().to_string(),
        steps: traj.steps,
        t_final: traj.final_state.t,
        gronwall,
    })
}

/// Runs every `eps` (in parallel) with the same rescaled initial shape.
pub fn lifespan_sweep(eps: &[f64], base: &SweepBase) -> Result<SweepResult> {
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("sweep eps = {e} must be positive")));
    }
    let entries = par::map_slice(eps, |&e| sweep_entry(e, base))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_sweep(entries))
}

// ---------------------------------------------------------- convergence

/// Manufactured-solution convergence study. The spatial ladder refines
/// `Ny` by 2 with `Nx = Ny / nx_divisor`; the temporal ladder halves `dt`
/// on the grid `time_ny`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsStudy {
    pub regime: Regime,
    pub delta: f64,
    pub gamma: f64,
    pub r: f64,
    pub y_max: f64,
    pub space_ladder: Vec<usize>,
    pub nx_divisor: usize,
    pub space_dt: f64,
    pub space_t_end: f64,
    /// Removes the first-order splitting error from the spatial ladder by
    /// combining `2 v(dt/2) - v(dt)`.
    pub richardson_in_time: bool,
    pub time_ny: usize,
    pub time_dts: Vec<f64>,
    pub time_t_end: f64,
    /// Skip stepping and compare the exact field with itself.
    #[serde(default)]
    pub stepping_disabled: bool,
}

impl MmsStudy {
    pub fn standard(regime: Regime) -> Self {
        Self {
            regime,
            delta: 0.05,
            gamma: 1.4,
            r: 1.0,
            y_max: 20.0,
            space_ladder: vec![64, 128, 256, 512],
            nx_divisor: 4,
            space_dt: 2e-3,
            space_t_end: 0.1,
            richardson_in_time: true,
            time_ny: 256,
            time_dts: vec![0.04, 0.02, 0.01, 0.005],
            time_t_end: 0.4,
            stepping_disabled: false,
        }
    }

    fn manufactured(&self) -> Manufactured {
        match self.regime {
            Regime::Isentropic => Manufactured::standard_isentropic(self.delta),
            Regime::NonIsentropic => Manufactured::standard_non_isentropic(self.delta),
        }
    }

    fn problem(&self, grid: GridSpec) -> Result<Problem> {
        let base = match self.regime {
            Regime::Isentropic => Problem::isentropic(ModelParams::isentropic(self.gamma), grid)?,
            Regime::NonIsentropic => {
                let o = make_outflow(
                    OutflowFamily::UniformSteady {
                        p: 1.5,
                        theta: 1.0,
                        h: 1.0,
                    },
                    BoundaryTemperature {
                        gap0: 0.05,
                        gap_decay: None,
                        gap_ramp: None,
                    },
                    Envelope {
                        epsilon: 0.1,
                        sigma: 0.5,
                        g: EnvelopeShape::Constant { g0: 1.0 },
                    },
                    self.r,
                    1.0,
                )?;
                Problem::new(ModelParams::non_isentropic(self.r), grid, Some(o))?
            }
        };
        let src = manufactured_source(&self.manufactured(), &base);
        Ok(base.with_forcing(src))
    }

    fn exact(&self, grid: &GridSpec, t: f64) -> Vec<Field> {
        let m = self.manufactured();
        (0..m.ncomp())
            .map(|c| {
                let m = m.clone();
                Field::from_fn(grid, move |x, y| m.eval(t, x, y)[c].v)
            })
            .collect()
    }
}

/// Fixed-step integration from `t = 0` to `t_end` (`t_end / dt` rounded).
pub fn integrate_fixed(problem: &Problem, initial: State, dt: f64, t_end: f64) -> Result<State> {
    let n = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / n as f64;
    let mut s = initial;
    for _ in 0..n {
        s = step_imex(problem, &s, h)?;
    }
    Ok(s)
}

fn norms(grid: &GridSpec, a: &[Field], b: &[Field]) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut linf: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x.zip_map(y, |p, q| p - q);
        l2 += d.map(|v| v * v).integrate(grid);
        linf = linf.max(d.max_abs());
    }
    (l2.sqrt(), linf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    /// `Ny` for the spatial ladder, `dt` for the temporal one.
    pub param: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTable {
    pub rows: Vec<OrderRow>,
    /// `log2` of successive error ratios; `None` when the ladder is not monotone.
    pub orders_l2: Option<Vec<f64>>,
    pub orders_linf: Option<Vec<f64>>,
    pub monotone: bool,
}

impl OrderTable {
    fn from_rows(rows: Vec<OrderRow>) -> Self {
        let ratios = |f: fn(&OrderRow) -> f64| -> Option<Vec<f64>> {
            let v: Vec<f64> = rows
                .windows(2)
                .map(|w| (f(&w[0]) / f(&w[1])).log2())
                .collect();
            if v.iter().all(|o| o.is_finite() && *o > 0.0) {
                Some(v)
            } else {
                None
            }
        };
        let zero = rows.iter().all(|r| r.l2 == 0.0 && r.linf == 0.0);
        let (l2, linf) = (ratios(|r| r.l2), ratios(|r| r.linf));
        Self {
            monotone: zero || (l2.is_some() && linf.is_some()),
            orders_l2: l2,
            orders_linf: linf,
            rows,
        }
    }

    /// Smallest observed order over both norms.
    pub fn min_order(&self) -> Option<f64> {
        let a = self.orders_l2.as_ref()?;
        let b = self.orders_linf.as_ref()?;
        a.iter().chain(b).copied().reduce(f64::min)
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.linf).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub regime: Regime,
    pub space: OrderTable,
    pub time: OrderTable,
}

/// Spatial ladder only.
pub fn spatial_convergence(study: &MmsStudy) -> Result<OrderTable> {
    if study.space_ladder.len() < 3 {
        return Err(Error::InsufficientData(
            "spatial ladder needs at least 3 grids".into(),
        ));
    }
    if study.space_ladder.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Domain("spatial ladder must refine by 2".into()));
    }
    let rows = study
        .space_ladder
        .iter()
        .map(|&ny| {
            let grid = GridSpec::new((ny / study.nx_divisor).max(8), ny, study.y_max)?;
            let exact = study.exact(&grid, study.space_t_end);
            if study.stepping_disabled {
                let (l2, linf) = norms(&grid, &exact, &exact);
                return Ok(OrderRow {
                    param: ny as f64,
                    l2,
                    linf,
                });
            }
            let problem = study.problem(grid)?;
            let init = State::from_comps(study.regime, 0.0, study.exact(&grid, 0.0));
            let coarse =
                integrate_fixed(&problem, init.clone(), study.space_dt, study.space_t_end)?;
            let v = if study.richardson_in_time {
                let fine =
                    integrate_fixed(&problem, init, 0.5 * study.space_dt, study.space_t_end)?;
                fine.comps
                    .iter()
                    .zip(&coarse.comps)
                    .map(|(f, c)| f.zip_map(c, |a, b| 2.0 * a - b))
                    .collect()
            } else {
                coarse.comps
            };
            let (l2, linf) = norms(&grid, &v, &exact);
            Ok(OrderRow {
                param: ny as f64,
                l2,
                linf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderTable::from_rows(rows))
}

/// Temporal ladder only: successive differences `v(dt_k) - v(dt_{k+1})` on a
/// fixed grid, which cancel the spatial error.
pub fn temporal_convergence(study: &MmsStudy) -> Result<OrderTable> {
    if study.time_dts.len() < 3 {
        return Err(Error::InsufficientData(
            "temporal ladder needs at least 3 steps".into(),
        ));
    }
    let grid = GridSpec::new(
        (study.time_ny / study.nx_divisor).max(8),
        study.time_ny,
        study.y_max,
    )?;
    if study.stepping_disabled {
        let exact = study.exact(&grid, study.time_t_end);
        let rows = study.time_dts[..study.time_dts.len() - 1]
            .iter()
            .map(|&dt| {
                let (l2, linf) = norms(&grid, &exact, &exact);
                OrderRow {
                    param: dt,
                    l2,
                    linf,
                }
            })
            .collect();
        return Ok(OrderTable::from_rows(rows));
    }
    let problem = study.problem(grid)?;
    let init = State::from_comps(study.regime, 0.0, study.exact(&grid, 0.0));
    let sols = par::map_slice(&study.time_dts, |&dt| {
        integrate_fixed(&problem, init.clone(), dt, study.time_t_end)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows = sols
        .windows(2)
        .zip(&study.time_dts)
        .map(|(w, &dt)| {
            let (l2, linf) = norms(&grid, &w[0].comps, &w[1].comps);
            OrderRow {
                param: dt,
                l2,
                linf,
            }
        })
        .collect();
    Ok(OrderTable::from_rows(rows))
}

pub fn convergence_study(study: &MmsStudy) -> Result<ConvergenceReport> {
    Ok(ConvergenceReport {
        regime: study.regime,
        space: spatial_convergence(study)?,
        time: temporal_convergence(study)?,
    })
}

// ------------------------------------------------------------- algebra

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Uniform draws over the admissible region.
    Admissible,
    /// `h` pinned at `sqrt(3) - 1e-6`, the edge of pressure positivity.
    PressureEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub tolerance: f64,
    /// Largest relative error seen.
    pub max_error: f64,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl IdentityCheck {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            tolerance,
            max_error: 0.0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, err: f64, context: impl FnOnce() -> String) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        self.max_error = self.max_error.max(err);
        if !(err <= self.tolerance) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(context());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub samples: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

pub const ALGEBRA_TOLERANCE: f64 = 1e-12;
pub const BERNOULLI_TOLERANCE: f64 = 1e-8;

fn max_abs(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Random admissible non-isentropic point.
fn sample_point(rng: &mut ChaCha8Rng) -> FullPoint {
    let r = rng.gen_range(0.1..10.0);
    let a = r / (1.0 + r);
    let p = rng.gen_range(0.5..5.0);
    let q = p * rng.gen_range(0.01..0.99);
    FullPoint {
        u: rng.gen_range(-2.0..2.0),
        theta: rng.gen_range(0.1..10.0),
        q,
        p,
        qq: p + (1.0 - 2.0 * a) * q,
        a,
        r,
    }
}

/// Number of random time-varying outflows whose traces feed the Bernoulli check.
const BERNOULLI_OUTFLOWS: usize = 8;

pub fn verify_algebra(samples: usize, seed: u64) -> AlgebraReport {
    verify_algebra_with(samples, seed, Sampler::Admissible)
}

/// Model-core identities on `samples` seeded random states.
pub fn verify_algebra_with(samples: usize, seed: u64, sampler: Sampler) -> AlgebraReport {
    let tol = ALGEBRA_TOLERANCE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = IdentityCheck::new("coefficients A, B, C positive and finite", 0.0);
    let mut unit = IdentityCheck::new("B + h^2 C = 1", tol);
    let mut sym = IdentityCheck::new("S symmetric", tol);
    let mut pd = IdentityCheck::new("S positive definite", 0.0);
    let mut sa = IdentityCheck::new("S A0 symmetric", tol);
    let mut sb = IdentityCheck::new("S B0 = diag(2 theta^2 q, 2 theta q, theta^2)", tol);
    let mut bern = IdentityCheck::new("Bernoulli residuals", BERNOULLI_TOLERANCE);

    for k in 0..samples {
        let gamma = rng.gen_range(1.0..3.0);
        let h = match sampler {
            Sampler::Admissible => rng.gen_range(0.5..(3f64.sqrt() - 1e-3)),
            Sampler::PressureEdge => 3f64.sqrt() - 1e-6,
        };
        let c = coeffs_unchecked(h, gamma);
        let ok = [c.a, c.b, c.c].iter().all(|v| v.is_finite() && *v > 0.0);
        pos.record(if ok { 0.0 } else { 1.0 }, || {
            format!("sample {k}: h = {h}, gamma = {gamma}, {c:?}")
        });
        unit.record((c.b + h * h * c.c - 1.0).abs(), || {
            format!("sample {k}: h = {h}, gamma = {gamma}")
        });

        let fp = sample_point(&mut rng);
        let m = matrices_at(&fp);
        let ctx = || format!("sample {k}: {fp:?}");
        sym.record(rel(max_abs(&(m.s - m.s.transpose())), max_abs(&m.s)), ctx);
        pd.record(
            if Cholesky::new(m.s).is_some() {
                0.0
            } else {
                1.0
            },
            ctx,
        );
        sa.record(
            rel(max_abs(&(m.a_sym - m.a_sym.transpose())), max_abs(&m.a_sym)),
            ctx,
        );
        let th = fp.theta;
        let target = Matrix3::from_diagonal(&nalgebra::Vector3::new(
            2.0 * th * th * fp.q,
            2.0 * th * fp.q,
            th * th,
        ));
        sb.record(rel(max_abs(&(m.b_diag - target)), max_abs(&target)), ctx);
    }

    if samples > 0 {
        let per = samples.div_ceil(BERNOULLI_OUTFLOWS);
        for o in 0..BERNOULLI_OUTFLOWS.min(samples) {
            let r = rng.gen_range(0.2..5.0);
            let family = OutflowFamily::TimeVaryingUniformInX {
                p0: rng.gen_range(1.2..2.0),
                p_amp: rng.gen_range(-0.1..0.1),
                p_rate: rng.gen_range(0.1..2.0),
                theta0: rng.gen_range(0.5..2.0),
                h0: rng.gen_range(0.6..1.2),
            };
            let t_max = 10.0;
            let spec = make_outflow(
                family.clone(),
                BoundaryTemperature::default(),
                Envelope {
                    epsilon: 0.1,
                    sigma: 0.5,
                    g: EnvelopeShape::Constant { g0: 1.0 },
                },
                r,
                t_max,
            );
            let spec = match spec {
                Ok(s) => s,
                Err(e) => {
                    bern.record(f64::INFINITY, || format!("outflow {o}: {family:?}: {e}"));
                    continue;
                }
            };
            for _ in 0..per {
                let t = rng.gen_range(0.0..t_max);
                let tr = spec.traces(t, 0.0);
                let res = tr
                    .bernoulli_residuals(r)
                    .iter()
                    .fold(0.0f64, |a, v| a.max(v.abs()));
                bern.record(res, || format!("outflow {o} at t = {t}: {family:?}"));
            }
            let rep = validate_outflow(&spec, &[0.0, 0.5 * t_max, t_max], 16);
            bern.record(rep.max_bernoulli_residual, || {
                format!("outflow {o} validation")
            });
        }
    }

    let checks = vec![pos, unit, sym, pd, sa, sb, bern];
    let pass = checks.iter().all(|c| c.failures == 0);
    AlgebraReport {
        samples,
        seed,
        sampler,
        checks,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(eps: f64, t: Option<f64>) -> SweepEntry {
        SweepEntry {
            epsilon: eps,
            t_breach4: t,
            t_breach8: t.map(|t| 1.5 * t),
            termination: if t.is_some() { "breach" } else { "horizon" }.into(),
            steps: 0,
            t_final: 0.0,
            gronwall: None,
        }
    }

    #[test]
    fn single_entry_has_no_fit_and_a_vacuous_check() {
        let r = summarize_sweep(vec![entry(0.1, Some(3.0))]);
        assert!(r.fit.is_none());
        let th = r.theorem.unwrap();
        assert!(th.holds && th.ratios.is_empty());
    }

    #[test]
    fn synthetic_power_law_passes_with_equality() {
        let eps = [0.02, 0.08, 0.04];
        let r = summarize_sweep(
            eps.iter()
                .map(|&e| entry(e, Some(e.powf(-4.0 / 3.0))))
                .collect(),
        );
        assert_eq!(r.entries[0].epsilon, 0.08);
        assert_eq!(r.entries[2].epsilon, 0.02);
        let fit = r.fit.unwrap();
        assert!((fit.slope + 4.0 / 3.0).abs() < 1e-6);
        let th = r.theorem.unwrap();
        assert!(th.holds);
        for (_, ratio) in th.ratios {
            assert!((ratio.unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_breach_passes_and_short_lifespan_fails() {
        let r = summarize_sweep(vec![entry(0.08, Some(10.0)), entry(0.04, None)]);
        assert!(r.theorem.unwrap().holds);
        let r = summarize_sweep(vec![entry(0.08, Some(10.0)), entry(0.04, Some(12.0))]);
        assert!(!r.theorem.unwrap().holds);
        let r = summarize_sweep(vec![entry(0.08, None), entry(0.04, Some(12.0))]);
        assert!(r.theorem.is_none());
    }

    #[test]
    fn exact_power_law_has_zero_residuals() {
        let f = fit_power_law(&[
            (0.1, 2.0 * 0.1f64.powf(-1.5)),
            (0.05, 2.0 * 0.05f64.powf(-1.5)),
            (0.01, 2.0 * 0.01f64.powf(-1.5)),
        ])
        .unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.intercept - 2f64.ln()).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn two_point_slope() {
        let f = fit_power_law(&[(0.1, 10.0), (0.05, 40.0)]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(matches!(
            fit_power_law(&[(0.1, 1.0)]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn noisy_power_law_slope_within_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|k| {
                let e = 0.1 * 0.8f64.powi(k);
                (
                    e,
                    e.powf(-4.0 / 3.0) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.slope / (-4.0 / 3.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn rescaling_all_breach_times_keeps_the_verdict() {
        let base = vec![
            entry(0.08, Some(5.0)),
            entry(0.04, Some(11.0)),
            entry(0.02, Some(40.0)),
        ];
        let v = summarize_sweep(base.clone()).theorem.unwrap().holds;
        for s in [0.1, 3.0, 1e4] {
            let scaled = base
                .iter()
                .map(|e| entry(e.epsilon, e.t_breach4.map(|t| t * s)))
                .collect();
            assert_eq!(summarize_sweep(scaled).theorem.unwrap().holds, v);
        }
    }

    #[test]
    fn algebra_suite_passes_and_is_deterministic() {
        let a = verify_algebra(500, 42);
        assert!(a.pass, "{:#?}", a.checks);
        assert_eq!(a, verify_algebra(500, 42));
        assert!(verify_algebra(0, 1).pass);
    }

    #[test]
    fn pressure_edge_stays_finite() {
        let a = verify_algebra_with(200, 3, Sampler::PressureEdge);
        assert!(a.pass, "{:#?}", a.checks);
    }

    #[test]
    fn disabled_stepping_gives_zero_error() {
        let mut s = MmsStudy::standard(Regime::Isentropic);
        s.stepping_disabled = true;
        s.space_ladder = vec![16, 32, 64];
        s.time_ny = 32;
        let r = convergence_study(&s).unwrap();
        assert_eq!(r.space.max_error(), 0.0);
        assert_eq!(r.time.max_error(), 0.0);
        assert!(r.space.monotone);
    }

    #[test]
    fn admissible_gap_nearly_saturates_the_envelope() {
        let t = SweepBase::breach_baseline().outflow.unwrap();
        let spec = t.build(0.08, 100.0).unwrap();
        let times: Vec<f64> = (0..=200).map(|k| 0.5 * k as f64).collect();
        let rep = validate_outflow(&spec, &times, 32);
        assert!(rep.pass, "{rep:?}");
        let worst = rep
            .samples
            .iter()
            .map(|s| s.norm / s.envelope)
            .fold(0.0, f64::max);
        assert!(worst > 0.98 && worst <= 0.99 + 1e-9, "{worst}");
    }
}
