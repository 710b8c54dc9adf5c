use serde::{Deserialize, Serialize};

use super::problem::Problem;
use super::state::{apply_bcs, State};
use crate::energy::energy_e;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::Regime;

/// Shape of the initial perturbation; the amplitude is fixed afterwards by
/// the energy normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `exp((cos(x - x0) - 1) / sx^2) exp(-(y - y0)^2 / (2 sy^2))` in every component.
    GaussianBump {
        #[serde(default)]
        x0: f64,
        #[serde(default = "default_y0")]
        y0: f64,
        #[serde(default = "default_sx")]
        sx: f64,
        #[serde(default = "default_sy")]
        sy: f64,
    },
    /// `u = sin x y e^{-y} w(y)`, `h~ = cos x e^{-y^2} w(y)` with the wall
    /// factor `w = (1 - e^{-y^2})^wall_order` (non-isentropic: `theta~` uses
    /// `cos x y e^{-y} w`, `q~` the `h~` shape).
    SineExp {
        #[serde(default)]
        wall_order: u32,
    },
    /// Snapshot written by a previous run; resolved by the caller.
    FromFile { path: String },
}

fn default_y0() -> f64 {
    6.0
}
fn default_sx() -> f64 {
    0.5
}
fn default_sy() -> f64 {
    1.0
}

const COMPAT_TOL: f64 = 1e-6;
const TARGET_FACTOR: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone)]
pub struct InitReport {
    pub state: State,
    /// Amplitude multiplying the unit-shape profile.
    pub amplitude: f64,
    /// `E` of the unit-amplitude shape scaled by `eps` (first iterate).
    pub raw_energy: f64,
    pub e0: f64,
    pub iterations: usize,
}

fn unit_shape(profile: &Profile, problem: &Problem) -> Result<Vec<Field>> {
    let g = &problem.grid;
    let nc = problem.ncomp();
    match *profile {
        Profile::GaussianBump { x0, y0, sx, sy } => {
            if !(sx > 0.0 && sy > 0.0) {
                return Err(Error::Construction("bump widths must be positive".into()));
            }
            let b = Field::from_fn(g, move |x, y| {
                ((x - x0).cos() - 1.0) / (sx * sx) - (y - y0).powi(2) / (2.0 * sy * sy)
            })
            .map(f64::exp);
            Ok(vec![b; nc])
        }
        Profile::SineExp { wall_order } => {
            let k = wall_order as i32;
            let w = move |y: f64| (1.0 - (-y * y).exp()).powi(k);
            let u = Field::from_fn(g, move |x, y| x.sin() * y * (-y).exp() * w(y));
            let h = Field::from_fn(g, move |x, y| x.cos() * (-y * y).exp() * w(y));
            Ok(match problem.regime() {
                Regime::Isentropic => vec![u, h],
                Regime::NonIsentropic => {
                    let th = Field::from_fn(g, move |x, y| x.cos() * y * (-y).exp() * w(y));
                    vec![u, th, h]
                }
            })
        }
        Profile::FromFile { ref path } => Err(Error::Construction(format!(
            "profile file {path} must be loaded before initialisation"
        ))),
    }
}

/// Rejects shapes that violate the Dirichlet wall conditions or do not decay at `Y_max`.
fn check_compatible(shape: &[Field], regime: Regime) -> Result<()> {
    let scale = shape.iter().fold(0.0f64, |m, f| m.max(f.max_abs()));
    if scale == 0.0 {
        return Ok(());
    }
    let ny = shape[0].ny();
    let dirichlet = match regime {
        Regime::Isentropic => 1,
        Regime::NonIsentropic => 2,
    };
    for (c, f) in shape.iter().enumerate() {
        for i in 0..f.nx() {
            if c < dirichlet && f.get(i, 0).abs() > COMPAT_TOL * scale {
                let name = if c == 0 { "u" } else { "theta~" };
                return Err(Error::Construction(format!(
                    "initial profile violates {name}|_(y=0) = 0 (value {:.3e})",
                    f.get(i, 0)
                )));
            }
            if f.get(i, ny - 1).abs() > COMPAT_TOL * scale {
                return Err(Error::Construction(format!(
                    "initial profile does not decay at Y_max (component {c}, value {:.3e})",
                    f.get(i, ny - 1)
                )));
            }
        }
    }
    Ok(())
}

fn energy_at(problem: &Problem, shape: &[Field], c: f64) -> Result<(State, f64)> {
    let comps = shape.iter().map(|f| f.map(|v| c * v)).collect();
    let mut s = State::from_comps(problem.regime(), 0.0, comps);
    apply_bcs(&mut s);
    let e = energy_e(problem, &mut s)?.e;
    Ok((s, e))
}

/// Rescales `shape` so that `E(0) = 2 eps^2 (1 - 1e-6)`.
pub fn init_from_shape(eps: f64, shape: &[Field], problem: &Problem) -> Result<InitReport> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps = {eps} must be non-negative")));
    }
    if shape.len() != problem.ncomp() {
        return Err(Error::Construction(format!(
            "profile has {} components, the system needs {}",
            shape.len(),
            problem.ncomp()
        )));
    }
    check_compatible(shape, problem.regime())?;
    let zero = || InitReport {
        state: State::zeros(problem.regime(), &problem.grid),
        amplitude: 0.0,
        raw_energy: 0.0,
        e0: 0.0,
        iterations: 0,
    };
    if eps == 0.0 {
        return Ok(zero());
    }
    let target = 2.0 * eps * eps * TARGET_FACTOR;
    let mut c = eps;
    let (_, raw) = energy_at(problem, shape, c)?;
    if !(raw > 0.0) {
        return Err(Error::Construction(
            "initial profile has zero energy".into(),
        ));
    }
    let mut e = raw;
    let mut iterations = 0;
    let mut state = None;
    while iterations < 60 {
        c *= (target / e).sqrt();
        iterations += 1;
        let (s, e_new) = energy_at(problem, shape, c)?;
        e = e_new;
        state = Some(s);
        if (e / target - 1.0).abs() <= 1e-13 {
            break;
        }
    }
    if !((e / target - 1.0).abs() <= 1e-9) {
        return Err(Error::Construction(format!(
            "rescaling did not reach E(0) = {target:e} (last E = {e:e}, amplitude {c:e}); \
             the outflow alone may already exceed the target"
        )));
    }
    Ok(InitReport {
        state: state.expect("at least one iteration"),
        amplitude: c,
        raw_energy: raw,
        e0: e,
        iterations,
    })
}

pub fn init_state_report(eps: f64, profile: &Profile, problem: &Problem) -> Result<InitReport> {
    let shape = unit_shape(profile, problem)?;
    init_from_shape(eps, &shape, problem)
}

/// Initial state with `E(0) = 2 eps^2 (1 - 1e-6)`.
pub fn init_state(eps: f64, profile: &Profile, problem: &Problem) -> Result<State> {
    Ok(init_state_report(eps, profile, problem)?.state)
}
