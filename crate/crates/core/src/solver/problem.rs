use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{CutoffSpec, ModelParams, OutflowSpec, Regime};

/// Additive forcing on the right-hand side, `d_t v = ... + s(t, x, y)`.
pub trait Forcing: Send + Sync {
    fn eval(&self, t: f64, x: f64, y: f64) -> [f64; 3];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExplicitScheme {
    /// Forward Euler.
    Euler,
    /// Three-stage strong-stability-preserving Runge-Kutta.
    #[default]
    SspRk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stepping {
    pub cfl: f64,
    pub scheme: ExplicitScheme,
    pub max_halvings: u32,
    /// Upper bound on `dt` in addition to `dt <= dy`.
    pub dt_max: Option<f64>,
}

impl Default for Stepping {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            scheme: ExplicitScheme::SspRk3,
            max_halvings: 10,
            dt_max: None,
        }
    }
}

/// Everything the stepper needs besides the state itself.
#[derive(Clone)]
pub struct Problem {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub outflow: Option<Arc<OutflowSpec>>,
    pub cutoff: CutoffSpec,
    pub forcing: Option<Arc<dyn Forcing>>,
    pub stepping: Stepping,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("params", &self.params)
            .field("grid", &self.grid)
            .field("outflow", &self.outflow)
            .field("forcing", &self.forcing.is_some())
            .field("stepping", &self.stepping)
            .finish()
    }
}

impl Problem {
    pub fn isentropic(params: ModelParams, grid: GridSpec) -> Result<Self> {
        Self::new(params, grid, None)
    }

    pub fn new(params: ModelParams, grid: GridSpec, outflow: Option<OutflowSpec>) -> Result<Self> {
        params.validate()?;
        GridSpec::new(grid.nx, grid.ny, grid.y_max)?;
        if params.regime == Regime::NonIsentropic {
            match &outflow {
                None => {
                    return Err(Error::Construction(
                        "the non-isentropic system needs an outflow".into(),
                    ))
                }
                Some(o) if (o.r() - params.r).abs() > 1e-14 * params.r => {
                    return Err(Error::Construction(format!(
                        "outflow built with R = {} but params have R = {}",
                        o.r(),
                        params.r
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            params,
            grid,
            outflow: outflow.map(Arc::new),
            cutoff: CutoffSpec::default(),
            forcing: None,
            stepping: Stepping::default(),
        })
    }

    pub fn with_forcing(mut self, f: Arc<dyn Forcing>) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn with_stepping(mut self, s: Stepping) -> Self {
        self.stepping = s;
        self
    }

    pub fn regime(&self) -> Regime {
        self.params.regime
    }

    /// Number of unknowns: 2 (`u, h~`) or 3 (`u~, theta~, q~`).
    pub fn ncomp(&self) -> usize {
        match self.params.regime {
            Regime::Isentropic => 2,
            Regime::NonIsentropic => 3,
        }
    }

    pub(crate) fn outflow_ref(&self) -> &OutflowSpec {
        self.outflow
            .as_deref()
            .expect("non-isentropic problem always carries an outflow")
    }
}
