//! TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{OutflowTemplate, SweepBase};
use crate::grid::GridSpec;
use crate::model::{CutoffSpec, Margins, ModelParams, Regime};
use crate::solver::{init_from_shape, init_state, Problem, Profile, RunSpec, State, Stepping};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Snapshot every this many steps (0 = initial and final only).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_dir() -> String {
    "mhdbl-out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Integration stops once `E > stop_multiple eps^2`.
    pub stop_multiple: f64,
    /// Upper end of the Gronwall `c0` grid.
    pub c0_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            stop_multiple: 8.0,
            c0_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

/// Everything a run needs. Optional keys keep their absence so that a
/// serialized config parses back to itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub regime: Regime,
    pub epsilon: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_weight: Option<f64>,
    pub grid: GridSpec,
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outflow: Option<OutflowTemplate>,
    #[serde(default)]
    pub margins: Margins,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default)]
    pub cutoff: CutoffSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn content_hash(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// A validated config plus the non-fatal remarks made while checking it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |k| before.len() - k - 1)
        + 1;
    (line, col)
}

/// Parses and validates; semantic errors come back all at once.
pub fn parse_config(text: &str) -> Result<Parsed> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::ConfigSyntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let warnings = config.validate()?;
    Ok(Parsed { config, warnings })
}

impl RunConfig {
    /// Minimal isentropic config with every default filled.
    pub fn isentropic_default() -> Self {
        Self {
            regime: Regime::Isentropic,
            epsilon: 0.01,
            t_end: 200.0,
            max_steps: None,
            seed: 0,
            gamma: Some(1.4),
            r: None,
            m_weight: None,
            grid: GridSpec {
                nx: 64,
                ny: 256,
                y_max: 20.0,
            },
            profile: Profile::SineExp { wall_order: 0 },
            outflow: None,
            margins: Margins::default(),
            stepping: Stepping::default(),
            cutoff: CutoffSpec::default(),
            thresholds: Thresholds::default(),
            output: OutputConfig::default(),
            sweep: None,
        }
    }

    /// Config of the documented breach baseline at `eps`.
    pub fn breach_baseline(eps: f64) -> Self {
        let b = SweepBase::breach_baseline();
        Self {
            regime: Regime::NonIsentropic,
            epsilon: eps,
            t_end: b.t_end,
            max_steps: b.max_steps,
            seed: 0,
            gamma: None,
            r: Some(b.params.r),
            m_weight: None,
            grid: b.grid,
            profile: b.profile,
            outflow: b.outflow,
            margins: b.params.margins,
            stepping: b.stepping,
            cutoff: b.cutoff,
            thresholds: Thresholds {
                c0_max: b.c0_max,
                ..Thresholds::default()
            },
            output: OutputConfig::default(),
            sweep: Some(SweepConfig {
                epsilons: vec![0.08, 0.04, 0.02],
            }),
        }
    }

    pub fn params(&self) -> ModelParams {
        let mut p = ModelParams {
            gamma: self.gamma.unwrap_or(1.4),
            r: self.r.unwrap_or(1.0),
            m_weight: self.m_weight.unwrap_or(1.0),
            regime: self.regime,
            margins: self.margins,
        };
        if self.regime == Regime::NonIsentropic {
            p.gamma = 1.0;
        }
        p
    }

    /// Returns the warnings, or every violation as one error.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut errs = self.grid.violations();
        let mut warns = Vec::new();
        if let Err(Error::Config(v)) = self.params().validate() {
            errs.extend(v);
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            errs.push(format!("epsilon = {} violates eps >= 0", self.epsilon));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            errs.push(format!("t_end = {} violates t_end > 0", self.t_end));
        }
        if self.max_steps == Some(0) {
            errs.push("max_steps = 0 violates max_steps >= 1".into());
        }
        if !(self.stepping.cfl > 0.0 && self.stepping.cfl <= 1.0) {
            errs.push(format!(
                "stepping.cfl = {} violates 0 < cfl <= 1",
                self.stepping.cfl
            ));
        }
        if let Some(d) = self.stepping.dt_max.filter(|d| !(*d > 0.0)) {
            errs.push(format!("stepping.dt_max = {d} violates dt_max > 0"));
        }
        if !(self.cutoff.start >= 0.0 && self.cutoff.width > 0.0) {
            errs.push(format!(
                "cutoff = (start {}, width {}) violates start >= 0, width > 0",
                self.cutoff.start, self.cutoff.width
            ));
        }
        if !(self.thresholds.stop_multiple > 4.0) {
            errs.push(format!(
                "thresholds.stop_multiple = {} violates stop_multiple > 4",
                self.thresholds.stop_multiple
            ));
        }
        if !(self.thresholds.c0_max > 0.0) {
            errs.push(format!(
                "thresholds.c0_max = {} violates c0_max > 0",
                self.thresholds.c0_max
            ));
        }
        if let Some(s) = &self.sweep {
            if s.epsilons.is_empty() {
                errs.push("sweep.epsilons is empty".into());
            }
            for e in s.epsilons.iter().filter(|e| !(**e > 0.0)) {
                errs.push(format!("sweep.epsilons entry {e} violates eps > 0"));
            }
        }
        match self.regime {
            Regime::Isentropic => {
                if self.r.is_some() {
                    warns.push("r is ignored in the isentropic regime".into());
                }
                if self.outflow.is_some() {
                    warns.push("outflow is ignored in the isentropic regime".into());
                }
            }
            Regime::NonIsentropic => {
                if self.gamma.is_some() {
                    warns.push("gamma is ignored in the non-isentropic regime".into());
                }
                match &self.outflow {
                    None => errs.push("outflow is required in the non-isentropic regime".into()),
                    Some(o) => {
                        if (o.r - self.params().r).abs() > 0.0 {
                            errs.push(format!(
                                "outflow.r = {} differs from r = {}",
                                o.r,
                                self.params().r
                            ));
                        }
                        if !(0.0..=1.0).contains(&o.gap_fraction) {
                            errs.push(format!(
                                "outflow.gap_fraction = {} violates 0 <= gap_fraction <= 1",
                                o.gap_fraction
                            ));
                        }
                        if errs.is_empty() {
                            if let Err(e) = o.build(self.epsilon.max(f64::MIN_POSITIVE), self.t_end)
                            {
                                errs.push(format!("outflow: {e}"));
                            }
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            match self.problem() {
                Ok(p) => {
                    if let Err(e) = self.initial_state(&p) {
                        errs.push(format!("profile: {e}"));
                    }
                }
                Err(e) => errs.push(e.to_string()),
            }
        }
        if errs.is_empty() {
            Ok(warns)
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn sweep_base(&self) -> SweepBase {
        SweepBase {
            params: self.params(),
            grid: self.grid,
            profile: self.profile.clone(),
            outflow: match self.regime {
                Regime::Isentropic => None,
                Regime::NonIsentropic => self.outflow.clone(),
            },
            stepping: self.stepping,
            cutoff: self.cutoff,
            t_end: self.t_end,
            max_steps: self.max_steps,
            c0_max: self.thresholds.c0_max,
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        self.sweep_base().problem_for(self.epsilon)
    }

    /// Rescaled initial state; `FromFile` profiles read a snapshot written by
    /// an earlier run and use it as the shape.
    pub fn initial_state(&self, problem: &Problem) -> Result<State> {
        match &self.profile {
            Profile::FromFile { path } => {
                let snap = crate::output::read_snapshot(Path::new(path))?;
                let shape = snap.comps(self.regime, &self.grid)?;
                Ok(init_from_shape(self.epsilon, &shape, problem)?.state)
            }
            p => init_state(self.epsilon, p, problem),
        }
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            epsilon: self.epsilon,
            t_end: self.t_end,
            max_steps: self.max_steps,
            snapshot_every: self.output.snapshot_every,
            stop_multiple: self.thresholds.stop_multiple,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// [`content_hash`] of the canonical serialization.
    pub fn hash(&self) -> String {
        content_hash(&self.to_toml())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
regime = "isentropic"
epsilon = 0.01
t_end = 10.0

[grid]
nx = 16
ny = 64
y_max = 20.0

[profile]
kind = "sine-exp"
"#;

    #[test]
    fn minimal_isentropic_fills_defaults() {
        let p = parse_config(MINIMAL).unwrap();
        assert!(p.warnings.is_empty());
        let c = p.config;
        assert_eq!(c.stepping, Stepping::default());
        assert_eq!(c.thresholds.stop_multiple, 8.0);
        assert_eq!(c.output.dir, "mhdbl-out");
        assert_eq!(c.params().gamma, 1.4);
        assert_eq!(c.margins.h_min, 0.5);
    }

    #[test]
    fn small_nx_names_the_invariant() {
        let text = MINIMAL.replace("nx = 16", "nx = 4");
        match parse_config(&text) {
            Err(Error::Config(v)) => assert!(v.iter().any(|m| m.contains("Nx >= 8")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let text = MINIMAL
            .replace("nx = 16", "nx = 4")
            .replace("ny = 64", "ny = 8")
            .replace("t_end = 10.0", "t_end = -1.0");
        match parse_config(&text) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn r_in_isentropic_regime_warns() {
        let text = MINIMAL.replace("t_end = 10.0", "t_end = 10.0\ngamma = 1.4\nr = 2.0");
        let p = parse_config(&text).unwrap();
        assert!(p.warnings.iter().any(|w| w.contains("r is ignored")));
    }

    #[test]
    fn unknown_keys_and_syntax_errors_carry_positions() {
        match parse_config(&format!("{MINIMAL}\n[grid2]\nfoo = 1\n")) {
            Err(Error::ConfigSyntax { line, .. }) => assert!(line > 0),
            other => panic!("{other:?}"),
        }
        match parse_config("regime = \nepsilon = 1") {
            Err(Error::ConfigSyntax { line, column, .. }) => assert_eq!((line, column), (1, 10)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_isentropic_needs_an_outflow() {
        let text = MINIMAL.replace("\"isentropic\"", "\"non-isentropic\"");
        match parse_config(&text) {
            Err(Error::Config(v)) => assert!(v.iter().any(|m| m.contains("outflow is required"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn serialize_parse_round_trip() {
        for c in [
            RunConfig::isentropic_default(),
            RunConfig::breach_baseline(0.08),
        ] {
            let back = parse_config(&c.to_toml()).unwrap().config;
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
        let mut c = RunConfig::isentropic_default();
        let h = c.hash();
        c.epsilon = 0.02;
        assert_ne!(c.hash(), h);
    }
}
