use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `p = rho^gamma`, unknowns `(u, h~)`.
    Isentropic,
    /// `p = R rho theta`, unknowns `(u~, theta~, q~)`.
    NonIsentropic,
}

/// Hard runtime floors enforced at every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Margins {
    pub h_min: f64,
    pub theta_min: f64,
    pub q_min: f64,
    pub p_minus_q_min: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self {
            h_min: 0.5,
            theta_min: 0.1,
            q_min: 0.05,
            p_minus_q_min: 0.05,
        }
    }
}

/// Physical constants and the regime selector.
///
/// `a = R / (1 + R)` is never stored; it is always re-derived from `r` so the
/// two cannot drift apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub r: f64,
    pub m_weight: f64,
    pub regime: Regime,
    pub margins: Margins,
}

impl ModelParams {
    pub fn new(regime: Regime, gamma: f64, r: f64, m_weight: f64) -> Result<Self> {
        let p = Self {
            gamma,
            r,
            m_weight,
            regime,
            margins: Margins::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isentropic(gamma: f64) -> Self {
        Self::new(Regime::Isentropic, gamma, 1.0, 1.0).expect("gamma >= 1")
    }

    pub fn non_isentropic(r: f64) -> Self {
        Self::new(Regime::NonIsentropic, 1.0, r, 1.0).expect("R > 0")
    }

    pub fn with_m_weight(mut self, m: f64) -> Self {
        self.m_weight = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma >= 1.0) || !self.gamma.is_finite() {
            errs.push(format!("gamma = {} violates gamma >= 1", self.gamma));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            errs.push(format!("R = {} violates R > 0", self.r));
        }
        if !(self.m_weight >= 1.0) || !self.m_weight.is_finite() {
            errs.push(format!("M = {} violates M >= 1", self.m_weight));
        }
        if !(self.margins.h_min >= 0.5) {
            errs.push(format!(
                "margin h_min = {} below the admissible floor 1/2",
                self.margins.h_min
            ));
        }
        for (name, v) in [
            ("theta_min", self.margins.theta_min),
            ("q_min", self.margins.q_min),
            ("p_minus_q_min", self.margins.p_minus_q_min),
        ] {
            if !(v > 0.0) {
                errs.push(format!("margin {name} = {v} must be positive"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// `a = R / (1 + R)`.
    pub fn a(&self) -> f64 {
        self.r / (1.0 + self.r)
    }
}
