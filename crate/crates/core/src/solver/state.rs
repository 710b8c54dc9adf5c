use std::collections::VecDeque;

use crate::grid::{Field, GridSpec};
use crate::model::Regime;
use crate::par;

/// Number of past levels kept for time derivatives in the energy.
pub const HISTORY_DEPTH: usize = 4;

/// A past time level: unknowns and, when they were computed, their PDE rates.
#[derive(Debug, Clone)]
pub struct Level {
    pub t: f64,
    pub comps: Vec<Field>,
    pub rates: Option<Vec<Field>>,
}

#[derive(Debug, Clone)]
pub struct State {
    pub regime: Regime,
    pub t: f64,
    /// `(u, h~)` or `(u~, theta~, q~)`.
    pub comps: Vec<Field>,
    /// `d_t` of each component at `t`, filled on demand.
    pub rates: Option<Vec<Field>>,
    /// Most recent level first.
    pub history: VecDeque<Level>,
}

impl State {
    pub fn zeros(regime: Regime, grid: &GridSpec) -> Self {
        let n = match regime {
            Regime::Isentropic => 2,
            Regime::NonIsentropic => 3,
        };
        Self::from_comps(regime, 0.0, vec![Field::zeros(grid); n])
    }

    pub fn from_comps(regime: Regime, t: f64, comps: Vec<Field>) -> Self {
        Self {
            regime,
            t,
            comps,
            rates: None,
            history: VecDeque::new(),
        }
    }

    /// Pushes the current level into the history and installs new values.
    pub(crate) fn advance_to(&self, t: f64, comps: Vec<Field>) -> State {
        let mut history = self.history.clone();
        history.push_front(Level {
            t: self.t,
            comps: self.comps.clone(),
            rates: self.rates.clone(),
        });
        history.truncate(HISTORY_DEPTH);
        State {
            regime: self.regime,
            t,
            comps,
            rates: None,
            history,
        }
    }

    pub fn max_abs_diff(&self, other: &State) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }
}

/// Imposes the wall and far-field conditions on a set of components.
///
/// Row `0`: `u = 0` (and `theta~ = 0`); the last unknown (`h~` or `q~`)
/// gets the one-sided Neumann closure `f_0 = (4 f_1 - f_2) / 3`.
/// Row `ny - 1`: every perturbation is zero.
pub fn apply_bcs_comps(regime: Regime, comps: &mut [Field]) {
    let ny = comps[0].ny();
    let last = comps.len() - 1;
    for (c, f) in comps.iter_mut().enumerate() {
        let neumann = c == last;
        par::for_each_chunk_mut(f.as_mut_slice(), ny, |_, col| {
            col[0] = if neumann {
                (4.0 * col[1] - col[2]) / 3.0
            } else {
                0.0
            };
            col[ny - 1] = 0.0;
        });
    }
    debug_assert!(match regime {
        Regime::Isentropic => comps.len() == 2,
        Regime::NonIsentropic => comps.len() == 3,
    });
}

pub fn apply_bcs(state: &mut State) {
    apply_bcs_comps(state.regime, &mut state.comps);
    state.rates = None;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::ddy;

    #[test]
    fn bcs_are_an_idempotent_projection() {
        let g = GridSpec::new(8, 32, 10.0).unwrap();
        for regime in [Regime::Isentropic, Regime::NonIsentropic] {
            let mut s = State::zeros(regime, &g);
            for (k, f) in s.comps.iter_mut().enumerate() {
                *f = Field::from_fn(&g, |x, y| (x + k as f64).sin() + y.cos() + 1.0);
            }
            apply_bcs(&mut s);
            let once = s.clone();
            apply_bcs(&mut s);
            assert_eq!(once.comps, s.comps);
            let last = s.comps.len() - 1;
            for i in 0..g.nx {
                assert_eq!(s.comps[0].get(i, 0), 0.0);
                assert!(ddy(s.comps[last].column(i), 0, g.dy()).abs() < 1e-13);
                for f in &s.comps {
                    assert_eq!(f.get(i, g.ny - 1), 0.0);
                }
                if regime == Regime::NonIsentropic {
                    assert_eq!(s.comps[1].get(i, 0), 0.0);
                }
            }
        }
    }
}
