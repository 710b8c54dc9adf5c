//! Manufactured solutions: closed-form fields and the forcing that makes
//! them exact solutions of the transformed systems.

use std::sync::Arc;

use nalgebra::Vector3;

use super::physics::{isentropic_point, non_isentropic_point, Jet};
use super::problem::{Forcing, Problem};
use crate::model::{CutoffSpec, ModelParams, OutflowSpec, Regime};

/// Value and partial derivatives of a scalar field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointJet {
    pub v: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum YShape {
    /// `y e^{-y}`
    LinExp,
    /// `e^{-y^2}`
    Gauss,
}

impl YShape {
    fn eval(self, y: f64) -> (f64, f64, f64) {
        match self {
            YShape::LinExp => {
                let e = (-y).exp();
                (y * e, (1.0 - y) * e, (y - 2.0) * e)
            }
            YShape::Gauss => {
                let e = (-y * y).exp();
                (e, -2.0 * y * e, (4.0 * y * y - 2.0) * e)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Separable {
    /// `sin x` when true, `cos x` otherwise.
    sin_x: bool,
    y: YShape,
    /// `cos t` when true, `sin t` otherwise.
    cos_t: bool,
}

/// Separable manufactured fields `delta X(x) Y(y) T(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub regime: Regime,
    pub delta: f64,
    /// When false, `T(t)` is replaced by `1`.
    pub time_dependent: bool,
    comps: Vec<Separable>,
}

impl Manufactured {
    /// `u* = delta sin x y e^{-y} cos t`, `h~* = delta cos x e^{-y^2} sin t`.
    pub fn standard_isentropic(delta: f64) -> Self {
        Self {
            regime: Regime::Isentropic,
            delta,
            time_dependent: true,
            comps: vec![
                Separable {
                    sin_x: true,
                    y: YShape::LinExp,
                    cos_t: true,
                },
                Separable {
                    sin_x: false,
                    y: YShape::Gauss,
                    cos_t: false,
                },
            ],
        }
    }

    /// `u~* = delta sin x y e^{-y} cos t`, `theta~* = delta cos x y e^{-y} sin t`,
    /// `q~* = delta cos x e^{-y^2} sin t`.
    pub fn standard_non_isentropic(delta: f64) -> Self {
        Self {
            regime: Regime::NonIsentropic,
            delta,
            time_dependent: true,
            comps: vec![
                Separable {
                    sin_x: true,
                    y: YShape::LinExp,
                    cos_t: true,
                },
                Separable {
                    sin_x: false,
                    y: YShape::LinExp,
                    cos_t: false,
                },
                Separable {
                    sin_x: false,
                    y: YShape::Gauss,
                    cos_t: false,
                },
            ],
        }
    }

    pub fn steady(mut self) -> Self {
        self.time_dependent = false;
        self
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, t: f64, x: f64, y: f64) -> Vec<PointJet> {
        self.comps
            .iter()
            .map(|s| {
                let (sx, cx) = x.sin_cos();
                let (xv, xd) = if s.sin_x { (sx, cx) } else { (cx, -sx) };
                let (yv, yd, ydd) = s.y.eval(y);
                let (tv, td) = if !self.time_dependent {
                    (1.0, 0.0)
                } else if s.cos_t {
                    (t.cos(), -t.sin())
                } else {
                    (t.sin(), t.cos())
                };
                let d = self.delta;
                PointJet {
                    v: d * xv * yv * tv,
                    t: d * xv * yv * td,
                    x: d * xd * yv * tv,
                    y: d * xv * yd * tv,
                    yy: d * xv * ydd * tv,
                }
            })
            .collect()
    }
}

/// Full right-hand side `T(v) + K(v) v_yy` at one point from exact derivatives.
pub fn pde_rhs_point(
    regime: Regime,
    params: &ModelParams,
    outflow: Option<&OutflowSpec>,
    cutoff: &CutoffSpec,
    t: f64,
    x: f64,
    y: f64,
    jets: &[PointJet],
) -> crate::Result<[f64; 3]> {
    let mut jet = Jet::default();
    for (c, p) in jets.iter().enumerate() {
        jet.v[c] = p.v;
        jet.dx[c] = p.x;
        jet.dy[c] = p.y;
    }
    match regime {
        Regime::Isentropic => {
            let (tn, k) = isentropic_point(&jet, params)?;
            Ok([tn[0] + k[0] * jets[0].yy, tn[1] + k[1] * jets[1].yy, 0.0])
        }
        Regime::NonIsentropic => {
            let o = outflow.ok_or_else(|| {
                crate::Error::Construction("non-isentropic forcing needs an outflow".into())
            })?;
            let tr = o.traces(t, x);
            let cut = cutoff.eval(y);
            let (tn, k) = non_isentropic_point(&jet, &tr, &cut, params)?;
            let d = k * Vector3::new(jets[0].yy, jets[1].yy, jets[2].yy);
            Ok([tn[0] + d[0], tn[1] + d[1], tn[2] + d[2]])
        }
    }
}

/// Forcing `s = d_t v* - RHS(v*)` for a manufactured solution.
pub struct ManufacturedSource {
    pub spec: Manufactured,
    params: ModelParams,
    outflow: Option<Arc<OutflowSpec>>,
    cutoff: CutoffSpec,
}

impl ManufacturedSource {
    /// Source contribution from `d_t v*` alone.
    pub fn time_part(&self, t: f64, x: f64, y: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, p) in self.spec.eval(t, x, y).iter().enumerate() {
            out[c] = p.t;
        }
        out
    }
}

impl Forcing for ManufacturedSource {
    fn eval(&self, t: f64, x: f64, y: f64) -> [f64; 3] {
        let jets = self.spec.eval(t, x, y);
        match pde_rhs_point(
            self.spec.regime,
            &self.params,
            self.outflow.as_deref(),
            &self.cutoff,
            t,
            x,
            y,
            &jets,
        ) {
            Ok(rhs) => {
                let mut out = [0.0; 3];
                for c in 0..jets.len() {
                    out[c] = jets[c].t - rhs[c];
                }
                out
            }
            Err(_) => [f64::NAN; 3],
        }
    }
}

pub fn manufactured_source(spec: &Manufactured, problem: &Problem) -> Arc<ManufacturedSource> {
    Arc::new(ManufacturedSource {
        spec: spec.clone(),
        params: problem.params,
        outflow: problem.outflow.clone(),
        cutoff: problem.cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{make_outflow, BoundaryTemperature, Envelope, EnvelopeShape, OutflowFamily};

    fn iso_problem() -> Problem {
        Problem::isentropic(
            ModelParams::isentropic(1.4),
            GridSpec::new(16, 32, 20.0).unwrap(),
        )
        .unwrap()
    }

    fn non_iso_problem() -> Problem {
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
            1.0,
            1.0,
        )
        .unwrap();
        Problem::new(
            ModelParams::non_isentropic(1.0),
            GridSpec::new(16, 32, 20.0).unwrap(),
            Some(o),
        )
        .unwrap()
    }

    #[test]
    fn zero_fields_give_zero_source_on_equilibrium() {
        let p = iso_problem();
        let s = manufactured_source(&Manufactured::standard_isentropic(0.0), &p);
        for (t, x, y) in [(0.3, 1.0, 0.5), (2.0, 4.0, 3.0)] {
            assert_eq!(s.eval(t, x, y), [0.0; 3]);
        }
    }

    #[test]
    fn steady_fields_have_no_time_part() {
        let p = non_iso_problem();
        let s = manufactured_source(&Manufactured::standard_non_isentropic(0.1).steady(), &p);
        assert_eq!(s.time_part(0.7, 1.0, 2.0), [0.0; 3]);
    }

    fn fd_jets(m: &Manufactured, t: f64, x: f64, y: f64) -> Vec<PointJet> {
        let h = 1e-3;
        let d1 = |f: &dyn Fn(f64) -> Vec<f64>, z: f64| -> Vec<f64> {
            let (a, b, c, d) = (f(z - 2.0 * h), f(z - h), f(z + h), f(z + 2.0 * h));
            (0..a.len())
                .map(|k| (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * h))
                .collect()
        };
        let d2 = |f: &dyn Fn(f64) -> Vec<f64>, z: f64| -> Vec<f64> {
            let (a, b, o, c, d) = (f(z - 2.0 * h), f(z - h), f(z), f(z + h), f(z + 2.0 * h));
            (0..a.len())
                .map(|k| (-a[k] + 16.0 * b[k] - 30.0 * o[k] + 16.0 * c[k] - d[k]) / (12.0 * h * h))
                .collect()
        };
        let vals = |t: f64, x: f64, y: f64| m.eval(t, x, y).iter().map(|p| p.v).collect::<Vec<_>>();
        let v = vals(t, x, y);
        let dt = d1(&|s| vals(s, x, y), t);
        let dx = d1(&|s| vals(t, s, y), x);
        let dy = d1(&|s| vals(t, x, s), y);
        let dyy = d2(&|s| vals(t, x, s), y);
        (0..v.len())
            .map(|c| PointJet {
                v: v[c],
                t: dt[c],
                x: dx[c],
                y: dy[c],
                yy: dyy[c],
            })
            .collect()
    }

    #[test]
    fn source_matches_finite_difference_differentiation() {
        let cases = [
            (Manufactured::standard_isentropic(0.1), iso_problem()),
            (
                Manufactured::standard_non_isentropic(0.1),
                non_iso_problem(),
            ),
        ];
        for (m, p) in cases {
            let src = manufactured_source(&m, &p);
            for (t, x, y) in [
                (0.3, 0.7, 0.4),
                (1.1, 2.5, 1.5),
                (2.0, 5.0, 2.7),
                (0.05, 3.3, 1.05),
            ] {
                let fd = fd_jets(&m, t, x, y);
                let rhs = pde_rhs_point(
                    m.regime,
                    &p.params,
                    p.outflow.as_deref(),
                    &p.cutoff,
                    t,
                    x,
                    y,
                    &fd,
                )
                .unwrap();
                let s = src.eval(t, x, y);
                for c in 0..m.ncomp() {
                    let oracle = fd[c].t - rhs[c];
                    assert!((s[c] - oracle).abs() < 1e-6, "c={c} {} vs {oracle}", s[c]);
                }
            }
        }
    }
}
