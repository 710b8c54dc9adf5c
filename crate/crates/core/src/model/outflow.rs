//! Far-field (outflow) traces obeying the Bernoulli law, the boundary
//! temperature, and the smallness envelope `f(t) = eps^(1+sigma) g(t)`.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pointwise outflow data at `(t, x)` with every first derivative the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Traces {
    pub p: f64,
    pub p_t: f64,
    pub p_x: f64,
    pub theta: f64,
    pub theta_t: f64,
    pub theta_x: f64,
    pub h: f64,
    pub h_t: f64,
    pub h_x: f64,
    pub theta_star: f64,
    pub theta_star_t: f64,
    pub theta_star_x: f64,
}

impl Traces {
    /// `P + (1 - 2a) H^2 / 2`, the far-field value of `Q`.
    pub fn q_far(&self, a: f64) -> f64 {
        self.p + 0.5 * (1.0 - 2.0 * a) * self.h * self.h
    }

    /// The three Bernoulli residuals `(P_x - H H_x, Theta_t - ..., H_t - ...)`.
    pub fn bernoulli_residuals(&self, r: f64) -> [f64; 3] {
        let a = r / (1.0 + r);
        let qh = self.q_far(a);
        [
            self.p_x - self.h * self.h_x,
            self.theta_t - a * self.p_t * self.theta / qh,
            self.h_t - self.p_t * self.h / (qh * (r + 1.0)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OutflowFamily {
    /// Constant `(P, Theta, H)`.
    UniformSteady { p: f64, theta: f64, h: f64 },
    /// `H(x) = h0 + h_amp sin x`, `P = p_bar + H^2/2`, `Theta(x) = theta0 + theta_amp cos x`.
    SpatiallyVaryingSteady {
        p_bar: f64,
        h0: f64,
        h_amp: f64,
        theta0: f64,
        #[serde(default)]
        theta_amp: f64,
    },
    /// `P(t) = p0 + p_amp exp(-p_rate t)`; `Theta(t)`, `H(t)` integrated from the Bernoulli law.
    TimeVaryingUniformInX {
        p0: f64,
        p_amp: f64,
        p_rate: f64,
        theta0: f64,
        h0: f64,
    },
    /// Simultaneous `x`- and `t`-dependence. Recognised so that it can be rejected.
    SpaceTimeVarying,
}

/// Boundary temperature `theta*(t, x) = Theta(t, x) - gap(t)` with
/// `gap(t) = gap0 * exp(-t / gap_decay) * ramp(t / gap_ramp)`,
/// `ramp(s) = s^4 / (1 + s^4)`.
///
/// `gap_decay = None` and `gap_ramp = None` drop the respective factor. The
/// ramp switches the gap on with its first three time derivatives zero at
/// `t = 0`, so the zero perturbation is compatible with the wall data.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryTemperature {
    pub gap0: f64,
    pub gap_decay: Option<f64>,
    pub gap_ramp: Option<f64>,
}

impl BoundaryTemperature {
    /// `(gap, d gap / dt)`.
    pub fn gap(&self, t: f64) -> (f64, f64) {
        let (mut g, mut rate) = (self.gap0, 0.0);
        if let Some(tau) = self.gap_decay {
            g *= (-t / tau).exp();
            rate -= 1.0 / tau;
        }
        let mut dg = g * rate;
        if let Some(tr) = self.gap_ramp {
            let s = t / tr;
            let s4 = s.powi(4);
            let ramp = s4 / (1.0 + s4);
            let dramp = 4.0 * s.powi(3) / ((1.0 + s4) * (1.0 + s4) * tr);
            dg = dg * ramp + g * dramp;
            g *= ramp;
        }
        (g, dg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvelopeShape {
    Constant { g0: f64 },
    Exponential { g0: f64, tau: f64 },
}

/// Smallness envelope `f(t) = eps^(1 + sigma) g(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub epsilon: f64,
    pub sigma: f64,
    pub g: EnvelopeShape,
}

impl Envelope {
    pub fn g(&self, t: f64) -> f64 {
        match self.g {
            EnvelopeShape::Constant { g0 } => g0,
            EnvelopeShape::Exponential { g0, tau } => g0 * (-t / tau).exp(),
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        self.epsilon.powf(1.0 + self.sigma) * self.g(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon >= 0.0
            && self.sigma > 0.0
            && match self.g {
                EnvelopeShape::Constant { g0 } => g0 > 0.0,
                EnvelopeShape::Exponential { g0, tau } => g0 > 0.0 && tau > 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Construction(format!(
                "envelope needs eps >= 0, sigma > 0 and a positive g: {self:?}"
            )))
        }
    }
}

/// Dense table of the Bernoulli-integrated `(Theta, H)` for the time-varying family.
#[derive(Debug, Clone)]
struct OdeTable {
    dt: f64,
    theta: Vec<f64>,
    h: Vec<f64>,
    dtheta: Vec<f64>,
    dh: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OutflowSpec {
    pub family: OutflowFamily,
    pub boundary: BoundaryTemperature,
    pub envelope: Envelope,
    r: f64,
    t_max: f64,
    table: Option<OdeTable>,
}

const ODE_STEP: f64 = 1e-3;

pub fn make_outflow(
    family: OutflowFamily,
    boundary: BoundaryTemperature,
    envelope: Envelope,
    r: f64,
    t_max: f64,
) -> Result<OutflowSpec> {
    if !(r > 0.0) {
        return Err(Error::Construction(format!("R = {r} must be positive")));
    }
    envelope.validate()?;
    for (name, v) in [
        ("gap_decay", boundary.gap_decay),
        ("gap_ramp", boundary.gap_ramp),
    ] {
        if let Some(v) = v.filter(|v| !(*v > 0.0)) {
            return Err(Error::Construction(format!(
                "{name} = {v} must be positive"
            )));
        }
    }
    let a = r / (1.0 + r);
    let table = match family {
        OutflowFamily::SpaceTimeVarying => {
            return Err(Error::UnsupportedFamily(
                "outflows with simultaneous x- and t-dependence are not constructible from the \
                 Bernoulli constraints alone"
                    .into(),
            ))
        }
        OutflowFamily::UniformSteady { .. } | OutflowFamily::SpatiallyVaryingSteady { .. } => None,
        OutflowFamily::TimeVaryingUniformInX {
            p0,
            p_amp,
            p_rate,
            theta0,
            h0,
        } => {
            if !(p_rate >= 0.0) || !(theta0 > 0.0) || !(h0 > 0.0) {
                return Err(Error::Construction(format!(
                    "time-varying outflow needs p_rate >= 0, theta0 > 0, h0 > 0: {family:?}"
                )));
            }
            Some(integrate_bernoulli(
                p0,
                p_amp,
                p_rate,
                theta0,
                h0,
                a,
                r,
                t_max.max(0.0),
            )?)
        }
    };
    let spec = OutflowSpec {
        family,
        boundary,
        envelope,
        r,
        t_max: t_max.max(0.0),
        table,
    };
    spec.check_admissible()?;
    Ok(spec)
}

fn pressure_of(p0: f64, p_amp: f64, p_rate: f64, t: f64) -> (f64, f64) {
    let e = (-p_rate * t).exp();
    (p0 + p_amp * e, -p_rate * p_amp * e)
}

#[allow(clippy::too_many_arguments)]
fn integrate_bernoulli(
    p0: f64,
    p_amp: f64,
    p_rate: f64,
    theta0: f64,
    h0: f64,
    a: f64,
    r: f64,
    t_max: f64,
) -> Result<OdeTable> {
    let rhs = |t: f64, th: f64, h: f64| -> (f64, f64) {
        let (p, pt) = pressure_of(p0, p_amp, p_rate, t);
        let qh = p + 0.5 * (1.0 - 2.0 * a) * h * h;
        (a * pt * th / qh, pt * h / (qh * (r + 1.0)))
    };
    let n = (t_max / ODE_STEP).ceil() as usize + 2;
    let mut table = OdeTable {
        dt: ODE_STEP,
        theta: Vec::with_capacity(n + 1),
        h: Vec::with_capacity(n + 1),
        dtheta: Vec::with_capacity(n + 1),
        dh: Vec::with_capacity(n + 1),
    };
    let (mut th, mut h) = (theta0, h0);
    let dt = ODE_STEP;
    for k in 0..=n {
        let t = k as f64 * dt;
        let (dth, dhh) = rhs(t, th, h);
        if !(th > 0.0 && h > 0.0) || !dth.is_finite() || !dhh.is_finite() {
            return Err(Error::Construction(format!(
                "Bernoulli integration left the admissible region at t = {t}"
            )));
        }
        table.theta.push(th);
        table.h.push(h);
        table.dtheta.push(dth);
        table.dh.push(dhh);
        // classical RK4
        let (k1t, k1h) = (dth, dhh);
        let (k2t, k2h) = rhs(t + 0.5 * dt, th + 0.5 * dt * k1t, h + 0.5 * dt * k1h);
        let (k3t, k3h) = rhs(t + 0.5 * dt, th + 0.5 * dt * k2t, h + 0.5 * dt * k2h);
        let (k4t, k4h) = rhs(t + dt, th + dt * k3t, h + dt * k3h);
        th += dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        h += dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
    }
    Ok(table)
}

impl OdeTable {
    /// Cubic Hermite interpolation of `(Theta, H)` and its time derivative.
    fn eval(&self, t: f64) -> (f64, f64, f64, f64) {
        let last = self.theta.len() - 2;
        let s = (t / self.dt).max(0.0);
        let k = (s.floor() as usize).min(last);
        let tau = s - k as f64;
        let dt = self.dt;
        let herm = |y0: f64, y1: f64, d0: f64, d1: f64| -> (f64, f64) {
            let t2 = tau * tau;
            let t3 = t2 * tau;
            let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + tau) * dt * d0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * dt * d1;
            let dv = ((6.0 * t2 - 6.0 * tau) * y0
                + (3.0 * t2 - 4.0 * tau + 1.0) * dt * d0
                + (-6.0 * t2 + 6.0 * tau) * y1
                + (3.0 * t2 - 2.0 * tau) * dt * d1)
                / dt;
            (v, dv)
        };
        let (th, dth) = herm(
            self.theta[k],
            self.theta[k + 1],
            self.dtheta[k],
            self.dtheta[k + 1],
        );
        let (h, dh) = herm(self.h[k], self.h[k + 1], self.dh[k], self.dh[k + 1]);
        (th, dth, h, dh)
    }
}

impl OutflowSpec {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn a(&self) -> f64 {
        self.r / (1.0 + self.r)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `true` when every trace is constant in `t` and `x` and `theta* = Theta`.
    pub fn is_uniform_equilibrium(&self) -> bool {
        matches!(self.family, OutflowFamily::UniformSteady { .. }) && self.boundary.gap0 == 0.0
    }

    pub fn traces(&self, t: f64, x: f64) -> Traces {
        let mut tr = match self.family {
            OutflowFamily::UniformSteady { p, theta, h } => Traces {
                p,
                theta,
                h,
                ..Traces::default()
            },
            OutflowFamily::SpatiallyVaryingSteady {
                p_bar,
                h0,
                h_amp,
                theta0,
                theta_amp,
            } => {
                let (s, c) = x.sin_cos();
                let h = h0 + h_amp * s;
                let h_x = h_amp * c;
                Traces {
                    p: p_bar + 0.5 * h * h,
                    p_x: h * h_x,
                    theta: theta0 + theta_amp * c,
                    theta_x: -theta_amp * s,
                    h,
                    h_x,
                    ..Traces::default()
                }
            }
            OutflowFamily::TimeVaryingUniformInX {
                p0, p_amp, p_rate, ..
            } => {
                let (p, p_t) = pressure_of(p0, p_amp, p_rate, t);
                let (theta, theta_t, h, h_t) = self
                    .table
                    .as_ref()
                    .expect("time-varying outflow carries its table")
                    .eval(t.min(self.t_max));
                Traces {
                    p,
                    p_t,
                    theta,
                    theta_t,
                    h,
                    h_t,
                    ..Traces::default()
                }
            }
            OutflowFamily::SpaceTimeVarying => unreachable!("rejected at construction"),
        };
        let (gap, gap_t) = self.boundary.gap(t);
        tr.theta_star = tr.theta - gap;
        tr.theta_star_t = tr.theta_t - gap_t;
        tr.theta_star_x = tr.theta_x;
        tr
    }

    fn check_admissible(&self) -> Result<()> {
        let nt = if self.table.is_some() { 65 } else { 1 };
        for kt in 0..nt {
            let t = if nt == 1 {
                0.0
            } else {
                self.t_max * kt as f64 / (nt - 1) as f64
            };
            for kx in 0..64 {
                let x = 2.0 * PI * kx as f64 / 64.0;
                let tr = self.traces(t, x);
                if !(tr.theta > 0.0 && tr.h > 0.0 && tr.p - 0.5 * tr.h * tr.h > 0.0)
                    || !(tr.theta_star > 0.0)
                {
                    return Err(Error::Construction(format!(
                        "inadmissible outflow at (t, x) = ({t}, {x:.3}): Theta = {}, H = {}, \
                         P - H^2/2 = {}, theta* = {}",
                        tr.theta,
                        tr.h,
                        tr.p - 0.5 * tr.h * tr.h,
                        tr.theta_star
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Names of the six components of the smallness list, in order.
pub const SMALLNESS_COMPONENTS: [&str; 6] = [
    "Theta_x",
    "theta*_t",
    "theta*_x",
    "P_t",
    "P_x",
    "Theta - theta*",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub t: f64,
    pub norm: f64,
    pub envelope: f64,
    pub pass: bool,
    pub component_norms: [f64; 6],
    /// Largest component, reported when the sample fails.
    pub worst_component: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: Vec<SampleReport>,
    pub max_bernoulli_residual: f64,
    pub pass: bool,
}

/// Discrete `H^3(T)` norm of a periodic sample by Fourier differentiation.
pub fn h3_norm_periodic(values: &[f64]) -> f64 {
    let n = values.len();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut acc = 0.0;
    for (k, c) in buf.iter().enumerate() {
        let kk = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let k2 = kk * kk;
        acc += (1.0 + k2 + k2 * k2 + k2 * k2 * k2) * c.norm_sqr();
    }
    (acc * 2.0 * PI / (n * n) as f64).sqrt()
}

pub fn validate_outflow(spec: &OutflowSpec, t_samples: &[f64], nx: usize) -> ValidationReport {
    let mut samples = Vec::with_capacity(t_samples.len());
    let mut max_res: f64 = 0.0;
    let r = spec.r;
    for &t in t_samples {
        let mut comps = vec![vec![0.0; nx]; 6];
        for i in 0..nx {
            let x = 2.0 * PI * i as f64 / nx as f64;
            let tr = spec.traces(t, x);
            let vals = [
                tr.theta_x,
                tr.theta_star_t,
                tr.theta_star_x,
                tr.p_t,
                tr.p_x,
                tr.theta - tr.theta_star,
            ];
            for (c, v) in comps.iter_mut().zip(vals) {
                c[i] = v;
            }
            for res in tr.bernoulli_residuals(r) {
                max_res = max_res.max(res.abs());
            }
        }
        let mut component_norms = [0.0; 6];
        for (k, c) in comps.iter().enumerate() {
            component_norms[k] = h3_norm_periodic(c);
        }
        let norm = component_norms.iter().map(|v| v * v).sum::<f64>().sqrt();
        let envelope = spec.envelope.f(t);
        let pass = norm <= envelope;
        let worst_component = if pass {
            None
        } else {
            let k = (0..6)
                .max_by(|&a, &b| component_norms[a].total_cmp(&component_norms[b]))
                .unwrap_or(0);
            Some(SMALLNESS_COMPONENTS[k])
        };
        samples.push(SampleReport {
            t,
            norm,
            envelope,
            pass,
            component_norms,
            worst_component,
        });
    }
    let pass = samples.iter().all(|s| s.pass) && max_res <= 1e-8;
    ValidationReport {
        samples,
        max_bernoulli_residual: max_res,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(eps: f64, sigma: f64) -> Envelope {
        Envelope {
            epsilon: eps,
            sigma,
            g: EnvelopeShape::Constant { g0: 1.0 },
        }
    }

    fn uniform() -> OutflowSpec {
        make_outflow(
            OutflowFamily::UniformSteady {
                p: 1.5,
                theta: 1.0,
                h: 1.0,
            },
            BoundaryTemperature::default(),
            env(0.1, 0.5),
            1.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn uniform_steady_has_zero_smallness_norm() {
        let spec = uniform();
        let rep = validate_outflow(&spec, &[0.0, 1.0, 5.0], 32);
        assert!(rep.pass);
        assert_eq!(rep.max_bernoulli_residual, 0.0);
        for s in &rep.samples {
            assert_eq!(s.norm, 0.0);
        }
    }

    #[test]
    fn spatially_varying_bernoulli_holds_identically() {
        let spec = make_outflow(
            OutflowFamily::SpatiallyVaryingSteady {
                p_bar: 1.0,
                h0: 1.0,
                h_amp: 0.1,
                theta0: 1.0,
                theta_amp: 0.0,
            },
            BoundaryTemperature::default(),
            env(0.1, 0.5),
            1.0,
            1.0,
        )
        .unwrap();
        for k in 0..100 {
            let x = 0.0628 * k as f64;
            let tr = spec.traces(0.3, x);
            assert_eq!(tr.bernoulli_residuals(1.0), [0.0; 3]);
            let expect_p = 1.0 + 0.5 * (1.0 + 0.1 * x.sin()).powi(2);
            assert!((tr.p - expect_p).abs() < 1e-15);
        }
    }

    #[test]
    fn time_varying_matches_closed_form_at_r_one() {
        // R = 1 gives a = 1/2, so both Bernoulli equations reduce to
        // d ln(Theta) = d ln(H) = d ln(P) / 2.
        let delta = 0.2;
        let spec = make_outflow(
            OutflowFamily::TimeVaryingUniformInX {
                p0: 1.5,
                p_amp: delta,
                p_rate: 1.0,
                theta0: 1.0,
                h0: 1.0,
            },
            BoundaryTemperature::default(),
            env(0.1, 0.5),
            1.0,
            8.0,
        )
        .unwrap();
        let p_init = 1.5 + delta;
        for k in 0..80 {
            let t = 0.1 * k as f64 + 0.0003;
            let tr = spec.traces(t, 0.0);
            let ratio = (tr.p / p_init).sqrt();
            assert!((tr.theta - ratio).abs() < 1e-10, "t={t}");
            assert!((tr.h - ratio).abs() < 1e-10);
            for res in tr.bernoulli_residuals(1.0) {
                assert!(res.abs() <= 1e-8, "t={t} res={res}");
            }
        }
    }

    #[test]
    fn space_time_family_is_rejected() {
        let e = make_outflow(
            OutflowFamily::SpaceTimeVarying,
            BoundaryTemperature::default(),
            env(0.1, 0.5),
            1.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(e, Error::UnsupportedFamily(_)));
    }

    #[test]
    fn inadmissible_parameters_are_rejected() {
        let e = make_outflow(
            OutflowFamily::UniformSteady {
                p: 0.4,
                theta: 1.0,
                h: 1.0,
            },
            BoundaryTemperature::default(),
            env(0.1, 0.5),
            1.0,
            1.0,
        );
        assert!(matches!(e, Err(Error::Construction(_))));
    }

    #[test]
    fn h3_norm_of_trig_modes() {
        let n = 64;
        let v: Vec<f64> = (0..n)
            .map(|i| (2.0 * (2.0 * PI * i as f64 / n as f64)).cos())
            .collect();
        // |cos 2x|_{H^3}^2 = pi (1 + 4 + 16 + 64)
        let expect = (PI * 85.0).sqrt();
        assert!((h3_norm_periodic(&v) - expect).abs() < 1e-12);
    }

    #[test]
    fn ramped_gap_rate_matches_finite_differences() {
        let b = BoundaryTemperature {
            gap0: 0.3,
            gap_decay: Some(7.0),
            gap_ramp: Some(2.0),
        };
        assert_eq!(b.gap(0.0), (0.0, 0.0));
        for t in [0.1, 1.0, 2.0, 5.0, 30.0] {
            let h = 1e-6;
            let fd = (b.gap(t + h).0 - b.gap(t - h).0) / (2.0 * h);
            assert!((fd - b.gap(t).1).abs() < 1e-8, "t = {t}");
        }
    }
}
