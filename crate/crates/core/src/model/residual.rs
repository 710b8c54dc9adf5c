//! Source terms `(r1, r2, r3)` left over when the non-isentropic unknowns are
//! measured against the cut-off blend of the outflow and boundary traces.
//!
//! The forms here already have the Bernoulli law substituted, so `Theta_t`
//! and `H_t` never appear; `r1` is still evaluated from the traces so that a
//! non-Bernoulli outflow shows up as a nonzero value.

use super::cutoff::CutoffValues;
use super::matrices::{full_point, NonIsentropicPoint};
use super::outflow::Traces;
use super::params::ModelParams;
use crate::error::Result;

pub fn residuals(
    p: &NonIsentropicPoint,
    dy_q_t: f64,
    tr: &Traces,
    cut: &CutoffValues,
    params: &ModelParams,
) -> Result<[f64; 3]> {
    let fp = full_point(p, tr, cut.chi, params)?;
    let (a, r) = (fp.a, fp.r);
    let (theta, q, pp, qq) = (fp.theta, fp.q, tr.p, fp.qq);
    let u = p.u;
    let chi = cut.chi;
    let gap = tr.theta - tr.theta_star;
    let qh = tr.q_far(a);
    let ratio = (pp + q) / (pp - q);

    let r1 = -r * theta / (pp - q) * (tr.p_x - tr.h * tr.h_x);

    let r2 = -(1.0 - chi) * tr.theta_star_t
        - u * chi * tr.theta_x
        - u * (1.0 - chi) * tr.theta_star_x
        - (1.0 - a * theta / qq * ratio) * dy_q_t * cut.d1 * gap
        + 2.0 * a * theta * q / qq * ratio * cut.d2 * gap
        + a * theta / qq * ((1.0 - chi) * tr.p_t + tr.p_x * u)
        + chi * a * tr.p_t * (theta * qh - tr.theta * qq) / (qq * qh);

    let r3 = -u * tr.h * tr.h_x
        - 2.0 * a * q / qq * dy_q_t * cut.d1 * gap
        - 4.0 * a * q * q / qq * cut.d2 * gap
        + 2.0 * p.q_t * pp * tr.p_t / (qq * (r + 1.0) * qh)
        + 2.0 * q / (qq * (r + 1.0)) * tr.p_x * u;

    Ok([r1, r2, r3])
}
