//! Pointwise right-hand sides of the transformed systems.
//!
//! Both systems are written as `d_t v = T(v) + K(v) d_y^2 v`, where `T`
//! collects advection, first-order nonlinear terms and residual forcing, and
//! `K` is the diffusion matrix (diagonal for the isentropic system).

use nalgebra::{Matrix3, Vector3};

use crate::error::{violation, Result, Violation};
use crate::model::{
    coeffs_unchecked, full_point, matrices_at, residuals, symmetrizer_inverse, CutoffValues,
    FullPoint, ModelParams, NonIsentropicPoint, Traces,
};

/// Values and first derivatives of up to three unknowns at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: [f64; 3],
    pub dx: [f64; 3],
    pub dy: [f64; 3],
}

/// `h = 1 + h~` checked against `h >= h_min` and `h^2 < 3`.
#[inline]
pub fn check_h(h_t: f64, params: &ModelParams) -> Result<f64> {
    let h = 1.0 + h_t;
    if !h.is_finite() {
        return Err(violation(Violation::NonFinite, h));
    }
    if !(h >= params.margins.h_min) {
        return Err(violation(Violation::HBelowThreshold, h));
    }
    if !(h * h < 3.0) {
        return Err(violation(Violation::PressureNonPositive, h));
    }
    Ok(h)
}

/// Explicit tendency and diffusivities `(A h^2, B h^2)` of the isentropic system.
pub fn isentropic_point(jet: &Jet, params: &ModelParams) -> Result<([f64; 2], [f64; 2])> {
    let h = check_h(jet.v[1], params)?;
    let c = coeffs_unchecked(h, params.gamma);
    let (u, ux, uy) = (jet.v[0], jet.dx[0], jet.dy[0]);
    let (hx, hy) = (jet.dx[1], jet.dy[1]);
    let tu = -u * ux + c.a * h * hx - (1.0 - c.a) * h * hy * uy;
    let th = -u * hx + c.b * h * ux - (1.0 - c.b) * h * hy * hy;
    Ok(([tu, th], [c.a * h * h, c.b * h * h]))
}

/// Largest characteristic speeds `(x, y)` at an isentropic node.
pub fn isentropic_speeds(jet: &Jet, params: &ModelParams) -> Result<(f64, f64)> {
    let h = check_h(jet.v[1], params)?;
    let c = coeffs_unchecked(h, params.gamma);
    let sx = jet.v[0].abs() + h * (c.a * c.b).sqrt();
    let sy = ((1.0 - c.a) * h * jet.dy[1]).abs() + ((1.0 - c.b) * h * jet.dy[1]).abs();
    Ok((sx, sy))
}

/// First-order terms `f0(d_y v)` of the unsymmetrised non-isentropic system.
pub fn f0(fp: &FullPoint, dy: &[f64; 3]) -> Vector3<f64> {
    let FullPoint {
        theta,
        q,
        p,
        qq,
        a,
        r,
        ..
    } = *fp;
    let (uy, ty, qy) = (dy[0], dy[1], dy[2]);
    let ratio = (p + q) / (p - q);
    Vector3::new(
        (1.0 - r * theta / (p - q)) * qy * uy,
        -2.0 * a * theta * q / qq * ratio * uy * uy + (1.0 - a * theta / qq * ratio) * qy * ty
            - a * theta / qq * ratio * qy * qy,
        4.0 * a * q * q / qq * uy * uy + 2.0 * a * q / qq * qy * ty + (p + q) / qq * qy * qy,
    )
}

/// Explicit tendency `S^{-1}(-S A0 d_x v - S f0 + S g0)` and diffusion matrix `S^{-1} S B0`.
pub fn non_isentropic_point(
    jet: &Jet,
    tr: &Traces,
    cut: &CutoffValues,
    params: &ModelParams,
) -> Result<([f64; 3], Matrix3<f64>)> {
    let pt = NonIsentropicPoint {
        u: jet.v[0],
        theta_t: jet.v[1],
        q_t: jet.v[2],
    };
    let fp = full_point(&pt, tr, cut.chi, params)?;
    let m = matrices_at(&fp);
    let s_inv = symmetrizer_inverse(&m.s)?;
    let g0 = residuals(&pt, jet.dy[2], tr, cut, params)?;
    let vx = Vector3::from(jet.dx);
    let rhs = -(m.a_sym * vx) - m.s * (f0(&fp, &jet.dy) - Vector3::from(g0));
    let t = s_inv * rhs;
    Ok(([t[0], t[1], t[2]], s_inv * m.b_diag))
}

/// Largest characteristic speeds `(x, y)` at a non-isentropic node.
pub fn non_isentropic_speeds(
    jet: &Jet,
    tr: &Traces,
    cut: &CutoffValues,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let pt = NonIsentropicPoint {
        u: jet.v[0],
        theta_t: jet.v[1],
        q_t: jet.v[2],
    };
    let fp = full_point(&pt, tr, cut.chi, params)?;
    let sx = fp.u.abs() + (2.0 * fp.r * fp.theta * fp.q / fp.qq).sqrt();
    let ratio = (fp.p + fp.q) / (fp.p - fp.q);
    let qy = jet.dy[2].abs();
    let sy = qy * (1.0 + fp.r * fp.theta / (fp.p - fp.q) + fp.a * fp.theta / fp.qq * ratio)
        + (fp.p + fp.q) / fp.qq * qy
        + 2.0 * fp.a * fp.q / fp.qq * jet.dy[1].abs();
    Ok((sx, sy))
}
