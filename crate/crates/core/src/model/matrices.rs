//! Symmetrizer, quasilinear matrices and energy weights of the non-isentropic system.

use nalgebra::Matrix3;

use super::outflow::Traces;
use super::params::ModelParams;
use crate::error::{violation, Result, Violation};

/// Perturbation unknowns at one node: `u~`, `theta~`, `q~`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NonIsentropicPoint {
    pub u: f64,
    pub theta_t: f64,
    pub q_t: f64,
}

/// Full (un-perturbed) quantities reconstructed from a perturbation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullPoint {
    pub u: f64,
    pub theta: f64,
    pub q: f64,
    pub p: f64,
    /// `Q = P + (1 - 2a) q`.
    pub qq: f64,
    pub a: f64,
    pub r: f64,
}

/// Reconstructs `theta = theta~ + chi Theta + (1 - chi) theta*` and
/// `q = q~ + H^2/2`, then checks the admissibility margins.
pub fn full_point(
    p: &NonIsentropicPoint,
    tr: &Traces,
    chi: f64,
    params: &ModelParams,
) -> Result<FullPoint> {
    let a = params.a();
    let theta = p.theta_t + chi * tr.theta + (1.0 - chi) * tr.theta_star;
    let q = p.q_t + 0.5 * tr.h * tr.h;
    let qq = tr.p + (1.0 - 2.0 * a) * q;
    let m = &params.margins;
    if !theta.is_finite() || !q.is_finite() || !p.u.is_finite() {
        return Err(violation(Violation::NonFinite, theta + q + p.u));
    }
    if !(theta >= m.theta_min) {
        return Err(violation(Violation::ThetaNonPositive, theta));
    }
    if !(q >= m.q_min) {
        return Err(violation(Violation::QNonPositive, q));
    }
    if !(tr.p - q >= m.p_minus_q_min) {
        return Err(violation(Violation::PMinusQNonPositive, tr.p - q));
    }
    if !(qq > 0.0) {
        return Err(violation(Violation::QTotalNonPositive, qq));
    }
    Ok(FullPoint {
        u: p.u,
        theta,
        q,
        p: tr.p,
        qq,
        a,
        r: params.r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixSet {
    /// Symmetrizer `S(v)`.
    pub s: Matrix3<f64>,
    /// Advection matrix of the unsymmetrized system.
    pub a0: Matrix3<f64>,
    /// Diffusion matrix of the unsymmetrized system (`-B0 d_y^2 v` convention).
    pub b0: Matrix3<f64>,
    /// `S A0`.
    pub a_sym: Matrix3<f64>,
    /// `S B0`, diagonal.
    pub b_diag: Matrix3<f64>,
    /// Energy weights `(G1, G2, G3)`.
    pub g: [f64; 3],
    pub point: FullPoint,
}

/// Energy weights `G1 = theta (P - q) / R`, `G2 = (P - q) / a`,
/// `G3 = theta^2 (P + q) / (2 q (P - q))`.
#[inline]
pub fn weights(fp: &FullPoint) -> [f64; 3] {
    let pmq = fp.p - fp.q;
    [
        fp.theta * pmq / fp.r,
        pmq / fp.a,
        fp.theta * fp.theta * (fp.p + fp.q) / (2.0 * fp.q * pmq),
    ]
}

pub fn symmetrizer(fp: &FullPoint) -> Matrix3<f64> {
    let [g1, g2, g3] = weights(fp);
    Matrix3::new(g1, 0.0, 0.0, 0.0, g2, fp.theta, 0.0, fp.theta, g3)
}

pub fn advection_matrix(fp: &FullPoint) -> Matrix3<f64> {
    let FullPoint {
        u,
        theta,
        q,
        p,
        qq,
        a,
        r,
    } = *fp;
    Matrix3::new(
        u,
        0.0,
        -r * theta / (p - q),
        2.0 * a * theta * q / qq,
        u,
        0.0,
        -2.0 * (p - q) * q / qq,
        0.0,
        u,
    )
}

pub fn diffusion_matrix(fp: &FullPoint) -> Matrix3<f64> {
    let FullPoint {
        theta,
        q,
        p,
        qq,
        a,
        r,
        ..
    } = *fp;
    let ratio = (p + q) / (p - q);
    2.0 * q
        * Matrix3::new(
            r * theta / (p - q),
            0.0,
            0.0,
            0.0,
            a * theta / qq * ratio,
            -a * theta / qq,
            0.0,
            -2.0 * a * q / qq,
            (p - q) / qq,
        )
}

/// Closed-form inverse of the symmetrizer's block structure.
///
/// Fails when either pivot falls below `1e-10`.
pub fn symmetrizer_inverse(s: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    const FLOOR: f64 = 1e-10;
    let s11 = s[(0, 0)];
    let det2 = s[(1, 1)] * s[(2, 2)] - s[(1, 2)] * s[(2, 1)];
    if !(s11.abs() >= FLOOR) {
        return Err(violation(Violation::NonFinite, s11));
    }
    if !(det2.abs() >= FLOOR) {
        return Err(violation(Violation::NonFinite, det2));
    }
    Ok(Matrix3::new(
        1.0 / s11,
        0.0,
        0.0,
        0.0,
        s[(2, 2)] / det2,
        -s[(1, 2)] / det2,
        0.0,
        -s[(2, 1)] / det2,
        s[(1, 1)] / det2,
    ))
}

pub fn build_matrices(
    p: &NonIsentropicPoint,
    tr: &Traces,
    chi: f64,
    params: &ModelParams,
) -> Result<MatrixSet> {
    let fp = full_point(p, tr, chi, params)?;
    Ok(matrices_at(&fp))
}

pub fn matrices_at(fp: &FullPoint) -> MatrixSet {
    let s = symmetrizer(fp);
    let a0 = advection_matrix(fp);
    let b0 = diffusion_matrix(fp);
    MatrixSet {
        s,
        a0,
        b0,
        a_sym: s * a0,
        b_diag: s * b0,
        g: weights(fp),
        point: *fp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_point() -> (NonIsentropicPoint, Traces) {
        let tr = Traces {
            p: 1.5,
            theta: 1.0,
            theta_star: 1.0,
            h: 1.0,
            ..Traces::default()
        };
        (NonIsentropicPoint::default(), tr)
    }

    #[test]
    fn reference_state_matrices() {
        let (p, tr) = reference_point();
        let params = ModelParams::non_isentropic(1.0);
        let m = build_matrices(&p, &tr, 0.0, &params).unwrap();
        assert_eq!(m.point.q, 0.5);
        let s_expect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0, 1.0, 2.0);
        assert_eq!(m.s, s_expect);
        assert!((m.b_diag - Matrix3::identity()).abs().max() < 1e-15);
        for k in 0..3 {
            assert!(m.a_sym[(k, k)].abs() < 1e-15);
        }
        assert!((m.a_sym[(0, 2)] + 1.0).abs() < 1e-15);
        assert!((m.a_sym[(2, 0)] + 1.0).abs() < 1e-15);
        let minor = m.s[(0, 0)] * m.s[(1, 1)] - m.s[(0, 1)] * m.s[(1, 0)];
        assert_eq!(minor, 2.0);
        assert!((m.s.determinant() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn weights_sit_on_the_symmetrizer_diagonal() {
        let (p, tr) = reference_point();
        let m = build_matrices(&p, &tr, 0.3, &ModelParams::non_isentropic(2.5)).unwrap();
        for k in 0..3 {
            assert_eq!(m.s[(k, k)], m.g[k]);
        }
        assert_eq!(m.s[(1, 2)], m.point.theta);
        assert_eq!(m.s[(2, 1)], m.point.theta);
    }

    #[test]
    fn inverse_is_inverse() {
        let (p, tr) = reference_point();
        let m = build_matrices(&p, &tr, 0.0, &ModelParams::non_isentropic(0.7)).unwrap();
        let inv = symmetrizer_inverse(&m.s).unwrap();
        assert!((inv * m.s - Matrix3::identity()).abs().max() < 1e-14);
        // S^{-1} B_diag recovers B0
        assert!((inv * m.b_diag - m.b0).abs().max() < 1e-14);
    }

    #[test]
    fn violations_are_named() {
        let (_, tr) = reference_point();
        let params = ModelParams::non_isentropic(1.0);
        let cases = [
            (
                NonIsentropicPoint {
                    u: 0.0,
                    theta_t: -1.2,
                    q_t: 0.0,
                },
                Violation::ThetaNonPositive,
            ),
            (
                NonIsentropicPoint {
                    u: 0.0,
                    theta_t: 0.0,
                    q_t: -0.49,
                },
                Violation::QNonPositive,
            ),
            (
                NonIsentropicPoint {
                    u: 0.0,
                    theta_t: 0.0,
                    q_t: 0.99,
                },
                Violation::PMinusQNonPositive,
            ),
        ];
        for (p, want) in cases {
            match build_matrices(&p, &tr, 0.0, &params) {
                Err(crate::Error::Admissibility { violation, .. }) => assert_eq!(violation, want),
                other => panic!("expected {want:?}, got {other:?}"),
            }
        }
    }
}
