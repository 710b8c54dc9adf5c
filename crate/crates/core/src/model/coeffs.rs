//! Isentropic pressure identity and the `A, B, C` coefficient algebra.

use crate::error::{violation, Error, Result, Violation};

/// `a = R / (1 + R)`, strictly inside `(0, 1)` for every `R > 0`.
pub fn derive_a(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "R = {r} must be positive and finite"
        )));
    }
    Ok(r / (1.0 + r))
}

/// Isentropic pressure under the uniform outflow normalisation, `p = 3/2 - h^2/2`.
pub fn pressure_from_h(h: f64) -> Result<f64> {
    let p = 1.5 - 0.5 * h * h;
    if !(p > 0.0) {
        return Err(violation(Violation::PressureNonPositive, h));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `A = p^{-1/gamma}`, `C = 1 / (gamma p + h^2)`, `B = 1 - h^2 C` with `p = 3/2 - h^2/2`.
///
/// Requires `1/2 <= h < sqrt(3)` and `gamma >= 1`.
pub fn isentropic_coeffs(h: f64, gamma: f64) -> Result<CoefficientSet> {
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!(
            "gamma = {gamma} violates gamma >= 1"
        )));
    }
    if !h.is_finite() {
        return Err(violation(Violation::NonFinite, h));
    }
    if h < 0.5 {
        return Err(violation(Violation::HBelowThreshold, h));
    }
    pressure_from_h(h)?;
    Ok(coeffs_unchecked(h, gamma))
}

/// The same algebra without region checks; callers guarantee admissibility.
#[inline]
pub fn coeffs_unchecked(h: f64, gamma: f64) -> CoefficientSet {
    let h2 = h * h;
    let p = 1.5 - 0.5 * h2;
    let c = 1.0 / (gamma * p + h2);
    CoefficientSet {
        a: p.powf(-1.0 / gamma),
        b: 1.0 - h2 * c,
        c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_a_examples() {
        assert_eq!(derive_a(1.0).unwrap(), 0.5);
        assert_eq!(derive_a(3.0).unwrap(), 0.75);
        assert_eq!(derive_a(10.0).unwrap(), 10.0 / 11.0);
        assert!(derive_a(0.0).is_err());
        assert!(derive_a(-2.0).is_err());
        let mut prev = 0.0;
        for k in 0..60 {
            let a = derive_a(1.5f64.powi(k - 20)).unwrap();
            assert!(a > prev && a < 1.0);
            prev = a;
        }
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(pressure_from_h(1.0).unwrap(), 1.0);
        assert_eq!(pressure_from_h(0.0).unwrap(), 1.5);
        assert!(matches!(
            pressure_from_h(1.7320508075688774),
            Err(Error::Admissibility {
                violation: Violation::PressureNonPositive,
                ..
            })
        ));
    }

    #[test]
    fn coefficient_examples() {
        let c = isentropic_coeffs(1.0, 1.0).unwrap();
        assert_eq!((c.a, c.b, c.c), (1.0, 0.5, 0.5));
        let c = isentropic_coeffs(1.0, 2.0).unwrap();
        assert_eq!(c.a, 1.0);
        assert!((c.c - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.b - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_region_errors_name_the_bound() {
        let e = isentropic_coeffs(0.3, 1.4).unwrap_err();
        assert!(e.to_string().contains("h >= h_min"), "{e}");
        let e = isentropic_coeffs(1.8, 1.4).unwrap_err();
        assert!(e.to_string().contains("pressure"), "{e}");
        assert!(isentropic_coeffs(1.0, 0.5).is_err());
    }

    #[test]
    fn near_upper_boundary_is_finite() {
        let c = isentropic_coeffs(3f64.sqrt() - 1e-6, 5.0 / 3.0).unwrap();
        assert!(c.a.is_finite() && c.a > 1e3);
        assert!(c.b > 0.0 && c.c > 0.0);
    }
}
