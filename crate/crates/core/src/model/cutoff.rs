/// Values of the cut-off profile and its first two derivatives at one height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffValues {
    pub chi: f64,
    pub d1: f64,
    pub d2: f64,
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffProfile {
    /// `6s^5 - 15s^4 + 10s^3`; `C^2` at the plateau edges.
    #[default]
    Quintic,
    /// `e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)})`; `C^infinity`.
    Smooth,
}

/// Smooth monotone transition from 0 on `[0, start]` to 1 on `[start + width, inf)`
/// in `s = (y - start) / width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSpec {
    pub start: f64,
    pub width: f64,
    pub profile: CutoffProfile,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self {
            start: 1.0,
            width: 1.0,
            profile: CutoffProfile::Quintic,
        }
    }
}

impl CutoffSpec {
    pub fn smooth() -> Self {
        Self {
            profile: CutoffProfile::Smooth,
            ..Self::default()
        }
    }

    pub fn eval(&self, y: f64) -> CutoffValues {
        cutoff(y, self)
    }
}

/// `(phi, phi', phi'')` of `phi(s) = e^{-1/s}`, zero for `s <= 0`.
fn flat(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let p = (-1.0 / s).exp();
    let i2 = 1.0 / (s * s);
    (p, p * i2, p * i2 * (i2 - 2.0 / s))
}

pub fn cutoff(y: f64, spec: &CutoffSpec) -> CutoffValues {
    let s = (y - spec.start) / spec.width;
    if s <= 0.0 {
        return CutoffValues {
            chi: 0.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    if s >= 1.0 {
        return CutoffValues {
            chi: 1.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    let w = spec.width;
    match spec.profile {
        CutoffProfile::Quintic => {
            let s2 = s * s;
            let s3 = s2 * s;
            CutoffValues {
                chi: s3 * (10.0 + s * (-15.0 + 6.0 * s)),
                d1: 30.0 * s2 * (s - 1.0) * (s - 1.0) / w,
                d2: 60.0 * s * (s - 1.0) * (2.0 * s - 1.0) / (w * w),
            }
        }
        CutoffProfile::Smooth => {
            let (a, a1, a2) = flat(s);
            let (b, b1, b2) = flat(1.0 - s);
            // b(1 - s) differentiates with a sign flip per order
            let (b1, b2) = (-b1, b2);
            let sum = a + b;
            let n = a1 * b - a * b1;
            let n1 = a2 * b - a * b2;
            let d1 = n / (sum * sum);
            let d2 = (n1 * sum - 2.0 * n * (a1 + b1)) / (sum * sum * sum);
            CutoffValues {
                chi: a / sum,
                d1: d1 / w,
                d2: d2 / (w * w),
            }
        }
    }
}
