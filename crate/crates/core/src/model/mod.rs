//! Grid-free mathematical kernel: constants, coefficient algebra, symmetrizer,
//! outflow traces, cut-off and residual terms. Everything here is a pure
//! function of its inputs.

pub mod coeffs;
pub mod cutoff;
pub mod matrices;
pub mod outflow;
pub mod params;
pub mod residual;

pub use coeffs::{coeffs_unchecked, derive_a, isentropic_coeffs, pressure_from_h, CoefficientSet};
pub use cutoff::{cutoff, CutoffProfile, CutoffSpec, CutoffValues};
pub use matrices::{
    build_matrices, full_point, matrices_at, symmetrizer_inverse, weights, FullPoint, MatrixSet,
    NonIsentropicPoint,
};
pub use outflow::{
    make_outflow, validate_outflow, BoundaryTemperature, Envelope, EnvelopeShape, OutflowFamily,
    OutflowSpec, Traces, ValidationReport,
};
pub use params::{Margins, ModelParams, Regime};
pub use residual::residuals;
