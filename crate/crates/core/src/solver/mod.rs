//! Time integration of the transformed systems on the periodic-in-`x`,
//! truncated-in-`y` grid.

mod init;
mod mms;
mod physics;
mod problem;
mod run;
mod state;
mod step;

pub use init::{init_from_shape, init_state, init_state_report, InitReport, Profile};
pub use mms::{manufactured_source, pde_rhs_point, Manufactured, ManufacturedSource, PointJet};
pub use physics::{
    check_h, f0, isentropic_point, isentropic_speeds, non_isentropic_point, non_isentropic_speeds,
    Jet,
};
pub use problem::{ExplicitScheme, Forcing, Problem, Stepping};
pub use run::{
    run, run_observed, wall_identity_residual, EnergyRow, RunSpec, Snapshot, Termination,
    Trajectory,
};
pub use state::{apply_bcs, apply_bcs_comps, Level, State, HISTORY_DEPTH};
pub(crate) use step::frame;
pub use step::{
    advance, check_admissible, evaluate, implicit_diffusion, pde_rate, rhs_explicit, stable_dt,
    step_imex, Diffusion, Evaluation,
};
