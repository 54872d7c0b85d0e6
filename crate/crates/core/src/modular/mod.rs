//! Stage 2 of the two-step pipeline: informative truncated priors on the
//! unidentified surveillance probability and bound, reconstruction of the
//! partially identified cheating probability, refit-free sensitivity runs,
//! intercept calibration, and prior-data contradiction checks.

mod basis;
mod check;
mod spec;
mod stage2;

pub use basis::{make_basis, BasisSpec, TransformKind, VarTransform};
pub use check::model_check_residual;
pub use spec::{calibrate_intercept, Link, SurveillanceSpec};
pub use stage2::{
    prevalence, reconstruct_p, run_stage2, sample_c, sample_theta, sensitivity_run,
    ConflictEvent, GroupPrevalence, PrevalenceSummary, SensitivityRun, Stage2Options,
    Stage2Output, ThetaDraw,
};
