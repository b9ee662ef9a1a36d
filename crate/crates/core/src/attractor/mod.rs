//! Trapping regions, attracting sets and the attracting current.

mod checks;
mod region;
mod runs;

pub use checks::{
    check_star_shaped, check_trapping, jacobian_contraction, random_base_point, sample_boundary, sample_region,
    JacobianReport, StarShapeReport, StarShapeViolation, TrappingReport,
};
pub use region::{RegionFile, RegionKind, TrappingRegion};
pub use runs::{
    attracting_current, attracting_set, counterexample_run, lebesgue_preimage_stat, one_sided_hausdorff,
    potential_comparison, ConvergenceDiagnostic, CounterexampleReport, CurrentOptions, PotentialReport,
    PreimageStatReport, RunRegistry,
};
