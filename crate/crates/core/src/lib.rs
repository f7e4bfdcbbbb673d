//! Steering slow Hamiltonian dynamics along arbitrary curves by switching
//! symbol codes.
//!
//! The crate is organized around the pipeline:
//!
//! * [`geometry`] — the slow phase space, action Hamiltonians J_c and their
//!   guiding vector fields X_c, including the worked three-action example.
//! * [`spanning`] — certificates that 0 lies inside the convex hull of the
//!   action gradients, and conic decomposition of displacement vectors into
//!   nonnegative guiding times.
//! * [`symbolic`] — symbol codes, synthetic fast states with exponential
//!   code-locality, the reduced slow section map they drive, and the
//!   quantitative constants (K, C₁, C₂, A, usable ε).
//! * [`planner`] — curve discretization, guiding paths, code synthesis and
//!   the inductive construction that shadows a prescribed curve, together
//!   with the piecewise-linear time reparameterization.
//! * [`verify`] — seeded experiment drivers that measure the mechanism's
//!   bounds empirically and report observed/theoretical ratios.
#![doc = include_str!("../../../README.md")]

pub mod geometry;
pub mod planner;
pub mod spanning;
pub mod symbolic;
pub mod verify;

pub use geometry::{
    example_system, example_system_default, hamiltonian_field, DomainBox, GeometryError,
    GradientSpec, GuidingFieldSet, GuidingHamiltonian, PolyField, SlowPoint,
};
pub use planner::{
    discretize_curve, reparameterize, CurveSpec, GuidingPath, ParametricCurve, PathSegment,
    Planner, PlannerError, ShadowResult, Waypoint,
};
pub use spanning::{
    bound_d, check_a3, check_a3_region, decompose, decompose_auto, select_cone_basis, GuidingTimes,
    RegionCertificate, SpanCertificate, SpanningError,
};
pub use symbolic::{
    compute_constants, fast_state, step, trajectory, Code, ConstantsRecord, FastStateModel,
    ReducedMapParams, SymbolicError, TrajectorySegment,
};
pub use verify::{
    epsilon_sweep, same_code_drift_experiment, shadow_error, uniform_closeness_experiment,
    ExperimentReport, SweepReport, VerifyError,
};
