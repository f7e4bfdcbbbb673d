//! Guiding-path planner: curve discretization, per-segment code synthesis,
//! the inductive shadowing construction and the time reparameterization.

mod curve;
mod path;
mod shadow;

pub use curve::{discretize_curve, CurveSpec, ParametricCurve, Waypoint, BISECTION_TOL};
pub use path::{guiding_path, synthesize_segment_code, GuidingPath, PathSegment};
pub use shadow::{
    reparameterize, Planner, ShadowResult, DEFAULT_REGION_RESOLUTION, DEFAULT_STALL_HORIZON,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::spanning::SpanningError;
use crate::symbolic::SymbolicError;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spanning(#[from] SpanningError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("curve leaves the domain box at t = {t}")]
    CurveOutsideDomain { t: f64 },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("ε = {epsilon} exceeds the usable bound {limit:.6e}")]
    EpsilonAboveUsable { epsilon: f64, limit: f64 },
    #[error("positive-spanning condition fails at {failures} grid point(s)")]
    A3RegionUnsatisfied { failures: usize },
    #[error("waypoint displacement {distance:.6e} exceeds the ε(L+A) budget {budget:.6e}")]
    DisplacementTooLarge { distance: f64, budget: f64 },
    #[error(
        "shadowing failed at waypoint {waypoint}: endpoint miss {distance:.6e} above ε(K+C₁+A) = {bound:.6e}"
    )]
    ShadowingFailure {
        waypoint: usize,
        distance: f64,
        bound: f64,
    },
    #[error("time {t} outside the parameterized range [0, {max}]")]
    TimeOutOfRange { t: f64, max: f64 },
    #[error("invalid planner configuration: {0}")]
    Config(String),
}
