//! Reduced symbolic dynamics: codes over the action labels, synthetic fast
//! states with the normal-hyperbolicity estimates, the slow section map they
//! drive, and the quantitative constants of the mechanism.

mod code;
mod constants;
mod fast;
mod map;

pub use code::Code;
pub use constants::{
    compute_constants, same_code_gap_constant, uniform_closeness_constant, ConstantsRecord,
};
pub use fast::{
    default_embeddings, embed_cap, fast_state, fast_state_with_epsilon, truncation_window,
    FastPair, FastStateModel, TRUNCATION_FLOOR,
};
pub use map::{step, trajectory, ReducedMapParams, TrajectorySegment, ESCAPE_FRACTION};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum SymbolicError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("code window must be non-empty")]
    EmptyWindow,
    #[error("symbol {symbol} is outside the alphabet of {count} labels")]
    UnknownSymbol { symbol: usize, count: usize },
    #[error("invalid fast-state model: {0}")]
    BadFastModel(String),
    #[error("trajectory escaped the domain at index {index} (excess {excess:.3e})")]
    Escape { index: i64, excess: f64 },
    #[error("backward step failed to converge at index {index}")]
    BackwardStepDiverged { index: i64 },
    #[error("code parse error: {0}")]
    CodeParse(String),
    #[error("invalid reduced-map configuration: {0}")]
    Config(String),
}
