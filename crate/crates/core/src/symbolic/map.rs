//! The reduced slow dynamics on the section sequence:
//!
//!   z_{i+1} = z_i + ε·[ T_{ξ_{i+1}}(z_i)·X_{ξ_{i+1}}(z_i) + η·⟨x_i, y_{i+1}⟩·w ]
//!
//! where (x_i, y_{i+1}) are the fast surrogates of the code around index i,
//! ⟨·,·⟩ is the fixed bilinear read-out and w a fixed unit direction. With a
//! constant code and η = 0 the step reduces to z + ε·T_c·X_c.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::code::Code;
use super::fast::{fast_state_with_epsilon, FastStateModel};
use super::SymbolicError;
use crate::geometry::{GuidingFieldSet, GuidingHamiltonian, SlowPoint};

/// Fraction of the domain diameter a trajectory may stray outside the box
/// before the step errors out.
pub const ESCAPE_FRACTION: f64 = 0.1;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 50;

/// Everything the reduced map needs: the guiding fields, the fast-state
/// model, the coupling strength η of fast state into the slow step, and the
/// slow parameter ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedMapParams {
    fields: GuidingFieldSet,
    fast: FastStateModel,
    eta: f64,
    epsilon: f64,
    coupling: DVector<f64>,
}

impl ReducedMapParams {
    /// η must be nonnegative and ε nonnegative (ε = 0 is the frozen limit;
    /// the planner additionally requires ε > 0 and below the usable bound).
    pub fn new(
        fields: GuidingFieldSet,
        fast: FastStateModel,
        eta: f64,
        epsilon: f64,
    ) -> Result<Self, SymbolicError> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(SymbolicError::Config(format!(
                "coupling strength must be a nonnegative finite number, got {eta}"
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(SymbolicError::Config(format!(
                "slow parameter must be a nonnegative finite number, got {epsilon}"
            )));
        }
        if fast.symbols() != fields.len() {
            return Err(SymbolicError::Config(format!(
                "fast model embeds {} symbols but the field set has {}",
                fast.symbols(),
                fields.len()
            )));
        }
        let n = fields.space_dim();
        let coupling = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        Ok(Self {
            fields,
            fast,
            eta,
            epsilon,
            coupling,
        })
    }

    pub fn fields(&self) -> &GuidingFieldSet {
        &self.fields
    }

    pub fn fast(&self) -> &FastStateModel {
        &self.fast
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The fixed unit direction w multiplying the fast read-out.
    pub fn coupling_direction(&self) -> &DVector<f64> {
        &self.coupling
    }

    /// Same model at a different ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, SymbolicError> {
        Self::new(self.fields.clone(), self.fast.clone(), self.eta, epsilon)
    }

    fn field_for(&self, symbol: usize) -> Result<&GuidingHamiltonian, SymbolicError> {
        if symbol >= self.fields.len() {
            return Err(SymbolicError::UnknownSymbol {
                symbol,
                count: self.fields.len(),
            });
        }
        Ok(self.fields.field(symbol))
    }
}

/// One forward application of the reduced map at index i.
pub fn step(
    z: &SlowPoint,
    index: i64,
    code: &Code,
    params: &ReducedMapParams,
) -> Result<SlowPoint, SymbolicError> {
    let displacement = step_displacement(z, index, code, params)?;
    let next = z.translated(&displacement);
    guard_escape(&next, index + 1, params)?;
    Ok(next)
}

/// ε·φ evaluated at (z, i) without applying it.
fn step_displacement(
    z: &SlowPoint,
    index: i64,
    code: &Code,
    params: &ReducedMapParams,
) -> Result<DVector<f64>, SymbolicError> {
    let symbol = code.lookup(index + 1);
    let field = params.field_for(symbol)?;
    let drift = field.drift(z)?;
    let pair = fast_state_with_epsilon(code, index, z, &params.fast, params.epsilon)?;
    let readout = pair.x.dot(&pair.y_next);
    Ok((drift + &params.coupling * (params.eta * readout)) * params.epsilon)
}

fn guard_escape(z: &SlowPoint, index: i64, params: &ReducedMapParams) -> Result<(), SymbolicError> {
    let excess = params.fields.domain().distance_outside(z);
    if excess > ESCAPE_FRACTION * params.fields.domain().diameter() {
        return Err(SymbolicError::Escape { index, excess });
    }
    Ok(())
}

/// Solve z + ε·φ(i, z) = z_next for z, by Newton from z_next. The forward
/// map is an ε-perturbation of the identity, so this converges immediately
/// for polynomial actions (the iteration matrix is constant).
fn backward_step(
    z_next: &SlowPoint,
    index: i64,
    code: &Code,
    params: &ReducedMapParams,
) -> Result<SlowPoint, SymbolicError> {
    let symbol = code.lookup(index + 1);
    let field = params.field_for(symbol)?;
    let pair = fast_state_with_epsilon(code, index, z_next, &params.fast, params.epsilon)?;
    let readout = pair.x.dot(&pair.y_next);
    let perturbation = &params.coupling * (params.eta * readout);

    let n = z_next.space_dim();
    let newton_matrix = DMatrix::identity(n, n) + field.drift_jacobian() * params.epsilon;
    let lu = newton_matrix.lu();

    let mut zeta = z_next.coords().clone();
    for _ in 0..NEWTON_MAX_ITERS {
        let here = SlowPoint::from_vector(zeta.clone())
            .map_err(|_| SymbolicError::BackwardStepDiverged { index })?;
        let drift = field.drift(&here)?;
        let residual = &zeta + (drift + &perturbation) * params.epsilon - z_next.coords();
        if residual.norm() <= NEWTON_TOL {
            guard_escape(&here, index, params)?;
            return Ok(here);
        }
        let delta = lu
            .solve(&residual)
            .ok_or(SymbolicError::BackwardStepDiverged { index })?;
        zeta -= delta;
    }
    Err(SymbolicError::BackwardStepDiverged { index })
}

/// A slow trajectory over a contiguous index range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    start_index: i64,
    points: Vec<SlowPoint>,
}

impl TrajectorySegment {
    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn end_index(&self) -> i64 {
        self.start_index + self.points.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: i64) -> &SlowPoint {
        &self.points[(index - self.start_index) as usize]
    }

    pub fn get(&self, index: i64) -> Option<&SlowPoint> {
        if index < self.start_index || index > self.end_index() {
            None
        } else {
            Some(self.point(index))
        }
    }

    pub fn points(&self) -> &[SlowPoint] {
        &self.points
    }
}

/// The trajectory through `anchor` at `anchor_index`, iterated forward to
/// `range.1` and backward (by Newton inversion) to `range.0`.
pub fn trajectory(
    code: &Code,
    anchor_index: i64,
    anchor: &SlowPoint,
    range: (i64, i64),
    params: &ReducedMapParams,
) -> Result<TrajectorySegment, SymbolicError> {
    let (lo, hi) = range;
    if lo > hi || anchor_index < lo || anchor_index > hi {
        return Err(SymbolicError::Config(format!(
            "anchor index {anchor_index} must lie inside the range [{lo}, {hi}]"
        )));
    }
    let len = (hi - lo + 1) as usize;
    let mut points = vec![anchor.clone(); len];
    let slot = |i: i64| (i - lo) as usize;

    let mut z = anchor.clone();
    for i in anchor_index..hi {
        z = step(&z, i, code, params)?;
        points[slot(i + 1)] = z.clone();
    }
    let mut z = anchor.clone();
    for i in (lo..anchor_index).rev() {
        z = backward_step(&z, i, code, params)?;
        points[slot(i)] = z.clone();
    }
    Ok(TrajectorySegment {
        start_index: lo,
        points,
    })
}
