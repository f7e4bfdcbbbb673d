//! Guiding paths: piecewise-linear displacements along selected guiding
//! fields, and the code updates that realize them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::geometry::{GuidingFieldSet, SlowPoint};
use crate::spanning::{decompose, select_cone_basis};
use crate::symbolic::{Code, ReducedMapParams};

/// Tolerance shaving the ceiling rule at integer boundaries.
const CEIL_TOL: f64 = 1e-9;

/// One leg of a guiding path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    /// Selected field index σ(j).
    pub field_index: usize,
    /// Guiding time a_j ≥ 0.
    pub guiding_time: f64,
    /// ε·a_j·X_{σ(j)} evaluated at the path start.
    pub vector: DVector<f64>,
}

/// A piecewise-linear path from `start` whose legs follow guiding fields
/// evaluated at the path start. `end` is the exact segment-vector sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingPath {
    pub start: SlowPoint,
    pub segments: Vec<PathSegment>,
    pub end: SlowPoint,
    pub epsilon: f64,
}

impl GuidingPath {
    /// Number of legs with positive guiding time.
    pub fn active_segments(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.guiding_time > 0.0)
            .count()
    }

    /// Start point of each leg (the path start plus the previous vectors).
    pub fn segment_starts(&self) -> Vec<SlowPoint> {
        let mut starts = Vec::with_capacity(self.segments.len());
        let mut here = self.start.clone();
        for segment in &self.segments {
            starts.push(here.clone());
            here = here.translated(&segment.vector);
        }
        starts
    }

    pub fn total_guiding_time(&self) -> f64 {
        self.segments.iter().map(|s| s.guiding_time).sum()
    }
}

/// Plan the guiding path from `z_from` to `z_to`.
///
/// The displacement is decomposed as v = Σ ε·a_j·X_{σ(j)}(z_from) with
/// nonnegative guiding times. When `max_displacement` is given, ‖v‖ must
/// stay within it (the ε(L+A) hypothesis of the code-update construction).
pub fn guiding_path(
    z_from: &SlowPoint,
    z_to: &SlowPoint,
    fields: &GuidingFieldSet,
    epsilon: f64,
    max_displacement: Option<f64>,
) -> Result<GuidingPath, PlannerError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(PlannerError::Config(format!(
            "guiding paths need ε > 0, got {epsilon}"
        )));
    }
    let v = z_to.coords() - z_from.coords();
    let distance = v.norm();
    if let Some(budget) = max_displacement {
        if distance > budget * (1.0 + 1e-9) {
            return Err(PlannerError::DisplacementTooLarge { distance, budget });
        }
    }
    let scaled = &v / epsilon;
    let selection = select_cone_basis(&scaled, fields, z_from)?;
    let times = decompose(&scaled, fields, z_from, &selection)?;

    let mut segments = Vec::with_capacity(selection.len());
    let mut end = z_from.coords().clone();
    for (slot, &field_index) in times.selection.iter().enumerate() {
        let a = times.times[slot];
        let x = fields.guiding_field(field_index, z_from)?;
        let vector = x * (epsilon * a);
        end += &vector;
        segments.push(PathSegment {
            field_index,
            guiding_time: a,
            vector,
        });
    }
    Ok(GuidingPath {
        start: z_from.clone(),
        segments,
        end: SlowPoint::from_vector(end)?,
        epsilon,
    })
}

/// Apply the code-update rule for one guiding path at section index
/// `splice_at`: the code is preserved up to and including `splice_at`, then
/// each leg appends ⌈a_j / T_{σ(j)}⌉ copies of its symbol (period taken at
/// the leg's start point), and the right tail becomes the last appended
/// symbol. Returns the updated code and the number N of appended symbols.
pub fn synthesize_segment_code(
    code: &Code,
    splice_at: i64,
    path: &GuidingPath,
    params: &ReducedMapParams,
) -> Result<(Code, i64), PlannerError> {
    let fields = params.fields();
    let starts = path.segment_starts();
    let mut symbols: Vec<usize> = Vec::new();
    for (segment, start) in path.segments.iter().zip(&starts) {
        if segment.guiding_time <= 0.0 {
            continue;
        }
        let period = fields.field(segment.field_index).period_at(start)?;
        // Rounding guard: a/T sitting one ulp above an integer must not
        // produce an extra section return.
        let count = ((segment.guiding_time / period) - CEIL_TOL).ceil().max(0.0) as i64;
        symbols.extend(std::iter::repeat_n(segment.field_index, count as usize));
    }
    let n = symbols.len() as i64;
    if symbols.is_empty() {
        return Ok((code.clone(), 0));
    }
    let tail = *symbols.last().expect("non-empty symbol run");
    Ok((code.splice_after(splice_at, &symbols, tail), n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        example_system, example_system_default, DomainBox, GradientSpec, GuidingFieldSet,
        GuidingHamiltonian, PolyField,
    };
    use crate::symbolic::FastStateModel;
    use approx::assert_relative_eq;

    fn fields() -> GuidingFieldSet {
        example_system_default(0.1, DomainBox::symmetric(1, 1.0).unwrap()).unwrap()
    }

    fn params() -> ReducedMapParams {
        let fast = FastStateModel::with_default_embed(1.0, 0.5, 3, 2).unwrap();
        ReducedMapParams::new(fields(), fast, 0.0, 1e-3).unwrap()
    }

    #[test]
    fn coincident_endpoints_give_an_empty_path() {
        let z = SlowPoint::new(vec![0.1, 0.2]).unwrap();
        let path = guiding_path(&z, &z, &fields(), 1e-3, None).unwrap();
        assert_eq!(path.active_segments(), 0);
        assert!(path.segments.iter().all(|s| s.guiding_time == 0.0));
        assert_eq!(path.end, z);
    }

    #[test]
    fn negative_u_displacement_uses_two_legs() {
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let eps = 1e-3;
        let to = SlowPoint::new(vec![-0.1 * eps, 0.0]).unwrap();
        let path = guiding_path(&z, &to, &fields(), eps, None).unwrap();
        let indices: Vec<usize> = path.segments.iter().map(|s| s.field_index).collect();
        assert_eq!(indices, vec![0, 2]);
        assert_relative_eq!(path.segments[0].guiding_time, 1.0, max_relative = 1e-9);
        assert_relative_eq!(path.segments[1].guiding_time, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn path_end_matches_target() {
        let z = SlowPoint::new(vec![0.05, -0.1]).unwrap();
        let eps = 1e-3;
        let to = SlowPoint::new(vec![0.05 + 3e-4, -0.1 - 2e-4]).unwrap();
        let path = guiding_path(&z, &to, &fields(), eps, None).unwrap();
        let err = path.end.distance(&to);
        assert!(err <= 1e-10 * (1.0 + to.coords().norm()));
        // end is exactly the segment-vector sum
        let mut acc = z.coords().clone();
        for s in &path.segments {
            acc += &s.vector;
        }
        assert_eq!(acc.as_slice(), path.end.coords().as_slice());
    }

    #[test]
    fn displacement_budget_is_enforced() {
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let to = SlowPoint::new(vec![0.5, 0.0]).unwrap();
        assert!(matches!(
            guiding_path(&z, &to, &fields(), 1e-3, Some(0.01)),
            Err(PlannerError::DisplacementTooLarge { .. })
        ));
    }

    #[test]
    fn ceiling_rule_appends_rounded_up_copies() {
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let path = GuidingPath {
            start: z.clone(),
            segments: vec![PathSegment {
                field_index: 1,
                guiding_time: 2.5,
                vector: DVector::zeros(2),
            }],
            end: z,
            epsilon: 1e-3,
        };
        let code = Code::constant(0);
        let (updated, n) = synthesize_segment_code(&code, 0, &path, &params()).unwrap();
        assert_eq!(n, 3);
        assert_eq!(updated.lookup(0), 0);
        assert_eq!(updated.lookup(1), 1);
        assert_eq!(updated.lookup(3), 1);
        assert_eq!(updated.lookup(4), 1); // right tail
    }

    #[test]
    fn empty_path_leaves_code_unchanged() {
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let path = guiding_path(&z, &z, &fields(), 1e-3, None).unwrap();
        let code = Code::constant(2);
        let (updated, n) = synthesize_segment_code(&code, 5, &path, &params()).unwrap();
        assert_eq!(n, 0);
        assert_eq!(updated, code);
    }

    #[test]
    fn integer_guiding_times_append_exactly() {
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let eps = 1e-3;
        let to = SlowPoint::new(vec![-0.1 * eps, 0.0]).unwrap();
        let path = guiding_path(&z, &to, &fields(), eps, None).unwrap();
        let code = Code::constant(1);
        let (updated, n) = synthesize_segment_code(&code, 0, &path, &params()).unwrap();
        assert_eq!(n, 2);
        assert_eq!(updated.lookup(1), 0); // one copy of c1
        assert_eq!(updated.lookup(2), 2); // one copy of c3
        assert_eq!(updated.right_tail(), 2);
    }

    #[test]
    fn periods_are_taken_at_segment_starts() {
        // Period T(u, v) = 1 + u varies along the path; the first leg moves
        // in u, so the second leg sees a different period.
        let domain = DomainBox::symmetric(1, 1.0).unwrap();
        let period = PolyField::affine(1.0, vec![1.0, 0.0]).unwrap();
        let mk = |label: &str, grad: [f64; 2]| {
            GuidingHamiltonian::new(
                label,
                PolyField::affine(0.0, grad.to_vec()).unwrap(),
                GradientSpec::Analytic,
                period.clone(),
            )
            .unwrap()
        };
        let fields = GuidingFieldSet::new(
            vec![
                mk("c1", [0.1, 0.0]),
                mk("c2", [0.0, 0.1]),
                mk("c3", [-0.1, -0.1]),
            ],
            domain,
        )
        .unwrap();
        let fast = FastStateModel::with_default_embed(1.0, 0.5, 3, 2).unwrap();
        let params = ReducedMapParams::new(fields.clone(), fast, 0.0, 1e-2).unwrap();

        let z = SlowPoint::new(vec![0.5, 0.0]).unwrap();
        let eps = 1e-2;
        // Move by ε·(−0.1, 0): legs c1 then c3 with unit guiding times.
        let to = SlowPoint::new(vec![0.5 - 0.1 * eps, 0.0]).unwrap();
        let path = guiding_path(&z, &to, &fields, eps, None).unwrap();
        let code = Code::constant(0);
        let (_, n) = synthesize_segment_code(&code, 0, &path, &params).unwrap();
        // First leg: a = 1, T(0.5) = 1.5 → 1 copy. Second leg starts after a
        // pure-v displacement (X_c1 ∝ e_v), so u is still 0.5 → 1 copy.
        assert_eq!(n, 2);
    }

    #[test]
    fn mu_scaling_changes_guiding_times_inversely() {
        let strong = example_system(
            0.2,
            [0.0; 3],
            [1.0; 3],
            DomainBox::symmetric(1, 1.0).unwrap(),
        )
        .unwrap();
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let eps = 1e-3;
        let to = SlowPoint::new(vec![-0.1 * eps, 0.0]).unwrap();
        let path = guiding_path(&z, &to, &strong, eps, None).unwrap();
        for s in &path.segments {
            if s.guiding_time > 0.0 {
                assert_relative_eq!(s.guiding_time, 0.5, max_relative = 1e-9);
            }
        }
    }
}
