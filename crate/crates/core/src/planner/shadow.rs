//! The inductive shadowing construction: waypoint by waypoint, plan a
//! guiding path from the current section point to the next curve target,
//! splice the corresponding symbols into the code, and re-anchor the
//! trajectory at γ(0). The frozen code, its trajectory, the section marks
//! P(k), the physical return times τ_i and the piecewise-linear time
//! reparameterization together form the result.

use serde::{Deserialize, Serialize};

use super::curve::{discretize_curve, CurveSpec, Waypoint};
use super::path::{guiding_path, synthesize_segment_code};
use super::PlannerError;
use crate::geometry::{GuidingFieldSet, SlowPoint};
use crate::spanning::check_a3_region;
use crate::symbolic::{compute_constants, trajectory, Code, ConstantsRecord, ReducedMapParams};

/// Default grid resolution for the upfront spanning-region check.
pub const DEFAULT_REGION_RESOLUTION: usize = 9;
/// Default lookahead (in curve parameter) for stall detection.
pub const DEFAULT_STALL_HORIZON: f64 = 1.0;

/// Planner for shadowing runs: the reduced-map model plus the waypoint
/// spacing constant L and the constants record derived from both.
#[derive(Debug, Clone)]
pub struct Planner {
    params: ReducedMapParams,
    constants: ConstantsRecord,
    l: f64,
    region_resolution: usize,
    stall_horizon: f64,
}

impl Planner {
    pub fn new(params: ReducedMapParams, l: f64) -> Result<Self, PlannerError> {
        let constants = compute_constants(&params, l)?;
        Ok(Self {
            params,
            constants,
            l,
            region_resolution: DEFAULT_REGION_RESOLUTION,
            stall_horizon: DEFAULT_STALL_HORIZON,
        })
    }

    pub fn with_region_resolution(mut self, resolution: usize) -> Self {
        self.region_resolution = resolution.max(1);
        self
    }

    pub fn with_stall_horizon(mut self, horizon: f64) -> Self {
        self.stall_horizon = horizon;
        self
    }

    pub fn params(&self) -> &ReducedMapParams {
        &self.params
    }

    pub fn constants(&self) -> &ConstantsRecord {
        &self.constants
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    fn fields(&self) -> &GuidingFieldSet {
        self.params.fields()
    }

    /// Plan a guiding path from `from` to `to`, enforcing the ε(L+A)
    /// displacement hypothesis.
    pub fn guiding_path(
        &self,
        from: &SlowPoint,
        to: &SlowPoint,
    ) -> Result<super::path::GuidingPath, PlannerError> {
        let budget = self.constants.displacement_budget(self.params.epsilon());
        guiding_path(from, to, self.fields(), self.params.epsilon(), Some(budget))
    }

    /// Shadow a curve over `k_max` waypoints.
    pub fn shadow_curve(
        &self,
        curve: &CurveSpec,
        k_max: usize,
    ) -> Result<ShadowResult, PlannerError> {
        let epsilon = self.params.epsilon();
        if epsilon <= 0.0 {
            return Err(PlannerError::Config("shadowing needs ε > 0".into()));
        }
        if epsilon > self.constants.eps_usable {
            return Err(PlannerError::EpsilonAboveUsable {
                epsilon,
                limit: self.constants.eps_usable,
            });
        }
        if k_max == 0 {
            return Err(PlannerError::Config(
                "need at least one waypoint step".into(),
            ));
        }
        let region = check_a3_region(self.fields(), self.region_resolution)?;
        if !region.all_satisfied {
            let failures = region
                .points
                .iter()
                .filter(|p| !p.certificate.satisfied)
                .count();
            return Err(PlannerError::A3RegionUnsatisfied { failures });
        }

        let waypoints = discretize_curve(
            curve,
            epsilon,
            self.l,
            self.fields().domain(),
            k_max,
            self.stall_horizon,
        )?;
        let origin = waypoints[0].target.clone();
        let budget = self.constants.displacement_budget(epsilon);
        let failure_bound = epsilon * (self.constants.k + self.constants.c1 + self.constants.a);

        let mut code = Code::constant(0);
        let mut marks: Vec<i64> = vec![0];
        let mut pre_errors: Vec<f64> = Vec::with_capacity(waypoints.len() - 1);
        let mut traj = trajectory(&code, 0, &origin, (0, 0), &self.params)?;

        for k in 0..waypoints.len() - 1 {
            let target = &waypoints[k + 1].target;
            let here = traj.point(marks[k]).clone();
            let distance = here.distance(target);
            if distance > budget * (1.0 + 1e-9) {
                return Err(PlannerError::DisplacementTooLarge { distance, budget });
            }
            let path = guiding_path(&here, target, self.fields(), epsilon, Some(budget))?;
            let (next_code, n) = synthesize_segment_code(&code, marks[k], &path, &self.params)?;
            let next_mark = marks[k] + n;

            // Endpoint accuracy of the spliced run before re-anchoring: the
            // trajectory through the previous section point.
            let pre = trajectory(
                &next_code,
                marks[k],
                &here,
                (marks[k], next_mark),
                &self.params,
            )?;
            let miss_pre = pre.point(next_mark).distance(target);
            pre_errors.push(miss_pre);

            // Re-anchor at γ(0) and measure the recorded waypoint error.
            traj = trajectory(&next_code, 0, &origin, (0, next_mark), &self.params)?;
            let miss = traj.point(next_mark).distance(target);
            if miss > failure_bound * (1.0 + 1e-9) {
                return Err(PlannerError::ShadowingFailure {
                    waypoint: k + 1,
                    distance: miss,
                    bound: failure_bound,
                });
            }
            code = next_code;
            marks.push(next_mark);
        }

        // Physical return times τ_i accumulated from the periods along the
        // final trajectory.
        let final_mark = *marks.last().expect("at least one mark");
        let mut return_times = Vec::with_capacity(final_mark as usize + 1);
        return_times.push(0.0);
        for i in 0..final_mark {
            let symbol = code.lookup(i + 1);
            let period = self.fields().field(symbol).period_at(traj.point(i))?;
            return_times.push(return_times[i as usize] + period);
        }

        let waypoint_errors: Vec<f64> = marks
            .iter()
            .zip(&waypoints)
            .map(|(&p, wp)| traj.point(p).distance(&wp.target))
            .collect();
        let max_waypoint_error = waypoint_errors.iter().copied().fold(0.0, f64::max);

        Ok(ShadowResult {
            code,
            trajectory: traj.points().to_vec(),
            section_marks: marks,
            waypoints,
            waypoint_errors,
            waypoint_pre_errors: pre_errors,
            return_times,
            constants: self.constants.clone(),
            epsilon,
            max_waypoint_error,
        })
    }
}

/// Everything produced by a shadowing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowResult {
    /// The synthesized code ξ*.
    pub code: Code,
    /// Slow iterates z*_0 … z*_{P(K)} of the final code, anchored at γ(0).
    pub trajectory: Vec<SlowPoint>,
    /// Section indices P(k), one per waypoint (non-decreasing).
    pub section_marks: Vec<i64>,
    /// The waypoint parameters t_k and targets γ(t_k).
    pub waypoints: Vec<Waypoint>,
    /// ‖z*_{P(k)} − γ(t_k)‖ against the final trajectory.
    pub waypoint_errors: Vec<f64>,
    /// Endpoint misses of each spliced run before re-anchoring (k ≥ 1).
    pub waypoint_pre_errors: Vec<f64>,
    /// Physical section-crossing times τ_0 … τ_{P(K)}.
    pub return_times: Vec<f64>,
    pub constants: ConstantsRecord,
    pub epsilon: f64,
    pub max_waypoint_error: f64,
}

impl ShadowResult {
    pub fn final_section(&self) -> i64 {
        *self.section_marks.last().expect("non-empty marks")
    }

    /// Last admissible curve parameter.
    pub fn horizon(&self) -> f64 {
        self.waypoints.last().expect("non-empty waypoints").t
    }

    /// The piecewise-linear time reparameterization 𝒯(t): waypoint
    /// parameters map to the physical times of their section hits, linearly
    /// interpolated in between. Continuous and monotone by construction.
    pub fn reparameterize(&self, t: f64) -> Result<f64, PlannerError> {
        let first = self.waypoints[0].t;
        let last = self.horizon();
        if !t.is_finite() || t < first || t > last {
            return Err(PlannerError::TimeOutOfRange { t, max: last });
        }
        // Largest k with t_k ≤ t.
        let mut k = match self
            .waypoints
            .binary_search_by(|wp| wp.t.partial_cmp(&t).expect("finite waypoint times"))
        {
            Ok(exact) => return Ok(self.tau_at_mark(exact)),
            Err(insert) => insert - 1,
        };
        if k + 1 >= self.waypoints.len() {
            k = self.waypoints.len() - 2;
        }
        let t_k = self.waypoints[k].t;
        let t_next = self.waypoints[k + 1].t;
        let tau_k = self.tau_at_mark(k);
        let tau_next = self.tau_at_mark(k + 1);
        Ok(tau_k + (tau_next - tau_k) / (t_next - t_k) * (t - t_k))
    }

    fn tau_at_mark(&self, k: usize) -> f64 {
        self.return_times[self.section_marks[k] as usize]
    }

    /// The trajectory read at a physical time, linearly interpolated between
    /// section hits.
    pub fn slow_state_at(&self, physical_time: f64) -> Result<SlowPoint, PlannerError> {
        let last = *self.return_times.last().expect("non-empty return times");
        if !physical_time.is_finite() || physical_time < 0.0 || physical_time > last {
            return Err(PlannerError::TimeOutOfRange {
                t: physical_time,
                max: last,
            });
        }
        let i = match self
            .return_times
            .binary_search_by(|tau| tau.partial_cmp(&physical_time).expect("finite times"))
        {
            Ok(exact) => return Ok(self.trajectory[exact].clone()),
            Err(insert) => insert - 1,
        };
        let tau_i = self.return_times[i];
        let tau_next = self.return_times[i + 1];
        let theta = (physical_time - tau_i) / (tau_next - tau_i);
        let coords = self.trajectory[i].coords()
            + (self.trajectory[i + 1].coords() - self.trajectory[i].coords()) * theta;
        SlowPoint::from_vector(coords).map_err(PlannerError::from)
    }

    /// Composite read-out z*(𝒯(t)).
    pub fn shadow_state(&self, t: f64) -> Result<SlowPoint, PlannerError> {
        self.slow_state_at(self.reparameterize(t)?)
    }

    /// Trajectory CSV with the fixed column set i, symbol, u…, v…, tau.
    pub fn to_csv(&self, fields: &GuidingFieldSet) -> String {
        let d = fields.dim();
        let mut header = String::from("i,symbol");
        for j in 1..=d {
            header.push_str(&format!(",u{j}"));
        }
        for j in 1..=d {
            header.push_str(&format!(",v{j}"));
        }
        header.push_str(",tau\n");
        let mut out = header;
        for (i, point) in self.trajectory.iter().enumerate() {
            let symbol = fields.label(self.code.lookup(i as i64));
            out.push_str(&format!("{i},{symbol}"));
            for c in point.coords().iter() {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(&format!(",{}\n", self.return_times[i]));
        }
        out
    }
}

/// Free-function form of the time reparameterization.
pub fn reparameterize(result: &ShadowResult, t: f64) -> Result<f64, PlannerError> {
    result.reparameterize(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{example_system_default, DomainBox};
    use crate::planner::curve::ParametricCurve;
    use crate::symbolic::FastStateModel;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn planner(eta: f64, epsilon: f64) -> Planner {
        let domain = DomainBox::symmetric(1, 1.0).unwrap();
        let fields = example_system_default(0.1, domain).unwrap();
        let fast = FastStateModel::with_default_embed(0.5, 0.3, 3, 2).unwrap();
        let params = ReducedMapParams::new(fields, fast, eta, epsilon).unwrap();
        Planner::new(params, 1.0).unwrap()
    }

    fn line(direction: [f64; 2]) -> CurveSpec {
        CurveSpec::parametric(ParametricCurve::Line {
            start: SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            velocity: DVector::from_row_slice(&direction),
        })
        .unwrap()
    }

    #[test]
    fn constant_curve_has_zero_error() {
        let planner = planner(0.0, 1e-2);
        let z0 = SlowPoint::new(vec![0.2, -0.1]).unwrap();
        let curve = CurveSpec::polyline(vec![z0.clone()]).unwrap();
        let result = planner.shadow_curve(&curve, 6).unwrap();
        assert_eq!(result.final_section(), 0);
        assert_eq!(result.max_waypoint_error, 0.0);
        // All section marks coincide; the reparameterization is flat.
        for k in 0..result.waypoints.len() {
            let t = result.waypoints[k].t;
            assert_eq!(result.reparameterize(t).unwrap(), 0.0);
        }
        let state = result.shadow_state(3.5).unwrap();
        assert_eq!(state, z0);
    }

    #[test]
    fn axis_line_is_shadowed_exactly_in_the_decoupled_limit() {
        // γ(t) = (t, 0): the waypoint displacement is ε·L·e_u = ε·10·X_c2,
        // an exact integer multiple, so rounding cost vanishes.
        let planner = planner(0.0, 1e-2);
        let result = planner.shadow_curve(&line([1.0, 0.0]), 15).unwrap();
        let rounding_slack = planner.params().epsilon() * planner.constants().max_drift_norm;
        for (k, err) in result.waypoint_errors.iter().enumerate() {
            assert!(
                *err <= rounding_slack + 1e-12,
                "waypoint {k} missed by {err}"
            );
        }
        // Ten section returns per waypoint.
        assert_eq!(result.section_marks[1] - result.section_marks[0], 10);
    }

    #[test]
    fn generic_line_waypoints_hit_within_rounding_slack() {
        let planner = planner(0.0, 1e-2);
        let result = planner
            .shadow_curve(&line([1.0_f64.cos(), 1.0_f64.sin()]), 20)
            .unwrap();
        // Per-segment ceiling slack, two segments at d = 1.
        let slack =
            2.0 * planner.params().epsilon() * planner.constants().max_drift_norm * (1.0 + 1e-9);
        for err in &result.waypoint_errors {
            assert!(*err <= slack, "error {err} above slack {slack}");
        }
        for err in &result.waypoint_pre_errors {
            assert!(*err <= slack);
        }
    }

    #[test]
    fn waypoint_errors_respect_the_endpoint_budgets() {
        let planner = planner(0.1, 1e-2);
        let result = planner.shadow_curve(&line([0.6, -0.4]), 20).unwrap();
        let eps = result.epsilon;
        let c = &result.constants;
        for err in &result.waypoint_pre_errors {
            assert!(*err <= eps * c.a);
        }
        for err in &result.waypoint_errors {
            assert!(*err <= eps * (c.k + c.a));
        }
    }

    #[test]
    fn code_is_stable_under_later_updates() {
        let planner = planner(0.1, 1e-2);
        let curve = line([0.5, 0.5]);
        let short = planner.shadow_curve(&curve, 5).unwrap();
        let long = planner.shadow_curve(&curve, 10).unwrap();
        let p5 = short.final_section();
        assert_eq!(p5, long.section_marks[5]);
        for i in -3..=p5 {
            assert_eq!(short.code.lookup(i), long.code.lookup(i));
        }
        // Re-anchoring consistency: later updates move the realized
        // trajectory below P(5) by at most εK.
        let k_eps = long.epsilon * long.constants.k;
        for i in 0..=p5 as usize {
            assert_eq!(long.trajectory[0], short.trajectory[0]);
            let gap = long.trajectory[i].distance(&short.trajectory[i]);
            assert!(gap <= k_eps, "index {i}: drift {gap} above εK = {k_eps}");
        }
    }

    #[test]
    fn between_waypoint_iterates_stay_near_their_target() {
        let planner = planner(0.1, 1e-2);
        let curve = CurveSpec::parametric(ParametricCurve::Circle {
            center: SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            radius: 0.5,
            angular_speed: 1.0,
            phase: 0.0,
        })
        .unwrap();
        let result = planner.shadow_curve(&curve, 25).unwrap();
        let c = &result.constants;
        let bound = result.epsilon * (c.k + c.c1 + c.a);
        for k in 1..result.section_marks.len() {
            let target = &result.waypoints[k].target;
            for i in result.section_marks[k - 1]..=result.section_marks[k] {
                let gap = result.trajectory[i as usize].distance(target);
                assert!(
                    gap <= bound,
                    "iterate {i} sits {gap:.3e} from waypoint {k}, bound {bound:.3e}"
                );
            }
        }
    }

    #[test]
    fn reparameterization_is_linear_for_uniform_spacing() {
        let planner = planner(0.0, 1e-2);
        let result = planner.shadow_curve(&line([1.0, 0.0]), 10).unwrap();
        // Unit periods and uniform waypoint spacing: 𝒯 is globally linear.
        let t0 = result.waypoints[0].t;
        let t_end = result.horizon();
        let tau_end = result.reparameterize(t_end).unwrap();
        for j in 0..=20 {
            let t = t0 + (t_end - t0) * j as f64 / 20.0;
            let tau = result.reparameterize(t).unwrap();
            assert_relative_eq!(
                tau,
                tau_end * (t - t0) / (t_end - t0),
                max_relative = 5e-2,
                epsilon = 1e-9
            );
        }
        // Knot values are exact.
        for (k, wp) in result.waypoints.iter().enumerate() {
            let tau = result.reparameterize(wp.t).unwrap();
            assert_eq!(tau, result.return_times[result.section_marks[k] as usize]);
        }
    }

    #[test]
    fn reparameterization_is_monotone_and_continuous() {
        let planner = planner(0.1, 1e-2);
        let curve = CurveSpec::parametric(ParametricCurve::Circle {
            center: SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            radius: 0.5,
            angular_speed: 1.0,
            phase: 0.0,
        })
        .unwrap();
        let result = planner.shadow_curve(&curve, 12).unwrap();
        let t_end = result.horizon();
        let mut prev = result.reparameterize(0.0).unwrap();
        let samples = 400;
        for j in 1..=samples {
            let t = t_end * (j as f64 / samples as f64);
            let tau = result.reparameterize(t).unwrap();
            assert!(tau >= prev, "reparameterization must be monotone");
            // Continuity: adjacent samples move by at most a few periods.
            assert!(tau - prev <= 1.0 + t_end / samples as f64 * 1e3);
            prev = tau;
        }
    }

    #[test]
    fn out_of_range_times_error() {
        let planner = planner(0.0, 1e-2);
        let result = planner.shadow_curve(&line([1.0, 0.0]), 5).unwrap();
        assert!(matches!(
            result.reparameterize(result.horizon() + 1.0),
            Err(PlannerError::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            result.slow_state_at(-1.0),
            Err(PlannerError::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn epsilon_gate_blocks_oversized_epsilon() {
        let domain = DomainBox::symmetric(1, 1.0).unwrap();
        let fields = example_system_default(0.1, domain).unwrap();
        let fast = FastStateModel::with_default_embed(0.5, 0.3, 3, 2).unwrap();
        let params = ReducedMapParams::new(fields, fast, 0.1, 0.5).unwrap();
        let planner = Planner::new(params, 1.0).unwrap();
        assert!(matches!(
            planner.shadow_curve(&line([1.0, 0.0]), 5),
            Err(PlannerError::EpsilonAboveUsable { .. })
        ));
    }

    #[test]
    fn csv_has_the_fixed_column_layout() {
        let planner = planner(0.0, 1e-2);
        let result = planner.shadow_curve(&line([1.0, 0.0]), 3).unwrap();
        let csv = result.to_csv(planner.params().fields());
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "i,symbol,u1,v1,tau");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,c"));
        assert_eq!(csv.lines().count(), result.trajectory.len() + 1);
    }
}
