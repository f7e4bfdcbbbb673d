//! Curves in the slow phase space and their waypoint discretization.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::geometry::{DomainBox, SlowPoint};

/// Relative tolerance of the waypoint crossing search (fraction of εL).
pub const BISECTION_TOL: f64 = 1e-3;

/// Parametric curve presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParametricCurve {
    /// γ(t) = start + t·velocity.
    Line {
        start: SlowPoint,
        velocity: DVector<f64>,
    },
    /// γ(t) = center + radius·(cos(ωt + φ), sin(ωt + φ)); planar (d = 1).
    Circle {
        center: SlowPoint,
        radius: f64,
        angular_speed: f64,
        phase: f64,
    },
    /// γ(t) = center + (a_u·sin(ω_u·t + φ_u), a_v·sin(ω_v·t + φ_v)); planar.
    Lissajous {
        center: SlowPoint,
        amplitude: [f64; 2],
        frequency: [f64; 2],
        phase: [f64; 2],
    },
}

impl ParametricCurve {
    fn validate(&self) -> Result<(), PlannerError> {
        let finite = |values: &[f64]| values.iter().all(|v| v.is_finite());
        match self {
            ParametricCurve::Line { velocity, .. } => {
                if !finite(velocity.as_slice()) {
                    return Err(PlannerError::InvalidCurve(
                        "line velocity must be finite".into(),
                    ));
                }
                if velocity.len() % 2 != 0 || velocity.is_empty() {
                    return Err(PlannerError::InvalidCurve(
                        "line velocity needs 2d components".into(),
                    ));
                }
            }
            ParametricCurve::Circle {
                center,
                radius,
                angular_speed,
                phase,
            } => {
                if center.space_dim() != 2 {
                    return Err(PlannerError::InvalidCurve(
                        "circle preset is planar (d = 1)".into(),
                    ));
                }
                if !finite(&[*radius, *angular_speed, *phase]) || *radius < 0.0 {
                    return Err(PlannerError::InvalidCurve(
                        "circle parameters must be finite with radius ≥ 0".into(),
                    ));
                }
            }
            ParametricCurve::Lissajous {
                center,
                amplitude,
                frequency,
                phase,
            } => {
                if center.space_dim() != 2 {
                    return Err(PlannerError::InvalidCurve(
                        "lissajous preset is planar (d = 1)".into(),
                    ));
                }
                if !finite(amplitude) || !finite(frequency) || !finite(phase) {
                    return Err(PlannerError::InvalidCurve(
                        "lissajous parameters must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            ParametricCurve::Line { start, velocity } => start.coords() + velocity * t,
            ParametricCurve::Circle {
                center,
                radius,
                angular_speed,
                phase,
            } => {
                let angle = angular_speed * t + phase;
                let mut coords = center.coords().clone();
                coords[0] += radius * angle.cos();
                coords[1] += radius * angle.sin();
                coords
            }
            ParametricCurve::Lissajous {
                center,
                amplitude,
                frequency,
                phase,
            } => {
                let mut coords = center.coords().clone();
                coords[0] += amplitude[0] * (frequency[0] * t + phase[0]).sin();
                coords[1] += amplitude[1] * (frequency[1] * t + phase[1]).sin();
                coords
            }
        }
    }

    fn speed_bound(&self) -> f64 {
        match self {
            ParametricCurve::Line { velocity, .. } => velocity.norm(),
            ParametricCurve::Circle {
                radius,
                angular_speed,
                ..
            } => radius * angular_speed.abs(),
            ParametricCurve::Lissajous {
                amplitude,
                frequency,
                ..
            } => ((amplitude[0] * frequency[0]).powi(2) + (amplitude[1] * frequency[1]).powi(2))
                .sqrt(),
        }
    }
}

/// A prescribed curve: an arc-length parameterized polyline (constant past
/// its end) or a parametric preset on t ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurveSpec {
    Polyline(Vec<SlowPoint>),
    Parametric(ParametricCurve),
}

impl CurveSpec {
    pub fn polyline(points: Vec<SlowPoint>) -> Result<Self, PlannerError> {
        if points.is_empty() {
            return Err(PlannerError::InvalidCurve(
                "polyline needs at least one point".into(),
            ));
        }
        let dim = points[0].space_dim();
        if points.iter().any(|p| p.space_dim() != dim) {
            return Err(PlannerError::InvalidCurve(
                "polyline points must share a dimension".into(),
            ));
        }
        Ok(CurveSpec::Polyline(points))
    }

    pub fn parametric(curve: ParametricCurve) -> Result<Self, PlannerError> {
        curve.validate()?;
        Ok(CurveSpec::Parametric(curve))
    }

    /// Sample the curve. Polylines are arc-length parameterized and clamp to
    /// their endpoints outside [0, length].
    pub fn eval(&self, t: f64) -> Result<SlowPoint, PlannerError> {
        if !t.is_finite() {
            return Err(PlannerError::InvalidCurve(format!(
                "curve parameter must be finite, got {t}"
            )));
        }
        let coords = match self {
            CurveSpec::Polyline(points) => polyline_eval(points, t),
            CurveSpec::Parametric(curve) => curve.eval(t),
        };
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(PlannerError::InvalidCurve(format!(
                "curve sample at t = {t} is not finite"
            )));
        }
        SlowPoint::from_vector(coords).map_err(PlannerError::from)
    }

    /// Upper bound on the curve speed, used to pace the crossing search.
    pub fn speed_bound(&self) -> f64 {
        match self {
            // Arc-length parameterization: unit speed unless degenerate.
            CurveSpec::Polyline(points) => {
                let length: f64 = points
                    .windows(2)
                    .map(|pair| (pair[1].coords() - pair[0].coords()).norm())
                    .sum();
                if length > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            CurveSpec::Parametric(curve) => curve.speed_bound(),
        }
    }
}

fn polyline_eval(points: &[SlowPoint], t: f64) -> DVector<f64> {
    if t <= 0.0 {
        return points[0].coords().clone();
    }
    let mut remaining = t;
    for pair in points.windows(2) {
        let leg = pair[1].coords() - pair[0].coords();
        let len = leg.norm();
        if remaining <= len {
            return if len > 0.0 {
                pair[0].coords() + leg * (remaining / len)
            } else {
                pair[0].coords().clone()
            };
        }
        remaining -= len;
    }
    points[points.len() - 1].coords().clone()
}

/// A discretization point: curve parameter and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub target: SlowPoint,
}

/// Discretize a curve into waypoints at most εL apart.
///
/// t_{k+1} is the smallest t > t_k where the distance from γ(t_k) first
/// reaches εL, located by a forward scan (one eighth of εL per step at the
/// curve's speed bound) followed by bisection to the relative tolerance
/// `BISECTION_TOL`. If no crossing occurs within `stall_horizon`, the curve
/// is treated as stalled and the parameter advances by one per waypoint.
pub fn discretize_curve(
    curve: &CurveSpec,
    epsilon: f64,
    l: f64,
    domain: &DomainBox,
    max_waypoints: usize,
    stall_horizon: f64,
) -> Result<Vec<Waypoint>, PlannerError> {
    if !epsilon.is_finite() || epsilon <= 0.0 || !l.is_finite() || l <= 0.0 {
        return Err(PlannerError::Config(format!(
            "waypoint discretization needs ε > 0 and L > 0, got ε = {epsilon}, L = {l}"
        )));
    }
    if !stall_horizon.is_finite() || stall_horizon <= 0.0 {
        return Err(PlannerError::Config(
            "stall horizon must be positive".into(),
        ));
    }
    let spacing = epsilon * l;
    let start = curve.eval(0.0)?;
    if !domain.contains(&start) {
        return Err(PlannerError::CurveOutsideDomain { t: 0.0 });
    }

    let mut waypoints = vec![Waypoint {
        t: 0.0,
        target: start,
    }];
    let speed = curve.speed_bound();
    let scan_step = if speed > 0.0 {
        spacing / (8.0 * speed)
    } else {
        0.0
    };

    while waypoints.len() <= max_waypoints {
        let Waypoint { t: t_k, target } = waypoints.last().cloned().expect("non-empty");
        let next_t = if scan_step > 0.0 {
            find_crossing(curve, t_k, &target, spacing, scan_step, stall_horizon)?
        } else {
            None
        };
        let t_next = match next_t {
            Some(t) => t,
            // Stalled: the curve stays within εL of the waypoint.
            None => t_k + 1.0,
        };
        let point = curve.eval(t_next)?;
        if !domain.contains(&point) {
            return Err(PlannerError::CurveOutsideDomain { t: t_next });
        }
        waypoints.push(Waypoint {
            t: t_next,
            target: point,
        });
    }
    Ok(waypoints)
}

/// First t > t_k with ‖γ(t) − γ(t_k)‖ = spacing, up to the scan resolution.
fn find_crossing(
    curve: &CurveSpec,
    t_k: f64,
    anchor: &SlowPoint,
    spacing: f64,
    scan_step: f64,
    stall_horizon: f64,
) -> Result<Option<f64>, PlannerError> {
    let distance = |t: f64| -> Result<f64, PlannerError> { Ok(curve.eval(t)?.distance(anchor)) };
    let mut lo = t_k;
    let mut hi = t_k;
    let mut found = false;
    let max_steps = (stall_horizon / scan_step).ceil() as usize;
    for _ in 0..max_steps {
        lo = hi;
        hi += scan_step;
        if distance(hi)? >= spacing {
            found = true;
            break;
        }
    }
    if !found {
        return Ok(None);
    }
    // Bisect the bracket on the first-crossing predicate.
    let tol = BISECTION_TOL * spacing;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let d = distance(mid)?;
        if (d - spacing).abs() <= tol {
            return Ok(Some(mid));
        }
        if d >= spacing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn domain() -> DomainBox {
        DomainBox::symmetric(1, 1.0).unwrap()
    }

    fn line_through_origin(direction: [f64; 2]) -> CurveSpec {
        CurveSpec::parametric(ParametricCurve::Line {
            start: SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            velocity: DVector::from_row_slice(&direction),
        })
        .unwrap()
    }

    #[test]
    fn straight_line_waypoints_evenly_spaced() {
        let curve = line_through_origin([1.0, 0.0]);
        let eps = 1e-2;
        let wps = discretize_curve(&curve, eps, 1.0, &domain(), 20, 1.0).unwrap();
        assert_eq!(wps.len(), 21);
        for (k, wp) in wps.iter().enumerate() {
            assert_relative_eq!(wp.t, 0.01 * k as f64, max_relative = 2e-3);
        }
        for pair in wps.windows(2) {
            let gap = pair[1].target.distance(&pair[0].target);
            assert_relative_eq!(gap, 0.01, max_relative = 2e-3);
        }
    }

    #[test]
    fn constant_curve_advances_unit_steps() {
        let z0 = SlowPoint::new(vec![0.25, -0.5]).unwrap();
        let curve = CurveSpec::polyline(vec![z0.clone()]).unwrap();
        let wps = discretize_curve(&curve, 1e-2, 1.0, &domain(), 5, 1.0).unwrap();
        assert_eq!(wps.len(), 6);
        for (k, wp) in wps.iter().enumerate() {
            assert_relative_eq!(wp.t, k as f64, max_relative = 1e-12);
            assert_eq!(wp.target, z0);
        }
    }

    #[test]
    fn circle_chord_spacing_matches_arc_relation() {
        let curve = CurveSpec::parametric(ParametricCurve::Circle {
            center: SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            radius: 0.5,
            angular_speed: 1.0,
            phase: 0.0,
        })
        .unwrap();
        let eps = 1e-2;
        let l = 1.0;
        let wps = discretize_curve(&curve, eps, l, &domain(), 30, 1.0).unwrap();
        let dt_expected = 2.0 * ((eps * l) / (2.0 * 0.5)).asin();
        for pair in wps.windows(2) {
            assert_relative_eq!(pair[1].t - pair[0].t, dt_expected, max_relative = 5e-3);
        }
    }

    #[test]
    fn polyline_is_arc_length_parameterized() {
        let points = vec![
            SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            SlowPoint::new(vec![0.5, 0.0]).unwrap(),
            SlowPoint::new(vec![0.5, 0.5]).unwrap(),
        ];
        let curve = CurveSpec::polyline(points).unwrap();
        let p = curve.eval(0.25).unwrap();
        assert_relative_eq!(p.coords()[0], 0.25, max_relative = 1e-12);
        let q = curve.eval(0.75).unwrap();
        assert_relative_eq!(q.coords()[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(q.coords()[1], 0.25, max_relative = 1e-12);
        // Clamped beyond the total length.
        let end = curve.eval(10.0).unwrap();
        assert_eq!(end.coords().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn leaving_the_domain_is_an_error() {
        let curve = line_through_origin([1.0, 0.0]);
        let result = discretize_curve(&curve, 1e-2, 1.0, &domain(), 150, 1.0);
        assert!(matches!(
            result,
            Err(PlannerError::CurveOutsideDomain { .. })
        ));
    }

    #[test]
    fn rejects_nonfinite_curves() {
        assert!(CurveSpec::parametric(ParametricCurve::Line {
            start: SlowPoint::new(vec![0.0, 0.0]).unwrap(),
            velocity: DVector::from_row_slice(&[f64::NAN, 0.0]),
        })
        .is_err());
    }
}
