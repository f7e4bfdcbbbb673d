//! The quantitative constants of the shadowing mechanism, computed from the
//! configured model rather than assumed.
//!
//! ‖φ‖_C¹ combines a domain-grid scan of the drift term with the analytic
//! bounds of the synthetic fast coupling. Everything downstream (K, C₁, C₂,
//! A, the usable-ε thresholds and the composite shadowing constant) is
//! derived from it in closed form.

use serde::{Deserialize, Serialize};

use super::map::ReducedMapParams;
use super::SymbolicError;
use crate::geometry::SlowPoint;

/// Target number of grid evaluations when scanning the domain.
const GRID_BUDGET: f64 = 4096.0;

/// Uniform-closeness constant K = 8·‖φ‖_C¹·r·λ/(1−λ).
pub fn uniform_closeness_constant(phi_c1: f64, r: f64, lambda: f64) -> f64 {
    8.0 * phi_c1 * r * lambda / (1.0 - lambda)
}

/// Same-code gap constant C₁(K₀) = ‖∂φ_cc/∂(x,y)‖·4r/(1−λ) + K₀.
pub fn same_code_gap_constant(dphi_xy: f64, r: f64, lambda: f64, k0: f64) -> f64 {
    dphi_xy * 4.0 * r / (1.0 - lambda) + k0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    /// C¹ norm of the step map φ (max of value and derivative sups).
    pub phi_c1: f64,
    /// Gronwall constant ‖φ‖_C¹·(1 + max(‖∂x/∂z‖, ‖∂y/∂z‖)).
    pub c: f64,
    /// Uniform-closeness constant K.
    pub k: f64,
    /// ‖∂φ_cc/∂(x,y)‖·4r/(1−λ); C₁(K₀) = c1_coeff + K₀.
    pub c1_coeff: f64,
    /// C₁ evaluated at K₀ = K, as used by the guiding-path estimates.
    pub c1: f64,
    /// Same-code drift rate C₂.
    pub c2: f64,
    /// Endpoint accuracy constant A (ε-free closed form).
    pub a: f64,
    /// The recursive ε-carrying variant of A, reported alongside.
    pub a_recursive: f64,
    /// Waypoint spacing constant L the record was computed for.
    pub l: f64,
    /// ε threshold from the uniform-closeness induction: (1−λ)/(2Cλ).
    pub eps_uniform: f64,
    /// ε threshold from the guiding-path construction.
    pub eps_guiding: f64,
    /// min of the two thresholds; runs must stay below this.
    pub eps_usable: f64,
    /// max_c sup_z ‖T_c·X_c‖ (grid and corner scan).
    pub max_drift_norm: f64,
    /// Bound on ‖∂φ/∂(x,y)‖: η times the fast-state sup.
    pub max_dphi_xy: f64,
    /// Bound on ‖∂φ/∂z‖: the largest action Hessian norm.
    pub max_dphi_z: f64,
    /// Sup of the fast surrogate norms (ε-bias included).
    pub fast_sup: f64,
}

impl ConstantsRecord {
    /// C₁ at an explicit initial-gap constant K₀.
    pub fn c1_at(&self, k0: f64) -> f64 {
        self.c1_coeff + k0
    }

    /// The composite shadowing constant C = C₂ + L + K + C₁ + A.
    pub fn shadowing_constant(&self) -> f64 {
        self.c2 + self.l + self.k + self.c1 + self.a
    }

    /// Maximum waypoint displacement ε(L+A) accepted by the guiding-path
    /// construction.
    pub fn displacement_budget(&self, epsilon: f64) -> f64 {
        epsilon * (self.l + self.a)
    }
}

/// Compute the constants record for a model at waypoint spacing constant L.
pub fn compute_constants(
    params: &ReducedMapParams,
    l: f64,
) -> Result<ConstantsRecord, SymbolicError> {
    if !l.is_finite() || l <= 0.0 {
        return Err(SymbolicError::Config(format!(
            "waypoint spacing constant L must be positive, got {l}"
        )));
    }
    let fields = params.fields();
    let domain = fields.domain();
    let fast = params.fast();
    let r = fast.r();
    let lambda = fast.lambda();
    let epsilon = params.epsilon();

    let resolution = (GRID_BUDGET.powf(1.0 / domain.space_dim() as f64).floor() as usize).max(2);
    let mut sample_points: Vec<SlowPoint> = domain.grid(resolution);
    sample_points.extend(domain.corners());

    let fast_sup = fast.sup_norm()
        + fast
            .epsilon_bias()
            .map(|b| b.norm() * epsilon)
            .unwrap_or(0.0);
    let dphi_xy = params.eta() * fast_sup;
    let readout_sup = params.eta() * fast_sup * fast_sup;

    let mut max_drift = 0.0_f64;
    let mut max_hess = 0.0_f64;
    let mut min_period_grad = f64::INFINITY;
    let mut per_label: Vec<(f64, f64)> = Vec::with_capacity(fields.len()); // (drift sup, φ_cc C¹)
    for field in fields.fields() {
        let hess = field.action().hessian_norm();
        let mut drift_sup = 0.0_f64;
        for z in &sample_points {
            let drift = field.drift(z)?;
            drift_sup = drift_sup.max(drift.norm());
            let period = field.period_at(z)?;
            min_period_grad = min_period_grad.min(period * drift.norm());
        }
        let value_sup = drift_sup + readout_sup;
        let phi_cc_c1 = value_sup.max(hess).max(dphi_xy);
        per_label.push((drift_sup, phi_cc_c1));
        max_drift = max_drift.max(drift_sup);
        max_hess = max_hess.max(hess);
    }

    let phi_c1 = per_label.iter().map(|&(_, p)| p).fold(0.0, f64::max);
    // The synthetic fast states do not depend on z, so ∂x/∂z = ∂y/∂z = 0.
    let dx_dz: f64 = 0.0;
    let c = phi_c1 * (1.0 + dx_dz);
    let k = uniform_closeness_constant(phi_c1, r, lambda);
    let c1_coeff = dphi_xy * 4.0 * r / (1.0 - lambda);
    let c1 = c1_coeff + k;
    let c2 = max_hess + dphi_xy * dx_dz;

    let geom = 4.0 * r / (1.0 - lambda);
    let a = 4.0
        * per_label
            .iter()
            .map(|&(drift_sup, phi_cc)| 6.0 * phi_cc * geom + 3.0 * k + 1.0 + drift_sup)
            .fold(0.0, f64::max);
    let mut a_rec = per_label
        .iter()
        .map(|&(drift_sup, phi_cc)| 3.0 * epsilon * (k + phi_cc * geom + 1.0 + drift_sup))
        .fold(0.0, f64::max);
    for _ in 1..domain.space_dim() {
        a_rec = per_label
            .iter()
            .map(|&(drift_sup, phi_cc)| 3.0 * epsilon * (a_rec + phi_cc * geom + 1.0 + drift_sup))
            .fold(0.0, f64::max);
    }

    let eps_uniform = if c > 0.0 {
        (1.0 - lambda) / (2.0 * c * lambda)
    } else {
        f64::INFINITY
    };
    let eps_guiding = if c > 0.0 && min_period_grad > 0.0 {
        min_period_grad / (c * (l + a))
    } else if c == 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let eps_usable = eps_uniform.min(eps_guiding);

    Ok(ConstantsRecord {
        phi_c1,
        c,
        k,
        c1_coeff,
        c1,
        c2,
        a,
        a_recursive: a_rec,
        l,
        eps_uniform,
        eps_guiding,
        eps_usable,
        max_drift_norm: max_drift,
        max_dphi_xy: dphi_xy,
        max_dphi_z: max_hess,
        fast_sup,
    })
}
