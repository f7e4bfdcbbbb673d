//! Positive-spanning certificates and conic decomposition of displacement
//! vectors into guiding times.
//!
//! The central condition is that 0 lies strictly inside the convex hull of
//! the action gradients. It is certified by a linear program that maximizes
//! the smallest convex weight, combined with a rank check so that a hull
//! that is flat in some direction is never reported as interior. For d = 1
//! an angular-coverage test over the gradient directions doubles as an
//! independent cross-check.

mod simplex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainBox, GeometryError, GuidingFieldSet, SlowPoint};
use simplex::{solve_standard_form, LpOutcome};

/// Margin below which the interiority certificate is rejected.
pub const MARGIN_TOL: f64 = 1e-9;
/// Coefficients this far below zero indicate a wrong cone selection.
pub const NEGATIVE_COEFF_TOL: f64 = -1e-12;
/// Condition-number ceiling for the selected guiding matrix W.
pub const CONDITION_LIMIT: f64 = 1e8;

const RANK_TOL: f64 = 1e-12;
const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SpanningError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("positive-spanning condition unsatisfied at the query point (margin {margin:.3e})")]
    A3Unsatisfied { margin: f64 },
    #[error(
        "guiding time {value:.3e} at selection slot {index} is negative; re-select the cone basis"
    )]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("selected guiding matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("internal spanning failure: {0}")]
    Internal(String),
    #[error("invalid spanning input: {0}")]
    Config(String),
}

/// Outcome of the interiority check at a single point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCertificate {
    /// True when 0 is strictly inside the convex hull of the gradients.
    pub satisfied: bool,
    /// Convex weights witnessing 0 = Σ wᵢ gᵢ; present iff satisfied.
    pub weights: Option<Vec<f64>>,
    /// Smallest convex weight achieved by the LP (0 when degenerate).
    pub margin: f64,
    /// ‖Σ wᵢ gᵢ‖ for the returned weights; the certificate is self-checking.
    pub residual: f64,
}

impl SpanCertificate {
    fn unsatisfied(margin: f64) -> Self {
        Self {
            satisfied: false,
            weights: None,
            margin,
            residual: 0.0,
        }
    }
}

/// Certificate grid over the domain box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionCertificate {
    pub resolution: usize,
    pub points: Vec<RegionPoint>,
    pub all_satisfied: bool,
    /// Bounding box of the grid points where the condition holds.
    pub satisfied_box: Option<DomainBox>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionPoint {
    pub point: SlowPoint,
    pub certificate: SpanCertificate,
}

/// Guiding times: the nonnegative coefficients expressing a displacement in
/// the selected guiding fields, together with the selection itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingTimes {
    /// Injective selection of 2d field indices (cone basis).
    pub selection: Vec<usize>,
    /// Nonnegative coefficients, one per selected field.
    pub times: Vec<f64>,
}

impl GuidingTimes {
    pub fn labels<'a>(&self, fields: &'a GuidingFieldSet) -> Vec<&'a str> {
        self.selection.iter().map(|&i| fields.label(i)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.times.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn total(&self) -> f64 {
        self.times.iter().sum()
    }
}

/// Interiority certificate for an explicit list of gradients.
///
/// Solves max δ subject to Σ wᵢ gᵢ = 0, Σ wᵢ = 1, wᵢ ≥ δ and requires both
/// δ > MARGIN_TOL and full rank of the gradient matrix. For a planar slow
/// space the angular-coverage test must agree and is folded into the verdict.
pub fn certify_gradients(gradients: &[DVector<f64>]) -> SpanCertificate {
    let n = gradients.len();
    if n == 0 {
        return SpanCertificate::unsatisfied(0.0);
    }
    let dim = gradients[0].len();
    if gradients.iter().any(|g| g.len() != dim) {
        return SpanCertificate::unsatisfied(0.0);
    }

    if gradient_rank(gradients) < dim {
        return SpanCertificate::unsatisfied(0.0);
    }

    // Variables (s_1..s_n, δ+, δ-) after substituting w_i = δ + s_i.
    let mut a = DMatrix::zeros(dim + 1, n + 2);
    for (i, g) in gradients.iter().enumerate() {
        for r in 0..dim {
            a[(r, i)] = g[r];
        }
        a[(dim, i)] = 1.0;
    }
    let gradient_sum: DVector<f64> = gradients.iter().fold(DVector::zeros(dim), |acc, g| acc + g);
    for r in 0..dim {
        a[(r, n)] = gradient_sum[r];
        a[(r, n + 1)] = -gradient_sum[r];
    }
    a[(dim, n)] = n as f64;
    a[(dim, n + 1)] = -(n as f64);

    let mut b = DVector::zeros(dim + 1);
    b[dim] = 1.0;
    let mut c = DVector::zeros(n + 2);
    c[n] = -1.0;
    c[n + 1] = 1.0;

    let solution = match solve_standard_form(&a, &b, &c) {
        LpOutcome::Optimal(sol) => sol,
        // 0 outside the affine hull of the gradients.
        LpOutcome::Infeasible | LpOutcome::Unbounded => return SpanCertificate::unsatisfied(0.0),
    };
    let margin = solution.x[n] - solution.x[n + 1];
    let weights: Vec<f64> = (0..n).map(|i| margin + solution.x[i]).collect();
    let residual = gradients
        .iter()
        .zip(&weights)
        .fold(DVector::zeros(dim), |acc, (g, w)| acc + g * *w)
        .norm();

    let mut satisfied = margin > MARGIN_TOL;
    if dim == 2 {
        satisfied = satisfied && angular_coverage(gradients);
    }
    SpanCertificate {
        satisfied,
        weights: if satisfied { Some(weights) } else { None },
        margin,
        residual,
    }
}

/// d = 1 cross-check: sorted gradient directions must leave no open
/// half-plane uncovered, i.e. every angular gap is strictly below π.
pub fn angular_coverage(gradients: &[DVector<f64>]) -> bool {
    let mut angles: Vec<f64> = gradients
        .iter()
        .filter(|g| g.norm() > 1e-14)
        .map(|g| g[1].atan2(g[0]))
        .collect();
    // Fewer than three directions can never surround the origin in a plane.
    if angles.len() < 3 {
        return false;
    }
    angles.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    let full_turn = 2.0 * std::f64::consts::PI;
    let mut max_gap: f64 = angles[0] + full_turn - angles[angles.len() - 1];
    for pair in angles.windows(2) {
        max_gap = max_gap.max(pair[1] - pair[0]);
    }
    max_gap < std::f64::consts::PI - 1e-12
}

/// Certify the positive-spanning condition at a point of the field set.
pub fn check_a3(fields: &GuidingFieldSet, z: &SlowPoint) -> Result<SpanCertificate, SpanningError> {
    let gradients = fields.gradients_at(z)?;
    Ok(certify_gradients(&gradients))
}

/// Evaluate the certificate on a uniform grid over the domain box.
pub fn check_a3_region(
    fields: &GuidingFieldSet,
    grid_resolution: usize,
) -> Result<RegionCertificate, SpanningError> {
    let grid = fields.domain().grid(grid_resolution);
    let mut points = Vec::with_capacity(grid.len());
    let mut all = true;
    let dim = fields.space_dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut any = false;
    for point in grid {
        let certificate = check_a3(fields, &point)?;
        if certificate.satisfied {
            any = true;
            for (axis, c) in point.coords().iter().enumerate() {
                lo[axis] = lo[axis].min(*c);
                hi[axis] = hi[axis].max(*c);
            }
        } else {
            all = false;
        }
        points.push(RegionPoint { point, certificate });
    }
    let satisfied_box = if any && lo.iter().zip(&hi).all(|(l, h)| l < h) {
        DomainBox::new(lo, hi).ok()
    } else {
        None
    };
    Ok(RegionCertificate {
        resolution: grid_resolution,
        points,
        all_satisfied: all,
        satisfied_box,
    })
}

/// Select 2d field indices whose guiding vectors form an invertible matrix
/// and whose nonnegative cone contains `v`.
///
/// The conic representation over all n fields is found by an LP minimizing
/// the total guiding time, then Carathéodory-reduced to at most 2d
/// linearly independent fields and padded (at zero coefficient) with the
/// lowest-index fields that extend the span.
pub fn select_cone_basis(
    v: &DVector<f64>,
    fields: &GuidingFieldSet,
    z: &SlowPoint,
) -> Result<Vec<usize>, SpanningError> {
    let cert = check_a3(fields, z)?;
    if !cert.satisfied {
        return Err(SpanningError::A3Unsatisfied {
            margin: cert.margin,
        });
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(SpanningError::Config("non-finite target vector".into()));
    }
    let dim = fields.space_dim();
    if v.len() != dim {
        return Err(SpanningError::Config(format!(
            "target vector has {} components, expected {dim}",
            v.len()
        )));
    }

    let vectors = fields.guiding_fields_at(z)?;
    let n = vectors.len();

    // Minimal-total-time conic representation of v over all n fields.
    let mut a = DMatrix::zeros(dim, n);
    for (i, x) in vectors.iter().enumerate() {
        for r in 0..dim {
            a[(r, i)] = x[r];
        }
    }
    let c = DVector::from_element(n, 1.0);
    let coeffs = match solve_standard_form(&a, v, &c) {
        LpOutcome::Optimal(sol) => sol.x,
        LpOutcome::Infeasible | LpOutcome::Unbounded => {
            // Cannot happen when the certificate holds.
            return Err(SpanningError::Internal(
                "conic representation LP failed under a valid certificate".into(),
            ));
        }
    };

    let mut active: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > SUPPORT_TOL)
        .map(|(i, &a)| (i, a))
        .collect();

    // Carathéodory reduction: as long as the active vectors are linearly
    // dependent, move along a null combination until a coefficient hits 0.
    loop {
        let cols: Vec<DVector<f64>> = active.iter().map(|&(i, _)| vectors[i].clone()).collect();
        let Some(mu) = null_combination(&cols) else {
            break;
        };
        let positive = active.iter().zip(mu.iter()).any(|(_, &m)| m > RANK_TOL);
        let mu = if positive { mu } else { -mu };
        let mut step = f64::INFINITY;
        let mut argmin = None;
        for (slot, (_, coeff)) in active.iter().enumerate() {
            if mu[slot] > RANK_TOL {
                let ratio = coeff / mu[slot];
                if ratio < step {
                    step = ratio;
                    argmin = Some(slot);
                }
            }
        }
        let Some(drop_slot) = argmin else {
            return Err(SpanningError::Internal(
                "null combination with no positive component".into(),
            ));
        };
        for (slot, entry) in active.iter_mut().enumerate() {
            entry.1 -= step * mu[slot];
        }
        active[drop_slot].1 = 0.0;
        active.retain(|&(_, a)| a > SUPPORT_TOL);
        if active.is_empty() {
            break;
        }
    }

    let mut selection: Vec<usize> = active.iter().map(|&(i, _)| i).collect();
    selection.sort_unstable();

    // Pad with independent fields at coefficient zero until W is square.
    let mut basis: Vec<DVector<f64>> = selection.iter().map(|&i| vectors[i].clone()).collect();
    for (i, vector) in vectors.iter().enumerate() {
        if selection.len() == dim {
            break;
        }
        if selection.contains(&i) {
            continue;
        }
        if extends_span(&basis, vector) {
            selection.push(i);
            basis.push(vector.clone());
        }
    }
    if selection.len() != dim {
        return Err(SpanningError::Internal(
            "could not complete the cone basis to full rank".into(),
        ));
    }
    // Keep support order first, padding after; both ascending already except
    // that padding may interleave numerically lower indices. Support indices
    // stay in front by construction.
    Ok(selection)
}

/// Guiding times a = W⁻¹ v for the selected fields at z.
pub fn decompose(
    v: &DVector<f64>,
    fields: &GuidingFieldSet,
    z: &SlowPoint,
    selection: &[usize],
) -> Result<GuidingTimes, SpanningError> {
    let dim = fields.space_dim();
    if selection.len() != dim {
        return Err(SpanningError::Config(format!(
            "selection must name {dim} fields, got {}",
            selection.len()
        )));
    }
    let w = selection_matrix(fields, z, selection)?;
    let svd = w.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if sigma_min <= 0.0 || sigma_max / sigma_min > CONDITION_LIMIT {
        return Err(SpanningError::IllConditioned {
            cond: if sigma_min > 0.0 {
                sigma_max / sigma_min
            } else {
                f64::INFINITY
            },
        });
    }
    let lu = w.clone().lu();
    let mut a = lu
        .solve(v)
        .ok_or_else(|| SpanningError::Internal("singular W passed the condition check".into()))?;
    // One step of iterative refinement keeps the reconstruction residual at
    // rounding level.
    let correction = lu.solve(&(v - &w * &a));
    if let Some(corr) = correction {
        a += corr;
    }

    for (slot, value) in a.iter_mut().enumerate() {
        if *value < 0.0 {
            if *value < NEGATIVE_COEFF_TOL {
                return Err(SpanningError::NegativeCoefficient {
                    index: slot,
                    value: *value,
                });
            }
            *value = 0.0;
        }
    }
    let residual = (&w * &a - v).norm();
    if residual > 1e-10 * (1.0 + v.norm()) {
        return Err(SpanningError::Internal(format!(
            "reconstruction residual {residual:.3e} exceeds tolerance"
        )));
    }
    Ok(GuidingTimes {
        selection: selection.to_vec(),
        times: a.iter().copied().collect(),
    })
}

/// Decompose `v` after selecting a cone basis for it.
pub fn decompose_auto(
    v: &DVector<f64>,
    fields: &GuidingFieldSet,
    z: &SlowPoint,
) -> Result<GuidingTimes, SpanningError> {
    let selection = select_cone_basis(v, fields, z)?;
    decompose(v, fields, z, &selection)
}

/// Uniform bound on guiding times: max over sampled unit directions ζ of
/// ‖W_ζ⁻¹‖·(L+A), with each direction choosing its own cone basis.
///
/// 360·d directions are sampled: uniform angles for a planar slow space,
/// a fixed-seed uniform sample of the unit sphere otherwise.
pub fn bound_d(
    fields: &GuidingFieldSet,
    z: &SlowPoint,
    l_plus_a: f64,
) -> Result<f64, SpanningError> {
    if !l_plus_a.is_finite() || l_plus_a <= 0.0 {
        return Err(SpanningError::Config(format!(
            "L+A must be a positive scalar, got {l_plus_a}"
        )));
    }
    let dim = fields.space_dim();
    let samples = 360 * fields.dim();
    let mut worst = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_D1F5);
    for k in 0..samples {
        let zeta = if dim == 2 {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (samples as f64);
            DVector::from_vec(vec![theta.cos(), theta.sin()])
        } else {
            loop {
                let raw = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
                let norm = raw.norm();
                if norm > 1e-3 {
                    break raw / norm;
                }
            }
        };
        let selection = select_cone_basis(&zeta, fields, z)?;
        let w = selection_matrix(fields, z, &selection)?;
        let sigma_min = w.svd(false, false).singular_values.min();
        if sigma_min > 0.0 {
            worst = worst.max(1.0 / sigma_min);
        }
    }
    Ok(worst * l_plus_a)
}

fn selection_matrix(
    fields: &GuidingFieldSet,
    z: &SlowPoint,
    selection: &[usize],
) -> Result<DMatrix<f64>, SpanningError> {
    let dim = fields.space_dim();
    let mut seen = vec![false; fields.len()];
    for &i in selection {
        if i >= fields.len() {
            return Err(SpanningError::Config(format!(
                "selection index {i} out of range"
            )));
        }
        if seen[i] {
            return Err(SpanningError::Config(format!(
                "selection repeats field index {i}"
            )));
        }
        seen[i] = true;
    }
    let mut w = DMatrix::zeros(dim, selection.len());
    for (col, &i) in selection.iter().enumerate() {
        let x = fields.guiding_field(i, z)?;
        w.set_column(col, &x);
    }
    Ok(w)
}

fn gradient_rank(gradients: &[DVector<f64>]) -> usize {
    let dim = gradients[0].len();
    let mut mat = DMatrix::zeros(dim, gradients.len());
    for (i, g) in gradients.iter().enumerate() {
        mat.set_column(i, g);
    }
    let svd = mat.svd(false, false);
    let sigma_max = svd.singular_values.max();
    if sigma_max <= 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|s| **s > RANK_TOL * sigma_max.max(1.0))
        .count()
}

/// A nonzero μ with Σ μᵢ·colᵢ = 0, when the columns are linearly dependent.
fn null_combination(cols: &[DVector<f64>]) -> Option<DVector<f64>> {
    let k = cols.len();
    if k == 0 {
        return None;
    }
    let rows = cols[0].len();
    let mut mat = DMatrix::zeros(rows, k);
    for (i, c) in cols.iter().enumerate() {
        mat.set_column(i, c);
    }
    let scale = mat.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);

    // Row echelon with partial pivoting; track pivot columns.
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..k {
        if row >= rows {
            break;
        }
        let (best_row, best_val) = (row..rows)
            .map(|r| (r, mat[(r, col)].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite matrix"))
            .expect("non-empty row range");
        if best_val <= RANK_TOL * scale {
            continue; // free column
        }
        mat.swap_rows(row, best_row);
        let pivot = mat[(row, col)];
        for r in 0..rows {
            if r == row {
                continue;
            }
            let factor = mat[(r, col)] / pivot;
            if factor != 0.0 {
                for j in col..k {
                    mat[(r, j)] -= factor * mat[(row, j)];
                }
            }
        }
        pivot_cols.push((row, col));
        row += 1;
    }
    if pivot_cols.len() == k {
        return None; // full column rank
    }
    let free_col = (0..k)
        .find(|c| !pivot_cols.iter().any(|&(_, pc)| pc == *c))
        .expect("rank-deficient matrix has a free column");
    let mut mu = DVector::zeros(k);
    mu[free_col] = 1.0;
    for &(prow, pcol) in pivot_cols.iter().rev() {
        mu[pcol] = -mat[(prow, free_col)] / mat[(prow, pcol)];
    }
    Some(mu)
}

fn extends_span(basis: &[DVector<f64>], candidate: &DVector<f64>) -> bool {
    let mut residue = candidate.clone();
    // Modified Gram-Schmidt against the (re-orthonormalized) basis.
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut q = b.clone();
        for o in &ortho {
            let proj = o.dot(&q);
            q -= o * proj;
        }
        let norm = q.norm();
        if norm > RANK_TOL {
            ortho.push(q / norm);
        }
    }
    for o in &ortho {
        let proj = o.dot(&residue);
        residue -= o * proj;
    }
    residue.norm() > 1e-10 * candidate.norm().max(1.0)
}
