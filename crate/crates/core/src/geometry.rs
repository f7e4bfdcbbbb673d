//! Slow phase space, action Hamiltonians and their guiding vector fields.
//!
//! A point of the slow phase space is written z = (u, v) with d u-components
//! followed by d v-components. Every action J_c is a polynomial of total
//! degree at most two, so its gradient is available in closed form; a
//! finite-difference fallback is kept for cross-checking and for callers
//! that request it explicitly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("slow coordinates must come in (u, v) pairs; got {0} components")]
    BadDimension(usize),
    #[error("non-finite slow coordinate")]
    NonFinite,
    #[error("point lies outside the domain box")]
    OutOfDomain,
    #[error("gradient evaluation produced a non-finite value")]
    NonFiniteGradient,
    #[error("period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("a field set needs at least 2d+1 = {needed} actions, got {got}")]
    TooFewFields { needed: usize, got: usize },
    #[error("duplicate action label `{0}`")]
    DuplicateLabel(String),
    #[error("expected {expected} slow coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// A point z = (u, v) in the 2d-dimensional slow phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowPoint {
    coords: DVector<f64>,
}

impl SlowPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        Self::from_vector(DVector::from_vec(coords))
    }

    pub fn from_vector(coords: DVector<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(GeometryError::BadDimension(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { coords })
    }

    /// Number of slow degrees of freedom d.
    pub fn dim(&self) -> usize {
        self.coords.len() / 2
    }

    /// Full coordinate count 2d.
    pub fn space_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn u(&self) -> &[f64] {
        &self.coords.as_slice()[..self.dim()]
    }

    pub fn v(&self) -> &[f64] {
        &self.coords.as_slice()[self.dim()..]
    }

    pub fn distance(&self, other: &SlowPoint) -> f64 {
        (&self.coords - &other.coords).norm()
    }

    /// The point z + w, without re-validating finiteness.
    pub fn translated(&self, displacement: &DVector<f64>) -> SlowPoint {
        SlowPoint {
            coords: &self.coords + displacement,
        }
    }
}

/// Axis-aligned box: the closed region of slow phase space on which the
/// field set is certified and trajectories are allowed to live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() || !lower.len().is_multiple_of(2) {
            return Err(GeometryError::BadDimension(lower.len()));
        }
        let finite = lower.iter().chain(upper.iter()).all(|c| c.is_finite());
        if !finite {
            return Err(GeometryError::NonFinite);
        }
        if lower.iter().zip(&upper).any(|(lo, hi)| lo >= hi) {
            return Err(GeometryError::Config(
                "domain box needs lower < upper on every axis".into(),
            ));
        }
        Ok(Self {
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
        })
    }

    /// The box [-half_width, half_width]^(2d).
    pub fn symmetric(d: usize, half_width: f64) -> Result<Self, GeometryError> {
        Self::new(vec![-half_width; 2 * d], vec![half_width; 2 * d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len() / 2
    }

    pub fn space_dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn contains(&self, z: &SlowPoint) -> bool {
        z.space_dim() == self.space_dim()
            && z.coords()
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(c, (lo, hi))| *c >= *lo && *c <= *hi)
    }

    /// Euclidean distance from z to the box; zero inside.
    pub fn distance_outside(&self, z: &SlowPoint) -> f64 {
        z.coords()
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(c, (lo, hi))| {
                let excess = if c < lo {
                    lo - c
                } else if c > hi {
                    c - hi
                } else {
                    0.0
                };
                excess * excess
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn diameter(&self) -> f64 {
        (&self.upper - &self.lower).norm()
    }

    pub fn center(&self) -> SlowPoint {
        SlowPoint {
            coords: (&self.lower + &self.upper) * 0.5,
        }
    }

    /// Shrink toward the center by `factor` in every axis (factor 1 is the box itself).
    pub fn shrunk(&self, factor: f64) -> DomainBox {
        let center = (&self.lower + &self.upper) * 0.5;
        let half = (&self.upper - &self.lower) * (0.5 * factor);
        DomainBox {
            lower: &center - &half,
            upper: &center + &half,
        }
    }

    /// Uniform grid with `resolution` points per axis (cartesian product over
    /// all 2d axes). Resolution 1 yields the box center.
    pub fn grid(&self, resolution: usize) -> Vec<SlowPoint> {
        let n = self.space_dim();
        if resolution <= 1 {
            return vec![self.center()];
        }
        let total = resolution.pow(n as u32);
        let mut points = Vec::with_capacity(total);
        let mut index = vec![0usize; n];
        for _ in 0..total {
            let coords = DVector::from_fn(n, |axis, _| {
                let frac = index[axis] as f64 / (resolution - 1) as f64;
                self.lower[axis] + frac * (self.upper[axis] - self.lower[axis])
            });
            points.push(SlowPoint { coords });
            for slot in index.iter_mut() {
                *slot += 1;
                if *slot < resolution {
                    break;
                }
                *slot = 0;
            }
        }
        points
    }

    /// The 2^(2d) corner points.
    pub fn corners(&self) -> Vec<SlowPoint> {
        let n = self.space_dim();
        let total = 1usize << n;
        (0..total)
            .map(|mask| {
                let coords = DVector::from_fn(n, |axis, _| {
                    if mask & (1 << axis) == 0 {
                        self.lower[axis]
                    } else {
                        self.upper[axis]
                    }
                });
                SlowPoint { coords }
            })
            .collect()
    }

    /// Uniform random point of the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SlowPoint {
        let coords = DVector::from_fn(self.space_dim(), |axis, _| {
            rng.random_range(self.lower[axis]..=self.upper[axis])
        });
        SlowPoint { coords }
    }
}

/// Polynomial of total degree at most two on the slow phase space:
/// value(z) = c + b·z + ½·zᵀQz with Q symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyField {
    constant: f64,
    linear: DVector<f64>,
    quadratic: DMatrix<f64>,
}

impl PolyField {
    pub fn new(
        constant: f64,
        linear: Vec<f64>,
        quadratic: Option<DMatrix<f64>>,
    ) -> Result<Self, GeometryError> {
        let n = linear.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(GeometryError::BadDimension(n));
        }
        let quadratic = match quadratic {
            Some(q) => {
                if q.nrows() != n || q.ncols() != n {
                    return Err(GeometryError::DimensionMismatch {
                        expected: n,
                        got: q.nrows(),
                    });
                }
                // Symmetrize so the gradient formula b + Qz is exact.
                (&q + q.transpose()) * 0.5
            }
            None => DMatrix::zeros(n, n),
        };
        Ok(Self {
            constant,
            linear: DVector::from_vec(linear),
            quadratic,
        })
    }

    /// The constant field value on a 2d-dimensional space.
    pub fn constant(space_dim: usize, value: f64) -> Self {
        Self {
            constant: value,
            linear: DVector::zeros(space_dim),
            quadratic: DMatrix::zeros(space_dim, space_dim),
        }
    }

    /// Affine field c + b·z.
    pub fn affine(constant: f64, linear: Vec<f64>) -> Result<Self, GeometryError> {
        Self::new(constant, linear, None)
    }

    pub fn space_dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        self.constant + self.linear.dot(z) + 0.5 * (&self.quadratic * z).dot(z)
    }

    /// Closed-form gradient b + Qz.
    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.linear + &self.quadratic * z
    }

    /// The (constant) Hessian Q.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.quadratic
    }

    /// Hessian operator norm; the gradient's Lipschitz constant.
    pub fn hessian_norm(&self) -> f64 {
        if self.quadratic.iter().all(|q| *q == 0.0) {
            0.0
        } else {
            self.quadratic
                .clone()
                .svd(false, false)
                .singular_values
                .max()
        }
    }
}

/// How an action gradient is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientSpec {
    /// Differentiate the polynomial action in closed form.
    Analytic,
    /// Central finite differences with step 1e-6·(1 + ‖z‖).
    FiniteDifference,
}

/// Step used by the finite-difference gradient.
pub fn finite_difference_step(z: &SlowPoint) -> f64 {
    1e-6 * (1.0 + z.coords().norm())
}

/// An action J_c of a family of periodic orbits, together with the orbit
/// period T_c. Both are scalar fields of the slow variables only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingHamiltonian {
    label: String,
    action: PolyField,
    gradient: GradientSpec,
    period: PolyField,
}

impl GuidingHamiltonian {
    pub fn new(
        label: impl Into<String>,
        action: PolyField,
        gradient: GradientSpec,
        period: PolyField,
    ) -> Result<Self, GeometryError> {
        if action.space_dim() != period.space_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: action.space_dim(),
                got: period.space_dim(),
            });
        }
        Ok(Self {
            label: label.into(),
            action,
            gradient,
            period,
        })
    }

    /// Action with analytic gradient and constant unit period.
    pub fn with_unit_period(
        label: impl Into<String>,
        action: PolyField,
    ) -> Result<Self, GeometryError> {
        let dim = action.space_dim();
        Self::new(
            label,
            action,
            GradientSpec::Analytic,
            PolyField::constant(dim, 1.0),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn action(&self) -> &PolyField {
        &self.action
    }

    pub fn gradient_spec(&self) -> GradientSpec {
        self.gradient
    }

    pub fn action_at(&self, z: &SlowPoint) -> f64 {
        self.action.value(z.coords())
    }

    pub fn period_at(&self, z: &SlowPoint) -> Result<f64, GeometryError> {
        let t = self.period.value(z.coords());
        if !t.is_finite() || t <= 0.0 {
            return Err(GeometryError::NonPositivePeriod(t));
        }
        Ok(t)
    }

    /// ∇_z J_c(z). Strict about the domain: z must lie inside the box.
    pub fn grad_action(
        &self,
        z: &SlowPoint,
        domain: &DomainBox,
    ) -> Result<DVector<f64>, GeometryError> {
        if !domain.contains(z) {
            return Err(GeometryError::OutOfDomain);
        }
        let grad = match self.gradient {
            GradientSpec::Analytic => self.action.gradient(z.coords()),
            GradientSpec::FiniteDifference => self.finite_difference_gradient(z),
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(GeometryError::NonFiniteGradient);
        }
        Ok(grad)
    }

    fn finite_difference_gradient(&self, z: &SlowPoint) -> DVector<f64> {
        let h = finite_difference_step(z);
        let n = z.space_dim();
        DVector::from_fn(n, |axis, _| {
            let mut plus = z.coords().clone();
            let mut minus = z.coords().clone();
            plus[axis] += h;
            minus[axis] -= h;
            (self.action.value(&plus) - self.action.value(&minus)) / (2.0 * h)
        })
    }

    /// The guiding vector field X_c(z) = Ω·∇J_c(z) / T_c(z).
    pub fn guiding_field(
        &self,
        z: &SlowPoint,
        domain: &DomainBox,
    ) -> Result<DVector<f64>, GeometryError> {
        let grad = self.grad_action(z, domain)?;
        let period = self.period_at(z)?;
        Ok(hamiltonian_field(&grad) / period)
    }

    /// The per-return slow displacement direction T_c(z)·X_c(z) = Ω·∇J_c(z);
    /// the period cancels exactly. Evaluated without the domain gate because
    /// reduced-map iterates are allowed small excursions outside the box.
    pub fn drift(&self, z: &SlowPoint) -> Result<DVector<f64>, GeometryError> {
        let grad = match self.gradient {
            GradientSpec::Analytic => self.action.gradient(z.coords()),
            GradientSpec::FiniteDifference => self.finite_difference_gradient(z),
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(GeometryError::NonFiniteGradient);
        }
        Ok(hamiltonian_field(&grad))
    }

    /// Jacobian of the drift, Ω·HessJ_c; constant for polynomial actions.
    pub fn drift_jacobian(&self) -> DMatrix<f64> {
        let q = self.action.hessian();
        let n = q.nrows();
        let mut jac = DMatrix::zeros(n, n);
        for col in 0..n {
            let rotated = hamiltonian_field(&DVector::from(q.column(col).clone_owned()));
            jac.set_column(col, &rotated);
        }
        jac
    }
}

/// Blockwise symplectic rotation (g_u, g_v) ↦ (g_v, −g_u).
///
/// Applied to an action gradient this yields the Hamiltonian vector field
/// u̇ = ∂J/∂v, v̇ = −∂J/∂u (before the 1/T_c period scaling).
pub fn hamiltonian_field(grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    debug_assert!(n.is_multiple_of(2), "gradient must have even length");
    let d = n / 2;
    DVector::from_fn(n, |i, _| if i < d { grad[i + d] } else { -grad[i - d] })
}

/// The n actions J_c with their periods, over a common domain box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingFieldSet {
    fields: Vec<GuidingHamiltonian>,
    domain: DomainBox,
}

impl GuidingFieldSet {
    /// Requires n ≥ 2d+1 actions with distinct labels, all matching the
    /// domain dimension.
    pub fn new(fields: Vec<GuidingHamiltonian>, domain: DomainBox) -> Result<Self, GeometryError> {
        let needed = domain.space_dim() + 1;
        if fields.len() < needed {
            return Err(GeometryError::TooFewFields {
                needed,
                got: fields.len(),
            });
        }
        for (i, f) in fields.iter().enumerate() {
            if f.action.space_dim() != domain.space_dim() {
                return Err(GeometryError::DimensionMismatch {
                    expected: domain.space_dim(),
                    got: f.action.space_dim(),
                });
            }
            if fields[..i].iter().any(|g| g.label == f.label) {
                return Err(GeometryError::DuplicateLabel(f.label.clone()));
            }
        }
        Ok(Self { fields, domain })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn space_dim(&self) -> usize {
        self.domain.space_dim()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn field(&self, index: usize) -> &GuidingHamiltonian {
        &self.fields[index]
    }

    pub fn fields(&self) -> &[GuidingHamiltonian] {
        &self.fields
    }

    pub fn label(&self, index: usize) -> &str {
        self.fields[index].label()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.label()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.label() == label)
    }

    pub fn grad_action(&self, index: usize, z: &SlowPoint) -> Result<DVector<f64>, GeometryError> {
        self.fields[index].grad_action(z, &self.domain)
    }

    pub fn guiding_field(
        &self,
        index: usize,
        z: &SlowPoint,
    ) -> Result<DVector<f64>, GeometryError> {
        self.fields[index].guiding_field(z, &self.domain)
    }

    /// All n gradients at z, in field order.
    pub fn gradients_at(&self, z: &SlowPoint) -> Result<Vec<DVector<f64>>, GeometryError> {
        self.fields
            .iter()
            .map(|f| f.grad_action(z, &self.domain))
            .collect()
    }

    /// All n guiding vectors at z, in field order.
    pub fn guiding_fields_at(&self, z: &SlowPoint) -> Result<Vec<DVector<f64>>, GeometryError> {
        self.fields
            .iter()
            .map(|f| f.guiding_field(z, &self.domain))
            .collect()
    }
}

/// The worked three-action system with d = 1.
///
/// The perturbed actions are chosen so the gradients are position
/// independent: ∇J_{c1} = μ·e_u, ∇J_{c2} = μ·e_v, ∇J_{c3} = −μ·(e_u + e_v),
/// which places 0 strictly inside their convex hull for every μ > 0. The
/// O(μ²) remainder of the underlying perturbation expansion is dropped.
pub fn example_system(
    mu: f64,
    base_actions: [f64; 3],
    periods: [f64; 3],
    domain: DomainBox,
) -> Result<GuidingFieldSet, GeometryError> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(GeometryError::Config(format!(
            "example system needs mu > 0, got {mu}"
        )));
    }
    if domain.dim() != 1 {
        return Err(GeometryError::Config(format!(
            "example system is defined for d = 1, got d = {}",
            domain.dim()
        )));
    }
    let linear_parts: [[f64; 2]; 3] = [[mu, 0.0], [0.0, mu], [-mu, -mu]];
    let labels = ["c1", "c2", "c3"];
    let mut fields = Vec::with_capacity(3);
    for i in 0..3 {
        let period = periods[i];
        if !period.is_finite() || period <= 0.0 {
            return Err(GeometryError::NonPositivePeriod(period));
        }
        let action = PolyField::affine(base_actions[i], linear_parts[i].to_vec())?;
        fields.push(GuidingHamiltonian::new(
            labels[i],
            action,
            GradientSpec::Analytic,
            PolyField::constant(2, period),
        )?);
    }
    GuidingFieldSet::new(fields, domain)
}

/// Example system with zero base actions and unit periods.
pub fn example_system_default(
    mu: f64,
    domain: DomainBox,
) -> Result<GuidingFieldSet, GeometryError> {
    example_system(mu, [0.0; 3], [1.0; 3], domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> DomainBox {
        DomainBox::symmetric(1, 1.0).unwrap()
    }

    fn example() -> GuidingFieldSet {
        example_system(0.1, [0.0; 3], [1.0; 3], unit_box()).unwrap()
    }

    #[test]
    fn slow_point_rejects_odd_and_nonfinite() {
        assert!(SlowPoint::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(SlowPoint::new(vec![]).is_err());
        assert!(SlowPoint::new(vec![f64::NAN, 0.0]).is_err());
        let z = SlowPoint::new(vec![0.5, -0.25]).unwrap();
        assert_eq!(z.dim(), 1);
        assert_eq!(z.u(), &[0.5]);
        assert_eq!(z.v(), &[-0.25]);
    }

    #[test]
    fn grad_action_example_c1_is_mu_e_u() {
        let fields = example();
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let g = fields.grad_action(0, &z).unwrap();
        assert_relative_eq!(g[0], 0.1, max_relative = 1e-12);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn grad_action_constant_is_zero() {
        let action = PolyField::constant(2, 5.0);
        let h = GuidingHamiltonian::with_unit_period("flat", action).unwrap();
        let z = SlowPoint::new(vec![0.3, -0.7]).unwrap();
        let g = h.grad_action(&z, &unit_box()).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn grad_action_bilinear_uv() {
        // J(u, v) = u·v comes from Q = [[0, 1], [1, 0]].
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let action = PolyField::new(0.0, vec![0.0, 0.0], Some(q)).unwrap();
        let h = GuidingHamiltonian::with_unit_period("uv", action).unwrap();
        let z = SlowPoint::new(vec![2.0, 3.0]).unwrap();
        let domain = DomainBox::symmetric(1, 5.0).unwrap();
        assert_relative_eq!(h.action_at(&z), 6.0, max_relative = 1e-12);
        let g = h.grad_action(&z, &domain).unwrap();
        assert_relative_eq!(g[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(g[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn grad_action_rejects_out_of_domain() {
        let fields = example();
        let z = SlowPoint::new(vec![2.0, 0.0]).unwrap();
        assert!(matches!(
            fields.grad_action(0, &z),
            Err(GeometryError::OutOfDomain)
        ));
    }

    #[test]
    fn hamiltonian_field_d1_rotations() {
        let e_u = DVector::from_vec(vec![1.0, 0.0]);
        let e_v = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(hamiltonian_field(&e_u).as_slice(), &[0.0, -1.0]);
        assert_eq!(hamiltonian_field(&e_v).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn hamiltonian_field_d2_blockwise() {
        let g = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(hamiltonian_field(&g).as_slice(), &[3.0, 4.0, -1.0, -2.0]);
    }

    #[test]
    fn hamiltonian_field_squares_to_minus_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [1usize, 2, 3] {
            for _ in 0..25 {
                let g = DVector::from_fn(2 * d, |_, _| rng.random_range(-3.0..3.0));
                let twice = hamiltonian_field(&hamiltonian_field(&g));
                assert_relative_eq!((twice + &g).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_field_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..25 {
            let a = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let b = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let s: f64 = rng.random_range(-2.0..2.0);
            let lhs = hamiltonian_field(&(&a * s + &b));
            let rhs = hamiltonian_field(&a) * s + hamiltonian_field(&b);
            assert_relative_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn guiding_field_example_values() {
        let fields = example();
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let x1 = fields.guiding_field(0, &z).unwrap();
        assert_relative_eq!(x1[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(x1[1], -0.1, max_relative = 1e-12);
        let x3 = fields.guiding_field(2, &z).unwrap();
        assert_relative_eq!(x3[0], -0.1, max_relative = 1e-12);
        assert_relative_eq!(x3[1], 0.1, max_relative = 1e-12);
    }

    #[test]
    fn guiding_field_scales_inversely_with_period() {
        let doubled = example_system(0.1, [0.0; 3], [2.0, 2.0, 2.0], unit_box()).unwrap();
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let x1 = doubled.guiding_field(0, &z).unwrap();
        assert_relative_eq!(x1[1], -0.05, max_relative = 1e-12);
    }

    #[test]
    fn zero_period_is_a_configuration_error() {
        assert!(matches!(
            example_system(0.1, [0.0; 3], [1.0, 0.0, 1.0], unit_box()),
            Err(GeometryError::NonPositivePeriod(_))
        ));
        // A period field crossing zero inside the domain errors at evaluation.
        let action = PolyField::affine(0.0, vec![1.0, 0.0]).unwrap();
        let period = PolyField::affine(0.0, vec![1.0, 0.0]).unwrap();
        let h = GuidingHamiltonian::new("bad", action, GradientSpec::Analytic, period).unwrap();
        let z = SlowPoint::new(vec![-0.5, 0.0]).unwrap();
        assert!(matches!(
            h.guiding_field(&z, &unit_box()),
            Err(GeometryError::NonPositivePeriod(_))
        ));
    }

    #[test]
    fn example_system_gradients_everywhere() {
        let fields = example();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z = fields.domain().sample(&mut rng);
            let grads = fields.gradients_at(&z).unwrap();
            assert_relative_eq!(grads[0][0], 0.1, max_relative = 1e-12);
            assert_relative_eq!(grads[0][1], 0.0, epsilon = 1e-14);
            assert_relative_eq!(grads[1][0], 0.0, epsilon = 1e-14);
            assert_relative_eq!(grads[1][1], 0.1, max_relative = 1e-12);
            assert_relative_eq!(grads[2][0], -0.1, max_relative = 1e-12);
            assert_relative_eq!(grads[2][1], -0.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn example_system_convex_witness_sums_to_zero() {
        let fields = example();
        let z = fields.domain().center();
        let grads = fields.gradients_at(&z).unwrap();
        let combo = (&grads[0] + &grads[1] + &grads[2]) / 3.0;
        assert_relative_eq!(combo.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn example_system_mu_one_exact_gradient() {
        let fields = example_system(1.0, [0.0; 3], [1.0; 3], unit_box()).unwrap();
        let z = SlowPoint::new(vec![0.25, -0.5]).unwrap();
        let g = fields.grad_action(0, &z).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn example_system_rejects_nonpositive_mu() {
        assert!(example_system(0.0, [0.0; 3], [1.0; 3], unit_box()).is_err());
        assert!(example_system(-0.1, [0.0; 3], [1.0; 3], unit_box()).is_err());
    }

    #[test]
    fn guiding_field_is_tangent_to_action_levels() {
        // ⟨∇J, X⟩ = 0: each action is conserved by its own guiding flow.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let q = DMatrix::from_row_slice(2, 2, &[0.4, 0.3, 0.3, -0.2]);
        let action = PolyField::new(1.0, vec![0.7, -0.3], Some(q)).unwrap();
        let h = GuidingHamiltonian::with_unit_period("quad", action).unwrap();
        let domain = unit_box();
        for _ in 0..50 {
            let z = domain.sample(&mut rng);
            let grad = h.grad_action(&z, &domain).unwrap();
            let field = h.guiding_field(&z, &domain).unwrap();
            assert!(grad.dot(&field).abs() <= 1e-10);
        }
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let q = DMatrix::from_row_slice(2, 2, &[1.2, -0.4, -0.4, 0.8]);
        let action = PolyField::new(0.3, vec![-0.9, 0.5], Some(q)).unwrap();
        let analytic = GuidingHamiltonian::with_unit_period("quad", action.clone()).unwrap();
        let fd = GuidingHamiltonian::new(
            "quad-fd",
            action,
            GradientSpec::FiniteDifference,
            PolyField::constant(2, 1.0),
        )
        .unwrap();
        let domain = unit_box();
        for _ in 0..100 {
            let z = domain.sample(&mut rng);
            let ga = analytic.grad_action(&z, &domain).unwrap();
            let gf = fd.grad_action(&z, &domain).unwrap();
            let scale = 1.0 + ga.norm();
            assert!(
                (ga - gf).norm() <= 1e-6 * scale,
                "finite differences disagree at {:?}",
                z
            );
        }
    }

    #[test]
    fn field_set_validates_labels_and_count() {
        let domain = unit_box();
        let mk = |label: &str| {
            GuidingHamiltonian::with_unit_period(
                label,
                PolyField::affine(0.0, vec![1.0, 0.0]).unwrap(),
            )
            .unwrap()
        };
        let too_few = GuidingFieldSet::new(vec![mk("a"), mk("b")], domain.clone());
        assert!(matches!(
            too_few,
            Err(GeometryError::TooFewFields { needed: 3, got: 2 })
        ));
        let dup = GuidingFieldSet::new(vec![mk("a"), mk("a"), mk("b")], domain);
        assert!(matches!(dup, Err(GeometryError::DuplicateLabel(_))));
    }

    #[test]
    fn grid_covers_box_corners() {
        let domain = unit_box();
        let grid = domain.grid(3);
        assert_eq!(grid.len(), 9);
        assert!(grid.iter().any(|p| p.coords().as_slice() == [-1.0, -1.0]));
        assert!(grid.iter().any(|p| p.coords().as_slice() == [1.0, 1.0]));
        assert_eq!(domain.grid(1).len(), 1);
        assert_eq!(domain.grid(1)[0], domain.center());
    }
}
