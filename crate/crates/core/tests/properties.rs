//! Property tests for the algebraic invariants of the core.

use nalgebra::DVector;
use proptest::prelude::*;

use slowshadow::geometry::{example_system_default, hamiltonian_field, DomainBox, SlowPoint};
use slowshadow::spanning::{bound_d, certify_gradients, decompose_auto};
use slowshadow::symbolic::Code;

fn even_vector(max_d: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_d).prop_flat_map(|d| prop::collection::vec(-10.0..10.0f64, 2 * d))
}

proptest! {
    /// Applying the symplectic rotation twice negates the input.
    #[test]
    fn rotation_squares_to_minus_identity(coords in even_vector(3)) {
        let g = DVector::from_vec(coords);
        let twice = hamiltonian_field(&hamiltonian_field(&g));
        prop_assert!((twice + &g).norm() <= 1e-12 * (1.0 + g.norm()));
    }

    /// The rotation is linear.
    #[test]
    fn rotation_is_linear(
        a in prop::collection::vec(-5.0..5.0f64, 4),
        b in prop::collection::vec(-5.0..5.0f64, 4),
        s in -3.0..3.0f64,
    ) {
        let a = DVector::from_vec(a);
        let b = DVector::from_vec(b);
        let lhs = hamiltonian_field(&(&a * s + &b));
        let rhs = hamiltonian_field(&a) * s + hamiltonian_field(&b);
        prop_assert!((lhs - rhs).norm() <= 1e-12);
    }

    /// The interiority verdict is invariant under positive rescaling of the
    /// gradient set (the margin is not).
    #[test]
    fn certificate_verdict_survives_rescaling(
        raw in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 3..7),
        scale in 0.01..100.0f64,
    ) {
        let gradients: Vec<DVector<f64>> =
            raw.iter().map(|g| DVector::from_row_slice(g)).collect();
        let scaled: Vec<DVector<f64>> = gradients.iter().map(|g| g * scale).collect();
        prop_assert_eq!(
            certify_gradients(&gradients).satisfied,
            certify_gradients(&scaled).satisfied
        );
    }

    /// Conic decomposition over the worked example: nonnegative times on at
    /// most 2d fields, reconstruction at rounding level, norm within the
    /// sampled uniform bound (computed once; it scales linearly).
    #[test]
    fn decomposition_is_conic_and_bounded(
        vx in -1.0..1.0f64,
        vy in -1.0..1.0f64,
    ) {
        static D_UNIT: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
        let fields = example_system_default(0.1, DomainBox::symmetric(1, 1.0).unwrap()).unwrap();
        let z = SlowPoint::new(vec![0.0, 0.0]).unwrap();
        let d_unit = *D_UNIT.get_or_init(|| bound_d(&fields, &z, 1.0).unwrap());
        let v = DVector::from_vec(vec![vx, vy]);
        prop_assume!(v.norm() > 1e-9);
        let times = decompose_auto(&v, &fields, &z).unwrap();
        prop_assert_eq!(times.selection.len(), 2);
        prop_assert!(times.times.iter().all(|&a| a >= 0.0));
        prop_assert!(times.norm() <= d_unit * v.norm() * (1.0 + 1e-9));
    }

    /// Code text form round-trips.
    #[test]
    fn code_display_round_trips(
        base in -25i64..25,
        window in prop::collection::vec(0usize..3, 1..12),
        left in 0usize..3,
        right in 0usize..3,
    ) {
        let labels = ["c1", "c2", "c3"];
        let code = Code::new(base, window, left, right).unwrap();
        let parsed = Code::parse(&code.display(&labels), &labels).unwrap();
        prop_assert_eq!(parsed, code);
    }

    /// Splicing preserves every index at or before the splice point and
    /// installs the tail after the new symbols.
    #[test]
    fn splice_preserves_the_past(
        base in -10i64..10,
        window in prop::collection::vec(0usize..3, 1..10),
        at in -15i64..15,
        extra in prop::collection::vec(0usize..3, 0..6),
        tail in 0usize..3,
    ) {
        let code = Code::new(base, window, 0, 1).unwrap();
        let spliced = code.splice_after(at, &extra, tail);
        for i in (at - 20)..=at {
            prop_assert_eq!(spliced.lookup(i), code.lookup(i));
        }
        for (j, &symbol) in extra.iter().enumerate() {
            prop_assert_eq!(spliced.lookup(at + 1 + j as i64), symbol);
        }
        if !extra.is_empty() {
            prop_assert_eq!(spliced.lookup(at + extra.len() as i64 + 50), tail);
        }
    }
}
