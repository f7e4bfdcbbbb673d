//! Dense two-phase simplex for the small equality-form programs used by the
//! spanning certificates:  minimize c·x  subject to  A x = b,  x ≥ 0.
//!
//! The problems here have a handful of rows (2d+1) and columns (n fields
//! plus slack-like variables), so a tableau with Bland's anti-cycling rule
//! is both simple and exact enough.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
}

/// Solve `min c·x  s.t.  A x = b, x ≥ 0` with a two-phase tableau simplex.
pub(crate) fn solve_standard_form(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> LpOutcome {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m, "row count mismatch");
    assert_eq!(c.len(), n, "column count mismatch");

    // Row equilibration keeps pivot tolerances meaningful when the input is
    // built from O(mu) gradients.
    let mut tableau = DMatrix::zeros(m, n + m + 1);
    tableau.view_mut((0, 0), (m, n)).copy_from(a);
    for r in 0..m {
        tableau[(r, n + m)] = b[r];
        let scale = (0..n)
            .map(|j| tableau[(r, j)].abs())
            .fold(tableau[(r, n + m)].abs(), f64::max);
        if scale > 0.0 {
            for j in 0..(n + m + 1) {
                tableau[(r, j)] /= scale;
            }
        }
        // Phase 1 needs b ≥ 0.
        if tableau[(r, n + m)] < 0.0 {
            for j in 0..(n + m + 1) {
                tableau[(r, j)] = -tableau[(r, j)];
            }
        }
        tableau[(r, n + r)] = 1.0; // artificial variable
    }

    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: minimize the sum of artificials.
    let mut phase1_cost = DVector::zeros(n + m);
    for j in n..n + m {
        phase1_cost[j] = 1.0;
    }
    if !run_simplex(&mut tableau, &mut basis, &phase1_cost, n + m) {
        // Phase 1 is always bounded; a failure here is an iteration blowup.
        return LpOutcome::Infeasible;
    }
    let phase1_obj: f64 = basis
        .iter()
        .enumerate()
        .map(|(r, &j)| phase1_cost[j] * tableau[(r, n + m)])
        .sum();
    if phase1_obj > FEAS_TOL {
        return LpOutcome::Infeasible;
    }

    // Drive leftover artificials out of the basis; drop redundant rows.
    let mut drop_rows: Vec<usize> = Vec::new();
    for r in 0..m {
        if basis[r] < n {
            continue;
        }
        let pivot_col = (0..n).find(|&j| tableau[(r, j)].abs() > PIVOT_TOL);
        match pivot_col {
            Some(j) => {
                pivot(&mut tableau, &mut basis, r, j);
            }
            None => drop_rows.push(r),
        }
    }
    let (mut tableau, mut basis) = if drop_rows.is_empty() {
        (tableau, basis)
    } else {
        let keep: Vec<usize> = (0..m).filter(|r| !drop_rows.contains(r)).collect();
        let mut t = DMatrix::zeros(keep.len(), n + m + 1);
        let mut bs = Vec::with_capacity(keep.len());
        for (new_r, &old_r) in keep.iter().enumerate() {
            t.row_mut(new_r).copy_from(&tableau.row(old_r));
            bs.push(basis[old_r]);
        }
        (t, bs)
    };

    // Phase 2 on the original costs; artificial columns stay but may not
    // re-enter (cost +inf is emulated by excluding them from pricing).
    let mut phase2_cost = DVector::zeros(n + m);
    phase2_cost.rows_mut(0, n).copy_from(c);
    if !run_simplex(&mut tableau, &mut basis, &phase2_cost, n) {
        return LpOutcome::Unbounded;
    }

    let rhs_col = n + m;
    let mut x = DVector::zeros(n);
    for (r, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = tableau[(r, rhs_col)];
        }
    }
    let objective = c.dot(&x);
    LpOutcome::Optimal(LpSolution { x, objective })
}

/// Bland-rule simplex iterations over the first `price_cols` columns.
/// Returns false when an entering column proves the problem unbounded
/// (or the iteration cap is hit).
fn run_simplex(
    tableau: &mut DMatrix<f64>,
    basis: &mut [usize],
    cost: &DVector<f64>,
    price_cols: usize,
) -> bool {
    let m = tableau.nrows();
    let rhs_col = tableau.ncols() - 1;
    for _ in 0..MAX_ITERS {
        // Reduced costs relative to the current basis.
        let mut entering = None;
        for j in 0..price_cols {
            if basis.contains(&j) {
                continue;
            }
            let reduced: f64 = cost[j]
                - (0..m)
                    .map(|r| cost[basis[r]] * tableau[(r, j)])
                    .sum::<f64>();
            if reduced < -PIVOT_TOL {
                entering = Some(j); // Bland: smallest index
                break;
            }
        }
        let Some(col) = entering else {
            return true; // optimal
        };

        // Ratio test, ties broken by smallest basis index (Bland).
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let coeff = tableau[(r, col)];
            if coeff > PIVOT_TOL {
                let ratio = tableau[(r, rhs_col)] / coeff;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - PIVOT_TOL
                            || (ratio <= lratio + PIVOT_TOL && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return false; // unbounded direction
        };
        pivot(tableau, basis, row, col);
    }
    false
}

fn pivot(tableau: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let m = tableau.nrows();
    let cols = tableau.ncols();
    let p = tableau[(row, col)];
    for j in 0..cols {
        tableau[(row, j)] /= p;
    }
    for r in 0..m {
        if r == row {
            continue;
        }
        let factor = tableau[(r, col)];
        if factor != 0.0 {
            for j in 0..cols {
                tableau[(r, j)] -= factor * tableau[(row, j)];
            }
        }
    }
    basis[row] = col;
}
