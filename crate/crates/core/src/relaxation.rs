//! Continuous box relaxation of a QUBO: minimize `x̃ᵀFx̃ + fᵀx̃` over `[0,1]^N`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{min_eigenvalue, QuboProblem};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;

const CONVEXIFY_MARGIN: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;
const PLATEAU_WINDOW: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedSolution {
    pub x_star: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm_final: f64,
    /// Projected-gradient norm stopped shrinking before convergence, which
    /// happens along flat directions of a singular quadratic form.
    pub plateaued: bool,
}

/// Shifts the diagonal by `c` and the linear term by `−c` so that `F` becomes
/// PSD. Binary evaluations are unchanged because `xᵢ² = xᵢ`.
pub fn convexify(problem: &QuboProblem) -> QuboProblem {
    let lam = min_eigenvalue(&problem.quad);
    if lam >= 0.0 {
        return problem.clone();
    }
    let c = -lam + CONVEXIFY_MARGIN;
    let mut out = problem.clone();
    for i in 0..out.n_vars() {
        out.quad[(i, i)] += c;
        out.lin[i] -= c;
    }
    out
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Projected gradient: components pushing out of the box at an active bound are zeroed.
fn projected_gradient_norm(x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    x.iter()
        .zip(g.iter())
        .map(|(&xi, &gi)| {
            let pg = if xi <= 0.0 {
                gi.min(0.0)
            } else if xi >= 1.0 {
                gi.max(0.0)
            } else {
                gi
            };
            pg * pg
        })
        .sum::<f64>()
        .sqrt()
}

/// Projected-gradient descent with fixed step `1/L`, started from the box centre.
///
/// `L = 2·max_i Σ_j |F_ij|` bounds the gradient's Lipschitz constant.
pub fn solve_box_qp(problem: &QuboProblem, tol: f64, max_iter: usize) -> Result<RelaxedSolution> {
    let n = problem.n_vars();
    let lam = min_eigenvalue(&problem.quad);
    if lam < -PSD_TOL {
        return Err(Error::NotConvex {
            min_eigenvalue: lam,
        });
    }
    let row_bound = (0..n)
        .map(|i| problem.quad.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lipschitz = 2.0 * row_bound;

    let mut x = DVector::from_element(n, 0.5);
    let mut grad = problem.gradient(&x);
    let mut pg_norm = projected_gradient_norm(&x, &grad);
    let mut iterations = 0;
    let mut window_start_norm = pg_norm;
    let mut plateaued = false;

    // A zero quadratic has no curvature bound; a single projected step along
    // the (constant) gradient direction lands on the optimal corner.
    let step = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        f64::INFINITY
    };

    while pg_norm > tol && iterations < max_iter {
        let prev_obj = if cfg!(debug_assertions) {
            problem.evaluate_continuous(&x)
        } else {
            0.0
        };
        for i in 0..n {
            let moved = if step.is_finite() {
                x[i] - step * grad[i]
            } else if grad[i] > 0.0 {
                0.0
            } else if grad[i] < 0.0 {
                1.0
            } else {
                x[i]
            };
            x[i] = clamp01(moved);
        }
        if cfg!(debug_assertions) {
            let obj = problem.evaluate_continuous(&x);
            debug_assert!(
                obj <= prev_obj + 1e-12 * prev_obj.abs().max(1.0),
                "projected gradient step increased the objective: {prev_obj} -> {obj}"
            );
        }
        grad = problem.gradient(&x);
        pg_norm = projected_gradient_norm(&x, &grad);
        iterations += 1;
        if iterations % PLATEAU_WINDOW == 0 {
            plateaued = pg_norm > 0.999 * window_start_norm;
            window_start_norm = pg_norm;
        }
    }

    let converged = pg_norm <= tol;
    Ok(RelaxedSolution {
        objective: problem.evaluate_continuous(&x),
        x_star: x.iter().copied().collect(),
        iterations,
        converged,
        grad_norm_final: pg_norm,
        plateaued: plateaued && !converged,
    })
}

/// Convexifies if needed, then solves with the default tolerance and budget.
pub fn relax(problem: &QuboProblem) -> Result<RelaxedSolution> {
    solve_box_qp(&convexify(problem), DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Box-KKT residual check: every component is either interior with a
/// vanishing gradient or sits on a bound with the gradient pointing outward.
pub fn satisfies_box_kkt(problem: &QuboProblem, x: &[f64], tol: f64) -> bool {
    let xv = DVector::from_column_slice(x);
    let g = problem.gradient(&xv);
    x.iter()
        .zip(g.iter())
        .all(|(&xi, &gi)| (xi == 0.0 && gi >= -tol) || (xi == 1.0 && gi <= tol) || gi.abs() <= tol)
}
