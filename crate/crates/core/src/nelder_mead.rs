//! Deterministic Nelder–Mead simplex minimizer.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Stop once `max f − min f` over the simplex falls below this.
    pub f_tol: f64,
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            initial_step: 0.1,
            f_tol: 1e-6,
            max_evals: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn minimize<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let f0 = eval(x0, &mut evals);
    if dim == 0 {
        return NelderMeadResult {
            x: Vec::new(),
            fx: f0,
            evaluations: evals,
            converged: true,
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        if evals >= opts.max_evals {
            break;
        }
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let centroid = |simplex: &[(Vec<f64>, f64)]| -> Vec<f64> {
        let m = simplex.len() - 1;
        let mut c = vec![0.0; dim];
        for (v, _) in &simplex[..m] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        c.iter_mut().for_each(|ci| *ci /= m as f64);
        c
    };
    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect()
    };

    let mut converged = false;
    while simplex.len() == dim + 1 {
        // Stable sort keeps the tie order deterministic.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread < opts.f_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        let c = centroid(&simplex);
        let worst = simplex[dim].0.clone();
        let f_worst = simplex[dim].1;
        let f_best = simplex[0].1;
        let f_second = simplex[dim - 1].1;

        let xr = along(&c, &worst, -REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < f_best {
            let xe = along(&c, &worst, -EXPAND);
            let fe = eval(&xe, &mut evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < f_worst {
            let xc = along(&c, &worst, -CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(&c, &worst, CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= opts.max_evals {
                break;
            }
            let v: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            let fv = eval(&v, &mut evals);
            *vertex = (v, fv);
        }
    }

    let (x, fx) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex is never empty");
    NelderMeadResult {
        x,
        fx,
        evaluations: evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &NelderMeadOptions {
                f_tol: 1e-14,
                max_evals: 5000,
                ..Default::default()
            },
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadOptions {
                initial_step: 0.5,
                f_tol: 1e-16,
                max_evals: 20_000,
            },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn never_worse_than_start_and_respects_budget() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin() * 3.0 + v * v).sum::<f64>();
        let x0 = [2.0, -1.0, 0.5];
        let r = minimize(
            f,
            &x0,
            &NelderMeadOptions {
                max_evals: 30,
                ..Default::default()
            },
        );
        assert!(r.fx <= f(&x0));
        assert!(r.evaluations <= 30 + x0.len() + 1);
    }
}
