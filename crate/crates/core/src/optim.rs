//! Derivative-free minimization with the Nelder–Mead simplex method.
//!
//! Infeasible points are expressed by returning `f64::INFINITY` from the
//! objective; they sort last and the simplex contracts away from them.

/// Simplex coefficients and stopping rules.
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Edge length of the initial axis-aligned simplex.
    pub initial_step: f64,
    /// Stop when every vertex is within this distance of the best one.
    pub diameter_tol: f64,
    pub max_evals: usize,
    /// Rebuild the simplex around the optimum after convergence, until a
    /// restart no longer improves the value by more than this amount.
    pub restart_improvement: Option<f64>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.05,
            diameter_tol: 1e-7,
            max_evals: 5000,
            restart_improvement: Some(1e-12),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

/// Minimizes `f` starting from `x0`.
///
/// `bounds`, when given, only steer the initial simplex: a step that would
/// leave the box is taken in the negative direction instead. Enforcing the
/// bounds is up to the objective.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    bounds: Option<&[(f64, f64)]>,
    opts: &NelderMeadOptions,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
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

    let mut start = x0.to_vec();
    let mut best_value = eval(&start, &mut evals);
    let mut converged;
    loop {
        let (x, v, conv) = run_simplex(&mut eval, &start, best_value, bounds, opts, &mut evals);
        converged = conv;
        let improvement = best_value - v;
        if v <= best_value {
            start = x;
            best_value = v;
        }
        let again = match opts.restart_improvement {
            Some(tol) => converged && improvement > tol && evals < opts.max_evals,
            None => false,
        };
        if !again {
            break;
        }
    }
    Minimum {
        x: start,
        value: best_value,
        evaluations: evals,
        converged,
    }
}

fn run_simplex<E>(
    eval: &mut E,
    x0: &[f64],
    f0: f64,
    bounds: Option<&[(f64, f64)]>,
    opts: &NelderMeadOptions,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vertex> = Vec::with_capacity(n + 1);
    simplex.push(Vertex {
        x: x0.to_vec(),
        f: f0,
    });
    for i in 0..n {
        let mut x = x0.to_vec();
        let mut step = opts.initial_step;
        if let Some(b) = bounds {
            if x[i] + step > b[i].1 && x[i] - step >= b[i].0 {
                step = -step;
            }
        }
        x[i] += step;
        let fx = eval(&x, evals);
        simplex.push(Vertex { x, f: fx });
    }

    let mut converged = false;
    while *evals < opts.max_evals {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        if diameter(&simplex) < opts.diameter_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v.x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = &simplex[n];
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.x)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(opts.reflection);
        let fr = eval(&xr, evals);
        if fr < simplex[0].f {
            let xe = along(opts.reflection * opts.expansion);
            let fe = eval(&xe, evals);
            simplex[n] = if fe < fr {
                Vertex { x: xe, f: fe }
            } else {
                Vertex { x: xr, f: fr }
            };
            continue;
        }
        if fr < simplex[n - 1].f {
            simplex[n] = Vertex { x: xr, f: fr };
            continue;
        }
        // Contraction: outside if the reflected point beats the worst, else inside.
        let (xc, fc) = if fr < simplex[n].f {
            let xc = along(opts.reflection * opts.contraction);
            let fc = eval(&xc, evals);
            (xc, fc)
        } else {
            let xc = along(-opts.contraction);
            let fc = eval(&xc, evals);
            (xc, fc)
        };
        if fc < simplex[n].f.min(fr) {
            simplex[n] = Vertex { x: xc, f: fc };
            continue;
        }
        let best = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            for (xi, bi) in v.x.iter_mut().zip(&best) {
                *xi = bi + opts.shrink * (*xi - bi);
            }
            v.f = eval(&v.x, evals);
        }
    }
    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = simplex.swap_remove(0);
    (best.x, best.f, converged)
}

fn diameter(simplex: &[Vertex]) -> f64 {
    let best = &simplex[0].x;
    simplex[1..]
        .iter()
        .map(|v| {
            v.x.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let m = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2),
            &[0.0, 0.0],
            None,
            &NelderMeadOptions::default(),
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6);
        assert!((m.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let opts = NelderMeadOptions {
            initial_step: 0.5,
            max_evals: 20_000,
            ..Default::default()
        };
        let m = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            None,
            &opts,
        );
        assert!(m.value < 1e-10, "{m:?}");
    }

    #[test]
    fn one_dimensional_with_wall() {
        // Infeasible region x < 0 is +inf; the minimum sits at x = 0.3.
        let m = nelder_mead(
            |x| {
                if x[0] < 0.0 {
                    f64::INFINITY
                } else {
                    (x[0] - 0.3).powi(2)
                }
            },
            &[0.0],
            Some(&[(0.0, 1.0)]),
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn respects_evaluation_budget() {
        let opts = NelderMeadOptions {
            max_evals: 50,
            restart_improvement: None,
            ..Default::default()
        };
        let m = nelder_mead(|x| x.iter().map(|v| v.abs()).sum(), &[3.0; 6], None, &opts);
        assert!(!m.converged);
        assert!(m.evaluations <= 50 + 8);
    }
}
