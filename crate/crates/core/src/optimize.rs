//! Local minimizers used by the basis search and the convex roof.

/// Outcome of a local minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter below this.
    pub x_tol: f64,
    /// Re-seed a fresh simplex at the best point this many times after
    /// convergence, to escape collapsed simplices.
    pub polish_rounds: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            initial_step: 0.5,
            f_tol: 1e-13,
            x_tol: 1e-9,
            polish_rounds: 2,
        }
    }
}

/// Nelder-Mead with dimension-adaptive coefficients (Gao and Han).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    let mut evals = 0usize;
    let mut iterations = 0usize;
    let mut best_x = x0.to_vec();
    let mut best_f = f(x0);
    evals += 1;
    let mut converged = false;
    let mut step = opts.initial_step;
    for _ in 0..=opts.polish_rounds {
        let run = nelder_mead_once(
            &mut f,
            &best_x,
            step,
            opts,
            opts.max_evals.saturating_sub(evals),
        );
        evals += run.evaluations;
        iterations += run.iterations;
        let improved = run.value < best_f - opts.f_tol;
        if run.value < best_f {
            best_f = run.value;
            best_x = run.x;
        }
        converged = run.converged;
        if !improved || evals >= opts.max_evals {
            break;
        }
        step = (step * 0.5).max(1e-3);
    }
    Minimum {
        x: best_x,
        value: best_f,
        evaluations: evals,
        iterations,
        converged,
    }
}

fn nelder_mead_once<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: f64,
    opts: &NelderMeadOptions,
    budget: usize,
) -> Minimum {
    let n = x0.len();
    let nf = n.max(1) as f64;
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

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

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();
    let mut iterations = 0usize;
    let mut converged = false;

    while evals < budget {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= opts.f_tol && diameter <= opts.x_tol.max(1e-14) || n == 0 {
            converged = true;
            break;
        }
        if spread.abs() <= opts.f_tol * 1e-3 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(alpha * beta);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(alpha * gamma);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(values[n]) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + delta * (x - b))
                .collect();
            values[i] = eval(&shrunk, &mut evals);
            simplex[i] = shrunk;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
        iterations,
        converged,
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Converged when the gradient max-norm drops below this.
    pub grad_tol: f64,
    /// ... or when an iteration improves the value by less than this.
    pub f_tol: f64,
    /// Central-difference step.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            grad_tol: 1e-7,
            f_tol: 1e-12,
            fd_step: 1e-6,
        }
    }
}

fn central_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    h: f64,
    evals: &mut usize,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            *evals += 2;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton minimization with finite-difference gradients and an
/// Armijo backtracking line search.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 1usize;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = central_gradient(&mut f, &x, opts.fd_step, &mut evals);
    // inverse Hessian approximation, row-major
    let identity = |n: usize| {
        let mut h = vec![0.0; n * n];
        (0..n).for_each(|i| h[i * n + i] = 1.0);
        h
    };
    let mut hinv = identity(n);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.grad_tol {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = (0..n)
            .map(|i| -dot(&hinv[i * n..(i + 1) * n], &g))
            .collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            hinv = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = f(&trial);
            evals += 1;
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no descent along the current direction: restart from steepest descent once
            if hinv != identity(n) {
                hinv = identity(n);
                continue;
            }
            converged = true;
            break;
        };
        let g_new = central_gradient(&mut f, &x_new, opts.fd_step, &mut evals);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if improvement.abs() < opts.f_tol {
            converged = true;
            break;
        }
        if sy > 1e-14 {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f =
            |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + (x[2] - 0.5).powi(2);
        let m = nelder_mead(f, &[0.0, 0.0, 0.0], &NelderMeadOptions::default());
        assert!(m.value < 1e-12, "{m:?}");
        assert!((m.x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions::default());
        assert!(m.value < 1e-10, "{m:?}");
    }

    #[test]
    fn nelder_mead_respects_budget() {
        let opts = NelderMeadOptions {
            max_evals: 50,
            ..Default::default()
        };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0, 0.3, 0.7], &opts);
        assert!(m.evaluations <= 60);
    }

    #[test]
    fn bfgs_rosenbrock() {
        let m = bfgs(
            rosenbrock,
            &[-1.2, 1.0, -0.5, 0.8],
            &BfgsOptions {
                max_iterations: 2000,
                ..Default::default()
            },
        );
        assert!(m.value < 1e-8, "{m:?}");
        assert!(m.converged);
    }

    #[test]
    fn bfgs_nonsmooth_abs_makes_progress() {
        let f = |x: &[f64]| x[0].abs() + (x[1] - 1.0).powi(2);
        let m = bfgs(f, &[0.7, -0.3], &BfgsOptions::default());
        assert!(m.value < 1e-4, "{m:?}");
    }
}
