//! Derivative-free Nelder–Mead simplex search with restarts.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below
    /// `ftol · (|f_best| + 1)`.
    pub ftol: f64,
    /// Stop when every vertex is within `xtol` of the best one.
    pub xtol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            ftol: 1e-12,
            xtol: 1e-9,
            initial_step: 0.5,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as
/// `+∞`, so infeasible regions can be signalled that way. The returned value
/// is never worse than `f(x0)`.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut iterations = 0usize;
    let mut converged = false;

    for round in 0..=cfg.restarts {
        let step = cfg.initial_step / (1 << round.min(8)) as f64;
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += step;
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        let before = best_f;
        converged = false;

        while evals < cfg.max_evals {
            iterations += 1;
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[n].1;
            let spread = f_worst - f_best;
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (spread.is_finite() && spread <= cfg.ftol * (f_best.abs() + 1.0)) || size <= cfg.xtol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let worst = simplex[n].0.clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < f_worst {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < f_worst.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x0 = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let xs: Vec<f64> = x0.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                let fs = eval(&xs, &mut evals);
                *vertex = (xs, fs);
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_f {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        let gained = before - best_f;
        if evals >= cfg.max_evals {
            converged = false;
            break;
        }
        if round > 0 && gained <= cfg.ftol * (best_f.abs() + 1.0) {
            break;
        }
    }

    Minimum {
        x: best_x,
        f: best_f,
        evals,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(rosen, &[-1.2, 1.0], &NelderMeadConfig::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn infeasible_values_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::NAN } else { (x[0] - 0.5).powi(2) + x[1] * x[1] };
        let m = nelder_mead(f, &[2.0, 1.0], &NelderMeadConfig::default());
        assert!(m.f.is_finite());
        assert!(m.x[0] >= 0.5);
        assert!(m.f < 1e-8);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| x[0].abs();
        let m = nelder_mead(f, &[0.0], &NelderMeadConfig::default());
        assert_eq!(m.f, 0.0);
    }
}
