//! Multistart Nelder–Mead simplex search with optional box bounds.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions<T> {
    /// Convergence when both the simplex diameter (∞-norm) and the spread of
    /// objective values fall below this.
    pub tol: T,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: T,
    /// Optional `(lower, upper)` per coordinate; trial points are clamped.
    pub bounds: Option<Vec<(T, T)>>,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-8), max_iter: 2000, initial_step: T::lit(0.1), bounds: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexDiagnostics<T> {
    /// Objective at each start point.
    pub start_values: Vec<T>,
    /// Terminal objective of each start.
    pub terminal_values: Vec<T>,
    /// Iterations summed over starts.
    pub iterations: usize,
    pub evaluations: usize,
    /// Number of starts that met the tolerance.
    pub converged_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult<T> {
    pub argmin: Vec<T>,
    pub value: T,
    pub diagnostics: SimplexDiagnostics<T>,
}

struct Run<T> {
    x: Vec<T>,
    f: T,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

fn clamp<T: Scalar>(x: &mut [T], bounds: &Option<Vec<(T, T)>>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.max(lo).min(hi);
        }
    }
}

fn nelder_mead<T: Scalar, F: FnMut(&[T]) -> T>(f: &mut F, start: &[T], opts: &SimplexOptions<T>, budget: usize) -> Run<T> {
    let n = start.len();
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| -> T {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { T::infinity() } else { v }
    };

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0, &opts.bounds);
    simplex.push(x0.clone());
    for i in 0..n {
        let mut xi = x0.clone();
        let mut step = opts.initial_step;
        if let Some(b) = &opts.bounds {
            if xi[i] + step > b[i].1 {
                step = -step;
            }
        }
        xi[i] += step;
        clamp(&mut xi, &opts.bounds);
        simplex.push(xi);
    }
    let mut values: Vec<T> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget {
        // order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[0]).map(|(&a, &b)| (a - b).abs()))
            .fold(T::zero(), T::max);
        let spread = (values[n] - values[0]).abs();
        if diameter <= opts.tol && spread <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for x in &simplex[..n] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c += v;
            }
        }
        let nn = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c /= nn);

        let towards = |coef: T, from: &[T]| -> Vec<T> {
            let mut p: Vec<T> = centroid.iter().zip(from).map(|(&c, &w)| c + coef * (c - w)).collect();
            clamp(&mut p, &opts.bounds);
            p
        };
        let xr = towards(alpha, &simplex[n]);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = towards(gamma, &simplex[n]);
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
            // outside contraction
            let mut xc: Vec<T> = centroid.iter().zip(&xr).map(|(&c, &r)| c + rho * (r - c)).collect();
            clamp(&mut xc, &opts.bounds);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let mut xc: Vec<T> = centroid.iter().zip(&simplex[n]).map(|(&c, &w)| c + rho * (w - c)).collect();
            clamp(&mut xc, &opts.bounds);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward best
        let best = simplex[0].clone();
        for i in 1..=n {
            let shrunk: Vec<T> = best.iter().zip(&simplex[i]).map(|(&b, &x)| b + sigma * (x - b)).collect();
            simplex[i] = shrunk;
            values[i] = eval(&simplex[i], &mut evals);
        }
    }
    let (bi, _) = values
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    Run { x: simplex[bi].clone(), f: values[bi], iterations, evaluations: evals, converged }
}

/// Runs a simplex search from every start and returns the best terminal point.
///
/// Each start is followed by one restart from its terminal point, which
/// guards against a collapsed simplex. Deterministic given the starts.
pub fn minimize_derivative_free<T: Scalar, F: FnMut(&[T]) -> T>(
    mut objective: F,
    starts: &[Vec<T>],
    opts: &SimplexOptions<T>,
) -> Result<SimplexResult<T>> {
    if starts.is_empty() {
        return Err(Error::InvalidConfig { field: "starts".into(), reason: "at least one start is required".into() });
    }
    let mut diag = SimplexDiagnostics {
        start_values: Vec::with_capacity(starts.len()),
        terminal_values: Vec::with_capacity(starts.len()),
        iterations: 0,
        evaluations: 0,
        converged_starts: 0,
    };
    let mut best: Option<(Vec<T>, T)> = None;
    for s in starts {
        let mut s0 = s.clone();
        clamp(&mut s0, &opts.bounds);
        let f0 = objective(&s0);
        diag.evaluations += 1;
        if !f0.is_finite() {
            return Err(Error::InvalidConfig { field: "starts".into(), reason: "objective is not finite at a start".into() });
        }
        diag.start_values.push(f0);
        let first = nelder_mead(&mut objective, &s0, opts, opts.max_iter);
        let remaining = opts.max_iter.saturating_sub(first.iterations).max(1);
        let second = nelder_mead(&mut objective, &first.x, opts, remaining);
        diag.iterations += first.iterations + second.iterations;
        diag.evaluations += first.evaluations + second.evaluations;
        let run = if second.f <= first.f { second } else { first };
        let converged = run.converged;
        if converged {
            diag.converged_starts += 1;
        }
        diag.terminal_values.push(run.f);
        if converged && best.as_ref().is_none_or(|b| run.f < b.1) {
            best = Some((run.x, run.f));
        }
    }
    match best {
        Some((argmin, value)) => Ok(SimplexResult { argmin, value, diagnostics: diag }),
        None => Err(Error::OptimizerDidNotConverge {
            best_value: diag.terminal_values.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64())),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize_derivative_free(|x: &[f64]| (x[0] - 3.0).powi(2), &[vec![0.0]], &SimplexOptions::default()).unwrap();
        assert!((r.argmin[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn anisotropic_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 10.0 * x[1] * x[1];
        let r = minimize_derivative_free(f, &[vec![1.5, -2.0]], &SimplexOptions::default()).unwrap();
        assert!(r.argmin[0].abs() < 1e-7 && r.argmin[1].abs() < 1e-7);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let opts = SimplexOptions { tol: 1e-10, max_iter: 5000, ..SimplexOptions::default() };
        let r = minimize_derivative_free(f, &[vec![-1.2, 1.0]], &opts).unwrap();
        assert!((r.argmin[0] - 1.0).abs() < 1e-4, "{:?}", r.argmin);
        assert!((r.argmin[1] - 1.0).abs() < 1e-4, "{:?}", r.argmin);
    }

    #[test]
    fn bounds_are_respected() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2);
        let opts = SimplexOptions { bounds: Some(vec![(0.0, 1.0)]), ..SimplexOptions::default() };
        let r = minimize_derivative_free(f, &[vec![0.5]], &opts).unwrap();
        assert!(r.argmin[0].abs() < 1e-7);
    }

    #[test]
    fn best_of_several_starts_and_never_worse_than_start() {
        // two basins; the deeper one at x = 2
        let f = |x: &[f64]| ((x[0] + 1.0).powi(2) * (x[0] - 2.0).powi(2)) - 0.5 * x[0];
        let starts = vec![vec![-1.5], vec![2.5], vec![0.0]];
        let r = minimize_derivative_free(f, &starts, &SimplexOptions::default()).unwrap();
        assert!(r.argmin[0] > 1.5);
        for &s in &r.diagnostics.start_values {
            assert!(r.value <= s);
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let opts = SimplexOptions { max_iter: 3, ..SimplexOptions::default() };
        assert!(matches!(
            minimize_derivative_free(f, &[vec![-1.2, 1.0]], &opts),
            Err(Error::OptimizerDidNotConverge { .. })
        ));
    }
}
