//! Probit regression by Newton–Raphson (Fisher scoring).

use crate::error::{Error, Result};
use crate::linalg::{solve_square, Matrix};
use crate::scalar::Scalar;
use crate::stats::{normal_cdf, normal_pdf};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitFit<T> {
    pub coefficients: Vec<T>,
    /// Fitted `P(y = 1)` per row.
    pub probabilities: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Probit of a binary response on the columns of `x`.
///
/// When the response does not vary the fit is the constant sample share and
/// `coefficients` is empty.
pub fn probit<T: Scalar>(x: &Matrix<T>, y: &[bool], max_iter: usize, tol: T) -> Result<ProbitFit<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("design has {n} rows, response has {}", y.len())));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let ones = y.iter().filter(|&&v| v).count();
    if ones == 0 || ones == n {
        let share = T::from_usize_lossy(ones) / T::from_usize_lossy(n);
        return Ok(ProbitFit { coefficients: Vec::new(), probabilities: vec![share; n], iterations: 0, converged: true });
    }
    let eps = T::lit(1e-10);
    let mut beta = vec![T::zero(); p];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let eta = x.mat_vec(&beta);
        let mut info = Matrix::zeros(p, p);
        let mut score = vec![T::zero(); p];
        for r in 0..n {
            let cdf = normal_cdf(eta[r]).max(eps).min(T::one() - eps);
            let pdf = normal_pdf(eta[r]);
            let w = pdf * pdf / (cdf * (T::one() - cdf));
            let resid = if y[r] { T::one() - cdf } else { -cdf };
            let g = pdf * resid / (cdf * (T::one() - cdf));
            let row = x.row(r);
            for a in 0..p {
                score[a] += g * row[a];
                for b in 0..p {
                    info[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        let step = solve_square(&info, &score)?;
        let size = step.iter().fold(T::zero(), |m, s| m.max(s.abs()));
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += *s);
        if size <= tol {
            converged = true;
            break;
        }
    }
    let probabilities = x.mat_vec(&beta).into_iter().map(normal_cdf).collect();
    Ok(ProbitFit { coefficients: beta, probabilities, iterations, converged })
}
