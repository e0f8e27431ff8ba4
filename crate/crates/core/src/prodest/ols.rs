use crate::error::{Error, Result};
use crate::linalg::{Matrix, PivotedQr};
use crate::scalar::Scalar;

/// Ordinary least-squares fit with classical standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
    pub fitted: Vec<T>,
    /// `sqrt(diag(s² (XᵀX)⁻¹))`.
    pub standard_errors: Vec<T>,
    /// Residual variance `RSS / (n − p)`.
    pub sigma2: T,
    pub r_squared: T,
    pub df_resid: usize,
}

/// Least squares of `y` on the columns of `x` (include an intercept column
/// yourself if one is wanted).
pub fn ols<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<OlsFit<T>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("design has {n} rows, response has {}", y.len())));
    }
    if n <= p {
        return Err(Error::TooFewRows { needed: p, have: n });
    }
    let qr = PivotedQr::new(x);
    if let Some(c) = qr.first_dependent_column() {
        return Err(Error::RankDeficient(c));
    }
    let coefficients = qr.solve(y);
    let fitted = x.mat_vec(&coefficients);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let rss: T = residuals.iter().map(|&e| e * e).sum();
    let df_resid = n - p;
    let sigma2 = rss / T::from_usize_lossy(df_resid);
    let ginv = qr.gram_inverse();
    let standard_errors = (0..p).map(|j| (sigma2 * ginv[(j, j)]).max(T::zero()).sqrt()).collect();
    let ybar = y.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let tss: T = y.iter().map(|&v| (v - ybar) * (v - ybar)).sum();
    let r_squared = if tss > T::zero() { T::one() - rss / tss } else { T::one() };
    Ok(OlsFit { coefficients, residuals, fitted, standard_errors, sigma2, r_squared, df_resid })
}

/// Coefficients only, for inner loops.
pub(crate) fn ls_coefficients<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<Vec<T>> {
    if x.nrows() <= x.ncols() {
        return Err(Error::TooFewRows { needed: x.ncols(), have: x.nrows() });
    }
    let qr = PivotedQr::new(x);
    if let Some(c) = qr.first_dependent_column() {
        return Err(Error::RankDeficient(c));
    }
    Ok(qr.solve(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_intercept(x: &[f64]) -> Matrix<f64> {
        Matrix::from_columns(&[vec![1.0; x.len()], x.to_vec()])
    }

    #[test]
    fn exact_fit_has_zero_residuals() {
        let x = Matrix::<f64>::from_columns(&[vec![1.0, 2.0, 3.0]]);
        let f = ols(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-14);
        assert!(f.residuals.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn response_orthogonal_to_regressor() {
        // x centered, y constant-free and orthogonal to x
        let x = with_intercept(&[-1.0, 0.0, 1.0, 0.0]);
        let y = [1.0, -2.0, 1.0, 4.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-14);
        assert!(f.coefficients[1].abs() < 1e-14);
    }

    #[test]
    fn four_point_textbook_regression() {
        // XᵀX = [[4,10],[10,30]], Xᵀy = [28,77] ⇒ β = (3.5, 1.4); RSS = 4.2
        let x = with_intercept(&[1.0, 2.0, 3.0, 4.0]);
        let y = [6.0, 5.0, 7.0, 10.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.coefficients[0] - 3.5).abs() < 1e-10);
        assert!((f.coefficients[1] - 1.4).abs() < 1e-10);
        // s² = 4.2/2 ; (XᵀX)⁻¹ = [[1.5, -0.5], [-0.5, 0.2]]
        assert!((f.standard_errors[0] - (2.1_f64 * 1.5).sqrt()).abs() < 1e-10);
        assert!((f.standard_errors[1] - (2.1_f64 * 0.2).sqrt()).abs() < 1e-10);
        for c in 0..2 {
            let g: f64 = (0..4).map(|r| x[(r, c)] * f.residuals[r]).sum();
            assert!(g.abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = Matrix::from_columns(&[vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]]);
        assert_eq!(ols(&x, &[1.0, 2.0, 3.0, 5.0]).unwrap_err(), Error::RankDeficient(2));
    }

    #[test]
    fn too_few_rows() {
        let x = with_intercept(&[1.0, 2.0]);
        assert!(matches!(ols(&x, &[1.0, 2.0]), Err(Error::TooFewRows { .. })));
    }
}
