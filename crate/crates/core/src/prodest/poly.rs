use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Highest total degree accepted for series expansions.
pub const MAX_SERIES_DEGREE: usize = 5;

/// Exponent tuples of every monomial of total degree `≤ degree` in `vars`
/// variables, graded lexicographic: intercept, then degree 1, 2, ...
pub fn monomial_exponents(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; vars]];
    for d in 1..=degree {
        // non-decreasing index sequences of length d
        let mut idx = vec![0usize; d];
        loop {
            let mut e = vec![0; vars];
            for &i in &idx {
                e[i] += 1;
            }
            out.push(e);
            // advance
            let mut pos = d;
            while pos > 0 && idx[pos - 1] == vars - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            let v = idx[pos - 1];
            for x in idx.iter_mut().skip(pos) {
                *x = v;
            }
        }
        if vars == 0 {
            break;
        }
    }
    out
}

/// Full polynomial basis of total degree `≤ degree` over the columns of `columns`,
/// intercept first.
pub fn polynomial_series<T: Scalar>(columns: &Matrix<T>, degree: usize) -> Result<Matrix<T>> {
    if degree == 0 {
        return Err(Error::InvalidConfig { field: "degree".into(), reason: "must be at least 1".into() });
    }
    if degree > MAX_SERIES_DEGREE {
        return Err(Error::DegreeTooHigh(degree));
    }
    if columns.has_missing() {
        return Err(Error::SchemaMismatch("polynomial series input contains missing values".into()));
    }
    let terms = monomial_exponents(columns.ncols(), degree);
    let mut out = Matrix::zeros(columns.nrows(), terms.len());
    for r in 0..columns.nrows() {
        let x = columns.row(r);
        for (j, e) in terms.iter().enumerate() {
            out[(r, j)] = e.iter().zip(x).fold(T::one(), |acc, (&p, &v)| acc * v.powi(p as i32));
        }
    }
    Ok(out)
}

/// Z-scores each column (population sd; constant columns are only centered).
/// Used before series expansion purely for conditioning: the span of the
/// polynomial basis is unchanged by per-column affine maps.
pub(crate) fn scale_columns<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = m.clone();
    out.center_columns();
    let n = T::from_usize_lossy(m.nrows().max(1));
    for c in 0..out.ncols() {
        let ss: T = out.column(c).iter().map(|&x| x * x).sum();
        let sd = (ss / n).sqrt();
        if sd > T::zero() {
            for r in 0..out.nrows() {
                out[(r, c)] /= sd;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_quadratic() {
        let x = Matrix::from_rows(&[[2.0_f64], [3.0]]);
        let p = polynomial_series(&x, 2).unwrap();
        assert_eq!(p.row(0), &[1.0, 2.0, 4.0]);
        assert_eq!(p.row(1), &[1.0, 3.0, 9.0]);
    }

    #[test]
    fn bivariate_quadratic_order() {
        let x = Matrix::from_rows(&[[2.0_f64, 5.0]]);
        let p = polynomial_series(&x, 2).unwrap();
        // [1, x, y, x², xy, y²]
        assert_eq!(p.row(0), &[1.0, 2.0, 5.0, 4.0, 10.0, 25.0]);
    }

    #[test]
    fn column_counts_match_binomials() {
        // C(v + d, d)
        assert_eq!(monomial_exponents(3, 3).len(), 20);
        assert_eq!(monomial_exponents(2, 2).len(), 6);
        assert_eq!(monomial_exponents(4, 5).len(), 126);
    }

    #[test]
    fn degree_cap() {
        let x = Matrix::from_rows(&[[1.0_f64]]);
        assert_eq!(polynomial_series(&x, 6).unwrap_err(), Error::DegreeTooHigh(6));
    }
}
