//! Special functions and small descriptive-statistics helpers.
//!
//! The Student-t survival function is computed through the regularized
//! incomplete beta function; the normal CDF through the regularized upper
//! incomplete gamma function.

use crate::scalar::Scalar;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let pi = T::lit(std::f64::consts::PI);
    if x < T::lit(0.5) {
        // reflection
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::lit(LANCZOS[0]);
    let t = x + T::lit(LANCZOS_G + 0.5);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += T::lit(c) / (x + T::from_usize_lossy(i));
    }
    T::lit(0.5) * (T::lit(2.0) * pi).ln() + (x + T::lit(0.5)) * t.ln() - t + a.ln()
}

fn max_iter() -> usize {
    500
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf<T: Scalar>(a: T, b: T, x: T) -> T {
    let tiny = T::min_positive_value() * T::lit(1e10);
    let eps = T::epsilon();
    let one = T::one();
    let two = T::lit(2.0);
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=max_iter() {
        let m = T::from_usize_lossy(m);
        let m2 = two * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let del = d * c;
        h *= del;
        if (del - one).abs() < eps {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta<T: Scalar>(x: T, a: T, b: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (T::one() - x).ln();
    let front = ln_front.exp();
    if x < (a + T::one()) / (a + b + T::lit(2.0)) {
        front * beta_cf(a, b, x) / a
    } else {
        T::one() - front * beta_cf(b, a, T::one() - x) / b
    }
}

/// Two-sided p-value `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p<T: Scalar>(t: T, df: T) -> T {
    if t.is_nan() || df.is_nan() || df <= T::zero() {
        return T::nan();
    }
    if t.is_infinite() {
        return T::zero();
    }
    let x = df / (df + t * t);
    incomplete_beta(x, df / T::lit(2.0), T::lit(0.5)).min(T::one()).max(T::zero())
}

/// Student-t CDF.
pub fn student_t_cdf<T: Scalar>(t: T, df: T) -> T {
    let half_tail = student_t_two_sided_p(t, df) / T::lit(2.0);
    if t >= T::zero() { T::one() - half_tail } else { half_tail }
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn upper_incomplete_gamma<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    let eps = T::epsilon();
    let gln = ln_gamma(a);
    if x < a + T::one() {
        // series for P
        let mut ap = a;
        let mut del = T::one() / a;
        let mut sum = del;
        for _ in 0..max_iter() {
            ap += T::one();
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * eps {
                break;
            }
        }
        T::one() - sum * (-x + a * x.ln() - gln).exp()
    } else {
        let tiny = T::min_positive_value() * T::lit(1e10);
        let mut b = x + T::one() - a;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..=max_iter() {
            let i = T::from_usize_lossy(i);
            let an = -i * (i - a);
            b += T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let del = d * c;
            h *= del;
            if (del - T::one()).abs() < eps {
                break;
            }
        }
        (-x + a * x.ln() - gln).exp() * h
    }
}

/// Complementary error function.
pub fn erfc<T: Scalar>(x: T) -> T {
    let q = upper_incomplete_gamma(T::lit(0.5), x * x);
    if x >= T::zero() { q } else { T::lit(2.0) - q }
}

/// Standard normal CDF.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5) * erfc(-z / T::lit(std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf<T: Scalar>(z: T) -> T {
    (-(z * z) / T::lit(2.0)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

/// Sample variance with `n − 1` denominator; NaN for fewer than two values.
pub fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::nan();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(xs.len() - 1)
}

pub fn sample_sd<T: Scalar>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}

/// Quantile by linear interpolation between order statistics (type 7).
pub fn quantile_type7<T: Scalar>(xs: &[T], p: T) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let h = T::from_usize_lossy(s.len() - 1) * p;
    let lo = h.floor().to_usize().unwrap_or(0).min(s.len() - 1);
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - T::from_usize_lossy(lo)) * (s[hi] - s[lo])
}

/// Pearson correlation; NaN when either input has zero variance.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == T::zero() || syy == T::zero() {
        return T::nan();
    }
    sxy / (sxx * syy).sqrt()
}
