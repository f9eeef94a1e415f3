//! Finite differences and Savitzky-Golay smoothing.

use crate::error::ForecastError;
use crate::forecast::linalg::solve_square;

/// First derivative with central differences in the interior and one-sided
/// differences at both ends.
pub fn first_derivative(series: &[f64], dt: f64) -> Result<Vec<f64>, ForecastError> {
    let n = series.len();
    if n < 2 {
        return Err(ForecastError::TooShort { need: 2, got: n });
    }
    if !(dt > 0.0) {
        return Err(ForecastError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(n);
    out.push((series[1] - series[0]) / dt);
    for i in 1..n - 1 {
        out.push((series[i + 1] - series[i - 1]) / (2.0 * dt));
    }
    out.push((series[n - 1] - series[n - 2]) / dt);
    Ok(out)
}

/// Weights `w` such that `sum w_k y_k` is the value at offset 0 of the
/// least-squares polynomial of `degree` through the points at `offsets`.
pub fn fit_weights(offsets: &[f64], degree: usize) -> Result<Vec<f64>, ForecastError> {
    let p = degree + 1;
    if offsets.len() < p {
        return Err(ForecastError::BadWindow { window: offsets.len(), degree });
    }
    let powers: Vec<Vec<f64>> = offsets.iter().map(|&x| (0..p).map(|j| x.powi(j as i32)).collect()).collect();
    let mut gram = vec![vec![0.0; p]; p];
    for row in &powers {
        for i in 0..p {
            for j in 0..p {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    let mut e0 = vec![0.0; p];
    e0[0] = 1.0;
    let a = solve_square(gram, e0)?;
    Ok(powers.iter().map(|row| row.iter().zip(&a).map(|(v, c)| v * c).sum()).collect())
}

/// Savitzky-Golay smoothing.
///
/// Interior points use the centred window. Within half a window of either end
/// the window is clipped to the series and the polynomial (of degree at most
/// the clipped length minus one) is refitted and evaluated at the point itself.
pub fn savgol_filter(series: &[f64], window: usize, degree: usize) -> Result<Vec<f64>, ForecastError> {
    if window % 2 == 0 || window < degree + 1 {
        return Err(ForecastError::BadWindow { window, degree });
    }
    let n = series.len();
    if n < window {
        return Err(ForecastError::TooShort { need: window, got: n });
    }
    let half = window / 2;
    let centred: Vec<f64> = (0..window).map(|k| k as f64 - half as f64).collect();
    let interior = fit_weights(&centred, degree)?;

    let mut out = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let values = &series[lo..hi];
        out[i] = if hi - lo == window {
            dot(&interior, values)
        } else {
            let offsets: Vec<f64> = (lo..hi).map(|k| k as f64 - i as f64).collect();
            let d = degree.min(offsets.len() - 1);
            dot(&fit_weights(&offsets, d)?, values)
        };
    }
    Ok(out)
}

/// Value at the final point of the clipped-window smoother, using only the
/// trailing `half + 1` points. Matches the last element of [`savgol_filter`].
pub fn savgol_last(series: &[f64], window: usize, degree: usize) -> Result<f64, ForecastError> {
    let n = series.len();
    if n < window {
        return Err(ForecastError::TooShort { need: window, got: n });
    }
    let half = window / 2;
    let offsets: Vec<f64> = (0..=half).map(|k| k as f64 - half as f64).collect();
    let w = fit_weights(&offsets, degree.min(half))?;
    Ok(dot(&w, &series[n - half - 1..]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        assert_eq!(first_derivative(&[3.0; 5], 1.0).unwrap(), vec![0.0; 5]);
        assert_eq!(first_derivative(&[0.0, 2.0, 4.0, 6.0], 1.0).unwrap(), vec![2.0; 4]);
        assert_eq!(first_derivative(&[0.0, 1.0, 4.0, 9.0, 16.0], 1.0).unwrap(), vec![1.0, 2.0, 4.0, 6.0, 7.0]);
        assert!(matches!(first_derivative(&[1.0], 1.0), Err(ForecastError::TooShort { .. })));
    }

    #[test]
    fn classic_five_point_quadratic_weights() {
        let w = fit_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 2).unwrap();
        for (got, want) in w.iter().zip([-3.0, 12.0, 17.0, 12.0, -3.0]) {
            assert!((got - want / 35.0).abs() < 1e-12);
        }
        let out = savgol_filter(&[0.0, 0.0, 1.0, 0.0, 0.0], 5, 2).unwrap();
        assert!((out[2] - 17.0 / 35.0).abs() < 1e-12);
    }

    #[test]
    fn interpolating_degree_is_identity() {
        let x = [1.0, -2.0, 5.0, 0.5, 3.0, 9.0, -1.0];
        let out = savgol_filter(&x, 5, 4).unwrap();
        for (a, b) in out.iter().zip(x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_pass_through() {
        let out = savgol_filter(&[4.2; 20], 11, 2).unwrap();
        assert!(out.iter().all(|v| (v - 4.2).abs() < 1e-12));
    }

    #[test]
    fn window_errors() {
        assert!(matches!(savgol_filter(&[0.0; 10], 4, 2), Err(ForecastError::BadWindow { .. })));
        assert!(matches!(savgol_filter(&[0.0; 10], 3, 3), Err(ForecastError::BadWindow { .. })));
        assert!(matches!(savgol_filter(&[0.0; 4], 5, 2), Err(ForecastError::TooShort { .. })));
    }

    #[test]
    fn trailing_value_matches_full_filter() {
        let x: Vec<f64> = (0..30).map(|i| ((i * 7919) % 13) as f64 * 0.3).collect();
        let full = savgol_filter(&x, 11, 2).unwrap();
        let last = savgol_last(&x, 11, 2).unwrap();
        assert!((full[29] - last).abs() < 1e-12);
    }
}
