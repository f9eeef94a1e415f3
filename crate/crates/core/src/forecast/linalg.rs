//! Dense least squares via Householder QR. Problems here are tall and thin
//! (thousands of rows, at most a few dozen columns).

use crate::error::ForecastError;

/// Relative pivot size below which a column counts as linearly dependent.
const RANK_TOL: f64 = 1e-9;

/// Solve `min ||X b - y||` for `X` given as rows. Errors when `X` does not
/// have full column rank.
pub fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, ForecastError> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n != y.len() {
        return Err(ForecastError::InvalidArgument(format!("{n} rows but {} targets", y.len())));
    }
    if p == 0 {
        return Ok(Vec::new());
    }
    if n < p {
        return Err(ForecastError::InsufficientData { need: p, got: n });
    }
    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = y.to_vec();
    let col_norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let scale = col_norms.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(ForecastError::RankDeficient);
    }

    let mut diag = vec![0.0; p];
    for k in 0..p {
        let alpha = {
            let s = norm(&a[k][k..]);
            if a[k][k] > 0.0 {
                -s
            } else {
                s
            }
        };
        if alpha.abs() <= RANK_TOL * col_norms[k].max(f64::MIN_POSITIVE) || alpha == 0.0 {
            return Err(ForecastError::RankDeficient);
        }
        // v = x - alpha e1, stored in place
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(vi, ci)| vi * ci).sum();
                let f = 2.0 * dot / vnorm2;
                for (ci, vi) in col[k..].iter_mut().zip(&v) {
                    *ci -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(vi, bi)| vi * bi).sum();
            let f = 2.0 * dot / vnorm2;
            for (bi, vi) in b[k..].iter_mut().zip(&v) {
                *bi -= f * vi;
            }
        }
    }
    // back substitution on R (upper triangle of a, diagonal in diag)
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[j][k] * x[j];
        }
        x[k] = s / diag[k];
    }
    Ok(x)
}

fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow on byte-sized channels
    let m = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

/// Solve a small square system by Gaussian elimination with partial pivoting.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>, ForecastError> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .ok_or(ForecastError::RankDeficient)?;
        if m[piv][col].abs() < 1e-300 {
            return Err(ForecastError::RankDeficient);
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Ok(x)
}
