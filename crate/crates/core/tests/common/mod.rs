//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use flas_core::decider::{decide_from_signals, DeciderConfig, DeciderState, EstimateBuffer, Signals, Trigger, Verdict};
use flas_core::{ForecastVector, ServiceConfig};

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least-squares polynomial coefficients (constant first) through `(x, y)`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Vec<f64> {
    let p = degree + 1;
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (&xi, &yi) in x.iter().zip(y) {
        for i in 0..p {
            aty[i] += xi.powi(i as i32) * yi;
            for j in 0..p {
                ata[i][j] += xi.powi((i + j) as i32);
            }
        }
    }
    gauss_solve(ata, aty)
}

/// Smoothing by fitting a fresh polynomial around every point and reading
/// it off at that point; windows are clipped at the ends.
pub fn savgol_brute(series: &[f64], window: usize, degree: usize) -> Vec<f64> {
    let half = window / 2;
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let x: Vec<f64> = (lo..hi).map(|k| k as f64 - i as f64).collect();
            let d = degree.min(x.len() - 1);
            polyfit(&x, &series[lo..hi], d)[0]
        })
        .collect()
}

/// `X^T (y - X b)` with an intercept column prepended to `X`.
pub fn normal_residual(x: &[Vec<f64>], y: &[f64], intercept: f64, coef: &[f64]) -> Vec<f64> {
    let p = coef.len() + 1;
    let mut g = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        let fit = intercept + row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
        let r = yi - fit;
        g[0] += r;
        for j in 0..coef.len() {
            g[j + 1] += row[j] * r;
        }
    }
    g
}

/// Scale for the normal-equation check: `|X|^T |y|` per column.
pub fn normal_scale(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x.first().map_or(0, Vec::len) + 1;
    let mut s = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        s[0] += yi.abs();
        for j in 0..row.len() {
            s[j + 1] += (row[j] * yi).abs();
        }
    }
    s
}

/// Inputs of one decision, reduced to what the rule looks at.
#[derive(Debug, Clone)]
pub struct DecisionCase {
    pub forecast: Option<Vec<f64>>,
    /// Estimates already in the buffer, oldest first.
    pub buffer: Vec<f64>,
    pub rt_estimate: f64,
    pub cooldown: u64,
    pub matchers: u32,
    pub max_matchers: u32,
    pub t_sa_pred: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    pub inc: f64,
    pub dec: f64,
    pub upper: f64,
    pub lower: f64,
    pub majority: usize,
    pub react_w: usize,
    pub multiplier: f64,
    pub dt: f64,
}

/// Verdict, trigger and the cool-down that follows, straight from the rule:
/// a cool-down blocks everything; otherwise the first of trend out, reactive
/// out, trend in, reactive in that holds (and the topology allows) wins.
pub fn decide_brute(c: &DecisionCase, th: &Thresholds) -> (Verdict, Trigger, u64) {
    if c.cooldown > 0 {
        return (Verdict::None, Trigger::Cooldown, c.cooldown - 1);
    }
    let count = |pred: &dyn Fn(f64) -> bool| c.forecast.as_ref().map_or(0, |f| f.iter().filter(|v| pred(**v)).count());
    let inc = c.forecast.is_some() && count(&|v| v > th.inc) >= th.majority;
    let dec = c.forecast.is_some() && count(&|v| v < th.dec) >= th.majority;
    let mut window = c.buffer.clone();
    window.push(c.rt_estimate);
    let last: Option<&[f64]> = (window.len() >= th.react_w).then(|| &window[window.len() - th.react_w..]);
    let above = last.is_some_and(|w| w.iter().all(|v| *v > th.upper));
    let below = last.is_some_and(|w| w.iter().all(|v| *v < th.lower));
    let can_out = c.matchers < c.max_matchers;
    let can_in = c.matchers > 1;
    let pick = if can_out && inc {
        Some((Verdict::ScaleOut, Trigger::Proactive))
    } else if can_out && above {
        Some((Verdict::ScaleOut, Trigger::Reactive))
    } else if can_in && dec {
        Some((Verdict::ScaleIn, Trigger::Proactive))
    } else if can_in && below {
        Some((Verdict::ScaleIn, Trigger::Reactive))
    } else {
        None
    };
    match pick {
        Some((v, t)) => {
            let ticks = (th.multiplier * c.t_sa_pred / th.dt).ceil().max(0.0) as u64;
            (v, t, ticks)
        }
        None => (Verdict::None, Trigger::None, 0),
    }
}

pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[i]
}

pub const DEFAULT_THRESHOLDS: Thresholds = Thresholds {
    inc: 0.9,
    dec: -0.9,
    upper: 0.750,
    lower: 0.010,
    majority: 3,
    react_w: 2,
    multiplier: 2.0,
    dt: 1.0,
};

/// Every combination of forecast levels (above, between, below the trend
/// thresholds), buffer contents, estimate, cool-down and topology.
pub fn enumerate_cases(h: usize, max_matchers: u32) -> Vec<DecisionCase> {
    let levels = [1.5, 0.0, -1.5];
    let mut forecasts: Vec<Option<Vec<f64>>> = vec![None];
    for code in 0..levels.len().pow(h as u32) {
        let mut c = code;
        let f = (0..h)
            .map(|_| {
                let v = levels[c % levels.len()];
                c /= levels.len();
                v
            })
            .collect();
        forecasts.push(Some(f));
    }
    let rts = [0.9, 0.1, 0.005];
    let buffers: Vec<Vec<f64>> = std::iter::once(vec![]).chain(rts.iter().map(|&v| vec![v])).collect();
    let mut out = Vec::new();
    for f in &forecasts {
        for b in &buffers {
            for &est in &rts {
                for cooldown in [0, 2] {
                    for m in [1, 2, max_matchers] {
                        out.push(DecisionCase {
                            forecast: f.clone(),
                            buffer: b.clone(),
                            rt_estimate: est,
                            cooldown,
                            matchers: m,
                            max_matchers,
                            t_sa_pred: 2.3,
                        });
                    }
                }
            }
        }
    }
    out
}

pub fn config_for(th: &Thresholds, h: usize) -> DeciderConfig {
    DeciderConfig {
        h,
        react_w: th.react_w,
        inc_trend_th: th.inc,
        dec_trend_th: th.dec,
        react_upper_th: th.upper,
        react_lower_th: th.lower,
        majority: th.majority,
        cooldown_multiplier: th.multiplier,
        ..DeciderConfig::default()
    }
}

pub fn run_case(c: &DecisionCase, cfg: &DeciderConfig, dt: f64) -> (Verdict, Trigger, u64, usize) {
    let t0 = 100;
    let prior: Vec<(u64, f64)> =
        c.buffer.iter().enumerate().map(|(i, &v)| (t0 - c.buffer.len() as u64 + i as u64, v)).collect();
    let state = DeciderState { buffer: EstimateBuffer::from_values(&prior), cooldown: c.cooldown };
    let signals = Signals {
        t0,
        t_sa_pred: c.t_sa_pred,
        forecast: c.forecast.as_ref().map(|v| ForecastVector { t0, t_sa_pred: c.t_sa_pred, values: v.clone() }),
        rt_estimate: c.rt_estimate,
    };
    let config = ServiceConfig { matcher_instances: c.matchers, ..ServiceConfig::minimal() };
    let (d, next) = decide_from_signals(Some(&signals), c.rt_estimate, t0, &state, &config, cfg, dt);
    (d.verdict, d.trigger, next.cooldown, next.buffer.len())
}
