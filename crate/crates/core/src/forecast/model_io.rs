//! Flat `name=value` text form of fitted models.
//!
//! Values are written with 17 significant digits, so a model read back is
//! bit-identical to the one written.

use std::fmt::Write as _;

use crate::error::ForecastError;
use crate::forecast::regression::LinearModel;
use crate::forecast::trend::{TrendKind, TrendModel};

const LINEAR_RESERVED: [&str; 4] = ["model", "intercept", "r2", "mae"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn pairs(text: &str) -> Result<Vec<(&str, &str)>, ForecastError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| ForecastError::Parse(format!("expected name=value, got {l:?}")))
        })
        .collect()
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ForecastError> {
    v.parse().map_err(|_| ForecastError::Parse(format!("{key}: not a number: {v:?}")))
}

fn required<'a>(kv: &[(&str, &'a str)], key: &str) -> Result<&'a str, ForecastError> {
    kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| ForecastError::Parse(format!("missing {key}")))
}

pub fn linear_to_text(m: &LinearModel) -> String {
    let mut s = String::from("model=linear\n");
    let _ = writeln!(s, "intercept={}", num(m.intercept));
    for (name, c) in m.predictor_names.iter().zip(&m.coefficients) {
        let _ = writeln!(s, "{name}={}", num(*c));
    }
    let _ = writeln!(s, "r2={}", num(m.r2));
    let _ = writeln!(s, "mae={}", num(m.mae));
    s
}

pub fn linear_from_text(text: &str) -> Result<LinearModel, ForecastError> {
    let kv = pairs(text)?;
    if required(&kv, "model")? != "linear" {
        return Err(ForecastError::Parse("not a linear model".into()));
    }
    let mut predictor_names = Vec::new();
    let mut coefficients = Vec::new();
    for (k, v) in &kv {
        if !LINEAR_RESERVED.contains(k) {
            predictor_names.push(k.to_string());
            coefficients.push(parse_f64(k, v)?);
        }
    }
    Ok(LinearModel {
        intercept: parse_f64("intercept", required(&kv, "intercept")?)?,
        predictor_names,
        coefficients,
        r2: parse_f64("r2", required(&kv, "r2")?)?,
        mae: parse_f64("mae", required(&kv, "mae")?)?,
    })
}

pub fn trend_to_text(m: &TrendModel) -> String {
    let mut s = String::from("model=trend\n");
    let _ = writeln!(s, "kind={}", m.kind.as_str());
    let _ = writeln!(s, "period={}", m.period);
    let _ = writeln!(s, "harmonics={}", m.harmonics());
    let _ = writeln!(s, "intercept={}", num(m.intercept));
    for (k, (a, b)) in m.fourier_coeffs.iter().enumerate() {
        let _ = writeln!(s, "a{}={}", k + 1, num(*a));
        let _ = writeln!(s, "b{}={}", k + 1, num(*b));
    }
    let _ = writeln!(s, "ar1={}", num(m.ar_coeffs.0));
    let _ = writeln!(s, "ar2={}", num(m.ar_coeffs.1));
    let _ = writeln!(s, "residual_sigma={}", num(m.residual_sigma));
    let _ = writeln!(s, "cv_mae={}", num(m.cv_mae));
    s
}

pub fn trend_from_text(text: &str) -> Result<TrendModel, ForecastError> {
    let kv = pairs(text)?;
    if required(&kv, "model")? != "trend" {
        return Err(ForecastError::Parse("not a trend model".into()));
    }
    let kind_s = required(&kv, "kind")?;
    let kind = TrendKind::parse(kind_s).ok_or_else(|| ForecastError::Parse(format!("unknown trend kind {kind_s:?}")))?;
    let period: u64 = required(&kv, "period")?.parse().map_err(|_| ForecastError::Parse("period".into()))?;
    let k: usize = required(&kv, "harmonics")?.parse().map_err(|_| ForecastError::Parse("harmonics".into()))?;
    let f = |key: &str| -> Result<f64, ForecastError> { parse_f64(key, required(&kv, key)?) };
    let fourier_coeffs = (1..=k).map(|j| Ok((f(&format!("a{j}"))?, f(&format!("b{j}"))?))).collect::<Result<_, _>>()?;
    Ok(TrendModel {
        kind,
        period,
        intercept: f("intercept")?,
        fourier_coeffs,
        ar_coeffs: (f("ar1")?, f("ar2")?),
        residual_sigma: f("residual_sigma")?,
        cv_mae: f("cv_mae")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_round_trip_is_exact() {
        let m = LinearModel {
            intercept: 0.1 + 0.2,
            predictor_names: vec!["notif_rate".into(), "stored_subs".into()],
            coefficients: vec![1.0 / 3.0, -7.123456789012345e-11],
            r2: 0.987654321,
            mae: f64::MIN_POSITIVE,
        };
        assert_eq!(linear_from_text(&linear_to_text(&m)).unwrap(), m);
    }

    #[test]
    fn trend_round_trip_is_exact() {
        let m = TrendModel {
            kind: TrendKind::HarmonicAr,
            period: 120,
            intercept: -0.3,
            fourier_coeffs: vec![(1.0 / 7.0, 2.0f64.sqrt()), (0.0, -1e-300)],
            ar_coeffs: (0.61, -0.17),
            residual_sigma: 0.25,
            cv_mae: 0.125,
        };
        let text = trend_to_text(&m);
        assert!(text.contains("harmonics=2\n") && text.contains("ar1="));
        assert_eq!(trend_from_text(&text).unwrap(), m);
    }

    #[test]
    fn malformed_text() {
        assert!(matches!(linear_from_text("model=linear\nintercept"), Err(ForecastError::Parse(_))));
        assert!(matches!(trend_from_text("model=linear\n"), Err(ForecastError::Parse(_))));
    }
}
