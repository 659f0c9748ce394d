//! Parsers for compact command-line values.

use stgibbs_core::{Bandwidths, Error, HardcorePolicy, Result, StWindow};

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidConfig(format!("{what}: `{s}` is not a finite number")))
}

/// `start:end:n` (inclusive, evenly spaced) or `a,b,c`.
pub fn lag_grid(s: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, end, n] => {
            let (a, b) = (number(start, what)?, number(end, what)?);
            let n: usize = n
                .trim()
                .parse()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::InvalidConfig(format!("{what}: `{n}` is not a positive count")))?;
            Ok(linspace(a, b, n))
        }
        [list] => list.split(',').map(|v| number(v, what)).collect(),
        _ => Err(Error::InvalidConfig(format!(
            "{what}: expected `start:end:n` or a comma list, got `{s}`"
        ))),
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Default lags: 9 values over 5-25% of the shorter side and of the duration.
pub fn default_grids(window: &StWindow) -> (Vec<f64>, Vec<f64>) {
    let (x, y, t) = (window.x_bounds(), window.y_bounds(), window.t_bounds());
    let side = (x[1] - x[0]).min(y[1] - y[0]);
    let dur = t[1] - t[0];
    (
        linspace(0.05 * side, 0.25 * side, 9),
        linspace(0.05 * dur, 0.25 * dur, 9),
    )
}

pub fn bandwidths(s: &str) -> Result<Bandwidths> {
    match s.split(',').collect::<Vec<_>>().as_slice() {
        [a, b] => Bandwidths::new(number(a, "bandwidths")?, number(b, "bandwidths")?),
        _ => Err(Error::InvalidConfig(format!(
            "bandwidths: expected `SPATIAL,TEMPORAL`, got `{s}`"
        ))),
    }
}

/// `max-area`, `ratio=R` or `manual=HS,HT`.
pub fn policy(s: &str) -> Result<HardcorePolicy> {
    let s = s.trim();
    if s == "max-area" {
        return Ok(HardcorePolicy::MaxArea);
    }
    if let Some(r) = s.strip_prefix("ratio=") {
        let ratio = number(r, "policy ratio")?;
        if ratio <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "policy ratio must be positive, got {ratio}"
            )));
        }
        return Ok(HardcorePolicy::FixedRatio { ratio });
    }
    if let Some(m) = s.strip_prefix("manual=") {
        if let [hs, ht] = m.split(',').collect::<Vec<_>>().as_slice() {
            return Ok(HardcorePolicy::Manual {
                hs: number(hs, "policy hs")?,
                ht: number(ht, "policy ht")?,
            });
        }
    }
    Err(Error::InvalidConfig(format!(
        "unknown hardcore policy `{s}`; use max-area, ratio=R or manual=HS,HT"
    )))
}
