//! Pointwise envelopes and the extreme rank length (ERL) global envelope test.
//!
//! Curves are indexed with the observed curve first. At each cell a curve
//! gets the two-sided rank `min(#{values <= own}, #{values >= own})`, so 1
//! is most extreme and ties take the larger (less extreme) rank. A curve's
//! rank vector is sorted ascending, and
//! `E_i = #{j : R_i <lex R_j} / N`: a larger `E` means a more extreme curve,
//! and identical rank vectors share the same `E`.

use serde::Serialize;

use super::gpcf::GpcfSurface;
use crate::error::{Error, Result};

fn check_lengths(curves: &[Vec<f64>]) -> Result<usize> {
    let len = curves.first().map_or(0, Vec::len);
    if let Some(bad) = curves.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: bad.len(),
        });
    }
    Ok(len)
}

/// Elementwise minimum and maximum across `surfaces`.
pub fn pointwise_envelopes(surfaces: &[GpcfSurface]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = surfaces
        .first()
        .ok_or_else(|| Error::InvalidGrid("no surfaces for envelopes".into()))?;
    if surfaces.iter().any(|s| !s.same_grid(first)) {
        return Err(Error::InvalidGrid("surfaces are on different lag grids".into()));
    }
    let curves: Vec<Vec<f64>> = surfaces.iter().map(|s| s.values.clone()).collect();
    pointwise_bounds(&curves)
}

pub fn pointwise_bounds(curves: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = check_lengths(curves)?;
    let mut lower = vec![f64::INFINITY; len];
    let mut upper = vec![f64::NEG_INFINITY; len];
    for c in curves {
        for k in 0..len {
            lower[k] = lower[k].min(c[k]);
            upper[k] = upper[k].max(c[k]);
        }
    }
    Ok((lower, upper))
}

/// Two-sided pointwise ranks; `ranks[i][k]` for curve `i` at cell `k`.
pub fn pointwise_ranks(curves: &[Vec<f64>]) -> Result<Vec<Vec<u32>>> {
    let len = check_lengths(curves)?;
    let n = curves.len();
    let mut ranks = vec![vec![0u32; len]; n];
    let mut column = vec![0.0; n];
    for k in 0..len {
        for (i, c) in curves.iter().enumerate() {
            column[i] = c[k];
        }
        column.sort_by(f64::total_cmp);
        for (i, c) in curves.iter().enumerate() {
            let v = c[k];
            let at_most = column.partition_point(|x| x.total_cmp(&v).is_le());
            let below = column.partition_point(|x| x.total_cmp(&v).is_lt());
            ranks[i][k] = at_most.min(n - below) as u32;
        }
    }
    Ok(ranks)
}

/// ERL measure of every curve.
pub fn erl_measures(curves: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut sorted = pointwise_ranks(curves)?;
    for r in &mut sorted {
        r.sort_unstable();
    }
    let n = sorted.len();
    let mut order: Vec<&Vec<u32>> = sorted.iter().collect();
    order.sort();
    Ok(sorted
        .iter()
        .map(|r| {
            let not_greater = order.partition_point(|o| *o <= r);
            (n - not_greater) as f64 / n as f64
        })
        .collect())
}

pub fn erl_measure(curves: &[Vec<f64>], index: usize) -> Result<f64> {
    if index >= curves.len() {
        return Err(Error::LengthMismatch {
            expected: curves.len(),
            found: index + 1,
        });
    }
    Ok(erl_measures(curves)?[index])
}

/// `(1 + #{E_sim >= E_obs}) / (n_sim + 1)`.
pub fn erl_p_value(e_obs: f64, e_sims: &[f64]) -> f64 {
    let hits = e_sims.iter().filter(|&&e| e >= e_obs).count();
    (1 + hits) as f64 / (e_sims.len() + 1) as f64
}

/// Number of simulations needed for `alpha * (n_sim + 1) >= 1`.
pub fn min_simulations(alpha: f64) -> usize {
    ((1.0 / alpha) - 1e-9).ceil() as usize - 1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalEnvelope {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// ERL measures, observed first.
    pub measures: Vec<f64>,
    /// Largest simulated `E` still included in the envelope.
    pub critical: f64,
    pub p_value: f64,
    /// Cells where the observed curve leaves `[lower, upper]`.
    pub significant: Vec<bool>,
}

/// Global ERL envelope at coverage `level` (for example 0.99).
///
/// With `k = floor((1 - level) (n_sim + 1))`, the test rejects when fewer
/// than `k` simulated curves are at least as extreme as the observed one.
/// The envelope is the range of the simulated curves that remain after
/// dropping the `k - 1` most extreme (ties kept), so that its critical
/// value `e` satisfies `#{E_sim > e} <= k - 1`.
pub fn global_envelope(observed: &[f64], sims: &[Vec<f64>], level: f64) -> Result<GlobalEnvelope> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "envelope level {level} must lie in (0, 1)"
        )));
    }
    let alpha = 1.0 - level;
    let k = (alpha * (sims.len() + 1) as f64 + 1e-9).floor() as usize;
    if k < 1 {
        return Err(Error::TooFewSimulations {
            level,
            required: min_simulations(alpha),
            actual: sims.len(),
        });
    }
    let mut curves = Vec::with_capacity(sims.len() + 1);
    curves.push(observed.to_vec());
    curves.extend(sims.iter().cloned());
    let measures = erl_measures(&curves)?;
    let e_sims = &measures[1..];
    let mut desc = e_sims.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let critical = desc[k - 1];
    let kept: Vec<Vec<f64>> = sims
        .iter()
        .zip(e_sims)
        .filter(|(_, &e)| e <= critical)
        .map(|(c, _)| c.clone())
        .collect();
    let (lower, upper) = pointwise_bounds(&kept)?;
    let significant = observed
        .iter()
        .zip(lower.iter().zip(&upper))
        .map(|(g, (l, u))| g < l || g > u)
        .collect();
    Ok(GlobalEnvelope {
        p_value: erl_p_value(measures[0], e_sims),
        lower,
        upper,
        measures,
        critical,
        significant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeResult {
    pub observed: GpcfSurface,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub global_lower: Vec<f64>,
    pub global_upper: Vec<f64>,
    pub p_erl: f64,
    pub n_sim: usize,
    pub level: f64,
    pub significant: Vec<bool>,
}

impl EnvelopeResult {
    pub fn n_significant(&self) -> usize {
        self.significant.iter().filter(|&&s| s).count()
    }
}

/// Pointwise and global envelopes of `sims` around `observed`.
pub fn envelope_test(observed: &GpcfSurface, sims: &[GpcfSurface], level: f64) -> Result<EnvelopeResult> {
    if sims.iter().any(|s| !s.same_grid(observed)) {
        return Err(Error::InvalidGrid(
            "simulated surfaces are on a different lag grid".into(),
        ));
    }
    let (lower, upper) = pointwise_envelopes(sims)?;
    let curves: Vec<Vec<f64>> = sims.iter().map(|s| s.values.clone()).collect();
    let global = global_envelope(&observed.values, &curves, level)?;
    Ok(EnvelopeResult {
        observed: observed.clone(),
        lower,
        upper,
        global_lower: global.lower,
        global_upper: global.upper,
        p_erl: global.p_value,
        n_sim: sims.len(),
        level,
        significant: global.significant,
    })
}
