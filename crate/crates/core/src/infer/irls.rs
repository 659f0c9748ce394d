//! Logistic regression with offset by iteratively reweighted least squares.
//!
//! Each iteration solves the Newton system `(X' W X) delta = X' (y - p)` by
//! Cholesky, adding a small ridge only when the factorisation fails. Steps
//! are halved until the log-likelihood does not decrease, so the recorded
//! trace is monotone.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::erfc;

use super::design::LogisticDesign;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iterations: usize,
    /// Relative log-likelihood change below which the fit has converged.
    pub tolerance: f64,
    /// Largest absolute score component accepted at convergence.
    pub score_tolerance: f64,
    /// Ridge added to the normal equations when Cholesky fails.
    pub ridge: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iterations: 50,
            tolerance: 1e-8,
            score_tolerance: 1e-8,
            ridge: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparationDirection {
    /// The coefficient diverges to `+inf`.
    Positive,
    /// The coefficient diverges to `-inf`.
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separation {
    pub column: usize,
    pub name: String,
    pub direction: SeparationDirection,
}

/// Maximised log-logistic likelihood and Wald inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    /// Number of leading trend coefficients; the rest are `log gamma_j`.
    pub n_trend: usize,
    /// `+-inf` for separated columns.
    pub coefficients: Vec<f64>,
    /// `NaN` for separated columns and for columns that are identically
    /// zero (not estimable).
    pub std_errors: Vec<f64>,
    pub z_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_lik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub separation: Vec<Separation>,
    /// Log-likelihood after every accepted iterate, starting point first.
    pub log_lik_trace: Vec<f64>,
    /// `max |score|` at the returned coefficients.
    pub score_max: f64,
}

impl FitResult {
    pub fn beta(&self) -> &[f64] {
        &self.coefficients[..self.n_trend]
    }

    pub fn theta(&self) -> &[f64] {
        &self.coefficients[self.n_trend..]
    }

    /// `gamma_j = exp(theta_j)`.
    pub fn gammas(&self) -> Vec<f64> {
        self.theta().iter().map(|t| t.exp()).collect()
    }

    pub fn n_parameters(&self) -> usize {
        self.coefficients.len()
    }
}

#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Neumaier compensated sum. Near the optimum the per-step gain is far
/// below the rounding noise of a plain sum over all rows.
#[derive(Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(self) -> f64 {
        self.s + self.c
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct State {
    log_lik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

fn evaluate(design: &LogisticDesign, rows: &[usize], cols: &[usize], beta: &DVector<f64>) -> State {
    let k = cols.len();
    let mut log_lik = Sum::default();
    let mut score = vec![Sum::default(); k];
    let mut info = DMatrix::zeros(k, k);
    let mut xr = vec![0.0; k];
    for &i in rows {
        let row = design.row(i);
        for (a, &c) in cols.iter().enumerate() {
            xr[a] = row[c];
        }
        let mut eta = Sum::default();
        eta.add(design.offset()[i]);
        for (x, b) in xr.iter().zip(beta.iter()) {
            eta.add(x * b);
        }
        let eta = eta.value();
        let y = if design.response()[i] { 1.0 } else { 0.0 };
        log_lik.add(y * eta);
        log_lik.add(-softplus(eta));
        let p = sigmoid(eta);
        let w = p * (1.0 - p);
        for a in 0..k {
            score[a].add(xr[a] * (y - p));
            if w > 0.0 && xr[a] != 0.0 {
                let wa = w * xr[a];
                for b in 0..=a {
                    info[(a, b)] += wa * xr[b];
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    State {
        log_lik: log_lik.value(),
        score: DVector::from_iterator(k, score.into_iter().map(Sum::value)),
        info,
    }
}

fn solve(info: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let k = info.nrows();
    let scale = (0..k).map(|i| info[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut m = info.clone();
        for i in 0..k {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            let delta = ch.solve(rhs);
            if delta.iter().all(|v| v.is_finite()) {
                return Some((delta, ch.inverse()));
            }
        }
        jitter = if jitter == 0.0 { ridge * scale } else { jitter * 10.0 };
    }
    None
}

/// Linearly dependent columns found by Gram-Schmidt on the raw design.
fn collinear_columns(design: &LogisticDesign, rows: &[usize], cols: &[usize]) -> Vec<String> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for &c in cols {
        let mut v: Vec<f64> = rows.iter().map(|&i| design.row(i)[c]).collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1e-9 * norm0 {
            dependent.push(design.names()[c].clone());
        } else {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    dependent
}

/// Non-negative columns that vanish on one response class but not the
/// other: the likelihood then increases without bound along that column.
fn detect_separation(design: &LogisticDesign, rows: &[usize], cols: &[usize]) -> Vec<Separation> {
    let mut out = Vec::new();
    for &c in cols {
        let mut nonneg = true;
        let (mut pos_data, mut pos_dummy) = (false, false);
        let (mut zero_data, mut zero_dummy) = (false, false);
        for &i in rows {
            let v = design.row(i)[c];
            let is_data = design.response()[i];
            nonneg &= v >= 0.0;
            match (v > 0.0, is_data) {
                (true, true) => pos_data = true,
                (true, false) => pos_dummy = true,
                (false, true) => zero_data = true,
                (false, false) => zero_dummy = true,
            }
        }
        if !nonneg || !(zero_data || zero_dummy) {
            continue;
        }
        let direction = match (pos_data, pos_dummy) {
            (false, true) => SeparationDirection::Negative,
            (true, false) => SeparationDirection::Positive,
            _ => continue,
        };
        out.push(Separation {
            column: c,
            name: design.names()[c].clone(),
            direction,
        });
    }
    out
}

/// Maximises the log-logistic likelihood
/// `sum_data log(l / (l + rho)) + sum_dummy log(rho / (l + rho))`
/// with `log l = x' beta`.
///
/// A separated column has no finite maximiser. Its coefficient is reported
/// at the limit `+-inf`, the rows it decides drop out of the likelihood
/// (their contribution tends to zero) and the remaining coefficients are
/// fitted on the rest.
pub fn fit_logistic(design: &LogisticDesign, opts: &IrlsOptions) -> Result<FitResult> {
    let p = design.n_cols();
    let mut rows: Vec<usize> = (0..design.n_rows()).collect();
    let mut limits: Vec<Option<f64>> = vec![None; p];
    let mut separation = Vec::new();
    loop {
        let free: Vec<usize> = (0..p).filter(|&c| limits[c].is_none()).collect();
        let found = detect_separation(design, &rows, &free);
        if found.is_empty() {
            break;
        }
        for s in found {
            limits[s.column] = Some(match s.direction {
                SeparationDirection::Positive => f64::INFINITY,
                SeparationDirection::Negative => f64::NEG_INFINITY,
            });
            rows.retain(|&i| design.row(i)[s.column] == 0.0);
            separation.push(s);
        }
    }
    if !rows.iter().any(|&i| design.response()[i]) || rows.iter().all(|&i| design.response()[i]) {
        return Err(Error::DegenerateFit("separation leaves a single response class".into()));
    }
    let cols: Vec<usize> = (0..p)
        .filter(|&c| limits[c].is_none() && rows.iter().any(|&i| design.row(i)[c] != 0.0))
        .collect();
    let dependent = collinear_columns(design, &rows, &cols);
    if !dependent.is_empty() {
        return Err(Error::CollinearColumns(dependent));
    }

    let k = cols.len();
    let mut beta = DVector::zeros(k);
    if let Some(pos) = cols.iter().position(|&c| design.names()[c] == "intercept") {
        // Start where the fitted class balance matches the observed one.
        let n1 = rows.iter().filter(|&&i| design.response()[i]).count() as f64;
        let n0 = rows.len() as f64 - n1;
        let mean_off = rows.iter().map(|&i| design.offset()[i]).sum::<f64>() / rows.len() as f64;
        beta[pos] = (n1 / n0).ln() - mean_off;
    }

    let mut state = evaluate(design, &rows, &cols, &beta);
    let mut trace = vec![state.log_lik];
    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut cov: Option<DMatrix<f64>> = None;

    while iterations < opts.max_iterations {
        let score_max = amax(&state.score);
        if last_change < opts.tolerance && score_max < opts.score_tolerance {
            converged = true;
            break;
        }
        let Some((delta, inv)) = solve(&state.info, &state.score, opts.ridge) else {
            return Err(Error::DegenerateFit("information matrix is singular".into()));
        };
        cov = Some(inv);
        iterations += 1;
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let cand = &beta + &delta * step;
            let s = evaluate(design, &rows, &cols, &cand);
            if s.log_lik.is_finite() && s.log_lik >= state.log_lik {
                next = Some((cand, s));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, s)) = next else {
            // No ascent possible along the Newton direction: stationary up
            // to rounding.
            converged = amax(&state.score) < opts.score_tolerance.max(1e-6);
            break;
        };
        last_change = (s.log_lik - state.log_lik).abs() / (state.log_lik.abs() + 0.1);
        beta = cand;
        state = s;
        trace.push(state.log_lik);
        if amax(&state.score) == 0.0 {
            last_change = 0.0;
        }
    }
    if !converged && last_change < opts.tolerance && amax(&state.score) < opts.score_tolerance {
        converged = true;
    }
    // Covariance at the returned estimate.
    if let Some((_, inv)) = solve(&state.info, &state.score, opts.ridge) {
        cov = Some(inv);
    }
    let cov = cov.ok_or_else(|| Error::DegenerateFit("information matrix is singular".into()))?;

    let mut coefficients: Vec<f64> = limits.iter().map(|l| l.unwrap_or(0.0)).collect();
    let mut std_errors = vec![f64::NAN; p];
    let mut z_values = vec![f64::NAN; p];
    let mut p_values = vec![f64::NAN; p];
    for (a, &c) in cols.iter().enumerate() {
        coefficients[c] = beta[a];
        let se = cov[(a, a)].max(0.0).sqrt();
        std_errors[c] = se;
        let z = beta[a] / se;
        z_values[c] = z;
        p_values[c] = erfc(z.abs() / std::f64::consts::SQRT_2);
    }
    let log_lik = state.log_lik;
    Ok(FitResult {
        names: design.names().to_vec(),
        n_trend: design.n_trend(),
        coefficients,
        std_errors,
        z_values,
        p_values,
        log_lik,
        aic: 2.0 * p as f64 - 2.0 * log_lik,
        converged,
        iterations,
        separation,
        log_lik_trace: trace,
        score_max: amax(&state.score),
    })
}

/// Log-likelihood and score at arbitrary coefficients (all columns).
pub fn log_lik_and_score(design: &LogisticDesign, coefficients: &[f64]) -> (f64, Vec<f64>) {
    let rows: Vec<usize> = (0..design.n_rows()).collect();
    let cols: Vec<usize> = (0..design.n_cols()).collect();
    let s = evaluate(design, &rows, &cols, &DVector::from_column_slice(coefficients));
    (s.log_lik, s.score.iter().copied().collect())
}
