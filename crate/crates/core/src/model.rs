//! Hybrid Strauss hardcore models and their exact evaluation.
//!
//! A [`GibbsModel`] combines a log-linear [`TrendModel`], `m` Strauss
//! interaction components with strictly increasing cylinder radii, and an
//! optional cylindrical hardcore `(hs, ht)`. Setting `m = 0` gives an
//! (inhomogeneous) Poisson process; giving a component a saturation `s`
//! turns it into a Geyer saturation term.
//!
//! Normalising constants never appear: everything is expressed through the
//! Papangelou conditional intensity or differences of the unnormalised log
//! density.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covariates::CovariateStack;
use crate::error::{Error, Result};
use crate::geometry::{in_cylinder, StPoint, StWindow};

/// A non-negative rate function on a window with a known upper bound.
pub trait Intensity: Send + Sync {
    fn rate(&self, p: &StPoint) -> Result<f64>;

    /// A bound `sup_W rate`; used as the dominating rate when thinning.
    fn upper_bound(&self, window: &StWindow) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantIntensity(pub f64);

impl Intensity for ConstantIntensity {
    fn rate(&self, _p: &StPoint) -> Result<f64> {
        Ok(self.0)
    }

    fn upper_bound(&self, _window: &StWindow) -> Result<f64> {
        Ok(self.0)
    }
}

/// `factor * inner(p)`.
#[derive(Debug, Clone)]
pub struct ScaledIntensity<I> {
    pub inner: I,
    pub factor: f64,
}

impl<I: Intensity> Intensity for ScaledIntensity<I> {
    fn rate(&self, p: &StPoint) -> Result<f64> {
        Ok(self.factor * self.inner.rate(p)?)
    }

    fn upper_bound(&self, window: &StWindow) -> Result<f64> {
        Ok(self.factor * self.inner.upper_bound(window)?)
    }
}

impl<I: Intensity + ?Sized> Intensity for &I {
    fn rate(&self, p: &StPoint) -> Result<f64> {
        (**self).rate(p)
    }

    fn upper_bound(&self, window: &StWindow) -> Result<f64> {
        (**self).upper_bound(window)
    }
}

impl<I: Intensity + ?Sized> Intensity for Arc<I> {
    fn rate(&self, p: &StPoint) -> Result<f64> {
        (**self).rate(p)
    }

    fn upper_bound(&self, window: &StWindow) -> Result<f64> {
        (**self).upper_bound(window)
    }
}

/// `log lambda(p) = beta0 + sum beta_S Z_S(p) + sum beta_ST Z_ST(p) [+ alpha t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendModel {
    beta0: f64,
    beta_spatial: Vec<f64>,
    beta_spatio_temporal: Vec<f64>,
    alpha: Option<f64>,
    covariates: Option<Arc<CovariateStack>>,
}

impl TrendModel {
    /// Constant rate `lambda`.
    pub fn homogeneous(rate: f64) -> Self {
        TrendModel {
            beta0: rate.ln(),
            beta_spatial: Vec::new(),
            beta_spatio_temporal: Vec::new(),
            alpha: None,
            covariates: None,
        }
    }

    pub fn new(
        beta0: f64,
        covariates: Option<Arc<CovariateStack>>,
        beta_spatial: Vec<f64>,
        beta_spatio_temporal: Vec<f64>,
        alpha: Option<f64>,
    ) -> Result<Self> {
        let (ns, nst) = covariates
            .as_ref()
            .map_or((0, 0), |c| (c.spatial().len(), c.spatio_temporal().len()));
        if beta_spatial.len() != ns || beta_spatio_temporal.len() != nst {
            return Err(Error::InvalidModel(format!(
                "trend has {} spatial and {} spatio-temporal coefficients for {ns} and {nst} covariates",
                beta_spatial.len(),
                beta_spatio_temporal.len()
            )));
        }
        let all_finite = std::iter::once(beta0)
            .chain(beta_spatial.iter().copied())
            .chain(beta_spatio_temporal.iter().copied())
            .chain(alpha)
            .all(f64::is_finite);
        if !all_finite {
            return Err(Error::InvalidModel("trend coefficients must be finite".into()));
        }
        Ok(TrendModel {
            beta0,
            beta_spatial,
            beta_spatio_temporal,
            alpha,
            covariates,
        })
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn beta_spatial(&self) -> &[f64] {
        &self.beta_spatial
    }

    pub fn beta_spatio_temporal(&self) -> &[f64] {
        &self.beta_spatio_temporal
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn covariates(&self) -> Option<&Arc<CovariateStack>> {
        self.covariates.as_ref()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.beta_spatial.is_empty() && self.beta_spatio_temporal.is_empty() && self.alpha.is_none()
    }

    /// Number of trend coefficients including the intercept.
    pub fn n_coefficients(&self) -> usize {
        1 + self.beta_spatial.len() + self.beta_spatio_temporal.len() + usize::from(self.alpha.is_some())
    }

    /// Coefficient names in regressor order.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        if let Some(c) = &self.covariates {
            names.extend(c.spatial_names().map(str::to_string));
            names.extend(c.spatio_temporal_names().map(str::to_string));
        }
        if self.alpha.is_some() {
            names.push("time".to_string());
        }
        names
    }

    /// Coefficients in regressor order.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = vec![self.beta0];
        v.extend(&self.beta_spatial);
        v.extend(&self.beta_spatio_temporal);
        v.extend(self.alpha);
        v
    }

    /// Same structure with new coefficients (regressor order).
    pub fn with_coefficients(&self, coefs: &[f64]) -> Result<Self> {
        if coefs.len() != self.n_coefficients() {
            return Err(Error::LengthMismatch {
                expected: self.n_coefficients(),
                found: coefs.len(),
            });
        }
        let ns = self.beta_spatial.len();
        let nst = self.beta_spatio_temporal.len();
        TrendModel::new(
            coefs[0],
            self.covariates.clone(),
            coefs[1..1 + ns].to_vec(),
            coefs[1 + ns..1 + ns + nst].to_vec(),
            self.alpha.map(|_| coefs[1 + ns + nst]),
        )
    }

    /// Regressor vector `(1, Z_S(p), Z_ST(p) [, t])`.
    pub fn regressors(&self, p: &StPoint) -> Result<Vec<f64>> {
        let mut z = Vec::with_capacity(self.n_coefficients());
        z.push(1.0);
        if let Some(c) = &self.covariates {
            for k in 0..self.beta_spatial.len() {
                z.push(c.spatial_value(k, p)?);
            }
            for l in 0..self.beta_spatio_temporal.len() {
                z.push(c.spatio_temporal_value(l, p)?);
            }
        }
        if self.alpha.is_some() {
            z.push(p.t);
        }
        Ok(z)
    }

    pub fn log_intensity(&self, p: &StPoint) -> Result<f64> {
        let mut eta = self.beta0;
        if let Some(c) = &self.covariates {
            for (k, b) in self.beta_spatial.iter().enumerate() {
                eta += b * c.spatial_value(k, p)?;
            }
            for (l, b) in self.beta_spatio_temporal.iter().enumerate() {
                eta += b * c.spatio_temporal_value(l, p)?;
            }
        }
        if let Some(a) = self.alpha {
            eta += a * p.t;
        }
        Ok(eta)
    }

    pub fn intensity(&self, p: &StPoint) -> Result<f64> {
        Ok(self.log_intensity(p)?.exp())
    }

    /// Exact `sup` of the log trend over pixels meeting the window's bounding box.
    pub fn sup_log_intensity(&self, window: &StWindow) -> Result<f64> {
        let Some(stack) = self.covariates.as_ref().filter(|_| !self.is_homogeneous()) else {
            let tb = window.t_bounds();
            return Ok(self.beta0 + self.alpha.map_or(0.0, |a| (a * tb[0]).max(a * tb[1])));
        };
        let g = stack.grid();
        let (xb, yb, tb) = (window.x_bounds(), window.y_bounds(), window.t_bounds());
        let cols: Vec<usize> = (0..g.nx)
            .filter(|&i| {
                let x0 = g.origin.0 + i as f64 * g.cell.0;
                x0 <= xb[1] && x0 + g.cell.0 >= xb[0]
            })
            .collect();
        let rows: Vec<usize> = (0..g.ny)
            .filter(|&j| {
                let y0 = g.origin.1 + j as f64 * g.cell.1;
                y0 <= yb[1] && y0 + g.cell.1 >= yb[0]
            })
            .collect();
        // Time intervals over which spatio-temporal values are constant.
        let slices: Vec<(Option<usize>, f64, f64)> = match (stack.time(), self.beta_spatio_temporal.is_empty()) {
            (Some(ts), false) => (0..ts.count)
                .filter_map(|k| {
                    let lo = (ts.origin + k as f64 * ts.step).max(tb[0]);
                    let hi = (ts.origin + (k + 1) as f64 * ts.step).min(tb[1]);
                    (lo <= hi).then_some((Some(k), lo, hi))
                })
                .collect(),
            _ => vec![(None, tb[0], tb[1])],
        };
        let mut best = f64::NEG_INFINITY;
        for &j in &rows {
            for &i in &cols {
                let cell = j * g.nx + i;
                let mut spatial = self.beta0;
                for (k, b) in self.beta_spatial.iter().enumerate() {
                    spatial += b * stack.spatial()[k].values[cell];
                }
                if spatial.is_nan() {
                    continue;
                }
                for &(slice, lo, hi) in &slices {
                    let mut eta = spatial;
                    if let Some(s) = slice {
                        for (l, b) in self.beta_spatio_temporal.iter().enumerate() {
                            eta += b * stack.spatio_temporal()[l].slices[s][cell];
                        }
                    }
                    if let Some(a) = self.alpha {
                        eta += (a * lo).max(a * hi);
                    }
                    if eta > best {
                        best = eta;
                    }
                }
            }
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::InvalidCovariates(
                "trend is undefined on the whole window".into(),
            ));
        }
        Ok(best)
    }
}

impl Intensity for TrendModel {
    fn rate(&self, p: &StPoint) -> Result<f64> {
        self.intensity(p)
    }

    fn upper_bound(&self, window: &StWindow) -> Result<f64> {
        Ok(self.sup_log_intensity(window)?.exp())
    }
}

/// One Strauss (or Geyer, with `saturation`) term of the hybrid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionComponent {
    pub gamma: f64,
    pub r: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<u32>,
}

impl InteractionComponent {
    pub fn strauss(gamma: f64, r: f64, q: f64) -> Self {
        InteractionComponent {
            gamma,
            r,
            q,
            saturation: None,
        }
    }

    pub fn geyer(gamma: f64, r: f64, q: f64, s: u32) -> Self {
        InteractionComponent {
            gamma,
            r,
            q,
            saturation: Some(s),
        }
    }
}

/// Cylindrical hardcore; disabled when either distance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hardcore {
    pub hs: f64,
    pub ht: f64,
}

impl Hardcore {
    pub const NONE: Hardcore = Hardcore { hs: 0.0, ht: 0.0 };

    pub fn new(hs: f64, ht: f64) -> Self {
        Hardcore { hs, ht }
    }

    pub fn is_active(&self) -> bool {
        self.hs > 0.0 && self.ht > 0.0
    }

    /// Whether two events are too close to coexist.
    #[inline]
    pub fn conflicts(&self, a: &StPoint, b: &StPoint) -> bool {
        self.is_active() && in_cylinder(a, b, self.hs, self.ht)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsModel {
    trend: TrendModel,
    components: Vec<InteractionComponent>,
    hardcore: Hardcore,
}

impl GibbsModel {
    pub fn new(trend: TrendModel, components: Vec<InteractionComponent>, hardcore: Hardcore) -> Result<Self> {
        let Hardcore { hs, ht } = hardcore;
        if !(hs >= 0.0 && ht >= 0.0 && hs.is_finite() && ht.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "hardcore ({hs}, {ht}) must be finite and non-negative"
            )));
        }
        for (j, c) in components.iter().enumerate() {
            if !(c.gamma > 0.0 && c.gamma.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "component {}: gamma must be positive",
                    j + 1
                )));
            }
            if !(c.r > 0.0 && c.q > 0.0 && c.r.is_finite() && c.q.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "component {}: radii must be positive",
                    j + 1
                )));
            }
            if c.saturation == Some(0) {
                return Err(Error::InvalidModel(format!(
                    "component {}: saturation must be >= 1",
                    j + 1
                )));
            }
        }
        for (j, w) in components.windows(2).enumerate() {
            if !(w[0].r < w[1].r && w[0].q < w[1].q) {
                return Err(Error::InvalidModel(format!(
                    "radii must increase strictly: component {} ({}, {}) vs {} ({}, {})",
                    j + 1,
                    w[0].r,
                    w[0].q,
                    j + 2,
                    w[1].r,
                    w[1].q
                )));
            }
        }
        if hardcore.is_active() {
            if let Some(first) = components.first() {
                if !(hs < first.r && ht < first.q) {
                    return Err(Error::InvalidModel(format!(
                        "hardcore ({hs}, {ht}) must lie strictly inside the first interaction cylinder ({}, {})",
                        first.r, first.q
                    )));
                }
            }
        }
        Ok(GibbsModel {
            trend,
            components,
            hardcore,
        })
    }

    /// Poisson process with the given trend.
    pub fn poisson(trend: TrendModel) -> Self {
        GibbsModel {
            trend,
            components: Vec::new(),
            hardcore: Hardcore::NONE,
        }
    }

    pub fn trend(&self) -> &TrendModel {
        &self.trend
    }

    pub fn components(&self) -> &[InteractionComponent] {
        &self.components
    }

    pub fn hardcore(&self) -> Hardcore {
        self.hardcore
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Copy with new trend and interaction strengths; irregular parameters kept.
    pub fn with_regular(&self, trend: TrendModel, gammas: &[f64]) -> Result<Self> {
        if gammas.len() != self.components.len() {
            return Err(Error::LengthMismatch {
                expected: self.components.len(),
                found: gammas.len(),
            });
        }
        let components = self
            .components
            .iter()
            .zip(gammas)
            .map(|(c, &gamma)| InteractionComponent { gamma, ..*c })
            .collect();
        GibbsModel::new(trend, components, self.hardcore)
    }

    /// Range beyond which points do not affect the conditional intensity.
    pub fn interaction_range(&self) -> f64 {
        let mut range = if self.hardcore.is_active() {
            self.hardcore.hs.max(self.hardcore.ht)
        } else {
            0.0
        };
        for c in &self.components {
            // A saturated term also depends on the neighbours of neighbours.
            let k = if c.saturation.is_some() { 2.0 } else { 1.0 };
            range = range.max(k * c.r.max(c.q));
        }
        range
    }
}

/// Unnormalised log density, `Violation` standing for `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDensity {
    Finite(f64),
    Violation,
}

impl LogDensity {
    pub fn finite(self) -> Option<f64> {
        match self {
            LogDensity::Finite(v) => Some(v),
            LogDensity::Violation => None,
        }
    }
}

/// `true` (indicator 1) iff no point other than `u` lies in the closed
/// hardcore cylinder around `u`.
pub fn hardcore_indicator(u: &StPoint, points: &[StPoint], hardcore: Hardcore) -> bool {
    !hardcore.is_active() || !points.iter().any(|p| p != u && hardcore.conflicts(u, p))
}

/// Change statistic of a saturated component for adding `u` to `others`
/// (`others` must not contain `u`).
fn geyer_change(u: &StPoint, others: &[StPoint], r: f64, q: f64, s: u32) -> u32 {
    let s = s as usize;
    let mut own = 0usize;
    let mut gained = 0u32;
    for (i, p) in others.iter().enumerate() {
        if !in_cylinder(u, p, r, q) {
            continue;
        }
        own += 1;
        let before = others
            .iter()
            .enumerate()
            .filter(|&(k, o)| k != i && in_cylinder(p, o, r, q))
            .count();
        if before < s {
            gained += 1;
        }
    }
    own.min(s) as u32 + gained
}

/// Sufficient statistic `S_j(u, x \ u)` for every component.
///
/// Plain components count the points of `points \ {u}` in `C_{r_j}^{q_j}(u)`.
/// Saturated components give the exact change of `sum_i min(s, n*_i)` caused
/// by adding `u`, which includes the neighbours whose own counts rise.
pub fn sufficient_stats(u: &StPoint, points: &[StPoint], model: &GibbsModel) -> Vec<u32> {
    let mut counts = vec![0u32; model.components.len()];
    let mut others: Option<Vec<StPoint>> = None;
    for (j, c) in model.components.iter().enumerate() {
        counts[j] = match c.saturation {
            None => points.iter().filter(|p| *p != u && in_cylinder(u, p, c.r, c.q)).count() as u32,
            Some(s) => {
                let rest = others.get_or_insert_with(|| points.iter().filter(|p| *p != u).copied().collect());
                geyer_change(u, rest, c.r, c.q, s)
            }
        };
    }
    counts
}

/// `log prod_j gamma_j^{S_j(u, x)}`, or `None` under a hardcore conflict.
pub(crate) fn log_interaction(u: &StPoint, points: &[StPoint], model: &GibbsModel) -> Option<f64> {
    let comps = &model.components;
    let hc = model.hardcore;
    let plain_only = comps.iter().all(|c| c.saturation.is_none());
    if plain_only {
        let mut acc = 0.0;
        for p in points {
            if p == u {
                continue;
            }
            let dt = (u.t - p.t).abs();
            let dx = u.x - p.x;
            let dy = u.y - p.y;
            let ds = (dx * dx + dy * dy).sqrt();
            if hc.is_active() && ds <= hc.hs && dt <= hc.ht {
                return None;
            }
            for c in comps {
                if ds <= c.r && dt <= c.q {
                    acc += c.gamma.ln();
                }
            }
        }
        Some(acc)
    } else {
        if !hardcore_indicator(u, points, hc) {
            return None;
        }
        let stats = sufficient_stats(u, points, model);
        Some(stats.iter().zip(comps).map(|(&s, c)| s as f64 * c.gamma.ln()).sum())
    }
}

/// Papangelou conditional intensity `lambda(u | x \ u)`.
pub fn cond_intensity(model: &GibbsModel, u: &StPoint, points: &[StPoint]) -> Result<f64> {
    match log_interaction(u, points, model) {
        None => Ok(0.0),
        Some(li) => Ok((model.trend.log_intensity(u)? + li).exp()),
    }
}

/// `log f(x) + log c`, i.e. the log density without its normalising constant.
pub fn log_unnormalized_density(model: &GibbsModel, points: &[StPoint]) -> Result<LogDensity> {
    let hc = model.hardcore;
    if hc.is_active() {
        for (i, a) in points.iter().enumerate() {
            if points[i + 1..].iter().any(|b| hc.conflicts(a, b)) {
                return Ok(LogDensity::Violation);
            }
        }
    }
    let mut total = 0.0;
    for p in points {
        total += model.trend.log_intensity(p)?;
    }
    for c in &model.components {
        let stat = match c.saturation {
            None => crate::geometry::close_pair_count(points, c.r, c.q) as f64,
            Some(s) => points
                .iter()
                .map(|p| crate::geometry::neighbor_count(p, points, c.r, c.q, true).min(s as usize) as f64)
                .sum(),
        };
        total += stat * c.gamma.ln();
    }
    Ok(LogDensity::Finite(total))
}

/// Upper bound on the conditional intensity, kept on the log scale because
/// clustered components give astronomically large (but finite) bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBound {
    pub log_value: f64,
}

impl StabilityBound {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Maximum number of hardcore-compatible points inside `C_r^q`.
pub fn hardcore_packing_bound(r: f64, q: f64, hardcore: Hardcore) -> u64 {
    ((2.0 * r / hardcore.hs + 1.0).powi(2) * (2.0 * q / hardcore.ht + 1.0)).ceil() as u64
}

/// Local stability constant `sup_u,x lambda(u | x)`.
///
/// Components with `gamma <= 1` contribute nothing. A plain component with
/// `gamma > 1` needs the hardcore and contributes `gamma^K` with `K` the
/// packing bound of its cylinder. A saturated component with `gamma > 1`
/// contributes at most `gamma^{11 s}` (own term `s` plus at most `10 s`
/// unsaturated neighbours).
pub fn local_stability_bound(model: &GibbsModel, window: &StWindow) -> Result<StabilityBound> {
    let mut log_value = model.trend.sup_log_intensity(window)?;
    for (j, c) in model.components.iter().enumerate() {
        if c.gamma <= 1.0 {
            continue;
        }
        let packing = model
            .hardcore
            .is_active()
            .then(|| hardcore_packing_bound(c.r, c.q, model.hardcore) as f64);
        let saturated = c.saturation.map(|s| 11.0 * s as f64);
        let exponent = match (packing, saturated) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(Error::NotLocallyStable(format!(
                    "component {} has gamma = {} > 1 without a hardcore or saturation",
                    j + 1,
                    c.gamma
                )))
            }
        };
        log_value += exponent * c.gamma.ln();
    }
    Ok(StabilityBound { log_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::{GridGeometry, SpatialRaster};
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64, t: f64) -> StPoint {
        StPoint::new(x, y, t)
    }

    fn two_scale(lambda: f64, g1: f64, g2: f64) -> GibbsModel {
        GibbsModel::new(
            TrendModel::homogeneous(lambda),
            vec![
                InteractionComponent::strauss(g1, 0.05, 0.05),
                InteractionComponent::strauss(g2, 0.1, 0.1),
            ],
            Hardcore::new(0.01, 0.01),
        )
        .unwrap()
    }

    #[test]
    fn trend_examples() {
        let hom = TrendModel::homogeneous(70.0);
        assert_relative_eq!(hom.intensity(&p(0.3, 0.1, 0.9)).unwrap(), 70.0, max_relative = 1e-14);

        let g = GridGeometry::new((0.0, 0.0), (1.0, 1.0), 1, 1).unwrap();
        let stack = Arc::new(
            CovariateStack::new(
                g,
                None,
                vec![SpatialRaster {
                    name: "z".into(),
                    values: vec![2.0],
                }],
                vec![],
            )
            .unwrap(),
        );
        let t = TrendModel::new(0.0, Some(stack), vec![0.5], vec![], None).unwrap();
        assert_relative_eq!(
            t.intensity(&p(0.5, 0.5, 0.0)).unwrap(),
            1f64.exp(),
            max_relative = 1e-14
        );

        let timed = TrendModel::new(1.0, None, vec![], vec![], Some(-0.067)).unwrap();
        let ratio = timed.intensity(&p(0.0, 0.0, 1.0)).unwrap() / timed.intensity(&p(0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(ratio, (-0.067f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn trend_coefficient_count_must_match() {
        let g = GridGeometry::new((0.0, 0.0), (1.0, 1.0), 1, 1).unwrap();
        let stack = Arc::new(
            CovariateStack::new(
                g,
                None,
                vec![SpatialRaster {
                    name: "z".into(),
                    values: vec![2.0],
                }],
                vec![],
            )
            .unwrap(),
        );
        assert!(TrendModel::new(0.0, Some(stack), vec![], vec![], None).is_err());
    }

    #[test]
    fn trend_undefined_names_the_raster() {
        let g = GridGeometry::new((0.0, 0.0), (1.0, 1.0), 1, 1).unwrap();
        let stack = Arc::new(
            CovariateStack::new(
                g,
                None,
                vec![SpatialRaster {
                    name: "slope".into(),
                    values: vec![2.0],
                }],
                vec![],
            )
            .unwrap(),
        );
        let t = TrendModel::new(0.0, Some(stack), vec![1.0], vec![], None).unwrap();
        let err = t.intensity(&p(3.0, 0.5, 0.0)).unwrap_err();
        assert!(err.to_string().contains("slope"));
    }

    #[test]
    fn hardcore_indicator_examples() {
        let hc = Hardcore::new(0.01, 0.01);
        let x = [p(0.0, 0.0, 0.0)];
        assert!(!hardcore_indicator(&p(0.005, 0.0, 0.005), &x, hc));
        assert!(hardcore_indicator(&p(0.5, 0.5, 0.5), &x, hc));
        assert!(hardcore_indicator(&p(0.005, 0.0, 0.02), &x, hc));
        // The point itself never conflicts with itself.
        assert!(hardcore_indicator(&x[0], &x, hc));
        assert!(hardcore_indicator(&p(0.005, 0.0, 0.005), &x, Hardcore::NONE));
    }

    #[test]
    fn sufficient_stats_examples() {
        let m = two_scale(70.0, 0.8, 0.8);
        assert_eq!(sufficient_stats(&p(0.5, 0.5, 0.5), &[], &m), vec![0, 0]);
        let x = [p(0.52, 0.5, 0.52)];
        assert_eq!(sufficient_stats(&p(0.5, 0.5, 0.5), &x, &m), vec![1, 1]);
        let x = [p(0.58, 0.5, 0.5)];
        assert_eq!(sufficient_stats(&p(0.5, 0.5, 0.5), &x, &m), vec![0, 1]);
    }

    #[test]
    fn geyer_statistic_with_saturated_neighbours() {
        // Five neighbours of u, all mutually close: each already has 4 >= s
        // neighbours, so only u's own capped count changes.
        let m = GibbsModel::new(
            TrendModel::homogeneous(1.0),
            vec![InteractionComponent::geyer(1.2, 0.1, 0.1, 2)],
            Hardcore::NONE,
        )
        .unwrap();
        let x: Vec<StPoint> = (0..5).map(|k| p(0.5 + 0.01 * k as f64, 0.5, 0.5)).collect();
        assert_eq!(sufficient_stats(&p(0.52, 0.51, 0.5), &x, &m), vec![2]);

        // Five isolated neighbours (pairwise far apart): each gains one.
        let far: Vec<StPoint> = (0..5)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 5.0;
                p(0.5 + 0.09 * a.cos(), 0.5 + 0.09 * a.sin(), 0.5)
            })
            .collect();
        assert_eq!(sufficient_stats(&p(0.5, 0.5, 0.5), &far, &m), vec![2 + 5]);
    }

    #[test]
    fn cond_intensity_examples() {
        let m = two_scale(70.0, 0.8, 0.8);
        assert_relative_eq!(
            cond_intensity(&m, &p(0.5, 0.5, 0.5), &[]).unwrap(),
            70.0,
            max_relative = 1e-14
        );
        let x = [p(0.52, 0.5, 0.52)];
        assert_relative_eq!(
            cond_intensity(&m, &p(0.5, 0.5, 0.5), &x).unwrap(),
            44.8,
            max_relative = 1e-13
        );
        let x = [p(0.505, 0.5, 0.505)];
        assert_eq!(cond_intensity(&m, &p(0.5, 0.5, 0.5), &x).unwrap(), 0.0);
    }

    #[test]
    fn cond_intensity_at_a_data_point_excludes_itself() {
        let m = two_scale(70.0, 0.8, 0.8);
        let x = [p(0.5, 0.5, 0.5), p(0.52, 0.5, 0.52)];
        assert_relative_eq!(cond_intensity(&m, &x[0], &x).unwrap(), 44.8, max_relative = 1e-13);
    }

    #[test]
    fn log_density_examples() {
        let m = GibbsModel::new(
            TrendModel::homogeneous(50.0),
            vec![
                InteractionComponent::strauss(1.5, 0.05, 0.05),
                InteractionComponent::strauss(1.5, 0.1, 0.1),
            ],
            Hardcore::new(0.01, 0.01),
        )
        .unwrap();
        assert_eq!(log_unnormalized_density(&m, &[]).unwrap(), LogDensity::Finite(0.0));
        // ds = 0.07, dt = 0.02: outside C_{0.05}, inside C_{0.1}.
        let x = [p(0.3, 0.3, 0.3), p(0.37, 0.3, 0.32)];
        let v = log_unnormalized_density(&m, &x).unwrap().finite().unwrap();
        assert_relative_eq!(v, 2.0 * 50f64.ln() + 1.5f64.ln(), max_relative = 1e-14);
        // Inside both scales: gamma_1 * gamma_2.
        let x = [p(0.3, 0.3, 0.3), p(0.33, 0.3, 0.32)];
        let v = log_unnormalized_density(&m, &x).unwrap().finite().unwrap();
        assert_relative_eq!(v, 2.0 * 50f64.ln() + 2.0 * 1.5f64.ln(), max_relative = 1e-14);
        let x = [p(0.3, 0.3, 0.3), p(0.305, 0.3, 0.305)];
        assert_eq!(log_unnormalized_density(&m, &x).unwrap(), LogDensity::Violation);
    }

    #[test]
    fn stability_bound_examples() {
        let w = StWindow::unit_cube();
        let sub = two_scale(70.0, 0.8, 0.5);
        assert_relative_eq!(
            local_stability_bound(&sub, &w).unwrap().value(),
            70.0,
            max_relative = 1e-12
        );

        let hc = Hardcore::new(0.01, 0.01);
        let m = GibbsModel::new(
            TrendModel::homogeneous(70.0),
            vec![InteractionComponent::strauss(1.5, 0.05, 0.1)],
            hc,
        )
        .unwrap();
        assert_eq!(hardcore_packing_bound(0.05, 0.1, hc), 121 * 21);
        let b = local_stability_bound(&m, &w).unwrap();
        assert_relative_eq!(b.log_value, 70f64.ln() + 2541.0 * 1.5f64.ln(), max_relative = 1e-12);

        let poisson = GibbsModel::poisson(TrendModel::homogeneous(12.0));
        assert_relative_eq!(
            local_stability_bound(&poisson, &w).unwrap().value(),
            12.0,
            max_relative = 1e-12
        );

        let unstable = GibbsModel::new(
            TrendModel::homogeneous(70.0),
            vec![InteractionComponent::strauss(1.5, 0.05, 0.1)],
            Hardcore::NONE,
        )
        .unwrap();
        assert!(matches!(
            local_stability_bound(&unstable, &w),
            Err(Error::NotLocallyStable(_))
        ));
    }

    #[test]
    fn model_validation() {
        let trend = TrendModel::homogeneous(1.0);
        let bad_order = vec![
            InteractionComponent::strauss(0.5, 0.1, 0.1),
            InteractionComponent::strauss(0.5, 0.05, 0.2),
        ];
        assert!(GibbsModel::new(trend.clone(), bad_order, Hardcore::NONE).is_err());
        let hc_too_big = vec![InteractionComponent::strauss(0.5, 0.05, 0.05)];
        assert!(GibbsModel::new(trend.clone(), hc_too_big, Hardcore::new(0.06, 0.01)).is_err());
        let zero_gamma = vec![InteractionComponent::strauss(0.0, 0.05, 0.05)];
        assert!(GibbsModel::new(trend, zero_gamma, Hardcore::NONE).is_err());
    }

    #[test]
    fn sup_of_inhomogeneous_trend() {
        let g = GridGeometry::new((0.0, 0.0), (0.5, 0.5), 2, 2).unwrap();
        let stack = Arc::new(
            CovariateStack::new(
                g,
                None,
                vec![SpatialRaster {
                    name: "z".into(),
                    values: vec![0.0, 1.0, 3.0, -1.0],
                }],
                vec![],
            )
            .unwrap(),
        );
        let t = TrendModel::new(0.5, Some(stack), vec![2.0], vec![], Some(-1.0)).unwrap();
        let w = StWindow::unit_cube();
        assert_relative_eq!(t.sup_log_intensity(&w).unwrap(), 0.5 + 6.0, max_relative = 1e-14);
    }
}
