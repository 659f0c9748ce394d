use std::sync::Arc;

use serde::Serialize;

use super::design::build_logistic_design;
use super::irls::{fit_logistic, FitResult, IrlsOptions};
use crate::error::{Error, Result};
use crate::geometry::{PointPattern, StPoint, StWindow};
use crate::model::{GibbsModel, Hardcore, Intensity, ScaledIntensity, TrendModel};
use crate::simulate::{generate_dummies, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Dummy intensity multiplier `C`.
    pub c_factor: f64,
    pub seed: u64,
    pub irls: IrlsOptions,
}

impl FitOptions {
    pub fn new(seed: u64) -> Self {
        FitOptions {
            c_factor: 4.0,
            seed,
            irls: IrlsOptions::default(),
        }
    }
}

/// Reference intensity from which the dummies are drawn at rate `C` times.
#[derive(Debug, Clone)]
pub enum ReferenceIntensity {
    /// `n / |W|`.
    Homogeneous(f64),
    /// A Poisson trend fitted to the data in a first pass.
    PoissonFit(Box<TrendModel>),
}

impl Intensity for ReferenceIntensity {
    fn rate(&self, p: &StPoint) -> Result<f64> {
        match self {
            ReferenceIntensity::Homogeneous(r) => Ok(*r),
            ReferenceIntensity::PoissonFit(t) => t.intensity(p),
        }
    }

    fn upper_bound(&self, window: &StWindow) -> Result<f64> {
        match self {
            ReferenceIntensity::Homogeneous(r) => Ok(*r),
            ReferenceIntensity::PoissonFit(t) => t.upper_bound(window),
        }
    }
}

/// Dummy points together with the rate `rho = C * reference` they were drawn at.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub dummies: PointPattern,
    pub reference: Arc<ReferenceIntensity>,
    pub c_factor: f64,
}

impl Quadrature {
    pub fn rho(&self) -> ScaledIntensity<Arc<ReferenceIntensity>> {
        ScaledIntensity {
            inner: Arc::clone(&self.reference),
            factor: self.c_factor,
        }
    }
}

/// Builds the reference intensity for `trend`'s covariate structure.
///
/// A homogeneous trend uses `n / |W|`. Otherwise the trend coefficients are
/// first estimated as a Poisson model against homogeneous dummies, and the
/// fitted intensity becomes the reference.
pub fn reference_intensity(
    data: &PointPattern,
    trend: &TrendModel,
    c_factor: f64,
    irls: &IrlsOptions,
    rng: &mut RngStream,
) -> Result<ReferenceIntensity> {
    if data.is_empty() {
        return Err(Error::DegenerateFit("no data rows".into()));
    }
    let flat = ReferenceIntensity::Homogeneous(data.mean_intensity());
    if trend.is_homogeneous() && trend.alpha().is_none() {
        return Ok(flat);
    }
    let window = data.window();
    let dummies = generate_dummies(&flat, c_factor, window, Hardcore::NONE, data.points(), rng)?;
    let rho = ScaledIntensity {
        inner: &flat,
        factor: c_factor,
    };
    let design = build_logistic_design(data, &dummies, &GibbsModel::poisson(trend.clone()), &rho)?;
    let fit = fit_logistic(&design, irls)?;
    if fit.coefficients.iter().any(|b| !b.is_finite()) || !fit.separation.is_empty() {
        return Err(Error::DegenerateFit("first-pass Poisson fit is separated".into()));
    }
    Ok(ReferenceIntensity::PoissonFit(Box::new(
        trend.with_coefficients(&fit.coefficients)?,
    )))
}

/// Reference intensity plus hardcore-filtered dummies for `structure`.
pub fn quadrature(data: &PointPattern, structure: &GibbsModel, opts: &FitOptions) -> Result<Quadrature> {
    let mut rng = RngStream::new(opts.seed);
    let reference = reference_intensity(data, structure.trend(), opts.c_factor, &opts.irls, &mut rng)?;
    let dummies = generate_dummies(
        &reference,
        opts.c_factor,
        data.window(),
        structure.hardcore(),
        data.points(),
        &mut rng,
    )?;
    Ok(Quadrature {
        dummies,
        reference: Arc::new(reference),
        c_factor: opts.c_factor,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FittedModel {
    pub fit: FitResult,
    #[serde(skip)]
    pub model: GibbsModel,
    pub n_data: usize,
    pub n_dummies: usize,
}

/// Plugs the estimated coefficients back into `structure`.
pub fn fitted_model(structure: &GibbsModel, fit: &FitResult) -> Result<GibbsModel> {
    let trend = structure.trend().with_coefficients(fit.beta())?;
    let gammas: Vec<f64> = fit
        .gammas()
        .into_iter()
        .map(|g| g.clamp(f64::MIN_POSITIVE, f64::MAX))
        .collect();
    structure.with_regular(trend, &gammas)
}

/// Fits the regular parameters of `structure` against a given quadrature.
pub fn fit_with_quadrature(
    data: &PointPattern,
    structure: &GibbsModel,
    quad: &Quadrature,
    irls: &IrlsOptions,
) -> Result<FittedModel> {
    let design = build_logistic_design(data, &quad.dummies, structure, &quad.rho())?;
    let fit = fit_logistic(&design, irls)?;
    if !fit.converged {
        log::warn!("logistic fit did not converge after {} iterations", fit.iterations);
    }
    for s in &fit.separation {
        log::warn!("coefficient {} diverges ({:?})", s.name, s.direction);
    }
    let model = fitted_model(structure, &fit)?;
    Ok(FittedModel {
        model,
        n_data: design.n_data_rows(),
        n_dummies: design.n_dummy_rows(),
        fit,
    })
}

/// Estimates trend coefficients and interaction strengths by logistic
/// likelihood; radii and hardcore are taken from `structure` as given.
pub fn fit_regular(data: &PointPattern, structure: &GibbsModel, opts: &FitOptions) -> Result<FittedModel> {
    let quad = quadrature(data, structure, opts)?;
    fit_with_quadrature(data, structure, &quad, &opts.irls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstantIntensity, InteractionComponent};
    use crate::simulate::{run_birth_death, sample_poisson, MhConfig};

    fn poisson_pattern(rate: f64, seed: u64) -> PointPattern {
        let w = StWindow::unit_cube();
        sample_poisson(&w, &ConstantIntensity(rate), rate, &mut RngStream::new(seed)).unwrap()
    }

    #[test]
    fn homogeneous_poisson_intercept_converges_to_log_rate() {
        let data = poisson_pattern(400.0, 11);
        let structure = GibbsModel::poisson(TrendModel::homogeneous(1.0));
        let mut opts = FitOptions::new(5);
        opts.c_factor = 16.0;
        let fitted = fit_regular(&data, &structure, &opts).unwrap();
        let target = data.len() as f64;
        assert!((fitted.fit.coefficients[0].exp() / target - 1.0).abs() < 0.05);
        assert!(fitted.fit.score_max < 1e-6);
    }

    #[test]
    fn fitted_model_carries_estimates() {
        let data = poisson_pattern(200.0, 3);
        let structure = GibbsModel::new(
            TrendModel::homogeneous(1.0),
            vec![InteractionComponent::strauss(1.0, 0.1, 0.1)],
            Hardcore::NONE,
        )
        .unwrap();
        let fitted = fit_regular(&data, &structure, &FitOptions::new(1)).unwrap();
        assert_eq!(fitted.model.components()[0].gamma, fitted.fit.gammas()[0]);
        assert_eq!(fitted.model.trend().beta0(), fitted.fit.coefficients[0]);
        // Poisson data: the interaction estimate is near 1.
        assert!((fitted.fit.gammas()[0] - 1.0).abs() < 0.5, "{:?}", fitted.fit.gammas());
    }

    #[test]
    fn strauss_recovers_inhibition() {
        let w = StWindow::unit_cube();
        let truth = GibbsModel::new(
            TrendModel::homogeneous(300.0),
            vec![InteractionComponent::strauss(0.3, 0.08, 0.08)],
            Hardcore::NONE,
        )
        .unwrap();
        let cfg = MhConfig::for_model(&truth, &w, 9).unwrap();
        let data = run_birth_death(&truth, &w, &cfg, &mut RngStream::new(9)).unwrap();
        let structure = truth.with_regular(TrendModel::homogeneous(1.0), &[1.0]).unwrap();
        let fitted = fit_regular(&data, &structure, &FitOptions::new(2)).unwrap();
        let g = fitted.fit.gammas()[0];
        assert!(g > 0.1 && g < 0.6, "gamma = {g}");
        assert!(fitted.fit.converged);
    }

    #[test]
    fn doubling_dummies_moves_estimates_little() {
        let data = poisson_pattern(300.0, 21);
        let structure = GibbsModel::new(
            TrendModel::homogeneous(1.0),
            vec![InteractionComponent::strauss(1.0, 0.1, 0.1)],
            Hardcore::NONE,
        )
        .unwrap();
        let mut a = FitOptions::new(4);
        a.c_factor = 8.0;
        let mut b = a;
        b.c_factor = 16.0;
        let ta = fit_regular(&data, &structure, &a).unwrap().fit.theta()[0];
        let tb = fit_regular(&data, &structure, &b).unwrap().fit.theta()[0];
        // Dummy noise is of order 1/sqrt(dummy count).
        let scale = 1.0 / (8.0 * data.len() as f64).sqrt();
        assert!((ta - tb).abs() < 10.0 * scale, "{ta} vs {tb}");
    }
}
