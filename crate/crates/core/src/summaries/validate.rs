use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::envelope::{envelope_test, EnvelopeResult};
use super::gpcf::{estimate_gpcf_with, intensity_at_points, loo_kernel_intensity, Bandwidths, GpcfSurface};
use crate::error::Result;
use crate::geometry::PointPattern;
use crate::model::GibbsModel;
use crate::simulate::{run_birth_death, MhConfig, RngStream};

/// Intensity plugged into the g estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GIntensity {
    /// The model's first-order trend.
    #[default]
    Trend,
    /// `n / |W|` of each pattern.
    Homogeneous,
    /// Leave-one-out Gaussian kernel estimate of each pattern.
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSpec {
    pub u_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    /// Defaults to Silverman bandwidths of the observed pattern.
    pub bandwidths: Option<Bandwidths>,
    pub intensity: GIntensity,
    pub n_sim: usize,
    pub level: f64,
    pub seed: u64,
    /// `(steps, burnin)`; defaults to [`MhConfig::for_model`].
    pub chain: Option<(u64, u64)>,
}

pub fn gpcf_for(
    pattern: &PointPattern,
    model: &GibbsModel,
    intensity: GIntensity,
    u_grid: &[f64],
    v_grid: &[f64],
    bw: Bandwidths,
) -> Result<GpcfSurface> {
    let lambdas = match intensity {
        GIntensity::Trend => intensity_at_points(pattern, model.trend())?,
        GIntensity::Homogeneous => vec![pattern.mean_intensity(); pattern.len()],
        GIntensity::LeaveOneOut => loo_kernel_intensity(pattern, None)?,
    };
    estimate_gpcf_with(pattern, &lambdas, u_grid, v_grid, bw)
}

/// Simulates `n_sim` patterns from `model` on the data window and compares
/// their g surfaces with that of `data`. Replicate `k` uses
/// `RngStream::substream(seed, k)`.
pub fn simulation_envelope(data: &PointPattern, model: &GibbsModel, spec: &EnvelopeSpec) -> Result<EnvelopeResult> {
    let (u, v) = (&spec.u_grid, &spec.v_grid);
    let bw = match spec.bandwidths {
        Some(b) => b,
        None => Bandwidths::silverman(data, *u.last().unwrap_or(&0.0), *v.last().unwrap_or(&0.0))?,
    };
    let observed = gpcf_for(data, model, spec.intensity, u, v, bw)?;
    let window = data.window();
    let cfg = match spec.chain {
        Some((steps, burnin)) => MhConfig::new(steps, burnin, spec.seed)?,
        None => MhConfig::for_model(model, window, spec.seed)?,
    };
    let sims = (0..spec.n_sim)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::substream(spec.seed, k as u64);
            let p = run_birth_death(model, window, &cfg, &mut rng)?;
            gpcf_for(&p, model, spec.intensity, u, v, bw)
        })
        .collect::<Result<Vec<_>>>()?;
    envelope_test(&observed, &sims, spec.level)
}
