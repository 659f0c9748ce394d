//! Spatio-temporal Gibbs point processes built around the hybrid Strauss
//! hardcore model.
//!
//! * [`geometry`]: events, windows, cylinder neighbourhoods.
//! * [`covariates`] and [`model`]: trends, interaction terms, conditional
//!   intensities and unnormalised densities.
//! * [`simulate`]: Poisson thinning, dummy points, birth-death MCMC.
//! * [`infer`]: logistic-likelihood fitting, Pareto-front hardcore choice,
//!   AIC selection of interaction radii.
//! * [`summaries`]: pair correlation surfaces and ERL envelope tests.
//! * [`io`]: text formats for patterns, model specs, covariates and reports.

pub mod covariates;
pub mod error;
pub mod geometry;
pub mod infer;
pub mod io;
pub mod model;
pub mod simulate;
pub mod summaries;

pub use covariates::CovariateStack;
pub use error::{Error, ErrorKind, Result};
pub use geometry::{DistancePair, PointPattern, SpatialMask, StPoint, StWindow};
pub use infer::{FitResult, FittedModel, HardcorePolicy, ParetoFront, Selection};
pub use model::{GibbsModel, Hardcore, Intensity, InteractionComponent, TrendModel};
pub use simulate::{MhConfig, RngStream};
pub use summaries::{Bandwidths, EnvelopeResult, GpcfSurface};
