//! Logistic-likelihood estimation of the regular parameters, hardcore
//! estimation from the Pareto front of interpoint distances, and AIC
//! selection of interaction radii.

pub mod design;
pub mod fit;
pub mod irls;
pub mod pareto;
pub mod select;

pub use design::{build_logistic_design, LogisticDesign};
pub use fit::{fit_regular, fit_with_quadrature, quadrature, FitOptions, FittedModel, Quadrature, ReferenceIntensity};
pub use irls::{fit_logistic, FitResult, IrlsOptions, Separation, SeparationDirection};
pub use pareto::{choose_hardcore, pareto_front, HardcorePolicy, ParetoFront};
pub use select::{radii_grid, select_irregular, RankedFit, Selection};
