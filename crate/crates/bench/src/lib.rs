//! Fixtures shared by the benchmarks.

use stgibbs_core::simulate::run_birth_death;
use stgibbs_core::{
    GibbsModel, Hardcore, InteractionComponent, MhConfig, PointPattern, RngStream, StWindow, TrendModel,
};

/// Two-scale hybrid Strauss hardcore model on the unit cube.
pub fn hybrid(rate: f64) -> GibbsModel {
    GibbsModel::new(
        TrendModel::homogeneous(rate),
        vec![
            InteractionComponent::strauss(0.5, 0.05, 0.05),
            InteractionComponent::strauss(1.5, 0.1, 0.1),
        ],
        Hardcore::new(0.01, 0.01),
    )
    .expect("valid model")
}

/// One equilibrium pattern of [`hybrid`].
pub fn pattern(rate: f64, seed: u64) -> PointPattern {
    let model = hybrid(rate);
    let w = StWindow::unit_cube();
    let cfg = MhConfig::for_model(&model, &w, seed).expect("valid chain");
    run_birth_death(&model, &w, &cfg, &mut RngStream::new(seed)).expect("chain runs")
}
