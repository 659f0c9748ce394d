use proptest::prelude::*;
use stgibbs_core::model::{cond_intensity, local_stability_bound, log_unnormalized_density, LogDensity};
use stgibbs_core::*;

fn arb_point() -> impl Strategy<Value = StPoint> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, t)| StPoint::new(x, y, t))
}

fn arb_points(max: usize) -> impl Strategy<Value = Vec<StPoint>> {
    prop::collection::vec(arb_point(), 0..=max)
}

/// Two nested components, optionally one saturated, with a small hardcore.
fn arb_model(allow_clustering: bool) -> impl Strategy<Value = GibbsModel> {
    let g = if allow_clustering { 0.2..2.5f64 } else { 0.05..1.0f64 };
    (
        g.clone(),
        g,
        0.05..0.2f64,
        0.05..0.2f64,
        prop::option::of(1u32..4),
        prop::bool::ANY,
    )
        .prop_map(|(g1, g2, r, q, sat, hc)| {
            let c1 = InteractionComponent::strauss(g1, r, q);
            let c2 = match sat {
                Some(s) => InteractionComponent::geyer(g2, 2.0 * r, 2.0 * q, s),
                None => InteractionComponent::strauss(g2, 2.0 * r, 2.0 * q),
            };
            let hardcore = if hc || g1 > 1.0 || g2 > 1.0 {
                Hardcore::new(0.03, 0.03)
            } else {
                Hardcore::NONE
            };
            GibbsModel::new(TrendModel::homogeneous(40.0), vec![c1, c2], hardcore).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn density_ratio_is_conditional_intensity(model in arb_model(true), x in arb_points(20), u in arb_point()) {
        let lam = cond_intensity(&model, &u, &x).unwrap();
        let mut xu = x.clone();
        xu.push(u);
        let before = log_unnormalized_density(&model, &x).unwrap();
        let after = log_unnormalized_density(&model, &xu).unwrap();
        match (before, after) {
            (LogDensity::Finite(a), LogDensity::Finite(b)) => {
                prop_assert!(lam > 0.0);
                let rel = ((b - a).exp() - lam).abs() / lam;
                prop_assert!(rel < 1e-10, "relative error {rel}");
            }
            (LogDensity::Finite(_), LogDensity::Violation) => prop_assert_eq!(lam, 0.0),
            (LogDensity::Violation, _) => prop_assert_eq!(after, LogDensity::Violation),
        }
    }

    #[test]
    fn conditional_intensity_is_finite_and_bounded(model in arb_model(true), x in arb_points(20), u in arb_point()) {
        let lam = cond_intensity(&model, &u, &x).unwrap();
        prop_assert!(lam.is_finite() && lam >= 0.0);
        let bound = local_stability_bound(&model, &StWindow::unit_cube()).unwrap();
        if log_unnormalized_density(&model, &x).unwrap() != LogDensity::Violation {
            prop_assert!(lam <= bound.value() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn inhibition_decreases_with_more_neighbours(
        g1 in 0.05..1.0f64, g2 in 0.05..1.0f64,
        x in arb_points(15), extra in arb_points(5), u in arb_point(),
    ) {
        let model = GibbsModel::new(
            TrendModel::homogeneous(40.0),
            vec![InteractionComponent::strauss(g1, 0.1, 0.1), InteractionComponent::strauss(g2, 0.2, 0.2)],
            Hardcore::NONE,
        ).unwrap();
        let mut bigger = x.clone();
        bigger.extend(extra);
        let small = cond_intensity(&model, &u, &x).unwrap();
        let large = cond_intensity(&model, &u, &bigger).unwrap();
        prop_assert!(large <= small * (1.0 + 1e-12));
    }
}

#[test]
fn poisson_chains_match_the_trend_count() {
    let model = GibbsModel::poisson(TrendModel::homogeneous(70.0));
    let w = StWindow::unit_cube();
    let cfg = MhConfig::for_model(&model, &w, 7).unwrap();
    let pats = stgibbs_core::simulate::simulate_replicates(&model, &w, &cfg, 60).unwrap();
    let mean = pats.iter().map(|p| p.len() as f64).sum::<f64>() / 60.0;
    assert!((mean - 70.0).abs() < 4.0 * (70.0f64 / 60.0).sqrt(), "mean {mean}");
}

#[test]
fn replicates_are_reproducible() {
    let model = GibbsModel::new(
        TrendModel::homogeneous(50.0),
        vec![InteractionComponent::strauss(1.5, 0.05, 0.05)],
        Hardcore::new(0.01, 0.01),
    )
    .unwrap();
    let w = StWindow::unit_cube();
    let cfg = MhConfig::for_model(&model, &w, 11).unwrap();
    let a = stgibbs_core::simulate::simulate_replicates(&model, &w, &cfg, 4).unwrap();
    let b = stgibbs_core::simulate::simulate_replicates(&model, &w, &cfg, 4).unwrap();
    assert_eq!(a, b);
    for p in &a {
        let hc = model.hardcore();
        let pts = p.points();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!(!hc.conflicts(&pts[i], &pts[j]));
            }
        }
    }
}
