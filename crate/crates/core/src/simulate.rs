//! Poisson samplers, dummy points, and birth-death Metropolis-Hastings.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GridIndex, PointPattern, StPoint, StWindow, GRID_INDEX_THRESHOLD};
use crate::model::{
    cond_intensity, hardcore_indicator, local_stability_bound, log_unnormalized_density, GibbsModel, Hardcore,
    Intensity, LogDensity, ScaledIntensity,
};

/// Seeded random stream: ChaCha8 (`rand_chacha`), seeded through
/// `seed_from_u64`. Replicate `k` of a run uses ChaCha stream number `k`, so
/// replicates are independent and reproducible on every platform.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        RngStream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream `index` derived from `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        RngStream(rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

/// Poisson process with intensity `rate` by dominated thinning.
///
/// Draws `N ~ Poisson(bound * |box|)` uniform points on the window's bounding
/// box, drops those outside the mask, and keeps each survivor with
/// probability `rate(p) / bound`.
pub fn sample_poisson<R: Rng + ?Sized>(
    window: &StWindow,
    rate: &dyn Intensity,
    bound: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "dominating rate {bound} must be finite and non-negative"
        )));
    }
    let n = poisson_count(bound * window.box_volume(), rng);
    let mut points = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let p = window.sample_box(rng);
        let keep = rng.random::<f64>();
        if !window.contains(&p) {
            continue;
        }
        let r = rate.rate(&p)?;
        if r > bound * (1.0 + 1e-12) {
            return Err(Error::RateBoundViolated {
                rate: r,
                bound,
                x: p.x,
                y: p.y,
                t: p.t,
            });
        }
        if keep * bound < r {
            points.push(p);
        }
    }
    Ok(PointPattern::from_parts_unchecked(points, window.clone()))
}

/// Dummy points for logistic fitting: a Poisson process with intensity
/// `c * reference`, minus every dummy that falls in the hardcore cylinder of
/// a data point. Dummies are not thinned against each other.
pub fn generate_dummies<R: Rng + ?Sized>(
    reference: &dyn Intensity,
    c: f64,
    window: &StWindow,
    hardcore: Hardcore,
    data: &[StPoint],
    rng: &mut R,
) -> Result<PointPattern> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidConfig(format!("dummy factor C = {c} must be positive")));
    }
    let rho = ScaledIntensity {
        inner: reference,
        factor: c,
    };
    let bound = rho.upper_bound(window)?;
    let raw = sample_poisson(window, &rho, bound, rng)?;
    if !hardcore.is_active() {
        return Ok(raw);
    }
    let mut kept = raw.into_points();
    if data.len() > GRID_INDEX_THRESHOLD {
        let index = GridIndex::new(data, hardcore.hs, hardcore.ht);
        kept.retain(|d| {
            let mut clash = false;
            index.for_each_candidate(d, hardcore.hs, hardcore.ht, |j| {
                clash |= hardcore.conflicts(d, &data[j])
            });
            !clash
        });
    } else {
        kept.retain(|d| hardcore_indicator(d, data, hardcore));
    }
    Ok(PointPattern::from_parts_unchecked(kept, window.clone()))
}

#[derive(Debug, Clone)]
pub struct MhConfig {
    /// Total iterations, burn-in included.
    pub steps: u64,
    /// Iterations excluded from trace statistics.
    pub burnin: u64,
    pub birth_prob: f64,
    pub seed: u64,
    /// Starting state; empty when `None`.
    pub initial: Option<PointPattern>,
}

impl MhConfig {
    pub fn new(steps: u64, burnin: u64, seed: u64) -> Result<Self> {
        let cfg = MhConfig {
            steps,
            burnin,
            birth_prob: 0.5,
            seed,
            initial: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults scaled to the expected point count `E` of the trend:
    /// burn-in `10 E`, total `200 E` (at least 1000) iterations.
    pub fn for_model(model: &GibbsModel, window: &StWindow, seed: u64) -> Result<Self> {
        let expected = expected_trend_count(model, window)?.max(1.0);
        let burnin = (10.0 * expected).ceil() as u64;
        let steps = ((200.0 * expected).ceil() as u64).max(1000).max(burnin + 1);
        MhConfig::new(steps, burnin, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.birth_prob > 0.0 && self.birth_prob < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "birth probability {} must lie in (0, 1)",
                self.birth_prob
            )));
        }
        if self.steps <= self.burnin {
            return Err(Error::InvalidConfig(format!(
                "steps ({}) must exceed burn-in ({})",
                self.steps, self.burnin
            )));
        }
        Ok(())
    }
}

/// Midpoint-rule estimate of `integral_W trend` on a 20^3 lattice.
pub fn expected_trend_count(model: &GibbsModel, window: &StWindow) -> Result<f64> {
    let trend = model.trend();
    if trend.is_homogeneous() {
        return Ok(trend.beta0().exp() * window.volume());
    }
    const K: usize = 20;
    let (xb, yb, tb) = (window.x_bounds(), window.y_bounds(), window.t_bounds());
    let mut sum = 0.0;
    let mut inside = 0usize;
    for a in 0..K {
        for b in 0..K {
            for c in 0..K {
                let p = StPoint::new(
                    xb[0] + (a as f64 + 0.5) / K as f64 * (xb[1] - xb[0]),
                    yb[0] + (b as f64 + 0.5) / K as f64 * (yb[1] - yb[0]),
                    tb[0] + (c as f64 + 0.5) / K as f64 * (tb[1] - tb[0]),
                );
                if !window.contains(&p) {
                    continue;
                }
                if let Ok(v) = trend.intensity(&p) {
                    sum += v;
                    inside += 1;
                }
            }
        }
    }
    if inside == 0 {
        return Ok(0.0);
    }
    Ok(sum / inside as f64 * window.volume())
}

/// Acceptance probability of a birth at a site with conditional intensity
/// `lambda` into a state of `n` points.
pub fn birth_acceptance(lambda: f64, volume: f64, n: usize, birth_prob: f64) -> f64 {
    let odds = birth_prob / (1.0 - birth_prob);
    (lambda * volume / ((n as f64 + 1.0) * odds)).min(1.0)
}

/// Acceptance probability of deleting a point with conditional intensity
/// `lambda` (given the rest) from a state of `n` points.
pub fn death_acceptance(lambda: f64, volume: f64, n: usize, birth_prob: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let odds = birth_prob / (1.0 - birth_prob);
    (n as f64 * odds / (lambda * volume)).min(1.0)
}

/// Chain statistics gathered after burn-in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MhTrace {
    pub mean_count: f64,
    pub births_proposed: u64,
    pub births_accepted: u64,
    pub deaths_proposed: u64,
    pub deaths_accepted: u64,
}

#[derive(Debug, Clone)]
pub struct MhOutput {
    pub pattern: PointPattern,
    pub trace: MhTrace,
}

/// Birth-death Metropolis-Hastings for a Gibbs model on `window`.
pub fn run_birth_death<R: Rng + ?Sized>(
    model: &GibbsModel,
    window: &StWindow,
    cfg: &MhConfig,
    rng: &mut R,
) -> Result<PointPattern> {
    Ok(run_birth_death_traced(model, window, cfg, rng)?.pattern)
}

pub fn run_birth_death_traced<R: Rng + ?Sized>(
    model: &GibbsModel,
    window: &StWindow,
    cfg: &MhConfig,
    rng: &mut R,
) -> Result<MhOutput> {
    cfg.validate()?;
    local_stability_bound(model, window)?;
    let mut state = match &cfg.initial {
        None => PointPattern::empty(window.clone()),
        Some(init) => {
            let checked = PointPattern::new(init.points().to_vec(), window.clone())?;
            if log_unnormalized_density(model, checked.points())? == LogDensity::Violation {
                return Err(Error::InvalidConfig("initial state violates the hardcore".into()));
            }
            checked
        }
    };
    let volume = window.volume();
    let pb = cfg.birth_prob;
    let mut trace = MhTrace::default();
    let mut count_sum = 0.0;
    for step in 0..cfg.steps {
        let recording = step >= cfg.burnin;
        if rng.random::<f64>() < pb {
            let u = window.sample_uniform(rng);
            let accept_u = rng.random::<f64>();
            let lambda = cond_intensity(model, &u, state.points())?;
            let a = birth_acceptance(lambda, volume, state.len(), pb);
            let accepted = lambda > 0.0 && accept_u < a;
            if accepted {
                state.push_unchecked(u);
            }
            if recording {
                trace.births_proposed += 1;
                trace.births_accepted += u64::from(accepted);
            }
        } else {
            let n = state.len();
            if n > 0 {
                let i = rng.random_range(0..n);
                let accept_u = rng.random::<f64>();
                let lambda = cond_intensity(model, &state.points()[i], state.points())?;
                let accepted = accept_u < death_acceptance(lambda, volume, n, pb);
                if accepted {
                    state.swap_remove(i);
                }
                if recording {
                    trace.deaths_accepted += u64::from(accepted);
                }
            }
            if recording {
                trace.deaths_proposed += 1;
            }
        }
        if recording {
            count_sum += state.len() as f64;
        }
    }
    trace.mean_count = count_sum / (cfg.steps - cfg.burnin) as f64;
    Ok(MhOutput { pattern: state, trace })
}

/// `n` independent chains; chain `k` uses `RngStream::substream(cfg.seed, k)`.
pub fn simulate_replicates(
    model: &GibbsModel,
    window: &StWindow,
    cfg: &MhConfig,
    n: usize,
) -> Result<Vec<PointPattern>> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngStream::substream(cfg.seed, k as u64);
            run_birth_death(model, window, cfg, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::close_pair_count;
    use crate::model::{ConstantIntensity, InteractionComponent, TrendModel};

    #[test]
    fn birth_ratio_example() {
        assert_eq!(birth_acceptance(70.0, 1.0, 69, 0.5), 1.0);
        assert!((birth_acceptance(70.0, 1.0, 139, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(birth_acceptance(0.0, 1.0, 3, 0.5), 0.0);
        assert!((death_acceptance(70.0, 1.0, 35, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_gives_empty_pattern() {
        let mut rng = RngStream::new(1);
        let p = sample_poisson(&StWindow::unit_cube(), &ConstantIntensity(0.0), 0.0, &mut rng).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn bound_violation_is_reported() {
        let mut rng = RngStream::new(1);
        let err = sample_poisson(&StWindow::unit_cube(), &ConstantIntensity(10.0), 5.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::RateBoundViolated { .. }));
    }

    #[test]
    fn poisson_mean_count() {
        let w = StWindow::unit_cube();
        let total: usize = (0..400)
            .map(|k| {
                let mut rng = RngStream::substream(3, k);
                sample_poisson(&w, &ConstantIntensity(70.0), 70.0, &mut rng)
                    .unwrap()
                    .len()
            })
            .sum();
        let mean = total as f64 / 400.0;
        // sd of the mean = sqrt(70/400) ~ 0.42
        assert!((mean - 70.0).abs() < 1.7, "mean {mean}");
    }

    #[test]
    fn thinning_follows_the_rate() {
        // rate = 100 x on the unit cube: expected 50, centre of mass in x at 2/3.
        struct Linear;
        impl Intensity for Linear {
            fn rate(&self, p: &StPoint) -> Result<f64> {
                Ok(100.0 * p.x)
            }
            fn upper_bound(&self, _: &StWindow) -> Result<f64> {
                Ok(100.0)
            }
        }
        let w = StWindow::unit_cube();
        let mut n = 0usize;
        let mut sx = 0.0;
        for k in 0..200 {
            let mut rng = RngStream::substream(5, k);
            let p = sample_poisson(&w, &Linear, 100.0, &mut rng).unwrap();
            n += p.len();
            sx += p.points().iter().map(|q| q.x).sum::<f64>();
        }
        let mean = n as f64 / 200.0;
        assert!((mean - 50.0).abs() < 2.0, "mean count {mean}");
        assert!((sx / n as f64 - 2.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn dummies_respect_data_hardcore() {
        let w = StWindow::unit_cube();
        let data = vec![StPoint::new(0.5, 0.5, 0.5)];
        let hc = Hardcore::new(0.2, 0.2);
        let mut rng = RngStream::new(11);
        let d = generate_dummies(&ConstantIntensity(100.0), 4.0, &w, hc, &data, &mut rng).unwrap();
        assert!(d.points().iter().all(|p| !hc.conflicts(p, &data[0])));
        // Removed volume is pi 0.04 * 0.4 ~ 0.05 of the cube.
        assert!(d.len() > 300 && d.len() < 460, "{}", d.len());

        let mut rng = RngStream::new(11);
        let plain = generate_dummies(&ConstantIntensity(100.0), 4.0, &w, Hardcore::NONE, &data, &mut rng).unwrap();
        let mut rng = RngStream::new(11);
        let raw = sample_poisson(&w, &ConstantIntensity(400.0), 400.0, &mut rng).unwrap();
        assert_eq!(plain.points(), raw.points());
    }

    #[test]
    fn dummy_count_for_c4() {
        let w = StWindow::unit_cube();
        let mut total = 0usize;
        for k in 0..100 {
            let mut rng = RngStream::substream(21, k);
            total += generate_dummies(&ConstantIntensity(100.0), 4.0, &w, Hardcore::NONE, &[], &mut rng)
                .unwrap()
                .len();
        }
        let mean = total as f64 / 100.0;
        assert!((mean - 400.0).abs() < 8.0, "{mean}");
    }

    #[test]
    fn config_validation() {
        assert!(MhConfig::new(10, 10, 0).is_err());
        let mut cfg = MhConfig::new(10, 0, 0).unwrap();
        cfg.birth_prob = 1.0;
        assert!(cfg.validate().is_err());
    }

    fn model1() -> GibbsModel {
        GibbsModel::new(
            TrendModel::homogeneous(70.0),
            vec![
                InteractionComponent::strauss(0.8, 0.05, 0.05),
                InteractionComponent::strauss(0.8, 0.1, 0.1),
            ],
            Hardcore::new(0.01, 0.01),
        )
        .unwrap()
    }

    #[test]
    fn chains_are_deterministic_and_hardcore_free() {
        let w = StWindow::unit_cube();
        let cfg = MhConfig::new(20_000, 1000, 42).unwrap();
        let a = run_birth_death(&model1(), &w, &cfg, &mut RngStream::new(42)).unwrap();
        let b = run_birth_death(&model1(), &w, &cfg, &mut RngStream::new(42)).unwrap();
        assert_eq!(a.points(), b.points());
        assert!(a.len() > 20);
        assert_eq!(close_pair_count(a.points(), 0.01, 0.01), 0);
        assert!(PointPattern::new(a.points().to_vec(), w).is_ok());
    }

    #[test]
    fn hardcore_site_birth_is_never_accepted() {
        let m = model1();
        let x = [StPoint::new(0.5, 0.5, 0.5)];
        let lambda = cond_intensity(&m, &StPoint::new(0.505, 0.5, 0.5), &x).unwrap();
        assert_eq!(birth_acceptance(lambda, 1.0, 1, 0.5), 0.0);
    }

    #[test]
    fn initial_state_must_be_valid() {
        let w = StWindow::unit_cube();
        let mut cfg = MhConfig::new(100, 0, 1).unwrap();
        cfg.initial = Some(
            PointPattern::new(
                vec![StPoint::new(0.5, 0.5, 0.5), StPoint::new(0.501, 0.5, 0.5)],
                w.clone(),
            )
            .unwrap(),
        );
        assert!(run_birth_death(&model1(), &w, &cfg, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn unstable_model_is_rejected() {
        let m = GibbsModel::new(
            TrendModel::homogeneous(10.0),
            vec![InteractionComponent::strauss(2.0, 0.1, 0.1)],
            Hardcore::NONE,
        )
        .unwrap();
        let cfg = MhConfig::new(100, 0, 1).unwrap();
        assert!(matches!(
            run_birth_death(&m, &StWindow::unit_cube(), &cfg, &mut RngStream::new(1)),
            Err(Error::NotLocallyStable(_))
        ));
    }
}
