//! A synthetic wildfire-like dataset: a 400 x 400 window observed over 48
//! monthly slices, a 100 x 100 grid of 4 x 4 cells, four spatial and two
//! spatio-temporal covariates, and a clustered hybrid Strauss hardcore
//! pattern of a few hundred events.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use serde::Serialize;
use stgibbs_core::io::InteractionSpec;
use stgibbs_core::io::{
    format_pattern, format_raster, load_model, to_toml, GridSpec, Manifest, ModelSpec, SpatialEntry,
    SpatioTemporalEntry, TimeSpec, TrendSpec, WindowSpec,
};
use stgibbs_core::simulate::run_birth_death;
use stgibbs_core::{Hardcore, MhConfig, PointPattern, Result, RngStream};

use crate::artifact::{header_lines, write_atomic, ConfigHash};
use crate::{Outcome, SynthArgs};

const NX: usize = 100;
const NY: usize = 100;
const CELL: f64 = 4.0;
const SLICES: usize = 48;
const SPATIAL: [&str; 4] = ["elevation", "slope", "forest", "urban"];
const SPATIAL_BETA: [f64; 4] = [-0.4, 0.3, 0.6, -0.5];
const SPATIO_TEMPORAL: [&str; 2] = ["temperature", "precipitation"];
const SPATIO_TEMPORAL_BETA: [f64; 2] = [0.7, -0.4];

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
        .sqrt()
        .max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

/// Sum of random Gaussian bumps at the cell centres, standardized.
fn smooth_field(rng: &mut RngStream) -> Vec<f64> {
    let side = NX as f64 * CELL;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.random::<f64>() * side,
                rng.random::<f64>() * side,
                30.0 + 90.0 * rng.random::<f64>(),
                2.0 * rng.random::<f64>() - 1.0,
            )
        })
        .collect();
    let mut v = Vec::with_capacity(NX * NY);
    for j in 0..NY {
        for i in 0..NX {
            let (x, y) = ((i as f64 + 0.5) * CELL, (j as f64 + 0.5) * CELL);
            v.push(
                bumps
                    .iter()
                    .map(|&(cx, cy, w, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp())
                    .sum(),
            );
        }
    }
    standardize(&mut v);
    v
}

/// Seasonal cycle plus a fixed spatial pattern, one raster per slice.
fn seasonal_field(rng: &mut RngStream, phase: f64, amplitude: f64) -> Vec<Vec<f64>> {
    let base = smooth_field(rng);
    let drift = smooth_field(rng);
    (0..SLICES)
        .map(|k| {
            let season = amplitude * (2.0 * PI * (k as f64 + 0.5 - phase) / 12.0).cos();
            let progress = k as f64 / (SLICES - 1) as f64;
            base.iter()
                .zip(&drift)
                .map(|(b, d)| season + 0.5 * b + 0.3 * progress * d)
                .collect()
        })
        .collect()
}

pub fn run(a: &SynthArgs) -> Result<Outcome> {
    let mut h = ConfigHash::new("synth");
    h.arg("seed", a.seed);
    h.arg("points", a.points);
    let hash = h.finish();
    let out = &a.out;
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let emit = |name: &str, body: String, artifacts: &mut Vec<PathBuf>| -> Result<()> {
        let p = out.join(name);
        write_atomic(&p, body.as_bytes())?;
        artifacts.push(p);
        Ok(())
    };

    let mut rng = RngStream::new(a.seed);
    let spatial: Vec<Vec<f64>> = SPATIAL.iter().map(|_| smooth_field(&mut rng)).collect();
    let st = [seasonal_field(&mut rng, 7.0, 1.2), seasonal_field(&mut rng, 1.0, 0.9)];
    for (name, v) in SPATIAL.iter().zip(&spatial) {
        emit(&format!("covariates/{name}.csv"), format_raster(v, NX), &mut artifacts)?;
    }
    for (name, slices) in SPATIO_TEMPORAL.iter().zip(&st) {
        for (k, v) in slices.iter().enumerate() {
            emit(
                &format!("covariates/{name}_{}.csv", k + 1),
                format_raster(v, NX),
                &mut artifacts,
            )?;
        }
    }
    let manifest = Manifest {
        grid: GridSpec {
            origin: [0.0, 0.0],
            cell: [CELL, CELL],
            nx: NX,
            ny: NY,
        },
        time: Some(TimeSpec {
            origin: 0.0,
            step: 1.0,
            count: SLICES,
        }),
        spatial: SPATIAL
            .iter()
            .map(|n| SpatialEntry {
                name: n.to_string(),
                file: format!("{n}.csv").into(),
            })
            .collect(),
        spatio_temporal: SPATIO_TEMPORAL
            .iter()
            .map(|n| SpatioTemporalEntry {
                name: n.to_string(),
                files: vec![],
                pattern: Some(format!("{n}_{{slice}}.csv")),
            })
            .collect(),
    };
    emit(
        "covariates/manifest.toml",
        header_lines("synth", &hash, a.seed) + &to_toml(&manifest)?,
        &mut artifacts,
    )?;

    // Intercept giving `points` expected events under the trend alone.
    let mut mean_rate = 0.0;
    #[allow(clippy::needless_range_loop)]
    for k in 0..SLICES {
        for c in 0..NX * NY {
            let eta: f64 = (0..4).map(|s| SPATIAL_BETA[s] * spatial[s][c]).sum::<f64>()
                + (0..2).map(|l| SPATIO_TEMPORAL_BETA[l] * st[l][k][c]).sum::<f64>();
            mean_rate += eta.exp();
        }
    }
    mean_rate /= (SLICES * NX * NY) as f64;
    let side = NX as f64 * CELL;
    let volume = side * side * SLICES as f64;
    let mut beta0 = (a.points as f64 / (volume * mean_rate)).ln();

    let window = WindowSpec {
        x: [0.0, side],
        y: [0.0, side],
        t: [0.0, SLICES as f64],
        mask: None,
    };
    let spec = |beta0: f64| ModelSpec {
        window: window.clone(),
        trend: TrendSpec {
            beta0: Some(beta0),
            spatial: Some(SPATIAL_BETA.to_vec()),
            spatio_temporal: Some(SPATIO_TEMPORAL_BETA.to_vec()),
            covariates: Some("covariates/manifest.toml".into()),
            ..TrendSpec::default()
        },
        hardcore: Some(Hardcore::new(1.0, 0.1)),
        interactions: vec![
            InteractionSpec {
                gamma: 1.6,
                r: 10.0,
                q: 2.0,
                saturation: None,
            },
            InteractionSpec {
                gamma: 0.8,
                r: 25.0,
                q: 4.0,
                saturation: None,
            },
        ],
    };

    // Simulate, then rescale the intercept once so the clustered pattern
    // lands near the target count.
    let model_path = out.join("model.toml");
    let mut data: Option<PointPattern> = None;
    for _ in 0..2 {
        if let Some(d) = &data {
            beta0 += (a.points as f64 / d.len().max(1) as f64).ln();
        }
        write_atomic(
            &model_path,
            (header_lines("synth", &hash, a.seed) + &to_toml(&spec(beta0))?).as_bytes(),
        )?;
        let loaded = load_model(&model_path)?;
        let cfg = MhConfig::for_model(&loaded.model, &loaded.window, a.seed)?;
        let d = run_birth_death(
            &loaded.model,
            &loaded.window,
            &cfg,
            &mut RngStream::substream(a.seed, 1),
        )?;
        log::info!("synthetic pattern with beta0 = {beta0}: {} events", d.len());
        data = Some(d);
    }
    artifacts.push(model_path);
    let data = data.expect("simulated at least once");
    let meta = [
        ("command", "synth".to_string()),
        ("config_hash", hash.clone()),
        ("seed", a.seed.to_string()),
    ];
    emit("data.csv", format_pattern(&data, &meta), &mut artifacts)?;

    let structure = ModelSpec {
        window,
        trend: TrendSpec {
            covariates: Some("covariates/manifest.toml".into()),
            ..TrendSpec::default()
        },
        hardcore: None,
        interactions: vec![],
    };
    emit(
        "structure.toml",
        header_lines("synth", &hash, a.seed) + &to_toml(&structure)?,
        &mut artifacts,
    )?;
    let candidates = "\
[grid]
r = [[5.0, 10.0, 15.0], [20.0, 25.0, 35.0]]
q = [[1.0, 2.0, 3.0], [3.0, 4.0, 6.0]]
";
    emit(
        "candidates.toml",
        header_lines("synth", &hash, a.seed) + candidates,
        &mut artifacts,
    )?;

    #[derive(Serialize)]
    struct Report<'a> {
        command: &'a str,
        config_hash: &'a str,
        seed: u64,
        n_events: usize,
        target_events: usize,
        beta0: f64,
        grid: [usize; 2],
        cell: f64,
        slices: usize,
        spatial_covariates: Vec<&'a str>,
        spatio_temporal_covariates: Vec<&'a str>,
    }
    let report = Report {
        command: "synth",
        config_hash: &hash,
        seed: a.seed,
        n_events: data.len(),
        target_events: a.points,
        beta0,
        grid: [NX, NY],
        cell: CELL,
        slices: SLICES,
        spatial_covariates: SPATIAL.to_vec(),
        spatio_temporal_covariates: SPATIO_TEMPORAL.to_vec(),
    };
    emit("synth.toml", to_toml(&report)?, &mut artifacts)?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}
