use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stgibbs_core::geometry::interpoint_distance_pairs;
use stgibbs_core::infer::fit::fitted_model;
use stgibbs_core::infer::{
    choose_hardcore, fit_regular, pareto_front, quadrature, radii_grid, select_irregular, FitOptions, IrlsOptions,
    Separation,
};
use stgibbs_core::io::{
    format_f64, format_pattern, load_model, load_pattern, model_inputs, parse_toml, to_toml, LoadedModel,
};
use stgibbs_core::simulate::simulate_replicates;
use stgibbs_core::summaries::{gpcf_for, simulation_envelope, EnvelopeSpec, GIntensity};
use stgibbs_core::{
    Bandwidths, Error, GibbsModel, Hardcore, InteractionComponent, MhConfig, PointPattern, Result, StWindow,
};

use crate::artifact::{header_lines, write_atomic, ConfigHash};
use crate::parse;
use crate::{EnvelopeArgs, FitArgs, GpcfArgs, Outcome, ParetoArgs, SelectArgs, SimulateArgs, SurfaceArgs};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes `body` to `out/name` and records it.
fn emit(out: &Path, name: &str, body: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    write_atomic(&path, body.as_bytes())?;
    artifacts.push(path);
    Ok(())
}

/// Artifact fields shared by every TOML report.
#[derive(Serialize)]
struct Stamp<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    seed: u64,
}

fn stamp<'a>(command: &'a str, hash: &'a str, seed: u64) -> Stamp<'a> {
    Stamp {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        seed,
    }
}

fn toml_report<T: Serialize>(stamp: Stamp<'_>, body: &T) -> Result<String> {
    let mut s = to_toml(&stamp)?;
    s.push('\n');
    s.push_str(&to_toml(body)?);
    Ok(s)
}

fn model_spec_text(loaded: &LoadedModel, model: &GibbsModel, command: &str, hash: &str, seed: u64) -> Result<String> {
    let spec = loaded.spec.with_model(model);
    Ok(header_lines(command, hash, seed) + &to_toml(&spec)?)
}

fn hash_model(h: &mut ConfigHash, model: &Path) -> Result<()> {
    h.files("model", &model_inputs(model)?)
}

#[derive(Deserialize)]
struct ParetoFile {
    hardcore: Hardcore,
}

fn read_hardcore(path: &Path) -> Result<Hardcore> {
    let f: ParetoFile = parse_toml(&read_text(path)?, path)?;
    Ok(f.hardcore)
}

fn with_hardcore(model: &GibbsModel, hardcore: Hardcore) -> Result<GibbsModel> {
    GibbsModel::new(model.trend().clone(), model.components().to_vec(), hardcore)
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let mut h = ConfigHash::new("simulate");
    hash_model(&mut h, &a.model)?;
    h.arg("replicates", a.replicates);
    h.arg("seed", a.seed);
    h.arg("steps", format!("{:?}", a.steps));
    h.arg("burnin", format!("{:?}", a.burnin));
    let hash = h.finish();

    let loaded = load_model(&a.model)?;
    let mut cfg = MhConfig::for_model(&loaded.model, &loaded.window, a.seed)?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(b) = a.burnin {
        cfg.burnin = b;
    }
    cfg.validate()?;
    let patterns = simulate_replicates(&loaded.model, &loaded.window, &cfg, a.replicates)?;
    let mut artifacts = Vec::new();
    for (k, p) in patterns.iter().enumerate() {
        let meta = [
            ("command", "simulate".to_string()),
            ("config_hash", hash.clone()),
            ("seed", a.seed.to_string()),
            ("replicate", (k + 1).to_string()),
        ];
        emit(
            &a.out,
            &format!("pattern_{:04}.csv", k + 1),
            &format_pattern(p, &meta),
            &mut artifacts,
        )?;
    }
    #[derive(Serialize)]
    struct Report {
        replicates: usize,
        steps: u64,
        burnin: u64,
        counts: Vec<usize>,
    }
    let report = Report {
        replicates: a.replicates,
        steps: cfg.steps,
        burnin: cfg.burnin,
        counts: patterns.iter().map(PointPattern::len).collect(),
    };
    emit(
        &a.out,
        "simulate.toml",
        &toml_report(stamp("simulate", &hash, a.seed), &report)?,
        &mut artifacts,
    )?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}

pub fn pareto(a: &ParetoArgs) -> Result<Outcome> {
    let policy = parse::policy(&a.policy)?;
    let mut h = ConfigHash::new("pareto");
    hash_model(&mut h, &a.model)?;
    h.file("data", &a.data)?;
    h.arg("policy", format!("{policy:?}"));
    let hash = h.finish();

    let loaded = load_model(&a.model)?;
    let data = load_pattern(&a.data, &loaded.window)?;
    let pairs = interpoint_distance_pairs(data.points(), f64::INFINITY, f64::INFINITY);
    let front = pareto_front(&pairs);
    let hardcore = choose_hardcore(&front, policy)?;

    let mut artifacts = Vec::new();
    let mut csv = header_lines("pareto", &hash, 0);
    csv.push_str("ds,dt,i,j\n");
    for p in &front.points {
        let _ = writeln!(csv, "{},{},{},{}", format_f64(p.ds), format_f64(p.dt), p.i + 1, p.j + 1);
    }
    emit(&a.out, "pareto.csv", &csv, &mut artifacts)?;
    #[derive(Serialize)]
    struct Report {
        policy: String,
        n_points: usize,
        n_pairs: usize,
        front_size: usize,
        dominated_count: usize,
        hardcore: Hardcore,
    }
    let report = Report {
        policy: a.policy.trim().to_string(),
        n_points: data.len(),
        n_pairs: pairs.len(),
        front_size: front.points.len(),
        dominated_count: front.dominated_count,
        hardcore,
    };
    emit(
        &a.out,
        "pareto.toml",
        &toml_report(stamp("pareto", &hash, 0), &report)?,
        &mut artifacts,
    )?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}

#[derive(Serialize)]
struct CoefficientRow {
    name: String,
    estimate: f64,
    std_error: f64,
    z: f64,
    p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    c_factor: f64,
    n_data: usize,
    n_dummies: usize,
    converged: bool,
    iterations: usize,
    log_lik: f64,
    aic: f64,
    score_max: f64,
    log_lik_trace: Vec<f64>,
    hardcore: Hardcore,
    coefficient: Vec<CoefficientRow>,
    separation: Vec<Separation>,
}

pub fn fit(a: &FitArgs) -> Result<Outcome> {
    let mut h = ConfigHash::new("fit");
    hash_model(&mut h, &a.model)?;
    h.file("data", &a.data)?;
    if let Some(p) = &a.hardcore_from {
        h.file("hardcore_from", p)?;
    }
    h.arg("c_factor", a.c_factor);
    h.arg("seed", a.seed);
    let hash = h.finish();

    let loaded = load_model(&a.model)?;
    let mut structure = loaded.model.clone();
    if let Some(p) = &a.hardcore_from {
        structure = with_hardcore(&structure, read_hardcore(p)?)?;
    }
    let data = load_pattern(&a.data, &loaded.window)?;
    let opts = FitOptions {
        c_factor: a.c_factor,
        seed: a.seed,
        irls: IrlsOptions::default(),
    };
    let fitted = fit_regular(&data, &structure, &opts)?;
    let f = &fitted.fit;
    let coefficient = (0..f.n_parameters())
        .map(|k| CoefficientRow {
            name: f.names[k].clone(),
            estimate: f.coefficients[k],
            std_error: f.std_errors[k],
            z: f.z_values[k],
            p_value: f.p_values[k],
            gamma: (k >= f.n_trend).then(|| f.coefficients[k].exp()),
        })
        .collect();
    let report = FitReport {
        c_factor: a.c_factor,
        n_data: fitted.n_data,
        n_dummies: fitted.n_dummies,
        converged: f.converged,
        iterations: f.iterations,
        log_lik: f.log_lik,
        aic: f.aic,
        score_max: f.score_max,
        log_lik_trace: f.log_lik_trace.clone(),
        hardcore: structure.hardcore(),
        coefficient,
        separation: f.separation.clone(),
    };
    let mut artifacts = Vec::new();
    emit(
        &a.out,
        "fit.toml",
        &toml_report(stamp("fit", &hash, a.seed), &report)?,
        &mut artifacts,
    )?;
    let spec = model_spec_text(&loaded, &fitted.model, "fit", &hash, a.seed)?;
    emit(&a.out, "fitted_model.toml", &spec, &mut artifacts)?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}

/// Candidate radii: an explicit list and/or a per-component grid.
///
/// ```toml
/// [[candidate]]
/// r = [0.05, 0.1]
/// q = [0.05, 0.1]
///
/// [grid]
/// r = [[0.02, 0.05], [0.1, 0.15]]
/// q = [[0.02, 0.05], [0.1, 0.15]]
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidatesFile {
    #[serde(default)]
    candidate: Vec<CandidateSpec>,
    grid: Option<GridSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateSpec {
    r: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    r: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

fn load_candidates(path: &Path) -> Result<Vec<Vec<InteractionComponent>>> {
    let f: CandidatesFile = parse_toml(&read_text(path)?, path)?;
    let mut out = Vec::new();
    for (k, c) in f.candidate.iter().enumerate() {
        if c.r.len() != c.q.len() {
            return Err(Error::InvalidConfig(format!(
                "{}: candidate {} has {} radii and {} durations",
                path.display(),
                k + 1,
                c.r.len(),
                c.q.len()
            )));
        }
        out.push(
            c.r.iter()
                .zip(&c.q)
                .map(|(&r, &q)| InteractionComponent::strauss(1.0, r, q))
                .collect(),
        );
    }
    if let Some(g) = &f.grid {
        if g.r.len() != g.q.len() {
            return Err(Error::InvalidConfig(format!(
                "{}: grid has {} radius lists and {} duration lists",
                path.display(),
                g.r.len(),
                g.q.len()
            )));
        }
        out.extend(radii_grid(&g.r, &g.q));
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("{}: no candidates", path.display())));
    }
    Ok(out)
}

pub fn select(a: &SelectArgs) -> Result<Outcome> {
    let mut h = ConfigHash::new("select");
    hash_model(&mut h, &a.model)?;
    h.file("data", &a.data)?;
    h.file("candidates", &a.candidates)?;
    if let Some(p) = &a.hardcore_from {
        h.file("hardcore_from", p)?;
    }
    h.arg("c_factor", a.c_factor);
    h.arg("seed", a.seed);
    let hash = h.finish();

    let loaded = load_model(&a.model)?;
    let hardcore = match &a.hardcore_from {
        Some(p) => read_hardcore(p)?,
        None => loaded.model.hardcore(),
    };
    let candidates = load_candidates(&a.candidates)?;
    let data = load_pattern(&a.data, &loaded.window)?;
    let trend = loaded.model.trend().clone();
    let base = GibbsModel::new(trend.clone(), vec![], hardcore)?;
    let opts = FitOptions {
        c_factor: a.c_factor,
        seed: a.seed,
        irls: IrlsOptions::default(),
    };
    let quad = quadrature(&data, &base, &opts)?;
    let sel = select_irregular(&data, &trend, hardcore, &candidates, &quad, &opts.irls)?;

    #[derive(Serialize)]
    struct Row {
        rank: usize,
        index: usize,
        r: Vec<f64>,
        q: Vec<f64>,
        aic: f64,
        log_lik: f64,
        converged: bool,
        gamma: Vec<f64>,
    }
    #[derive(Serialize)]
    struct Skipped {
        index: usize,
        reason: String,
    }
    #[derive(Serialize)]
    struct Report {
        c_factor: f64,
        n_candidates: usize,
        n_dummies: usize,
        hardcore: Hardcore,
        ranked: Vec<Row>,
        skipped: Vec<Skipped>,
    }
    let report = Report {
        c_factor: a.c_factor,
        n_candidates: candidates.len(),
        n_dummies: quad.dummies.len(),
        hardcore,
        ranked: sel
            .ranked
            .iter()
            .enumerate()
            .map(|(k, r)| Row {
                rank: k + 1,
                index: r.index + 1,
                r: r.components.iter().map(|c| c.r).collect(),
                q: r.components.iter().map(|c| c.q).collect(),
                aic: r.fit.aic,
                log_lik: r.fit.log_lik,
                converged: r.fit.converged,
                gamma: r.fit.gammas(),
            })
            .collect(),
        skipped: sel
            .skipped
            .iter()
            .map(|s| Skipped {
                index: s.index + 1,
                reason: s.reason.clone(),
            })
            .collect(),
    };
    let best = sel.best();
    let structure = GibbsModel::new(trend, best.components.clone(), hardcore)?;
    let model = fitted_model(&structure, &best.fit)?;
    let mut artifacts = Vec::new();
    emit(
        &a.out,
        "select.toml",
        &toml_report(stamp("select", &hash, a.seed), &report)?,
        &mut artifacts,
    )?;
    emit(
        &a.out,
        "best_model.toml",
        &model_spec_text(&loaded, &model, "select", &hash, a.seed)?,
        &mut artifacts,
    )?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}

struct Surface {
    u: Vec<f64>,
    v: Vec<f64>,
    bandwidths: Option<Bandwidths>,
    intensity: GIntensity,
}

fn surface(s: &SurfaceArgs, window: &StWindow) -> Result<Surface> {
    let (du, dv) = parse::default_grids(window);
    Ok(Surface {
        u: s.u
            .as_deref()
            .map(|g| parse::lag_grid(g, "u"))
            .transpose()?
            .unwrap_or(du),
        v: s.v
            .as_deref()
            .map(|g| parse::lag_grid(g, "v"))
            .transpose()?
            .unwrap_or(dv),
        bandwidths: s.bandwidths.as_deref().map(parse::bandwidths).transpose()?,
        intensity: s.intensity.into(),
    })
}

fn hash_surface(h: &mut ConfigHash, s: &SurfaceArgs) {
    h.arg("u", format!("{:?}", s.u));
    h.arg("v", format!("{:?}", s.v));
    h.arg("bandwidths", format!("{:?}", s.bandwidths));
    h.arg("intensity", format!("{:?}", s.intensity));
}

fn intensity_name(i: GIntensity) -> &'static str {
    match i {
        GIntensity::Trend => "trend",
        GIntensity::Homogeneous => "homogeneous",
        GIntensity::LeaveOneOut => "leave-one-out",
    }
}

pub fn gpcf(a: &GpcfArgs) -> Result<Outcome> {
    let mut h = ConfigHash::new("gpcf");
    hash_model(&mut h, &a.model)?;
    h.file("data", &a.data)?;
    hash_surface(&mut h, &a.surface);
    let hash = h.finish();

    let loaded = load_model(&a.model)?;
    let data = load_pattern(&a.data, &loaded.window)?;
    let s = surface(&a.surface, &loaded.window)?;
    let bw = match s.bandwidths {
        Some(b) => b,
        None => Bandwidths::silverman(&data, *s.u.last().unwrap_or(&0.0), *s.v.last().unwrap_or(&0.0))?,
    };
    let g = gpcf_for(&data, &loaded.model, s.intensity, &s.u, &s.v, bw)?;
    let mut csv = header_lines("gpcf", &hash, 0);
    let _ = writeln!(csv, "# bandwidth_spatial={}", format_f64(bw.spatial));
    let _ = writeln!(csv, "# bandwidth_temporal={}", format_f64(bw.temporal));
    let _ = writeln!(csv, "# intensity={}", intensity_name(s.intensity));
    csv.push_str("u,v,g\n");
    for (iu, u) in g.u_grid.iter().enumerate() {
        for (iv, v) in g.v_grid.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                format_f64(*u),
                format_f64(*v),
                format_f64(g.get(iu, iv))
            );
        }
    }
    let mut artifacts = Vec::new();
    emit(&a.out, "gpcf.csv", &csv, &mut artifacts)?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}

pub fn envelope(a: &EnvelopeArgs) -> Result<Outcome> {
    let mut h = ConfigHash::new("envelope");
    hash_model(&mut h, &a.model)?;
    h.file("data", &a.data)?;
    hash_surface(&mut h, &a.surface);
    h.arg("nsim", a.nsim);
    h.arg("level", a.level);
    h.arg("steps", format!("{:?}", a.steps));
    h.arg("burnin", format!("{:?}", a.burnin));
    h.arg("seed", a.seed);
    let hash = h.finish();

    let loaded = load_model(&a.model)?;
    let data = load_pattern(&a.data, &loaded.window)?;
    let s = surface(&a.surface, &loaded.window)?;
    let chain = match (a.steps, a.burnin) {
        (None, None) => None,
        (steps, burnin) => {
            let d = MhConfig::for_model(&loaded.model, &loaded.window, a.seed)?;
            Some((steps.unwrap_or(d.steps), burnin.unwrap_or(d.burnin)))
        }
    };
    let spec = EnvelopeSpec {
        u_grid: s.u,
        v_grid: s.v,
        bandwidths: s.bandwidths,
        intensity: s.intensity,
        n_sim: a.nsim,
        level: a.level,
        seed: a.seed,
        chain,
    };
    let env = simulation_envelope(&data, &loaded.model, &spec)?;
    let g = &env.observed;
    let mut csv = header_lines("envelope", &hash, a.seed);
    csv.push_str("u,v,g_obs,lower,upper,global_lower,global_upper,outside\n");
    let nv = g.v_grid.len();
    for (iu, u) in g.u_grid.iter().enumerate() {
        for (iv, v) in g.v_grid.iter().enumerate() {
            let k = iu * nv + iv;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                format_f64(*u),
                format_f64(*v),
                format_f64(g.values[k]),
                format_f64(env.lower[k]),
                format_f64(env.upper[k]),
                format_f64(env.global_lower[k]),
                format_f64(env.global_upper[k]),
                u8::from(env.significant[k])
            );
        }
    }
    #[derive(Serialize)]
    struct Report {
        n_sim: usize,
        level: f64,
        p_erl: f64,
        n_outside: usize,
        n_cells: usize,
        intensity: &'static str,
        bandwidth_spatial: f64,
        bandwidth_temporal: f64,
        u: Vec<f64>,
        v: Vec<f64>,
    }
    let report = Report {
        n_sim: env.n_sim,
        level: env.level,
        p_erl: env.p_erl,
        n_outside: env.n_significant(),
        n_cells: g.values.len(),
        intensity: intensity_name(spec.intensity),
        bandwidth_spatial: g.bandwidths.spatial,
        bandwidth_temporal: g.bandwidths.temporal,
        u: g.u_grid.clone(),
        v: g.v_grid.clone(),
    };
    let mut artifacts = Vec::new();
    emit(&a.out, "envelope.csv", &csv, &mut artifacts)?;
    emit(
        &a.out,
        "envelope.toml",
        &toml_report(stamp("envelope", &hash, a.seed), &report)?,
        &mut artifacts,
    )?;
    Ok(Outcome {
        config_hash: hash,
        artifacts,
    })
}
