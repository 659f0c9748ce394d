//! Text formats.
//!
//! * Patterns: comma-separated `x,y,t` with a header line. Lines starting
//!   with `#` are comments; writers put `key=value` metadata there. Numbers
//!   are written with 17 significant digits so doubles round-trip exactly.
//! * Rasters: `ny` lines of `nx` comma-separated values, first line at the
//!   lowest `y`. `NA` or `nan` marks an undefined cell.
//! * Model specs and covariate manifests: TOML, with relative file paths
//!   resolved against the directory of the TOML file.
//!
//! A model spec:
//!
//! ```toml
//! [window]
//! x = [0.0, 1.0]
//! y = [0.0, 1.0]
//! t = [0.0, 1.0]
//!
//! [trend]
//! rate = 70.0            # or beta0 / spatial / spatio_temporal / alpha
//! # covariates = "covariates.toml"
//!
//! [hardcore]
//! hs = 0.01
//! ht = 0.01
//!
//! [[interaction]]
//! gamma = 0.8
//! r = 0.05
//! q = 0.05
//! ```
//!
//! A covariate manifest:
//!
//! ```toml
//! [grid]
//! origin = [0.0, 0.0]
//! cell = [4.0, 4.0]
//! nx = 100
//! ny = 100
//!
//! [time]
//! origin = 0.0
//! step = 1.0
//! count = 48
//!
//! [[spatial]]
//! name = "elevation"
//! file = "elevation.csv"
//!
//! [[spatio_temporal]]
//! name = "temperature"
//! pattern = "temperature_{slice}.csv"   # or files = [...]; slices count from 1
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateStack, GridGeometry, SpatialRaster, SpatioTemporalRaster, TimeSlices};
use crate::error::{Error, Result};
use crate::geometry::{PointPattern, SpatialMask, StPoint, StWindow};
use crate::model::{GibbsModel, Hardcore, InteractionComponent, TrendModel};

/// Formats `v` with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Parses pattern text. `path` is only used in error messages.
pub fn parse_pattern(text: &str, path: &Path, window: &StWindow) -> Result<PointPattern> {
    let mut points = Vec::new();
    let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
    let mut header_seen = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = s.split(',').map(str::trim).collect();
            if cols != ["x", "y", "t"] {
                return Err(parse_error(path, line, format!("expected header `x,y,t`, found `{s}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_error(
                path,
                line,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let mut v = [0.0f64; 3];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| parse_error(path, line, format!("`{f}` is not a number")))?;
            if !slot.is_finite() {
                return Err(parse_error(path, line, format!("`{f}` is not finite")));
            }
        }
        let p = StPoint::new(v[0], v[1], v[2]);
        if !window.contains(&p) {
            return Err(parse_error(
                path,
                line,
                format!("point ({}, {}, {}) lies outside the window", p.x, p.y, p.t),
            ));
        }
        // -0.0 and 0.0 are the same location.
        let key = v.map(|c| (c + 0.0).to_bits());
        if let Some(&first_line) = seen.get(&key) {
            return Err(Error::DuplicateRow {
                path: path.to_path_buf(),
                line,
                first_line,
            });
        }
        seen.insert(key, line);
        points.push(p);
    }
    if !header_seen {
        return Err(parse_error(path, 1, "missing header `x,y,t`"));
    }
    PointPattern::new(points, window.clone())
}

pub fn load_pattern(path: &Path, window: &StWindow) -> Result<PointPattern> {
    parse_pattern(&read(path)?, path, window)
}

/// Pattern text with `# key=value` lines for `meta`.
pub fn format_pattern(pattern: &PointPattern, meta: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(64 * (pattern.len() + 2));
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str("x,y,t\n");
    for p in pattern.points() {
        let _ = writeln!(out, "{},{},{}", format_f64(p.x), format_f64(p.y), format_f64(p.t));
    }
    out
}

/// `# key=value` comment lines of a pattern or grid file.
pub fn read_metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

pub fn parse_raster(text: &str, path: &Path, nx: usize, ny: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    for (k, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let line = k + 1;
        rows += 1;
        if rows > ny {
            return Err(parse_error(path, line, format!("more than {ny} rows")));
        }
        let before = values.len();
        for f in s.split(',').map(str::trim) {
            let v = if f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                f.parse()
                    .map_err(|_| parse_error(path, line, format!("`{f}` is not a number")))?
            };
            values.push(v);
        }
        if values.len() - before != nx {
            return Err(parse_error(
                path,
                line,
                format!("expected {nx} values, found {}", values.len() - before),
            ));
        }
    }
    if rows != ny {
        return Err(parse_error(
            path,
            rows.max(1),
            format!("expected {ny} rows, found {rows}"),
        ));
    }
    Ok(values)
}

pub fn load_raster(path: &Path, nx: usize, ny: usize) -> Result<Vec<f64>> {
    parse_raster(&read(path)?, path, nx, ny)
}

pub fn format_raster(values: &[f64], nx: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(nx) {
        let cells: Vec<String> = row
            .iter()
            .map(|&v| if v.is_nan() { "NA".into() } else { format_f64(v) })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map_or(1, |s| text[..s.start.min(text.len())].lines().count().max(1));
        Error::InvalidConfig(format!("{}:{line}: {}", path.display(), e.message()))
    })
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::InvalidConfig(format!("cannot serialise: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub cell: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialEntry {
    pub name: String,
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatioTemporalEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<PathBuf>,
    /// File name with `{slice}` standing for the 1-based slice number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spatial: Vec<SpatialEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spatio_temporal: Vec<SpatioTemporalEntry>,
}

impl SpatioTemporalEntry {
    fn slice_files(&self, count: usize) -> Result<Vec<PathBuf>> {
        match (&self.pattern, self.files.is_empty()) {
            (Some(p), true) => Ok((1..=count)
                .map(|k| PathBuf::from(p.replace("{slice}", &k.to_string())))
                .collect()),
            (None, false) => {
                if self.files.len() < count {
                    return Err(Error::InvalidCovariates(format!(
                        "spatio-temporal covariate `{}` is missing time slice {} of {count}",
                        self.name,
                        self.files.len() + 1
                    )));
                }
                if self.files.len() > count {
                    return Err(Error::InvalidCovariates(format!(
                        "spatio-temporal covariate `{}` lists {} slices, the time axis has {count}",
                        self.name,
                        self.files.len()
                    )));
                }
                Ok(self.files.clone())
            }
            _ => Err(Error::InvalidCovariates(format!(
                "spatio-temporal covariate `{}` needs exactly one of `files` or `pattern`",
                self.name
            ))),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<CovariateStack> {
    let m: Manifest = parse_toml(&read(path)?, path)?;
    let g = &m.grid;
    let grid = GridGeometry::new((g.origin[0], g.origin[1]), (g.cell[0], g.cell[1]), g.nx, g.ny)?;
    let time = m
        .time
        .as_ref()
        .map(|t| TimeSlices::new(t.origin, t.step, t.count))
        .transpose()?;
    let spatial = m
        .spatial
        .iter()
        .map(|e| {
            Ok(SpatialRaster {
                name: e.name.clone(),
                values: load_raster(&resolve(path, &e.file), g.nx, g.ny)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spatio_temporal = Vec::new();
    for e in &m.spatio_temporal {
        let count = time
            .ok_or_else(|| Error::InvalidCovariates(format!("covariate `{}` needs a [time] section", e.name)))?
            .count;
        let mut slices = Vec::with_capacity(count);
        for (k, f) in e.slice_files(count)?.iter().enumerate() {
            let full = resolve(path, f);
            if !full.exists() {
                return Err(Error::InvalidCovariates(format!(
                    "spatio-temporal covariate `{}` is missing time slice {} ({})",
                    e.name,
                    k + 1,
                    full.display()
                )));
            }
            slices.push(load_raster(&full, g.nx, g.ny)?);
        }
        spatio_temporal.push(SpatioTemporalRaster {
            name: e.name.clone(),
            slices,
        });
    }
    CovariateStack::new(grid, time, spatial, spatio_temporal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub origin: [f64; 2],
    pub cell: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Raster of 0/1 (or NA for outside).
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub t: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSpec {
    /// Homogeneous rate; shorthand for `beta0 = ln(rate)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatio_temporal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Include the linear time term even when `alpha` is not given.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub time_trend: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    #[serde(default = "one")]
    pub gamma: f64,
    pub r: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<u32>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub window: WindowSpec,
    #[serde(default)]
    pub trend: TrendSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardcore: Option<Hardcore>,
    #[serde(default, rename = "interaction", skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<InteractionSpec>,
}

impl From<InteractionSpec> for InteractionComponent {
    fn from(s: InteractionSpec) -> Self {
        InteractionComponent {
            gamma: s.gamma,
            r: s.r,
            q: s.q,
            saturation: s.saturation,
        }
    }
}

impl From<&InteractionComponent> for InteractionSpec {
    fn from(c: &InteractionComponent) -> Self {
        InteractionSpec {
            gamma: c.gamma,
            r: c.r,
            q: c.q,
            saturation: c.saturation,
        }
    }
}

/// A model spec turned into library objects.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: GibbsModel,
    pub window: StWindow,
    /// As read, with relative paths made absolute.
    pub spec: ModelSpec,
}

impl ModelSpec {
    /// Builds window and model; `path` anchors relative file names.
    pub fn build(&self, path: &Path) -> Result<LoadedModel> {
        let mut spec = self.clone();
        let w = &self.window;
        let mut window = StWindow::new(w.x, w.y, w.t)?;
        if let Some(m) = &w.mask {
            let file = resolve(path, &m.file);
            let cells = load_raster(&file, m.nx, m.ny)?
                .into_iter()
                .map(|v| v.is_finite() && v != 0.0)
                .collect();
            let mask = SpatialMask::new((m.origin[0], m.origin[1]), (m.cell[0], m.cell[1]), m.nx, m.ny, cells)?;
            window = window.with_mask(mask)?;
            spec.window.mask.as_mut().unwrap().file = absolute(&file);
        }
        let t = &self.trend;
        let trend = match &t.covariates {
            None => {
                if t.spatial.as_ref().is_some_and(|v| !v.is_empty())
                    || t.spatio_temporal.as_ref().is_some_and(|v| !v.is_empty())
                {
                    return Err(Error::InvalidConfig(
                        "covariate coefficients given without `covariates`".into(),
                    ));
                }
                let beta0 = match (t.rate, t.beta0) {
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidConfig("give either `rate` or `beta0`, not both".into()))
                    }
                    (Some(r), None) if r > 0.0 => r.ln(),
                    (Some(r), None) => return Err(Error::InvalidConfig(format!("rate must be positive, got {r}"))),
                    (None, b) => b.unwrap_or(0.0),
                };
                let alpha = t.alpha.or(t.time_trend.then_some(0.0));
                TrendModel::new(beta0, None, vec![], vec![], alpha)?
            }
            Some(manifest) => {
                let file = resolve(path, manifest);
                let stack = load_manifest(&file)?;
                stack.check_covers(&window)?;
                spec.trend.covariates = Some(absolute(&file));
                let ns = stack.spatial().len();
                let nst = stack.spatio_temporal().len();
                let bs = t.spatial.clone().unwrap_or_else(|| vec![0.0; ns]);
                let bst = t.spatio_temporal.clone().unwrap_or_else(|| vec![0.0; nst]);
                let beta0 = match (t.rate, t.beta0) {
                    (Some(r), None) if r > 0.0 => r.ln(),
                    (None, b) => b.unwrap_or(0.0),
                    _ => {
                        return Err(Error::InvalidConfig(
                            "give a positive `rate` or `beta0`, not both".into(),
                        ))
                    }
                };
                let alpha = t.alpha.or(t.time_trend.then_some(0.0));
                TrendModel::new(beta0, Some(Arc::new(stack)), bs, bst, alpha)?
            }
        };
        let comps = self.interactions.iter().map(|&c| c.into()).collect();
        let model = GibbsModel::new(trend, comps, self.hardcore.unwrap_or(Hardcore::NONE))?;
        Ok(LoadedModel { model, window, spec })
    }

    /// The spec of `model` on this spec's window and covariates.
    pub fn with_model(&self, model: &GibbsModel) -> ModelSpec {
        let trend = model.trend();
        let has_cov = self.trend.covariates.is_some();
        ModelSpec {
            window: self.window.clone(),
            trend: TrendSpec {
                rate: None,
                beta0: Some(trend.beta0()),
                spatial: has_cov.then(|| trend.beta_spatial().to_vec()),
                spatio_temporal: has_cov.then(|| trend.beta_spatio_temporal().to_vec()),
                alpha: trend.alpha(),
                time_trend: false,
                covariates: self.trend.covariates.clone(),
            },
            hardcore: model.hardcore().is_active().then(|| model.hardcore()),
            interactions: model.components().iter().map(InteractionSpec::from).collect(),
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn parse_model_spec(text: &str, path: &Path) -> Result<ModelSpec> {
    parse_toml(text, path)
}

/// Every file a model spec reads: the spec itself, its mask raster, and its
/// covariate manifest with all rasters the manifest names.
pub fn model_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    let spec = parse_model_spec(&read(path)?, path)?;
    let mut out = vec![path.to_path_buf()];
    if let Some(m) = &spec.window.mask {
        out.push(resolve(path, &m.file));
    }
    if let Some(c) = &spec.trend.covariates {
        let manifest = resolve(path, c);
        let m: Manifest = parse_toml(&read(&manifest)?, &manifest)?;
        for e in &m.spatial {
            out.push(resolve(&manifest, &e.file));
        }
        let count = m.time.as_ref().map_or(0, |t| t.count);
        for e in &m.spatio_temporal {
            for f in e.slice_files(count)? {
                out.push(resolve(&manifest, &f));
            }
        }
        out.insert(1, manifest);
    }
    Ok(out)
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    parse_model_spec(&read(path)?, path)?.build(path)
}
