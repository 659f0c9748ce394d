//! Pixel covariates for log-linear trends.
//!
//! Every raster of a stack shares one [`GridGeometry`]. Spatio-temporal
//! rasters carry one slice per time step of a [`TimeSlices`] partition.
//! Lookup is nearest-cell: a location takes the value of the pixel that
//! contains it, and `NaN` pixels are treated as undefined.

use crate::error::{Error, Result};
use crate::geometry::{StPoint, StWindow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin: (f64, f64),
    pub cell: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(origin: (f64, f64), cell: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if !(cell.0 > 0.0 && cell.1 > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::InvalidCovariates(format!(
                "grid needs positive cell sizes and dimensions, got cell {cell:?}, dims {nx}x{ny}"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::InvalidCovariates("grid origin must be finite".into()));
        }
        Ok(GridGeometry { origin, cell, nx, ny })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x_extent(&self) -> [f64; 2] {
        [self.origin.0, self.origin.0 + self.nx as f64 * self.cell.0]
    }

    pub fn y_extent(&self) -> [f64; 2] {
        [self.origin.1, self.origin.1 + self.ny as f64 * self.cell.1]
    }

    /// Row-major cell index (row 0 is the lowest `y`). Points on the far
    /// edge belong to the last row/column.
    pub fn cell_index(&self, x: f64, y: f64) -> Option<usize> {
        let i = axis_index(x, self.origin.0, self.cell.0, self.nx)?;
        let j = axis_index(y, self.origin.1, self.cell.1, self.ny)?;
        Some(j * self.nx + i)
    }
}

fn axis_index(v: f64, origin: f64, step: f64, n: usize) -> Option<usize> {
    let f = ((v - origin) / step).floor();
    if f >= 0.0 && f < n as f64 {
        Some(f as usize)
    } else if f == n as f64 && v == origin + n as f64 * step {
        Some(n - 1)
    } else {
        None
    }
}

/// Partition of the time axis into `count` steps of length `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSlices {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl TimeSlices {
    pub fn new(origin: f64, step: f64, count: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) || count == 0 || !origin.is_finite() {
            return Err(Error::InvalidCovariates(format!(
                "time slicing needs positive step and count, got step {step}, count {count}"
            )));
        }
        Ok(TimeSlices { origin, step, count })
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.origin, self.origin + self.count as f64 * self.step]
    }

    pub fn slice_index(&self, t: f64) -> Option<usize> {
        axis_index(t, self.origin, self.step, self.count)
    }

    /// Number of slices needed to cover `[t0, t1]`.
    pub fn slices_covering(origin: f64, step: f64, t: [f64; 2]) -> usize {
        ((t[1] - origin) / step).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialRaster {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalRaster {
    pub name: String,
    pub slices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateStack {
    grid: GridGeometry,
    time: Option<TimeSlices>,
    spatial: Vec<SpatialRaster>,
    spatio_temporal: Vec<SpatioTemporalRaster>,
}

impl CovariateStack {
    pub fn new(
        grid: GridGeometry,
        time: Option<TimeSlices>,
        spatial: Vec<SpatialRaster>,
        spatio_temporal: Vec<SpatioTemporalRaster>,
    ) -> Result<Self> {
        let n = grid.n_cells();
        let mut names = std::collections::HashSet::new();
        for r in &spatial {
            if r.values.len() != n {
                return Err(Error::InvalidCovariates(format!(
                    "raster `{}` has {} cells, grid has {n}",
                    r.name,
                    r.values.len()
                )));
            }
            if !names.insert(r.name.clone()) {
                return Err(Error::InvalidCovariates(format!("duplicate raster name `{}`", r.name)));
            }
        }
        if !spatio_temporal.is_empty() && time.is_none() {
            return Err(Error::InvalidCovariates(
                "spatio-temporal rasters need a time slicing".into(),
            ));
        }
        for r in &spatio_temporal {
            let count = time.map_or(0, |t| t.count);
            if r.slices.len() != count {
                return Err(Error::InvalidCovariates(format!(
                    "raster `{}` has {} time slices, expected {count}",
                    r.name,
                    r.slices.len()
                )));
            }
            for (k, s) in r.slices.iter().enumerate() {
                if s.len() != n {
                    return Err(Error::InvalidCovariates(format!(
                        "raster `{}` slice {} has {} cells, grid has {n}",
                        r.name,
                        k + 1,
                        s.len()
                    )));
                }
            }
            if !names.insert(r.name.clone()) {
                return Err(Error::InvalidCovariates(format!("duplicate raster name `{}`", r.name)));
            }
        }
        Ok(CovariateStack {
            grid,
            time,
            spatial,
            spatio_temporal,
        })
    }

    /// An empty stack (homogeneous trend).
    pub fn empty(grid: GridGeometry) -> Self {
        CovariateStack {
            grid,
            time: None,
            spatial: Vec::new(),
            spatio_temporal: Vec::new(),
        }
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn time(&self) -> Option<&TimeSlices> {
        self.time.as_ref()
    }

    pub fn spatial(&self) -> &[SpatialRaster] {
        &self.spatial
    }

    pub fn spatio_temporal(&self) -> &[SpatioTemporalRaster] {
        &self.spatio_temporal
    }

    pub fn spatial_names(&self) -> impl Iterator<Item = &str> {
        self.spatial.iter().map(|r| r.name.as_str())
    }

    pub fn spatio_temporal_names(&self) -> impl Iterator<Item = &str> {
        self.spatio_temporal.iter().map(|r| r.name.as_str())
    }

    /// Checks that the grid covers the spatial bounds and the slices cover
    /// the time interval of `window`.
    pub fn check_covers(&self, window: &StWindow) -> Result<()> {
        let (xe, ye) = (self.grid.x_extent(), self.grid.y_extent());
        let (xb, yb) = (window.x_bounds(), window.y_bounds());
        let tol = 1e-9 * (xe[1] - xe[0]).abs().max(ye[1] - ye[0]).max(1.0);
        if xe[0] > xb[0] + tol || xe[1] < xb[1] - tol || ye[0] > yb[0] + tol || ye[1] < yb[1] - tol {
            return Err(Error::InvalidCovariates(format!(
                "grid [{}, {}] x [{}, {}] does not cover the window [{}, {}] x [{}, {}]",
                xe[0], xe[1], ye[0], ye[1], xb[0], xb[1], yb[0], yb[1]
            )));
        }
        if let (Some(ts), false) = (self.time, self.spatio_temporal.is_empty()) {
            let te = ts.extent();
            let tb = window.t_bounds();
            if te[0] > tb[0] || te[1] < tb[1] {
                let needed = TimeSlices::slices_covering(ts.origin, ts.step, tb);
                return Err(Error::InvalidCovariates(format!(
                    "{} time slices cover [{}, {}] but the window spans [{}, {}] ({needed} slices needed)",
                    ts.count, te[0], te[1], tb[0], tb[1]
                )));
            }
        }
        Ok(())
    }

    fn undefined(name: &str, p: &StPoint) -> Error {
        Error::CovariateUndefined {
            name: name.to_string(),
            x: p.x,
            y: p.y,
            t: p.t,
        }
    }

    pub fn spatial_value(&self, k: usize, p: &StPoint) -> Result<f64> {
        let r = &self.spatial[k];
        let cell = self
            .grid
            .cell_index(p.x, p.y)
            .ok_or_else(|| Self::undefined(&r.name, p))?;
        let v = r.values[cell];
        if v.is_nan() {
            return Err(Self::undefined(&r.name, p));
        }
        Ok(v)
    }

    pub fn spatio_temporal_value(&self, l: usize, p: &StPoint) -> Result<f64> {
        let r = &self.spatio_temporal[l];
        let cell = self
            .grid
            .cell_index(p.x, p.y)
            .ok_or_else(|| Self::undefined(&r.name, p))?;
        let slice = self
            .time
            .and_then(|ts| ts.slice_index(p.t))
            .ok_or_else(|| Self::undefined(&r.name, p))?;
        let v = r.slices[slice][cell];
        if v.is_nan() {
            return Err(Self::undefined(&r.name, p));
        }
        Ok(v)
    }
}
