//! Inhomogeneous spatio-temporal pair correlation function.
//!
//! For spatial lag `u > 0` and temporal lag `v`:
//!
//! ```text
//! g(u, v) = 1 / (4 pi u) * sum_{i != j} k_es(u - ds_ij) k_et(v - dt_ij)
//!                                      / (lambda_i lambda_j V(dx, dy, dt))
//! ```
//!
//! with Epanechnikov kernels `k_e(x) = 3/(4e) (1 - (x/e)^2)` on `|x| <= e`
//! and the translation correction
//! `V = |W ∩ (W + (dx, dy))| * (T - |dt|)`. On a rectangle the spatial
//! factor is `(X - |dx|)(Y - |dy|)`; on a mask it is the set covariance of
//! the mask cells, which is bilinear between cell offsets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{interpoint_distance_pairs, PointPattern, SpatialMask, StPoint, StWindow};
use crate::model::Intensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bandwidths {
    pub spatial: f64,
    pub temporal: f64,
}

fn spread(v: &mut [f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((n - 1.0) * p).round() as usize];
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    if iqr > 0.0 {
        sd.min(iqr)
    } else {
        sd
    }
}

impl Bandwidths {
    pub fn new(spatial: f64, temporal: f64) -> Result<Self> {
        if !(spatial > 0.0 && temporal > 0.0 && spatial.is_finite() && temporal.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "bandwidths ({spatial}, {temporal}) must be positive"
            )));
        }
        Ok(Bandwidths { spatial, temporal })
    }

    /// Silverman's rule `1.06 * min(sd, IQR / 1.34) * n^(-1/5)` applied to
    /// the spatial and temporal separations of all pairs with
    /// `ds <= u_max` and `dt <= v_max`, where `n` is the number of points.
    pub fn silverman(pattern: &PointPattern, u_max: f64, v_max: f64) -> Result<Self> {
        let pairs = interpoint_distance_pairs(pattern.points(), u_max, v_max);
        if pairs.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "only {} pairs within the lag range; give bandwidths explicitly",
                pairs.len()
            )));
        }
        let factor = 1.06 * (pattern.len() as f64).powf(-0.2);
        let mut ds: Vec<f64> = pairs.iter().map(|p| p.ds).collect();
        let mut dt: Vec<f64> = pairs.iter().map(|p| p.dt).collect();
        Bandwidths::new(factor * spread(&mut ds), factor * spread(&mut dt))
    }
}

/// `values[iu * v_grid.len() + iv] = g(u_grid[iu], v_grid[iv])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpcfSurface {
    pub u_grid: Vec<f64>,
    pub v_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidths: Bandwidths,
}

impl GpcfSurface {
    pub fn get(&self, iu: usize, iv: usize) -> f64 {
        self.values[iu * self.v_grid.len() + iv]
    }

    pub fn same_grid(&self, other: &GpcfSurface) -> bool {
        self.u_grid == other.u_grid && self.v_grid == other.v_grid
    }
}

#[inline]
pub fn epanechnikov(x: f64, e: f64) -> f64 {
    let z = x / e;
    if z.abs() <= 1.0 {
        0.75 * (1.0 - z * z) / e
    } else {
        0.0
    }
}

/// Spatial part of the translation correction, `|W ∩ (W + d)|`.
#[derive(Debug, Clone)]
pub enum SetCovariance {
    Rectangle {
        width: f64,
        height: f64,
    },
    Mask {
        cell: (f64, f64),
        max_offset: (usize, usize),
        table: Vec<f64>,
    },
}

impl SetCovariance {
    /// `reach` is the largest spatial lag that will be queried.
    pub fn new(window: &StWindow, reach: f64) -> Self {
        match window.mask() {
            None => {
                let [x0, x1] = window.x_bounds();
                let [y0, y1] = window.y_bounds();
                SetCovariance::Rectangle {
                    width: x1 - x0,
                    height: y1 - y0,
                }
            }
            Some(mask) => Self::for_mask(mask, reach),
        }
    }

    fn for_mask(mask: &SpatialMask, reach: f64) -> Self {
        let (nx, ny) = mask.dims();
        let (cx, cy) = mask.cell_size();
        let ax = ((reach / cx).ceil() as usize + 1).min(nx);
        let ay = ((reach / cy).ceil() as usize + 1).min(ny);
        let w = 2 * ay + 1;
        let mut table = vec![0.0; (2 * ax + 1) * w];
        for a in -(ax as isize)..=(ax as isize) {
            for b in -(ay as isize)..=(ay as isize) {
                let mut count = 0usize;
                for i in 0..nx as isize {
                    let i2 = i + a;
                    if i2 < 0 || i2 >= nx as isize {
                        continue;
                    }
                    for j in 0..ny as isize {
                        let j2 = j + b;
                        if j2 >= 0
                            && j2 < ny as isize
                            && mask.cell(i as usize, j as usize)
                            && mask.cell(i2 as usize, j2 as usize)
                        {
                            count += 1;
                        }
                    }
                }
                table[(a + ax as isize) as usize * w + (b + ay as isize) as usize] = count as f64 * cx * cy;
            }
        }
        SetCovariance::Mask {
            cell: (cx, cy),
            max_offset: (ax, ay),
            table,
        }
    }

    pub fn at(&self, dx: f64, dy: f64) -> f64 {
        match self {
            SetCovariance::Rectangle { width, height } => (width - dx.abs()).max(0.0) * (height - dy.abs()).max(0.0),
            SetCovariance::Mask {
                cell,
                max_offset,
                table,
            } => {
                let (ax, ay) = *max_offset;
                let w = 2 * ay + 1;
                let fx = dx / cell.0 + ax as f64;
                let fy = dy / cell.1 + ay as f64;
                if fx < 0.0 || fy < 0.0 || fx > (2 * ax) as f64 || fy > (2 * ay) as f64 {
                    return 0.0;
                }
                let i = (fx.floor() as usize).min(2 * ax - 1);
                let j = (fy.floor() as usize).min(2 * ay - 1);
                let (s, t) = (fx - i as f64, fy - j as f64);
                let v = |i: usize, j: usize| table[i * w + j];
                (1.0 - s) * (1.0 - t) * v(i, j)
                    + s * (1.0 - t) * v(i + 1, j)
                    + (1.0 - s) * t * v(i, j + 1)
                    + s * t * v(i + 1, j + 1)
            }
        }
    }
}

fn check_grid(name: &str, grid: &[f64], positive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} grid is empty")));
    }
    if positive && grid.contains(&0.0) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid contains 0, where 1/(4 pi u) is singular"
        )));
    }
    if grid.iter().any(|&u| !(u >= 0.0 && u.is_finite())) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid values must be finite and >= 0"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// `intensity` evaluated at every point of `pattern`.
pub fn intensity_at_points(pattern: &PointPattern, intensity: &dyn Intensity) -> Result<Vec<f64>> {
    pattern.points().iter().map(|p| intensity.rate(p)).collect()
}

pub fn estimate_gpcf(
    pattern: &PointPattern,
    intensity: &dyn Intensity,
    u_grid: &[f64],
    v_grid: &[f64],
    bandwidths: Bandwidths,
) -> Result<GpcfSurface> {
    let lambdas = intensity_at_points(pattern, intensity)?;
    estimate_gpcf_with(pattern, &lambdas, u_grid, v_grid, bandwidths)
}

/// As [`estimate_gpcf`] with the intensity given at each point.
pub fn estimate_gpcf_with(
    pattern: &PointPattern,
    lambdas: &[f64],
    u_grid: &[f64],
    v_grid: &[f64],
    bw: Bandwidths,
) -> Result<GpcfSurface> {
    if pattern.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "g needs at least 2 points, got {}",
            pattern.len()
        )));
    }
    if lambdas.len() != pattern.len() {
        return Err(Error::LengthMismatch {
            expected: pattern.len(),
            found: lambdas.len(),
        });
    }
    if let Some(k) = lambdas.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidGrid(format!(
            "intensity at point {k} is {}; must be positive",
            lambdas[k]
        )));
    }
    check_grid("spatial lag", u_grid, true)?;
    check_grid("temporal lag", v_grid, false)?;
    Bandwidths::new(bw.spatial, bw.temporal)?;

    let window = pattern.window();
    let u_reach = u_grid[u_grid.len() - 1] + bw.spatial;
    let v_reach = v_grid[v_grid.len() - 1] + bw.temporal;
    let cov = SetCovariance::new(window, u_reach);
    let duration = window.duration();
    let pts = pattern.points();
    let nv = v_grid.len();
    let mut values = vec![0.0; u_grid.len() * nv];
    let mut ku = vec![0.0; u_grid.len()];
    let mut kv = vec![0.0; nv];
    for pair in interpoint_distance_pairs(pts, u_reach, v_reach) {
        let (a, b): (&StPoint, &StPoint) = (&pts[pair.i], &pts[pair.j]);
        let vol = cov.at(a.x - b.x, a.y - b.y) * (duration - pair.dt);
        if vol <= 0.0 {
            continue;
        }
        // Both orderings (i, j) and (j, i) contribute the same term.
        let w = 2.0 / (lambdas[pair.i] * lambdas[pair.j] * vol);
        for (k, &u) in u_grid.iter().enumerate() {
            ku[k] = epanechnikov(u - pair.ds, bw.spatial);
        }
        for (k, &v) in v_grid.iter().enumerate() {
            kv[k] = epanechnikov(v - pair.dt, bw.temporal);
        }
        for (iu, &a) in ku.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (iv, &b) in kv.iter().enumerate() {
                values[iu * nv + iv] += w * a * b;
            }
        }
    }
    for (iu, &u) in u_grid.iter().enumerate() {
        let scale = 1.0 / (4.0 * std::f64::consts::PI * u);
        values[iu * nv..(iu + 1) * nv].iter_mut().for_each(|g| *g *= scale);
    }
    Ok(GpcfSurface {
        u_grid: u_grid.to_vec(),
        v_grid: v_grid.to_vec(),
        values,
        bandwidths: bw,
    })
}

fn normal_mass(lo: f64, hi: f64, centre: f64, sigma: f64) -> f64 {
    use statrs::function::erf::erf;
    let z = |x: f64| (x - centre) / (sigma * std::f64::consts::SQRT_2);
    0.5 * (erf(z(hi)) - erf(z(lo)))
}

/// Leave-one-out Gaussian kernel intensity at each point:
///
/// `lambda_i = sum_{j != i} phi_s(xi_i - xi_j) phi_t(t_i - t_j) / m(p_i)`,
///
/// where `m(p)` is the kernel mass inside the window (mask cells exactly).
/// `sigma` defaults to Scott's rule `sd * n^(-1/6)` per axis.
pub fn loo_kernel_intensity(pattern: &PointPattern, sigma: Option<(f64, f64)>) -> Result<Vec<f64>> {
    let n = pattern.len();
    if n < 2 {
        return Err(Error::InvalidGrid("kernel intensity needs at least 2 points".into()));
    }
    let pts = pattern.points();
    let (ss, st) = match sigma {
        Some(s) => s,
        None => {
            let sd = |f: &dyn Fn(&StPoint) -> f64| {
                let m = pts.iter().map(f).sum::<f64>() / n as f64;
                (pts.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            let h = (n as f64).powf(-1.0 / 6.0);
            (h * 0.5 * (sd(&|p| p.x) + sd(&|p| p.y)), h * sd(&|p| p.t))
        }
    };
    if !(ss > 0.0 && st > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "kernel intensity bandwidths ({ss}, {st}) must be positive"
        )));
    }
    let window = pattern.window();
    let [x0, x1] = window.x_bounds();
    let [y0, y1] = window.y_bounds();
    let [t0, t1] = window.t_bounds();
    let norm_s = 1.0 / (2.0 * std::f64::consts::PI * ss * ss);
    let norm_t = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * st);
    let mut out = Vec::with_capacity(n);
    for (i, p) in pts.iter().enumerate() {
        let mut sum = 0.0;
        for (j, q) in pts.iter().enumerate() {
            if i != j {
                let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
                let dt = p.t - q.t;
                sum += norm_s * (-0.5 * d2 / (ss * ss)).exp() * norm_t * (-0.5 * dt * dt / (st * st)).exp();
            }
        }
        let space_mass = match window.mask() {
            None => normal_mass(x0, x1, p.x, ss) * normal_mass(y0, y1, p.y, ss),
            Some(mask) => {
                let (nx, ny) = mask.dims();
                let mut m = 0.0;
                for a in 0..nx {
                    for b in 0..ny {
                        if mask.cell(a, b) {
                            let ([cx0, cx1], [cy0, cy1]) = mask.cell_bounds(a, b);
                            m += normal_mass(cx0, cx1, p.x, ss) * normal_mass(cy0, cy1, p.y, ss);
                        }
                    }
                }
                m
            }
        };
        let mass = space_mass * normal_mass(t0, t1, p.t, st);
        out.push((sum / mass.max(1e-300)).max(f64::MIN_POSITIVE));
    }
    Ok(out)
}
