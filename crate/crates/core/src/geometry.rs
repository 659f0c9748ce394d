//! Points, windows and cylinder-neighbourhood queries.
//!
//! Space and time are kept separate: two events are compared through the
//! pair `(ds, dt)` of Euclidean spatial distance and absolute time lag, and a
//! cylinder `C_r^q(u)` contains every event with `ds <= r` and `dt <= q`.
//! All cylinders are closed.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patterns larger than this use a bucket grid for pair enumeration.
pub const GRID_INDEX_THRESHOLD: usize = 2000;

/// An event location in space and time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StPoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl StPoint {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        StPoint { x, y, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

/// Spatial and temporal separation of two events.
#[inline]
pub fn cyl_distance(a: &StPoint, b: &StPoint) -> (f64, f64) {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    ((dx * dx + dy * dy).sqrt(), (a.t - b.t).abs())
}

#[inline]
pub(crate) fn in_cylinder(a: &StPoint, b: &StPoint, r: f64, q: f64) -> bool {
    let dt = (a.t - b.t).abs();
    if dt > q {
        return false;
    }
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    // Compare through the square root so the boundary matches `cyl_distance`.
    (dx * dx + dy * dy).sqrt() <= r
}

/// Boolean raster restricting the spatial extent of a window.
///
/// Row `j` covers `y` in `[origin_y + j*cell_y, origin_y + (j+1)*cell_y)`;
/// cells are stored row-major starting from the lowest row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMask {
    origin: (f64, f64),
    cell: (f64, f64),
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
}

impl SpatialMask {
    pub fn new(origin: (f64, f64), cell: (f64, f64), nx: usize, ny: usize, cells: Vec<bool>) -> Result<Self> {
        if !(cell.0 > 0.0 && cell.1 > 0.0) || !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(Error::InvalidWindow("mask cells must have positive size".into()));
        }
        if nx == 0 || ny == 0 || cells.len() != nx * ny {
            return Err(Error::InvalidWindow(format!(
                "mask has {} cells, expected {nx} x {ny}",
                cells.len()
            )));
        }
        if !cells.iter().any(|&c| c) {
            return Err(Error::InvalidWindow("mask has no valid cell".into()));
        }
        Ok(SpatialMask {
            origin,
            cell,
            nx,
            ny,
            cells,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> (f64, f64) {
        self.cell
    }

    pub fn cell(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    fn index_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.origin.0) / self.cell.0).floor();
        let fj = ((y - self.origin.1) / self.cell.1).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.index_of(x, y).is_some_and(|(i, j)| self.cell(i, j))
    }

    /// Rectangle covered by cell `(i, j)`.
    pub fn cell_bounds(&self, i: usize, j: usize) -> ([f64; 2], [f64; 2]) {
        let x0 = self.origin.0 + i as f64 * self.cell.0;
        let y0 = self.origin.1 + j as f64 * self.cell.1;
        ([x0, x0 + self.cell.0], [y0, y0 + self.cell.1])
    }
}

/// Observation window `S x T`: a rectangle, optionally masked, times an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StWindow {
    x: [f64; 2],
    y: [f64; 2],
    t: [f64; 2],
    mask: Option<Arc<SpatialMask>>,
    area: f64,
}

impl StWindow {
    pub fn new(x: [f64; 2], y: [f64; 2], t: [f64; 2]) -> Result<Self> {
        for (name, b) in [("x", x), ("y", y), ("t", t)] {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::InvalidWindow(format!(
                    "{name} bounds [{}, {}] are not an increasing finite interval",
                    b[0], b[1]
                )));
            }
        }
        Ok(StWindow {
            x,
            y,
            t,
            mask: None,
            area: (x[1] - x[0]) * (y[1] - y[0]),
        })
    }

    /// The unit cube `[0,1]^3`.
    pub fn unit_cube() -> Self {
        StWindow::new([0.0, 1.0], [0.0, 1.0], [0.0, 1.0]).expect("unit cube is valid")
    }

    pub fn with_mask(mut self, mask: SpatialMask) -> Result<Self> {
        let (nx, ny) = mask.dims();
        let mut area = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                if !mask.cell(i, j) {
                    continue;
                }
                let (cx, cy) = mask.cell_bounds(i, j);
                let w = (cx[1].min(self.x[1]) - cx[0].max(self.x[0])).max(0.0);
                let h = (cy[1].min(self.y[1]) - cy[0].max(self.y[0])).max(0.0);
                area += w * h;
            }
        }
        if area <= 0.0 {
            return Err(Error::InvalidWindow("mask does not overlap the spatial bounds".into()));
        }
        self.area = area;
        self.mask = Some(Arc::new(mask));
        Ok(self)
    }

    pub fn x_bounds(&self) -> [f64; 2] {
        self.x
    }

    pub fn y_bounds(&self) -> [f64; 2] {
        self.y
    }

    pub fn t_bounds(&self) -> [f64; 2] {
        self.t
    }

    pub fn mask(&self) -> Option<&SpatialMask> {
        self.mask.as_deref()
    }

    /// Spatial area, corrected for the mask when one is present.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn duration(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    /// `|W|`, corrected for the mask when one is present.
    pub fn volume(&self) -> f64 {
        self.area * self.duration()
    }

    /// Volume of the bounding box, ignoring any mask.
    pub fn box_volume(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0]) * self.duration()
    }

    pub fn contains_space(&self, x: f64, y: f64) -> bool {
        x >= self.x[0]
            && x <= self.x[1]
            && y >= self.y[0]
            && y <= self.y[1]
            && self.mask.as_ref().is_none_or(|m| m.contains(x, y))
    }

    pub fn contains(&self, p: &StPoint) -> bool {
        p.t >= self.t[0] && p.t <= self.t[1] && self.contains_space(p.x, p.y)
    }

    /// Uniform point on the bounding box; may fall outside the mask.
    pub fn sample_box<R: Rng + ?Sized>(&self, rng: &mut R) -> StPoint {
        StPoint::new(
            self.x[0] + (self.x[1] - self.x[0]) * rng.random::<f64>(),
            self.y[0] + (self.y[1] - self.y[0]) * rng.random::<f64>(),
            self.t[0] + self.duration() * rng.random::<f64>(),
        )
    }

    /// Uniform point on the window (rejection against the mask).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> StPoint {
        loop {
            let p = self.sample_box(rng);
            if self.mask.is_none() || self.contains(&p) {
                return p;
            }
        }
    }
}

/// A finite simple point pattern observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<StPoint>,
    window: StWindow,
}

impl PointPattern {
    /// Validates finiteness, containment and simplicity.
    pub fn new(points: Vec<StPoint>, window: StWindow) -> Result<Self> {
        for (index, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFiniteCoordinate { index });
            }
            if !window.contains(p) {
                return Err(Error::PointOutsideWindow {
                    index,
                    x: p.x,
                    y: p.y,
                    t: p.t,
                });
            }
        }
        if let Some((first, second)) = first_duplicate(&points) {
            return Err(Error::DuplicatePoint { first, second });
        }
        Ok(PointPattern { points, window })
    }

    pub fn empty(window: StWindow) -> Self {
        PointPattern {
            points: Vec::new(),
            window,
        }
    }

    pub(crate) fn from_parts_unchecked(points: Vec<StPoint>, window: StWindow) -> Self {
        PointPattern { points, window }
    }

    pub fn points(&self) -> &[StPoint] {
        &self.points
    }

    pub fn window(&self) -> &StWindow {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<StPoint> {
        self.points
    }

    pub(crate) fn push_unchecked(&mut self, p: StPoint) {
        self.points.push(p);
    }

    pub(crate) fn swap_remove(&mut self, i: usize) -> StPoint {
        self.points.swap_remove(i)
    }

    /// Observed intensity `n / |W|`.
    pub fn mean_intensity(&self) -> f64 {
        self.points.len() as f64 / self.window.volume()
    }
}

/// Indices `(first, second)` of the first repeated point in sorted order.
pub(crate) fn first_duplicate(points: &[StPoint]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let key = |p: &StPoint| (p.x.to_bits(), p.y.to_bits(), p.t.to_bits());
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pa.x.total_cmp(&pb.x)
            .then(pa.y.total_cmp(&pb.y))
            .then(pa.t.total_cmp(&pb.t))
            .then(a.cmp(&b))
    });
    let mut best: Option<(usize, usize)> = None;
    for w in order.windows(2) {
        if key(&points[w[0]]) == key(&points[w[1]]) {
            let cand = (w[0].min(w[1]), w[0].max(w[1]));
            if best.is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Number of points of `points` in the closed cylinder `C_r^q(center)`.
///
/// With `exclude_center`, points equal to `center` are not counted.
pub fn neighbor_count(center: &StPoint, points: &[StPoint], r: f64, q: f64, exclude_center: bool) -> usize {
    points
        .iter()
        .filter(|p| !(exclude_center && *p == center) && in_cylinder(center, p, r, q))
        .count()
}

/// Number of unordered pairs lying within the closed cylinder of radius `r`
/// and half-height `q` of each other.
pub fn close_pair_count(points: &[StPoint], r: f64, q: f64) -> usize {
    if points.len() > GRID_INDEX_THRESHOLD && r.is_finite() && q.is_finite() {
        let index = GridIndex::new(points, r, q);
        let mut count = 0;
        for (i, p) in points.iter().enumerate() {
            index.for_each_candidate(p, r, q, |j| {
                if j > i && in_cylinder(p, &points[j], r, q) {
                    count += 1;
                }
            });
        }
        count
    } else {
        close_pair_count_brute(points, r, q)
    }
}

pub(crate) fn close_pair_count_brute(points: &[StPoint], r: f64, q: f64) -> usize {
    let mut count = 0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if in_cylinder(a, b, r, q) {
                count += 1;
            }
        }
    }
    count
}

/// Spatial and temporal separation of an unordered pair `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistancePair {
    pub ds: f64,
    pub dt: f64,
    pub i: usize,
    pub j: usize,
}

/// All unordered pairs with `ds <= ds_max` and `dt <= dt_max`, ordered by `(i, j)`.
pub fn interpoint_distance_pairs(points: &[StPoint], ds_max: f64, dt_max: f64) -> Vec<DistancePair> {
    let mut out = Vec::new();
    if points.len() > GRID_INDEX_THRESHOLD && ds_max.is_finite() && dt_max.is_finite() {
        let index = GridIndex::new(points, ds_max, dt_max);
        for (i, a) in points.iter().enumerate() {
            let start = out.len();
            index.for_each_candidate(a, ds_max, dt_max, |j| {
                if j > i {
                    let (ds, dt) = cyl_distance(a, &points[j]);
                    if ds <= ds_max && dt <= dt_max {
                        out.push(DistancePair { ds, dt, i, j });
                    }
                }
            });
            out[start..].sort_by_key(|p| p.j);
        }
    } else {
        for (i, a) in points.iter().enumerate() {
            for (j, b) in points.iter().enumerate().skip(i + 1) {
                let (ds, dt) = cyl_distance(a, b);
                if ds <= ds_max && dt <= dt_max {
                    out.push(DistancePair { ds, dt, i, j });
                }
            }
        }
    }
    out
}

/// Uniform bucket grid over space-time for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_s: f64,
    cell_t: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl GridIndex {
    /// Buckets of side `cell_s` in space and `cell_t` in time.
    pub fn new(points: &[StPoint], cell_s: f64, cell_t: f64) -> Self {
        let cell_s = if cell_s > 0.0 { cell_s } else { 1.0 };
        let cell_t = if cell_t > 0.0 { cell_t } else { 1.0 };
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell_s, cell_t)).or_default().push(i);
        }
        GridIndex {
            cell_s,
            cell_t,
            buckets,
        }
    }

    fn key(p: &StPoint, cs: f64, ct: f64) -> (i64, i64, i64) {
        (
            (p.x / cs).floor() as i64,
            (p.y / cs).floor() as i64,
            (p.t / ct).floor() as i64,
        )
    }

    /// Calls `f` with every indexed point that may lie in `C_r^q(center)`.
    pub fn for_each_candidate(&self, center: &StPoint, r: f64, q: f64, mut f: impl FnMut(usize)) {
        let lo = Self::key(
            &StPoint::new(center.x - r, center.y - r, center.t - q),
            self.cell_s,
            self.cell_t,
        );
        let hi = Self::key(
            &StPoint::new(center.x + r, center.y + r, center.t + q),
            self.cell_s,
            self.cell_t,
        );
        for a in lo.0..=hi.0 {
            for b in lo.1..=hi.1 {
                for c in lo.2..=hi.2 {
                    if let Some(ids) = self.buckets.get(&(a, b, c)) {
                        ids.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pattern(points: &[(f64, f64, f64)]) -> Vec<StPoint> {
        points.iter().map(|&(x, y, t)| StPoint::new(x, y, t)).collect()
    }

    #[test]
    fn cyl_distance_examples() {
        let o = StPoint::new(0.0, 0.0, 0.0);
        assert_eq!(cyl_distance(&o, &o), (0.0, 0.0));
        assert_eq!(cyl_distance(&o, &StPoint::new(3.0, 4.0, 2.0)), (5.0, 2.0));
        assert_eq!(
            cyl_distance(&StPoint::new(1.0, 1.0, 5.0), &StPoint::new(1.0, 1.0, 2.0)),
            (0.0, 3.0)
        );
    }

    #[test]
    fn neighbor_count_examples() {
        let c = StPoint::new(0.0, 0.0, 0.0);
        let pts = pattern(&[(0.03, 0.0, 0.05), (0.5, 0.5, 0.5)]);
        assert_eq!(neighbor_count(&c, &pts, 0.05, 0.1, false), 1);
        assert_eq!(neighbor_count(&c, &[], 0.05, 0.1, false), 0);
        assert_eq!(neighbor_count(&c, &[c], 0.05, 0.1, true), 0);
        assert_eq!(neighbor_count(&c, &[c], 0.05, 0.1, false), 1);
    }

    #[test]
    fn cylinder_is_closed() {
        let c = StPoint::new(0.0, 0.0, 0.0);
        let pts = pattern(&[(0.0, 0.5, 0.25)]);
        assert_eq!(neighbor_count(&c, &pts, 0.5, 0.25, false), 1);
        assert_eq!(neighbor_count(&c, &pts, 0.4999, 0.25, false), 0);
        assert_eq!(neighbor_count(&c, &pts, 0.5, 0.2499, false), 0);
    }

    #[test]
    fn close_pair_count_examples() {
        let pts = pattern(&[(0.0, 0.0, 0.0), (0.03, 0.0, 0.05), (0.5, 0.5, 0.5)]);
        assert_eq!(close_pair_count(&pts, 0.05, 0.1), 1);
        assert_eq!(close_pair_count(&pts[..1], 0.05, 0.1), 0);
        let tight = pattern(&[(0.0, 0.0, 0.0), (0.01, 0.0, 0.01), (0.0, 0.01, 0.02)]);
        assert_eq!(close_pair_count(&tight, 0.05, 0.1), 3);
    }

    #[test]
    fn distance_pair_examples() {
        let two = pattern(&[(0.0, 0.0, 0.0), (3.0, 4.0, 1.0)]);
        let pairs = interpoint_distance_pairs(&two, f64::INFINITY, f64::INFINITY);
        assert_eq!(
            pairs,
            vec![DistancePair {
                ds: 5.0,
                dt: 1.0,
                i: 0,
                j: 1
            }]
        );
        assert!(interpoint_distance_pairs(&[], 1.0, 1.0).is_empty());
        let four = pattern(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, 1.0, 1.0)]);
        assert_eq!(interpoint_distance_pairs(&four, f64::INFINITY, f64::INFINITY).len(), 6);
    }

    #[test]
    fn pattern_rejects_duplicates_and_outside_points() {
        let w = StWindow::unit_cube();
        let dup = pattern(&[(0.1, 0.1, 0.1), (0.2, 0.2, 0.2), (0.1, 0.1, 0.1)]);
        assert!(matches!(
            PointPattern::new(dup, w.clone()),
            Err(Error::DuplicatePoint { first: 0, second: 2 })
        ));
        let out = pattern(&[(0.1, 0.1, 1.5)]);
        assert!(matches!(
            PointPattern::new(out, w.clone()),
            Err(Error::PointOutsideWindow { index: 0, .. })
        ));
        let nan = pattern(&[(f64::NAN, 0.1, 0.1)]);
        assert!(matches!(
            PointPattern::new(nan, w),
            Err(Error::NonFiniteCoordinate { index: 0 })
        ));
    }

    #[test]
    fn window_validation() {
        assert!(StWindow::new([1.0, 0.0], [0.0, 1.0], [0.0, 1.0]).is_err());
        assert!(StWindow::new([0.0, 1.0], [0.0, 1.0], [2.0, 2.0]).is_err());
        let all_false = SpatialMask::new((0.0, 0.0), (0.5, 0.5), 2, 2, vec![false; 4]);
        assert!(all_false.is_err());
    }

    #[test]
    fn masked_window_area_and_membership() {
        // Lower-left quarter of the unit square removed.
        let mask = SpatialMask::new((0.0, 0.0), (0.5, 0.5), 2, 2, vec![false, true, true, true]).unwrap();
        let w = StWindow::new([0.0, 1.0], [0.0, 1.0], [0.0, 2.0])
            .unwrap()
            .with_mask(mask)
            .unwrap();
        assert!((w.area() - 0.75).abs() < 1e-15);
        assert!((w.volume() - 1.5).abs() < 1e-15);
        assert!(!w.contains(&StPoint::new(0.2, 0.2, 1.0)));
        assert!(w.contains(&StPoint::new(0.7, 0.2, 1.0)));
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<StPoint>> {
        prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 0..max)
            .prop_map(|v| v.into_iter().map(|(x, y, t)| StPoint::new(x, y, t)).collect())
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
                                 b in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)) {
            let a = StPoint::new(a.0, a.1, a.2);
            let b = StPoint::new(b.0, b.1, b.2);
            prop_assert_eq!(cyl_distance(&a, &b), cyl_distance(&b, &a));
        }

        #[test]
        fn pair_count_is_half_neighbor_sum(pts in arb_points(40), r in 0.01..0.6f64, q in 0.01..0.6f64) {
            let total: usize = pts.iter().map(|p| neighbor_count(p, &pts, r, q, true)).sum();
            prop_assert_eq!(total % 2, 0);
            prop_assert_eq!(close_pair_count(&pts, r, q), total / 2);
        }

        #[test]
        fn unbounded_neighbor_count_is_n_minus_one(pts in arb_points(30)) {
            prop_assume!(!pts.is_empty() && first_duplicate(&pts).is_none());
            let c = pts[0];
            prop_assert_eq!(neighbor_count(&c, &pts, f64::INFINITY, f64::INFINITY, true), pts.len() - 1);
        }

        #[test]
        fn capped_pairs_are_filtered_uncapped(pts in arb_points(30), ds in 0.0..1.5f64, dt in 0.0..1.0f64) {
            let all = interpoint_distance_pairs(&pts, f64::INFINITY, f64::INFINITY);
            let filtered: Vec<_> = all.into_iter().filter(|p| p.ds <= ds && p.dt <= dt).collect();
            prop_assert_eq!(interpoint_distance_pairs(&pts, ds, dt), filtered);
        }

        #[test]
        fn grid_index_matches_brute_force(pts in arb_points(60), r in 0.01..0.4f64, q in 0.01..0.4f64) {
            let index = GridIndex::new(&pts, r, q);
            for c in &pts {
                let mut n = 0;
                index.for_each_candidate(c, r, q, |j| if in_cylinder(c, &pts[j], r, q) { n += 1 });
                prop_assert_eq!(n, neighbor_count(c, &pts, r, q, false));
            }
        }
    }

    #[test]
    fn large_pattern_paths_agree_with_brute_force() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let w = StWindow::unit_cube();
        let pts: Vec<StPoint> = (0..2500).map(|_| w.sample_uniform(&mut rng)).collect();
        assert_eq!(
            close_pair_count(&pts, 0.03, 0.02),
            close_pair_count_brute(&pts, 0.03, 0.02)
        );
        let fast = interpoint_distance_pairs(&pts, 0.04, 0.03);
        let mut slow = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let (ds, dt) = cyl_distance(&pts[i], &pts[j]);
                if ds <= 0.04 && dt <= 0.03 {
                    slow.push(DistancePair { ds, dt, i, j });
                }
            }
        }
        assert_eq!(fast, slow);
    }
}
