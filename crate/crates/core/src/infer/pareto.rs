use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DistancePair;
use crate::model::Hardcore;

/// Non-dominated interpoint distance pairs, minimising `ds` and `dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoFront {
    /// Sorted by increasing `ds` (and so by decreasing `dt`).
    pub points: Vec<DistancePair>,
    pub dominated_count: usize,
}

impl ParetoFront {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Front pairs with `ds <= hs` and `dt <= ht`. Any input pair violating
    /// the hardcore is dominated by (or equal to) one of these.
    pub fn violations(&self, hardcore: Hardcore) -> Vec<DistancePair> {
        if !hardcore.is_active() {
            return Vec::new();
        }
        self.points
            .iter()
            .filter(|p| p.ds <= hardcore.hs && p.dt <= hardcore.ht)
            .copied()
            .collect()
    }

    pub fn is_feasible(&self, hardcore: Hardcore) -> bool {
        self.violations(hardcore).is_empty()
    }
}

/// `p` dominates `q` when it is no larger in both coordinates and smaller in one.
pub fn dominates(p: &DistancePair, q: &DistancePair) -> bool {
    p.ds <= q.ds && p.dt <= q.dt && (p.ds < q.ds || p.dt < q.dt)
}

pub fn pareto_front(pairs: &[DistancePair]) -> ParetoFront {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        a.ds.total_cmp(&b.ds)
            .then(a.dt.total_cmp(&b.dt))
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut points = Vec::new();
    let mut best_dt = f64::INFINITY;
    let mut k = 0;
    while k < sorted.len() {
        // Within a group of equal ds the first entry has the smallest dt.
        let ds = sorted[k].ds;
        let group_min = sorted[k].dt;
        let mut end = k;
        while end < sorted.len() && sorted[end].ds == ds {
            end += 1;
        }
        if group_min < best_dt {
            points.extend(sorted[k..end].iter().take_while(|p| p.dt == group_min));
            best_dt = group_min;
        }
        k = end;
    }
    ParetoFront {
        dominated_count: pairs.len() - points.len(),
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum HardcorePolicy {
    /// Largest `hs * ht` among the staircase corners.
    MaxArea,
    /// Largest `min(hs, ratio * ht)`, for a prior belief `hs ~ ratio * ht`.
    FixedRatio {
        ratio: f64,
    },
    Manual {
        hs: f64,
        ht: f64,
    },
}

fn below(v: f64) -> f64 {
    if v > 0.0 {
        v.next_down().max(0.0)
    } else {
        0.0
    }
}

/// Maximal feasible hardcore corners under the staircase. The corners are
/// open from above: each sits one ulp below the front values it touches.
pub fn staircase_corners(front: &ParetoFront) -> Vec<Hardcore> {
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for p in &front.points {
        if steps.last().is_none_or(|&(ds, dt)| ds != p.ds || dt != p.dt) {
            steps.push((p.ds, p.dt));
        }
    }
    let mut corners = Vec::with_capacity(2 * steps.len());
    for (k, &(a, b)) in steps.iter().enumerate() {
        corners.push(Hardcore::new(below(a), below(b)));
        if let Some(&(a_next, _)) = steps.get(k + 1) {
            corners.push(Hardcore::new(below(a_next), below(b)));
        }
    }
    corners
}

/// Picks feasible hardcore distances from the front.
///
/// Degenerate corners (zero area) are skipped; when nothing else remains the
/// hardcore is disabled.
pub fn choose_hardcore(front: &ParetoFront, policy: HardcorePolicy) -> Result<Hardcore> {
    if let HardcorePolicy::Manual { hs, ht } = policy {
        if !(hs >= 0.0 && ht >= 0.0 && hs.is_finite() && ht.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "hardcore distances ({hs}, {ht}) must be finite and >= 0"
            )));
        }
        let hc = Hardcore::new(hs, ht);
        let violating = front.violations(hc);
        if !violating.is_empty() {
            return Err(Error::InfeasibleHardcore { hs, ht, violating });
        }
        return Ok(hc);
    }
    if front.is_empty() {
        return Err(Error::InvalidConfig(
            "no interpoint pairs: the hardcore distances are not identifiable".into(),
        ));
    }
    let score = |h: &Hardcore| match policy {
        HardcorePolicy::MaxArea => (h.hs * h.ht, 0.0),
        HardcorePolicy::FixedRatio { ratio } => (h.hs.min(ratio * h.ht), h.hs * h.ht),
        HardcorePolicy::Manual { .. } => unreachable!(),
    };
    if let HardcorePolicy::FixedRatio { ratio } = policy {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "hardcore ratio must be positive, got {ratio}"
            )));
        }
    }
    let mut best: Option<(Hardcore, (f64, f64))> = None;
    for c in staircase_corners(front) {
        if c.hs <= 0.0 || c.ht <= 0.0 {
            continue;
        }
        let s = score(&c);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    let chosen = best.map(|(c, _)| c).unwrap_or(Hardcore::NONE);
    debug_assert!(front.is_feasible(chosen));
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(v: &[(f64, f64)]) -> Vec<DistancePair> {
        v.iter()
            .enumerate()
            .map(|(k, &(ds, dt))| DistancePair { ds, dt, i: k, j: k + 1 })
            .collect()
    }

    fn coords(f: &ParetoFront) -> Vec<(f64, f64)> {
        f.points.iter().map(|p| (p.ds, p.dt)).collect()
    }

    #[test]
    fn four_point_example() {
        let f = pareto_front(&pairs(&[(1.0, 5.0), (2.0, 2.0), (3.0, 3.0), (4.0, 1.0)]));
        assert_eq!(coords(&f), vec![(1.0, 5.0), (2.0, 2.0), (4.0, 1.0)]);
        assert_eq!(f.dominated_count, 1);
    }

    #[test]
    fn trivial_fronts() {
        assert!(pareto_front(&[]).is_empty());
        let f = pareto_front(&pairs(&[(0.3, 0.7)]));
        assert_eq!(coords(&f), vec![(0.3, 0.7)]);
    }

    #[test]
    fn equal_ds_keeps_only_the_smallest_dt() {
        let f = pareto_front(&pairs(&[(1.0, 3.0), (1.0, 2.0), (1.0, 2.0), (2.0, 2.0)]));
        assert_eq!(coords(&f), vec![(1.0, 2.0), (1.0, 2.0)]);
    }

    #[test]
    fn single_point_corner_is_just_below() {
        let f = pareto_front(&pairs(&[(0.5, 2.0)]));
        let hc = choose_hardcore(&f, HardcorePolicy::MaxArea).unwrap();
        assert_eq!(hc.hs, 0.5f64.next_down());
        assert_eq!(hc.ht, 2.0f64.next_down());
        assert!(f.is_feasible(hc));
    }

    #[test]
    fn zero_distance_corner_falls_through() {
        let f = pareto_front(&pairs(&[(0.0, 3.0)]));
        assert_eq!(choose_hardcore(&f, HardcorePolicy::MaxArea).unwrap(), Hardcore::NONE);
        let f = pareto_front(&pairs(&[(0.0, 3.0), (1.0, 1.0)]));
        let hc = choose_hardcore(&f, HardcorePolicy::MaxArea).unwrap();
        // Corners: (0,3-) degenerate, (1-,3-) area 3, (1-,1-) area 1.
        assert_eq!((hc.hs, hc.ht), (1f64.next_down(), 3f64.next_down()));
    }

    #[test]
    fn max_area_staircase() {
        let f = pareto_front(&pairs(&[(1.0, 5.0), (2.0, 2.0), (4.0, 1.0)]));
        // Inner corners: (2-,5-) area 10, (4-,2-) area 8.
        let hc = choose_hardcore(&f, HardcorePolicy::MaxArea).unwrap();
        assert!((hc.hs - 2.0).abs() < 1e-12 && (hc.ht - 5.0).abs() < 1e-12);
        assert!(hc.hs < 2.0 && hc.ht < 5.0);
    }

    #[test]
    fn fixed_ratio_prefers_balanced_corner() {
        let f = pareto_front(&pairs(&[(1.0, 5.0), (2.0, 2.0), (4.0, 1.0)]));
        // ratio 2: min(hs, 2 ht) is about 2 at (2,5) and 4 at (4,2).
        let hc = choose_hardcore(&f, HardcorePolicy::FixedRatio { ratio: 2.0 }).unwrap();
        assert!((hc.hs - 4.0).abs() < 1e-12 && (hc.ht - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fire_like_front_gives_nonzero_pair() {
        // Months are integers: same-month fires are at least 0.35 km apart,
        // fires a month apart can be 0.1 km apart.
        let f = pareto_front(&pairs(&[(0.35, 0.0), (2.0, 0.0), (0.1, 1.0), (0.5, 2.0), (0.1, 3.0)]));
        let hc = choose_hardcore(&f, HardcorePolicy::MaxArea).unwrap();
        assert!(hc.is_active());
        assert!((hc.hs - 0.35).abs() < 1e-12 && (hc.ht - 1.0).abs() < 1e-12);
        assert!(f.is_feasible(hc));
    }

    #[test]
    fn manual_policy_validates() {
        let f = pareto_front(&pairs(&[(1.0, 5.0), (2.0, 2.0), (4.0, 1.0)]));
        assert_eq!(
            choose_hardcore(&f, HardcorePolicy::Manual { hs: 1.5, ht: 1.5 }).unwrap(),
            Hardcore::new(1.5, 1.5)
        );
        match choose_hardcore(&f, HardcorePolicy::Manual { hs: 2.0, ht: 2.0 }) {
            Err(Error::InfeasibleHardcore { violating, .. }) => {
                assert_eq!(violating.len(), 1);
                assert_eq!((violating[0].ds, violating[0].dt), (2.0, 2.0));
            }
            other => panic!("{other:?}"),
        }
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<DistancePair>> {
        prop::collection::vec((0u8..20, 0u8..20), 0..40).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (a, b))| DistancePair {
                    ds: a as f64 / 4.0,
                    dt: b as f64 / 2.0,
                    i: k,
                    j: k + 100,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn front_matches_exhaustive_dominance(v in arb_pairs()) {
            let f = pareto_front(&v);
            let mut expected: Vec<(usize, usize)> = v
                .iter()
                .filter(|q| !v.iter().any(|p| dominates(p, q)))
                .map(|p| (p.i, p.j))
                .collect();
            let mut got: Vec<(usize, usize)> = f.points.iter().map(|p| (p.i, p.j)).collect();
            expected.sort();
            got.sort();
            prop_assert_eq!(got, expected);
            for a in &f.points {
                for b in &f.points {
                    prop_assert!(!dominates(a, b));
                }
            }
        }

        #[test]
        fn front_is_order_invariant(v in arb_pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut w = v.clone();
            w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(pareto_front(&v), pareto_front(&w));
        }

        #[test]
        fn chosen_hardcore_is_feasible_for_all_pairs(v in arb_pairs(), ratio in 0.1f64..10.0) {
            let f = pareto_front(&v);
            for policy in [HardcorePolicy::MaxArea, HardcorePolicy::FixedRatio { ratio }] {
                if let Ok(hc) = choose_hardcore(&f, policy) {
                    prop_assert!(!v.iter().any(|p| hc.is_active() && p.ds <= hc.hs && p.dt <= hc.ht));
                }
            }
        }
    }
}
