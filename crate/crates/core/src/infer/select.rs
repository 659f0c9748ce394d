use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_with_quadrature, Quadrature};
use super::irls::{FitResult, IrlsOptions};
use crate::error::{Error, Result};
use crate::geometry::PointPattern;
use crate::model::{GibbsModel, Hardcore, InteractionComponent, TrendModel};

/// One candidate fit, with its position in the input list.
#[derive(Debug, Clone, Serialize)]
pub struct RankedFit {
    pub index: usize,
    pub components: Vec<InteractionComponent>,
    pub fit: FitResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedCandidate {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    /// Ascending AIC; ties go to the candidate with fewer components.
    pub ranked: Vec<RankedFit>,
    pub skipped: Vec<SkippedCandidate>,
}

impl Selection {
    pub fn best(&self) -> &RankedFit {
        &self.ranked[0]
    }
}

/// Fits every radii configuration in `candidates` against the same
/// quadrature and ranks them by AIC.
///
/// The interaction strengths in `candidates` are ignored. Candidates that
/// are invalid for `hardcore` or whose fit fails are skipped with a warning.
pub fn select_irregular(
    data: &PointPattern,
    trend: &TrendModel,
    hardcore: Hardcore,
    candidates: &[Vec<InteractionComponent>],
    quad: &Quadrature,
    irls: &IrlsOptions,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate radii configurations".into()));
    }
    let outcomes: Vec<std::result::Result<RankedFit, SkippedCandidate>> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, comps)| {
            let skip = |e: Error| SkippedCandidate {
                index,
                reason: e.to_string(),
            };
            let comps: Vec<InteractionComponent> = comps
                .iter()
                .map(|c| InteractionComponent { gamma: 1.0, ..*c })
                .collect();
            let structure = GibbsModel::new(trend.clone(), comps.clone(), hardcore).map_err(skip)?;
            let fitted = fit_with_quadrature(data, &structure, quad, irls).map_err(skip)?;
            Ok(RankedFit {
                index,
                components: comps,
                fit: fitted.fit,
            })
        })
        .collect();
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => ranked.push(r),
            Err(s) => {
                log::warn!("skipping candidate {}: {}", s.index, s.reason);
                skipped.push(s);
            }
        }
    }
    if ranked.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "all {} candidates were skipped",
            candidates.len()
        )));
    }
    ranked.sort_by(|a, b| rank_cmp(rank_key(a), rank_key(b)));
    Ok(Selection { ranked, skipped })
}

fn rank_key(r: &RankedFit) -> (f64, usize, usize) {
    (r.fit.aic, r.components.len(), r.index)
}

fn rank_cmp(a: (f64, usize, usize), b: (f64, usize, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Every configuration `[(r_1[a], q_1[b]), ..., (r_m[a], q_m[b])]` from
/// per-component radius and duration grids, keeping only strictly
/// increasing ones.
pub fn radii_grid(spatial: &[Vec<f64>], temporal: &[Vec<f64>]) -> Vec<Vec<InteractionComponent>> {
    fn rec(
        k: usize,
        spatial: &[Vec<f64>],
        temporal: &[Vec<f64>],
        cur: &mut Vec<InteractionComponent>,
        out: &mut Vec<Vec<InteractionComponent>>,
    ) {
        if k == spatial.len() {
            out.push(cur.clone());
            return;
        }
        for &r in &spatial[k] {
            for &q in &temporal[k] {
                if cur.last().is_some_and(|p| !(r > p.r && q > p.q)) {
                    continue;
                }
                cur.push(InteractionComponent::strauss(1.0, r, q));
                rec(k + 1, spatial, temporal, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    if spatial.len() == temporal.len() {
        rec(0, spatial, temporal, &mut Vec::new(), &mut out);
    }
    out
}
