use serde::{Deserialize, Serialize};

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::scenegen::TileAnnotation;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStrategy {
    /// Ascending cost, index order on ties.
    #[default]
    Greedy,
    /// Maximum matching of minimum total cost.
    Hungarian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    /// Largest mean vertex distance, in pixels, for a match.
    pub tau_vertex: f64,
    pub require_class: bool,
    pub strategy: MatchStrategy,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            tau_vertex: 5.0,
            require_class: true,
            strategy: MatchStrategy::Greedy,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_vertex > 0.0 && self.tau_vertex.is_finite()) {
            return Err(Error::invalid("tau_vertex", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub pred: usize,
    pub gt: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matches: Vec<Match>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

/// Mean distance between corresponding vertices, minimized over cyclic
/// alignments of the predicted ring. Rotating a symmetric tile by one
/// symmetry step is such a cyclic shift, so symmetric equivalents cost 0.
/// `None` when the vertex counts differ.
pub fn vertex_cost(pred: &Polygon, gt: &Polygon) -> Option<f64> {
    let (p, g) = (pred.vertices(), gt.vertices());
    let n = p.len();
    if n != g.len() {
        return None;
    }
    (0..n)
        .map(|shift| (0..n).map(|i| p[(i + shift) % n].dist(g[i])).sum::<f64>() / n as f64)
        .min_by(f64::total_cmp)
}

fn costs(preds: &[Detection], gts: &[TileAnnotation], cfg: &MatchConfig) -> Result<Vec<(f64, usize, usize)>> {
    let mut out = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        for (pi, p) in preds.iter().enumerate() {
            if p.shape != g.shape || (cfg.require_class && p.spec_id != g.spec_id) {
                continue;
            }
            let cost = vertex_cost(&p.vertices, &g.vertices).ok_or_else(|| Error::VertexCountMismatch {
                shape: p.shape.to_string(),
                pred: p.vertices.len(),
                gt: g.vertices.len(),
            })?;
            if cost <= cfg.tau_vertex {
                out.push((cost, pi, gi));
            }
        }
    }
    Ok(out)
}

/// One-to-one matching of predictions to ground truth on a single image.
pub fn match_detections(preds: &[Detection], gts: &[TileAnnotation], cfg: &MatchConfig) -> Result<MatchResult> {
    cfg.validate()?;
    let mut pairs = costs(preds, gts, cfg)?;
    let chosen: Vec<(f64, usize, usize)> = match cfg.strategy {
        MatchStrategy::Greedy => {
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut used_p = vec![false; preds.len()];
            let mut used_g = vec![false; gts.len()];
            pairs
                .into_iter()
                .filter(|&(_, p, g)| {
                    let free = !used_p[p] && !used_g[g];
                    if free {
                        used_p[p] = true;
                        used_g[g] = true;
                    }
                    free
                })
                .collect()
        }
        MatchStrategy::Hungarian => hungarian_pairs(&pairs, preds.len(), gts.len()),
    };
    let mut matches: Vec<Match> = chosen
        .into_iter()
        .map(|(cost, pred, gt)| Match { pred, gt, cost })
        .collect();
    matches.sort_by_key(|m| m.gt);
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; gts.len()];
    for m in &matches {
        used_p[m.pred] = true;
        used_g[m.gt] = true;
    }
    Ok(MatchResult {
        matches,
        unmatched_preds: (0..preds.len()).filter(|&i| !used_p[i]).collect(),
        unmatched_gts: (0..gts.len()).filter(|&i| !used_g[i]).collect(),
    })
}

/// Assignment over the admissible pairs: forbidden pairs cost more than any
/// set of admissible ones, so cardinality is maximized first.
fn hungarian_pairs(pairs: &[(f64, usize, usize)], np: usize, ng: usize) -> Vec<(f64, usize, usize)> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let big = 1.0 + pairs.iter().map(|p| p.0).sum::<f64>();
    // rows are the smaller side
    let transpose = np > ng;
    let (rows, cols) = if transpose { (ng, np) } else { (np, ng) };
    let mut cost = vec![vec![big; cols]; rows];
    for &(c, p, g) in pairs {
        let (r, k) = if transpose { (g, p) } else { (p, g) };
        cost[r][k] = c;
    }
    let assignment = hungarian(&cost);
    assignment
        .into_iter()
        .enumerate()
        .filter(|&(r, k)| cost[r][k] < big)
        .map(|(r, k)| {
            let (p, g) = if transpose { (k, r) } else { (r, k) };
            (cost[r][k], p, g)
        })
        .collect()
}

/// Minimum-cost assignment of every row to a distinct column (rows ≤ cols),
/// shortest augmenting paths with potentials.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
