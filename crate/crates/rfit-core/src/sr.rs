//! Separate-regression baseline: two bagged regression forests, one per
//! treatment arm, whose prediction difference estimates the ITE.
//!
//! Regression trees split on the largest reduction in within-child sum of
//! squares over mtry sampled covariates, with terminal means as predictions.
//! Hyperparameters mirror the interaction trees for a fair comparison.

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ColumnMeta, TrialDataset};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::rng::stream_rng;
use crate::tree::TreeParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegNode {
    Internal {
        covariate: usize,
        cutpoint: f64,
        left: usize,
        right: usize,
    },
    Terminal {
        mean: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
    /// Per-tree ordinal codes for nominal columns, ranked by mean response.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub encodings: std::collections::BTreeMap<usize, Vec<u32>>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegNode::Terminal { mean } => return Ok(*mean),
                RegNode::Internal {
                    covariate,
                    cutpoint,
                    left,
                    right,
                } => {
                    let raw = *row.get(*covariate).ok_or_else(|| {
                        Error::Prediction(format!("row is missing covariate {covariate}"))
                    })?;
                    let value = match self.encodings.get(covariate) {
                        Some(ranks) => {
                            let level = raw as usize;
                            if raw < 0.0 || level >= ranks.len() {
                                return Err(Error::Prediction(format!(
                                    "value {raw} is not a level index of covariate {covariate}"
                                )));
                            }
                            ranks[level] as f64
                        }
                        None => raw,
                    };
                    at = if value <= *cutpoint { *left } else { *right };
                }
            }
        }
    }
}

/// Best SSE-reducing cut for one covariate: maximizes
/// S_L^2/n_L + S_R^2/n_R over midpoints, children at least `min_child`.
fn best_sse_cut(x: &[f64], y: &[f64], w: &[u16], min_child: f64) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());

    let mut total_w = 0.0;
    let mut total_s = 0.0;
    for &i in &order {
        total_w += w[i] as f64;
        total_s += w[i] as f64 * y[i];
    }

    let mut best: Option<(f64, f64)> = None; // (score, cutpoint)
    let mut lw = 0.0;
    let mut ls = 0.0;
    for k in 0..n - 1 {
        let i = order[k];
        lw += w[i] as f64;
        ls += w[i] as f64 * y[i];
        if x[order[k]] < x[order[k + 1]] {
            let rw = total_w - lw;
            let rs = total_s - ls;
            if lw < min_child || rw < min_child {
                continue;
            }
            let score = ls * ls / lw + rs * rs / rw;
            if best.map_or(true, |(bs, _)| score > bs) {
                let mid = (x[order[k]] + x[order[k + 1]]) * 0.5;
                let cut = if mid >= x[order[k + 1]] { x[order[k]] } else { mid };
                best = Some((score, cut));
            }
        }
    }
    best.map(|(score, cut)| (cut, score))
}

struct RegGrower<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    weights: &'a [u16],
    params: &'a TreeParams,
    encodings: std::collections::BTreeMap<usize, Vec<u32>>,
    nodes: Vec<RegNode>,
}

impl<'a> RegGrower<'a> {
    fn value(&self, j: usize, i: usize) -> f64 {
        let raw = self.cols[j][i];
        match self.encodings.get(&j) {
            Some(ranks) => ranks[raw as usize] as f64,
            None => raw,
        }
    }

    fn node_mean(&self, rows: &[usize]) -> f64 {
        let mut sw = 0.0;
        let mut sy = 0.0;
        for &i in rows {
            sw += self.weights[i] as f64;
            sy += self.weights[i] as f64 * self.y[i];
        }
        sy / sw
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let weight_sum: u64 = rows.iter().map(|&i| self.weights[i] as u64).sum();
        let y0 = self.y[rows[0]];
        let constant = rows.iter().all(|&i| self.y[i] == y0);

        let split = if depth >= self.params.max_depth
            || (weight_sum as usize) < self.params.min_node
            || constant
        {
            None
        } else {
            let p = self.cols.len();
            let mut drawn: Vec<usize> = index_sample(rng, p, self.params.mtry.min(p)).into_vec();
            drawn.sort_unstable();
            let y: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
            let w: Vec<u16> = rows.iter().map(|&i| self.weights[i]).collect();
            let min_child = self.params.min_arm as f64;
            let mut best: Option<(f64, usize, f64)> = None; // (score, cov, cut)
            for &j in &drawn {
                let x: Vec<f64> = rows.iter().map(|&i| self.value(j, i)).collect();
                if let Some((cut, score)) = best_sse_cut(&x, &y, &w, min_child) {
                    if best.map_or(true, |(bs, _, _)| score > bs) {
                        best = Some((score, j, cut));
                    }
                }
            }
            best.map(|(_, j, cut)| (j, cut))
        };

        match split {
            None => {
                let mean = self.node_mean(&rows);
                self.nodes.push(RegNode::Terminal { mean });
                self.nodes.len() - 1
            }
            Some((covariate, cutpoint)) => {
                let mut left_rows = Vec::new();
                let mut right_rows = Vec::new();
                for &i in &rows {
                    if self.value(covariate, i) <= cutpoint {
                        left_rows.push(i);
                    } else {
                        right_rows.push(i);
                    }
                }
                let at = self.nodes.len();
                self.nodes.push(RegNode::Internal {
                    covariate,
                    cutpoint,
                    left: 0,
                    right: 0,
                });
                let left = self.grow(left_rows, depth + 1, rng);
                let right = self.grow(right_rows, depth + 1, rng);
                if let RegNode::Internal { left: l, right: r, .. } = &mut self.nodes[at] {
                    *l = left;
                    *r = right;
                }
                at
            }
        }
    }
}

/// Ranks nominal levels by weighted mean response (ties by level index).
fn rank_levels_by_mean(n_levels: usize, level_of_row: &[f64], y: &[f64], w: &[u16]) -> Vec<u32> {
    let mut cnt = vec![0.0f64; n_levels];
    let mut sum = vec![0.0f64; n_levels];
    let mut tot_c = 0.0;
    let mut tot_s = 0.0;
    for i in 0..level_of_row.len() {
        let wi = w[i] as f64;
        if wi == 0.0 {
            continue;
        }
        let level = level_of_row[i] as usize;
        cnt[level] += wi;
        sum[level] += wi * y[i];
        tot_c += wi;
        tot_s += wi * y[i];
    }
    let overall = tot_s / tot_c.max(1.0);
    let means: Vec<f64> = (0..n_levels)
        .map(|l| if cnt[l] > 0.0 { sum[l] / cnt[l] } else { overall })
        .collect();
    let mut order: Vec<usize> = (0..n_levels).collect();
    order.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap());
    let mut ranks = vec![0u32; n_levels];
    for (rank, &level) in order.iter().enumerate() {
        ranks[level] = rank as u32;
    }
    ranks
}

/// Grows one regression tree on a weighted sample of (cols, y).
pub fn grow_regression_tree(
    cols: &[Vec<f64>],
    col_meta: &[ColumnMeta],
    y: &[f64],
    weights: &[u16],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionTree> {
    let rows: Vec<usize> = (0..y.len()).filter(|&i| weights[i] > 0).collect();
    if rows.is_empty() {
        return Err(Error::InvalidData("regression tree needs a nonempty sample".into()));
    }
    let mut encodings = std::collections::BTreeMap::new();
    for (j, meta) in col_meta.iter().enumerate() {
        if meta.kind == ColumnKind::Nominal {
            let n_levels = meta.levels.as_ref().map_or(0, Vec::len);
            encodings.insert(j, rank_levels_by_mean(n_levels, &cols[j], y, weights));
        }
    }
    let mut grower = RegGrower {
        cols,
        y,
        weights,
        params,
        encodings,
        nodes: Vec::new(),
    };
    grower.grow(rows, 0, rng);
    Ok(RegressionTree {
        nodes: grower.nodes,
        encodings: grower.encodings,
    })
}

/// One bagged regression forest (used per arm).
#[derive(Clone, Debug)]
pub struct RegressionForest {
    pub trees: Vec<RegressionTree>,
}

impl RegressionForest {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(row)?;
        }
        Ok(sum / self.trees.len() as f64)
    }
}

/// Separate-regression model: arm-specific forests whose difference
/// estimates the ITE.
#[derive(Clone, Debug)]
pub struct SrModel {
    pub forest1: RegressionForest,
    pub forest0: RegressionForest,
    pub params: ForestParams,
}

fn fit_arm(
    cols: &[Vec<f64>],
    col_meta: &[ColumnMeta],
    y: &[f64],
    params: &ForestParams,
    stream_base: u64,
) -> Result<RegressionForest> {
    let n = y.len();
    let trees: Result<Vec<RegressionTree>> = (0..params.b)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(params.seed, stream_base + b as u64);
            let mut counts = vec![0u16; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            grow_regression_tree(cols, col_meta, y, &counts, &params.tree, &mut rng)
        })
        .collect();
    Ok(RegressionForest { trees: trees? })
}

/// Fits the two arm forests on disjoint row subsets with independent
/// bootstrap streams.
pub fn fit_sr(data: &TrialDataset, params: &ForestParams) -> Result<SrModel> {
    params.tree.validate(data.p())?;
    let split_rows = |arm: u8| -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows: Vec<usize> = (0..data.n()).filter(|&i| data.t()[i] == arm).collect();
        let cols: Vec<Vec<f64>> = (0..data.p())
            .map(|j| rows.iter().map(|&i| data.column(j)[i]).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|&i| data.y()[i]).collect();
        (cols, y)
    };
    let (cols1, y1) = split_rows(1);
    let (cols0, y0) = split_rows(0);
    if y1.len() < params.tree.min_node || y0.len() < params.tree.min_node {
        return Err(Error::InvalidData(format!(
            "separate regression needs both arms of at least min_node ({}) rows; \
             got treated {} and control {}",
            params.tree.min_node,
            y1.len(),
            y0.len()
        )));
    }
    let forest1 = fit_arm(&cols1, data.columns(), &y1, params, 0)?;
    let forest0 = fit_arm(&cols0, data.columns(), &y0, params, params.b as u64)?;
    Ok(SrModel {
        forest1,
        forest0,
        params: *params,
    })
}

impl SrModel {
    /// ITE estimate: treated-arm prediction minus control-arm prediction.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        Ok(self.forest1.predict(row)? - self.forest0.predict(row)?)
    }
}
