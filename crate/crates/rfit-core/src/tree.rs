//! Interaction tree growth and prediction.
//!
//! A tree is grown on a bootstrap-weighted view of the dataset: a row with
//! count w contributes as w replicated rows to every tally. Splits maximize
//! the exact interaction statistic Q among mtry randomly drawn covariates;
//! rows with value <= cutpoint go left. Nominal covariates are ordinalized
//! once per tree, at the root, from the weighted sample.

use std::collections::BTreeMap;

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{rank_levels, ColumnKind, TrialDataset};
use crate::error::{Error, Result};
use crate::split::{
    greedy_best_cut, sss_best_cut, SplitCandidate, SplitMethod, SssConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Number of covariates drawn (without replacement) per node.
    pub mtry: usize,
    /// Minimum weighted count per arm in each child cell.
    pub min_arm: usize,
    /// Minimum weighted node size to attempt a split.
    pub min_node: usize,
    pub max_depth: usize,
    pub split_method: SplitMethod,
    pub sss: SssConfig,
}

impl TreeParams {
    /// Defaults for a dataset with `p` covariates: mtry = max(1, p/3),
    /// min_arm 5, min_node 20, max_depth 30, SSS splitting with a = 10.
    pub fn default_for(p: usize) -> TreeParams {
        TreeParams {
            mtry: (p / 3).max(1),
            min_arm: 5,
            min_node: 20,
            max_depth: 30,
            split_method: SplitMethod::Sss,
            sss: SssConfig::default(),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.mtry == 0 || self.mtry > p {
            return Err(Error::InvalidData(format!(
                "mtry must be in 1..={p}, got {}",
                self.mtry
            )));
        }
        if self.min_arm == 0 {
            return Err(Error::InvalidData("min_arm must be at least 1".into()));
        }
        if self.min_node < 2 * self.min_arm {
            return Err(Error::InvalidData(format!(
                "min_node ({}) must be at least 2*min_arm ({})",
                self.min_node,
                2 * self.min_arm
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        covariate: usize,
        name: String,
        cutpoint: f64,
        left: usize,
        right: usize,
    },
    Terminal {
        effect: f64,
        n1: f64,
        n0: f64,
    },
}

/// A grown interaction tree: node 0 is the root. `encodings` maps nominal
/// column index -> ordinal code per level index, fixed at the root from the
/// tree's own bootstrap-weighted sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionTree {
    pub nodes: Vec<TreeNode>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub encodings: BTreeMap<usize, Vec<u32>>,
}

impl InteractionTree {
    pub fn n_terminals(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Terminal { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Terminal { .. } => 0,
                TreeNode::Internal { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Treated-minus-control weighted mean difference over one node's rows.
/// `None` when either arm is empty.
pub fn terminal_effect(y: &[f64], t: &[u8], w: &[u16], rows: &[usize]) -> Option<(f64, f64, f64)> {
    let mut cnt = [0.0f64; 2];
    let mut sum = [0.0f64; 2];
    for &i in rows {
        let wi = w[i] as f64;
        let arm = t[i] as usize;
        cnt[arm] += wi;
        sum[arm] += wi * y[i];
    }
    if cnt[0] == 0.0 || cnt[1] == 0.0 {
        return None;
    }
    Some((sum[1] / cnt[1] - sum[0] / cnt[0], cnt[1], cnt[0]))
}

struct Grower<'a> {
    data: &'a TrialDataset,
    weights: &'a [u16],
    params: &'a TreeParams,
    encodings: BTreeMap<usize, Vec<u32>>,
    nodes: Vec<TreeNode>,
}

impl<'a> Grower<'a> {
    /// Covariate value of row `i` on the splitting scale (ordinal code for
    /// nominal columns).
    fn value(&self, j: usize, i: usize) -> f64 {
        let raw = self.data.column(j)[i];
        match self.encodings.get(&j) {
            Some(ranks) => ranks[raw as usize] as f64,
            None => raw,
        }
    }

    fn best_candidate(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<SplitCandidate> {
        let p = self.data.p();
        let mut drawn: Vec<usize> = index_sample(rng, p, self.params.mtry.min(p)).into_vec();
        drawn.sort_unstable();

        let y: Vec<f64> = rows.iter().map(|&i| self.data.y()[i]).collect();
        let t: Vec<u8> = rows.iter().map(|&i| self.data.t()[i]).collect();
        let w: Vec<u16> = rows.iter().map(|&i| self.weights[i]).collect();
        let min_arm = self.params.min_arm as f64;

        let mut best: Option<SplitCandidate> = None;
        for &j in &drawn {
            let x: Vec<f64> = rows.iter().map(|&i| self.value(j, i)).collect();
            let nominal = self.data.columns()[j].kind == ColumnKind::Nominal;
            // Ordinal codes have at most L-1 admissible cuts, so exhaustive
            // search is used for them regardless of the configured method.
            let candidate = if nominal || self.params.split_method == SplitMethod::Gs {
                greedy_best_cut(&x, &y, &t, &w, min_arm, j)
            } else {
                sss_best_cut(&x, &y, &t, &w, min_arm, &self.params.sss, j)
            };
            if candidate.valid && best.map_or(true, |b| candidate.q > b.q) {
                best = Some(candidate);
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let weight_sum: u64 = rows.iter().map(|&i| self.weights[i] as u64).sum();
        let y0 = self.data.y()[rows[0]];
        let constant_y = rows.iter().all(|&i| self.data.y()[i] == y0);

        let candidate = if depth >= self.params.max_depth
            || (weight_sum as usize) < self.params.min_node
            || constant_y
        {
            None
        } else {
            self.best_candidate(&rows, rng)
        };

        match candidate {
            None => self.push_terminal(&rows),
            Some(split) => {
                let mut left_rows = Vec::new();
                let mut right_rows = Vec::new();
                for &i in &rows {
                    if self.value(split.covariate, i) <= split.cutpoint {
                        left_rows.push(i);
                    } else {
                        right_rows.push(i);
                    }
                }
                // A valid candidate guarantees both children hold min_arm
                // per arm, hence both are nonempty.
                debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
                let at = self.nodes.len();
                self.nodes.push(TreeNode::Internal {
                    covariate: split.covariate,
                    name: self.data.columns()[split.covariate].name.clone(),
                    cutpoint: split.cutpoint,
                    left: 0,
                    right: 0,
                });
                let left = self.grow(left_rows, depth + 1, rng);
                let right = self.grow(right_rows, depth + 1, rng);
                if let TreeNode::Internal {
                    left: l, right: r, ..
                } = &mut self.nodes[at]
                {
                    *l = left;
                    *r = right;
                }
                at
            }
        }
    }

    fn push_terminal(&mut self, rows: &[usize]) -> usize {
        let (effect, n1, n0) =
            terminal_effect(self.data.y(), self.data.t(), self.weights, rows)
                .expect("terminal node lost an arm; growth must prevent this");
        self.nodes.push(TreeNode::Terminal { effect, n1, n0 });
        self.nodes.len() - 1
    }
}

/// Grows one interaction tree on the weighted sample. The rng stream drives
/// the per-node covariate draws; identical inputs give identical trees.
pub fn grow_tree(
    data: &TrialDataset,
    weights: &[u16],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<InteractionTree> {
    params.validate(data.p())?;
    if weights.len() != data.n() {
        return Err(Error::InvalidData(format!(
            "weights length {} != dataset rows {}",
            weights.len(),
            data.n()
        )));
    }
    let rows: Vec<usize> = (0..data.n()).filter(|&i| weights[i] > 0).collect();
    let mut arm = [0u64; 2];
    for &i in &rows {
        arm[data.t()[i] as usize] += weights[i] as u64;
    }
    let min_arm = params.min_arm as u64;
    if arm[1] < min_arm {
        return Err(Error::RootInadmissible(format!(
            "treated arm has weighted count {} < min_arm {}",
            arm[1], min_arm
        )));
    }
    if arm[0] < min_arm {
        return Err(Error::RootInadmissible(format!(
            "control arm has weighted count {} < min_arm {}",
            arm[0], min_arm
        )));
    }

    // Per-tree ordinalization of nominal columns from the weighted sample.
    let mut encodings = BTreeMap::new();
    for (j, meta) in data.columns().iter().enumerate() {
        if meta.kind == ColumnKind::Nominal {
            let n_levels = meta.levels.as_ref().map_or(0, Vec::len);
            let ranks = rank_levels(n_levels, data.column(j), data.y(), data.t(), weights);
            encodings.insert(j, ranks);
        }
    }

    let mut grower = Grower {
        data,
        weights,
        params,
        encodings,
        nodes: Vec::new(),
    };
    let root_rows = rows;
    let root = grower.grow(root_rows, 0, rng);
    debug_assert_eq!(root, 0);
    Ok(InteractionTree {
        nodes: grower.nodes,
        encodings: grower.encodings,
    })
}

/// Routes a covariate row (dataset scale; nominal columns as level indices)
/// to its terminal effect.
pub fn predict_tree(tree: &InteractionTree, row: &[f64]) -> Result<f64> {
    let mut at = 0;
    loop {
        match &tree.nodes[at] {
            TreeNode::Terminal { effect, .. } => return Ok(*effect),
            TreeNode::Internal {
                covariate,
                name,
                cutpoint,
                left,
                right,
            } => {
                let raw = *row.get(*covariate).ok_or_else(|| {
                    Error::Prediction(format!("row is missing covariate `{name}`"))
                })?;
                if raw.is_nan() {
                    return Err(Error::Prediction(format!(
                        "missing value for tested covariate `{name}`"
                    )));
                }
                let value = match tree.encodings.get(covariate) {
                    Some(ranks) => {
                        let level = raw as usize;
                        if raw < 0.0 || raw.fract() != 0.0 || level >= ranks.len() {
                            return Err(Error::Prediction(format!(
                                "value {raw} is not a level index of nominal covariate `{name}`"
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
