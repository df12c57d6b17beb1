//! The RFIT ensemble: bootstrap-resampled interaction trees, averaged
//! predictions, and infinitesimal-jackknife variance with bias corrections.
//!
//! Resamples are drawn as multinomial count vectors because the jackknife
//! formulas consume the inclusion counts N_bi directly. Tree b derives its
//! random stream from (seed, b), so parallel and serial fits are identical.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnMeta, TrialDataset};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::tree::{grow_tree, predict_tree, InteractionTree, TreeParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    /// Number of bootstrap trees.
    pub b: usize,
    pub tree: TreeParams,
    pub seed: u64,
}

impl ForestParams {
    pub fn default_for(p: usize, seed: u64) -> ForestParams {
        ForestParams {
            b: 2000,
            tree: TreeParams::default_for(p),
            seed,
        }
    }
}

/// A fitted forest plus the B x n bootstrap count matrix needed for the
/// jackknife variance. Immutable and shareable once fit.
#[derive(Clone, Debug)]
pub struct RfitForest {
    pub trees: Vec<InteractionTree>,
    counts: Vec<u16>,
    n: usize,
    pub params: ForestParams,
    pub columns: Vec<ColumnMeta>,
    pub response_name: String,
    pub treatment_name: String,
}

/// Point estimate with raw and bias-corrected variance estimates. Corrected
/// variances are clamped at zero; the flags record when clamping fired.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ItePrediction {
    pub estimate: f64,
    pub var_raw: f64,
    pub var_c0: f64,
    pub var_c: f64,
    pub clamped_c0: bool,
    pub clamped_c: bool,
}

/// Variance variant selected for reporting; `C` is the cheap correction and
/// the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeVariant {
    Raw,
    C0,
    #[default]
    C,
}

impl std::str::FromStr for SeVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(SeVariant::Raw),
            "c0" => Ok(SeVariant::C0),
            "c" => Ok(SeVariant::C),
            other => Err(format!("unknown SE variant `{other}` (expected raw|c0|c)")),
        }
    }
}

impl ItePrediction {
    pub fn variance(&self, variant: SeVariant) -> f64 {
        match variant {
            SeVariant::Raw => self.var_raw,
            SeVariant::C0 => self.var_c0,
            SeVariant::C => self.var_c,
        }
    }

    pub fn se(&self, variant: SeVariant) -> f64 {
        self.variance(variant).sqrt()
    }
}

const MAX_RESAMPLE_RETRIES: usize = 100;

fn draw_counts(n: usize, rng: &mut impl Rng) -> Vec<u16> {
    let mut counts = vec![0u16; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

fn resample_admissible(counts: &[u16], t: &[u8], min_arm: u64) -> bool {
    let mut arm = [0u64; 2];
    for (i, &c) in counts.iter().enumerate() {
        arm[t[i] as usize] += c as u64;
    }
    arm[0] >= min_arm && arm[1] >= min_arm
}

/// Fits the ensemble: B multinomial resamples of size n, one interaction
/// tree per resample. A resample whose arm falls under min_arm is redrawn
/// (up to 100 times) from the same stream.
pub fn fit_rfit(data: &TrialDataset, params: &ForestParams) -> Result<RfitForest> {
    if params.b == 0 {
        return Err(Error::InvalidData("forest needs at least one tree".into()));
    }
    params.tree.validate(data.p())?;

    let fitted: Result<Vec<(Vec<u16>, InteractionTree)>> = (0..params.b)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(params.seed, b as u64);
            let min_arm = params.tree.min_arm as u64;
            let mut counts = draw_counts(data.n(), &mut rng);
            let mut retries = 0;
            while !resample_admissible(&counts, data.t(), min_arm) {
                retries += 1;
                if retries > MAX_RESAMPLE_RETRIES {
                    return Err(Error::RootInadmissible(format!(
                        "bootstrap resample for tree {b} kept an arm below min_arm \
                         after {MAX_RESAMPLE_RETRIES} redraws"
                    )));
                }
                counts = draw_counts(data.n(), &mut rng);
            }
            let tree = grow_tree(data, &counts, &params.tree, &mut rng)?;
            Ok((counts, tree))
        })
        .collect();
    let fitted = fitted?;

    let mut counts = Vec::with_capacity(params.b * data.n());
    let mut trees = Vec::with_capacity(params.b);
    for (c, tree) in fitted {
        counts.extend_from_slice(&c);
        trees.push(tree);
    }
    Ok(RfitForest {
        trees,
        counts,
        n: data.n(),
        params: *params,
        columns: data.columns().to_vec(),
        response_name: data.response_name().to_string(),
        treatment_name: data.treatment_name().to_string(),
    })
}

/// Raw and bias-corrected infinitesimal-jackknife variances (pre-clamp).
#[derive(Clone, Copy, Debug)]
pub struct IjVariance {
    pub v_raw: f64,
    pub v_c0: f64,
    pub v_c: f64,
}

/// Infinitesimal-jackknife variance of a bagged prediction from the
/// inclusion-count matrix and the per-tree predictions.
///
/// Z_bi = (N_bi - 1)(pred_b - estimate); Zbar_i is its mean over trees.
/// The raw estimate is sum_i Zbar_i^2; the first correction subtracts the
/// within-tree Monte Carlo spread of Z, the second its independence
/// approximation (n-1)/B^2 * sum_b (pred_b - estimate)^2.
pub fn ij_variance(counts: &[u16], n: usize, preds: &[f64], estimate: f64) -> IjVariance {
    let b = preds.len();
    assert!(b >= 2, "jackknife needs at least two trees");
    assert_eq!(counts.len(), b * n, "counts matrix shape mismatch");
    let bf = b as f64;

    let d: Vec<f64> = preds.iter().map(|p| p - estimate).collect();

    let mut zbar = vec![0.0f64; n];
    for (bi, db) in d.iter().enumerate() {
        let row = &counts[bi * n..(bi + 1) * n];
        for i in 0..n {
            zbar[i] += (row[i] as f64 - 1.0) * db;
        }
    }
    for z in &mut zbar {
        *z /= bf;
    }
    let v_raw: f64 = zbar.iter().map(|z| z * z).sum();

    let mut spread = 0.0f64;
    for (bi, db) in d.iter().enumerate() {
        let row = &counts[bi * n..(bi + 1) * n];
        for i in 0..n {
            let z = (row[i] as f64 - 1.0) * db;
            let dev = z - zbar[i];
            spread += dev * dev;
        }
    }
    let v_c0 = v_raw - spread / (bf * bf);

    let sum_d2: f64 = d.iter().map(|v| v * v).sum();
    let v_c = v_raw - (n as f64 - 1.0) / (bf * bf) * sum_d2;

    IjVariance { v_raw, v_c0, v_c }
}

impl RfitForest {
    pub fn b(&self) -> usize {
        self.params.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Bootstrap count of row `i` in resample `b`.
    pub fn count(&self, b: usize, i: usize) -> u16 {
        self.counts[b * self.n + i]
    }

    pub fn counts(&self) -> &[u16] {
        &self.counts
    }

    /// Ensemble ITE estimate for one covariate row, plus the per-tree
    /// predictions used by the variance formulas.
    pub fn predict_ite(&self, row: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut preds = Vec::with_capacity(self.trees.len());
        for tree in &self.trees {
            preds.push(predict_tree(tree, row)?);
        }
        let estimate = preds.iter().sum::<f64>() / preds.len() as f64;
        Ok((estimate, preds))
    }

    pub fn predict_one(&self, row: &[f64]) -> Result<ItePrediction> {
        let (estimate, preds) = self.predict_ite(row)?;
        let v = ij_variance(&self.counts, self.n, &preds, estimate);
        Ok(ItePrediction {
            estimate,
            var_raw: v.v_raw,
            var_c0: v.v_c0.max(0.0),
            var_c: v.v_c.max(0.0),
            clamped_c0: v.v_c0 < 0.0,
            clamped_c: v.v_c < 0.0,
        })
    }

    /// Batch prediction with standard errors; row order is preserved and
    /// matches single-row prediction exactly.
    pub fn predict_with_se(&self, rows: &[Vec<f64>]) -> Result<Vec<ItePrediction>> {
        rows.par_iter().map(|row| self.predict_one(row)).collect()
    }

    /// Writes `manifest.json` plus one `tree_<b>.json` per tree. The
    /// manifest carries the bootstrap count matrix so a reloaded model can
    /// reproduce standard errors.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = ForestManifest {
            format: FORMAT_TAG.to_string(),
            params: self.params,
            n: self.n,
            p: self.columns.len(),
            response: self.response_name.clone(),
            treatment: self.treatment_name.clone(),
            columns: self.columns.clone(),
            bootstrap_counts: (0..self.params.b)
                .map(|b| self.counts[b * self.n..(b + 1) * self.n].to_vec())
                .collect(),
        };
        let file = fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &manifest)?;
        for (b, tree) in self.trees.iter().enumerate() {
            let file = fs::File::create(dir.join(format!("tree_{b}.json")))?;
            serde_json::to_writer(std::io::BufWriter::new(file), tree)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<RfitForest> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: ForestManifest = serde_json::from_str(&text)?;
        if manifest.format != FORMAT_TAG {
            return Err(Error::Model(format!(
                "unsupported model format `{}`",
                manifest.format
            )));
        }
        if manifest.bootstrap_counts.len() != manifest.params.b {
            return Err(Error::Model("bootstrap count matrix has wrong row count".into()));
        }
        let mut counts = Vec::with_capacity(manifest.params.b * manifest.n);
        for row in &manifest.bootstrap_counts {
            if row.len() != manifest.n {
                return Err(Error::Model("bootstrap count row has wrong length".into()));
            }
            counts.extend_from_slice(row);
        }
        let mut trees = Vec::with_capacity(manifest.params.b);
        for b in 0..manifest.params.b {
            let text = fs::read_to_string(dir.join(format!("tree_{b}.json")))?;
            trees.push(serde_json::from_str(&text)?);
        }
        Ok(RfitForest {
            trees,
            counts,
            n: manifest.n,
            params: manifest.params,
            columns: manifest.columns,
            response_name: manifest.response,
            treatment_name: manifest.treatment,
        })
    }
}

const FORMAT_TAG: &str = "rfit-model/1";

#[derive(Serialize, Deserialize)]
struct ForestManifest {
    format: String,
    params: ForestParams,
    n: usize,
    p: usize,
    response: String,
    treatment: String,
    columns: Vec<ColumnMeta>,
    bootstrap_counts: Vec<Vec<u16>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnMeta;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn toy_dataset(seed: u64, n: usize) -> TrialDataset {
        let mut rng = stream_rng(seed, 500);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let delta = if x[i] <= 0.5 { 1.5 } else { -1.5 };
                t[i] as f64 * delta + rng.random_range(-1.0..1.0)
            })
            .collect();
        TrialDataset::new(y, t, vec![x], vec![ColumnMeta::continuous("x1")]).unwrap()
    }

    #[test]
    fn single_tree_forest_predicts_like_its_tree() {
        let ds = toy_dataset(1, 120);
        let mut params = ForestParams::default_for(1, 77);
        params.b = 1;
        let forest = fit_rfit(&ds, &params).unwrap();
        for i in (0..ds.n()).step_by(13) {
            let row = ds.row(i);
            let (estimate, preds) = forest.predict_ite(&row).unwrap();
            assert_eq!(preds.len(), 1);
            assert_eq!(estimate, preds[0]);
            assert_eq!(
                estimate,
                predict_tree(&forest.trees[0], &row).unwrap()
            );
        }
    }

    #[test]
    fn fixed_seed_reproduces_counts_and_trees() {
        let ds = toy_dataset(2, 100);
        let mut params = ForestParams::default_for(1, 9);
        params.b = 25;
        let f1 = fit_rfit(&ds, &params).unwrap();
        let f2 = fit_rfit(&ds, &params).unwrap();
        assert_eq!(f1.counts, f2.counts);
        assert_eq!(f1.trees, f2.trees);
    }

    #[test]
    fn count_matrix_rows_sum_to_n_and_mean_near_one() {
        let ds = toy_dataset(3, 60);
        let mut params = ForestParams::default_for(1, 4);
        params.b = 2000;
        params.tree.max_depth = 1; // keep the test fast
        let forest = fit_rfit(&ds, &params).unwrap();
        for b in 0..params.b {
            let total: u64 = (0..ds.n()).map(|i| forest.count(b, i) as u64).sum();
            assert_eq!(total, ds.n() as u64);
        }
        // Multinomial moment: E(N_bi) = 1.
        for i in 0..ds.n() {
            let mean = (0..params.b)
                .map(|b| forest.count(b, i) as f64)
                .sum::<f64>()
                / params.b as f64;
            assert!((0.9..=1.1).contains(&mean), "column {i} mean {mean}");
        }
    }

    #[test]
    fn ij_hand_enumerated_two_by_two() {
        // B=2, n=2, counts {(2,0),(0,2)}, preds {1,3}, estimate 2.
        // Enumerating Z: Z_11=-1, Z_12=+1, Z_21=-1, Z_22=+1, so
        // Zbar = (-1, 1), V = 2, the Z-spread correction is 0, and the
        // independence correction subtracts (2-1)/4 * 2 = 0.5.
        let counts = [2u16, 0, 0, 2];
        let preds = [1.0, 3.0];
        let v = ij_variance(&counts, 2, &preds, 2.0);
        assert_eq!(v.v_raw, 2.0);
        assert_eq!(v.v_c0, 2.0);
        assert_eq!(v.v_c, 1.5);
    }

    #[test]
    fn ij_zero_spread_when_trees_agree() {
        let counts = [2u16, 0, 1, 1, 0, 2, 1, 1];
        let preds = [0.75; 4];
        let v = ij_variance(&counts, 2, &preds, 0.75);
        assert_eq!(v.v_raw, 0.0);
        assert_eq!(v.v_c0, 0.0);
        assert_eq!(v.v_c, 0.0);
    }

    #[test]
    fn corrections_never_exceed_raw() {
        let mut rng = stream_rng(11, 0);
        for _ in 0..50 {
            let b = 20;
            let n = 10;
            let mut counts = vec![0u16; b * n];
            for row in 0..b {
                for _ in 0..n {
                    counts[row * n + rng.random_range(0..n)] += 1;
                }
            }
            let preds: Vec<f64> = (0..b).map(|_| rng.random_range(-2.0..2.0)).collect();
            let estimate = preds.iter().sum::<f64>() / b as f64;
            let v = ij_variance(&counts, n, &preds, estimate);
            assert!(v.v_raw >= v.v_c0);
            assert!(v.v_raw >= v.v_c);
        }
    }

    #[test]
    fn zbar_equals_count_prediction_covariance() {
        // Centering identity: mean_b (N_bi - 1) d_b equals the sample
        // covariance over b between N_bi and pred_b, because d has mean 0
        // and E(N_bi) enters through the explicit -1.
        let mut rng = stream_rng(12, 0);
        let b = 200;
        let n = 15;
        let mut counts = vec![0u16; b * n];
        for row in 0..b {
            for _ in 0..n {
                counts[row * n + rng.random_range(0..n)] += 1;
            }
        }
        let preds: Vec<f64> = (0..b).map(|_| rng.random_range(-1.0..1.0)).collect();
        let estimate = preds.iter().sum::<f64>() / b as f64;
        let d: Vec<f64> = preds.iter().map(|p| p - estimate).collect();

        for i in 0..n {
            let zbar: f64 = (0..b)
                .map(|row| (counts[row * n + i] as f64 - 1.0) * d[row])
                .sum::<f64>()
                / b as f64;
            let nbar: f64 = (0..b).map(|row| counts[row * n + i] as f64).sum::<f64>() / b as f64;
            let cov: f64 = (0..b)
                .map(|row| (counts[row * n + i] as f64 - nbar) * (preds[row] - estimate))
                .sum::<f64>()
                / b as f64;
            assert_abs_diff_eq!(zbar, cov, epsilon = 1e-12 * zbar.abs().max(1.0));
        }
    }

    #[test]
    fn corrections_agree_under_count_independence() {
        // With predictions shuffled independently of the counts, the two
        // bias corrections estimate the same Monte Carlo noise; they must
        // agree within a few percent of the raw variance.
        let ds = toy_dataset(5, 80);
        let mut params = ForestParams::default_for(1, 21);
        params.b = 2000;
        params.tree.max_depth = 2;
        let forest = fit_rfit(&ds, &params).unwrap();

        let mut rng = stream_rng(5, 99);
        let preds: Vec<f64> = (0..params.b).map(|_| rng.random_range(-1.0..1.0)).collect();
        let estimate = preds.iter().sum::<f64>() / params.b as f64;
        let v = ij_variance(forest.counts(), forest.n(), &preds, estimate);
        let gap = (v.v_c0 - v.v_c).abs();
        assert!(
            gap <= 0.05 * v.v_raw,
            "corrections diverge: c0={}, c={}, raw={}",
            v.v_c0,
            v.v_c,
            v.v_raw
        );
    }

    #[test]
    fn batch_prediction_matches_single_rows() {
        let ds = toy_dataset(6, 90);
        let mut params = ForestParams::default_for(1, 3);
        params.b = 60;
        let forest = fit_rfit(&ds, &params).unwrap();
        let rows: Vec<Vec<f64>> = (0..10).map(|i| ds.row(i * 7)).collect();
        let batch = forest.predict_with_se(&rows).unwrap();
        for (row, got) in rows.iter().zip(&batch) {
            let single = forest.predict_one(row).unwrap();
            assert_eq!(got.estimate, single.estimate);
            assert_eq!(got.var_raw, single.var_raw);
            assert_eq!(got.var_c0, single.var_c0);
            assert_eq!(got.var_c, single.var_c);
        }
    }

    #[test]
    fn forest_of_identical_stumps_has_zero_se() {
        let ds = toy_dataset(7, 50);
        let mut params = ForestParams::default_for(1, 13);
        params.b = 40;
        params.tree.max_depth = 0;
        let forest = fit_rfit(&ds, &params).unwrap();
        let pred = forest.predict_one(&ds.row(0)).unwrap();
        // Stump effects vary across resamples, so this is not exactly zero;
        // build a literal constant forest instead by reusing one tree.
        let mut constant = forest.clone();
        let tree0 = constant.trees[0].clone();
        for tree in &mut constant.trees {
            *tree = tree0.clone();
        }
        let pred0 = constant.predict_one(&ds.row(0)).unwrap();
        assert_eq!(pred0.var_raw, 0.0);
        assert_eq!(pred0.var_c0, 0.0);
        assert_eq!(pred0.var_c, 0.0);
        // And the general prediction is still finite and sane.
        assert!(pred.estimate.is_finite());
    }

    #[test]
    fn small_b_clamps_negative_corrected_variances() {
        let ds = toy_dataset(8, 100);
        let mut params = ForestParams::default_for(1, 31);
        params.b = 50;
        let forest = fit_rfit(&ds, &params).unwrap();
        let rows: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.row(i)).collect();
        let preds = forest.predict_with_se(&rows).unwrap();
        let clamped = preds.iter().filter(|p| p.clamped_c || p.clamped_c0).count();
        assert!(clamped > 0, "expected clamp flags at B=50");
        for p in &preds {
            assert!(p.var_c0 >= 0.0);
            assert!(p.var_c >= 0.0);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let ds = toy_dataset(9, 70);
        let mut params = ForestParams::default_for(1, 8);
        params.b = 12;
        let forest = fit_rfit(&ds, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        forest.save(dir.path()).unwrap();
        let loaded = RfitForest::load(dir.path()).unwrap();
        assert_eq!(forest.trees, loaded.trees);
        assert_eq!(forest.counts, loaded.counts);
        assert_eq!(forest.columns, loaded.columns);
        let row = ds.row(3);
        let a = forest.predict_one(&row).unwrap();
        let b = loaded.predict_one(&row).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.var_c, b.var_c);
    }
}
