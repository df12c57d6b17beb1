//! Synthetic data generators and the four reference experiments: cutpoint
//! recovery, ensemble-vs-separate-regression MSE, standard-error validation,
//! and split-search timing.
//!
//! Every experiment is deterministic given its config and seed: replicates
//! run in parallel under per-replicate derived seeds and reports are
//! assembled in replicate order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{ColumnMeta, TrialDataset};
use crate::error::{Error, Result};
use crate::forest::{fit_rfit, ForestParams};
use crate::rng::{derive_seed, stream_rng};
use crate::split::{
    greedy_best_cut, naive_best_cut, sss_best_cut, SplitMethod, SssConfig,
};
use crate::sr::fit_sr;
use crate::tree::TreeParams;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Synthetic ITE processes on x in [0,1]^5. `Constant` is a sanity model
/// with a flat unit effect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IteModelId {
    I,
    II,
    III,
    IV,
    Constant,
}

impl IteModelId {
    pub const DIM: usize = 5;

    pub fn delta(&self, x: &[f64]) -> f64 {
        match self {
            IteModelId::I => -2.0 + 2.0 * x[0] + 2.0 * x[1],
            IteModelId::II => {
                -2.0 + 2.0 * indicator(x[0] <= 0.5)
                    + 2.0 * indicator(x[1] <= 0.5) * indicator(x[2] <= 0.5)
            }
            IteModelId::III => {
                -6.0 + 0.1 * (4.0 * x[0]).exp()
                    + 4.0 / (1.0 + (-20.0 * (x[1] - 0.5)).exp())
                    + 3.0 * x[2]
                    + 2.0 * x[3]
                    + x[4]
            }
            IteModelId::IV => {
                -10.0 + 10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.5) * (x[2] - 0.5)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
            IteModelId::Constant => 1.0,
        }
    }

    /// Control-arm mean: a nonlinear polynomial shared by all models.
    pub fn mu0(x: &[f64]) -> f64 {
        -2.0 - 2.0 * x[0] - 2.0 * x[1] * x[1] + 2.0 * x[2] * x[2] * x[2]
    }

    pub fn parse(s: &str) -> Result<IteModelId> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(IteModelId::I),
            "II" | "2" => Ok(IteModelId::II),
            "III" | "3" => Ok(IteModelId::III),
            "IV" | "4" => Ok(IteModelId::IV),
            "CONST" | "CONSTANT" => Ok(IteModelId::Constant),
            other => Err(Error::Schema(format!(
                "unknown model `{other}` (expected I, II, III, IV, or const)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            IteModelId::I => "I",
            IteModelId::II => "II",
            IteModelId::III => "III",
            IteModelId::IV => "IV",
            IteModelId::Constant => "const",
        }
    }

    fn code(&self) -> f64 {
        match self {
            IteModelId::I => 1.0,
            IteModelId::II => 2.0,
            IteModelId::III => 3.0,
            IteModelId::IV => 4.0,
            IteModelId::Constant => 0.0,
        }
    }
}

fn indicator(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// One-covariate threshold process: y = 0.5 + 0.5 T + 0.5 D + 0.5 T D + e
/// with D = I(x >= c0). `k = 0` draws x from uniform[0,1]; `k >= 2` from the
/// discrete uniform over {1/k, ..., k/k}. `noise_sd` scales e (0 gives the
/// noiseless test hook).
pub fn gen_model_a(
    n: usize,
    k: usize,
    c0: f64,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrialDataset> {
    if n < 10 {
        return Err(Error::InvalidData("model A needs n >= 10".into()));
    }
    if k == 1 {
        return Err(Error::InvalidData("k must be 0 (continuous) or >= 2".into()));
    }
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = if k == 0 {
            rng.random_range(0.0..1.0)
        } else {
            (rng.random_range(1..=k) as f64) / k as f64
        };
        let ti = u8::from(rng.random_bool(0.5));
        let d = indicator(xi >= c0);
        let eps = noise_sd * normal(rng);
        x.push(xi);
        t.push(ti);
        y.push(0.5 + 0.5 * ti as f64 + 0.5 * d + 0.5 * ti as f64 * d + eps);
    }
    TrialDataset::new(y, t, vec![x], vec![ColumnMeta::continuous("x")])
}

/// Draws a trial from one of the ITE models. Returns the observed dataset,
/// the true effect per row, and the (control, treated) potential outcomes.
pub fn gen_ite_model(
    model: IteModelId,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(TrialDataset, Vec<f64>, Vec<(f64, f64)>)> {
    if n < 10 {
        return Err(Error::InvalidData("ITE models need n >= 10".into()));
    }
    let p = IteModelId::DIM;
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut potential = Vec::with_capacity(n);
    let mut x = [0.0f64; IteModelId::DIM];
    for _ in 0..n {
        for item in &mut x {
            *item = rng.random_range(0.0..1.0);
        }
        let alpha = normal(rng);
        let eps0 = normal(rng);
        let eps1 = normal(rng);
        let ti = u8::from(rng.random_bool(0.5));
        let d = model.delta(&x);
        let mu0 = IteModelId::mu0(&x);
        let y0 = mu0 + alpha + eps0;
        let y1 = mu0 + d + alpha + eps1;
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(x[j]);
        }
        y.push(if ti == 1 { y1 } else { y0 });
        t.push(ti);
        delta.push(d);
        potential.push((y0, y1));
    }
    let columns = (1..=p)
        .map(|j| ColumnMeta::continuous(format!("x{j}")))
        .collect();
    let ds = TrialDataset::new(y, t, cols, columns)?;
    Ok((ds, delta, potential))
}

/// Per-experiment output: config echo, per-replicate (or per-point) rows in
/// flat CSV shape, and a summary recomputable from the rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: serde_json::Value,
}

impl ExperimentReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Cutpoint recovery study
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutpointConfig {
    pub n: usize,
    pub replicates: usize,
    pub a_grid: Vec<f64>,
    pub c0: f64,
    pub noise_sd: f64,
    pub min_arm: usize,
    pub seed: u64,
}

impl Default for CutpointConfig {
    fn default() -> Self {
        CutpointConfig {
            n: 500,
            replicates: 200,
            a_grid: vec![1.0, 5.0, 10.0, 25.0, 50.0, 100.0],
            c0: 0.5,
            noise_sd: 1.0,
            min_arm: 5,
            seed: 42,
        }
    }
}

/// Per replicate: the best cut by greedy search and by SSS at every shape
/// value in the grid; summarized by MSE against the true cutoff.
pub fn run_cutpoint_study(cfg: &CutpointConfig) -> Result<ExperimentReport> {
    if cfg.replicates < 10 {
        return Err(Error::InvalidData("cutpoint study needs >= 10 replicates".into()));
    }
    let rows: Result<Vec<Vec<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(cfg.seed, rep as u64);
            let mut rng = stream_rng(rep_seed, 0);
            let ds = gen_model_a(cfg.n, 0, cfg.c0, cfg.noise_sd, &mut rng)?;
            let x = ds.column(0);
            let w = vec![1u16; ds.n()];
            let min_arm = cfg.min_arm as f64;
            let gs = greedy_best_cut(x, ds.y(), ds.t(), &w, min_arm, 0);
            let mut row = vec![rep as f64, gs.cutpoint];
            for &a in &cfg.a_grid {
                let sss_cfg = SssConfig { a, ..SssConfig::default() };
                let cand = sss_best_cut(x, ds.y(), ds.t(), &w, min_arm, &sss_cfg, 0);
                row.push(cand.cutpoint);
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;

    let mut columns = vec!["rep".to_string(), "c_gs".to_string()];
    for &a in &cfg.a_grid {
        columns.push(format!("c_sss_a{a}"));
    }

    let mse_of = |col: usize| -> f64 {
        rows.iter()
            .map(|r| (r[col] - cfg.c0) * (r[col] - cfg.c0))
            .sum::<f64>()
            / rows.len() as f64
    };
    let mse_gs = mse_of(1);
    let mut mse_sss = serde_json::Map::new();
    for (k, &a) in cfg.a_grid.iter().enumerate() {
        mse_sss.insert(format!("{a}"), json!(mse_of(2 + k)));
    }

    Ok(ExperimentReport {
        experiment: "cutpoint".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        columns,
        rows,
        summary: json!({ "mse_gs": mse_gs, "mse_sss": mse_sss }),
    })
}

// ---------------------------------------------------------------------------
// Ensemble vs separate regression MSE study
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MseConfig {
    pub models: Vec<IteModelId>,
    pub n: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub b: usize,
    pub mtry: usize,
    pub min_node: usize,
    pub min_arm: usize,
    pub max_depth: usize,
    pub split_method: SplitMethod,
    pub a: f64,
    pub seed: u64,
}

impl Default for MseConfig {
    fn default() -> Self {
        MseConfig {
            models: vec![IteModelId::I, IteModelId::II, IteModelId::III, IteModelId::IV],
            n: 200,
            n_test: 500,
            replicates: 50,
            b: 200,
            mtry: 3,
            min_node: 20,
            min_arm: 5,
            max_depth: 30,
            split_method: SplitMethod::Sss,
            a: 10.0,
            seed: 42,
        }
    }
}

impl MseConfig {
    fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams {
            b: self.b,
            tree: TreeParams {
                mtry: self.mtry,
                min_arm: self.min_arm,
                min_node: self.min_node,
                max_depth: self.max_depth,
                split_method: self.split_method,
                sss: SssConfig { a: self.a, ..SssConfig::default() },
            },
            seed,
        }
    }
}

/// Trains both estimators per replicate and scores them on a fixed test
/// sample per model; also accumulates the bias scatter (mean prediction vs
/// true effect per test point).
pub fn run_mse_study(cfg: &MseConfig) -> Result<ExperimentReport> {
    if cfg.models.is_empty() {
        return Err(Error::InvalidData("mse study needs at least one model".into()));
    }
    let mut rows = Vec::new();
    let mut per_model = serde_json::Map::new();
    for (mi, &model) in cfg.models.iter().enumerate() {
        let model_seed = derive_seed(cfg.seed, 0x4D00 + mi as u64);
        // Test sample generated once, before the replicate loop.
        let mut test_rng = stream_rng(derive_seed(model_seed, 0xE57), 0);
        let (test_ds, test_delta, _) = gen_ite_model(model, cfg.n_test, &mut test_rng)?;
        let test_rows: Vec<Vec<f64>> = (0..test_ds.n()).map(|i| test_ds.row(i)).collect();

        let replicate_out: Result<Vec<(f64, f64, Vec<f64>, Vec<f64>)>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = derive_seed(model_seed, rep as u64);
                let mut rng = stream_rng(rep_seed, 0);
                let (train, _, _) = gen_ite_model(model, cfg.n, &mut rng)?;

                let rfit = fit_rfit(&train, &cfg.forest_params(derive_seed(rep_seed, 1)))?;
                let sr = fit_sr(&train, &cfg.forest_params(derive_seed(rep_seed, 2)))?;

                let mut pred_rfit = Vec::with_capacity(test_rows.len());
                let mut pred_sr = Vec::with_capacity(test_rows.len());
                for row in &test_rows {
                    pred_rfit.push(rfit.predict_ite(row)?.0);
                    pred_sr.push(sr.predict(row)?);
                }
                let mse = |preds: &[f64]| -> f64 {
                    preds
                        .iter()
                        .zip(&test_delta)
                        .map(|(p, d)| (p - d) * (p - d))
                        .sum::<f64>()
                        / preds.len() as f64
                };
                Ok((mse(&pred_rfit), mse(&pred_sr), pred_rfit, pred_sr))
            })
            .collect();
        let replicate_out = replicate_out?;

        let mut scatter_rfit = vec![0.0f64; test_rows.len()];
        let mut scatter_sr = vec![0.0f64; test_rows.len()];
        let mut mse_rfit = Vec::with_capacity(cfg.replicates);
        let mut mse_sr = Vec::with_capacity(cfg.replicates);
        for (rep, (mr, ms, pr, ps)) in replicate_out.into_iter().enumerate() {
            rows.push(vec![model.code(), rep as f64, mr, ms]);
            mse_rfit.push(mr);
            mse_sr.push(ms);
            for i in 0..test_rows.len() {
                scatter_rfit[i] += pr[i];
                scatter_sr[i] += ps[i];
            }
        }
        let reps = cfg.replicates as f64;
        for v in scatter_rfit.iter_mut().chain(scatter_sr.iter_mut()) {
            *v /= reps;
        }

        per_model.insert(
            model.label().to_string(),
            json!({
                "amse_rfit": mean(&mse_rfit),
                "amse_sr": mean(&mse_sr),
                "sd_mse_rfit": sample_sd(&mse_rfit),
                "sd_mse_sr": sample_sd(&mse_sr),
                "scatter": {
                    "delta_true": test_delta,
                    "mean_pred_rfit": scatter_rfit,
                    "mean_pred_sr": scatter_sr,
                },
            }),
        );
    }

    Ok(ExperimentReport {
        experiment: "mse".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        columns: vec![
            "model".into(),
            "rep".into(),
            "mse_rfit".into(),
            "mse_sr".into(),
        ],
        rows,
        summary: json!({ "per_model": per_model }),
    })
}

// ---------------------------------------------------------------------------
// Standard-error validation study
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeConfig {
    pub model: IteModelId,
    pub n: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub b: usize,
    pub mtry: usize,
    pub min_node: usize,
    pub min_arm: usize,
    pub max_depth: usize,
    pub split_method: SplitMethod,
    pub a: f64,
    pub seed: u64,
}

impl Default for SeConfig {
    fn default() -> Self {
        SeConfig {
            model: IteModelId::III,
            n: 200,
            n_test: 20,
            replicates: 100,
            b: 2000,
            mtry: 3,
            min_node: 20,
            min_arm: 5,
            max_depth: 30,
            split_method: SplitMethod::Sss,
            a: 10.0,
            seed: 42,
        }
    }
}

impl SeConfig {
    fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams {
            b: self.b,
            tree: TreeParams {
                mtry: self.mtry,
                min_arm: self.min_arm,
                min_node: self.min_node,
                max_depth: self.max_depth,
                split_method: self.split_method,
                sss: SssConfig { a: self.a, ..SssConfig::default() },
            },
            seed,
        }
    }
}

/// Validates the jackknife standard errors: per test point, the replicate
/// standard deviation of the estimate is compared with the averaged raw and
/// corrected standard errors.
pub fn run_se_study(cfg: &SeConfig) -> Result<ExperimentReport> {
    let mut test_rng = stream_rng(derive_seed(cfg.seed, 0x5E), 0);
    let (test_ds, test_delta, _) = gen_ite_model(cfg.model, cfg.n_test, &mut test_rng)?;
    let test_rows: Vec<Vec<f64>> = (0..test_ds.n()).map(|i| test_ds.row(i)).collect();

    struct RepOut {
        estimate: Vec<f64>,
        se_raw: Vec<f64>,
        se_c0: Vec<f64>,
        se_c: Vec<f64>,
        clamped_c0: Vec<bool>,
        clamped_c: Vec<bool>,
    }

    let outs: Result<Vec<RepOut>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(cfg.seed, rep as u64);
            let mut rng = stream_rng(rep_seed, 0);
            let (train, _, _) = gen_ite_model(cfg.model, cfg.n, &mut rng)?;
            let forest = fit_rfit(&train, &cfg.forest_params(derive_seed(rep_seed, 1)))?;
            let preds = forest.predict_with_se(&test_rows)?;
            Ok(RepOut {
                estimate: preds.iter().map(|p| p.estimate).collect(),
                se_raw: preds.iter().map(|p| p.var_raw.sqrt()).collect(),
                se_c0: preds.iter().map(|p| p.var_c0.sqrt()).collect(),
                se_c: preds.iter().map(|p| p.var_c.sqrt()).collect(),
                clamped_c0: preds.iter().map(|p| p.clamped_c0).collect(),
                clamped_c: preds.iter().map(|p| p.clamped_c).collect(),
            })
        })
        .collect();
    let outs = outs?;

    let mut rows = Vec::with_capacity(cfg.n_test);
    let mut ratios = Vec::with_capacity(cfg.n_test);
    let mut clamp_total = 0usize;
    for i in 0..cfg.n_test {
        let estimates: Vec<f64> = outs.iter().map(|o| o.estimate[i]).collect();
        let sd = sample_sd(&estimates);
        let se_raw = mean(&outs.iter().map(|o| o.se_raw[i]).collect::<Vec<_>>());
        let se_c0 = mean(&outs.iter().map(|o| o.se_c0[i]).collect::<Vec<_>>());
        let se_c = mean(&outs.iter().map(|o| o.se_c[i]).collect::<Vec<_>>());
        let clamped_c0 = outs.iter().filter(|o| o.clamped_c0[i]).count();
        let clamped_c = outs.iter().filter(|o| o.clamped_c[i]).count();
        clamp_total += clamped_c + clamped_c0;
        ratios.push(se_c / sd);
        rows.push(vec![
            i as f64,
            test_delta[i],
            mean(&estimates),
            sd,
            se_raw,
            se_c0,
            se_c,
            clamped_c0 as f64,
            clamped_c as f64,
        ]);
    }

    Ok(ExperimentReport {
        experiment: "se".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        columns: vec![
            "point".into(),
            "delta_true".into(),
            "mean_estimate".into(),
            "sd".into(),
            "se_raw_mean".into(),
            "se_c0_mean".into(),
            "se_c_mean".into(),
            "clamped_c0_count".into(),
            "clamped_c_count".into(),
        ],
        rows,
        summary: json!({
            "median_ratio_se_c_over_sd": median(&ratios),
            "clamp_events": clamp_total,
        }),
    })
}

// ---------------------------------------------------------------------------
// Split-search timing bench
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingConfig {
    pub n_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub repeats: usize,
    pub min_arm: usize,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            n_grid: vec![50, 100, 500, 1000, 2000, 5000, 10000],
            k_grid: vec![10, 100, 500],
            repeats: 10,
            min_arm: 5,
            seed: 42,
        }
    }
}

/// Wall-times the three split searches (naive greedy, updating greedy, SSS)
/// per (n, K) cell, averaged over `repeats` runs after one discarded warm-up.
/// Only the split-finding call is timed; data generation is excluded.
pub fn run_timing_bench(cfg: &TimingConfig) -> Result<ExperimentReport> {
    if cfg.n_grid.is_empty() || cfg.k_grid.is_empty() {
        return Err(Error::InvalidData("timing bench needs nonempty grids".into()));
    }
    let sss_cfg = SssConfig::default();
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        for &k in &cfg.k_grid {
            let mut rng = stream_rng(derive_seed(cfg.seed, (n as u64) << 16 | k as u64), 0);
            let ds = gen_model_a(n, k, 0.5, 1.0, &mut rng)?;
            let x = ds.column(0);
            let y = ds.y();
            let t = ds.t();
            let w = vec![1u16; n];
            let min_arm = cfg.min_arm as f64;

            let time_call = |f: &dyn Fn() -> f64| -> (f64, f64) {
                let mut value = f(); // warm-up, discarded from timing
                let mut total = 0.0;
                for _ in 0..cfg.repeats {
                    let start = Instant::now();
                    value = f();
                    total += start.elapsed().as_secs_f64();
                }
                (total / cfg.repeats as f64, value)
            };

            let (t_naive, _) =
                time_call(&|| naive_best_cut(x, y, t, &w, min_arm, 0).cutpoint);
            let (t_update, c_gs) =
                time_call(&|| greedy_best_cut(x, y, t, &w, min_arm, 0).cutpoint);
            let (t_sss, c_sss) =
                time_call(&|| sss_best_cut(x, y, t, &w, min_arm, &sss_cfg, 0).cutpoint);

            rows.push(vec![
                n as f64, k as f64, t_naive, t_update, t_sss, c_gs, c_sss,
            ]);
        }
    }

    // Table-shaped summary plus the headline ratio at the largest cell.
    let largest = rows
        .iter()
        .max_by(|a, b| (a[0] * a[1]).partial_cmp(&(b[0] * b[1])).unwrap())
        .unwrap();
    let summary = json!({
        "largest_cell": { "n": largest[0], "k": largest[1] },
        "naive_gs_over_sss": largest[2] / largest[4],
        "update_gs_over_sss": largest[3] / largest[4],
    });

    Ok(ExperimentReport {
        experiment: "timing".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        columns: vec![
            "n".into(),
            "k".into(),
            "t_naive_gs".into(),
            "t_update_gs".into(),
            "t_sss".into(),
            "c_gs".into(),
            "c_sss".into(),
        ],
        rows,
        summary,
    })
}
