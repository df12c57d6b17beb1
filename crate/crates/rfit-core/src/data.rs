//! Trial dataset representation and CSV ingestion.
//!
//! A [`TrialDataset`] holds a continuous response `y`, a binary treatment
//! indicator `t`, and a column-major covariate matrix of mixed types.
//! Nominal covariates are stored as indices into a lexicographically sorted
//! level list; the tree builder re-encodes them to ordinal ranks (by
//! per-level treatment effect) before splitting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Nominal,
}

/// Per-covariate metadata carried alongside the matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Lexicographically sorted level labels (nominal columns only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    /// Sample mean (continuous columns, populated at ingestion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    /// Sample standard deviation (continuous columns, populated at ingestion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Continuous,
            levels: None,
            mean: None,
            sd: None,
        }
    }

    pub fn nominal(name: impl Into<String>, levels: Vec<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Nominal,
            levels: Some(levels),
            mean: None,
            sd: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    #[default]
    Error,
    Drop,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(MissingPolicy::Error),
            "drop" => Ok(MissingPolicy::Drop),
            other => Err(Error::Schema(format!(
                "unknown on_missing policy `{other}` (expected `error` or `drop`)"
            ))),
        }
    }
}

/// Column roles for CSV ingestion. Mirrors the JSON schema file accepted by
/// the CLI: `{"response": .., "treatment": .., "covariates": [..],
/// "nominal": [..], "on_missing": "error"|"drop"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub response: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    #[serde(default)]
    pub nominal: Vec<String>,
    #[serde(default)]
    pub on_missing: MissingPolicy,
}

impl SchemaConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let schema: SchemaConfig = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariates.is_empty() {
            return Err(Error::Schema(
                "schema must name at least one covariate column".into(),
            ));
        }
        for name in [&self.response, &self.treatment] {
            if self.covariates.iter().any(|c| c == name) {
                return Err(Error::Schema(format!(
                    "column `{name}` cannot be both a covariate and the response/treatment"
                )));
            }
        }
        for name in &self.nominal {
            if !self.covariates.iter().any(|c| c == name) {
                return Err(Error::Schema(format!(
                    "nominal column `{name}` is not listed among the covariates"
                )));
            }
        }
        Ok(())
    }
}

/// Randomized-trial dataset: response, binary treatment, covariate matrix.
///
/// Immutable after construction and safe to share across parallel tree
/// builders.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialDataset {
    y: Vec<f64>,
    t: Vec<u8>,
    /// Column-major; nominal columns store the level index as f64.
    cols: Vec<Vec<f64>>,
    columns: Vec<ColumnMeta>,
    response_name: String,
    treatment_name: String,
}

impl TrialDataset {
    pub fn new(
        y: Vec<f64>,
        t: Vec<u8>,
        cols: Vec<Vec<f64>>,
        columns: Vec<ColumnMeta>,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if t.len() != n {
            return Err(Error::InvalidData(format!(
                "treatment length {} != response length {n}",
                t.len()
            )));
        }
        if cols.len() != columns.len() {
            return Err(Error::InvalidData(format!(
                "{} covariate columns but {} column descriptors",
                cols.len(),
                columns.len()
            )));
        }
        for (j, col) in cols.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidData(format!(
                    "column `{}` has {} rows, expected {n}",
                    columns[j].name,
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "column `{}` contains non-finite values",
                    columns[j].name
                )));
            }
            if columns[j].kind == ColumnKind::Nominal {
                let n_levels = columns[j].levels.as_ref().map_or(0, Vec::len);
                if n_levels == 0 {
                    return Err(Error::InvalidData(format!(
                        "nominal column `{}` has no level list",
                        columns[j].name
                    )));
                }
                if col
                    .iter()
                    .any(|&v| v < 0.0 || v.fract() != 0.0 || v as usize >= n_levels)
                {
                    return Err(Error::InvalidData(format!(
                        "nominal column `{}` holds an out-of-range level index",
                        columns[j].name
                    )));
                }
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("response contains non-finite values".into()));
        }
        if t.iter().any(|&v| v > 1) {
            return Err(Error::InvalidData("treatment values must be 0 or 1".into()));
        }
        let n1: usize = t.iter().map(|&v| v as usize).sum();
        if n1 == 0 || n1 == n {
            return Err(Error::InvalidData(format!(
                "both arms must be nonempty (treated {n1} of {n})"
            )));
        }
        Ok(TrialDataset {
            y,
            t,
            cols,
            columns,
            response_name: "y".into(),
            treatment_name: "t".into(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.cols.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn treatment_name(&self) -> &str {
        &self.treatment_name
    }

    /// Covariate values of row `i`, in column order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    /// Loads a UTF-8, comma-separated, headered CSV per the schema.
    /// Row order is preserved.
    pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Self> {
        schema.validate()?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let col_index = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("column `{name}` not found in CSV header")))
        };
        let y_idx = col_index(&schema.response)?;
        let t_idx = col_index(&schema.treatment)?;
        let cov_idx: Vec<usize> = schema
            .covariates
            .iter()
            .map(|c| col_index(c))
            .collect::<Result<_>>()?;
        let is_nominal: Vec<bool> = schema
            .covariates
            .iter()
            .map(|c| schema.nominal.iter().any(|m| m == c))
            .collect();

        let mut y = Vec::new();
        let mut t = Vec::new();
        // Continuous values parsed eagerly; nominal labels kept raw until all
        // levels are known.
        let mut raw: Vec<Vec<RawCell>> = (0..cov_idx.len()).map(|_| Vec::new()).collect();
        for (rec_no, record) in reader.records().enumerate() {
            let record = record?;
            let row = rec_no + 1; // 1-based data row for messages
            let cell = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();

            let mut fields: Vec<String> = Vec::with_capacity(2 + cov_idx.len());
            fields.push(cell(y_idx));
            fields.push(cell(t_idx));
            for &idx in &cov_idx {
                fields.push(cell(idx));
            }
            let missing_at = fields.iter().position(|v| is_missing(v));
            if let Some(k) = missing_at {
                match schema.on_missing {
                    MissingPolicy::Drop => continue,
                    MissingPolicy::Error => {
                        let column = match k {
                            0 => schema.response.clone(),
                            1 => schema.treatment.clone(),
                            k => schema.covariates[k - 2].clone(),
                        };
                        return Err(Error::Missing { row, column });
                    }
                }
            }

            let y_val: f64 = fields[0].parse().map_err(|e| Error::Parse {
                row,
                column: schema.response.clone(),
                message: format!("`{}`: {e}", fields[0]),
            })?;
            let t_raw: f64 = fields[1].parse().map_err(|e| Error::Parse {
                row,
                column: schema.treatment.clone(),
                message: format!("`{}`: {e}", fields[1]),
            })?;
            let t_val = if t_raw == 0.0 {
                0u8
            } else if t_raw == 1.0 {
                1u8
            } else {
                return Err(Error::Domain {
                    row,
                    column: schema.treatment.clone(),
                    message: format!("treatment value `{}` is not 0 or 1", fields[1]),
                });
            };
            y.push(y_val);
            t.push(t_val);
            for (k, field) in fields[2..].iter().enumerate() {
                if is_nominal[k] {
                    raw[k].push(RawCell::Label(field.clone()));
                } else {
                    let v: f64 = field.parse().map_err(|e| Error::Parse {
                        row,
                        column: schema.covariates[k].clone(),
                        message: format!("`{field}`: {e}"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Domain {
                            row,
                            column: schema.covariates[k].clone(),
                            message: format!("non-finite value `{field}`"),
                        });
                    }
                    raw[k].push(RawCell::Value(v));
                }
            }
        }

        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 usable rows, got {n}"
            )));
        }

        let mut cols = Vec::with_capacity(cov_idx.len());
        let mut columns = Vec::with_capacity(cov_idx.len());
        for (k, cells) in raw.into_iter().enumerate() {
            let name = schema.covariates[k].clone();
            if is_nominal[k] {
                let mut level_set: BTreeMap<String, usize> = BTreeMap::new();
                for cell in &cells {
                    if let RawCell::Label(label) = cell {
                        level_set.entry(label.clone()).or_insert(0);
                    }
                }
                let levels: Vec<String> = level_set.keys().cloned().collect();
                for (i, label) in levels.iter().enumerate() {
                    level_set.insert(label.clone(), i);
                }
                let col: Vec<f64> = cells
                    .iter()
                    .map(|cell| match cell {
                        RawCell::Label(label) => level_set[label] as f64,
                        RawCell::Value(_) => unreachable!(),
                    })
                    .collect();
                cols.push(col);
                columns.push(ColumnMeta::nominal(name, levels));
            } else {
                let col: Vec<f64> = cells
                    .iter()
                    .map(|cell| match cell {
                        RawCell::Value(v) => *v,
                        RawCell::Label(_) => unreachable!(),
                    })
                    .collect();
                let mut meta = ColumnMeta::continuous(name);
                let (mean, sd) = mean_sd(&col);
                meta.mean = Some(mean);
                meta.sd = Some(sd);
                cols.push(col);
                columns.push(meta);
            }
        }

        let mut ds = TrialDataset::new(y, t, cols, columns)?;
        ds.response_name = schema.response.clone();
        ds.treatment_name = schema.treatment.clone();
        Ok(ds)
    }

    /// Writes the dataset back to CSV. Finite doubles are formatted with the
    /// shortest representation that reparses to the same bits, so a
    /// write/load round trip is exact.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.response_name);
        out.push(',');
        out.push_str(&self.treatment_name);
        for meta in &self.columns {
            out.push(',');
            out.push_str(&meta.name);
        }
        out.push('\n');
        for i in 0..self.n() {
            let _ = write!(out, "{},{}", self.y[i], self.t[i]);
            for (j, meta) in self.columns.iter().enumerate() {
                out.push(',');
                match (&meta.kind, &meta.levels) {
                    (ColumnKind::Nominal, Some(levels)) => {
                        out.push_str(&levels[self.cols[j][i] as usize]);
                    }
                    _ => {
                        let _ = write!(out, "{}", self.cols[j][i]);
                    }
                }
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Schema that reproduces this dataset's column roles.
    pub fn schema(&self) -> SchemaConfig {
        SchemaConfig {
            response: self.response_name.clone(),
            treatment: self.treatment_name.clone(),
            covariates: self.columns.iter().map(|c| c.name.clone()).collect(),
            nominal: self
                .columns
                .iter()
                .filter(|c| c.kind == ColumnKind::Nominal)
                .map(|c| c.name.clone())
                .collect(),
            on_missing: MissingPolicy::Error,
        }
    }

    pub fn set_names(&mut self, response: &str, treatment: &str) {
        self.response_name = response.to_string();
        self.treatment_name = treatment.to_string();
    }
}

enum RawCell {
    Value(f64),
    Label(String),
}

fn is_missing(field: &str) -> bool {
    matches!(field, "" | "NA" | "NaN" | "nan" | "na")
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Policy for covariate levels not seen at training time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnseenLevelPolicy {
    #[default]
    Error,
    /// Map to the lexicographically nearest known label.
    Nearest,
}

/// Loads covariate rows for prediction, mapping nominal labels through the
/// training-time level lists. Columns are matched by name; extra CSV columns
/// are ignored.
pub fn load_covariate_rows(
    path: impl AsRef<Path>,
    columns: &[ColumnMeta],
    on_unseen: UnseenLevelPolicy,
) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|meta| {
            headers
                .iter()
                .position(|h| h == meta.name)
                .ok_or_else(|| Error::Schema(format!("column `{}` not found in CSV header", meta.name)))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (rec_no, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = rec_no + 1;
        let mut row = Vec::with_capacity(columns.len());
        for (meta, &i) in columns.iter().zip(&idx) {
            let field = record.get(i).unwrap_or("").trim();
            if is_missing(field) {
                return Err(Error::Missing {
                    row: row_no,
                    column: meta.name.clone(),
                });
            }
            match (&meta.kind, &meta.levels) {
                (ColumnKind::Nominal, Some(levels)) => {
                    match levels.binary_search_by(|l| l.as_str().cmp(field)) {
                        Ok(level) => row.push(level as f64),
                        Err(insert_at) => match on_unseen {
                            UnseenLevelPolicy::Error => {
                                return Err(Error::Domain {
                                    row: row_no,
                                    column: meta.name.clone(),
                                    message: format!("unseen level `{field}`"),
                                })
                            }
                            UnseenLevelPolicy::Nearest => {
                                let level = insert_at.min(levels.len() - 1);
                                row.push(level as f64);
                            }
                        },
                    }
                }
                _ => {
                    let v: f64 = field.parse().map_err(|e| Error::Parse {
                        row: row_no,
                        column: meta.name.clone(),
                        message: format!("`{field}`: {e}"),
                    })?;
                    row.push(v);
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Centers and scales to sample mean 0 and sample standard deviation 1.
/// Returns `None` for constant (zero-variance) input, which callers treat
/// as a degenerate column excluded from splitting.
pub fn standardize_column(values: &[f64]) -> Option<(Vec<f64>, f64, f64)> {
    if values.len() < 2 {
        return None;
    }
    let (mean, sd) = mean_sd(values);
    if sd <= 0.0 || !sd.is_finite() {
        return None;
    }
    let standardized = values.iter().map(|v| (v - mean) / sd).collect();
    Some((standardized, mean, sd))
}

/// Ranks nominal levels by their estimated treatment effect and returns the
/// rank (ordinal code) of each level.
///
/// Effects per level: difference in arm means when both arms are present;
/// a level seen in one arm only takes (that arm's level mean − the other
/// arm's overall mean); a level absent from the (weighted) sample takes the
/// overall arm-mean difference. Ties break lexicographically, i.e. by level
/// index since level lists are sorted.
pub fn rank_levels(
    n_levels: usize,
    level_of_row: &[f64],
    y: &[f64],
    t: &[u8],
    w: &[u16],
) -> Vec<u32> {
    let mut cnt = vec![[0.0f64; 2]; n_levels];
    let mut sum = vec![[0.0f64; 2]; n_levels];
    let mut tot_cnt = [0.0f64; 2];
    let mut tot_sum = [0.0f64; 2];
    for i in 0..level_of_row.len() {
        let wi = w[i] as f64;
        if wi == 0.0 {
            continue;
        }
        let arm = t[i] as usize;
        let level = level_of_row[i] as usize;
        cnt[level][arm] += wi;
        sum[level][arm] += wi * y[i];
        tot_cnt[arm] += wi;
        tot_sum[arm] += wi * y[i];
    }
    let overall = [tot_sum[0] / tot_cnt[0].max(1.0), tot_sum[1] / tot_cnt[1].max(1.0)];
    let overall_did = overall[1] - overall[0];
    let effects: Vec<f64> = (0..n_levels)
        .map(|l| match (cnt[l][1] > 0.0, cnt[l][0] > 0.0) {
            (true, true) => sum[l][1] / cnt[l][1] - sum[l][0] / cnt[l][0],
            (true, false) => sum[l][1] / cnt[l][1] - overall[0],
            (false, true) => overall[1] - sum[l][0] / cnt[l][0],
            (false, false) => overall_did,
        })
        .collect();
    let mut order: Vec<usize> = (0..n_levels).collect();
    order.sort_by(|&a, &b| effects[a].partial_cmp(&effects[b]).unwrap());
    let mut ranks = vec![0u32; n_levels];
    for (rank, &level) in order.iter().enumerate() {
        ranks[level] = rank as u32;
    }
    ranks
}

/// Label-level convenience wrapper over [`rank_levels`]: collects the sorted
/// level list, ranks levels by treatment effect, and codes every row.
pub fn encode_nominal(
    labels: &[String],
    y: &[f64],
    t: &[u8],
) -> Result<(Vec<String>, Vec<u32>, Vec<u32>)> {
    if labels.len() != y.len() || labels.len() != t.len() {
        return Err(Error::InvalidData("encode_nominal inputs differ in length".into()));
    }
    let mut level_set: BTreeMap<&str, usize> = BTreeMap::new();
    for label in labels {
        level_set.entry(label.as_str()).or_insert(0);
    }
    let levels: Vec<String> = level_set.keys().map(|s| s.to_string()).collect();
    for (i, label) in levels.iter().enumerate() {
        level_set.insert(label.as_str(), i);
    }
    let level_of_row: Vec<f64> = labels.iter().map(|l| level_set[l.as_str()] as f64).collect();
    let w = vec![1u16; labels.len()];
    let ranks = rank_levels(levels.len(), &level_of_row, y, t, &w);
    let codes = level_of_row.iter().map(|&l| ranks[l as usize]).collect();
    Ok((levels, ranks, codes))
}
