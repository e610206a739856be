//! Multi-seed experiment grids over method assignments and coverage levels.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::csv_io::{load_csv, CsvSchema};
use crate::eval::synthetic::generate_synthetic;
use crate::pipeline::{decompose_for_run, run_on_decomposition, run_raw_baseline, RunResult};
use crate::types::{
    DecompositionResult, HyperParams, Method, MethodAssignment, SplitSpec, TimeSeries,
};

/// Where the series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// The benchmark sine series, regenerated per seed.
    Synthetic { length: usize },
    /// A fixed series; seeds only change the bootstrap.
    Csv { path: PathBuf, schema: CsvSchema },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic { length: 3000 }
    }
}

/// One grid entry: either a raw baseline (`raw`) or a decomposed assignment
/// (`trend`, `season`, `remainder`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remainder: Option<Method>,
}

impl SweepEntry {
    pub fn raw(method: Method) -> Self {
        Self {
            raw: Some(method),
            ..Self::default()
        }
    }

    pub fn decomposed(trend: Method, season: Method, remainder: Method) -> Self {
        Self {
            raw: None,
            trend: Some(trend),
            season: Some(season),
            remainder: Some(remainder),
        }
    }

    pub fn is_raw(&self) -> bool {
        self.raw.is_some()
    }

    /// Decomposed assignment at `alpha`, or `None` for a raw entry.
    pub fn assignment(&self, alpha: f64, bonferroni: bool) -> Result<Option<MethodAssignment>> {
        match (self.raw, self.trend, self.season, self.remainder) {
            (Some(m), None, None, None) => {
                if !m.allowed_for_raw() {
                    return Err(Error::Config(format!("{m} cannot run on the raw series")));
                }
                Ok(None)
            }
            (None, Some(t), Some(s), Some(r)) => Ok(Some(
                MethodAssignment::new(t, s, r, alpha)?.with_bonferroni(bonferroni),
            )),
            _ => Err(Error::Config(
                "an entry needs either `raw` alone or all of `trend`, `season`, `remainder`".into(),
            )),
        }
    }

    /// `(trend, season, remainder)` column labels. Raw entries put their
    /// method in the remainder column and `-` elsewhere.
    pub fn labels(&self) -> (String, String, String) {
        let s = |m: Option<Method>| m.map_or_else(|| "-".to_string(), |m| m.to_string());
        match self.raw {
            Some(m) => ("-".into(), "-".into(), m.to_string()),
            None => (s(self.trend), s(self.season), s(self.remainder)),
        }
    }

    pub fn label(&self) -> String {
        match self.raw {
            Some(m) => format!("{m} (raw)"),
            None => {
                let (t, s, r) = self.labels();
                format!("{t}/{s}/{r}")
            }
        }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![0.25, 0.2, 0.15, 0.1, 0.05]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_train_fraction() -> f64 {
    0.5
}

fn default_cal_fraction() -> f64 {
    0.25
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub dataset: DatasetSpec,
    pub entries: Vec<SweepEntry>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub hyper_params: HyperParams,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_cal_fraction")]
    pub cal_fraction: f64,
    #[serde(default)]
    pub bonferroni: bool,
    /// Write wall-clock times; off gives byte-stable reports.
    #[serde(default = "default_true")]
    pub record_runtime: bool,
}

impl SweepConfig {
    pub fn new(dataset: DatasetSpec, entries: Vec<SweepEntry>) -> Self {
        Self {
            dataset,
            entries,
            alphas: default_alphas(),
            seeds: default_seeds(),
            hyper_params: HyperParams::default(),
            train_fraction: default_train_fraction(),
            cal_fraction: default_cal_fraction(),
            bonferroni: false,
            record_runtime: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("`entries` must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("`alphas` must not be empty".into()));
        }
        for a in &self.alphas {
            crate::types::check_alpha(*a)?;
        }
        for e in &self.entries {
            e.assignment(self.alphas[0], self.bonferroni)?;
        }
        self.hyper_params.validate()
    }
}

/// One (entry, alpha, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub method_trend: String,
    pub method_season: String,
    pub method_remainder: String,
    pub decomposed: bool,
    pub alpha: f64,
    pub seed: u64,
    pub picp: f64,
    pub piaw: f64,
    pub piaw_infinite: bool,
    pub runtime_ms: f64,
    /// Set when the cell failed; metrics are then NaN.
    pub error: Option<String>,
}

/// Seed-averaged metrics for one (entry, alpha).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method_trend: String,
    pub method_season: String,
    pub method_remainder: String,
    pub decomposed: bool,
    pub alpha: f64,
    pub n_seeds: usize,
    pub n_failed: usize,
    pub picp_mean: f64,
    pub picp_se: f64,
    pub piaw_mean: f64,
    pub piaw_se: f64,
    pub piaw_infinite: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Entry-major, then alpha, then seed.
    pub rows: Vec<EvalRow>,
    pub summary: Vec<SummaryRow>,
    /// Successful runs, aligned with `rows`.
    pub runs: Vec<Option<RunResult>>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn summary_for(&self, entry: &SweepEntry, alpha: f64) -> Option<&SummaryRow> {
        let (t, s, r) = entry.labels();
        self.summary.iter().find(|row| {
            row.method_trend == t
                && row.method_season == s
                && row.method_remainder == r
                && row.decomposed == !entry.is_raw()
                && row.alpha == alpha
        })
    }
}

/// Mean and standard error (sample sd over `sqrt(n)`; zero for one value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || !mean.is_finite() {
        return (mean, if mean.is_finite() { 0.0 } else { f64::NAN });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct SeedData {
    series: TimeSeries,
    split: SplitSpec,
    hp: HyperParams,
    decomposition: Option<Result<DecompositionResult>>,
}

fn prepare_seed(config: &SweepConfig, seed: u64, base: Option<&TimeSeries>) -> Result<SeedData> {
    let series = match (&config.dataset, base) {
        (DatasetSpec::Synthetic { length }, _) => generate_synthetic(*length, seed)?,
        (DatasetSpec::Csv { .. }, Some(s)) => s.clone(),
        (DatasetSpec::Csv { path, schema }, None) => load_csv(path, schema)?,
    };
    let split =
        SplitSpec::from_fractions(series.len(), config.train_fraction, config.cal_fraction)?;
    let mut hp = config.hyper_params.clone();
    hp.seed = hp.seed.wrapping_add(seed);
    let decomposition = config
        .entries
        .iter()
        .any(|e| !e.is_raw())
        .then(|| decompose_for_run(series.values(), series.period(), &split, &hp));
    Ok(SeedData {
        series,
        split,
        hp,
        decomposition,
    })
}

fn run_cell(
    config: &SweepConfig,
    data: &Result<SeedData>,
    entry: &SweepEntry,
    alpha: f64,
) -> Result<RunResult> {
    let data = data.as_ref().map_err(|e| Error::Config(e.to_string()))?;
    match entry.assignment(alpha, config.bonferroni)? {
        Some(assignment) => {
            let decomposition = match &data.decomposition {
                Some(Ok(d)) => d,
                Some(Err(e)) => return Err(Error::Config(format!("decomposition failed: {e}"))),
                None => unreachable!("decomposition prepared for decomposed entries"),
            };
            run_on_decomposition(
                &data.series,
                &data.split,
                &assignment,
                &data.hp,
                decomposition,
            )
        }
        None => run_raw_baseline(
            &data.series,
            &data.split,
            entry.raw.expect("raw entry"),
            alpha,
            &data.hp,
        ),
    }
}

fn summarize(config: &SweepConfig, rows: &[EvalRow]) -> Vec<SummaryRow> {
    let per_cell = config.seeds.len();
    rows.chunks(per_cell)
        .map(|chunk| {
            let ok: Vec<&EvalRow> = chunk.iter().filter(|r| r.error.is_none()).collect();
            let picps: Vec<f64> = ok.iter().map(|r| r.picp).collect();
            let piaws: Vec<f64> = ok.iter().map(|r| r.piaw).collect();
            let (picp_mean, picp_se) = mean_and_se(&picps);
            let (piaw_mean, piaw_se) = mean_and_se(&piaws);
            let first = &chunk[0];
            SummaryRow {
                method_trend: first.method_trend.clone(),
                method_season: first.method_season.clone(),
                method_remainder: first.method_remainder.clone(),
                decomposed: first.decomposed,
                alpha: first.alpha,
                n_seeds: ok.len(),
                n_failed: chunk.len() - ok.len(),
                picp_mean,
                picp_se,
                piaw_mean,
                piaw_se,
                piaw_infinite: ok.iter().any(|r| r.piaw_infinite),
            }
        })
        .collect()
}

/// Runs every (entry, alpha, seed) cell. Cell failures are recorded in their
/// row; only an invalid config fails the sweep as a whole.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let base = match &config.dataset {
        DatasetSpec::Csv { path, schema } => Some(load_csv(path, schema)?),
        DatasetSpec::Synthetic { .. } => None,
    };
    let seed_data: Vec<Result<SeedData>> = config
        .seeds
        .par_iter()
        .map(|s| prepare_seed(config, *s, base.as_ref()))
        .collect();

    let mut cells = Vec::new();
    for entry in &config.entries {
        for &alpha in &config.alphas {
            for (si, &seed) in config.seeds.iter().enumerate() {
                cells.push((entry, alpha, si, seed));
            }
        }
    }
    let results: Vec<(EvalRow, Option<RunResult>)> = cells
        .par_iter()
        .map(|&(entry, alpha, si, seed)| {
            let start = Instant::now();
            let outcome = run_cell(config, &seed_data[si], entry, alpha);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let (t, s, r) = entry.labels();
            let mut row = EvalRow {
                method_trend: t,
                method_season: s,
                method_remainder: r,
                decomposed: !entry.is_raw(),
                alpha,
                seed,
                picp: f64::NAN,
                piaw: f64::NAN,
                piaw_infinite: false,
                runtime_ms: if config.record_runtime { elapsed } else { 0.0 },
                error: None,
            };
            match outcome {
                Ok(run) => {
                    row.picp = run.picp;
                    row.piaw = run.piaw;
                    row.piaw_infinite = run.piaw.is_infinite();
                    (row, Some(run))
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    (row, None)
                }
            }
        })
        .collect();
    let (rows, runs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(config, &rows);
    Ok(SweepOutcome {
        rows,
        summary,
        runs,
    })
}
