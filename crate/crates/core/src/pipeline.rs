//! Decompose, forecast each component with its own conformal method, and add
//! the component intervals back together.

use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::{residual_scores, weighted_quantile, CvPlus, WeightedScoreSet};
use crate::error::{Error, Result};
use crate::eval::metrics::{piaw, picp};
use crate::regress::{build_lag_features, difference, fit_linear, fit_linear_rows, LagMatrix};
use crate::sequential::{aci_run, enbpi_run, EnbpiConfig};
use crate::stl::stl_decompose_values;
use crate::types::{
    Component, DecompositionResult, HyperParams, Interval, IntervalSeries, Method,
    MethodAssignment, SplitSpec, TestDecomposition, TimeSeries,
};
use crate::weights::{
    binary_local_weights, binary_point_weights, exp_local_weights, feat_dist_weights, knn_weights,
    recency_filter, standardize, test_mass, SeasonContext,
};

/// Per-component alpha under a Bonferroni split over `m` components.
pub fn bonferroni_alpha(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

/// Pointwise sum of the three component bounds.
pub fn recompose_intervals(
    trend: &IntervalSeries,
    seasonal: &IntervalSeries,
    remainder: &IntervalSeries,
) -> Result<IntervalSeries> {
    let n = trend.len();
    for other in [seasonal, remainder] {
        if other.len() != n {
            return Err(Error::LengthMismatch {
                what: "component intervals",
                expected: n,
                got: other.len(),
            });
        }
    }
    let parts = [trend, seasonal, remainder];
    let lower = (0..n)
        .map(|t| parts.iter().map(|p| p.lower()[t]).sum())
        .collect();
    let upper = (0..n)
        .map(|t| parts.iter().map(|p| p.upper()[t]).sum())
        .collect();
    let flagged = (0..n)
        .map(|t| parts.iter().any(|p| p.flagged()[t]))
        .collect();
    IntervalSeries::new(lower, upper, Component::Recomposed)?.with_flags(flagged)
}

/// Predictions and intervals for one component over the test range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentForecast {
    pub component: Component,
    pub method: Method,
    pub effective_alpha: f64,
    pub predictions: Vec<f64>,
    /// Component values the intervals are scored against.
    pub actuals: Vec<f64>,
    #[serde(skip)]
    pub intervals: IntervalSeries,
}

/// Outcome of a decomposed or raw run over the test range.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Empty for a raw baseline.
    pub components: Vec<ComponentForecast>,
    /// Recomposed intervals, or the raw baseline's own.
    pub intervals: IntervalSeries,
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
    /// 0-based series index of the first test point.
    pub test_start: usize,
    pub assignment: Option<MethodAssignment>,
    pub raw_method: Option<Method>,
    pub hyper_params: HyperParams,
    pub picp: f64,
    pub piaw: f64,
}

impl RunResult {
    pub fn decomposed(&self) -> bool {
        self.assignment.is_some()
    }

    pub fn component(&self, which: Component) -> Option<&ComponentForecast> {
        self.components.iter().find(|c| c.component == which)
    }

    pub fn label(&self) -> String {
        match (&self.assignment, self.raw_method) {
            (Some(a), _) => a.label(),
            (None, Some(m)) => format!("{m} (raw)"),
            (None, None) => String::new(),
        }
    }
}

/// Component values for every index of the series, produced according to
/// `hp.test_decomposition`. The first `split.cal_end()` points always come
/// from a decomposition that never sees the test range, except in
/// `FullSeries` mode.
pub fn decompose_for_run(
    values: &[f64],
    period: usize,
    split: &SplitSpec,
    hp: &HyperParams,
) -> Result<DecompositionResult> {
    let fit_end = split.cal_end();
    match hp.test_decomposition {
        TestDecomposition::FullSeries => stl_decompose_values(values, period, &hp.stl),
        TestDecomposition::Extend => {
            let fitted = stl_decompose_values(&values[..fit_end], period, &hp.stl)?;
            extend_decomposition(values, period, fitted, hp)
        }
        TestDecomposition::Refit => {
            let mut base = stl_decompose_values(&values[..fit_end], period, &hp.stl)?;
            let tail = (fit_end..values.len())
                .into_par_iter()
                .map(|t| {
                    let d = stl_decompose_values(&values[..=t], period, &hp.stl)?;
                    Ok((d.trend[t], d.seasonal[t], d.remainder[t]))
                })
                .collect::<Result<Vec<_>>>()?;
            for (tr, s, r) in tail {
                base.trend.push(tr);
                base.seasonal.push(s);
                base.remainder.push(r);
            }
            Ok(base)
        }
    }
}

/// Continues a fitted decomposition over the rest of `values`: the last full
/// seasonal cycle repeats, the trend is forecast recursively by a linear AR
/// model fit on the fitted trend, and the remainder absorbs the rest.
fn extend_decomposition(
    values: &[f64],
    period: usize,
    mut fitted: DecompositionResult,
    hp: &HyperParams,
) -> Result<DecompositionResult> {
    let n = fitted.len();
    let k = hp.lag_order_for(period).min(n - 1);
    let lm = build_lag_features(&fitted.trend, k, None)?;
    let model = fit_linear(&lm, hp.ridge_penalty)?;
    for t in n..values.len() {
        let trend = model.predict(&fitted.trend[t - k..t])?;
        let seasonal = fitted.seasonal[n - period + (t - n) % period];
        fitted.trend.push(trend);
        fitted.seasonal.push(seasonal);
        fitted.remainder.push(values[t] - trend - seasonal);
    }
    Ok(fitted)
}

/// What a component's regressor sees.
#[derive(Clone, Copy)]
enum Regressors<'a> {
    Lags,
    LagsAndFeatures(&'a [Vec<f64>]),
    /// No regressors: the prediction is the training mean.
    MeanOnly,
}

/// Supervised rows for a component plus the level offset that turns a row's
/// target back into the component value (non-zero only when differencing).
struct ComponentRows {
    lm: LagMatrix,
    /// Series index of each row's target.
    time: Vec<usize>,
    offset: Vec<f64>,
}

impl ComponentRows {
    fn build(
        series: &[f64],
        lag_order: usize,
        differenced: bool,
        regressors: Regressors<'_>,
    ) -> Result<Self> {
        if let Regressors::MeanOnly = regressors {
            // start where the lagged components start so every component
            // shares the same calibration rows
            let lm = LagMatrix::intercept_only(series, lag_order.min(series.len() - 1))?;
            let time = lm.origin().to_vec();
            let offset = vec![0.0; time.len()];
            return Ok(Self { lm, time, offset });
        }
        let features = match regressors {
            Regressors::LagsAndFeatures(f) => Some(f),
            _ => None,
        };
        if differenced {
            let diffs = difference(series);
            let shifted: Option<Vec<Vec<f64>>> = features.map(|f| f[1..].to_vec());
            let lm = build_lag_features(&diffs, lag_order, shifted.as_deref())?;
            let time: Vec<usize> = lm.origin().iter().map(|o| o + 1).collect();
            let offset = time.iter().map(|t| series[t - 1]).collect();
            Ok(Self { lm, time, offset })
        } else {
            let lm = build_lag_features(series, lag_order, features)?;
            let time = lm.origin().to_vec();
            let offset = vec![0.0; time.len()];
            Ok(Self { lm, time, offset })
        }
    }

    fn first_at(&self, time: usize) -> usize {
        self.time.partition_point(|t| *t < time)
    }

    fn subset(&self, range: std::ops::Range<usize>) -> Result<LagMatrix> {
        LagMatrix::from_parts(
            self.lm.rows()[range.clone()].to_vec(),
            self.lm.targets()[range.clone()].to_vec(),
            self.lm.origin()[range].to_vec(),
        )
    }
}

/// Everything one component forecast needs besides the component series.
struct ComponentJob<'a> {
    component: Component,
    method: Method,
    alpha: f64,
    period: usize,
    split: &'a SplitSpec,
    hp: &'a HyperParams,
    features: Option<&'a [Vec<f64>]>,
    seed: u64,
}

fn forecast_component(series: &[f64], job: &ComponentJob<'_>) -> Result<ComponentForecast> {
    let hp = job.hp;
    let regressors = match (job.component, job.features) {
        (Component::Remainder, _) => Regressors::MeanOnly,
        (Component::Raw, Some(f)) => Regressors::LagsAndFeatures(f),
        _ => Regressors::Lags,
    };
    let rows = ComponentRows::build(
        series,
        hp.lag_order_for(job.period),
        hp.difference,
        regressors,
    )?;
    let train_start = 0;
    let cal_start = rows.first_at(job.split.train_end());
    let test_start = rows.first_at(job.split.cal_end());
    let n_rows = rows.lm.len();
    if cal_start == train_start || test_start == cal_start || test_start == n_rows {
        return Err(Error::InvalidSplit(format!(
            "{} rows leave an empty train, calibration or test block",
            job.component
        )));
    }
    let test = test_start..n_rows;
    let targets = rows.lm.targets();

    let (predictions, intervals, flagged): (Vec<f64>, Vec<Interval>, Vec<bool>) = match job.method {
        Method::EnbPI => {
            let cfg = EnbpiConfig {
                ensemble_size: hp.ensemble_size,
                seed: job.seed,
                ridge_penalty: hp.ridge_penalty,
                window_length: hp.window_length,
            };
            let run = enbpi_run(&rows.lm, test_start, job.alpha, &cfg)?;
            let n = run.predictions.len();
            (
                run.predictions,
                run.intervals.iter().collect(),
                vec![false; n],
            )
        }
        Method::ACI => {
            let train: Vec<usize> = (train_start..cal_start).collect();
            let model = fit_linear_rows(&rows.lm, &train, hp.ridge_penalty)?;
            let preds = (cal_start..n_rows)
                .map(|r| model.predict(rows.lm.row(r)))
                .collect::<Result<Vec<_>>>()?;
            let n_cal = test_start - cal_start;
            let cal_scores = residual_scores(&preds[..n_cal], &targets[cal_start..test_start])?;
            let run = aci_run(
                &cal_scores,
                &preds[n_cal..],
                &targets[test.clone()],
                job.alpha,
                hp.gamma,
            )?;
            let n = test.len();
            (
                preds[n_cal..].to_vec(),
                run.intervals.iter().collect(),
                vec![false; n],
            )
        }
        Method::CVPlus => {
            let fit = rows.subset(train_start..test_start)?;
            let cv = CvPlus::fit(&fit, hp.cv_folds, hp.ridge_penalty)?;
            let train: Vec<usize> = (train_start..test_start).collect();
            let full = fit_linear_rows(&rows.lm, &train, hp.ridge_penalty)?;
            let mut preds = Vec::with_capacity(test.len());
            let mut ivs = Vec::with_capacity(test.len());
            for r in test.clone() {
                preds.push(full.predict(rows.lm.row(r))?);
                ivs.push(cv.interval(rows.lm.row(r), job.alpha)?);
            }
            let n = preds.len();
            (preds, ivs, vec![false; n])
        }
        weighted => weighted_forecast(weighted, &rows, cal_start, test_start, job)?,
    };

    let offsets = &rows.offset[test.clone()];
    let predictions: Vec<f64> = predictions
        .iter()
        .zip(offsets)
        .map(|(p, o)| p + o)
        .collect();
    let shifted: Vec<Interval> = intervals
        .iter()
        .zip(offsets)
        .map(|(iv, o)| Interval::new(iv.lower + o, iv.upper + o))
        .collect();
    let actuals: Vec<f64> = rows.time[test].iter().map(|t| series[*t]).collect();
    Ok(ComponentForecast {
        component: job.component,
        method: job.method,
        effective_alpha: job.alpha,
        predictions,
        actuals,
        intervals: IntervalSeries::from_intervals(&shifted, job.component)?.with_flags(flagged)?,
    })
}

/// Split-CP scores on the calibration rows, re-weighted for every test row.
fn weighted_forecast(
    method: Method,
    rows: &ComponentRows,
    cal_start: usize,
    test_start: usize,
    job: &ComponentJob<'_>,
) -> Result<(Vec<f64>, Vec<Interval>, Vec<bool>)> {
    let hp = job.hp;
    let lm = &rows.lm;
    let train: Vec<usize> = (0..cal_start).collect();
    let model = fit_linear_rows(lm, &train, hp.ridge_penalty)?;
    let cal: Vec<usize> = (cal_start..test_start).collect();
    let cal_preds = cal
        .iter()
        .map(|r| model.predict(lm.row(*r)))
        .collect::<Result<Vec<_>>>()?;
    let cal_targets: Vec<f64> = cal.iter().map(|r| lm.targets()[*r]).collect();
    let scores = residual_scores(&cal_preds, &cal_targets)?;
    let n = scores.len();
    let tau = job.period;
    // 1-based series positions within the period
    let position = |row: usize| (rows.time[row] + 1) % tau;
    let cal_positions: Vec<usize> = cal.iter().map(|r| position(*r)).collect();
    let feature_of = |row: usize| -> Vec<f64> {
        match job.features {
            Some(f) => f[rows.time[row]].clone(),
            None => lm.row(row).to_vec(),
        }
    };
    let cal_features: Vec<Vec<f64>> = if matches!(method, Method::KNN | Method::FeatDistPoint) {
        cal.iter().map(|r| feature_of(*r)).collect()
    } else {
        Vec::new()
    };
    let decay = hp.decay_for(tau);

    let mut preds = Vec::with_capacity(lm.len() - test_start);
    let mut ivs = Vec::with_capacity(lm.len() - test_start);
    let mut flags = Vec::with_capacity(lm.len() - test_start);
    for r in test_start..lm.len() {
        let pred = model.predict(lm.row(r))?;
        let mut raw = match method {
            Method::KNN | Method::FeatDistPoint => {
                let x = feature_of(r);
                let (cf, tf) = if hp.standardize_features {
                    standardize(&cal_features, &x)
                } else {
                    (cal_features.clone(), x)
                };
                if method == Method::KNN {
                    knn_weights(&cf, &tf, hp.knn_k.unwrap_or((n / 2).max(1)).min(n))?
                } else {
                    feat_dist_weights(&cf, &tf)?
                }
            }
            _ => {
                let mut ctx =
                    SeasonContext::from_positions(tau, cal_positions.clone(), position(r))?;
                if !hp.circular_distance {
                    ctx = ctx.linear_distance();
                }
                match method {
                    Method::BinaryPoint => binary_point_weights(&ctx, n)?,
                    Method::BinaryLocal => binary_local_weights(&ctx, n, hp.neighborhood)?,
                    Method::ExpLocal => exp_local_weights(&ctx, n, decay)?,
                    other => unreachable!("{other} is not a weighted method"),
                }
            }
        };
        if let Some(keep) = hp.recency_periods {
            raw = recency_filter(&raw, n, tau, keep)?;
        }
        let empty = raw.iter().all(|w| *w == 0.0);
        let mass = test_mass(method, &raw, decay);
        raw.push(mass);
        let wss = WeightedScoreSet::new(scores.clone(), raw)?.normalize()?;
        let q = weighted_quantile(&wss, 1.0 - job.alpha)?;
        preds.push(pred);
        ivs.push(Interval::symmetric(pred, q));
        flags.push(empty);
    }
    Ok((preds, ivs, flags))
}

fn check_inputs(series: &TimeSeries, split: &SplitSpec, hp: &HyperParams) -> Result<()> {
    hp.validate()?;
    if split.len() != series.len() {
        return Err(Error::LengthMismatch {
            what: "split",
            expected: series.len(),
            got: split.len(),
        });
    }
    Ok(())
}

/// Decomposes the series, forecasts each component with its assigned method
/// and recomposes the intervals.
pub fn run_decomposed(
    series: &TimeSeries,
    split: &SplitSpec,
    assignment: &MethodAssignment,
    hp: &HyperParams,
) -> Result<RunResult> {
    check_inputs(series, split, hp)?;
    assignment.validate()?;
    let period = series.period();
    let decomposition = decompose_for_run(series.values(), period, split, hp)?;
    run_on_decomposition(series, split, assignment, hp, &decomposition)
}

/// [`run_decomposed`] with a precomputed decomposition, so several
/// assignments can share one.
pub fn run_on_decomposition(
    series: &TimeSeries,
    split: &SplitSpec,
    assignment: &MethodAssignment,
    hp: &HyperParams,
    decomposition: &DecompositionResult,
) -> Result<RunResult> {
    check_inputs(series, split, hp)?;
    assignment.validate()?;
    if decomposition.len() != series.len() {
        return Err(Error::LengthMismatch {
            what: "decomposition",
            expected: series.len(),
            got: decomposition.len(),
        });
    }
    let alpha = assignment.component_alpha();
    let plan = [
        (Component::Trend, assignment.trend, &decomposition.trend),
        (
            Component::Seasonal,
            assignment.season,
            &decomposition.seasonal,
        ),
        (
            Component::Remainder,
            assignment.remainder,
            &decomposition.remainder,
        ),
    ];
    let components = plan
        .par_iter()
        .enumerate()
        .map(|(i, (component, method, values))| {
            let job = ComponentJob {
                component: *component,
                method: *method,
                alpha,
                period: series.period(),
                split,
                hp,
                features: series.features(),
                seed: hp.seed.wrapping_add(i as u64),
            };
            forecast_component(values, &job)
        })
        .collect::<Result<Vec<_>>>()?;

    // Components may start their first row at different lags; align on the
    // shared test range, which always begins at the calibration end.
    let test_len = series.len() - split.cal_end();
    for c in &components {
        if c.predictions.len() != test_len {
            return Err(Error::LengthMismatch {
                what: "component test range",
                expected: test_len,
                got: c.predictions.len(),
            });
        }
    }
    let intervals = recompose_intervals(
        &components[0].intervals,
        &components[1].intervals,
        &components[2].intervals,
    )?;
    let predictions: Vec<f64> = (0..test_len)
        .map(|t| components.iter().map(|c| c.predictions[t]).sum())
        .collect();
    let actuals = series.values()[split.cal_end()..].to_vec();
    Ok(RunResult {
        picp: picp(&intervals, &actuals)?,
        piaw: piaw(&intervals).value,
        components,
        intervals,
        predictions,
        actuals,
        test_start: split.cal_end(),
        assignment: Some(*assignment),
        raw_method: None,
        hyper_params: hp.clone(),
    })
}

/// The same regressor and conformal method applied to the undecomposed series.
pub fn run_raw_baseline(
    series: &TimeSeries,
    split: &SplitSpec,
    method: Method,
    alpha: f64,
    hp: &HyperParams,
) -> Result<RunResult> {
    check_inputs(series, split, hp)?;
    crate::types::check_alpha(alpha)?;
    if !method.allowed_for_raw() {
        return Err(Error::InvalidParameter(format!(
            "{method} cannot be applied to the raw series"
        )));
    }
    let job = ComponentJob {
        component: Component::Raw,
        method,
        alpha,
        period: series.period(),
        split,
        hp,
        features: series.features(),
        seed: hp.seed,
    };
    let forecast = forecast_component(series.values(), &job)?;
    let intervals = forecast.intervals.clone();
    Ok(RunResult {
        picp: picp(&intervals, &forecast.actuals)?,
        piaw: piaw(&intervals).value,
        predictions: forecast.predictions,
        actuals: forecast.actuals,
        components: Vec::new(),
        intervals,
        test_start: split.cal_end(),
        assignment: None,
        raw_method: Some(method),
        hyper_params: hp.clone(),
    })
}
