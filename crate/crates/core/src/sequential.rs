//! Sequential conformal methods for non-exchangeable streams: EnbPI (rolling
//! window of out-of-bag residuals) and ACI (adaptive miscoverage level).

use std::collections::VecDeque;

use crate::conformal::{quantile_of_sorted, residual_scores};
use crate::error::{Error, Result};
use crate::regress::{bootstrap_fit, BootstrapEnsemble, LagMatrix};
use crate::types::{check_alpha, Component, Interval, IntervalSeries};

/// Point predictions and intervals for a run of consecutive test steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialRun {
    pub predictions: Vec<f64>,
    pub intervals: IntervalSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnbpiConfig {
    pub ensemble_size: usize,
    pub seed: u64,
    pub ridge_penalty: f64,
    /// Steps between quantile recomputations.
    pub window_length: usize,
}

impl Default for EnbpiConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 20,
            seed: 42,
            ridge_penalty: 1e-6,
            window_length: 1,
        }
    }
}

/// Bootstrap ensemble plus the FIFO window of residuals.
#[derive(Debug, Clone)]
pub struct EnbpiState {
    ensemble: BootstrapEnsemble,
    window: VecDeque<f64>,
    window_length: usize,
    since_refresh: usize,
    cached: Option<(f64, f64)>,
}

impl EnbpiState {
    /// Fits the ensemble on the first `fit_rows` rows of `lm` and fills the
    /// window with their leave-one-out residuals.
    pub fn fit(lm: &LagMatrix, fit_rows: usize, config: &EnbpiConfig) -> Result<Self> {
        if fit_rows == 0 || fit_rows > lm.len() {
            return Err(Error::TooFewRows {
                rows: fit_rows,
                folds: config.ensemble_size,
            });
        }
        let train = LagMatrix::from_parts(
            lm.rows()[..fit_rows].to_vec(),
            lm.targets()[..fit_rows].to_vec(),
            lm.origin()[..fit_rows].to_vec(),
        )?;
        let ensemble = bootstrap_fit(
            &train,
            config.ensemble_size,
            config.seed,
            config.ridge_penalty,
        )?;
        let loo = (0..fit_rows)
            .map(|r| ensemble.predict_out_of_bag(r, train.row(r)))
            .collect::<Result<Vec<_>>>()?;
        let window = residual_scores(&loo, train.targets())?.into();
        Ok(Self {
            ensemble,
            window,
            window_length: config.window_length.max(1),
            since_refresh: 0,
            cached: None,
        })
    }

    pub fn ensemble(&self) -> &BootstrapEnsemble {
        &self.ensemble
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    fn quantile(&mut self, alpha: f64) -> f64 {
        match self.cached {
            Some((a, q)) if a == alpha && self.since_refresh < self.window_length => q,
            _ => {
                let mut sorted: Vec<f64> = self.window.iter().copied().collect();
                sorted.sort_by(f64::total_cmp);
                let w = 1.0 / (sorted.len() + 1) as f64;
                let pairs: Vec<(f64, f64)> = sorted.into_iter().map(|s| (s, w)).collect();
                let q = quantile_of_sorted(&pairs, 1.0 - alpha);
                self.cached = Some((alpha, q));
                self.since_refresh = 0;
                q
            }
        }
    }

    /// Ensemble-mean prediction at `x` and its interval.
    pub fn predict_interval(&mut self, x: &[f64], alpha: f64) -> Result<(f64, Interval)> {
        check_alpha(alpha)?;
        let prediction = self.ensemble.predict(x)?;
        let q = self.quantile(alpha);
        Ok((prediction, Interval::symmetric(prediction, q)))
    }

    /// Rolls the window: drops the oldest residual, appends the newest.
    pub fn observe(&mut self, prediction: f64, actual: f64) {
        self.window.pop_front();
        self.window.push_back((prediction - actual).abs());
        self.since_refresh += 1;
    }
}

/// EnbPI over the rows of `lm` from `test_start` on; rows before it train the
/// ensemble. Each row's target is revealed after its interval is issued.
pub fn enbpi_run(
    lm: &LagMatrix,
    test_start: usize,
    alpha: f64,
    config: &EnbpiConfig,
) -> Result<SequentialRun> {
    let mut state = EnbpiState::fit(lm, test_start, config)?;
    let mut predictions = Vec::with_capacity(lm.len() - test_start);
    let mut intervals = Vec::with_capacity(lm.len() - test_start);
    for r in test_start..lm.len() {
        let (pred, iv) = state.predict_interval(lm.row(r), alpha)?;
        state.observe(pred, lm.targets()[r]);
        predictions.push(pred);
        intervals.push(iv);
    }
    Ok(SequentialRun {
        predictions,
        intervals: IntervalSeries::from_intervals(&intervals, Component::Raw)?,
    })
}

/// Adaptive conformal inference over a fixed calibration score set.
#[derive(Debug, Clone, PartialEq)]
pub struct AciState {
    alpha_t: f64,
    alpha_target: f64,
    gamma: f64,
    sorted_scores: Vec<(f64, f64)>,
    history: Vec<(f64, bool)>,
}

impl AciState {
    pub fn new(cal_scores: &[f64], alpha: f64, gamma: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if cal_scores.is_empty() {
            return Err(Error::TooFewRows { rows: 0, folds: 1 });
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
        }
        let w = 1.0 / (cal_scores.len() + 1) as f64;
        let mut sorted_scores: Vec<(f64, f64)> = cal_scores.iter().map(|s| (*s, w)).collect();
        sorted_scores.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            alpha_t: alpha,
            alpha_target: alpha,
            gamma,
            sorted_scores,
            history: Vec::new(),
        })
    }

    pub fn alpha_t(&self) -> f64 {
        self.alpha_t
    }

    pub fn alpha_target(&self) -> f64 {
        self.alpha_target
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(alpha_t, covered)` for every completed step.
    pub fn history(&self) -> &[(f64, bool)] {
        &self.history
    }

    /// Conformal quantile at the current level. `alpha_t <= 0` gives `+∞`,
    /// `alpha_t >= 1` gives zero.
    pub fn quantile(&self) -> f64 {
        if self.alpha_t <= 0.0 {
            f64::INFINITY
        } else if self.alpha_t >= 1.0 {
            0.0
        } else {
            quantile_of_sorted(&self.sorted_scores, 1.0 - self.alpha_t)
        }
    }

    pub fn interval(&self, prediction: f64) -> Interval {
        Interval::symmetric(prediction, self.quantile())
    }
}

/// `alpha_{t+1} = alpha_t + gamma (alpha - 1[miscovered])`.
pub fn aci_step(mut state: AciState, covered: bool) -> AciState {
    let miss = if covered { 0.0 } else { 1.0 };
    state.history.push((state.alpha_t, covered));
    state.alpha_t += state.gamma * (state.alpha_target - miss);
    state
}

#[derive(Debug, Clone, PartialEq)]
pub struct AciRun {
    pub intervals: IntervalSeries,
    /// Level used at each step followed by the final level (`len + 1`).
    pub alpha_trace: Vec<f64>,
    pub covered: Vec<bool>,
}

impl AciRun {
    pub fn miscoverages(&self) -> usize {
        self.covered.iter().filter(|c| !**c).count()
    }
}

pub fn aci_run(
    cal_scores: &[f64],
    test_predictions: &[f64],
    test_actuals: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<AciRun> {
    if test_predictions.len() != test_actuals.len() {
        return Err(Error::LengthMismatch {
            what: "test actuals",
            expected: test_predictions.len(),
            got: test_actuals.len(),
        });
    }
    let mut state = AciState::new(cal_scores, alpha, gamma)?;
    let mut intervals = Vec::with_capacity(test_predictions.len());
    for (pred, actual) in test_predictions.iter().zip(test_actuals) {
        let iv = state.interval(*pred);
        state = aci_step(state, iv.contains(*actual));
        intervals.push(iv);
    }
    let mut alpha_trace: Vec<f64> = state.history.iter().map(|(a, _)| *a).collect();
    alpha_trace.push(state.alpha_t);
    Ok(AciRun {
        intervals: IntervalSeries::from_intervals(&intervals, Component::Raw)?,
        alpha_trace,
        covered: state.history.iter().map(|(_, c)| *c).collect(),
    })
}
