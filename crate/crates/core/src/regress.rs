//! Autoregressive design matrices, the (ridge) linear predictor, first
//! differencing and bootstrap ensembles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Supervised rows built from a series: row `r` predicts `targets[r]`, the
/// value at time `origin[r]`, from the `lag_order` preceding values followed
/// by any exogenous features observed at that time.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    origin: Vec<usize>,
    lag_order: usize,
}

impl LagMatrix {
    /// Rows with no regressors at all (the model reduces to a mean), aligned
    /// to times `start..values.len()`.
    pub fn intercept_only(values: &[f64], start: usize) -> Result<Self> {
        if start >= values.len() {
            return Err(Error::SeriesTooShort {
                needed: start + 1,
                got: values.len(),
            });
        }
        Ok(Self {
            rows: vec![Vec::new(); values.len() - start],
            targets: values[start..].to_vec(),
            origin: (start..values.len()).collect(),
            lag_order: 0,
        })
    }

    pub fn from_parts(rows: Vec<Vec<f64>>, targets: Vec<f64>, origin: Vec<usize>) -> Result<Self> {
        if rows.len() != targets.len() || rows.len() != origin.len() {
            return Err(Error::LengthMismatch {
                what: "targets",
                expected: rows.len(),
                got: targets.len(),
            });
        }
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: bad.len(),
            });
        }
        Ok(Self {
            rows,
            targets,
            origin,
            lag_order: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    /// Index of the first row whose target time is `>= time`.
    pub fn first_row_at_or_after(&self, time: usize) -> usize {
        self.origin.partition_point(|&t| t < time)
    }
}

/// Builds lag features of order `lag_order`, optionally appending the
/// exogenous feature row of the target time.
pub fn build_lag_features(
    values: &[f64],
    lag_order: usize,
    features: Option<&[Vec<f64>]>,
) -> Result<LagMatrix> {
    if lag_order == 0 {
        return Err(Error::InvalidParameter("lag order must be >= 1".into()));
    }
    if values.len() <= lag_order {
        return Err(Error::SeriesTooShort {
            needed: lag_order + 1,
            got: values.len(),
        });
    }
    if let Some(f) = features {
        if f.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "features",
                expected: values.len(),
                got: f.len(),
            });
        }
    }
    let n = values.len() - lag_order;
    let mut rows = Vec::with_capacity(n);
    for t in lag_order..values.len() {
        let mut row = values[t - lag_order..t].to_vec();
        if let Some(f) = features {
            row.extend_from_slice(&f[t]);
        }
        rows.push(row);
    }
    Ok(LagMatrix {
        rows,
        targets: values[lag_order..].to_vec(),
        origin: (lag_order..values.len()).collect(),
        lag_order,
    })
}

/// `intercept + coefficients · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub ridge_penalty: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(self, x)
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

pub fn predict(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            got: x.len(),
        });
    }
    Ok(model.predict_unchecked(x))
}

/// Minimizes `||y - X b - c||^2 + ridge ||b||^2` over all rows.
pub fn fit_linear(lm: &LagMatrix, ridge_penalty: f64) -> Result<LinearModel> {
    let all: Vec<usize> = (0..lm.len()).collect();
    fit_linear_rows(lm, &all, ridge_penalty)
}

/// [`fit_linear`] restricted to `rows` (repeats allowed, as in a bootstrap
/// resample). The intercept is not penalized.
pub fn fit_linear_rows(lm: &LagMatrix, rows: &[usize], ridge_penalty: f64) -> Result<LinearModel> {
    if !(ridge_penalty >= 0.0 && ridge_penalty.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge penalty must be finite and >= 0, got {ridge_penalty}"
        )));
    }
    if rows.is_empty() {
        return Err(Error::TooFewRows { rows: 0, folds: 1 });
    }
    let p = lm.n_features();
    let n = rows.len() as f64;
    let y_mean = rows.iter().map(|&r| lm.targets[r]).sum::<f64>() / n;
    if p == 0 {
        return Ok(LinearModel {
            coefficients: Vec::new(),
            intercept: y_mean,
            ridge_penalty,
        });
    }
    if ridge_penalty == 0.0 && rows.len() < p {
        return Err(Error::SingularDesign);
    }
    let mut x_mean = vec![0.0; p];
    for &r in rows {
        for (m, v) in x_mean.iter_mut().zip(&lm.rows[r]) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut centered = vec![0.0; p];
    for &r in rows {
        for (c, (v, m)) in centered.iter_mut().zip(lm.rows[r].iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = lm.targets[r] - y_mean;
        for i in 0..p {
            xty[i] += centered[i] * yc;
            for j in 0..=i {
                gram[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let max_diag = (0..p).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
    for i in 0..p {
        gram[(i, i)] += ridge_penalty;
    }
    let chol = gram.cholesky().ok_or(Error::SingularDesign)?;
    if ridge_penalty == 0.0 {
        let l = chol.l_dirty();
        let min_pivot = (0..p)
            .map(|i| l[(i, i)] * l[(i, i)])
            .fold(f64::INFINITY, f64::min);
        if max_diag == 0.0 || min_pivot <= 1e-12 * max_diag {
            return Err(Error::SingularDesign);
        }
    }
    let beta = chol.solve(&xty);
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        coefficients: beta.iter().copied().collect(),
        intercept,
        ridge_penalty,
    })
}

/// `y[t] - y[t-1]` for `t >= 1`.
pub fn difference(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Inverse of [`difference`] given the first value.
pub fn undifference(first: f64, diffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(diffs.len() + 1);
    out.push(first);
    let mut level = first;
    for d in diffs {
        level += d;
        out.push(level);
    }
    out
}

/// A linear AR model on first differences, predicting levels as
/// `y[t-1] + Δŷ[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceModel {
    pub model: LinearModel,
    pub lag_order: usize,
    pub last_value: f64,
}

pub fn fit_difference_model(
    values: &[f64],
    lag_order: usize,
    ridge_penalty: f64,
) -> Result<DifferenceModel> {
    if values.len() < lag_order + 2 {
        return Err(Error::SeriesTooShort {
            needed: lag_order + 2,
            got: values.len(),
        });
    }
    let diffs = difference(values);
    let lm = build_lag_features(&diffs, lag_order, None)?;
    Ok(DifferenceModel {
        model: fit_linear(&lm, ridge_penalty)?,
        lag_order,
        last_value: values[values.len() - 1],
    })
}

impl DifferenceModel {
    /// One-step prediction of the next level after `history`.
    pub fn predict_undifferenced(&self, history: &[f64]) -> Result<f64> {
        if history.len() < self.lag_order + 1 {
            return Err(Error::SeriesTooShort {
                needed: self.lag_order + 1,
                got: history.len(),
            });
        }
        let tail = &history[history.len() - self.lag_order - 1..];
        let lags = difference(tail);
        Ok(tail[tail.len() - 1] + self.model.predict(&lags)?)
    }

    /// Prediction following the training series itself.
    pub fn predict_next(&self, training: &[f64]) -> Result<f64> {
        self.predict_undifferenced(training)
    }
}

/// `B` linear models fit on with-replacement resamples of the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    models: Vec<LinearModel>,
    in_bag: Vec<Vec<bool>>,
    seed: u64,
}

const BOOTSTRAP_RETRIES: usize = 50;

pub fn bootstrap_fit(
    lm: &LagMatrix,
    b: usize,
    seed: u64,
    ridge_penalty: f64,
) -> Result<BootstrapEnsemble> {
    if b < 2 {
        return Err(Error::InvalidParameter(format!(
            "ensemble size must be >= 2, got {b}"
        )));
    }
    let n = lm.len();
    if n == 0 {
        return Err(Error::TooFewRows { rows: 0, folds: b });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..=BOOTSTRAP_RETRIES {
        let samples: Vec<Vec<usize>> = (0..b)
            .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
            .collect();
        let in_bag: Vec<Vec<bool>> = samples
            .iter()
            .map(|s| {
                let mut mask = vec![false; n];
                s.iter().for_each(|&i| mask[i] = true);
                mask
            })
            .collect();
        let covered = (0..n).all(|i| in_bag.iter().any(|mask| !mask[i]));
        if !covered {
            continue;
        }
        let models = samples
            .par_iter()
            .map(|rows| fit_linear_rows(lm, rows, ridge_penalty))
            .collect::<Result<Vec<_>>>()?;
        return Ok(BootstrapEnsemble {
            models,
            in_bag,
            seed,
        });
    }
    Err(Error::CoverageFailure {
        retries: BOOTSTRAP_RETRIES,
    })
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[LinearModel] {
        &self.models
    }

    pub fn in_bag_masks(&self) -> &[Vec<bool>] {
        &self.in_bag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean prediction over every member.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for m in &self.models {
            sum += m.predict(x)?;
        }
        Ok(sum / self.models.len() as f64)
    }

    /// Mean prediction over the members that did not train on `row`.
    pub fn predict_out_of_bag(&self, row: usize, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (m, mask) in self.models.iter().zip(&self.in_bag) {
            if !mask[row] {
                sum += m.predict(x)?;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::CoverageFailure { retries: 0 });
        }
        Ok(sum / count as f64)
    }
}
