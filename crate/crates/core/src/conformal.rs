//! Nonconformity scores, the weighted conformal quantile, split conformal
//! prediction and CV+.
//!
//! Every method in this crate reduces to [`weighted_quantile`]: the
//! `level`-quantile of the distribution putting mass `w_i` on score `s_i` and
//! the leftover mass `w_{n+1}` on `+∞`. Uniform weights `1 / (n + 1)` recover
//! split conformal prediction.

use crate::error::{Error, Result};
use crate::regress::{fit_linear_rows, LagMatrix, LinearModel};
use crate::types::{check_alpha, Interval};

/// Slack used when comparing cumulative weights against a level, so that
/// e.g. 18 · (1/20) still reaches 0.9 after rounding.
pub const LEVEL_TOLERANCE: f64 = 1e-12;

/// Absolute residuals `|ŷ_i - y_i|`.
pub fn residual_scores(predictions: &[f64], actuals: &[f64]) -> Result<Vec<f64>> {
    if predictions.len() != actuals.len() {
        return Err(Error::LengthMismatch {
            what: "actuals",
            expected: predictions.len(),
            got: actuals.len(),
        });
    }
    Ok(predictions
        .iter()
        .zip(actuals)
        .map(|(p, y)| (p - y).abs())
        .collect())
}

/// Divides raw nonnegative weights (calibration weights followed by the test
/// point's mass) by their total.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Calibration scores with one weight each plus a trailing weight for the
/// test point's mass at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedScoreSet {
    scores: Vec<f64>,
    weights: Vec<f64>,
    normalized: bool,
}

impl WeightedScoreSet {
    /// `raw_weights` has `scores.len() + 1` entries; the last is the test mass.
    pub fn new(scores: Vec<f64>, raw_weights: Vec<f64>) -> Result<Self> {
        if raw_weights.len() != scores.len() + 1 {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: scores.len() + 1,
                got: raw_weights.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidParameter(
                "scores must be finite and nonnegative".into(),
            ));
        }
        if raw_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            scores,
            weights: raw_weights,
            normalized: false,
        })
    }

    /// Split-conformal weights: `1 / (n + 1)` everywhere.
    pub fn uniform(scores: Vec<f64>) -> Result<Self> {
        let n = scores.len();
        Self::new(scores, vec![1.0; n + 1])?.normalize()
    }

    pub fn normalize(mut self) -> Result<Self> {
        self.weights = normalize_weights(&self.weights)?;
        self.normalized = true;
        Ok(self)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn test_mass(&self) -> f64 {
        self.weights[self.scores.len()]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

/// Smallest score whose cumulative weight reaches `level`, or `+∞` when only
/// the test point's mass gets there. Zero-weight scores are ignored.
pub fn weighted_quantile(wss: &WeightedScoreSet, level: f64) -> Result<f64> {
    if !wss.normalized {
        return Err(Error::InvalidParameter(
            "weighted_quantile needs normalized weights".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must lie in (0, 1), got {level}"
        )));
    }
    let mut pairs: Vec<(f64, f64)> = wss
        .scores
        .iter()
        .zip(&wss.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(s, w)| (*s, *w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(quantile_of_sorted(&pairs, level))
}

/// `pairs` sorted by score; ties are merged by accumulating before testing.
pub(crate) fn quantile_of_sorted(pairs: &[(f64, f64)], level: f64) -> f64 {
    let target = level - LEVEL_TOLERANCE;
    let mut cumulative = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let score = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == score {
            cumulative += pairs[i].1;
            i += 1;
        }
        if cumulative >= target {
            return score;
        }
    }
    f64::INFINITY
}

/// Split-conformal quantile `q` at miscoverage `alpha`.
pub fn conformal_quantile(cal_scores: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let wss = WeightedScoreSet::uniform(cal_scores.to_vec())?;
    weighted_quantile(&wss, 1.0 - alpha)
}

/// `prediction ± q` with `q` the split-conformal quantile of `cal_scores`.
pub fn split_cp_interval(cal_scores: &[f64], alpha: f64, prediction: f64) -> Result<Interval> {
    if cal_scores.is_empty() {
        return Err(Error::TooFewRows { rows: 0, folds: 1 });
    }
    let q = conformal_quantile(cal_scores, alpha)?;
    Ok(Interval::symmetric(prediction, q))
}

/// `k`-th smallest (1-based) without fully sorting.
fn kth_smallest(values: &mut [f64], k: usize) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

/// CV+ over contiguous folds: one model per held-out fold plus the
/// out-of-fold residual of every row.
#[derive(Debug, Clone)]
pub struct CvPlus {
    fold_models: Vec<LinearModel>,
    fold_of_row: Vec<usize>,
    residuals: Vec<f64>,
}

impl CvPlus {
    /// Fits on all rows of `lm` using `folds` contiguous blocks.
    pub fn fit(lm: &LagMatrix, folds: usize, ridge_penalty: f64) -> Result<Self> {
        let n = lm.len();
        if folds < 2 || n < folds {
            return Err(Error::TooFewRows { rows: n, folds });
        }
        let bounds: Vec<usize> = (0..=folds).map(|k| k * n / folds).collect();
        let mut fold_of_row = vec![0; n];
        let mut fold_models = Vec::with_capacity(folds);
        let mut residuals = vec![0.0; n];
        for k in 0..folds {
            let held = bounds[k]..bounds[k + 1];
            let train: Vec<usize> = (0..n).filter(|r| !held.contains(r)).collect();
            let model = fit_linear_rows(lm, &train, ridge_penalty)?;
            for r in held {
                fold_of_row[r] = k;
                residuals[r] = (lm.targets()[r] - model.predict(lm.row(r))?).abs();
            }
            fold_models.push(model);
        }
        Ok(Self {
            fold_models,
            fold_of_row,
            residuals,
        })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Interval at `x`: lower is the ⌊α(n+1)⌋-th smallest of
    /// `μ_{-k(i)}(x) - R_i`, upper the ⌈(1-α)(n+1)⌉-th smallest of
    /// `μ_{-k(i)}(x) + R_i`, unbounded when the index falls outside `1..=n`.
    pub fn interval(&self, x: &[f64], alpha: f64) -> Result<Interval> {
        check_alpha(alpha)?;
        let fold_preds = self
            .fold_models
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        let n = self.residuals.len();
        let mut lows: Vec<f64> = Vec::with_capacity(n);
        let mut highs: Vec<f64> = Vec::with_capacity(n);
        for (r, k) in self.residuals.iter().zip(&self.fold_of_row) {
            lows.push(fold_preds[*k] - r);
            highs.push(fold_preds[*k] + r);
        }
        let m = (n + 1) as f64;
        let lo_rank = (alpha * m + 1e-9).floor() as usize;
        let hi_rank = ((1.0 - alpha) * m - 1e-9).ceil() as usize;
        let lower = if lo_rank == 0 {
            f64::NEG_INFINITY
        } else {
            kth_smallest(&mut lows, lo_rank.min(n))
        };
        let upper = if hi_rank > n {
            f64::INFINITY
        } else {
            kth_smallest(&mut highs, hi_rank.max(1))
        };
        // The ranks can only cross for alpha >= 0.5; collapse to the midpoint.
        if lower > upper {
            let mid = 0.5 * (lower + upper);
            return Ok(Interval::new(mid, mid));
        }
        Ok(Interval::new(lower, upper))
    }
}

/// One-shot CV+ interval for a single test feature vector.
pub fn cv_plus_interval(
    lm: &LagMatrix,
    folds: usize,
    alpha: f64,
    x_test: &[f64],
    ridge_penalty: f64,
) -> Result<Interval> {
    CvPlus::fit(lm, folds, ridge_penalty)?.interval(x_test, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn residual_score_examples() {
        assert_eq!(
            residual_scores(&[1.0, 2.0], &[1.0, 4.0]).unwrap(),
            vec![0.0, 2.0]
        );
        assert_eq!(residual_scores(&[0.0], &[-3.0]).unwrap(), vec![3.0]);
        assert_eq!(
            residual_scores(&[1.5, 2.5], &[1.5, 2.5]).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(residual_scores(&[1.0], &[]).is_err());
    }

    #[test]
    fn normalization_examples() {
        let w = normalize_weights(&[1.0; 5]).unwrap();
        assert!(w.iter().all(|v| (*v - 0.2).abs() < 1e-15));
        assert_eq!(
            normalize_weights(&[2.0, 0.0, 0.0]).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert!(matches!(
            normalize_weights(&[0.0, 0.0]),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn quantile_examples() {
        let wss = WeightedScoreSet::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(weighted_quantile(&wss, 0.8).unwrap(), 4.0);
        assert_eq!(weighted_quantile(&wss, 0.1).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&wss, 0.81).unwrap(), f64::INFINITY);

        let wss = WeightedScoreSet::new(vec![1.0], vec![0.5, 0.5])
            .unwrap()
            .normalize()
            .unwrap();
        assert_eq!(weighted_quantile(&wss, 0.9).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ties_are_merged() {
        let wss = WeightedScoreSet::uniform(vec![2.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(weighted_quantile(&wss, 0.6).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&wss, 0.61).unwrap(), 5.0);
    }

    #[test]
    fn zero_weight_scores_never_selected() {
        let wss = WeightedScoreSet::new(vec![100.0, 1.0, 2.0], vec![0.0, 1.0, 1.0, 1.0])
            .unwrap()
            .normalize()
            .unwrap();
        assert_eq!(weighted_quantile(&wss, 0.3).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&wss, 0.6).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&wss, 0.7).unwrap(), f64::INFINITY);
    }

    #[test]
    fn unnormalized_set_is_rejected() {
        let wss = WeightedScoreSet::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        assert!(weighted_quantile(&wss, 0.5).is_err());
    }

    #[test]
    fn split_cp_examples() {
        let scores: Vec<f64> = (1..=19).map(|v| v as f64).collect();
        let iv = split_cp_interval(&scores, 0.1, 0.0).unwrap();
        assert_eq!((iv.lower, iv.upper), (-18.0, 18.0));

        let iv = split_cp_interval(&[0.5, 0.7, 0.9], 0.01, 2.0).unwrap();
        assert!(iv.is_infinite());

        let iv = split_cp_interval(&[0.0; 10], 0.2, 3.5).unwrap();
        assert_eq!((iv.lower, iv.upper), (3.5, 3.5));
    }

    fn line(n: usize) -> LagMatrix {
        LagMatrix::from_parts(
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| 2.0 * i as f64 - 1.0).collect(),
            (0..n).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cv_plus_noiseless_collapses() {
        let lm = line(20);
        let iv = cv_plus_interval(&lm, 20, 0.1, &[30.0], 0.0).unwrap();
        assert!(iv.width() < 1e-6);
        assert_abs_diff_eq!(iv.lower, 59.0, epsilon = 1e-6);
        let iv = cv_plus_interval(&lm, 4, 0.1, &[7.0], 0.0).unwrap();
        assert!(iv.width() < 1e-6);
    }

    #[test]
    fn cv_plus_needs_enough_rows() {
        assert!(matches!(
            CvPlus::fit(&line(3), 5, 0.0),
            Err(Error::TooFewRows { rows: 3, folds: 5 })
        ));
        assert!(CvPlus::fit(&line(10), 1, 0.0).is_err());
    }

    #[test]
    fn cv_plus_small_n_is_unbounded() {
        let mut lm = line(5);
        lm = LagMatrix::from_parts(
            lm.rows().to_vec(),
            lm.targets()
                .iter()
                .enumerate()
                .map(|(i, y)| y + (i % 2) as f64)
                .collect(),
            lm.origin().to_vec(),
        )
        .unwrap();
        let iv = cv_plus_interval(&lm, 5, 0.1, &[2.0], 0.0).unwrap();
        assert!(iv.lower.is_infinite() && iv.upper.is_infinite());
    }
}
