//! Shared domain vocabulary: series, splits, intervals, component labels and
//! method configuration.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stl::StlConfig;

/// A gap-free univariate series with a declared seasonal period and optional
/// exogenous covariates (one row per time step).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    time_index: Vec<i64>,
    period: usize,
    features: Option<Vec<Vec<f64>>>,
}

impl TimeSeries {
    /// Builds a series, checking the structural invariants that do not depend
    /// on whether a decomposition will be requested.
    pub fn new(values: Vec<f64>, period: usize, features: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if period < 2 {
            return Err(Error::PeriodTooSmall(period));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "value at position {pos} is not finite"
            )));
        }
        if let Some(rows) = &features {
            if rows.len() != values.len() {
                return Err(Error::LengthMismatch {
                    what: "features",
                    expected: values.len(),
                    got: rows.len(),
                });
            }
            let width = rows.first().map_or(0, Vec::len);
            if let Some(bad) = rows.iter().find(|r| r.len() != width) {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: bad.len(),
                });
            }
        }
        let time_index = (1..=values.len() as i64).collect();
        Ok(Self {
            values,
            time_index,
            period,
            features,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time_index(&self) -> &[i64] {
        &self.time_index
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn features(&self) -> Option<&[Vec<f64>]> {
        self.features.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Checks every [`TimeSeries`] invariant, including the decomposition
/// requirement `period <= len / 2`.
pub fn validate_series(series: TimeSeries) -> Result<TimeSeries> {
    if series.values.is_empty() {
        return Err(Error::EmptySeries);
    }
    if series.time_index.len() != series.values.len() {
        return Err(Error::LengthMismatch {
            what: "time_index",
            expected: series.values.len(),
            got: series.time_index.len(),
        });
    }
    if let Some(rows) = &series.features {
        if rows.len() != series.values.len() {
            return Err(Error::LengthMismatch {
                what: "features",
                expected: series.values.len(),
                got: rows.len(),
            });
        }
    }
    if series.period < 2 {
        return Err(Error::PeriodTooSmall(series.period));
    }
    if series.period > series.values.len() / 2 {
        return Err(Error::PeriodTooLarge {
            period: series.period,
            len: series.values.len(),
        });
    }
    Ok(series)
}

/// Contiguous train / calibration / test split. Stored as 0-based exclusive
/// ends, which coincide with the 1-based inclusive ends `train_end`, `cal_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    train_end: usize,
    cal_end: usize,
    len: usize,
}

impl SplitSpec {
    pub fn new(train_end: usize, cal_end: usize, len: usize) -> Result<Self> {
        if !(1 <= train_end && train_end < cal_end && cal_end < len) {
            return Err(Error::InvalidSplit(format!(
                "need 1 <= train_end ({train_end}) < cal_end ({cal_end}) < len ({len})"
            )));
        }
        Ok(Self {
            train_end,
            cal_end,
            len,
        })
    }

    /// Split by fractions of the series length (the remainder goes to test).
    pub fn from_fractions(len: usize, train: f64, cal: f64) -> Result<Self> {
        if !(train > 0.0 && cal > 0.0 && train + cal < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "fractions train={train}, cal={cal} must be positive and sum below 1"
            )));
        }
        let train_end = (len as f64 * train).round() as usize;
        let cal_end = (len as f64 * (train + cal)).round() as usize;
        Self::new(train_end, cal_end, len)
    }

    pub fn train_end(&self) -> usize {
        self.train_end
    }

    pub fn cal_end(&self) -> usize {
        self.cal_end
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn train(&self) -> Range<usize> {
        0..self.train_end
    }

    pub fn calibration(&self) -> Range<usize> {
        self.train_end..self.cal_end
    }

    pub fn test(&self) -> Range<usize> {
        self.cal_end..self.len
    }
}

/// Output of an additive seasonal-trend decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

impl DecompositionResult {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    /// `max_t |y_t - (T_t + S_t + R_t)| / (1 + |y_t|)`.
    pub fn max_relative_residual(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(t, y)| {
                let sum = self.trend[t] + self.seasonal[t] + self.remainder[t];
                (y - sum).abs() / (1.0 + y.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn component(&self, which: Component) -> Option<&[f64]> {
        match which {
            Component::Trend => Some(&self.trend),
            Component::Seasonal => Some(&self.seasonal),
            Component::Remainder => Some(&self.remainder),
            _ => None,
        }
    }
}

/// Which signal an interval series describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Trend,
    Seasonal,
    Remainder,
    Recomposed,
    Raw,
}

impl Component {
    pub fn as_str(&self) -> &'static str {
        match self {
            Component::Trend => "trend",
            Component::Seasonal => "seasonal",
            Component::Remainder => "remainder",
            Component::Recomposed => "recomposed",
            Component::Raw => "raw",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single prediction interval. Unbounded sides use `f64::INFINITY` /
/// `f64::NEG_INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper, "interval [{lower}, {upper}] is inverted");
        Self { lower, upper }
    }

    /// `center ± half_width`; an infinite half width yields the whole line.
    pub fn symmetric(center: f64, half_width: f64) -> Self {
        if half_width.is_infinite() {
            Self::unbounded()
        } else {
            Self::new(center - half_width, center + half_width)
        }
    }

    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_infinite(&self) -> bool {
        self.lower.is_infinite() || self.upper.is_infinite()
    }

    /// Boundary-inclusive membership.
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Per-step bounds for one component (or the recomposed whole).
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSeries {
    lower: Vec<f64>,
    upper: Vec<f64>,
    component: Component,
    flagged: Vec<bool>,
}

impl IntervalSeries {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, component: Component) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                what: "upper bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(t) = lower
            .iter()
            .zip(&upper)
            .position(|(l, u)| l.is_nan() || u.is_nan() || l > u)
        {
            return Err(Error::InvalidParameter(format!(
                "interval at step {t} is inverted or NaN: [{}, {}]",
                lower[t], upper[t]
            )));
        }
        let flagged = vec![false; lower.len()];
        Ok(Self {
            lower,
            upper,
            component,
            flagged,
        })
    }

    pub fn from_intervals(intervals: &[Interval], component: Component) -> Result<Self> {
        let (lower, upper) = intervals.iter().map(|iv| (iv.lower, iv.upper)).unzip();
        Self::new(lower, upper, component)
    }

    /// Attaches per-step diagnostic flags (e.g. an empty weighted selection).
    pub fn with_flags(mut self, flagged: Vec<bool>) -> Result<Self> {
        if flagged.len() != self.lower.len() {
            return Err(Error::LengthMismatch {
                what: "flags",
                expected: self.lower.len(),
                got: flagged.len(),
            });
        }
        self.flagged = flagged;
        Ok(self)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn get(&self, t: usize) -> Interval {
        Interval {
            lower: self.lower[t],
            upper: self.upper[t],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Interval> + '_ {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lower, &upper)| Interval { lower, upper })
    }

    pub fn has_infinite(&self) -> bool {
        self.iter().any(|iv| iv.is_infinite())
    }

    pub fn relabel(mut self, component: Component) -> Self {
        self.component = component;
        self
    }
}

/// Conformal procedures that can be assigned to a component or to the raw
/// series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    EnbPI,
    ACI,
    #[serde(rename = "CV+", alias = "CVPlus")]
    CVPlus,
    BinaryPoint,
    BinaryLocal,
    ExpLocal,
    KNN,
    FeatDistPoint,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::EnbPI => "EnbPI",
            Method::ACI => "ACI",
            Method::CVPlus => "CV+",
            Method::BinaryPoint => "BinaryPoint",
            Method::BinaryLocal => "BinaryLocal",
            Method::ExpLocal => "ExpLocal",
            Method::KNN => "KNN",
            Method::FeatDistPoint => "FeatDistPoint",
        }
    }

    /// Methods driven by a seasonal or feature weighting of a fixed
    /// calibration set.
    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            Method::BinaryPoint
                | Method::BinaryLocal
                | Method::ExpLocal
                | Method::KNN
                | Method::FeatDistPoint
        )
    }

    pub fn allowed_for_trend(&self) -> bool {
        matches!(self, Method::EnbPI | Method::ACI)
    }

    pub fn allowed_for_season(&self) -> bool {
        !matches!(self, Method::CVPlus)
    }

    pub fn allowed_for_remainder(&self) -> bool {
        matches!(self, Method::EnbPI | Method::ACI | Method::CVPlus)
    }

    pub fn allowed_for_raw(&self) -> bool {
        self.allowed_for_remainder()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which conformal method handles which component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodAssignment {
    pub trend: Method,
    pub season: Method,
    pub remainder: Method,
    pub alpha: f64,
    #[serde(default)]
    pub bonferroni: bool,
}

impl MethodAssignment {
    pub fn new(trend: Method, season: Method, remainder: Method, alpha: f64) -> Result<Self> {
        let assignment = Self {
            trend,
            season,
            remainder,
            alpha,
            bonferroni: false,
        };
        assignment.validate()?;
        Ok(assignment)
    }

    pub fn with_bonferroni(mut self, on: bool) -> Self {
        self.bonferroni = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !self.trend.allowed_for_trend() {
            return Err(Error::InvalidParameter(format!(
                "{} cannot be used for the trend",
                self.trend
            )));
        }
        if !self.season.allowed_for_season() {
            return Err(Error::InvalidParameter(format!(
                "{} cannot be used for the seasonal component",
                self.season
            )));
        }
        if !self.remainder.allowed_for_remainder() {
            return Err(Error::InvalidParameter(format!(
                "{} cannot be used for the remainder",
                self.remainder
            )));
        }
        Ok(())
    }

    /// Per-component miscoverage rate, `alpha / 3` when Bonferroni is on.
    pub fn component_alpha(&self) -> f64 {
        if self.bonferroni {
            crate::pipeline::bonferroni_alpha(self.alpha, 3)
        } else {
            self.alpha
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.trend, self.season, self.remainder)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// How component values are produced for test timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestDecomposition {
    /// One fit on train + calibration; seasonal extended periodically, trend
    /// extended by its component regressor, remainder is what is left over.
    #[default]
    Extend,
    /// Refit on all data observed so far at every test step and keep the
    /// components of the newest point.
    Refit,
    /// One fit over the whole series including the test range.
    FullSeries,
}

/// Tuning knobs for every conformal method and regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// ACI step size.
    pub gamma: f64,
    /// EnbPI bootstrap ensemble size.
    pub ensemble_size: usize,
    /// EnbPI steps between residual-quantile refreshes.
    pub window_length: usize,
    /// CV+ fold count.
    pub cv_folds: usize,
    /// BinaryLocal neighbourhood half-width (positions).
    pub neighborhood: usize,
    /// ExpLocal decay; `None` derives it from the period.
    pub decay: Option<f64>,
    /// KNN neighbour count; `None` keeps half of the calibration set.
    pub knn_k: Option<usize>,
    /// Autoregressive lag order; `None` uses the period.
    pub lag_order: Option<usize>,
    pub ridge_penalty: f64,
    /// Train component and raw regressors on first differences.
    pub difference: bool,
    /// Keep only the most recent `n` periods of calibration weight.
    pub recency_periods: Option<usize>,
    /// Wrap-around position distance for BinaryLocal / ExpLocal.
    pub circular_distance: bool,
    /// Standardize features before KNN / FeatDistPoint distances.
    pub standardize_features: bool,
    pub stl: StlConfig,
    pub test_decomposition: TestDecomposition,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            ensemble_size: 20,
            window_length: 1,
            cv_folds: 20,
            neighborhood: 1,
            decay: None,
            knn_k: None,
            lag_order: None,
            ridge_penalty: 1e-6,
            difference: false,
            recency_periods: None,
            circular_distance: true,
            standardize_features: false,
            stl: StlConfig::default(),
            test_decomposition: TestDecomposition::default(),
            seed: 42,
        }
    }
}

impl HyperParams {
    pub fn lag_order_for(&self, period: usize) -> usize {
        self.lag_order.unwrap_or(period)
    }

    /// `exp(-decay * period / 2) ~ 0.01`, capped below one.
    pub fn decay_for(&self, period: usize) -> f64 {
        self.decay
            .unwrap_or_else(|| (2.0 * 100f64.ln() / period as f64).min(0.99))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if self.ensemble_size < 2 {
            return Err(Error::InvalidParameter(
                "ensemble_size must be at least 2".into(),
            ));
        }
        if self.window_length == 0 {
            return Err(Error::InvalidParameter("window_length must be >= 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter(
                "cv_folds must be at least 2".into(),
            ));
        }
        if let Some(d) = self.decay {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidParameter(format!("decay {d} not in (0, 1)")));
            }
        }
        if self.lag_order == Some(0) {
            return Err(Error::InvalidParameter("lag_order must be >= 1".into()));
        }
        if self.knn_k == Some(0) {
            return Err(Error::InvalidParameter("knn_k must be >= 1".into()));
        }
        if self.recency_periods == Some(0) {
            return Err(Error::InvalidParameter(
                "recency_periods must be >= 1".into(),
            ));
        }
        if !(self.ridge_penalty >= 0.0 && self.ridge_penalty.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge_penalty = {}",
                self.ridge_penalty
            )));
        }
        self.stl.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(len: usize, period: usize) -> TimeSeries {
        TimeSeries::new((0..len).map(|t| t as f64).collect(), period, None).unwrap()
    }

    #[test]
    fn validate_accepts_half_length_period() {
        assert!(validate_series(series(100, 30)).is_ok());
        assert!(validate_series(series(100, 50)).is_ok());
    }

    #[test]
    fn validate_rejects_long_period() {
        assert!(matches!(
            validate_series(series(100, 60)),
            Err(Error::PeriodTooLarge {
                period: 60,
                len: 100
            })
        ));
    }

    #[test]
    fn empty_series_is_rejected() {
        assert!(matches!(
            TimeSeries::new(vec![], 7, None),
            Err(Error::EmptySeries)
        ));
    }

    #[test]
    fn feature_rows_must_match() {
        let err = TimeSeries::new(vec![1.0, 2.0, 3.0], 2, Some(vec![vec![0.0]; 2])).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn time_index_is_one_based() {
        assert_eq!(series(4, 2).time_index(), &[1, 2, 3, 4]);
    }

    #[test]
    fn split_partitions_range() {
        let split = SplitSpec::from_fractions(3000, 0.5, 0.25).unwrap();
        assert_eq!(split.train(), 0..1500);
        assert_eq!(split.calibration(), 1500..2250);
        assert_eq!(split.test(), 2250..3000);
        for len in 3..60 {
            for a in 1..len {
                for b in a + 1..len {
                    let s = SplitSpec::new(a, b, len).unwrap();
                    let total = s.train().len() + s.calibration().len() + s.test().len();
                    assert_eq!(total, len);
                    assert_eq!(s.train().end, s.calibration().start);
                    assert_eq!(s.calibration().end, s.test().start);
                }
            }
        }
        assert!(SplitSpec::new(0, 2, 5).is_err());
        assert!(SplitSpec::new(3, 3, 5).is_err());
        assert!(SplitSpec::new(2, 5, 5).is_err());
    }

    #[test]
    fn interval_series_rejects_inverted_bounds() {
        assert!(IntervalSeries::new(vec![0.0, 2.0], vec![1.0, 1.0], Component::Raw).is_err());
        let ok = IntervalSeries::new(
            vec![f64::NEG_INFINITY, 0.0],
            vec![f64::INFINITY, 0.0],
            Component::Raw,
        )
        .unwrap();
        assert!(ok.has_infinite());
    }

    #[test]
    fn assignment_slots_are_enforced() {
        assert!(
            MethodAssignment::new(Method::EnbPI, Method::BinaryPoint, Method::CVPlus, 0.1).is_ok()
        );
        assert!(MethodAssignment::new(Method::CVPlus, Method::EnbPI, Method::EnbPI, 0.1).is_err());
        assert!(MethodAssignment::new(Method::EnbPI, Method::CVPlus, Method::EnbPI, 0.1).is_err());
        assert!(
            MethodAssignment::new(Method::EnbPI, Method::EnbPI, Method::BinaryPoint, 0.1).is_err()
        );
        assert!(MethodAssignment::new(Method::EnbPI, Method::EnbPI, Method::EnbPI, 1.0).is_err());
    }

    #[test]
    fn bonferroni_divides_alpha() {
        let a = MethodAssignment::new(Method::EnbPI, Method::EnbPI, Method::EnbPI, 0.3)
            .unwrap()
            .with_bonferroni(true);
        assert!((a.component_alpha() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn default_decay_for_period_thirty() {
        let hp = HyperParams::default();
        let lam = hp.decay_for(30);
        assert!(((-lam * 15.0).exp() - 0.01).abs() < 1e-12);
        assert_eq!(hp.decay_for(2), 0.99);
    }
}
