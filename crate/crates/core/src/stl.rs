//! Seasonal-trend decomposition by LOESS (Cleveland et al., 1990).
//!
//! Each inner pass detrends the series, smooths every cycle-subseries
//! (extended by one point on either side), removes the low-frequency part of
//! that seasonal estimate with a moving-average / LOESS low-pass filter, and
//! re-estimates the trend from the deseasonalized series. Outer passes
//! recompute bisquare robustness weights when `robust` is set. The remainder
//! is always `y - trend - seasonal`, so reconstruction is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loess::{bisquare_weights, moving_average, LocalFit};
use crate::types::{DecompositionResult, TimeSeries};

/// How cycle-subseries are smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalWindow {
    /// LOESS with this (odd) span along each cycle-subseries.
    Span(usize),
    /// Replace each cycle-subseries by its (robustness-weighted) mean.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StlConfig {
    pub seasonal: SeasonalWindow,
    /// `None` picks the smallest odd integer >= 1.5 p / (1 - 1.5 / seasonal_span).
    pub trend_span: Option<usize>,
    /// `None` picks the smallest odd integer >= p.
    pub lowpass_span: Option<usize>,
    pub seasonal_degree: usize,
    pub trend_degree: usize,
    pub lowpass_degree: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub robust: bool,
}

impl Default for StlConfig {
    fn default() -> Self {
        Self {
            seasonal: SeasonalWindow::Span(7),
            trend_span: None,
            lowpass_span: None,
            seasonal_degree: 0,
            trend_degree: 1,
            lowpass_degree: 1,
            inner_iterations: 2,
            outer_iterations: 1,
            robust: false,
        }
    }
}

fn next_odd(x: f64) -> usize {
    let n = x.ceil() as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

impl StlConfig {
    pub fn periodic() -> Self {
        Self {
            seasonal: SeasonalWindow::Periodic,
            ..Self::default()
        }
    }

    pub fn trend_span_for(&self, period: usize) -> usize {
        self.trend_span.unwrap_or_else(|| {
            let p = period as f64;
            let raw = match self.seasonal {
                SeasonalWindow::Span(ns) => 1.5 * p / (1.0 - 1.5 / ns as f64),
                SeasonalWindow::Periodic => 1.5 * p,
            };
            next_odd(raw).max(3)
        })
    }

    pub fn lowpass_span_for(&self, period: usize) -> usize {
        self.lowpass_span
            .unwrap_or_else(|| next_odd(period as f64).max(3))
    }

    pub fn validate(&self) -> Result<()> {
        let odd = |name: &str, v: usize| {
            if v % 2 == 1 && v >= 3 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be odd and >= 3, got {v}"
                )))
            }
        };
        if let SeasonalWindow::Span(s) = self.seasonal {
            odd("seasonal span", s)?;
        }
        if let Some(s) = self.trend_span {
            odd("trend span", s)?;
        }
        if let Some(s) = self.lowpass_span {
            odd("low-pass span", s)?;
        }
        for (name, d) in [
            ("seasonal degree", self.seasonal_degree),
            ("trend degree", self.trend_degree),
            ("low-pass degree", self.lowpass_degree),
        ] {
            if d > 2 {
                return Err(Error::InvalidParameter(format!("{name} must be <= 2")));
            }
        }
        if self.inner_iterations == 0 || self.outer_iterations == 0 {
            return Err(Error::InvalidParameter(
                "STL needs at least one inner and one outer iteration".into(),
            ));
        }
        Ok(())
    }
}

/// Decomposes a validated series. Requires at least two full periods.
pub fn stl_decompose(series: &TimeSeries, config: &StlConfig) -> Result<DecompositionResult> {
    stl_decompose_values(series.values(), series.period(), config)
}

/// Same as [`stl_decompose`] on a raw slice.
pub fn stl_decompose_values(
    values: &[f64],
    period: usize,
    config: &StlConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    if period < 2 {
        return Err(Error::PeriodTooSmall(period));
    }
    let n = values.len();
    if n < 2 * period {
        return Err(Error::SeriesTooShort {
            needed: 2 * period,
            got: n,
        });
    }

    let trend_span = config.trend_span_for(period);
    let lowpass_span = config.lowpass_span_for(period);
    let positions: Vec<f64> = (1..=n).map(|i| i as f64).collect();

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut robustness: Option<Vec<f64>> = None;

    for _ in 0..config.outer_iterations {
        for _ in 0..config.inner_iterations {
            let detrended: Vec<f64> = values.iter().zip(&trend).map(|(y, t)| y - t).collect();
            let cycle = smooth_cycle_subseries(&detrended, period, config, robustness.as_deref());

            let low = moving_average(&cycle, period)?;
            let low = moving_average(&low, period)?;
            let low = moving_average(&low, 3)?;
            let low_fit = LocalFit {
                xs: &positions,
                ys: &low,
                span: lowpass_span,
                degree: config.lowpass_degree,
                robustness: None,
            };
            for (i, s) in seasonal.iter_mut().enumerate() {
                *s = cycle[period + i] - low_fit.fit(positions[i]);
            }

            let deseasonalized: Vec<f64> =
                values.iter().zip(&seasonal).map(|(y, s)| y - s).collect();
            let trend_fit = LocalFit {
                xs: &positions,
                ys: &deseasonalized,
                span: trend_span,
                degree: config.trend_degree,
                robustness: robustness.as_deref(),
            };
            for (i, t) in trend.iter_mut().enumerate() {
                *t = trend_fit.fit(positions[i]);
            }
        }
        if config.robust {
            let residuals: Vec<f64> = values
                .iter()
                .zip(&trend)
                .zip(&seasonal)
                .map(|((y, t), s)| y - t - s)
                .collect();
            robustness = Some(bisquare_weights(&residuals)?);
        }
    }

    let remainder = values
        .iter()
        .zip(&trend)
        .zip(&seasonal)
        .map(|((y, t), s)| y - t - s)
        .collect();
    Ok(DecompositionResult {
        trend,
        seasonal,
        remainder,
    })
}

/// Smooths each cycle-subseries and extends it by one value at both ends.
/// The result has `n + 2 * period` entries; entry `period + i` lines up with
/// observation `i`.
fn smooth_cycle_subseries(
    detrended: &[f64],
    period: usize,
    config: &StlConfig,
    robustness: Option<&[f64]>,
) -> Vec<f64> {
    let n = detrended.len();
    let mut out = vec![0.0; n + 2 * period];
    for j in 0..period {
        let ys: Vec<f64> = detrended[j..].iter().step_by(period).copied().collect();
        let rw: Option<Vec<f64>> =
            robustness.map(|rw| rw[j..].iter().step_by(period).copied().collect());
        let k = ys.len();
        let fitted: Vec<f64> = match config.seasonal {
            SeasonalWindow::Periodic => {
                let mean = weighted_mean(&ys, rw.as_deref());
                vec![mean; k + 2]
            }
            SeasonalWindow::Span(span) => {
                let xs: Vec<f64> = (1..=k).map(|i| i as f64).collect();
                let fit = LocalFit {
                    xs: &xs,
                    ys: &ys,
                    span,
                    degree: config.seasonal_degree,
                    robustness: rw.as_deref(),
                };
                (0..k + 2).map(|m| fit.fit(m as f64)).collect()
            }
        };
        for (m, v) in fitted.into_iter().enumerate() {
            out[m * period + j] = v;
        }
    }
    out
}

fn weighted_mean(ys: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) if w.iter().sum::<f64>() > 0.0 => {
            ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / w.iter().sum::<f64>()
        }
        _ => ys.iter().sum::<f64>() / ys.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn default_spans_for_period_thirty() {
        let cfg = StlConfig::default();
        // 1.5 * 30 / (1 - 1.5 / 7) = 57.27...
        assert_eq!(cfg.trend_span_for(30), 59);
        assert_eq!(cfg.lowpass_span_for(30), 31);
        assert_eq!(cfg.lowpass_span_for(7), 7);
        assert_eq!(StlConfig::periodic().trend_span_for(30), 45);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let values = vec![1.0; 59];
        assert!(matches!(
            stl_decompose_values(&values, 30, &StlConfig::default()),
            Err(Error::SeriesTooShort {
                needed: 60,
                got: 59
            })
        ));
    }

    #[test]
    fn pure_trend_goes_to_trend() {
        let values: Vec<f64> = (1..=300).map(|t| 0.1 * t as f64).collect();
        let d = stl_decompose_values(&values, 30, &StlConfig::default()).unwrap();
        let max_s = d.seasonal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_r = d.remainder.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_s < 0.5, "seasonal {max_s}");
        assert!(max_r < 0.5, "remainder {max_r}");
    }

    #[test]
    fn pure_sine_goes_to_seasonal() {
        let values: Vec<f64> = (1..=300)
            .map(|t| 100.0 * (2.0 * PI * t as f64 / 30.0).sin())
            .collect();
        let d = stl_decompose_values(&values, 30, &StlConfig::default()).unwrap();
        let r = correlation(&d.seasonal, &values);
        assert!(r > 0.99, "correlation {r}");
    }

    #[test]
    fn constant_series_has_flat_components() {
        let values = vec![4.2; 120];
        let d = stl_decompose_values(&values, 12, &StlConfig::default()).unwrap();
        assert!(d.seasonal.iter().all(|s| s.abs() < 1e-9));
        assert!(d.trend.iter().all(|t| (t - 4.2).abs() < 1e-9));
    }

    #[test]
    fn robust_mode_downweights_spike() {
        let mut values: Vec<f64> = (1..=240)
            .map(|t| {
                // bounded jitter keeps the median residual away from zero
                let jitter = ((t * 7919) % 13) as f64 / 13.0 - 0.5;
                10.0 * (2.0 * PI * t as f64 / 12.0).sin() + 0.05 * t as f64 + jitter
            })
            .collect();
        values[100] += 500.0;
        let cfg = StlConfig {
            robust: true,
            inner_iterations: 1,
            outer_iterations: 6,
            ..StlConfig::default()
        };
        let robust = stl_decompose_values(&values, 12, &cfg).unwrap();
        let plain = stl_decompose_values(&values, 12, &StlConfig::default()).unwrap();
        // The spike should stay in the remainder rather than leak into the trend.
        assert!(robust.remainder[100] > plain.remainder[100]);
        assert!(
            robust.remainder[100] > 450.0,
            "{} vs {}",
            robust.remainder[100],
            plain.remainder[100]
        );
    }

    #[test]
    fn periodic_mode_repeats_exactly() {
        let values: Vec<f64> = (1..=120)
            .map(|t| 3.0 * (2.0 * PI * t as f64 / 12.0).cos() + 0.02 * t as f64)
            .collect();
        let d = stl_decompose_values(&values, 12, &StlConfig::periodic()).unwrap();
        // Low-pass removal is not periodic at the edges, so compare the interior.
        for t in 24..96 {
            assert!((d.seasonal[t] - d.seasonal[t + 12]).abs() < 0.05);
        }
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
