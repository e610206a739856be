//! Interval coverage and width.

use crate::error::{Error, Result};
use crate::types::IntervalSeries;

/// Fraction of `actuals` inside their interval, bounds inclusive.
pub fn picp(intervals: &IntervalSeries, actuals: &[f64]) -> Result<f64> {
    if intervals.len() != actuals.len() {
        return Err(Error::LengthMismatch {
            what: "actuals",
            expected: intervals.len(),
            got: actuals.len(),
        });
    }
    if actuals.is_empty() {
        return Err(Error::EmptySeries);
    }
    let covered = intervals
        .iter()
        .zip(actuals)
        .filter(|(iv, y)| iv.contains(**y))
        .count();
    Ok(covered as f64 / actuals.len() as f64)
}

/// Mean interval width. `infinite` is set when any interval is unbounded, in
/// which case `value` is `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piaw {
    pub value: f64,
    pub infinite: bool,
}

pub fn piaw(intervals: &IntervalSeries) -> Piaw {
    if intervals.is_empty() {
        return Piaw {
            value: 0.0,
            infinite: false,
        };
    }
    let total: f64 = intervals.iter().map(|iv| iv.width()).sum();
    let value = total / intervals.len() as f64;
    Piaw {
        value,
        infinite: value.is_infinite(),
    }
}
