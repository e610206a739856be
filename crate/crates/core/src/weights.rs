//! Calibration weighting schemes for the seasonal component.
//!
//! Position-based schemes look only at where each calibration sample sits in
//! its period relative to the test sample: BinaryPoint keeps exact matches,
//! BinaryLocal a neighbourhood of positions, ExpLocal decays exponentially
//! with position distance. Feature-based schemes (KNN, FeatDistPoint) use
//! Euclidean distances between feature vectors instead. None of them look at
//! the scores.
//!
//! Every function returns raw (unnormalized) calibration weights; the mass
//! given to the test point is reported by [`test_mass`].

use crate::error::{Error, Result};
use crate::types::Method;

/// Period positions of the calibration samples and of the test sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeasonContext {
    tau: usize,
    test_position: usize,
    cal_positions: Vec<usize>,
    circular: bool,
}

impl SeasonContext {
    /// Calibration samples indexed `1..=n` with position `i mod tau`, and an
    /// explicit test position.
    pub fn new(tau: usize, n: usize, test_position: usize) -> Result<Self> {
        let cal_positions = (1..=n).map(|i| i % tau.max(1)).collect();
        Self::from_positions(tau, cal_positions, test_position)
    }

    /// Context for the `step`-th test sample after `n` calibration samples,
    /// i.e. test index `n + step` (`step >= 1`).
    pub fn sequential(tau: usize, n: usize, step: usize) -> Result<Self> {
        Self::new(tau, n, (n + step) % tau.max(1))
    }

    pub fn from_positions(
        tau: usize,
        cal_positions: Vec<usize>,
        test_position: usize,
    ) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidParameter("period must be positive".into()));
        }
        if test_position >= tau || cal_positions.iter().any(|p| *p >= tau) {
            return Err(Error::InvalidParameter(format!(
                "positions must lie in 0..{tau}"
            )));
        }
        Ok(Self {
            tau,
            test_position,
            cal_positions,
            circular: true,
        })
    }

    /// Use `|pos_i - pos_test|` without wrap-around.
    pub fn linear_distance(mut self) -> Self {
        self.circular = false;
        self
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn test_position(&self) -> usize {
        self.test_position
    }

    pub fn cal_positions(&self) -> &[usize] {
        &self.cal_positions
    }

    pub fn is_circular(&self) -> bool {
        self.circular
    }

    /// Distance between calibration sample `i` (0-based) and the test sample.
    pub fn distance(&self, i: usize) -> usize {
        let d = self.cal_positions[i].abs_diff(self.test_position);
        if self.circular {
            d.min(self.tau - d)
        } else {
            d
        }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.cal_positions.len() {
            return Err(Error::LengthMismatch {
                what: "calibration positions",
                expected: n,
                got: self.cal_positions.len(),
            });
        }
        Ok(())
    }
}

/// Weight 1 where the calibration position equals the test position.
pub fn binary_point_weights(ctx: &SeasonContext, n: usize) -> Result<Vec<f64>> {
    ctx.check_len(n)?;
    Ok(ctx
        .cal_positions
        .iter()
        .map(|p| if *p == ctx.test_position { 1.0 } else { 0.0 })
        .collect())
}

/// Weight 1 within position distance `k` of the test position.
pub fn binary_local_weights(ctx: &SeasonContext, n: usize, k: usize) -> Result<Vec<f64>> {
    ctx.check_len(n)?;
    if 2 * k >= ctx.tau {
        return Err(Error::NeighborhoodTooLarge { k, period: ctx.tau });
    }
    Ok((0..n)
        .map(|i| if ctx.distance(i) <= k { 1.0 } else { 0.0 })
        .collect())
}

/// `lambda * exp(-lambda * Δτ_i)`.
pub fn exp_local_weights(ctx: &SeasonContext, n: usize, lambda: f64) -> Result<Vec<f64>> {
    ctx.check_len(n)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decay must lie in (0, 1), got {lambda}"
        )));
    }
    Ok((0..n)
        .map(|i| lambda * (-lambda * ctx.distance(i) as f64).exp())
        .collect())
}

/// Zeroes the weight of every calibration index `i <= n - keep_periods * tau`
/// (1-based), keeping only the most recent periods.
pub fn recency_filter(raw: &[f64], n: usize, tau: usize, keep_periods: usize) -> Result<Vec<f64>> {
    if keep_periods == 0 {
        return Err(Error::InvalidParameter("keep_periods must be >= 1".into()));
    }
    if raw.len() != n {
        return Err(Error::LengthMismatch {
            what: "raw weights",
            expected: n,
            got: raw.len(),
        });
    }
    let cutoff = n.saturating_sub(keep_periods.saturating_mul(tau));
    Ok(raw
        .iter()
        .enumerate()
        .map(|(i, w)| if i < cutoff { 0.0 } else { *w })
        .collect())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn distances(cal_features: &[Vec<f64>], test_features: &[f64]) -> Result<Vec<f64>> {
    cal_features
        .iter()
        .map(|row| {
            if row.len() != test_features.len() {
                Err(Error::DimensionMismatch {
                    expected: row.len(),
                    got: test_features.len(),
                })
            } else {
                Ok(euclidean(row, test_features))
            }
        })
        .collect()
}

/// Weight 1 for the `k` calibration samples nearest the test features; ties
/// at the boundary go to the lower index.
pub fn knn_weights(cal_features: &[Vec<f64>], test_features: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = cal_features.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "knn k must lie in 1..={n}, got {k}"
        )));
    }
    let d = distances(cal_features, test_features)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let mut w = vec![0.0; n];
    for &i in &order[..k] {
        w[i] = 1.0;
    }
    Ok(w)
}

/// Inverse-distance weights `1 / d_i`. A zero distance gets ten times the
/// largest finite weight (or 1 when every distance is zero).
pub fn feat_dist_weights(cal_features: &[Vec<f64>], test_features: &[f64]) -> Result<Vec<f64>> {
    let d = distances(cal_features, test_features)?;
    let max_finite = d
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| 1.0 / v)
        .fold(f64::NAN, f64::max);
    let zero_weight = if max_finite.is_nan() {
        1.0
    } else {
        10.0 * max_finite
    };
    Ok(d.iter()
        .map(|v| if *v > 0.0 { 1.0 / v } else { zero_weight })
        .collect())
}

/// Raw weight given to the test point itself under each scheme: the weight a
/// calibration sample at zero distance would get.
pub fn test_mass(method: Method, calibration: &[f64], decay: f64) -> f64 {
    match method {
        Method::ExpLocal => decay,
        Method::FeatDistPoint => calibration
            .iter()
            .copied()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE),
        _ => 1.0,
    }
}

/// Per-column standardization using calibration means and standard
/// deviations; constant columns are only centred.
pub fn standardize(cal_features: &[Vec<f64>], test_features: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = cal_features.len().max(1) as f64;
    let d = test_features.len();
    let mut mean = vec![0.0; d];
    for row in cal_features {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; d];
    for row in cal_features {
        for ((s, v), m) in sd.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let scale: Vec<f64> = sd
        .iter()
        .map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let apply = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .zip(&mean)
            .zip(&scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    };
    (
        cal_features.iter().map(|r| apply(r)).collect(),
        apply(test_features),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonzero(w: &[f64]) -> Vec<usize> {
        w.iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    #[test]
    fn binary_point_figure_setting() {
        let ctx = SeasonContext::new(7, 21, 4).unwrap();
        let w = binary_point_weights(&ctx, 21).unwrap();
        assert_eq!(nonzero(&w), vec![4, 11, 18]);
    }

    #[test]
    fn binary_point_degenerate_period_one() {
        let ctx = SeasonContext::new(1, 5, 0).unwrap();
        assert_eq!(binary_point_weights(&ctx, 5).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn binary_point_empty_selection() {
        // tau = 10, n = 3 occupies positions 1..=3 only
        let ctx = SeasonContext::new(10, 3, 7).unwrap();
        assert!(binary_point_weights(&ctx, 3)
            .unwrap()
            .iter()
            .all(|w| *w == 0.0));
    }

    #[test]
    fn binary_local_neighbourhood() {
        let ctx = SeasonContext::new(7, 21, 4).unwrap();
        let w = binary_local_weights(&ctx, 21, 1).unwrap();
        assert_eq!(nonzero(&w), vec![3, 4, 5, 10, 11, 12, 17, 18, 19]);
        let full = binary_local_weights(&SeasonContext::new(3, 9, 1).unwrap(), 9, 1).unwrap();
        assert_eq!(full, vec![1.0; 9]);
        assert!(matches!(
            binary_local_weights(&ctx, 21, 4),
            Err(Error::NeighborhoodTooLarge { k: 4, period: 7 })
        ));
    }

    #[test]
    fn circular_distance_wraps() {
        let ctx = SeasonContext::new(7, 14, 0).unwrap();
        let w = binary_local_weights(&ctx, 14, 1).unwrap();
        // positions 6, 0, 1 -> indices 1, 6, 7, 8, 13, 14
        assert_eq!(nonzero(&w), vec![1, 6, 7, 8, 13, 14]);
        let lin = binary_local_weights(&ctx.clone().linear_distance(), 14, 1).unwrap();
        assert_eq!(nonzero(&lin), vec![1, 7, 8, 14]);
    }

    #[test]
    fn exp_local_values() {
        let ctx = SeasonContext::new(7, 7, 3).unwrap();
        let w = exp_local_weights(&ctx, 7, 0.5).unwrap();
        assert!((w[2] - 0.5).abs() < 1e-15);
        // index 5 has position 5, distance 2
        assert!((w[4] - 0.5 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((w[4] - 0.18394).abs() < 1e-5);
        assert!(exp_local_weights(&ctx, 7, 1.0).is_err());
    }

    #[test]
    fn recency_examples() {
        let ones = vec![1.0; 21];
        assert_eq!(recency_filter(&ones, 21, 7, 3).unwrap(), ones);
        assert_eq!(recency_filter(&ones, 21, 7, 9).unwrap(), ones);
        let w = recency_filter(&ones, 21, 7, 1).unwrap();
        assert_eq!(nonzero(&w), (15..=21).collect::<Vec<_>>());
        let bp = binary_point_weights(&SeasonContext::new(7, 21, 4).unwrap(), 21).unwrap();
        assert_eq!(nonzero(&recency_filter(&bp, 21, 7, 1).unwrap()), vec![18]);
        assert!(recency_filter(&ones, 21, 7, 0).is_err());
    }

    #[test]
    fn knn_examples() {
        let cal: Vec<Vec<f64>> = [3.0, 1.0, 4.0, 1.5, 9.0].iter().map(|d| vec![*d]).collect();
        let w = knn_weights(&cal, &[0.0], 2).unwrap();
        assert_eq!(nonzero(&w), vec![2, 4]);
        assert_eq!(knn_weights(&cal, &[0.0], 5).unwrap(), vec![1.0; 5]);
        assert_eq!(nonzero(&knn_weights(&cal, &[0.0], 1).unwrap()), vec![2]);
        // tie between indices 1 and 2 at distance 1: lower index wins
        let tied = vec![vec![1.0], vec![-1.0], vec![5.0]];
        assert_eq!(nonzero(&knn_weights(&tied, &[0.0], 1).unwrap()), vec![1]);
        assert!(knn_weights(&cal, &[0.0, 1.0], 2).is_err());
        assert!(knn_weights(&cal, &[0.0], 0).is_err());
    }

    #[test]
    fn feat_dist_examples() {
        let cal: Vec<Vec<f64>> = [1.0, 2.0, 4.0].iter().map(|d| vec![*d]).collect();
        assert_eq!(
            feat_dist_weights(&cal, &[0.0]).unwrap(),
            vec![1.0, 0.5, 0.25]
        );
        let eq = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let w = feat_dist_weights(&eq, &[0.0, 0.0]).unwrap();
        assert!(w.iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let w = feat_dist_weights(&[vec![0.0], vec![1.0]], &[0.0]).unwrap();
        assert_eq!(w, vec![10.0, 1.0]);
    }

    #[test]
    fn standardize_scales_columns() {
        let cal = vec![vec![0.0, 5.0], vec![2.0, 5.0]];
        let (c, t) = standardize(&cal, &[1.0, 6.0]);
        assert_eq!(c, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(t, vec![0.0, 1.0]);
    }
}
