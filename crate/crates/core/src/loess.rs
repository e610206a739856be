//! Locally weighted polynomial regression (LOESS) with a tricube kernel over
//! a nearest-neighbour window, plus the moving average and bisquare
//! robustness weights used by STL.

use crate::error::{Error, Result};

/// Window width, local degree and optional robustness weights for
/// [`loess_smooth`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoessConfig {
    span: usize,
    degree: usize,
    robustness_weights: Option<Vec<f64>>,
}

impl LoessConfig {
    pub fn new(span: usize, degree: usize) -> Result<Self> {
        if degree > 2 {
            return Err(Error::InvalidParameter(format!(
                "loess degree must be 0, 1 or 2, got {degree}"
            )));
        }
        if span % 2 == 0 || span < degree + 2 {
            return Err(Error::InvalidParameter(format!(
                "loess span must be odd and at least degree + 2, got {span}"
            )));
        }
        Ok(Self {
            span,
            degree,
            robustness_weights: None,
        })
    }

    pub fn with_robustness_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter(
                "robustness weights must lie in [0, 1]".into(),
            ));
        }
        self.robustness_weights = Some(weights);
        Ok(self)
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn robustness_weights(&self) -> Option<&[f64]> {
        self.robustness_weights.as_deref()
    }
}

/// Smooths `ys` observed at ascending abscissae `xs`, returning the local fit
/// at every `xs[i]`.
pub fn loess_smooth(xs: &[f64], ys: &[f64], config: &LoessConfig) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            what: "ys",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if ys.len() < config.span {
        return Err(Error::TooFewPoints {
            span: config.span,
            needed: config.span,
            got: ys.len(),
        });
    }
    if xs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter(
            "loess abscissae must be sorted ascending".into(),
        ));
    }
    if let Some(rw) = config.robustness_weights() {
        if rw.len() != ys.len() {
            return Err(Error::LengthMismatch {
                what: "robustness weights",
                expected: ys.len(),
                got: rw.len(),
            });
        }
    }
    let smoother = LocalFit {
        xs,
        ys,
        span: config.span,
        degree: config.degree,
        robustness: config.robustness_weights(),
    };
    Ok(xs.iter().map(|&x| smoother.fit(x)).collect())
}

/// Local regression over one dataset. `span` may exceed the number of points,
/// in which case the bandwidth is widened as in Cleveland's STL.
pub(crate) struct LocalFit<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub span: usize,
    pub degree: usize,
    pub robustness: Option<&'a [f64]>,
}

impl LocalFit<'_> {
    /// Fitted value at `x0`. Falls back to the kernel-weighted mean when the
    /// robustness weights zero out the whole window.
    pub fn fit(&self, x0: f64) -> f64 {
        let (left, right) = self.window(x0);
        let h = self.bandwidth(x0, left, right);
        let kernel: Vec<f64> = (left..=right)
            .map(|j| tricube((self.xs[j] - x0).abs(), h))
            .collect();
        let mut weights: Vec<f64> = match self.robustness {
            Some(rw) => kernel
                .iter()
                .zip(&rw[left..=right])
                .map(|(k, r)| k * r)
                .collect(),
            None => kernel.clone(),
        };
        let mut degree = self.degree;
        if weights.iter().sum::<f64>() <= 0.0 {
            weights = kernel;
            degree = 0;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            // h == 0 with no coincident point cannot happen; keep a finite answer.
            return self.ys[left..=right].iter().sum::<f64>() / (right - left + 1) as f64;
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let xs = &self.xs[left..=right];
        let ys = &self.ys[left..=right];
        let range = self.xs[self.xs.len() - 1] - self.xs[0];
        local_polynomial(xs, ys, &weights, x0, degree, range)
    }

    /// Inclusive index range of the `span` nearest neighbours of `x0`.
    fn window(&self, x0: f64) -> (usize, usize) {
        let n = self.xs.len();
        if self.span >= n {
            return (0, n - 1);
        }
        // first index with xs >= x0
        let pos = self.xs.partition_point(|&x| x < x0);
        let (mut left, mut right) = if pos == 0 {
            (0, 0)
        } else if pos == n {
            (n - 1, n - 1)
        } else if x0 - self.xs[pos - 1] <= self.xs[pos] - x0 {
            (pos - 1, pos - 1)
        } else {
            (pos, pos)
        };
        while right - left + 1 < self.span {
            if left == 0 {
                right += 1;
            } else if right == n - 1 {
                left -= 1;
            } else if x0 - self.xs[left - 1] <= self.xs[right + 1] - x0 {
                left -= 1;
            } else {
                right += 1;
            }
        }
        (left, right)
    }

    fn bandwidth(&self, x0: f64, left: usize, right: usize) -> f64 {
        let n = self.xs.len();
        let mut h = (x0 - self.xs[left]).max(self.xs[right] - x0);
        if self.span > n {
            let spacing = if n > 1 {
                (self.xs[n - 1] - self.xs[0]) / (n - 1) as f64
            } else {
                1.0
            };
            h += ((self.span - n) / 2) as f64 * spacing;
        }
        h
    }
}

fn tricube(distance: f64, h: f64) -> f64 {
    if distance <= 0.001 * h {
        1.0
    } else if distance <= 0.999 * h {
        let u = distance / h;
        let v = 1.0 - u * u * u;
        v * v * v
    } else {
        0.0
    }
}

/// Weighted least-squares polynomial of `degree` evaluated at `x0`; weights
/// are already normalized. Degree is lowered when the design is degenerate.
fn local_polynomial(
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    x0: f64,
    degree: usize,
    range: f64,
) -> f64 {
    let mean_fit = || weights.iter().zip(ys).map(|(w, y)| w * y).sum::<f64>();
    match degree {
        0 => mean_fit(),
        1 => {
            let a: f64 = weights.iter().zip(xs).map(|(w, x)| w * x).sum();
            let c: f64 = weights
                .iter()
                .zip(xs)
                .map(|(w, x)| w * (x - a) * (x - a))
                .sum();
            if c.sqrt() <= 0.001 * range {
                return mean_fit();
            }
            let b = (x0 - a) / c;
            weights
                .iter()
                .zip(xs)
                .zip(ys)
                .map(|((w, x), y)| w * (b * (x - a) + 1.0) * y)
                .sum()
        }
        _ => {
            // Centred, scaled basis [1, d, d^2] with d = (x - x0) / scale.
            let scale = xs
                .iter()
                .map(|x| (x - x0).abs())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let mut normal = [[0.0; 3]; 3];
            let mut rhs = [0.0; 3];
            for ((w, x), y) in weights.iter().zip(xs).zip(ys) {
                let d = (x - x0) / scale;
                let basis = [1.0, d, d * d];
                for r in 0..3 {
                    rhs[r] += w * basis[r] * y;
                    for c in 0..3 {
                        normal[r][c] += w * basis[r] * basis[c];
                    }
                }
            }
            match solve3(normal, rhs) {
                Some(beta) => beta[0],
                None => local_polynomial(xs, ys, weights, x0, 1, range),
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when near-singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Centered moving average; the output has `len - window + 1` entries.
pub fn moving_average(ys: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    if window > ys.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: ys.len(),
        });
    }
    let w = window as f64;
    let mut sum: f64 = ys[..window].iter().sum();
    let mut out = Vec::with_capacity(ys.len() - window + 1);
    out.push(sum / w);
    for i in window..ys.len() {
        sum += ys[i] - ys[i - window];
        out.push(sum / w);
    }
    Ok(out)
}

/// Bisquare robustness weights `(1 - (|r| / 6 median|r|)^2)^2`, zero beyond
/// the cutoff. All-zero residuals give unit weights.
pub fn bisquare_weights(residuals: &[f64]) -> Result<Vec<f64>> {
    if residuals.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let median = if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    };
    let cutoff = 6.0 * median;
    Ok(residuals
        .iter()
        .map(|r| {
            let r = r.abs();
            if cutoff == 0.0 {
                if r == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else if r >= cutoff {
                0.0
            } else {
                let u = r / cutoff;
                let v = 1.0 - u * u;
                v * v
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn linear_input_is_reproduced() {
        let xs = grid(40);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        for span in [3, 7, 15, 39] {
            let fit = loess_smooth(&xs, &ys, &LoessConfig::new(span, 1).unwrap()).unwrap();
            for (f, y) in fit.iter().zip(&ys) {
                assert_abs_diff_eq!(f, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_input_is_reproduced_by_degree_two() {
        let xs: Vec<f64> = (0..30).map(|i| 0.5 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x * x - x + 2.0).collect();
        let fit = loess_smooth(&xs, &ys, &LoessConfig::new(9, 2).unwrap()).unwrap();
        for (f, y) in fit.iter().zip(&ys) {
            assert_abs_diff_eq!(f, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn constants_are_preserved() {
        let xs = grid(25);
        let ys = vec![5.0; 25];
        for degree in 0..=2 {
            let fit = loess_smooth(&xs, &ys, &LoessConfig::new(7, degree).unwrap()).unwrap();
            assert!(fit.iter().all(|v| (v - 5.0).abs() < 1e-12));
        }
    }

    #[test]
    fn smoothing_reduces_noise_on_sine() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let xs = grid(300);
        let clean: Vec<f64> = xs
            .iter()
            .map(|x| (2.0 * std::f64::consts::PI * x / 100.0).sin())
            .collect();
        let noisy: Vec<f64> = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();
        let fit = loess_smooth(&xs, &noisy, &LoessConfig::new(31, 1).unwrap()).unwrap();
        let rmse = |a: &[f64]| {
            (a.iter()
                .zip(&clean)
                .map(|(x, c)| (x - c).powi(2))
                .sum::<f64>()
                / a.len() as f64)
                .sqrt()
        };
        assert!(rmse(&fit) < rmse(&noisy));
    }

    #[test]
    fn zero_robustness_weights_fall_back_to_kernel_mean() {
        let xs = grid(9);
        let ys: Vec<f64> = xs.iter().map(|x| x * 3.0).collect();
        let cfg = LoessConfig::new(3, 1)
            .unwrap()
            .with_robustness_weights(vec![0.0; 9])
            .unwrap();
        let fit = loess_smooth(&xs, &ys, &cfg).unwrap();
        assert!(fit.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(fit[4], 12.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let xs = grid(4);
        assert!(matches!(
            loess_smooth(&xs, &xs, &LoessConfig::new(5, 1).unwrap()),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn config_rejects_even_or_short_spans() {
        assert!(LoessConfig::new(4, 1).is_err());
        assert!(LoessConfig::new(3, 2).is_err());
        assert!(LoessConfig::new(3, 3).is_err());
        assert!(LoessConfig::new(3, 1).is_ok());
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(),
            vec![1.5, 2.5, 3.5]
        );
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0, 5.0], 5).unwrap(),
            vec![3.0]
        );
        assert!(moving_average(&[2.5; 10], 3)
            .unwrap()
            .iter()
            .all(|v| *v == 2.5));
        assert!(matches!(
            moving_average(&[1.0, 2.0], 3),
            Err(Error::WindowTooLarge { window: 3, len: 2 })
        ));
    }

    #[test]
    fn bisquare_examples() {
        let w = bisquare_weights(&[1.0, 1.0, 1.0, 10.0]).unwrap();
        assert_eq!(w[3], 0.0);
        // |r| = 1, cutoff 6: (1 - 1/36)^2
        assert_abs_diff_eq!(w[0], (1.0 - 1.0 / 36.0f64).powi(2), epsilon = 1e-15);
        let w = bisquare_weights(&[0.0, 2.0, -2.0]).unwrap();
        assert_eq!(w[0], 1.0);
        // median 2, cutoff 12, |r| = 12 exactly
        let w = bisquare_weights(&[2.0, 2.0, 12.0]).unwrap();
        assert_eq!(w[2], 0.0);
        assert_eq!(bisquare_weights(&[0.0; 5]).unwrap(), vec![1.0; 5]);
        assert!(bisquare_weights(&[]).is_err());
    }
}
