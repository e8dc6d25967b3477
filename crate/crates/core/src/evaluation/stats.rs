//! Test statistics used by the evaluation reports.
//!
//! Reference distributions (Student t, chi-square, normal) come from `statrs`;
//! the statistics themselves are computed here.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// One-sided paired t-test of `mean(a) > mean(b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Paired one-sided t-test with alternative `mean(a) > mean(b)`.
///
/// When every difference is identical the statistic is undefined; the p-value
/// is then 0.5 for a zero difference, 0 for a positive one and 1 for a
/// negative one.
pub fn paired_t_test_one_sided(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_sd(&diffs);
    let df = (n - 1) as f64;
    if sd == 0.0 {
        let p_value = if mean == 0.0 {
            0.5
        } else if mean > 0.0 {
            0.0
        } else {
            1.0
        };
        let t = if mean == 0.0 {
            0.0
        } else {
            mean.signum() * f64::INFINITY
        };
        return Ok(PairedTTest {
            mean_diff: mean,
            sd_diff: 0.0,
            t,
            df,
            p_value,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    Ok(PairedTTest {
        mean_diff: mean,
        sd_diff: sd,
        t,
        df,
        p_value: dist.sf(t),
    })
}

/// Pearson chi-square test of homogeneity on a 2×k table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn chi_square_2xk(row_a: &[f64], row_b: &[f64]) -> Result<ChiSquareTest> {
    if row_a.len() != row_b.len() {
        return Err(Error::LengthMismatch(row_a.len(), row_b.len()));
    }
    let k = row_a.len();
    if k < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: k });
    }
    if row_a.iter().chain(row_b).any(|&c| !c.is_finite() || c < 0.0) {
        return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
    }
    let rows = [row_a.iter().sum::<f64>(), row_b.iter().sum::<f64>()];
    let total = rows[0] + rows[1];
    let mut statistic = 0.0;
    for j in 0..k {
        let col = row_a[j] + row_b[j];
        if col == 0.0 {
            return Err(Error::Degenerate(format!("column {j} has zero total")));
        }
        for (i, row) in [row_a, row_b].iter().enumerate() {
            if rows[i] == 0.0 {
                return Err(Error::Degenerate(format!("row {i} has zero total")));
            }
            let expected = rows[i] * col / total;
            statistic += (row[j] - expected).powi(2) / expected;
        }
    }
    let df = k - 1;
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    Ok(ChiSquareTest {
        statistic,
        df,
        p_value: dist.sf(statistic),
    })
}

/// Sample Pearson correlation.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// Normal-approximation interval `mean ± z · sd / √n` for the average of
/// per-paper MSE reductions, with `sd` the sample standard deviation.
pub fn mse_reduction_ci(diffs: &[f64], level: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let n = diffs.len();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let (mean, sd) = mean_sd(diffs);
    let z = Normal::standard().inverse_cdf((1.0 + level) / 2.0);
    let half = z * sd / (n as f64).sqrt();
    Ok(Interval {
        lower: mean - half,
        upper: mean + half,
    })
}

/// Mean and sample standard deviation (n − 1 denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn identical_samples_give_half() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(paired_t_test_one_sided(&a, &a).unwrap().p_value, 0.5);
    }

    #[test]
    fn differences_one_two_three() {
        let t = paired_t_test_one_sided(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_relative_eq!(t.t, 2.0 * 3f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(t.p_value, 0.03708995011372426, max_relative = 1e-6);
    }

    #[test]
    fn wrong_direction_is_above_half() {
        let t = paired_t_test_one_sided(&[0.0, 0.1, 0.5], &[1.0, 1.4, 3.0]).unwrap();
        assert!(t.p_value > 0.5);
    }

    #[test]
    fn constant_nonzero_difference() {
        assert_eq!(paired_t_test_one_sided(&[2.0, 3.0], &[1.0, 2.0]).unwrap().p_value, 0.0);
        assert_eq!(paired_t_test_one_sided(&[1.0, 2.0], &[2.0, 3.0]).unwrap().p_value, 1.0);
    }

    #[test]
    fn t_test_rejects_short_or_mismatched() {
        assert!(paired_t_test_one_sided(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test_one_sided(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn chi_square_identical_rows() {
        let c = chi_square_2xk(&[5.0, 7.0, 9.0], &[5.0, 7.0, 9.0]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.p_value, 1.0);
    }

    #[test]
    fn chi_square_two_by_two() {
        let c = chi_square_2xk(&[10.0, 20.0], &[20.0, 10.0]).unwrap();
        assert_relative_eq!(c.statistic, 20.0 / 3.0, max_relative = 1e-12);
        assert_eq!(c.df, 1);
        assert_relative_eq!(c.p_value, 0.009823274507519235, max_relative = 1e-6);
    }

    #[test]
    fn chi_square_zero_marginal() {
        assert!(chi_square_2xk(&[0.0, 3.0], &[0.0, 4.0]).is_err());
        assert!(chi_square_2xk(&[0.0, 0.0], &[1.0, 4.0]).is_err());
    }

    #[test]
    fn pearson_perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let yneg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson_correlation(&x, &y2).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(pearson_correlation(&x, &yneg).unwrap(), -1.0, max_relative = 1e-12);
        assert!(pearson_correlation(&x, &[1.0; 4]).is_err());
    }

    #[test]
    fn pearson_ten_pairs() {
        let x = [43.0, 21.0, 25.0, 42.0, 57.0, 59.0, 38.0, 35.0, 29.0, 50.0];
        let y = [99.0, 65.0, 79.0, 75.0, 87.0, 81.0, 70.0, 60.0, 66.0, 90.0];
        // direct formula, evaluated by hand: sxy = 1032.5, sxx = 1486.9, syy = 1622.0
        let mx = 39.9;
        let my = 77.2;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        let r = pearson_correlation(&x, &y).unwrap();
        assert_relative_eq!(r, sxy / (sxx * syy).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r, 0.5954047579864505, max_relative = 1e-9);
    }

    #[test]
    fn ci_zero_variance() {
        let ci = mse_reduction_ci(&[0.7; 5], 0.95).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.7, 0.7));
    }

    #[test]
    fn ci_two_points() {
        // mean 1, sample sd √2, n = 2: half-width z · 1
        let ci = mse_reduction_ci(&[0.0, 2.0], 0.95).unwrap();
        assert_abs_diff_eq!(ci.lower, 1.0 - 1.959963984540054, epsilon = 1e-9);
        assert_abs_diff_eq!(ci.upper, 1.0 + 1.959963984540054, epsilon = 1e-9);
    }

    #[test]
    fn ci_levels_nest() {
        let d = [0.3, -0.1, 0.8, 0.2, 0.5, 0.0, 1.1];
        let a = mse_reduction_ci(&d, 0.95).unwrap();
        let b = mse_reduction_ci(&d, 0.99).unwrap();
        assert!(b.contains_interval(&a));
        assert!(mse_reduction_ci(&[1.0], 0.95).is_err());
        assert!(mse_reduction_ci(&d, 1.0).is_err());
    }
}
