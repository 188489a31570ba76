//! Small statistical helpers shared by the samplers, the Monte Carlo weight
//! estimators and the campaign summary.

use serde::Serialize;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

/// Two-sided confidence level used for every Monte Carlo interval.
pub const MC_CONFIDENCE: f64 = 0.999;

/// Hoeffding half-width for the mean of `trials` variables in `[0, 1]` at
/// two-sided level `1 - alpha`.
pub fn hoeffding_half_width(trials: u64, alpha: f64) -> f64 {
    assert!(trials > 0);
    ((2.0 / alpha).ln() / (2.0 * trials as f64)).sqrt()
}

/// Hoeffding interval for a Bernoulli mean, clamped to `[0, 1]`.
pub fn hoeffding_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    let f = successes as f64 / trials as f64;
    let eps = hoeffding_half_width(trials, 1.0 - confidence);
    ((f - eps).max(0.0), (f + eps).min(1.0))
}

/// Upper tail `P(X >= stat)` of a chi-square law with `dof` degrees of freedom.
pub fn chi_square_sf(stat: f64, dof: u64) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("positive dof");
    d.sf(stat)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `counts` against uniform cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquareResult {
    let total: u64 = counts.iter().sum();
    let cells = counts.len() as f64;
    let expected = total as f64 / cells;
    let statistic = if expected > 0.0 {
        counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    } else {
        0.0
    };
    let dof = counts.len().saturating_sub(1) as u64;
    ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    }
}

/// Pearson goodness-of-fit of observed counts against given probabilities.
pub fn chi_square_against(counts: &[u64], probs: &[f64]) -> ChiSquareResult {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let statistic = counts
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = probs.iter().filter(|&&p| p > 0.0).count().saturating_sub(1) as u64;
    ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    }
}

/// One-sided exact (Clopper-Pearson) lower and upper confidence bounds for a
/// binomial proportion, each at level `confidence`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).expect("valid beta").inverse_cdf(alpha)
    };
    let upper = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).expect("valid beta").inverse_cdf(1.0 - alpha)
    };
    (lower, upper)
}

/// Running mean and central moments (Welford / Terriberry updates).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count as f64 - 1.0)
        }
    }

    /// Standard error of the sample mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Fourth central moment (population form).
    pub fn central4(&self) -> f64 {
        self.m4 / self.count as f64
    }

    /// Approximate standard error of the sample variance.
    pub fn variance_std_error(&self) -> f64 {
        let n = self.count as f64;
        let s2 = self.m2 / n;
        ((self.central4() - s2 * s2 * (n - 3.0) / (n - 1.0)) / n)
            .max(0.0)
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_scaling() {
        let w1 = hoeffding_half_width(1000, 0.001);
        let w4 = hoeffding_half_width(4000, 0.001);
        assert!((w1 / w4 - 2.0).abs() < 1e-12);
        let (lo, hi) = hoeffding_interval(0, 100, MC_CONFIDENCE);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1.0);
    }

    #[test]
    fn chi_square_reference_values() {
        // 95% critical value of chi2 with 1 dof is 3.841458820694124.
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-9);
        assert_eq!(chi_square_sf(10.0, 0), 1.0);
        let r = chi_square_uniform(&[10, 10, 10]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn clopper_pearson_known_values() {
        // zero successes: upper = 1 - alpha^(1/n)
        let (lo, hi) = clopper_pearson(0, 200, 0.99);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.01f64.powf(1.0 / 200.0))).abs() < 1e-8);
        let (lo, hi) = clopper_pearson(200, 200, 0.99);
        assert!((lo - 0.01f64.powf(1.0 / 200.0)).abs() < 1e-8);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(5, 20, 0.95);
        assert!(lo < 0.25 && 0.25 < hi);
    }

    #[test]
    fn moments_match_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
        let c4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64;
        assert!((m.mean() - mean).abs() < 1e-10);
        assert!((m.variance() - var).abs() < 1e-9);
        assert!((m.central4() - c4).abs() / c4 < 1e-9);
    }
}
