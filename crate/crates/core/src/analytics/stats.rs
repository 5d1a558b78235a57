//! Bootstrap intervals and the rank, contingency and mean tests used on
//! experiment outputs. P-values use asymptotic reference distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use super::AnalyticsError;

/// Linear-interpolation quantile of sorted data (`h = (n-1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean of per-replication statistics.
pub fn bootstrap_ci(stats: &[f64], draws: usize, level: f64, seed: u64) -> Result<(f64, f64), AnalyticsError> {
    bootstrap_ci_with(stats, draws, level, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn bootstrap_ci_with<R: Rng + ?Sized>(
    stats: &[f64],
    draws: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64), AnalyticsError> {
    if stats.len() < 2 {
        return Err(AnalyticsError::InsufficientReplications(stats.len()));
    }
    if draws == 0 || !(level > 0.0 && level < 1.0) {
        return Err(AnalyticsError::InvalidInput(format!("draws {draws}, level {level}")));
    }
    let n = stats.len();
    // Centring on the first value keeps constant inputs exact.
    let pivot = stats[0];
    let mut means: Vec<f64> = (0..draws)
        .map(|_| pivot + (0..n).map(|_| stats[rng.random_range(0..n)] - pivot).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, tail), quantile_sorted(&means, 1.0 - tail)))
}

/// Average (mid) ranks, 1-based, plus the tie groups' sizes.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Kruskal-Wallis H with tie correction; chi-square with `k-1` df.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult, AnalyticsError> {
    if groups.len() < 2 || groups.iter().any(Vec::is_empty) {
        return Err(AnalyticsError::InvalidInput("need at least two nonempty groups".into()));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, ties) = average_ranks(&pooled);
    let correction = 1.0 - ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / (n.powi(3) - n);
    if correction <= 0.0 {
        return Err(AnalyticsError::DegenerateInput);
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = ((12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction).max(0.0);
    let df = (groups.len() - 1) as f64;
    Ok(TestResult {
        statistic: h,
        df,
        p_value: chi_square_sf(h, df),
    })
}

/// Pearson chi-square test of independence on an `r x c` table of counts.
pub fn chi_square_independence(table: &[Vec<f64>]) -> Result<TestResult, AnalyticsError> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(AnalyticsError::InvalidInput(
            "need a rectangular table of at least 2x2".into(),
        ));
    }
    if table.iter().flatten().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(AnalyticsError::InvalidInput("counts must be nonnegative".into()));
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    if rows.iter().chain(&cols).any(|&m| m == 0.0) {
        return Err(AnalyticsError::ZeroMarginal);
    }
    let total: f64 = rows.iter().sum();
    let mut stat = 0.0;
    for i in 0..r {
        for j in 0..c {
            let expected = rows[i] * cols[j] / total;
            stat += (table[i][j] - expected).powi(2) / expected;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    Ok(TestResult {
        statistic: stat,
        df,
        p_value: chi_square_sf(stat, df),
    })
}

pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive df").sf(x)
}

pub fn bonferroni_threshold(alpha: f64, comparisons: usize) -> f64 {
    assert!(comparisons >= 1, "at least one comparison");
    alpha / comparisons as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedT {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub t: f64,
    /// P-value for the alternative `mean > mu0`.
    pub p_value: f64,
}

/// One-sample t-test of `mean > mu0`; feed paired differences for a paired test.
/// With zero spread the p-value is 0 when the mean exceeds `mu0` and 1 otherwise.
pub fn one_sided_t(values: &[f64], mu0: f64) -> Result<OneSidedT, AnalyticsError> {
    let n = values.len();
    if n < 2 {
        return Err(AnalyticsError::InsufficientReplications(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let (t, p_value) = if sd == 0.0 {
        let p = if mean > mu0 { 0.0 } else { 1.0 };
        (f64::INFINITY.copysign(mean - mu0), p)
    } else {
        let t = (mean - mu0) / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1");
        (t, dist.sf(t))
    };
    Ok(OneSidedT {
        n,
        mean,
        sd,
        t,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn kw_closed_form() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        // 12/(6*7) * (36/3 + 225/3) - 21
        assert!((r.statistic - 27.0 / 7.0).abs() < 1e-12);
        assert!((r.statistic - 3.857).abs() < 1e-3);
        assert_eq!(r.df, 1.0);
    }

    #[test]
    fn kw_identical_groups_and_degenerate() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
        assert_eq!(
            kruskal_wallis(&[vec![2.0, 2.0], vec![2.0]]),
            Err(AnalyticsError::DegenerateInput)
        );
    }

    #[test]
    fn kw_tie_correction_against_hand_value() {
        // pooled 1,1,2 | 2,3,3 -> ranks 1.5,1.5,3.5 | 3.5,5.5,5.5
        let r = kruskal_wallis(&[vec![1.0, 1.0, 2.0], vec![2.0, 3.0, 3.0]]).unwrap();
        let raw = 12.0 / 42.0 * (6.5f64.powi(2) / 3.0 + 14.5f64.powi(2) / 3.0) - 21.0;
        let c = 1.0 - 3.0 * 6.0 / 210.0;
        assert!((r.statistic - raw / c).abs() < 1e-12);
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square_independence(&[vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        assert!((r.statistic - 20.0).abs() < 1e-12);
        assert_eq!(r.df, 1.0);
        let r = chi_square_independence(&[vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(
            chi_square_independence(&[vec![0.0, 0.0], vec![1.0, 2.0]]),
            Err(AnalyticsError::ZeroMarginal)
        );
    }

    #[test]
    fn bonferroni_examples() {
        assert!((bonferroni_threshold(0.05, 78) - 0.000641025641).abs() < 1e-12);
        assert_eq!(bonferroni_threshold(0.05, 1), 0.05);
        assert_eq!(13 * 12 / 2, 78);
    }

    #[test]
    fn bootstrap_bounds() {
        let (lo, hi) = bootstrap_ci(&[0.3; 10], 500, 0.95, 1).unwrap();
        assert_eq!((lo, hi), (0.3, 0.3));
        let v: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let (lo, hi) = bootstrap_ci(&v, 2000, 0.95, 2).unwrap();
        assert!((0.0..0.5).contains(&lo) && 0.5 < hi && hi <= 1.0);
        assert_eq!(
            bootstrap_ci(&[1.0], 10, 0.95, 1),
            Err(AnalyticsError::InsufficientReplications(1))
        );
    }

    #[test]
    fn one_sided_t_basics() {
        let r = one_sided_t(&[0.1; 5], 0.0).unwrap();
        assert_eq!(r.p_value, 0.0);
        let r = one_sided_t(&[1.0, 2.0, 3.0], 2.0).unwrap();
        assert!(r.t.abs() < 1e-12);
        assert!((r.p_value - 0.5).abs() < 1e-12);
        let r = one_sided_t(&[-1.0, -2.0, -1.5], 0.0).unwrap();
        assert!(r.p_value > 0.9);
    }
}
