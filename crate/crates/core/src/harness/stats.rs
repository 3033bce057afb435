//! Summary statistics and the two-sided Wilcoxon rank-sum test.

use std::fmt;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Significance level of every comparison.
pub const ALPHA: f64 = 0.05;

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample (midranks for ties).
    pub statistic: f64,
    pub p_value: f64,
    /// Whether `p_value` came from the exact null distribution.
    pub exact: bool,
}

/// Midranks (1-based) of `values`; tied values share the average of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Number of `n`-subsets of `{1, …, total}` for every possible element sum.
fn subset_sum_counts(total: usize, n: usize) -> Vec<f64> {
    let max_sum = total * (total + 1) / 2;
    // counts[k][s]: subsets of size k with sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; n + 1];
    counts[0][0] = 1.0;
    for value in 1..=total {
        for k in (1..=n.min(value)).rev() {
            for s in (value..=max_sum).rev() {
                counts[k][s] += counts[k - 1][s - value];
            }
        }
    }
    counts.swap_remove(n)
}

/// Two-sided Wilcoxon rank-sum test of `a` against `b`.
///
/// Exact p-value by enumeration when `|a| + |b| ≤ 20` and there are no ties,
/// otherwise the normal approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("rank-sum test samples contain NaN"));
    }
    let n = a.len();
    let m = b.len();
    let total = n + m;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let statistic: f64 = ranks[..n].iter().sum();

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let tie_groups = tie_group_sizes(&sorted);
    let has_ties = tie_groups.iter().any(|&t| t > 1);

    if total <= EXACT_LIMIT && !has_ties {
        let counts = subset_sum_counts(total, n);
        let all: f64 = counts.iter().sum();
        let w = statistic.round() as usize;
        let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
        let upper: f64 = counts[w..].iter().sum::<f64>() / all;
        let p_value = (2.0 * lower.min(upper)).min(1.0);
        return Ok(RankSumTest {
            statistic,
            p_value,
            exact: true,
        });
    }

    let (nf, mf, tf) = (n as f64, m as f64, total as f64);
    let mean = nf * (tf + 1.0) / 2.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / (tf * (tf - 1.0)).max(1.0);
    let variance = nf * mf / 12.0 * ((tf + 1.0) - tie_term);
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let z = ((statistic - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(RankSumTest {
        statistic,
        p_value,
        exact: false,
    })
}

fn tie_group_sizes(sorted: &[f64]) -> Vec<usize> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Mean, sample standard deviation, median and extremes of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Summary> {
        if values.is_empty() {
            return Err(Error::invalid("cannot summarize an empty sample"));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Ok(Summary {
            count: n,
            mean,
            std,
            median,
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

/// Outcome of a significance comparison from the first arm's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Significantly better (lower median).
    Better,
    /// Significantly worse.
    Worse,
    /// No significant difference.
    Similar,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Better => "+",
            Verdict::Worse => "-",
            Verdict::Similar => "≈",
        }
    }

    /// `≈` when `p ≥ α`; otherwise decided by the lower median.
    pub fn decide(p_value: f64, median_first: f64, median_second: f64) -> Verdict {
        if p_value >= ALPHA || median_first == median_second {
            Verdict::Similar
        } else if median_first < median_second {
            Verdict::Better
        } else {
            Verdict::Worse
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_example() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.statistic, 6.0);
        assert!(t.exact);
        assert_abs_diff_eq!(t.p_value, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let a = [3.0, 1.0, 4.0, 1.5, 9.0];
        let t = wilcoxon_rank_sum(&a, &a).unwrap();
        assert!(!t.exact);
        assert_abs_diff_eq!(t.p_value, 1.0, epsilon = 1e-12);
        assert_eq!(wilcoxon_rank_sum(&[2.0], &[2.0]).unwrap().p_value, 1.0);
    }

    #[test]
    fn separated_samples() {
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        let t = wilcoxon_rank_sum(&a, &b).unwrap();
        assert!(t.exact);
        // both tails hold one arrangement out of C(20, 10)
        assert_abs_diff_eq!(t.p_value, 2.0 / 184_756.0, epsilon = 1e-18);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(wilcoxon_rank_sum(&[], &[1.0]).is_err());
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn summary_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_abs_diff_eq!(s.std, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(Summary::of(&[7.0]).unwrap().std, 0.0);
    }

    #[test]
    fn verdicts() {
        assert_eq!(Verdict::decide(0.2, 1.0, 5.0), Verdict::Similar);
        assert_eq!(Verdict::decide(0.01, 1.0, 5.0), Verdict::Better);
        assert_eq!(Verdict::decide(0.01, 6.0, 5.0), Verdict::Worse);
        assert_eq!(Verdict::Similar.to_string(), "≈");
    }
}
