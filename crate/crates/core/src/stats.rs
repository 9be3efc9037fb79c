//! Nonparametric statistics for recognition performance.
//!
//! Covers exactly the tests used to assess decoding: Pearson correlation,
//! the Monte-Carlo uniform-rank surrogate test for pairwise recognition,
//! its exact enumeration variant for small group sizes, exact binomial
//! tail tests, and the Friedman test with Nemenyi post-hoc comparisons.

use rand::Rng;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::seeded_stream;
use crate::Matrix;

/// Which procedure produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    MonteCarlo,
    Enumeration,
    Binomial,
    Friedman,
}

/// Outcome of a significance test.
#[derive(Debug, Clone)]
pub struct TestResult {
    /// Test statistic: observed accuracy, success count, or chi-square.
    pub statistic: f64,
    /// Upper-tail p-value in (0, 1].
    pub p_value: f64,
    pub method: TestMethod,
    /// Number of surrogate draws (Monte-Carlo) or enumerated tuples.
    pub n_draws: Option<u64>,
    /// Degrees of freedom (Friedman).
    pub df: Option<usize>,
    /// Smallest reportable p-value for resampling methods.
    pub p_floor: Option<f64>,
}

/// Sample Pearson correlation coefficient.
///
/// Errors on length mismatch, fewer than two samples, or constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::CountMismatch {
            context: "pearson inputs".into(),
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson requires at least 2 samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("pearson input is constant".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pairwise accuracy implied by a rank among `n_candidates`: the fraction
/// of distractors beaten, `(n - rank) / (n - 1)`.
pub fn rank_to_accuracy(rank: f64, n_candidates: usize) -> f64 {
    (n_candidates as f64 - rank) / (n_candidates as f64 - 1.0)
}

/// Tolerance used when comparing surrogate against observed accuracies:
/// both sides are means of exact dyadic-free fractions, so only
/// accumulation order noise has to be absorbed.
const ACCURACY_EPS: f64 = 1e-12;

/// Monte-Carlo surrogate test for mean pairwise recognition accuracy.
///
/// Under the null the target rank of every item is uniform on
/// `1..=n_candidates`; surrogate accuracies are built from `n_draws`
/// independent draws of `n_items` ranks and the p-value is the add-one
/// upper tail `(count >= observed + 1) / (n_draws + 1)`.
pub fn monte_carlo_pairwise_p(
    observed_accuracy: f64,
    n_items: usize,
    n_candidates: usize,
    n_draws: u64,
    seed: u64,
) -> Result<TestResult> {
    if !(0.0..=1.0).contains(&observed_accuracy) {
        return Err(Error::invalid(format!(
            "observed accuracy {observed_accuracy} outside [0, 1]"
        )));
    }
    if n_items < 2 || n_candidates < 2 {
        return Err(Error::invalid(
            "monte_carlo_pairwise_p requires n_items >= 2 and n_candidates >= 2",
        ));
    }
    if n_draws == 0 {
        return Err(Error::invalid("n_draws must be positive"));
    }
    let mut rng = seeded_stream(seed, 0x7261_6e6b); // "rank"
    let denom = (n_items * (n_candidates - 1)) as f64;
    let total = (n_items * n_candidates) as f64;
    let threshold = observed_accuracy - ACCURACY_EPS;
    let mut count: u64 = 0;
    for _ in 0..n_draws {
        let mut rank_sum: u64 = 0;
        for _ in 0..n_items {
            rank_sum += rng.random_range(1..=n_candidates as u64);
        }
        // mean of (n - r)/(n - 1) over items, via the rank sum
        let accuracy = (total - rank_sum as f64) / denom;
        if accuracy >= threshold {
            count += 1;
        }
    }
    let p_floor = 1.0 / (n_draws as f64 + 1.0);
    Ok(TestResult {
        statistic: observed_accuracy,
        p_value: (count as f64 + 1.0) / (n_draws as f64 + 1.0),
        method: TestMethod::MonteCarlo,
        n_draws: Some(n_draws),
        df: None,
        p_floor: Some(p_floor),
    })
}

/// Largest tuple count accepted by [`enumerate_group_pairwise_p`].
pub const ENUMERATION_LIMIT: u128 = 100_000_000;

/// Exact group-level variant of the surrogate test: enumerates every
/// possible tuple of per-subject ranks and reports the fraction whose
/// mean accuracy is at least the observed mean.
pub fn enumerate_group_pairwise_p(
    per_subject_ranks: &[u32],
    n_candidates: usize,
) -> Result<TestResult> {
    let m = per_subject_ranks.len();
    if m == 0 {
        return Err(Error::invalid("no subject ranks supplied"));
    }
    if n_candidates < 2 {
        return Err(Error::invalid("n_candidates must be at least 2"));
    }
    for &r in per_subject_ranks {
        if r < 1 || r as usize > n_candidates {
            return Err(Error::invalid(format!(
                "rank {r} outside 1..={n_candidates}"
            )));
        }
    }
    let total = (n_candidates as u128)
        .checked_pow(m as u32)
        .filter(|&t| t <= ENUMERATION_LIMIT)
        .ok_or({
            Error::EnumerationTooLarge {
                total: (n_candidates as u128).saturating_pow(m as u32),
                limit: ENUMERATION_LIMIT,
            }
        })?;

    let n = n_candidates as f64;
    let denom = m as f64 * (n - 1.0);
    let observed = per_subject_ranks
        .iter()
        .map(|&r| (n - r as f64) / (n - 1.0))
        .sum::<f64>()
        / m as f64;

    // Mean accuracy depends on the ranks only through their sum, so the
    // enumeration reduces to the exact distribution of a sum of m
    // independent uniform ranks.
    let mut sum_counts: Vec<u128> = vec![1];
    let mut offset = 0usize; // counts[i] is the count of sum (offset + i + m_done)
    for _ in 0..m {
        let mut next = vec![0u128; sum_counts.len() + n_candidates - 1];
        for (i, &c) in sum_counts.iter().enumerate() {
            for add in 0..n_candidates {
                next[i + add] += c;
            }
        }
        sum_counts = next;
        offset += 1; // each subject contributes at least rank 1
    }
    let mut favorable: u128 = 0;
    for (i, &c) in sum_counts.iter().enumerate() {
        let rank_sum = (offset + i) as f64;
        let accuracy = (m as f64 * n - rank_sum) / denom;
        if accuracy >= observed - ACCURACY_EPS {
            favorable += c;
        }
    }
    Ok(TestResult {
        statistic: observed,
        p_value: favorable as f64 / total as f64,
        method: TestMethod::Enumeration,
        n_draws: Some(total as u64),
        df: None,
        p_floor: Some(1.0 / total as f64),
    })
}

/// Exact upper-tail binomial probability `P(X >= successes)` for
/// `X ~ Binomial(n, p0)`, summed in log space.
pub fn binomial_tail_p(successes: u64, n: u64, p0: f64) -> Result<TestResult> {
    if successes > n {
        return Err(Error::invalid(format!("successes {successes} > n {n}")));
    }
    if !(0.0 < p0 && p0 < 1.0) {
        return Err(Error::invalid(format!("p0 {p0} outside (0, 1)")));
    }
    let p_value = if successes == 0 {
        1.0
    } else if successes == n {
        p0.powi(n as i32)
    } else {
        let ln_p = p0.ln();
        let ln_q = (1.0 - p0).ln();
        let ln_fact_n = ln_gamma(n as f64 + 1.0);
        let log_terms: Vec<f64> = (successes..=n)
            .map(|k| {
                ln_fact_n - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
                    + k as f64 * ln_p
                    + (n - k) as f64 * ln_q
            })
            .collect();
        let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = log_terms.iter().map(|&t| (t - max).exp()).sum();
        (max + sum.ln()).exp().min(1.0)
    };
    Ok(TestResult {
        statistic: successes as f64,
        p_value,
        method: TestMethod::Binomial,
        n_draws: Some(n),
        df: None,
        p_floor: None,
    })
}

/// Midranks of one observation block, ties receiving the average of the
/// positions they span.
fn midranks(row: &[f64]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("non-finite rank input"));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman rank test over `n_blocks x k_treatments` observations.
///
/// Ties are midranked and no tie correction is applied. All-tied data
/// yields chi-square 0 and p = 1.
pub fn friedman_test(blocks: &Matrix) -> Result<TestResult> {
    let n = blocks.nrows();
    let k = blocks.ncols();
    if n < 2 || k < 2 {
        return Err(Error::invalid(
            "friedman_test requires at least 2 blocks and 2 treatments",
        ));
    }
    if blocks.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("friedman_test input".into()));
    }
    let mut rank_sums = vec![0.0; k];
    for i in 0..n {
        let row: Vec<f64> = (0..k).map(|j| blocks[(i, j)]).collect();
        for (j, r) in midranks(&row).into_iter().enumerate() {
            rank_sums[j] += r;
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let chi2 = (12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    Ok(TestResult {
        statistic: chi2,
        p_value: chi_square_tail(chi2, k - 1),
        method: TestMethod::Friedman,
        n_draws: None,
        df: Some(k - 1),
        p_floor: None,
    })
}

/// Upper tail of the chi-square distribution via the regularized upper
/// incomplete gamma function.
pub fn chi_square_tail(chi2: f64, df: usize) -> f64 {
    if chi2 <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, chi2 / 2.0)
}

/// One pairwise comparison of a Nemenyi post-hoc analysis.
#[derive(Debug, Clone)]
pub struct PosthocPair {
    pub treatment_a: usize,
    pub treatment_b: usize,
    pub mean_rank_diff: f64,
    pub significant: bool,
}

/// Nemenyi post-hoc report at significance level 0.05.
#[derive(Debug, Clone)]
pub struct PosthocReport {
    pub mean_ranks: Vec<f64>,
    pub critical_difference: f64,
    pub pairs: Vec<PosthocPair>,
}

/// Nemenyi critical-difference comparisons on Friedman mean ranks.
///
/// Treatments `i`, `j` differ when `|mean_rank_i - mean_rank_j|` exceeds
/// `q_alpha * sqrt(k (k+1) / (6 n))`; `q_alpha` is the alpha = 0.05
/// studentized-range quantile divided by sqrt(2).
pub fn friedman_posthoc(blocks: &Matrix) -> Result<PosthocReport> {
    let n = blocks.nrows();
    let k = blocks.ncols();
    if k < 3 {
        return Err(Error::invalid("post-hoc requires >= 3 treatments"));
    }
    if n < 2 {
        return Err(Error::invalid("post-hoc requires at least 2 blocks"));
    }
    let mut rank_sums = vec![0.0; k];
    for i in 0..n {
        let row: Vec<f64> = (0..k).map(|j| blocks[(i, j)]).collect();
        for (j, r) in midranks(&row).into_iter().enumerate() {
            rank_sums[j] += r;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|r| r / n as f64).collect();
    let q = studentized_range_quantile(0.95, k) / std::f64::consts::SQRT_2;
    let cd = q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt();
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let diff = (mean_ranks[a] - mean_ranks[b]).abs();
            pairs.push(PosthocPair {
                treatment_a: a,
                treatment_b: b,
                mean_rank_diff: diff,
                significant: diff > cd,
            });
        }
    }
    Ok(PosthocReport {
        mean_ranks,
        critical_difference: cd,
        pairs,
    })
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of the studentized range with infinite degrees of freedom:
/// `P(Q <= q) = k Int phi(z) [Phi(z) - Phi(z - q)]^(k-1) dz`.
fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    // Simpson integration; the integrand decays like the normal density.
    let lo = -8.5;
    let hi = 8.5 + q;
    let steps = 4000usize; // even
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| {
        let inner = normal_cdf(z) - normal_cdf(z - q);
        normal_pdf(z) * inner.powi(k as i32 - 1)
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        acc += w * f(lo + i as f64 * h);
    }
    (k as f64 * acc * h / 3.0).min(1.0)
}

/// Quantile of the studentized range (infinite df) by bisection.
fn studentized_range_quantile(prob: f64, k: usize) -> f64 {
    let mut lo = 0.0;
    let mut hi = 30.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kolmogorov-Smirnov distance of a sample from the uniform distribution
/// on [0, 1]. The input is sorted in place.
pub fn ks_distance_from_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = values.len() as f64;
    let mut dist: f64 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let upper = (i + 1) as f64 / n - v;
        let lower = v - i as f64 / n;
        dist = dist.max(upper).max(lower);
    }
    dist
}
