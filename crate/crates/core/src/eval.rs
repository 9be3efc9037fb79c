//! Evaluation of decoded codes: recognition ranks and accuracies,
//! attribute classification, attribute-to-voxel mapping, variance
//! partitioning across regions, and structural image similarity.

use crate::decoder::EncodingModel;
use crate::error::{Error, Result};
use crate::latent::{AttributeVector, LatentTable};
use crate::stats::{self, TestResult};
use crate::{Matrix, Vector};

/// Midrank of the target among all candidates by Pearson correlation with
/// the estimate; ties take the average of the spanned positions.
fn target_midrank(estimate: &[f64], candidates: &LatentTable, target_row: usize) -> Result<f64> {
    let n = candidates.n_stimuli();
    let mut correlations = Vec::with_capacity(n);
    for i in 0..n {
        let cand: Vec<f64> = candidates.codes().row(i).iter().cloned().collect();
        correlations.push(stats::pearson(estimate, &cand)?);
    }
    let target = correlations[target_row];
    let higher = correlations.iter().filter(|&&c| c > target).count();
    let ties = correlations
        .iter()
        .enumerate()
        .filter(|&(i, &c)| i != target_row && c == target)
        .count();
    Ok(higher as f64 + 1.0 + ties as f64 / 2.0)
}

/// Rank of the target among the candidates (1 = best), by Pearson
/// correlation with the estimate. A tied midrank is rounded toward the
/// worse (larger) rank.
pub fn rank_against_candidates(
    estimate: &[f64],
    candidates: &LatentTable,
    target_id: &str,
) -> Result<f64> {
    let row = candidates
        .row_index(target_id)
        .ok_or_else(|| Error::MissingId {
            context: "recognition target".into(),
            id: target_id.to_string(),
        })?;
    Ok(target_midrank(estimate, candidates, row)?.ceil())
}

/// Recognition outcome over a set of decoded items.
#[derive(Debug, Clone)]
pub struct RecognitionReport {
    pub stim_ids: Vec<String>,
    /// Midrank of the true target per item (1 = best; fractional on ties).
    pub per_item_rank: Vec<f64>,
    /// Mean fraction of ordered (target, distractor) pairs won.
    pub pairwise_accuracy: f64,
    /// Fraction of items ranked first.
    pub full_accuracy: f64,
    pub n_candidates: usize,
    pub p_pairwise: TestResult,
    pub p_full: TestResult,
}

/// Midranks of every estimate against the ground-truth candidates, plus
/// pairwise and full accuracies.
pub fn recognition_ranks(
    estimates: &LatentTable,
    truth: &LatentTable,
) -> Result<(Vec<f64>, f64, f64)> {
    let n = truth.n_stimuli();
    if n < 2 {
        return Err(Error::invalid("recognition needs at least 2 candidates"));
    }
    if estimates.n_dims() != truth.n_dims() {
        return Err(Error::DimensionMismatch {
            context: "estimates vs truth".into(),
            expected: truth.n_dims(),
            got: estimates.n_dims(),
        });
    }
    if estimates.n_stimuli() == 0 {
        return Err(Error::invalid("no estimates to evaluate"));
    }
    let mut ranks = Vec::with_capacity(estimates.n_stimuli());
    for (i, id) in estimates.stim_ids().iter().enumerate() {
        let row = truth.row_index(id).ok_or_else(|| Error::MissingId {
            context: "truth table entry".into(),
            id: id.clone(),
        })?;
        let est: Vec<f64> = estimates.codes().row(i).iter().cloned().collect();
        ranks.push(target_midrank(&est, truth, row)?);
    }
    let m = ranks.len() as f64;
    let pairwise = ranks
        .iter()
        .map(|&r| stats::rank_to_accuracy(r, n))
        .sum::<f64>()
        / m;
    let full = ranks.iter().filter(|&&r| r == 1.0).count() as f64 / m;
    Ok((ranks, pairwise, full))
}

/// Rank every estimate against the ground-truth candidates and attach the
/// Monte-Carlo (pairwise) and binomial (full recognition) p-values.
pub fn recognition_report(
    estimates: &LatentTable,
    truth: &LatentTable,
    n_draws: u64,
    seed: u64,
) -> Result<RecognitionReport> {
    let (ranks, pairwise, full) = recognition_ranks(estimates, truth)?;
    let n = truth.n_stimuli();
    let m = ranks.len();
    let n_first = ranks.iter().filter(|&&r| r == 1.0).count();
    let p_pairwise = stats::monte_carlo_pairwise_p(pairwise, m, n, n_draws, seed)?;
    let p_full = stats::binomial_tail_p(n_first as u64, m as u64, 1.0 / n as f64)?;
    Ok(RecognitionReport {
        stim_ids: estimates.stim_ids().to_vec(),
        per_item_rank: ranks,
        pairwise_accuracy: pairwise,
        full_accuracy: full,
        n_candidates: n,
        p_pairwise,
        p_full,
    })
}

/// Classifier output for one code's projection onto an attribute axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeLabel {
    Positive,
    Negative,
    /// Exactly zero projection; counted as an error in accuracies.
    Tie,
}

/// Label each code by the sign of its projection onto the attribute axis.
pub fn classify_attribute(
    codes: &LatentTable,
    attr: &AttributeVector,
) -> Result<Vec<AttributeLabel>> {
    if codes.n_dims() != attr.vector.len() {
        return Err(Error::DimensionMismatch {
            context: "classify_attribute".into(),
            expected: attr.vector.len(),
            got: codes.n_dims(),
        });
    }
    if attr.vector.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVariance("attribute vector is zero".into()));
    }
    Ok((0..codes.n_stimuli())
        .map(|i| {
            let proj: f64 = codes.codes().row(i).transpose().dot(&attr.vector);
            if proj > 0.0 {
                AttributeLabel::Positive
            } else if proj < 0.0 {
                AttributeLabel::Negative
            } else {
                AttributeLabel::Tie
            }
        })
        .collect())
}

/// Fraction of labels matching the boolean truth; ties never count.
pub fn classification_accuracy(labels: &[AttributeLabel], truth: &[bool]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::CountMismatch {
            context: "classification labels vs truth".into(),
            left: labels.len(),
            right: truth.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    let correct = labels
        .iter()
        .zip(truth)
        .filter(|(l, &t)| matches!((l, t), (AttributeLabel::Positive, true) | (AttributeLabel::Negative, false)))
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Correlate each voxel's weight column (bias row dropped) with an
/// attribute axis. Constant columns yield `None` rather than an error.
pub fn attribute_voxel_map(
    model: &EncodingModel,
    attr: &AttributeVector,
) -> Result<Vec<Option<f64>>> {
    if attr.vector.len() != model.n_regressors() - 1 {
        return Err(Error::DimensionMismatch {
            context: "attribute vs model latent rows".into(),
            expected: model.n_regressors() - 1,
            got: attr.vector.len(),
        });
    }
    let attr_slice: Vec<f64> = attr.vector.iter().cloned().collect();
    let bias = model.bias_index();
    let mut out = Vec::with_capacity(model.n_voxels());
    for v in 0..model.n_voxels() {
        let column: Vec<f64> = (0..model.n_regressors())
            .filter(|&j| j != bias)
            .map(|j| model.weights()[(j, v)])
            .collect();
        out.push(stats::pearson(&column, &attr_slice).ok());
    }
    Ok(out)
}

/// Venn decomposition of ground-truth variance explained by three
/// region-wise predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePartition {
    pub r2_full: f64,
    pub unique_occ: f64,
    pub unique_temp: f64,
    pub unique_fp: f64,
    pub shared_occ_temp: f64,
    pub shared_occ_fp: f64,
    pub shared_temp_fp: f64,
    pub shared_all: f64,
    /// True when any subset regression was rank-deficient and fell back
    /// to the pseudo-inverse solution.
    pub flagged_singular: bool,
}

impl VariancePartition {
    /// The 7 Venn cells in a fixed order.
    pub fn cells(&self) -> [f64; 7] {
        [
            self.unique_occ,
            self.unique_temp,
            self.unique_fp,
            self.shared_occ_temp,
            self.shared_occ_fp,
            self.shared_temp_fp,
            self.shared_all,
        ]
    }

    pub fn cells_sum(&self) -> f64 {
        self.cells().iter().sum()
    }
}

/// R^2 of regressing `y` on the selected predictor columns plus an
/// intercept, by SVD least squares. Returns (r2, was_rank_deficient).
fn subset_r2(y: &[f64], predictors: &[&[f64]]) -> Result<(f64, bool)> {
    let n = y.len();
    let p = predictors.len() + 1;
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (k, pred) in predictors.iter().enumerate() {
            x[(i, k + 1)] = pred[i];
        }
    }
    let yv = Vector::from_column_slice(y);
    let mean = yv.sum() / n as f64;
    let tss: f64 = yv.iter().map(|v| (v - mean) * (v - mean)).sum();
    if tss == 0.0 {
        return Err(Error::ZeroVariance(
            "variance partition target dimension is constant".into(),
        ));
    }
    let svd = nalgebra::SVD::new(x.clone(), true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    let cutoff = 1e-12 * s_max;
    let deficient = s.iter().any(|&v| v <= cutoff);
    let u = svd.u.as_ref().unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let mut uty = u.transpose() * &yv;
    for k in 0..s.len() {
        uty[k] = if s[k] > cutoff { uty[k] / s[k] } else { 0.0 };
    }
    let beta = v_t.transpose() * uty;
    let residual = &yv - x * beta;
    let rss: f64 = residual.iter().map(|v| v * v).sum();
    Ok(((1.0 - rss / tss).max(0.0), deficient))
}

/// Commonality analysis over the three region predictions.
///
/// For every latent dimension the ground truth is regressed on each of
/// the 7 subsets of {occipital, temporal, frontoparietal} predictions;
/// subset R^2 values are averaged over dimensions and converted to Venn
/// cells by inclusion-exclusion, which makes the cells sum to the
/// full-model R^2 identically.
pub fn variance_partition(
    truth: &LatentTable,
    pred_occ: &LatentTable,
    pred_temp: &LatentTable,
    pred_fp: &LatentTable,
) -> Result<VariancePartition> {
    let n = truth.n_stimuli();
    if n <= 3 {
        return Err(Error::invalid(
            "variance_partition needs more than 3 items for 3-predictor fits",
        ));
    }
    let ids = truth.stim_ids().to_vec();
    let occ = pred_occ.select(&ids)?;
    let temp = pred_temp.select(&ids)?;
    let fp = pred_fp.select(&ids)?;
    for (name, t) in [("occ", &occ), ("temp", &temp), ("fp", &fp)] {
        if t.n_dims() != truth.n_dims() {
            return Err(Error::DimensionMismatch {
                context: format!("variance partition {name} prediction"),
                expected: truth.n_dims(),
                got: t.n_dims(),
            });
        }
    }

    // mean subset R^2 over latent dimensions, indexed by the bitmask
    // occ = 1, temp = 2, fp = 4
    let mut r2 = [0.0f64; 8];
    let mut flagged = false;
    let dims = truth.n_dims();
    for d in 0..dims {
        let y: Vec<f64> = truth.codes().column(d).iter().cloned().collect();
        let a: Vec<f64> = occ.codes().column(d).iter().cloned().collect();
        let b: Vec<f64> = temp.codes().column(d).iter().cloned().collect();
        let c: Vec<f64> = fp.codes().column(d).iter().cloned().collect();
        for mask in 1..8usize {
            let mut preds: Vec<&[f64]> = Vec::new();
            if mask & 1 != 0 {
                preds.push(&a);
            }
            if mask & 2 != 0 {
                preds.push(&b);
            }
            if mask & 4 != 0 {
                preds.push(&c);
            }
            let (r, deficient) = subset_r2(&y, &preds)?;
            flagged |= deficient;
            r2[mask] += r / dims as f64;
        }
    }
    let (ra, rb, rc) = (r2[1], r2[2], r2[4]);
    let (rab, rac, rbc) = (r2[3], r2[5], r2[6]);
    let rabc = r2[7];
    Ok(VariancePartition {
        r2_full: rabc,
        unique_occ: rabc - rbc,
        unique_temp: rabc - rac,
        unique_fp: rabc - rab,
        shared_occ_temp: rac + rbc - rc - rabc,
        shared_occ_fp: rab + rbc - rb - rabc,
        shared_temp_fp: rab + rac - ra - rabc,
        shared_all: ra + rb + rc - rab - rac - rbc + rabc,
        flagged_singular: flagged,
    })
}

/// SSIM window side length.
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window_weights() -> [[f64; SSIM_WINDOW]; SSIM_WINDOW] {
    let mut w = [[0.0; SSIM_WINDOW]; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut total = 0.0;
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            *v = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            total += *v;
        }
    }
    for row in &mut w {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    w
}

/// Mean local structural similarity between two images with the stated
/// dynamic range (1.0 for images in [0, 1]). Gaussian 11x11 window with
/// sigma 1.5 and the usual stabilization constants.
pub fn ssim(image_a: &Matrix, image_b: &Matrix, pixel_range: f64) -> Result<f64> {
    if image_a.nrows() != image_b.nrows() || image_a.ncols() != image_b.ncols() {
        return Err(Error::DimensionMismatch {
            context: "ssim images".into(),
            expected: image_a.nrows() * image_a.ncols(),
            got: image_b.nrows() * image_b.ncols(),
        });
    }
    if image_a.nrows() < SSIM_WINDOW || image_a.ncols() < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {}x{}",
            image_a.nrows(),
            image_a.ncols()
        )));
    }
    if !(pixel_range > 0.0) {
        return Err(Error::invalid("pixel_range must be positive"));
    }
    let weights = ssim_window_weights();
    let c1 = (SSIM_K1 * pixel_range).powi(2);
    let c2 = (SSIM_K2 * pixel_range).powi(2);
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=(image_a.nrows() - SSIM_WINDOW) {
        for c0 in 0..=(image_a.ncols() - SSIM_WINDOW) {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut aa = 0.0;
            let mut bb = 0.0;
            let mut ab = 0.0;
            for (i, wrow) in weights.iter().enumerate() {
                for (j, &w) in wrow.iter().enumerate() {
                    let x = image_a[(r0 + i, c0 + j)];
                    let y = image_b[(r0 + i, c0 + j)];
                    mu_a += w * x;
                    mu_b += w * y;
                    aa += w * x * x;
                    bb += w * y * y;
                    ab += w * x * y;
                }
            }
            let var_a = aa - mu_a * mu_a;
            let var_b = bb - mu_b * mu_b;
            let cov = ab - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::seeded_stream(seed, 8);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn table(prefix: &str, codes: Matrix) -> LatentTable {
        let ids = (0..codes.nrows()).map(|i| format!("{prefix}{i:03}")).collect();
        LatentTable::new(ids, codes).unwrap()
    }

    #[test]
    fn exact_match_ranks_first() {
        let truth = table("t", random_matrix(8, 12, 1));
        let est: Vec<f64> = truth.codes().row(3).iter().cloned().collect();
        let rank = rank_against_candidates(&est, &truth, "t003").unwrap();
        assert_eq!(rank, 1.0);
    }

    #[test]
    fn negated_target_ranks_by_correlation_loop() {
        let truth = table("t", random_matrix(20, 16, 2));
        let est: Vec<f64> = truth.codes().row(0).iter().map(|v| -v).collect();
        let rank = rank_against_candidates(&est, &truth, "t000").unwrap();
        // oracle: count strictly-higher correlations by explicit loops
        let mut higher = 0;
        let target_corr = stats::pearson(
            &est,
            &truth.codes().row(0).iter().cloned().collect::<Vec<_>>(),
        )
        .unwrap();
        for i in 0..20 {
            let c = stats::pearson(
                &est,
                &truth.codes().row(i).iter().cloned().collect::<Vec<_>>(),
            )
            .unwrap();
            if c > target_corr {
                higher += 1;
            }
        }
        assert_eq!(rank, higher as f64 + 1.0);
        assert!(rank >= 15.0, "anti-correlated target should rank near last");
    }

    #[test]
    fn hand_built_correlations_rank_second() {
        // candidates engineered so correlations with the estimate are
        // roughly 0.9 / 0.5 / 0.1 with the target second
        let estimate = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let strong: Vec<f64> = vec![1.1, 2.0, 2.9, 4.2, 5.0, 5.8];
        let medium: Vec<f64> = vec![2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
        let weak: Vec<f64> = vec![4.0, 1.0, 5.0, 2.0, 3.0, 6.0];
        let mut codes = Matrix::zeros(3, 6);
        for (i, v) in [strong, medium, weak].iter().enumerate() {
            for (j, &x) in v.iter().enumerate() {
                codes[(i, j)] = x;
            }
        }
        let truth = LatentTable::new(
            vec!["best".into(), "target".into(), "far".into()],
            codes,
        )
        .unwrap();
        let rank = rank_against_candidates(&estimate, &truth, "target").unwrap();
        assert_eq!(rank, 2.0);
    }

    #[test]
    fn rank_invariant_under_positive_affine_transform() {
        let truth = table("t", random_matrix(10, 8, 3));
        let est: Vec<f64> = truth.codes().row(4).iter().map(|v| v + 0.1).collect();
        let transformed: Vec<f64> = est.iter().map(|v| 3.5 * v + 11.0).collect();
        let a = rank_against_candidates(&est, &truth, "t004").unwrap();
        let b = rank_against_candidates(&transformed, &truth, "t004").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfect_report_and_worst_report() {
        let truth = table("t", random_matrix(6, 10, 4));
        let report = recognition_report(&truth, &truth, 2000, 9).unwrap();
        assert_eq!(report.pairwise_accuracy, 1.0);
        assert_eq!(report.full_accuracy, 1.0);
        assert_eq!(report.p_pairwise.p_value, report.p_pairwise.p_floor.unwrap());

        // estimates anti-proportional to a *different* item force bad ranks
        let mut worst_codes = Matrix::zeros(6, 10);
        for i in 0..6 {
            for j in 0..10 {
                worst_codes[(i, j)] = -truth.codes()[(i, j)];
            }
        }
        let worst = LatentTable::new(truth.stim_ids().to_vec(), worst_codes).unwrap();
        let report = recognition_report(&worst, &truth, 2000, 9).unwrap();
        assert!(report.full_accuracy == 0.0);
        assert!(report.pairwise_accuracy < 0.5);
    }

    #[test]
    fn pairwise_equals_explicit_pair_count() {
        // brute force over all ordered (target, distractor) pairs
        let truth = table("t", random_matrix(12, 9, 5));
        let estimates = {
            let noise = random_matrix(12, 9, 6);
            let codes = truth.codes() + 0.8 * noise;
            LatentTable::new(truth.stim_ids().to_vec(), codes).unwrap()
        };
        let report = recognition_report(&estimates, &truth, 1000, 3).unwrap();
        let n = 12;
        let mut wins = 0.0;
        for i in 0..n {
            let est: Vec<f64> = estimates.codes().row(i).iter().cloned().collect();
            let target: Vec<f64> = truth.codes().row(i).iter().cloned().collect();
            let ct = stats::pearson(&est, &target).unwrap();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d: Vec<f64> = truth.codes().row(j).iter().cloned().collect();
                let cd = stats::pearson(&est, &d).unwrap();
                if ct > cd {
                    wins += 1.0;
                } else if ct == cd {
                    wins += 0.5;
                }
            }
        }
        let brute = wins / (n * (n - 1)) as f64;
        assert_relative_eq!(report.pairwise_accuracy, brute, max_relative = 1e-12);
    }

    #[test]
    fn chance_level_calibration() {
        // random estimates against random truth: pairwise ~0.5, full ~1/n
        let n = 20;
        let mut pairwise_sum = 0.0;
        let mut full_sum = 0.0;
        let reps = 200;
        for rep in 0..reps {
            let truth = table("t", random_matrix(n, 8, 1000 + rep));
            let est = table("t", random_matrix(n, 8, 5000 + rep));
            let report = recognition_report(&est, &truth, 100, 1).unwrap();
            pairwise_sum += report.pairwise_accuracy;
            full_sum += report.full_accuracy;
        }
        let mean_pairwise = pairwise_sum / reps as f64;
        let mean_full = full_sum / reps as f64;
        // 3 standard errors of the surrogate means
        assert!(
            (mean_pairwise - 0.5).abs() < 0.02,
            "pairwise {mean_pairwise}"
        );
        let se_full = (0.05 * 0.95 / (reps as usize * n) as f64).sqrt();
        assert!(
            (mean_full - 0.05).abs() < 3.0 * se_full + 0.005,
            "full {mean_full}"
        );
    }

    #[test]
    fn classify_attribute_signs_and_tie() {
        let axis = Vector::from_column_slice(&[1.0, -1.0, 0.5]);
        let attr = AttributeVector {
            name: "male".into(),
            vector: axis.clone(),
            n_with: 5,
            n_without: 5,
        };
        let mut codes = Matrix::zeros(3, 3);
        codes.row_mut(0).copy_from(&axis.transpose());
        codes.row_mut(1).copy_from(&(-&axis).transpose());
        // orthogonal code: (1, 1, 0) . (1, -1, 0.5) = 0
        codes[(2, 0)] = 1.0;
        codes[(2, 1)] = 1.0;
        let table = LatentTable::new(
            vec!["pos".into(), "neg".into(), "orth".into()],
            codes,
        )
        .unwrap();
        let labels = classify_attribute(&table, &attr).unwrap();
        assert_eq!(
            labels,
            vec![
                AttributeLabel::Positive,
                AttributeLabel::Negative,
                AttributeLabel::Tie
            ]
        );
        let acc = classification_accuracy(&labels, &[true, false, true]).unwrap();
        assert_relative_eq!(acc, 2.0 / 3.0);
    }

    #[test]
    fn classify_attribute_scaling_and_negation() {
        let codes = table("c", random_matrix(15, 6, 7));
        let v = Vector::from_fn(6, |i, _| (i as f64) - 2.5);
        let attr = AttributeVector {
            name: "a".into(),
            vector: v.clone(),
            n_with: 1,
            n_without: 1,
        };
        let scaled = AttributeVector {
            vector: 4.0 * &v,
            ..attr.clone()
        };
        let negated = AttributeVector {
            vector: -&v,
            ..attr.clone()
        };
        let base = classify_attribute(&codes, &attr).unwrap();
        assert_eq!(base, classify_attribute(&codes, &scaled).unwrap());
        let flipped = classify_attribute(&codes, &negated).unwrap();
        for (a, b) in base.iter().zip(&flipped) {
            match a {
                AttributeLabel::Positive => assert_eq!(*b, AttributeLabel::Negative),
                AttributeLabel::Negative => assert_eq!(*b, AttributeLabel::Positive),
                AttributeLabel::Tie => assert_eq!(*b, AttributeLabel::Tie),
            }
        }
    }

    #[test]
    fn classify_rejects_zero_attribute() {
        let codes = table("c", random_matrix(3, 4, 8));
        let attr = AttributeVector {
            name: "zero".into(),
            vector: Vector::zeros(4),
            n_with: 1,
            n_without: 1,
        };
        assert!(classify_attribute(&codes, &attr).is_err());
    }

    fn model_with_weights(w: Matrix) -> EncodingModel {
        let p = w.nrows();
        let v = w.ncols();
        let mut names = vec!["bias".to_string()];
        names.extend((0..p - 1).map(crate::design::latent_regressor_name));
        EncodingModel::from_parts(
            w,
            0,
            names,
            (0..v).map(|i| format!("v{i:04}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn attribute_voxel_map_extremes_and_oracle() {
        let d = 10;
        let attr_v = Vector::from_fn(d, |i, _| (i as f64 * 0.7).sin() + 0.2);
        let mut w = Matrix::zeros(d + 1, 3);
        for j in 0..d {
            w[(j + 1, 0)] = attr_v[j]; // equal to attribute
            w[(j + 1, 1)] = -attr_v[j]; // negated
            w[(j + 1, 2)] = ((j * j) as f64 * 0.31).cos(); // unrelated
        }
        // bias row is arbitrary and must be ignored
        w[(0, 0)] = 99.0;
        let model = model_with_weights(w.clone());
        let attr = AttributeVector {
            name: "male".into(),
            vector: attr_v.clone(),
            n_with: 2,
            n_without: 2,
        };
        let map = attribute_voxel_map(&model, &attr).unwrap();
        assert_relative_eq!(map[0].unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(map[1].unwrap(), -1.0, epsilon = 1e-12);
        let col: Vec<f64> = (1..=d).map(|j| w[(j, 2)]).collect();
        let attr_slice: Vec<f64> = attr_v.iter().cloned().collect();
        let expect = stats::pearson(&col, &attr_slice).unwrap();
        assert_relative_eq!(map[2].unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn attribute_voxel_map_constant_column_is_missing() {
        let d = 6;
        let mut w = random_matrix(d + 1, 2, 9);
        for j in 0..=d {
            w[(j, 1)] = 2.5;
        }
        let model = model_with_weights(w);
        let attr = AttributeVector {
            name: "a".into(),
            vector: Vector::from_fn(d, |i, _| i as f64),
            n_with: 1,
            n_without: 1,
        };
        let map = attribute_voxel_map(&model, &attr).unwrap();
        assert!(map[0].is_some());
        assert!(map[1].is_none());
    }

    #[test]
    fn variance_partition_zero_predictors() {
        let truth = table("t", random_matrix(12, 5, 10));
        let occ = {
            let codes = truth.codes() + 0.5 * random_matrix(12, 5, 11);
            LatentTable::new(truth.stim_ids().to_vec(), codes).unwrap()
        };
        let zero = LatentTable::new(truth.stim_ids().to_vec(), Matrix::zeros(12, 5)).unwrap();
        let part = variance_partition(&truth, &occ, &zero, &zero).unwrap();
        assert_relative_eq!(part.unique_occ, part.r2_full, epsilon = 1e-10);
        for cell in [
            part.unique_temp,
            part.unique_fp,
            part.shared_occ_temp,
            part.shared_occ_fp,
            part.shared_temp_fp,
            part.shared_all,
        ] {
            assert!(cell.abs() < 1e-10);
        }
        assert!(part.r2_full > 0.3);
    }

    #[test]
    fn variance_partition_duplicated_predictor() {
        let truth = table("t", random_matrix(14, 4, 12));
        let occ = {
            let codes = truth.codes() + 0.7 * random_matrix(14, 4, 13);
            LatentTable::new(truth.stim_ids().to_vec(), codes).unwrap()
        };
        let fp = {
            let codes = random_matrix(14, 4, 14);
            LatentTable::new(truth.stim_ids().to_vec(), codes).unwrap()
        };
        let part = variance_partition(&truth, &occ, &occ, &fp).unwrap();
        // identical occ and temp predictions: no unique contribution
        assert!(part.unique_occ.abs() < 1e-10, "{}", part.unique_occ);
        assert!(part.unique_temp.abs() < 1e-10);
        assert!(part.shared_occ_temp > 0.05);
        assert!(part.flagged_singular);
    }

    #[test]
    fn variance_partition_matches_subset_regression_oracle() {
        let truth = table("t", random_matrix(16, 3, 15));
        let mk = |seed: u64, scale: f64| {
            let codes = truth.codes() + scale * random_matrix(16, 3, seed);
            LatentTable::new(truth.stim_ids().to_vec(), codes).unwrap()
        };
        let occ = mk(16, 0.4);
        let temp = mk(17, 0.9);
        let fp = mk(18, 2.0);
        let part = variance_partition(&truth, &occ, &temp, &fp).unwrap();
        // closure: cells sum to the full R^2
        assert_relative_eq!(part.cells_sum(), part.r2_full, epsilon = 1e-10);
        // oracle for one cell: unique_occ = R2_full - R2_{temp,fp}
        let mut r2_bc = 0.0;
        for d in 0..3 {
            let y: Vec<f64> = truth.codes().column(d).iter().cloned().collect();
            let b: Vec<f64> = temp.codes().column(d).iter().cloned().collect();
            let c: Vec<f64> = fp.codes().column(d).iter().cloned().collect();
            r2_bc += subset_r2(&y, &[&b, &c]).unwrap().0 / 3.0;
        }
        assert_relative_eq!(part.unique_occ, part.r2_full - r2_bc, epsilon = 1e-10);
        assert!(part.r2_full <= 1.0 && part.r2_full >= 0.0);
    }

    #[test]
    fn ssim_self_similarity_is_one() {
        let img = random_matrix(16, 16, 19).map(|v| v.abs().min(1.0));
        assert_relative_eq!(ssim(&img, &img, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_symmetric() {
        let a = random_matrix(20, 14, 20).map(|v| 0.5 + 0.2 * v);
        let b = random_matrix(20, 14, 21).map(|v| 0.5 + 0.2 * v);
        let ab = ssim(&a, &b, 1.0).unwrap();
        let ba = ssim(&b, &a, 1.0).unwrap();
        assert_relative_eq!(ab, ba, epsilon = 1e-12);
        assert!(ab < 1.0);
    }

    /// Independent direct-formula SSIM: per-window centered two-pass sums.
    fn ssim_oracle(a: &Matrix, b: &Matrix, range: f64) -> f64 {
        let w = 11usize;
        let sigma = 1.5f64;
        let c1 = (0.01 * range).powi(2);
        let c2 = (0.03 * range).powi(2);
        let mut weights = vec![vec![0.0; w]; w];
        let mut sum = 0.0;
        for i in 0..w {
            for j in 0..w {
                let di = i as f64 - 5.0;
                let dj = j as f64 - 5.0;
                weights[i][j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
                sum += weights[i][j];
            }
        }
        let mut total = 0.0;
        let mut count = 0;
        for r0 in 0..=(a.nrows() - w) {
            for c0 in 0..=(a.ncols() - w) {
                let mut mu_x = 0.0;
                let mut mu_y = 0.0;
                for i in 0..w {
                    for j in 0..w {
                        mu_x += weights[i][j] / sum * a[(r0 + i, c0 + j)];
                        mu_y += weights[i][j] / sum * b[(r0 + i, c0 + j)];
                    }
                }
                let mut var_x = 0.0;
                let mut var_y = 0.0;
                let mut cov = 0.0;
                for i in 0..w {
                    for j in 0..w {
                        let wx = weights[i][j] / sum;
                        let dx = a[(r0 + i, c0 + j)] - mu_x;
                        let dy = b[(r0 + i, c0 + j)] - mu_y;
                        var_x += wx * dx * dx;
                        var_y += wx * dy * dy;
                        cov += wx * dx * dy;
                    }
                }
                total += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                    / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn ssim_matches_independent_oracle_on_fixed_patterns() {
        // two deterministic 16x16 patterns
        let a = Matrix::from_fn(16, 16, |i, j| ((i as f64 * 0.9) + (j as f64 * 0.4)).sin() * 0.5 + 0.5);
        let b = Matrix::from_fn(16, 16, |i, j| {
            (((i * j) as f64) * 0.05).cos() * 0.4 + 0.5
        });
        let got = ssim(&a, &b, 1.0).unwrap();
        let expect = ssim_oracle(&a, &b, 1.0);
        assert_relative_eq!(got, expect, epsilon = 1e-9);
        assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn ssim_constant_offset_via_oracle() {
        let a = random_matrix(16, 16, 22).map(|v| 0.5 + 0.1 * v);
        let b = random_matrix(16, 16, 23).map(|v| 0.5 + 0.1 * v);
        let shift = 0.07;
        let a_shift = a.map(|v| v + shift);
        let b_shift = b.map(|v| v + shift);
        let got = ssim(&a_shift, &b_shift, 1.0).unwrap();
        let expect = ssim_oracle(&a_shift, &b_shift, 1.0);
        assert_relative_eq!(got, expect, epsilon = 1e-9);
    }

    #[test]
    fn ssim_size_errors() {
        let a = Matrix::zeros(16, 16);
        let b = Matrix::zeros(16, 15);
        assert!(ssim(&a, &b, 1.0).is_err());
        let small = Matrix::zeros(8, 8);
        assert!(ssim(&small, &small, 1.0).is_err());
    }
}
