//! GLM design construction: event timing to HRF-convolved regressors.
//!
//! Columns of a decoding design, in order: one constant "bias" boxcar over
//! every face presentation, one parametric regressor per latent dimension
//! (training faces only, scaled by their codes), one categorical boxcar
//! per distinct test face, then nuisance boxcars (one-back, imagery) and
//! optional pre-supplied motion regressors. Everything is built on a
//! microtime grid, convolved with the canonical HRF, and sampled at the
//! bin starting each scan.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::latent::LatentTable;
use crate::Matrix;

/// Trial kinds of the scanning protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    TrainFace,
    TestFace,
    Fixation,
    OneBack,
    Imagery,
}

impl Condition {
    /// Whether trials of this condition reference a stimulus id.
    pub fn is_stimulus(self) -> bool {
        !matches!(self, Condition::Fixation)
    }

    /// Whether the trial shows a face on screen (enters the bias boxcar).
    pub fn is_face_presentation(self) -> bool {
        matches!(
            self,
            Condition::TrainFace | Condition::TestFace | Condition::OneBack
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::TrainFace => "train_face",
            Condition::TestFace => "test_face",
            Condition::Fixation => "fixation",
            Condition::OneBack => "one_back",
            Condition::Imagery => "imagery",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "train_face" => Condition::TrainFace,
            "test_face" => Condition::TestFace,
            "fixation" => Condition::Fixation,
            "one_back" => Condition::OneBack,
            "imagery" => Condition::Imagery,
            other => return Err(Error::invalid(format!("unknown condition '{other}'"))),
        })
    }
}

/// One scheduled event.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub onset_s: f64,
    pub duration_s: f64,
    pub condition: Condition,
    /// Present exactly when the condition involves a stimulus.
    pub stim_id: Option<String>,
}

/// Validated, onset-ordered list of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTable {
    trials: Vec<Trial>,
}

impl TrialTable {
    pub fn new(trials: Vec<Trial>) -> Result<Self> {
        let mut last_onset = f64::NEG_INFINITY;
        for t in &trials {
            if !t.onset_s.is_finite() || t.onset_s < 0.0 {
                return Err(Error::invalid(format!("bad onset {}", t.onset_s)));
            }
            if !t.duration_s.is_finite() || t.duration_s <= 0.0 {
                return Err(Error::invalid(format!("bad duration {}", t.duration_s)));
            }
            if t.onset_s < last_onset {
                return Err(Error::invalid(format!(
                    "onsets not nondecreasing at {}",
                    t.onset_s
                )));
            }
            last_onset = t.onset_s;
            match (&t.stim_id, t.condition.is_stimulus()) {
                (None, true) => {
                    return Err(Error::invalid(format!(
                        "{} trial at {} s has no stim_id",
                        t.condition.as_str(),
                        t.onset_s
                    )))
                }
                (Some(_), false) => {
                    return Err(Error::invalid(format!(
                        "fixation trial at {} s carries a stim_id",
                        t.onset_s
                    )))
                }
                _ => {}
            }
        }
        Ok(TrialTable { trials })
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// End time of the last trial.
    pub fn end_s(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.onset_s + t.duration_s)
            .fold(0.0, f64::max)
    }

    /// Trials with onset strictly before the cutoff.
    pub fn truncate_before(&self, cutoff_s: f64) -> TrialTable {
        TrialTable {
            trials: self
                .trials
                .iter()
                .filter(|t| t.onset_s < cutoff_s)
                .cloned()
                .collect(),
        }
    }
}

/// Canonical double-gamma hemodynamic response parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Hrf {
    pub peak_delay_s: f64,
    pub undershoot_delay_s: f64,
    pub peak_dispersion: f64,
    pub undershoot_dispersion: f64,
    pub peak_undershoot_ratio: f64,
    pub kernel_length_s: f64,
    pub dt_s: f64,
}

impl Hrf {
    /// The canonical parameter set: 6 s peak, 16 s undershoot, unit
    /// dispersions, 6:1 peak-to-undershoot, 32 s kernel.
    pub fn canonical(dt_s: f64) -> Result<Hrf> {
        if !(dt_s > 0.0 && dt_s <= 1.0) {
            return Err(Error::invalid(format!("hrf dt {dt_s} outside (0, 1]")));
        }
        Ok(Hrf {
            peak_delay_s: 6.0,
            undershoot_delay_s: 16.0,
            peak_dispersion: 1.0,
            undershoot_dispersion: 1.0,
            peak_undershoot_ratio: 6.0,
            kernel_length_s: 32.0,
            dt_s,
        })
    }

    /// Kernel samples on `[0, kernel_length_s]`, peak normalized to 1.
    pub fn kernel(&self) -> Vec<f64> {
        let n = (self.kernel_length_s / self.dt_s).floor() as usize + 1;
        let gamma_pdf = |t: f64, shape: f64, scale: f64| -> f64 {
            if t <= 0.0 {
                return 0.0;
            }
            let log_pdf = (shape - 1.0) * t.ln() - t / scale - ln_gamma(shape) - shape * scale.ln();
            log_pdf.exp()
        };
        let peak_shape = self.peak_delay_s / self.peak_dispersion;
        let under_shape = self.undershoot_delay_s / self.undershoot_dispersion;
        let mut kernel: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * self.dt_s;
                gamma_pdf(t, peak_shape, self.peak_dispersion)
                    - gamma_pdf(t, under_shape, self.undershoot_dispersion)
                        / self.peak_undershoot_ratio
            })
            .collect();
        let max = kernel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &mut kernel {
            *v /= max;
        }
        kernel
    }

    /// Time of the kernel maximum.
    pub fn peak_time_s(&self) -> f64 {
        let kernel = self.kernel();
        let argmax = kernel
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        argmax as f64 * self.dt_s
    }
}

/// Canonical HRF kernel samples at the given resolution.
pub fn canonical_hrf(dt_s: f64) -> Result<Vec<f64>> {
    Ok(Hrf::canonical(dt_s)?.kernel())
}

/// Scans x regressors design after HRF convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Matrix,
    pub regressor_names: Vec<String>,
    pub tr_s: f64,
}

impl DesignMatrix {
    pub fn n_scans(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_regressors(&self) -> usize {
        self.values.ncols()
    }

    pub fn regressor_index(&self, name: &str) -> Option<usize> {
        self.regressor_names.iter().position(|n| n == name)
    }
}

/// Knobs of [`build_design_with`].
#[derive(Debug, Clone)]
pub struct DesignOptions {
    pub include_parametric: bool,
    /// Microtime bins per TR before downsampling.
    pub microtime_bins: usize,
    /// Pre-estimated motion (or other nuisance) regressors, scans x k.
    pub motion: Option<Matrix>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            include_parametric: true,
            microtime_bins: 16,
            motion: None,
        }
    }
}

/// Name of the face-versus-fixation bias regressor.
pub const BIAS_NAME: &str = "bias";
/// Prefix of per-latent-dimension parametric regressors.
pub const LATENT_PREFIX: &str = "latent_";
/// Prefix of per-test-face categorical regressors.
pub const TEST_PREFIX: &str = "test:";

/// Name of the parametric regressor of latent dimension `d`.
pub fn latent_regressor_name(d: usize) -> String {
    format!("{LATENT_PREFIX}{d:04}")
}

/// Build the design matrix for a trial table.
///
/// With `include_parametric`, every training-face trial must have a code
/// in `latents`; test faces get individual categorical boxcars and never
/// consume latent codes, and one-back repeats are kept out of the
/// parametric columns.
pub fn build_design(
    trials: &TrialTable,
    latents: &LatentTable,
    n_scans: usize,
    tr_s: f64,
    include_parametric: bool,
) -> Result<DesignMatrix> {
    build_design_with(
        trials,
        latents,
        n_scans,
        tr_s,
        &DesignOptions {
            include_parametric,
            ..DesignOptions::default()
        },
    )
}

pub fn build_design_with(
    trials: &TrialTable,
    latents: &LatentTable,
    n_scans: usize,
    tr_s: f64,
    opts: &DesignOptions,
) -> Result<DesignMatrix> {
    if n_scans == 0 || !(tr_s > 0.0) {
        return Err(Error::invalid("n_scans and tr_s must be positive"));
    }
    if opts.microtime_bins == 0 {
        return Err(Error::invalid("microtime_bins must be positive"));
    }
    let window_s = n_scans as f64 * tr_s;
    for t in trials.trials() {
        if t.onset_s + t.duration_s > window_s + 1e-9 {
            return Err(Error::invalid(format!(
                "trial at {} s extends beyond the {} s scan window",
                t.onset_s, window_s
            )));
        }
    }

    let dt = tr_s / opts.microtime_bins as f64;
    let kernel = Hrf::canonical(dt)?.kernel();
    let n_dims = if opts.include_parametric {
        latents.n_dims()
    } else {
        0
    };

    // distinct test faces in lexicographic order
    let mut test_ids: Vec<String> = trials
        .trials()
        .iter()
        .filter(|t| t.condition == Condition::TestFace)
        .filter_map(|t| t.stim_id.clone())
        .collect();
    test_ids.sort();
    test_ids.dedup();
    let has_oneback = trials
        .trials()
        .iter()
        .any(|t| t.condition == Condition::OneBack);
    let has_imagery = trials
        .trials()
        .iter()
        .any(|t| t.condition == Condition::Imagery);

    let mut names = vec![BIAS_NAME.to_string()];
    names.extend((0..n_dims).map(latent_regressor_name));
    let test_col_base = names.len();
    names.extend(test_ids.iter().map(|id| format!("{TEST_PREFIX}{id}")));
    let oneback_col = has_oneback.then(|| {
        names.push("oneback".to_string());
        names.len() - 1
    });
    let imagery_col = has_imagery.then(|| {
        names.push("imagery".to_string());
        names.len() - 1
    });

    let mut values = Matrix::zeros(n_scans, names.len() + motion_cols(opts));

    for t in trials.trials() {
        if t.condition == Condition::Fixation {
            continue;
        }
        let response = scan_response(t, &kernel, dt, opts.microtime_bins, n_scans);
        if t.condition.is_face_presentation() {
            accumulate(&mut values, 0, &response);
        }
        match t.condition {
            Condition::TrainFace => {
                if opts.include_parametric {
                    let id = t.stim_id.as_deref().expect("validated stimulus trial");
                    let row = latents.row_index(id).ok_or_else(|| Error::MissingId {
                        context: "latent code for trial".into(),
                        id: id.to_string(),
                    })?;
                    for d in 0..n_dims {
                        let scale = latents.codes()[(row, d)];
                        if scale != 0.0 {
                            accumulate_scaled(&mut values, 1 + d, &response, scale);
                        }
                    }
                }
            }
            Condition::TestFace => {
                let id = t.stim_id.as_deref().expect("validated stimulus trial");
                let k = test_ids.binary_search_by(|probe| probe.as_str().cmp(id)).unwrap();
                accumulate(&mut values, test_col_base + k, &response);
            }
            Condition::OneBack => {
                accumulate(&mut values, oneback_col.unwrap(), &response);
            }
            Condition::Imagery => {
                accumulate(&mut values, imagery_col.unwrap(), &response);
            }
            Condition::Fixation => unreachable!("fixation trials skipped above"),
        }
    }

    let mut names = names;
    if let Some(motion) = &opts.motion {
        if motion.nrows() != n_scans {
            return Err(Error::CountMismatch {
                context: "motion regressor rows vs scans".into(),
                left: motion.nrows(),
                right: n_scans,
            });
        }
        let base = names.len();
        for k in 0..motion.ncols() {
            names.push(format!("motion_{k}"));
            values.column_mut(base + k).copy_from(&motion.column(k));
        }
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    Ok(DesignMatrix {
        values,
        regressor_names: names,
        tr_s,
    })
}

fn motion_cols(opts: &DesignOptions) -> usize {
    opts.motion.as_ref().map_or(0, Matrix::ncols)
}

/// HRF response of one trial's boxcar, sampled at the bin starting each
/// scan. Returns (first_scan, values).
fn scan_response(
    trial: &Trial,
    kernel: &[f64],
    dt: f64,
    bins_per_scan: usize,
    n_scans: usize,
) -> (usize, Vec<f64>) {
    // boxcar occupies bins u with onset <= u*dt < onset + duration
    let start_bin = (trial.onset_s / dt - 1e-9).ceil().max(0.0) as usize;
    let end_bin = ((trial.onset_s + trial.duration_s) / dt - 1e-9).ceil() as usize;
    let conv_len = (end_bin - start_bin) + kernel.len() - 1;

    let first_scan = start_bin.div_ceil(bins_per_scan).min(n_scans);
    let last_scan = ((start_bin + conv_len - 1) / bins_per_scan + 1).min(n_scans);
    let mut out = vec![0.0; last_scan.saturating_sub(first_scan)];
    for (s, slot) in out.iter_mut().enumerate() {
        let bin = (first_scan + s) * bins_per_scan;
        // convolution at this bin: sum over boxcar bins u of kernel[bin - u]
        let u_lo = start_bin.max(bin.saturating_sub(kernel.len() - 1));
        let u_hi = end_bin.min(bin + 1);
        let mut acc = 0.0;
        for u in u_lo..u_hi {
            acc += kernel[bin - u];
        }
        *slot = acc;
    }
    (first_scan, out)
}

fn accumulate(values: &mut Matrix, col: usize, response: &(usize, Vec<f64>)) {
    let (first, data) = response;
    for (i, v) in data.iter().enumerate() {
        values[(first + i, col)] += v;
    }
}

fn accumulate_scaled(values: &mut Matrix, col: usize, response: &(usize, Vec<f64>), scale: f64) {
    let (first, data) = response;
    for (i, v) in data.iter().enumerate() {
        values[(first + i, col)] += scale * v;
    }
}

/// Numerical rank report of a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub n_regressors: usize,
    pub full_rank: bool,
    pub s_min: f64,
    pub s_max: f64,
}

/// Numerical rank: singular values above `tolerance * s_max`.
pub fn check_full_rank(design: &DesignMatrix, tolerance: f64) -> Result<RankReport> {
    if design.values.is_empty() {
        return Err(Error::invalid("empty design"));
    }
    let svd = nalgebra::SVD::new(design.values.clone(), false, false);
    let s = &svd.singular_values;
    let s_max = s.max();
    let rank = s.iter().filter(|&&v| v > tolerance * s_max).count();
    Ok(RankReport {
        rank,
        n_regressors: design.n_regressors(),
        full_rank: rank == design.n_regressors(),
        s_min: s.min(),
        s_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vector;
    use approx::assert_relative_eq;

    fn face(onset: f64, id: &str) -> Trial {
        Trial {
            onset_s: onset,
            duration_s: 1.0,
            condition: Condition::TrainFace,
            stim_id: Some(id.to_string()),
        }
    }

    fn table(trials: Vec<Trial>) -> TrialTable {
        TrialTable::new(trials).unwrap()
    }

    fn latents_of(rows: &[(&str, &[f64])]) -> LatentTable {
        let dims = rows[0].1.len();
        let ids = rows.iter().map(|(id, _)| id.to_string()).collect();
        let codes = Matrix::from_fn(rows.len(), dims, |i, j| rows[i].1[j]);
        LatentTable::new(ids, codes).unwrap()
    }

    #[test]
    fn hrf_zero_at_origin_and_unit_peak() {
        let kernel = canonical_hrf(0.1).unwrap();
        assert_eq!(kernel[0], 0.0);
        let max = kernel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(max, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn hrf_peak_between_4_and_7_seconds() {
        // dense evaluation of the double-gamma difference
        let hrf = Hrf::canonical(0.01).unwrap();
        let peak = hrf.peak_time_s();
        assert!((4.0..=7.0).contains(&peak), "peak at {peak}");
    }

    #[test]
    fn hrf_single_sign_change() {
        let kernel = canonical_hrf(0.05).unwrap();
        let mut changes = 0;
        let mut last_sign = 0i8;
        for &v in &kernel {
            if v.abs() < 1e-12 {
                continue;
            }
            let sign = if v > 0.0 { 1 } else { -1 };
            if last_sign != 0 && sign != last_sign {
                changes += 1;
            }
            last_sign = sign;
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn hrf_rejects_bad_dt() {
        assert!(canonical_hrf(0.0).is_err());
        assert!(canonical_hrf(1.5).is_err());
    }

    #[test]
    fn trial_table_validation() {
        assert!(TrialTable::new(vec![face(5.0, "a"), face(2.0, "b")]).is_err());
        let missing_id = Trial {
            onset_s: 0.0,
            duration_s: 1.0,
            condition: Condition::TestFace,
            stim_id: None,
        };
        assert!(TrialTable::new(vec![missing_id]).is_err());
        let fixation_with_id = Trial {
            onset_s: 0.0,
            duration_s: 1.0,
            condition: Condition::Fixation,
            stim_id: Some("x".into()),
        };
        assert!(TrialTable::new(vec![fixation_with_id]).is_err());
    }

    #[test]
    fn zero_latent_gives_zero_parametric_and_hrf_bias() {
        let trials = table(vec![face(6.0, "a")]);
        let latents = latents_of(&[("a", &[0.0, 0.0])]);
        let design = build_design(&trials, &latents, 30, 2.0, true).unwrap();
        assert_eq!(design.regressor_names[0], "bias");
        for d in 1..=2 {
            assert!(design.values.column(d).iter().all(|&v| v == 0.0));
        }
        // bias column equals the downsampled convolved boxcar: nonzero
        // after the onset, zero before
        let bias = design.values.column(0);
        assert!(bias.rows(0, 3).iter().all(|&v| v == 0.0));
        assert!(bias.rows(4, 10).iter().any(|&v| v > 0.1));
    }

    #[test]
    fn doubling_a_latent_dim_doubles_its_column() {
        let trials = table(vec![face(4.0, "a"), face(10.0, "b")]);
        let l1 = latents_of(&[("a", &[1.0, 2.0]), ("b", &[-0.5, 1.0])]);
        let l2 = latents_of(&[("a", &[2.0, 2.0]), ("b", &[-1.0, 1.0])]);
        let d1 = build_design(&trials, &l1, 20, 2.0, true).unwrap();
        let d2 = build_design(&trials, &l2, 20, 2.0, true).unwrap();
        let col1 = d1.values.column(1);
        let col2 = d2.values.column(1);
        for i in 0..20 {
            assert_relative_eq!(col2[i], 2.0 * col1[i], max_relative = 1e-12);
        }
        // other columns untouched
        assert_eq!(
            d1.values.column(2).clone_owned(),
            d2.values.column(2).clone_owned()
        );
    }

    #[test]
    fn superposition_of_nonoverlapping_trials() {
        let a = table(vec![face(2.0, "a")]);
        let b = table(vec![face(60.0, "b")]);
        let both = table(vec![face(2.0, "a"), face(60.0, "b")]);
        let latents = latents_of(&[("a", &[1.0, -1.0]), ("b", &[0.5, 2.0])]);
        let da = build_design(&a, &latents, 60, 2.0, true).unwrap();
        let db = build_design(&b, &latents, 60, 2.0, true).unwrap();
        let dab = build_design(&both, &latents, 60, 2.0, true).unwrap();
        let sum = &da.values + &db.values;
        assert!((&dab.values - &sum).norm() < 1e-12);
    }

    #[test]
    fn design_linear_in_latent_tables() {
        let trials = table(vec![face(2.0, "a"), face(8.0, "b"), face(14.0, "a")]);
        let l1 = latents_of(&[("a", &[1.0, 0.25]), ("b", &[-2.0, 0.5])]);
        let l2 = latents_of(&[("a", &[0.5, -1.0]), ("b", &[1.5, 3.0])]);
        let sum_latents = latents_of(&[("a", &[1.5, -0.75]), ("b", &[-0.5, 3.5])]);
        let d1 = build_design(&trials, &l1, 25, 2.0, true).unwrap();
        let d2 = build_design(&trials, &l2, 25, 2.0, true).unwrap();
        let ds = build_design(&trials, &sum_latents, 25, 2.0, true).unwrap();
        // parametric columns add; the bias column is counted once
        for d in 1..=2 {
            let sum = d1.values.column(d) + d2.values.column(d);
            assert!((ds.values.column(d) - sum).norm() < 1e-12);
        }
        assert!((ds.values.column(0) - d1.values.column(0)).norm() < 1e-12);
    }

    #[test]
    fn onset_shift_by_whole_scans_shifts_rows() {
        let trials = table(vec![face(4.0, "a")]);
        let shifted = table(vec![face(8.0, "a")]);
        let latents = latents_of(&[("a", &[1.0])]);
        let d0 = build_design(&trials, &latents, 40, 2.0, true).unwrap();
        let d2 = build_design(&shifted, &latents, 40, 2.0, true).unwrap();
        for i in 0..38 {
            assert_relative_eq!(
                d2.values[(i + 2, 1)],
                d0.values[(i, 1)],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn missing_latent_code_is_reported_with_id() {
        let trials = table(vec![face(2.0, "mystery")]);
        let latents = latents_of(&[("a", &[1.0])]);
        let err = build_design(&trials, &latents, 20, 2.0, true).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn trial_beyond_window_rejected() {
        let trials = table(vec![face(100.0, "a")]);
        let latents = latents_of(&[("a", &[1.0])]);
        assert!(build_design(&trials, &latents, 10, 2.0, true).is_err());
    }

    #[test]
    fn one_back_excluded_from_parametric_but_gets_boxcar() {
        let trials = table(vec![
            face(2.0, "a"),
            Trial {
                onset_s: 5.0,
                duration_s: 1.0,
                condition: Condition::OneBack,
                stim_id: Some("a".into()),
            },
        ]);
        let only_first = table(vec![face(2.0, "a")]);
        let latents = latents_of(&[("a", &[3.0])]);
        let with = build_design(&trials, &latents, 30, 2.0, true).unwrap();
        let without = build_design(&only_first, &latents, 30, 2.0, true).unwrap();
        // parametric column identical with or without the repeat
        assert!((with.values.column(1) - without.values.column(1)).norm() < 1e-12);
        let ob = with.regressor_index("oneback").unwrap();
        assert!(with.values.column(ob).iter().any(|&v| v > 0.1));
        // but the repeat still shows the face: bias columns differ
        assert!((with.values.column(0) - without.values.column(0)).norm() > 0.1);
    }

    #[test]
    fn test_faces_get_sorted_categorical_columns() {
        let trials = table(vec![
            Trial {
                onset_s: 2.0,
                duration_s: 1.0,
                condition: Condition::TestFace,
                stim_id: Some("zeta".into()),
            },
            face(6.0, "a"),
            Trial {
                onset_s: 10.0,
                duration_s: 1.0,
                condition: Condition::TestFace,
                stim_id: Some("alpha".into()),
            },
        ]);
        let latents = latents_of(&[("a", &[1.0])]);
        let design = build_design(&trials, &latents, 30, 2.0, true).unwrap();
        assert_eq!(
            design.regressor_names,
            vec!["bias", "latent_0000", "test:alpha", "test:zeta"]
        );
        // test faces never consume latent codes
        assert!(design.regressor_index("test:zeta").is_some());
    }

    #[test]
    fn motion_regressors_appended() {
        let trials = table(vec![face(2.0, "a")]);
        let latents = latents_of(&[("a", &[1.0])]);
        let motion = Matrix::from_fn(20, 2, |i, j| (i + j) as f64);
        let design = build_design_with(
            &trials,
            &latents,
            20,
            2.0,
            &DesignOptions {
                include_parametric: true,
                microtime_bins: 16,
                motion: Some(motion.clone()),
            },
        )
        .unwrap();
        assert_eq!(design.regressor_names.last().unwrap(), "motion_1");
        assert_eq!(
            design.values.column(design.n_regressors() - 2).clone_owned(),
            Vector::from_fn(20, |i, _| motion[(i, 0)])
        );
    }

    #[test]
    fn rank_check_identifies_duplicates() {
        let identity = DesignMatrix {
            values: Matrix::identity(8, 4),
            regressor_names: (0..4).map(|i| format!("r{i}")).collect(),
            tr_s: 2.0,
        };
        let report = check_full_rank(&identity, 1e-10).unwrap();
        assert!(report.full_rank);

        let mut dup = Matrix::identity(8, 4);
        dup.set_column(3, &dup.column(2).clone_owned());
        let design = DesignMatrix {
            values: dup,
            regressor_names: (0..4).map(|i| format!("r{i}")).collect(),
            tr_s: 2.0,
        };
        let report = check_full_rank(&design, 1e-10).unwrap();
        assert!(!report.full_rank);
        assert_eq!(report.rank, 3);
    }

    #[test]
    fn random_tall_design_is_full_rank() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::seeded_stream(5, 2);
        let design = DesignMatrix {
            values: Matrix::from_fn(2000, 100, |_, _| StandardNormal.sample(&mut rng)),
            regressor_names: (0..100).map(|i| format!("r{i}")).collect(),
            tr_s: 2.0,
        };
        assert!(check_full_rank(&design, 1e-10).unwrap().full_rank);
    }
}
