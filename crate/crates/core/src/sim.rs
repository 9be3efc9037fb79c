//! Synthetic-subject generator: samples latent codes and a ground-truth
//! weight matrix, lays out a paper-style run structure (training faces
//! with every test face repeated once per run, interleaved fixation),
//! builds the HRF-convolved design and emits noisy BOLD.
//!
//! Because the generative model is exactly the linear mapping the decoder
//! assumes, the simulator provides ground truth that real data cannot:
//! at zero noise the fitted weights equal the planted ones and decoding
//! is exact.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::decoder::{decode_latents, fit_weights, BoldPatterns, EncodingModel};
use crate::design::{build_design, Condition, DesignMatrix, Hrf, Trial, TrialTable, TEST_PREFIX};
use crate::error::{Error, Result};
use crate::eval::recognition_ranks;
use crate::latent::LatentTable;
use crate::rng::seeded_stream;
use crate::voxels::{segment_regions, Region, SegmentAxis, VoxelSet};
use crate::{Matrix, Vector};

/// Ground-truth gender of a simulated face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "male" => Gender::Male,
            "female" => Gender::Female,
            other => return Err(Error::invalid(format!("unknown gender '{other}'"))),
        })
    }
}

/// All knobs of one synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_train_stimuli: usize,
    pub n_test_stimuli: usize,
    pub n_latent_dims: usize,
    pub n_voxels: usize,
    pub tr_s: f64,
    pub stim_duration_s: f64,
    pub isi_s: f64,
    pub noise_sigma: f64,
    /// Number of runs; every test face appears once per run.
    pub test_repeats: usize,
    /// Latent-space distance between the gender class means.
    pub gender_separation: f64,
    /// Scales the planted weights; 0 produces signal-free BOLD.
    pub signal_scale: f64,
    /// Signal gain per region (occipital, temporal, frontoparietal).
    pub region_gains: [f64; 3],
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_train_stimuli: 400,
            n_test_stimuli: 20,
            n_latent_dims: 32,
            n_voxels: 600,
            tr_s: 2.0,
            stim_duration_s: 1.0,
            isi_s: 2.0,
            noise_sigma: 1.0,
            test_repeats: 8,
            gender_separation: 2.0,
            signal_scale: 1.0,
            region_gains: [1.0, 1.0, 1.0],
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train_stimuli == 0 || self.n_test_stimuli < 2 {
            return Err(Error::invalid(
                "need at least 1 training and 2 test stimuli",
            ));
        }
        if self.n_latent_dims == 0 {
            return Err(Error::invalid("n_latent_dims must be positive"));
        }
        if self.n_voxels < (self.n_latent_dims + 1).max(3) {
            return Err(Error::invalid(format!(
                "n_voxels {} below n_latent_dims + 1 = {}; decoding would be underdetermined",
                self.n_voxels,
                self.n_latent_dims + 1
            )));
        }
        if !(self.tr_s > 0.0) || !(self.stim_duration_s > 0.0) || !(self.isi_s > 0.0) {
            return Err(Error::invalid("tr, stimulus duration and isi must be positive"));
        }
        if self.noise_sigma < 0.0 || self.signal_scale < 0.0 || self.gender_separation < 0.0 {
            return Err(Error::invalid(
                "noise_sigma, signal_scale and gender_separation must be nonnegative",
            ));
        }
        if self.test_repeats == 0 {
            return Err(Error::invalid("test_repeats must be positive"));
        }
        if self.region_gains.iter().any(|&g| g < 0.0) {
            return Err(Error::invalid("region gains must be nonnegative"));
        }
        Ok(())
    }
}

/// Everything the simulator knows that a real experiment would not.
#[derive(Debug, Clone)]
pub struct SimGroundTruth {
    /// Planted weights, rows = bias then latent dimensions.
    pub w_star: Matrix,
    pub train_latents: LatentTable,
    pub test_latents: LatentTable,
    pub train_genders: Vec<Gender>,
    pub test_genders: Vec<Gender>,
    /// Unit axis separating the gender class means.
    pub gender_axis: Vector,
    pub voxel_ids: Vec<String>,
    pub voxel_coords: Vec<[f64; 3]>,
    pub voxel_regions: Vec<Region>,
    /// Start time of each run on the concatenated timeline.
    pub run_starts: Vec<f64>,
    /// HRF peak latency used for peak-aligned pattern extraction.
    pub hrf_peak_s: f64,
}

/// One simulated subject.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trials: TrialTable,
    pub bold: BoldPatterns,
    pub truth: SimGroundTruth,
}

/// How test-face activity patterns are extracted before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternSource {
    /// Average the scans nearest each repetition's HRF peak.
    #[default]
    Peak,
    /// Per-test-face GLM betas from the fitted model.
    Beta,
}

/// Draw gendered latent codes: standard normal plus `+-separation/2`
/// along the axis, genders alternating so labels stay balanced within 1.
fn sample_gendered(
    prefix: &str,
    n: usize,
    separation: f64,
    axis: &Vector,
    rng: &mut impl Rng,
) -> Result<(LatentTable, Vec<Gender>)> {
    let dims = axis.len();
    let mut codes = Matrix::zeros(n, dims);
    let mut genders = Vec::with_capacity(n);
    for i in 0..n {
        let gender = if i % 2 == 0 { Gender::Male } else { Gender::Female };
        let offset = match gender {
            Gender::Male => separation / 2.0,
            Gender::Female => -separation / 2.0,
        };
        for j in 0..dims {
            let z: f64 = StandardNormal.sample(rng);
            codes[(i, j)] = z + offset * axis[j];
        }
        genders.push(gender);
    }
    let ids = (0..n).map(|i| format!("{prefix}{i:04}")).collect();
    Ok((LatentTable::new(ids, codes)?, genders))
}

/// Standalone gendered-code sampler for calibration studies.
pub fn sample_gendered_latents(
    n: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<(LatentTable, Vec<Gender>, Vector)> {
    if n == 0 || dims == 0 {
        return Err(Error::invalid("need positive sample count and dimension"));
    }
    let axis = random_unit_axis(dims, &mut seeded_stream(seed, 0));
    let (table, genders) =
        sample_gendered("code_", n, separation, &axis, &mut seeded_stream(seed, 1))?;
    Ok((table, genders, axis))
}

fn random_unit_axis(dims: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let v = Vector::from_fn(dims, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Cubic-ish voxel lattice in millimeters, posterior-to-anterior along y.
fn voxel_grid(n: usize) -> (Vec<String>, Vec<[f64; 3]>) {
    let side = (n as f64).cbrt().ceil() as usize;
    let mut ids = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    'outer: for y in 0..side {
        for z in 0..side {
            for x in 0..side {
                if ids.len() == n {
                    break 'outer;
                }
                ids.push(format!("v{:05}", ids.len()));
                coords.push([x as f64 * 3.0, y as f64 * 3.0, z as f64 * 3.0]);
            }
        }
    }
    (ids, coords)
}

/// Generate one synthetic subject.
pub fn simulate_subject(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let dims = config.n_latent_dims;

    let axis = random_unit_axis(dims, &mut seeded_stream(config.seed, 0));
    let (train_latents, train_genders) = sample_gendered(
        "train_",
        config.n_train_stimuli,
        config.gender_separation,
        &axis,
        &mut seeded_stream(config.seed, 1),
    )?;
    let (test_latents, test_genders) = sample_gendered(
        "test_",
        config.n_test_stimuli,
        config.gender_separation,
        &axis,
        &mut seeded_stream(config.seed, 2),
    )?;

    // run layout: train chunks spread across runs, every test face once
    // per run, fixation trials interleaved
    let runs = config.test_repeats;
    let base = config.n_train_stimuli / runs;
    let extra = config.n_train_stimuli % runs;
    let trial_period = config.stim_duration_s + config.isi_s;
    let mut order_rng = seeded_stream(config.seed, 4);
    let mut trials = Vec::new();
    let mut run_starts = Vec::with_capacity(runs);
    let mut next_train = 0usize;
    let mut clock = 0.0f64;
    for run in 0..runs {
        run_starts.push(clock);
        let chunk = base + usize::from(run < extra);
        #[derive(Clone)]
        enum Event {
            Train(usize),
            Test(usize),
            Fixation,
        }
        let mut events: Vec<Event> = Vec::new();
        events.extend((next_train..next_train + chunk).map(Event::Train));
        next_train += chunk;
        events.extend((0..config.n_test_stimuli).map(Event::Test));
        let n_faces = chunk + config.n_test_stimuli;
        events.extend(std::iter::repeat_n(Event::Fixation, (n_faces / 4).max(1)));
        events.shuffle(&mut order_rng);

        let mut t = clock + 6.0;
        for event in events {
            let (condition, stim_id) = match event {
                Event::Train(i) => (
                    Condition::TrainFace,
                    Some(train_latents.stim_ids()[i].clone()),
                ),
                Event::Test(i) => (
                    Condition::TestFace,
                    Some(test_latents.stim_ids()[i].clone()),
                ),
                Event::Fixation => (Condition::Fixation, None),
            };
            trials.push(Trial {
                onset_s: t,
                duration_s: config.stim_duration_s,
                condition,
                stim_id,
            });
            t += trial_period;
        }
        clock = t + 6.0;
    }
    let trials = TrialTable::new(trials)?;

    // voxels on a grid, segmented so region-dependent gains can apply
    let (voxel_ids, voxel_coords) = voxel_grid(config.n_voxels);
    let plain = VoxelSet {
        voxel_ids: voxel_ids.clone(),
        coords_mm: voxel_coords.clone(),
        t_face: vec![0.0; config.n_voxels],
        var_gain_pct: vec![0.0; config.n_voxels],
        region: vec![Region::Unassigned; config.n_voxels],
    };
    let segmented = segment_regions(&plain, SegmentAxis::Z)?;

    // planted weights, scaled per region
    let mut w_rng = seeded_stream(config.seed, 3);
    let scale = config.signal_scale / ((dims + 1) as f64).sqrt();
    let mut w_star = Matrix::zeros(dims + 1, config.n_voxels);
    for v in 0..config.n_voxels {
        let gain = match segmented.region[v] {
            Region::Occipital => config.region_gains[0],
            Region::Temporal => config.region_gains[1],
            Region::Frontoparietal => config.region_gains[2],
            Region::Unassigned => 1.0,
        };
        for r in 0..=dims {
            let z: f64 = StandardNormal.sample(&mut w_rng);
            w_star[(r, v)] = z * scale * gain;
        }
    }

    // generative design: every face trial drives the latent mapping, so
    // test trials are relabeled and receive their true codes
    let relabeled = TrialTable::new(
        trials
            .trials()
            .iter()
            .map(|t| {
                let mut t = t.clone();
                if t.condition == Condition::TestFace {
                    t.condition = Condition::TrainFace;
                }
                t
            })
            .collect(),
    )?;
    let all_latents = train_latents.concat(&test_latents)?;
    let hrf = Hrf::canonical(0.01)?;
    let n_scans = ((trials.end_s() + hrf.kernel_length_s) / config.tr_s).ceil() as usize;
    let gen_design = build_design(&relabeled, &all_latents, n_scans, config.tr_s, true)?;

    let mut bold_values = &gen_design.values * &w_star;
    if config.noise_sigma > 0.0 {
        let mut noise_rng = seeded_stream(config.seed, 5);
        for v in bold_values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            *v += config.noise_sigma * z;
        }
    }
    let scan_ids = (0..n_scans).map(|i| format!("scan_{i:06}")).collect();
    let bold = BoldPatterns::new(bold_values, voxel_ids.clone(), scan_ids)?;

    Ok(SimOutput {
        trials,
        bold,
        truth: SimGroundTruth {
            w_star,
            train_latents,
            test_latents,
            train_genders,
            test_genders,
            gender_axis: axis,
            voxel_ids,
            voxel_coords,
            voxel_regions: segmented.region,
            run_starts,
            hrf_peak_s: hrf.peak_time_s(),
        },
    })
}

/// Average the scans nearest each test repetition's HRF peak, one row per
/// test face.
pub fn peak_average_patterns(
    bold: &BoldPatterns,
    trials: &TrialTable,
    tr_s: f64,
    hrf_peak_s: f64,
) -> Result<BoldPatterns> {
    let mut rows: Vec<usize> = Vec::new();
    let mut groups = std::collections::HashMap::new();
    for (k, t) in trials
        .trials()
        .iter()
        .filter(|t| t.condition == Condition::TestFace)
        .enumerate()
    {
        let scan = ((t.onset_s + hrf_peak_s) / tr_s).round() as usize;
        if scan >= bold.n_observations() {
            return Err(Error::invalid(format!(
                "peak scan {scan} of trial at {} s beyond the recording",
                t.onset_s
            )));
        }
        rows.push(scan);
        groups.insert(
            format!("rep_{k:05}"),
            t.stim_id.clone().expect("test trial has id"),
        );
    }
    if rows.is_empty() {
        return Err(Error::EmptyGroup("no test-face trials".into()));
    }
    let values = Matrix::from_fn(rows.len(), bold.n_voxels(), |i, j| {
        bold.values()[(rows[i], j)]
    });
    let per_rep = BoldPatterns::new(
        values,
        bold.voxel_ids().to_vec(),
        (0..rows.len()).map(|k| format!("rep_{k:05}")).collect(),
    )?;
    crate::decoder::average_patterns(&per_rep, &groups)
}

/// Decoded outcome of one fit/decode pass.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    /// Full fitted model over every design regressor.
    pub full_model: EncodingModel,
    /// Bias + latent rows used for decoding.
    pub model: EncodingModel,
    /// Test-face patterns handed to the decoder.
    pub patterns: BoldPatterns,
    pub decoded: LatentTable,
    pub decoded_bias: Vec<f64>,
    pub design: DesignMatrix,
}

/// Build the design, fit the encoding model, extract test patterns and
/// decode them.
pub fn fit_and_decode(
    trials: &TrialTable,
    train_latents: &LatentTable,
    bold: &BoldPatterns,
    tr_s: f64,
    ridge: f64,
    source: PatternSource,
) -> Result<PipelineOutcome> {
    let design = build_design(trials, train_latents, bold.n_observations(), tr_s, true)?;
    let full_model = fit_weights(&design, bold, ridge)?;
    let model = full_model.latent_submodel()?;
    let patterns = match source {
        PatternSource::Beta => full_model.rows_as_patterns(TEST_PREFIX)?,
        PatternSource::Peak => {
            let hrf = Hrf::canonical(0.01)?;
            peak_average_patterns(bold, trials, tr_s, hrf.peak_time_s())?
        }
    };
    let decoded = decode_latents(&model, &patterns)?;
    Ok(PipelineOutcome {
        full_model,
        model,
        patterns,
        decoded: decoded.latents,
        decoded_bias: decoded.bias,
        design,
    })
}

/// One row of the training-set-size study.
#[derive(Debug, Clone)]
pub struct StudySizeRow {
    pub fraction: f64,
    pub runs_used: usize,
    pub n_train_trials: usize,
    pub pairwise_accuracy: f64,
    pub full_accuracy: f64,
}

/// Refit on leading subsets of the runs and decode the test faces seen so
/// far, mirroring a sessions-subset reanalysis. Fractions select whole
/// runs; the full set reproduces the plain fit exactly.
pub fn run_training_size_study(
    config: &SimConfig,
    fractions: &[f64],
    source: PatternSource,
) -> Result<Vec<StudySizeRow>> {
    if fractions.is_empty() {
        return Err(Error::invalid("no fractions supplied"));
    }
    for w in fractions.windows(2) {
        if w[0] > w[1] {
            return Err(Error::invalid("fractions must be ascending"));
        }
    }
    if fractions.iter().any(|&f| !(0.0 < f && f <= 1.0)) {
        return Err(Error::invalid("fractions must lie in (0, 1]"));
    }
    let sim = simulate_subject(config)?;
    let runs = config.test_repeats;
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let runs_used = ((fraction * runs as f64).round() as usize).clamp(1, runs);
        let (trials, bold) = if runs_used == runs {
            (sim.trials.clone(), sim.bold.clone())
        } else {
            let cutoff = sim.truth.run_starts[runs_used];
            let n_scans = (cutoff / config.tr_s).ceil() as usize;
            (
                sim.trials.truncate_before(cutoff),
                truncate_observations(&sim.bold, n_scans)?,
            )
        };
        let n_train_trials = trials
            .trials()
            .iter()
            .filter(|t| t.condition == Condition::TrainFace)
            .count();
        let outcome = fit_and_decode(
            &trials,
            &sim.truth.train_latents,
            &bold,
            config.tr_s,
            0.0,
            source,
        )?;
        let (_, pairwise, full) = recognition_ranks(&outcome.decoded, &sim.truth.test_latents)?;
        rows.push(StudySizeRow {
            fraction,
            runs_used,
            n_train_trials,
            pairwise_accuracy: pairwise,
            full_accuracy: full,
        });
    }
    Ok(rows)
}

fn truncate_observations(bold: &BoldPatterns, n: usize) -> Result<BoldPatterns> {
    let values = bold.values().rows(0, n.min(bold.n_observations())).into_owned();
    BoldPatterns::new(
        values,
        bold.voxel_ids().to_vec(),
        bold.observation_ids()[..n.min(bold.n_observations())].to_vec(),
    )
}

/// One row of the noise sweep.
#[derive(Debug, Clone)]
pub struct SnrRow {
    pub noise_sigma: f64,
    pub pairwise_accuracy: f64,
    pub full_accuracy: f64,
    pub gender_accuracy: f64,
}

/// Run the full pipeline at each noise level, averaging accuracies over
/// replicate seeds `seed .. seed + n_replicates`.
pub fn run_snr_sweep(
    config: &SimConfig,
    sigmas: &[f64],
    n_replicates: usize,
    source: PatternSource,
) -> Result<Vec<SnrRow>> {
    if sigmas.is_empty() || n_replicates == 0 {
        return Err(Error::invalid("need at least one sigma and one replicate"));
    }
    for w in sigmas.windows(2) {
        if w[0] > w[1] {
            return Err(Error::invalid("sigmas must be ascending"));
        }
    }
    if sigmas.iter().any(|&s| s < 0.0) {
        return Err(Error::invalid("sigmas must be nonnegative"));
    }
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut pairwise = 0.0;
        let mut full = 0.0;
        let mut gender = 0.0;
        for rep in 0..n_replicates {
            let cfg = SimConfig {
                noise_sigma: sigma,
                seed: config.seed.wrapping_add(rep as u64),
                ..config.clone()
            };
            let sim = simulate_subject(&cfg)?;
            let outcome = fit_and_decode(
                &sim.trials,
                &sim.truth.train_latents,
                &sim.bold,
                cfg.tr_s,
                0.0,
                source,
            )?;
            let (_, p, f) = recognition_ranks(&outcome.decoded, &sim.truth.test_latents)?;
            pairwise += p;
            full += f;
            gender += gender_accuracy_of(&sim, &outcome.decoded)?;
        }
        let n = n_replicates as f64;
        rows.push(SnrRow {
            noise_sigma: sigma,
            pairwise_accuracy: pairwise / n,
            full_accuracy: full / n,
            gender_accuracy: gender / n,
        });
    }
    Ok(rows)
}

/// Gender accuracy of decoded test codes, with the gender axis estimated
/// from the true training codes (the labeled corpus of the protocol).
pub fn gender_accuracy_of(sim: &SimOutput, decoded: &LatentTable) -> Result<f64> {
    let attr = training_gender_attribute(sim)?;
    let labels = crate::eval::classify_attribute(decoded, &attr)?;
    let truth: Vec<bool> = decoded
        .stim_ids()
        .iter()
        .map(|id| {
            sim.truth
                .test_latents
                .row_index(id)
                .map(|i| sim.truth.test_genders[i] == Gender::Male)
                .ok_or_else(|| Error::MissingId {
                    context: "test gender".into(),
                    id: id.clone(),
                })
        })
        .collect::<Result<_>>()?;
    crate::eval::classification_accuracy(&labels, &truth)
}

/// Male-minus-female mean of the true training codes.
pub fn training_gender_attribute(sim: &SimOutput) -> Result<crate::latent::AttributeVector> {
    let train = &sim.truth.train_latents;
    let split = |want: Gender| -> Result<LatentTable> {
        let ids: Vec<String> = train
            .stim_ids()
            .iter()
            .zip(&sim.truth.train_genders)
            .filter(|(_, &g)| g == want)
            .map(|(id, _)| id.clone())
            .collect();
        train.select(&ids)
    };
    crate::latent::attribute_vector(&split(Gender::Male)?, &split(Gender::Female)?, "male")
}
