//! Subcommand implementations: thin orchestration over the core library.

use std::path::{Path, PathBuf};

use clap::ValueEnum;

use latdec_core::decoder::{decode_latents, fit_weights, BoldPatterns, EncodingModel};
use latdec_core::design::{build_design_with, check_full_rank, DesignOptions, BIAS_NAME};
use latdec_core::error::{Error, Result};
use latdec_core::eval;
use latdec_core::io::{self, format_sig, Report, RunConfig};
use latdec_core::latent::{self, LatentTable, PcaCodec};
use latdec_core::sim::{self, Gender, PatternSource, SimConfig};
use latdec_core::stats;
use latdec_core::voxels;
use latdec_core::{Matrix, Vector};

use crate::Common;

/// CLI face of [`PatternSource`].
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PatternArg {
    Peak,
    Beta,
}

impl From<PatternArg> for PatternSource {
    fn from(value: PatternArg) -> Self {
        match value {
            PatternArg::Peak => PatternSource::Peak,
            PatternArg::Beta => PatternSource::Beta,
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(match common.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    std::fs::create_dir_all(&common.out)?;
    Ok(common.out.clone())
}

/// `foo.ldmx` keeps its row ids in `foo.ids.tsv`.
fn ids_sidecar(path: &Path) -> PathBuf {
    path.with_extension("ids.tsv")
}

fn load_table(path: &Path) -> Result<LatentTable> {
    io::read_latent_table(path, ids_sidecar(path))
}

fn store_table(path: &Path, table: &LatentTable) -> Result<()> {
    io::write_latent_table(path, ids_sidecar(path), table)
}

pub fn simulate(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let out = out_dir(common)?;
    let sim = sim::simulate_subject(&cfg.sim)?;
    io::write_trials(out.join("trials.tsv"), &sim.trials)?;
    io::write_matrix(out.join("bold.ldmx"), sim.bold.values())?;
    io::write_matrix(out.join("truth_w.ldmx"), &sim.truth.w_star)?;
    store_table(&out.join("latents_train.ldmx"), &sim.truth.train_latents)?;
    store_table(&out.join("latents_test.ldmx"), &sim.truth.test_latents)?;
    io::write_voxel_coords(
        out.join("voxels.tsv"),
        &sim.truth.voxel_ids,
        &sim.truth.voxel_coords,
    )?;
    io::write_genders(
        out.join("genders_train.tsv"),
        sim.truth.train_latents.stim_ids(),
        &sim.truth.train_genders,
    )?;
    io::write_genders(
        out.join("genders_test.tsv"),
        sim.truth.test_latents.stim_ids(),
        &sim.truth.test_genders,
    )?;
    io::write_table(
        out.join("regions.tsv"),
        &["voxel_id", "region"],
        sim.truth
            .voxel_ids
            .iter()
            .zip(&sim.truth.voxel_regions)
            .map(|(id, r)| vec![id.clone(), r.as_str().to_string()]),
    )?;
    Ok(())
}

pub fn pca_fit(common: &Common, data: &Path, components: usize) -> Result<()> {
    let out = out_dir(common)?;
    let pixels = io::read_matrix(data)?;
    let codec = latent::pca_fit(&pixels, components)?;
    io::write_matrix(
        out.join("pca_mean.ldmx"),
        &Matrix::from_fn(1, codec.mean().len(), |_, j| codec.mean()[j]),
    )?;
    io::write_matrix(out.join("pca_components.ldmx"), codec.components())?;
    io::write_matrix(
        out.join("pca_explained_variance.ldmx"),
        &Matrix::from_fn(codec.n_components(), 1, |i, _| codec.explained_variance()[i]),
    )?;
    Ok(())
}

fn load_codec(dir: &Path) -> Result<PcaCodec> {
    let mean = io::read_matrix(dir.join("pca_mean.ldmx"))?;
    let components = io::read_matrix(dir.join("pca_components.ldmx"))?;
    let explained = io::read_matrix(dir.join("pca_explained_variance.ldmx"))?;
    PcaCodec::from_parts(
        Vector::from_fn(mean.ncols(), |j, _| mean[(0, j)]),
        components,
        Vector::from_fn(explained.nrows(), |i, _| explained[(i, 0)]),
    )
}

pub fn encode(
    common: &Common,
    codec_dir: &Path,
    images: Option<&Path>,
    codes: Option<&Path>,
    ids: Option<&Path>,
) -> Result<()> {
    let out = out_dir(common)?;
    let codec = load_codec(codec_dir)?;
    match (images, codes) {
        (Some(images_path), None) => {
            let pixels = io::read_matrix(images_path)?;
            let ids = match ids {
                Some(p) => io::read_ids(p)?,
                None => {
                    let sidecar = ids_sidecar(images_path);
                    if sidecar.exists() {
                        io::read_ids(&sidecar)?
                    } else {
                        (0..pixels.nrows()).map(|i| format!("img_{i:04}")).collect()
                    }
                }
            };
            let table = latent::pca_encode(&codec, &pixels, ids)?;
            store_table(&out.join("latents.ldmx"), &table)?;
        }
        (None, Some(codes_path)) => {
            let table = load_table(codes_path)?;
            let pixels = latent::pca_decode(&codec, &table)?;
            io::write_matrix(out.join("reconstructions.ldmx"), &pixels)?;
            io::write_ids(out.join("reconstructions.ids.tsv"), table.stim_ids())?;
        }
        _ => {
            return Err(Error::InvalidArgument(
                "encode needs exactly one of --images or --codes".into(),
            ))
        }
    }
    Ok(())
}

/// Load BOLD scans with the voxel table naming its columns.
fn load_bold(bold_path: &Path, voxels_path: &Path) -> Result<(BoldPatterns, Vec<[f64; 3]>)> {
    let values = io::read_matrix(bold_path)?;
    let (voxel_ids, coords) = io::read_voxel_coords(voxels_path)?;
    let scan_ids = (0..values.nrows()).map(|i| format!("scan_{i:06}")).collect();
    Ok((BoldPatterns::new(values, voxel_ids, scan_ids)?, coords))
}

fn store_model(out: &Path, name: &str, model: &EncodingModel) -> Result<PathBuf> {
    let path = out.join(format!("{name}.ldmx"));
    io::write_matrix(&path, model.weights())?;
    io::write_ids(
        path.with_extension("names.tsv"),
        model.regressor_names(),
    )?;
    io::write_ids(path.with_extension("voxels.tsv"), model.voxel_ids())?;
    Ok(path)
}

fn load_model(path: &Path) -> Result<EncodingModel> {
    let weights = io::read_matrix(path)?;
    let names = io::read_ids(path.with_extension("names.tsv"))?;
    let voxel_ids = io::read_ids(path.with_extension("voxels.tsv"))?;
    let bias = names
        .iter()
        .position(|n| n == BIAS_NAME)
        .ok_or_else(|| Error::MissingId {
            context: "model bias regressor".into(),
            id: BIAS_NAME.into(),
        })?;
    EncodingModel::from_parts(weights, bias, names, voxel_ids)
}

pub fn fit(
    common: &Common,
    trials_path: &Path,
    latents_path: &Path,
    bold_path: &Path,
    voxels_path: &Path,
    patterns: PatternArg,
) -> Result<()> {
    let cfg = load_config(common)?;
    let out = out_dir(common)?;
    let trials = io::read_trials(trials_path)?;
    let latents = load_table(latents_path)?;
    let (bold, _) = load_bold(bold_path, voxels_path)?;
    let design = build_design_with(
        &trials,
        &latents,
        bold.n_observations(),
        cfg.design.tr_s,
        &DesignOptions {
            include_parametric: true,
            microtime_bins: cfg.design.microtime_bins,
            motion: None,
        },
    )?;
    let rank = check_full_rank(&design, 1e-12)?;
    let mut report = Report::new("design rank");
    report
        .field_int("rank", rank.rank as u64)
        .field_int("n_regressors", rank.n_regressors as u64)
        .field_str("full_rank", if rank.full_rank { "true" } else { "false" })
        .field("s_min", rank.s_min)
        .field("s_max", rank.s_max);
    report.write(out.join("rank_report.tsv"))?;

    let full_model = fit_weights(&design, &bold, cfg.fit.ridge)?;
    let model = full_model.latent_submodel()?;
    store_model(&out, "model", &model)?;

    let source = PatternSource::from(patterns);
    let extracted = match source {
        PatternSource::Beta => full_model.rows_as_patterns(latdec_core::design::TEST_PREFIX),
        PatternSource::Peak => {
            let hrf = latdec_core::design::Hrf::canonical(0.01)?;
            sim::peak_average_patterns(&bold, &trials, cfg.design.tr_s, hrf.peak_time_s())
        }
    };
    match extracted {
        Ok(test_patterns) => {
            let path = out.join("test_patterns.ldmx");
            io::write_matrix(&path, test_patterns.values())?;
            io::write_ids(ids_sidecar(&path), test_patterns.observation_ids())?;
        }
        // a training-only data set simply has no test faces to extract
        Err(Error::MissingId { .. }) | Err(Error::EmptyGroup(_)) => {}
        Err(other) => return Err(other),
    }
    Ok(())
}

pub fn decode(common: &Common, model_path: &Path, patterns_path: &Path) -> Result<()> {
    let out = out_dir(common)?;
    let model = load_model(model_path)?;
    let values = io::read_matrix(patterns_path)?;
    let observation_ids = io::read_ids(ids_sidecar(patterns_path))?;
    // pattern columns must follow the model's voxel order
    let patterns = BoldPatterns::new(values, model.voxel_ids().to_vec(), observation_ids)?;
    let decoded = decode_latents(&model, &patterns)?;
    store_table(&out.join("decoded_latents.ldmx"), &decoded.latents)?;
    io::write_table(
        out.join("decoded_bias.tsv"),
        &["stim_id", "bias"],
        decoded
            .latents
            .stim_ids()
            .iter()
            .zip(&decoded.bias)
            .map(|(id, b)| vec![id.clone(), format_sig(*b)]),
    )?;
    Ok(())
}

pub fn select_voxels(
    common: &Common,
    trials_path: &Path,
    latents_path: &Path,
    bold_path: &Path,
    voxels_path: &Path,
) -> Result<()> {
    let cfg = load_config(common)?;
    let out = out_dir(common)?;
    let trials = io::read_trials(trials_path)?;
    let latents = load_table(latents_path)?;
    let (bold, coords) = load_bold(bold_path, voxels_path)?;
    let opts = |parametric: bool| DesignOptions {
        include_parametric: parametric,
        microtime_bins: cfg.design.microtime_bins,
        motion: None,
    };
    let baseline_design = build_design_with(
        &trials,
        &latents,
        bold.n_observations(),
        cfg.design.tr_s,
        &opts(false),
    )?;
    let full_design = build_design_with(
        &trials,
        &latents,
        bold.n_observations(),
        cfg.design.tr_s,
        &opts(true),
    )?;
    let baseline_model = fit_weights(&baseline_design, &bold, cfg.fit.ridge)?;
    let full_model = fit_weights(&full_design, &bold, cfg.fit.ridge)?;
    let baseline_stats =
        latdec_core::decoder::fit_statistics(&baseline_design, &bold, &baseline_model)?;
    let full_stats = latdec_core::decoder::fit_statistics(&full_design, &bold, &full_model)?;
    let t_face =
        latdec_core::decoder::regressor_t(&baseline_design, &bold, &baseline_model, BIAS_NAME)?;
    let scored = voxels::score_voxels(
        bold.voxel_ids().to_vec(),
        coords,
        &baseline_stats,
        &full_stats,
        &t_face,
    )?;
    let selected = voxels::select_voxels(
        &scored,
        cfg.select.t_threshold,
        cfg.select.gain_threshold_pct,
    )?;
    let chosen: std::collections::HashSet<&str> =
        selected.voxel_ids.iter().map(String::as_str).collect();
    io::write_table(
        out.join("voxel_scores.tsv"),
        &["voxel_id", "t_face", "var_gain_pct", "selected"],
        (0..scored.len()).map(|v| {
            vec![
                scored.voxel_ids[v].clone(),
                format_sig(scored.t_face[v]),
                format_sig(scored.var_gain_pct[v]),
                u8::from(chosen.contains(scored.voxel_ids[v].as_str())).to_string(),
            ]
        }),
    )?;
    io::write_ids(out.join("selected_voxels.tsv"), &selected.voxel_ids)?;
    Ok(())
}

pub fn segment(common: &Common, voxels_path: &Path, selected: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let out = out_dir(common)?;
    let (mut ids, mut coords) = io::read_voxel_coords(voxels_path)?;
    if let Some(list) = selected {
        let keep: std::collections::HashSet<String> =
            io::read_ids(list)?.into_iter().collect();
        let mut kept_ids = Vec::new();
        let mut kept_coords = Vec::new();
        for (id, c) in ids.iter().zip(&coords) {
            if keep.contains(id) {
                kept_ids.push(id.clone());
                kept_coords.push(*c);
            }
        }
        ids = kept_ids;
        coords = kept_coords;
    }
    let n = ids.len();
    let set = voxels::VoxelSet {
        voxel_ids: ids,
        coords_mm: coords,
        t_face: vec![0.0; n],
        var_gain_pct: vec![0.0; n],
        region: vec![voxels::Region::Unassigned; n],
    };
    let segmented = voxels::segment_regions(&set, cfg.select.segment_axis)?;
    io::write_table(
        out.join("regions.tsv"),
        &["voxel_id", "region"],
        segmented
            .voxel_ids
            .iter()
            .zip(&segmented.region)
            .map(|(id, r)| vec![id.clone(), r.as_str().to_string()]),
    )?;
    Ok(())
}

pub fn evaluate(common: &Common, estimates_path: &Path, truth_path: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let out = out_dir(common)?;
    let estimates = load_table(estimates_path)?;
    let truth = load_table(truth_path)?;
    let report = eval::recognition_report(&estimates, &truth, cfg.stats.n_draws, cfg.stats.seed)?;
    let mut file = Report::new("recognition");
    file.field_int("n_items", report.stim_ids.len() as u64)
        .field_int("n_candidates", report.n_candidates as u64)
        .field("pairwise_accuracy", report.pairwise_accuracy)
        .field("full_accuracy", report.full_accuracy)
        .field("p_pairwise", report.p_pairwise.p_value)
        .field("p_pairwise_floor", report.p_pairwise.p_floor.unwrap_or(0.0))
        .field_int("mc_draws", report.p_pairwise.n_draws.unwrap_or(0))
        .field("p_full", report.p_full.p_value)
        .field_int("seed", cfg.stats.seed);
    file.table(&["stim_id", "rank"]);
    for (id, rank) in report.stim_ids.iter().zip(&report.per_item_rank) {
        file.row(&[id.clone(), format_sig(*rank)]);
    }
    file.write(out.join("recognition_report.tsv"))?;
    Ok(())
}

fn gender_truth_for(table: &LatentTable, labels: &[(String, Gender)]) -> Result<Vec<bool>> {
    let lookup: std::collections::HashMap<&str, Gender> = labels
        .iter()
        .map(|(id, g)| (id.as_str(), *g))
        .collect();
    table
        .stim_ids()
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .map(|&g| g == Gender::Male)
                .ok_or_else(|| Error::MissingId {
                    context: "gender label".into(),
                    id: id.clone(),
                })
        })
        .collect()
}

pub fn gender(
    common: &Common,
    codes_path: &Path,
    labels_path: &Path,
    attr_codes_path: &Path,
    attr_labels_path: &Path,
) -> Result<()> {
    let out = out_dir(common)?;
    let codes = load_table(codes_path)?;
    let labels = io::read_genders(labels_path)?;
    let attr_codes = load_table(attr_codes_path)?;
    let attr_labels = io::read_genders(attr_labels_path)?;

    let attr_truth = gender_truth_for(&attr_codes, &attr_labels)?;
    let male_ids: Vec<String> = attr_codes
        .stim_ids()
        .iter()
        .zip(&attr_truth)
        .filter(|(_, &m)| m)
        .map(|(id, _)| id.clone())
        .collect();
    let female_ids: Vec<String> = attr_codes
        .stim_ids()
        .iter()
        .zip(&attr_truth)
        .filter(|(_, &m)| !m)
        .map(|(id, _)| id.clone())
        .collect();
    let attr = latent::attribute_vector(
        &attr_codes.select(&male_ids)?,
        &attr_codes.select(&female_ids)?,
        "male",
    )?;

    let predicted = eval::classify_attribute(&codes, &attr)?;
    let truth = gender_truth_for(&codes, &labels)?;
    let accuracy = eval::classification_accuracy(&predicted, &truth)?;
    let successes = (accuracy * predicted.len() as f64).round() as u64;
    let p = stats::binomial_tail_p(successes, predicted.len() as u64, 0.5)?;

    let mut file = Report::new("gender classification");
    file.field_int("n_items", predicted.len() as u64)
        .field("accuracy", accuracy)
        .field_int("successes", successes)
        .field("p_value", p.p_value)
        .field_int("attr_n_with", attr.n_with as u64)
        .field_int("attr_n_without", attr.n_without as u64);
    file.table(&["stim_id", "predicted", "truth", "correct"]);
    for ((id, label), &is_male) in codes.stim_ids().iter().zip(&predicted).zip(&truth) {
        let predicted_str = match label {
            eval::AttributeLabel::Positive => "male",
            eval::AttributeLabel::Negative => "female",
            eval::AttributeLabel::Tie => "tie",
        };
        let truth_str = if is_male { "male" } else { "female" };
        let correct = u8::from(predicted_str == truth_str);
        file.row(&[
            id.clone(),
            predicted_str.to_string(),
            truth_str.to_string(),
            correct.to_string(),
        ]);
    }
    file.write(out.join("gender_report.tsv"))?;
    Ok(())
}

pub fn varpart(
    common: &Common,
    truth_path: &Path,
    occ_path: &Path,
    temp_path: &Path,
    fp_path: &Path,
) -> Result<()> {
    let out = out_dir(common)?;
    let truth = load_table(truth_path)?;
    let occ = load_table(occ_path)?;
    let temp = load_table(temp_path)?;
    let fp = load_table(fp_path)?;
    let part = eval::variance_partition(&truth, &occ, &temp, &fp)?;
    let mut file = Report::new("variance partition");
    file.field("r2_full", part.r2_full)
        .field("unique_occ", part.unique_occ)
        .field("unique_temp", part.unique_temp)
        .field("unique_fp", part.unique_fp)
        .field("shared_occ_temp", part.shared_occ_temp)
        .field("shared_occ_fp", part.shared_occ_fp)
        .field("shared_temp_fp", part.shared_temp_fp)
        .field("shared_all", part.shared_all)
        .field("cells_sum", part.cells_sum())
        .field_str(
            "flagged_singular",
            if part.flagged_singular { "true" } else { "false" },
        );
    file.write(out.join("varpart_report.tsv"))?;
    Ok(())
}

pub fn ssim(common: &Common, a_path: &Path, b_path: &Path, pixel_range: f64) -> Result<()> {
    let out = out_dir(common)?;
    let a = io::read_matrix(a_path)?;
    let b = io::read_matrix(b_path)?;
    let value = eval::ssim(&a, &b, pixel_range)?;
    let mut file = Report::new("structural similarity");
    file.field("ssim", value).field("pixel_range", pixel_range);
    file.write(out.join("ssim_report.tsv"))?;
    Ok(())
}

pub fn study_size(
    common: &Common,
    fractions: &[f64],
    seeds: u64,
    patterns: PatternArg,
) -> Result<()> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be positive".into()));
    }
    let cfg = load_config(common)?;
    let out = out_dir(common)?;
    let source = PatternSource::from(patterns);
    let mut pairwise = vec![0.0; fractions.len()];
    let mut full = vec![0.0; fractions.len()];
    let mut meta: Vec<(usize, usize)> = Vec::new();
    for rep in 0..seeds {
        let sim_cfg = SimConfig {
            seed: cfg.sim.seed.wrapping_add(rep),
            ..cfg.sim.clone()
        };
        let rows = sim::run_training_size_study(&sim_cfg, fractions, source)?;
        if rep == 0 {
            meta = rows.iter().map(|r| (r.runs_used, r.n_train_trials)).collect();
        }
        for (k, row) in rows.iter().enumerate() {
            pairwise[k] += row.pairwise_accuracy;
            full[k] += row.full_accuracy;
        }
    }
    let mut file = Report::new("training size study");
    file.field_int("n_seeds", seeds);
    file.table(&[
        "fraction",
        "runs_used",
        "n_train_trials",
        "pairwise_accuracy",
        "full_accuracy",
    ]);
    for (k, &fraction) in fractions.iter().enumerate() {
        file.row(&[
            format_sig(fraction),
            meta[k].0.to_string(),
            meta[k].1.to_string(),
            format_sig(pairwise[k] / seeds as f64),
            format_sig(full[k] / seeds as f64),
        ]);
    }
    file.write(out.join("study_size.tsv"))?;
    Ok(())
}
