//! Command-line surface of the decoding pipeline.
//!
//! Exit codes: 0 success, 1 data/validation error (single `error:` line
//! on stderr), 2 usage error.

mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "latdec",
    about = "Linear latent-space brain decoding pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML sections: design, fit, select, stats, sim).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configuration's random seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic subject: trials, BOLD, ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a PCA codec on a pixel matrix.
    PcaFit {
        #[command(flatten)]
        common: Common,
        /// Pixel matrix (n_samples x n_pixels).
        #[arg(long)]
        data: PathBuf,
        /// Number of principal components to retain.
        #[arg(long)]
        components: usize,
    },
    /// Encode images to latent codes (or reconstruct with --codes).
    Encode {
        #[command(flatten)]
        common: Common,
        /// Directory holding pca_mean/pca_components/pca_explained_variance.
        #[arg(long)]
        codec: PathBuf,
        /// Pixel matrix to encode.
        #[arg(long, conflicts_with = "codes")]
        images: Option<PathBuf>,
        /// Latent table to reconstruct into pixels instead.
        #[arg(long)]
        codes: Option<PathBuf>,
        /// Id sidecar for --images (defaults to <images>.ids.tsv).
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Fit the encoding model from trials, latent codes and BOLD.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: PathBuf,
        /// Training latent table (id sidecar <latents>.ids.tsv).
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        bold: PathBuf,
        /// Voxel coordinate table naming the BOLD columns.
        #[arg(long)]
        voxels: PathBuf,
        /// Test-pattern extraction: HRF peak averages or GLM betas.
        #[arg(long, value_enum, default_value = "peak")]
        patterns: cmd::PatternArg,
    },
    /// Decode latent codes from activity patterns with a fitted model.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Model weights (sidecars <model>.names.tsv, <model>.voxels.tsv).
        #[arg(long)]
        model: PathBuf,
        /// Patterns matrix, one row per item (id sidecar alongside).
        #[arg(long)]
        patterns: PathBuf,
    },
    /// Score voxels with baseline and latent GLMs, apply the boundary.
    SelectVoxels {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        bold: PathBuf,
        #[arg(long)]
        voxels: PathBuf,
    },
    /// Partition voxels into occipital / temporal / frontoparietal thirds.
    Segment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        voxels: PathBuf,
        /// Optional id list restricting the segmentation.
        #[arg(long)]
        selected: Option<PathBuf>,
    },
    /// Recognition report of decoded codes against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Gender classification of codes along a labeled attribute axis.
    Gender {
        #[command(flatten)]
        common: Common,
        /// Codes to classify (id sidecar alongside).
        #[arg(long)]
        codes: PathBuf,
        /// True genders of the classified codes.
        #[arg(long)]
        labels: PathBuf,
        /// Labeled corpus the gender axis is estimated from.
        #[arg(long)]
        attr_codes: PathBuf,
        #[arg(long)]
        attr_labels: PathBuf,
    },
    /// Variance partitioning of truth over three region predictions.
    Varpart {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        occ: PathBuf,
        #[arg(long)]
        temp: PathBuf,
        #[arg(long)]
        fp: PathBuf,
    },
    /// Structural similarity between two image matrices.
    Ssim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        image_a: PathBuf,
        #[arg(long)]
        image_b: PathBuf,
        /// Dynamic range of the pixel values.
        #[arg(long, default_value_t = 1.0)]
        pixel_range: f64,
    },
    /// Training-set-size study on simulated subjects.
    StudySize {
        #[command(flatten)]
        common: Common,
        /// Training fractions, ascending in (0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = [0.125, 0.25, 0.5, 1.0])]
        fractions: Vec<f64>,
        /// Replicate seeds to average over.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, value_enum, default_value = "peak")]
        patterns: cmd::PatternArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { common } => cmd::simulate(&common),
        Command::PcaFit {
            common,
            data,
            components,
        } => cmd::pca_fit(&common, &data, components),
        Command::Encode {
            common,
            codec,
            images,
            codes,
            ids,
        } => cmd::encode(
            &common,
            &codec,
            images.as_deref(),
            codes.as_deref(),
            ids.as_deref(),
        ),
        Command::Fit {
            common,
            trials,
            latents,
            bold,
            voxels,
            patterns,
        } => cmd::fit(&common, &trials, &latents, &bold, &voxels, patterns),
        Command::Decode {
            common,
            model,
            patterns,
        } => cmd::decode(&common, &model, &patterns),
        Command::SelectVoxels {
            common,
            trials,
            latents,
            bold,
            voxels,
        } => cmd::select_voxels(&common, &trials, &latents, &bold, &voxels),
        Command::Segment {
            common,
            voxels,
            selected,
        } => cmd::segment(&common, &voxels, selected.as_deref()),
        Command::Evaluate {
            common,
            estimates,
            truth,
        } => cmd::evaluate(&common, &estimates, &truth),
        Command::Gender {
            common,
            codes,
            labels,
            attr_codes,
            attr_labels,
        } => cmd::gender(&common, &codes, &labels, &attr_codes, &attr_labels),
        Command::Varpart {
            common,
            truth,
            occ,
            temp,
            fp,
        } => cmd::varpart(&common, &truth, &occ, &temp, &fp),
        Command::Ssim {
            common,
            image_a,
            image_b,
            pixel_range,
        } => cmd::ssim(&common, &image_a, &image_b, pixel_range),
        Command::StudySize {
            common,
            fractions,
            seeds,
            patterns,
        } => cmd::study_size(&common, &fractions, seeds, patterns),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
