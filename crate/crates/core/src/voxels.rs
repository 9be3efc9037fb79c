//! Voxel scoring, the two-criterion selection boundary, and the
//! equal-thirds anatomical segmentation.

use serde::{Deserialize, Serialize};

use crate::decoder::GlmFitStats;
use crate::error::{Error, Result};

/// Anatomical region labels of the 3-way segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Occipital,
    Temporal,
    Frontoparietal,
    Unassigned,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Occipital => "occipital",
            Region::Temporal => "temporal",
            Region::Frontoparietal => "frontoparietal",
            Region::Unassigned => "unassigned",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "occipital" => Region::Occipital,
            "temporal" => Region::Temporal,
            "frontoparietal" => Region::Frontoparietal,
            "unassigned" => Region::Unassigned,
            other => return Err(Error::invalid(format!("unknown region '{other}'"))),
        })
    }
}

/// Second axis of the segmentation after the posterior third is removed.
///
/// The default splits the remainder at the median z (inferior half is
/// temporal); the alternative splits at the median y (anterior half is
/// temporal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentAxis {
    #[default]
    Z,
    Y,
}

/// Voxels with coordinates, selection scores and region labels.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet {
    pub voxel_ids: Vec<String>,
    /// Millimeter coordinates: x left-right, y posterior-anterior,
    /// z inferior-superior.
    pub coords_mm: Vec<[f64; 3]>,
    /// Face-versus-fixation t statistic per voxel.
    pub t_face: Vec<f64>,
    /// Adjusted-variance improvement of the latent GLM, in percent.
    pub var_gain_pct: Vec<f64>,
    pub region: Vec<Region>,
}

impl VoxelSet {
    pub fn len(&self) -> usize {
        self.voxel_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxel_ids.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.voxel_ids.len();
        for (name, len) in [
            ("coords", self.coords_mm.len()),
            ("t_face", self.t_face.len()),
            ("var_gain_pct", self.var_gain_pct.len()),
            ("region", self.region.len()),
        ] {
            if len != n {
                return Err(Error::CountMismatch {
                    context: format!("voxel set {name}"),
                    left: len,
                    right: n,
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &self.voxel_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        if self.coords_mm.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("voxel coordinates".into()));
        }
        Ok(())
    }
}

/// Adjusted coefficient of determination
/// `1 - (1 - R^2) (n - 1) / (n - p - 1)`.
pub fn adjusted_r2(r2: f64, n_obs: usize, n_predictors: usize) -> Result<f64> {
    if n_obs <= n_predictors + 1 {
        return Err(Error::invalid(format!(
            "no degrees of freedom: {n_obs} observations, {n_predictors} predictors"
        )));
    }
    Ok(1.0 - (1.0 - r2) * (n_obs as f64 - 1.0) / ((n_obs - n_predictors - 1) as f64))
}

/// Score voxels from two GLM fits: the variance gain is the adjusted-R^2
/// difference between the full (latent-parametric) and baseline
/// (bias-only) models, in percentage points; the face t statistic is
/// copied from the supplied contrast.
pub fn score_voxels(
    voxel_ids: Vec<String>,
    coords_mm: Vec<[f64; 3]>,
    baseline_fit: &GlmFitStats,
    latent_fit: &GlmFitStats,
    face_contrast: &[f64],
) -> Result<VoxelSet> {
    let n = voxel_ids.len();
    if baseline_fit.r2.len() != n || latent_fit.r2.len() != n || face_contrast.len() != n {
        return Err(Error::CountMismatch {
            context: "voxel scores".into(),
            left: baseline_fit.r2.len().min(latent_fit.r2.len()),
            right: n,
        });
    }
    let mut var_gain = Vec::with_capacity(n);
    for v in 0..n {
        let adj_base = adjusted_r2(
            baseline_fit.r2[v],
            baseline_fit.n_obs,
            baseline_fit.n_predictors(),
        )?;
        let adj_full = adjusted_r2(
            latent_fit.r2[v],
            latent_fit.n_obs,
            latent_fit.n_predictors(),
        )?;
        var_gain.push(100.0 * (adj_full - adj_base));
    }
    let set = VoxelSet {
        voxel_ids,
        coords_mm,
        t_face: face_contrast.to_vec(),
        var_gain_pct: var_gain,
        region: vec![Region::Unassigned; n],
    };
    set.validate()?;
    Ok(set)
}

/// Whether a voxel passes the linear two-criterion boundary:
/// `max(t, 0)/t_threshold + max(gain, 0)/gain_threshold >= 1`, so each
/// criterion alone is sufficient exactly at its threshold.
pub fn passes_selection(
    t_face: f64,
    var_gain_pct: f64,
    t_threshold: f64,
    gain_threshold_pct: f64,
) -> bool {
    t_face.max(0.0) / t_threshold + var_gain_pct.max(0.0) / gain_threshold_pct >= 1.0
}

/// Select the voxels on or above the boundary.
pub fn select_voxels(
    set: &VoxelSet,
    t_threshold: f64,
    gain_threshold_pct: f64,
) -> Result<VoxelSet> {
    if t_threshold <= 0.0 || gain_threshold_pct <= 0.0 {
        return Err(Error::invalid("selection thresholds must be positive"));
    }
    set.validate()?;
    let keep: Vec<usize> = (0..set.len())
        .filter(|&v| {
            passes_selection(
                set.t_face[v],
                set.var_gain_pct[v],
                t_threshold,
                gain_threshold_pct,
            )
        })
        .collect();
    Ok(VoxelSet {
        voxel_ids: keep.iter().map(|&v| set.voxel_ids[v].clone()).collect(),
        coords_mm: keep.iter().map(|&v| set.coords_mm[v]).collect(),
        t_face: keep.iter().map(|&v| set.t_face[v]).collect(),
        var_gain_pct: keep.iter().map(|&v| set.var_gain_pct[v]).collect(),
        region: keep.iter().map(|&v| set.region[v]).collect(),
    })
}

/// Partition voxels into three equal-sized regions: the posterior third
/// (lowest y) is occipital; the remainder splits at the median of the
/// chosen axis into temporal and frontoparietal. Ties break by voxel id
/// so the partition is deterministic.
pub fn segment_regions(set: &VoxelSet, axis: SegmentAxis) -> Result<VoxelSet> {
    set.validate()?;
    let n = set.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "segmentation requires at least 3 voxels, got {n}"
        )));
    }
    let by_key = |key: &dyn Fn(usize) -> f64, indices: &mut [usize]| {
        indices.sort_by(|&a, &b| {
            key(a)
                .partial_cmp(&key(b))
                .unwrap()
                .then_with(|| set.voxel_ids[a].cmp(&set.voxel_ids[b]))
        });
    };

    let mut order: Vec<usize> = (0..n).collect();
    by_key(&|i| set.coords_mm[i][1], &mut order); // posterior first
    let n_occ = n / 3;
    let occipital = &order[..n_occ];
    let mut remainder: Vec<usize> = order[n_occ..].to_vec();
    let n_rem = remainder.len();
    let n_temp = n_rem.div_ceil(2);
    match axis {
        // inferior half is temporal
        SegmentAxis::Z => by_key(&|i| set.coords_mm[i][2], &mut remainder),
        // anterior (rostral) half is temporal: sort y descending via negation
        SegmentAxis::Y => by_key(&|i| -set.coords_mm[i][1], &mut remainder),
    }

    let mut region = vec![Region::Unassigned; n];
    for &i in occipital {
        region[i] = Region::Occipital;
    }
    for (k, &i) in remainder.iter().enumerate() {
        region[i] = if k < n_temp {
            Region::Temporal
        } else {
            Region::Frontoparietal
        };
    }
    Ok(VoxelSet {
        region,
        ..set.clone()
    })
}
