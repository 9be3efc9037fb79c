//! Voxel-wise linear encoding model: fit the weight matrix from latent
//! regressors to BOLD, and invert it to decode latent codes from new
//! activity patterns.
//!
//! Fitting solves `W = (X^T X + ridge I)^-1 X^T Y`; decoding solves
//! `X = Y W^T (W W^T)^-1`. Both go through an SVD of the relevant matrix
//! instead of explicit inverses, since the normal equations can be badly
//! conditioned at high regressor counts.

use std::collections::HashMap;

use nalgebra::SVD;

use crate::design::{DesignMatrix, BIAS_NAME, LATENT_PREFIX};
use crate::error::{Error, Result};
use crate::latent::LatentTable;
use crate::{Matrix, Vector};

/// Reciprocal-condition-number floor below which solves are refused.
pub const RCOND_TOLERANCE: f64 = 1e-12;

/// Observations x voxels activity values.
#[derive(Debug, Clone, PartialEq)]
pub struct BoldPatterns {
    values: Matrix,
    voxel_ids: Vec<String>,
    observation_ids: Vec<String>,
}

impl BoldPatterns {
    pub fn new(
        values: Matrix,
        voxel_ids: Vec<String>,
        observation_ids: Vec<String>,
    ) -> Result<Self> {
        if voxel_ids.len() != values.ncols() {
            return Err(Error::CountMismatch {
                context: "bold voxel ids vs columns".into(),
                left: voxel_ids.len(),
                right: values.ncols(),
            });
        }
        if observation_ids.len() != values.nrows() {
            return Err(Error::CountMismatch {
                context: "bold observation ids vs rows".into(),
                left: observation_ids.len(),
                right: values.nrows(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bold values".into()));
        }
        Ok(BoldPatterns {
            values,
            voxel_ids,
            observation_ids,
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn voxel_ids(&self) -> &[String] {
        &self.voxel_ids
    }

    pub fn observation_ids(&self) -> &[String] {
        &self.observation_ids
    }

    pub fn n_observations(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_voxels(&self) -> usize {
        self.values.ncols()
    }

    /// Restrict to the given voxel ids, in their order.
    pub fn select_voxels(&self, ids: &[String]) -> Result<BoldPatterns> {
        let index: HashMap<&str, usize> = self
            .voxel_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut values = Matrix::zeros(self.n_observations(), ids.len());
        for (k, id) in ids.iter().enumerate() {
            let &i = index.get(id.as_str()).ok_or_else(|| Error::MissingId {
                context: "bold voxel".into(),
                id: id.clone(),
            })?;
            values.column_mut(k).copy_from(&self.values.column(i));
        }
        BoldPatterns::new(values, ids.to_vec(), self.observation_ids.clone())
    }
}

/// Fitted weight matrix (regressors x voxels) with its regressor names.
#[derive(Debug, Clone)]
pub struct EncodingModel {
    weights: Matrix,
    bias_index: usize,
    regressor_names: Vec<String>,
    voxel_ids: Vec<String>,
    gram_cache: Option<DecodeFactor>,
}

/// Cached SVD of `W^T` used to apply the decoding pseudo-inverse.
#[derive(Debug, Clone)]
struct DecodeFactor {
    u: Matrix,
    inv_singular: Vector,
    v_t: Matrix,
    rcond: f64,
}

impl EncodingModel {
    pub fn from_parts(
        weights: Matrix,
        bias_index: usize,
        regressor_names: Vec<String>,
        voxel_ids: Vec<String>,
    ) -> Result<Self> {
        if regressor_names.len() != weights.nrows() {
            return Err(Error::CountMismatch {
                context: "model regressor names vs weight rows".into(),
                left: regressor_names.len(),
                right: weights.nrows(),
            });
        }
        if voxel_ids.len() != weights.ncols() {
            return Err(Error::CountMismatch {
                context: "model voxel ids vs weight columns".into(),
                left: voxel_ids.len(),
                right: weights.ncols(),
            });
        }
        if bias_index >= weights.nrows() {
            return Err(Error::invalid(format!(
                "bias index {bias_index} outside {} regressors",
                weights.nrows()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &voxel_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(EncodingModel {
            weights,
            bias_index,
            regressor_names,
            voxel_ids,
            gram_cache: None,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias_index(&self) -> usize {
        self.bias_index
    }

    pub fn regressor_names(&self) -> &[String] {
        &self.regressor_names
    }

    pub fn voxel_ids(&self) -> &[String] {
        &self.voxel_ids
    }

    pub fn n_regressors(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_voxels(&self) -> usize {
        self.weights.ncols()
    }

    /// Submodel keeping only the rows selected by `keep`, preserving order.
    pub fn submodel(&self, keep: impl Fn(&str) -> bool) -> Result<EncodingModel> {
        let rows: Vec<usize> = self
            .regressor_names
            .iter()
            .enumerate()
            .filter(|(_, n)| keep(n))
            .map(|(i, _)| i)
            .collect();
        if !rows.contains(&self.bias_index) {
            return Err(Error::invalid("submodel must retain the bias regressor"));
        }
        let weights = Matrix::from_fn(rows.len(), self.n_voxels(), |i, j| {
            self.weights[(rows[i], j)]
        });
        let names = rows
            .iter()
            .map(|&i| self.regressor_names[i].clone())
            .collect();
        let bias = rows.iter().position(|&i| i == self.bias_index).unwrap();
        EncodingModel::from_parts(weights, bias, names, self.voxel_ids.clone())
    }

    /// The decoding model of the paper: bias plus latent rows only.
    pub fn latent_submodel(&self) -> Result<EncodingModel> {
        self.submodel(|n| n == BIAS_NAME || n.starts_with(LATENT_PREFIX))
    }

    /// Rows whose names start with `prefix`, as activity patterns labeled
    /// by the remainder of the name (the per-condition GLM betas).
    pub fn rows_as_patterns(&self, prefix: &str) -> Result<BoldPatterns> {
        let rows: Vec<usize> = self
            .regressor_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            return Err(Error::MissingId {
                context: "model regressor prefix".into(),
                id: prefix.to_string(),
            });
        }
        let values = Matrix::from_fn(rows.len(), self.n_voxels(), |i, j| {
            self.weights[(rows[i], j)]
        });
        let ids = rows
            .iter()
            .map(|&i| self.regressor_names[i][prefix.len()..].to_string())
            .collect();
        BoldPatterns::new(values, self.voxel_ids.clone(), ids)
    }

    /// Precompute and store the decoding factorization.
    pub fn with_gram_cache(mut self) -> Result<Self> {
        self.gram_cache = Some(decode_factor(&self.weights)?);
        Ok(self)
    }
}

/// Fit the encoding model `W` by (optionally ridge-regularized) least
/// squares of BOLD on the design.
///
/// With `ridge = 0` this is the plain GLM estimator; a rank-deficient
/// design is then refused, naming the offending singular values.
pub fn fit_weights(design: &DesignMatrix, bold: &BoldPatterns, ridge: f64) -> Result<EncodingModel> {
    if design.n_scans() != bold.n_observations() {
        return Err(Error::CountMismatch {
            context: "design rows vs bold observations".into(),
            left: design.n_scans(),
            right: bold.n_observations(),
        });
    }
    if ridge < 0.0 {
        return Err(Error::invalid("ridge must be nonnegative"));
    }
    let bias_index = design
        .regressor_index(BIAS_NAME)
        .ok_or_else(|| Error::invalid("design has no bias regressor"))?;

    let svd = SVD::new(design.values.clone(), true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    let s_max = s.max();
    if ridge == 0.0 && (s_max == 0.0 || s.min() < RCOND_TOLERANCE * s_max) {
        return Err(Error::SingularNormalEquations {
            s_min: s.min(),
            s_max,
        });
    }
    // W = V f(S) U^T Y with f(s) = s / (s^2 + ridge)
    let ut_y = u.transpose() * bold.values();
    let mut scaled = ut_y;
    for k in 0..s.len() {
        let f = s[k] / (s[k] * s[k] + ridge);
        scaled.row_mut(k).scale_mut(f);
    }
    let weights = v_t.transpose() * scaled;
    EncodingModel::from_parts(
        weights,
        bias_index,
        design.regressor_names.clone(),
        bold.voxel_ids().to_vec(),
    )
}

fn decode_factor(weights: &Matrix) -> Result<DecodeFactor> {
    // SVD of W^T (voxels x regressors); the pseudo-inverse needs full
    // row rank of W, i.e. at least as many voxels as regressors.
    if weights.ncols() < weights.nrows() {
        return Err(Error::invalid(format!(
            "decoding needs n_voxels >= n_regressors ({} < {})",
            weights.ncols(),
            weights.nrows()
        )));
    }
    let svd = SVD::new(weights.transpose(), true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    let s_min = s.min();
    let rcond = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if rcond < RCOND_TOLERANCE {
        return Err(Error::SingularDecoding {
            rcond,
            condition: if s_min > 0.0 { s_max / s_min } else { f64::INFINITY },
            tolerance: RCOND_TOLERANCE,
        });
    }
    Ok(DecodeFactor {
        u: svd.u.unwrap(),
        inv_singular: Vector::from_fn(s.len(), |k, _| 1.0 / s[k]),
        v_t: svd.v_t.unwrap(),
        rcond,
    })
}

/// Decoded latent table plus the bias estimates that Eq. 3 produces but
/// the recognition pipeline does not use further.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub latents: LatentTable,
    pub bias: Vec<f64>,
    /// Reciprocal condition number of the decoding system.
    pub rcond: f64,
}

/// Decode latent codes from activity patterns: `X = Y W^T (W W^T)^-1`,
/// computed as the least-squares solution of `X W ~ Y` through the SVD
/// of `W^T`. The bias component is split off and reported separately.
pub fn decode_latents(model: &EncodingModel, patterns: &BoldPatterns) -> Result<DecodeResult> {
    if model.voxel_ids() != patterns.voxel_ids() {
        return Err(Error::invalid(
            "pattern voxel ids do not match the model (same ids, same order required)",
        ));
    }
    let factor = match &model.gram_cache {
        Some(f) => f.clone(),
        None => decode_factor(&model.weights)?,
    };
    // X^T = V S^-1 U^T Y^T, i.e. X = (Y U) S^-1 V^T
    let mut yu = patterns.values() * &factor.u;
    for k in 0..factor.inv_singular.len() {
        yu.column_mut(k).scale_mut(factor.inv_singular[k]);
    }
    let estimates = yu * &factor.v_t;

    let bias = (0..estimates.nrows())
        .map(|i| estimates[(i, model.bias_index)])
        .collect();
    let latent_cols: Vec<usize> =
        (0..model.n_regressors()).filter(|&j| j != model.bias_index).collect();
    let codes = Matrix::from_fn(estimates.nrows(), latent_cols.len(), |i, j| {
        estimates[(i, latent_cols[j])]
    });
    Ok(DecodeResult {
        latents: LatentTable::new(patterns.observation_ids().to_vec(), codes)?,
        bias,
        rcond: factor.rcond,
    })
}

/// Average observation rows into one row per group.
///
/// `groups` maps every observation id to its group id; output rows are
/// ordered by group id.
pub fn average_patterns(
    bold: &BoldPatterns,
    groups: &HashMap<String, String>,
) -> Result<BoldPatterns> {
    let mut members: std::collections::BTreeMap<&str, Vec<usize>> = std::collections::BTreeMap::new();
    for (i, obs) in bold.observation_ids().iter().enumerate() {
        let group = groups.get(obs).ok_or_else(|| Error::MissingId {
            context: "group assignment for observation".into(),
            id: obs.clone(),
        })?;
        members.entry(group.as_str()).or_default().push(i);
    }
    if let Some((g, _)) = members.iter().find(|(_, rows)| rows.is_empty()) {
        return Err(Error::EmptyGroup(g.to_string()));
    }
    let mut values = Matrix::zeros(members.len(), bold.n_voxels());
    let mut ids = Vec::with_capacity(members.len());
    for (k, (group, rows)) in members.iter().enumerate() {
        ids.push(group.to_string());
        for &r in rows {
            for c in 0..bold.n_voxels() {
                values[(k, c)] += bold.values()[(r, c)];
            }
        }
        values.row_mut(k).scale_mut(1.0 / rows.len() as f64);
    }
    BoldPatterns::new(values, bold.voxel_ids().to_vec(), ids)
}

/// Per-voxel goodness-of-fit of a fitted model.
#[derive(Debug, Clone)]
pub struct GlmFitStats {
    /// Coefficient of determination per voxel.
    pub r2: Vec<f64>,
    /// Residual sum of squares per voxel.
    pub rss: Vec<f64>,
    /// Total (mean-centered) sum of squares per voxel.
    pub tss: Vec<f64>,
    pub n_obs: usize,
    pub n_regressors: usize,
}

impl GlmFitStats {
    /// Predictor count excluding the bias regressor.
    pub fn n_predictors(&self) -> usize {
        self.n_regressors.saturating_sub(1)
    }
}

/// Residual statistics of `model` on the data it was fitted to.
pub fn fit_statistics(
    design: &DesignMatrix,
    bold: &BoldPatterns,
    model: &EncodingModel,
) -> Result<GlmFitStats> {
    if design.n_scans() != bold.n_observations() {
        return Err(Error::CountMismatch {
            context: "design rows vs bold observations".into(),
            left: design.n_scans(),
            right: bold.n_observations(),
        });
    }
    let predicted = &design.values * model.weights();
    let n = bold.n_observations() as f64;
    let mut r2 = Vec::with_capacity(bold.n_voxels());
    let mut rss_v = Vec::with_capacity(bold.n_voxels());
    let mut tss_v = Vec::with_capacity(bold.n_voxels());
    for v in 0..bold.n_voxels() {
        let col = bold.values().column(v);
        let mean = col.sum() / n;
        let mut rss = 0.0;
        let mut tss = 0.0;
        for i in 0..bold.n_observations() {
            let r = col[i] - predicted[(i, v)];
            rss += r * r;
            let d = col[i] - mean;
            tss += d * d;
        }
        rss_v.push(rss);
        tss_v.push(tss);
        r2.push(if tss > 0.0 { 1.0 - rss / tss } else { 0.0 });
    }
    Ok(GlmFitStats {
        r2,
        rss: rss_v,
        tss: tss_v,
        n_obs: bold.n_observations(),
        n_regressors: model.n_regressors(),
    })
}

/// Per-voxel t statistic of one regressor's weight: the GLM contrast
/// `t = beta / sqrt(sigma^2 [(X^T X)^-1]_jj)`.
pub fn regressor_t(
    design: &DesignMatrix,
    bold: &BoldPatterns,
    model: &EncodingModel,
    regressor: &str,
) -> Result<Vec<f64>> {
    let j = design
        .regressor_index(regressor)
        .ok_or_else(|| Error::MissingId {
            context: "design regressor".into(),
            id: regressor.to_string(),
        })?;
    let n = design.n_scans();
    let p = design.n_regressors();
    if n <= p {
        return Err(Error::invalid(format!(
            "no residual degrees of freedom: {n} scans for {p} regressors"
        )));
    }
    let stats = fit_statistics(design, bold, model)?;
    let svd = SVD::new(design.values.clone(), false, true);
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let s = &svd.singular_values;
    let s_max = s.max();
    if s_max == 0.0 || s.min() < RCOND_TOLERANCE * s_max {
        return Err(Error::SingularNormalEquations {
            s_min: s.min(),
            s_max,
        });
    }
    // [(X^T X)^-1]_jj = sum_k V[j,k]^2 / s_k^2
    let gjj: f64 = (0..s.len()).map(|k| (v_t[(k, j)] / s[k]).powi(2)).sum();
    let df = (n - p) as f64;
    Ok((0..bold.n_voxels())
        .map(|v| {
            let sigma2 = stats.rss[v] / df;
            let se = (sigma2 * gjj).sqrt();
            if se > 0.0 {
                model.weights()[(j, v)] / se
            } else {
                0.0
            }
        })
        .collect())
}
