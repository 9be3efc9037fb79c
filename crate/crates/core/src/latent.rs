//! Latent code spaces: a PCA codec over pixel vectors, ingestion of
//! externally computed codes, and attribute-vector arithmetic.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Per-stimulus latent code vectors, one row per stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTable {
    stim_ids: Vec<String>,
    codes: Matrix,
}

impl LatentTable {
    /// Build a table, validating id uniqueness and finiteness.
    pub fn new(stim_ids: Vec<String>, codes: Matrix) -> Result<Self> {
        if stim_ids.len() != codes.nrows() {
            return Err(Error::CountMismatch {
                context: "latent table ids vs code rows".into(),
                left: stim_ids.len(),
                right: codes.nrows(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for id in &stim_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        if codes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent codes".into()));
        }
        Ok(LatentTable { stim_ids, codes })
    }

    pub fn stim_ids(&self) -> &[String] {
        &self.stim_ids
    }

    pub fn codes(&self) -> &Matrix {
        &self.codes
    }

    pub fn n_stimuli(&self) -> usize {
        self.codes.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.codes.ncols()
    }

    pub fn row_index(&self, stim_id: &str) -> Option<usize> {
        self.stim_ids.iter().position(|s| s == stim_id)
    }

    /// Code vector of one stimulus.
    pub fn code(&self, stim_id: &str) -> Option<Vector> {
        self.row_index(stim_id)
            .map(|i| self.codes.row(i).transpose())
    }

    /// Column means of the codes.
    pub fn mean_code(&self) -> Vector {
        let n = self.n_stimuli() as f64;
        Vector::from_fn(self.n_dims(), |j, _| self.codes.column(j).sum() / n)
    }

    /// Concatenate two tables; ids must stay disjoint.
    pub fn concat(&self, other: &LatentTable) -> Result<LatentTable> {
        if self.n_dims() != other.n_dims() {
            return Err(Error::DimensionMismatch {
                context: "latent table concat".into(),
                expected: self.n_dims(),
                got: other.n_dims(),
            });
        }
        let mut ids = self.stim_ids.clone();
        ids.extend(other.stim_ids.iter().cloned());
        let mut codes = Matrix::zeros(self.n_stimuli() + other.n_stimuli(), self.n_dims());
        codes.rows_mut(0, self.n_stimuli()).copy_from(&self.codes);
        codes
            .rows_mut(self.n_stimuli(), other.n_stimuli())
            .copy_from(&other.codes);
        LatentTable::new(ids, codes)
    }

    /// Subset of rows in the given id order.
    pub fn select(&self, ids: &[String]) -> Result<LatentTable> {
        let mut codes = Matrix::zeros(ids.len(), self.n_dims());
        for (k, id) in ids.iter().enumerate() {
            let i = self.row_index(id).ok_or_else(|| Error::MissingId {
                context: "latent table".into(),
                id: id.clone(),
            })?;
            codes.row_mut(k).copy_from(&self.codes.row(i));
        }
        LatentTable::new(ids.to_vec(), codes)
    }
}

/// Linear pixel-space codec: orthonormal principal directions around a
/// mean image.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCodec {
    mean: Vector,
    /// One orthonormal component per row (n_components x n_pixels).
    components: Matrix,
    /// Nonincreasing sample variances along each component.
    explained_variance: Vector,
}

impl PcaCodec {
    pub fn from_parts(
        mean: Vector,
        components: Matrix,
        explained_variance: Vector,
    ) -> Result<Self> {
        if components.nrows() != explained_variance.len() {
            return Err(Error::CountMismatch {
                context: "pca components vs variances".into(),
                left: components.nrows(),
                right: explained_variance.len(),
            });
        }
        if components.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "pca components vs mean".into(),
                expected: mean.len(),
                got: components.ncols(),
            });
        }
        Ok(PcaCodec {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn explained_variance(&self) -> &Vector {
        &self.explained_variance
    }

    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_pixels(&self) -> usize {
        self.components.ncols()
    }
}

/// Fit a PCA codec by SVD of the mean-centered data.
///
/// Components are the top right-singular directions; each component's
/// largest-magnitude element is made positive (lowest index on ties) so
/// the fit is reproducible despite SVD sign ambiguity.
pub fn pca_fit(data: &Matrix, n_components: usize) -> Result<PcaCodec> {
    let n = data.nrows();
    let p = data.ncols();
    if n < 2 {
        return Err(Error::invalid("pca_fit requires at least 2 samples"));
    }
    if n_components == 0 || n_components > (n - 1).min(p) {
        return Err(Error::invalid(format!(
            "n_components {n_components} outside 1..={}",
            (n - 1).min(p)
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca input".into()));
    }
    let mean = Vector::from_fn(p, |j, _| data.column(j).sum() / n as f64);
    let mut centered = data.clone();
    for i in 0..n {
        for j in 0..p {
            centered[(i, j)] -= mean[j];
        }
    }
    let svd = SVD::new(centered, true, true);
    let singular = &svd.singular_values;
    let s_max = singular.max();
    if s_max <= 1e-12 * (1.0 + data.norm()) {
        return Err(Error::ZeroVariance("all pca input rows identical".into()));
    }
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut components = v_t.rows(0, n_components).into_owned();
    for mut row in components.row_iter_mut() {
        // sign convention: largest-|v| entry positive, ties to lowest index
        let mut best = 0;
        for j in 1..row.ncols() {
            if row[j].abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            row.neg_mut();
        }
    }
    let explained = Vector::from_fn(n_components, |i, _| {
        singular[i] * singular[i] / (n as f64 - 1.0)
    });
    PcaCodec::from_parts(mean, components, explained)
}

/// Project images onto the codec components: `(images - mean) . C^T`.
pub fn pca_encode_matrix(codec: &PcaCodec, images: &Matrix) -> Result<Matrix> {
    if images.ncols() != codec.n_pixels() {
        return Err(Error::DimensionMismatch {
            context: "pca_encode image width".into(),
            expected: codec.n_pixels(),
            got: images.ncols(),
        });
    }
    let mut centered = images.clone();
    for i in 0..centered.nrows() {
        for j in 0..centered.ncols() {
            centered[(i, j)] -= codec.mean[j];
        }
    }
    Ok(&centered * codec.components.transpose())
}

/// [`pca_encode_matrix`] packaged as a [`LatentTable`] with the given ids.
pub fn pca_encode(codec: &PcaCodec, images: &Matrix, stim_ids: Vec<String>) -> Result<LatentTable> {
    LatentTable::new(stim_ids, pca_encode_matrix(codec, images)?)
}

/// Reconstruct images from codes: `codes . C + mean`.
pub fn pca_decode_matrix(codec: &PcaCodec, codes: &Matrix) -> Result<Matrix> {
    if codes.ncols() != codec.n_components() {
        return Err(Error::DimensionMismatch {
            context: "pca_decode code width".into(),
            expected: codec.n_components(),
            got: codes.ncols(),
        });
    }
    let mut images = codes * &codec.components;
    for i in 0..images.nrows() {
        for j in 0..images.ncols() {
            images[(i, j)] += codec.mean[j];
        }
    }
    Ok(images)
}

/// Reconstruct the images of a latent table.
pub fn pca_decode(codec: &PcaCodec, codes: &LatentTable) -> Result<Matrix> {
    pca_decode_matrix(codec, codes.codes())
}

/// Mean latent difference between labeled-present and labeled-absent sets.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeVector {
    pub name: String,
    pub vector: Vector,
    pub n_with: usize,
    pub n_without: usize,
}

/// Attribute axis: column-mean(with) - column-mean(without).
pub fn attribute_vector(
    with_label: &LatentTable,
    without_label: &LatentTable,
    name: impl Into<String>,
) -> Result<AttributeVector> {
    if with_label.n_stimuli() == 0 || without_label.n_stimuli() == 0 {
        return Err(Error::invalid("attribute_vector requires nonempty tables"));
    }
    if with_label.n_dims() != without_label.n_dims() {
        return Err(Error::DimensionMismatch {
            context: "attribute_vector tables".into(),
            expected: with_label.n_dims(),
            got: without_label.n_dims(),
        });
    }
    Ok(AttributeVector {
        name: name.into(),
        vector: with_label.mean_code() - without_label.mean_code(),
        n_with: with_label.n_stimuli(),
        n_without: without_label.n_stimuli(),
    })
}

/// Shift a code along an attribute axis: `code + scale * attr`.
pub fn apply_attribute(code: &Vector, attr: &AttributeVector, scale: f64) -> Result<Vector> {
    if code.len() != attr.vector.len() {
        return Err(Error::DimensionMismatch {
            context: "apply_attribute".into(),
            expected: attr.vector.len(),
            got: code.len(),
        });
    }
    Ok(code + scale * &attr.vector)
}
