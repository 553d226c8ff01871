//! Principal component analysis between the 256-d speaker-embedding space and
//! the low-dimensional coefficient space the search runs in.
//!
//! The fit centres the training embeddings and runs a one-sided Jacobi SVD on
//! the centred data. Axes are returned in order of decreasing variance, each
//! flipped so that its largest-magnitude coordinate is positive, which makes
//! the fit a deterministic function of the training set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::scalar::Scalar;

/// Length of every speaker embedding.
pub const EMBEDDING_DIM: usize = 256;

/// Number of principal components searched in the reference configuration.
pub const REFERENCE_COMPONENTS: usize = 10;

/// Version tag written into serialised models.
pub const PCA_FORMAT_VERSION: u32 = 1;

const MAX_JACOBI_SWEEPS: usize = 60;
const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcaError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

fn check_finite<T: Scalar>(values: &[T], what: &str) -> Result<(), PcaError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(PcaError::Validation(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

/// A speaker embedding: exactly [`EMBEDDING_DIM`] finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct Embedding<T>(Vec<T>);

impl<T: Scalar> Embedding<T> {
    pub fn new(values: Vec<T>) -> Result<Self, PcaError> {
        if values.len() != EMBEDDING_DIM {
            return Err(PcaError::Dimension(format!(
                "embedding has {} values, expected {EMBEDDING_DIM}",
                values.len()
            )));
        }
        check_finite(&values, "embedding")?;
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![T::zero(); EMBEDDING_DIM])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Embedding<T> {
    type Error = PcaError;

    fn try_from(values: Vec<T>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl<T> From<Embedding<T>> for Vec<T> {
    fn from(e: Embedding<T>) -> Self {
        e.0
    }
}

/// Principal-component scores of one embedding. Its length is tied to the
/// model that produced or consumes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct Coefficients<T>(Vec<T>);

impl<T: Scalar> Coefficients<T> {
    pub fn new(values: Vec<T>) -> Result<Self, PcaError> {
        check_finite(&values, "coefficient")?;
        Ok(Self(values))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![T::zero(); k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Coefficients<T> {
    type Error = PcaError;

    fn try_from(values: Vec<T>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl<T> From<Coefficients<T>> for Vec<T> {
    fn from(c: Coefficients<T>) -> Self {
        c.0
    }
}

/// Affine map between embeddings and `k` principal-component scores.
///
/// Immutable once fitted or loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "PcaDocument<T>",
    into = "PcaDocument<T>",
    bound = "T: Scalar"
)]
pub struct PcaModel<T> {
    mean: Embedding<T>,
    components: Vec<Vec<T>>,
    component_stddevs: Vec<T>,
    training_count: usize,
}

/// On-disk JSON layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct PcaDocument<T> {
    version: u32,
    k: usize,
    mean: Vec<T>,
    components: Vec<Vec<T>>,
    component_stddevs: Vec<T>,
    training_count: usize,
}

impl<T: Scalar> From<PcaModel<T>> for PcaDocument<T> {
    fn from(m: PcaModel<T>) -> Self {
        Self {
            version: PCA_FORMAT_VERSION,
            k: m.components.len(),
            mean: m.mean.into_vec(),
            components: m.components,
            component_stddevs: m.component_stddevs,
            training_count: m.training_count,
        }
    }
}

impl<T: Scalar> TryFrom<PcaDocument<T>> for PcaModel<T> {
    type Error = PcaError;

    fn try_from(doc: PcaDocument<T>) -> Result<Self, Self::Error> {
        if doc.version != PCA_FORMAT_VERSION {
            return Err(PcaError::Validation(format!(
                "unsupported PCA model version {}",
                doc.version
            )));
        }
        if doc.components.len() != doc.k || doc.component_stddevs.len() != doc.k {
            return Err(PcaError::Dimension(format!(
                "k = {} but {} components and {} stddevs",
                doc.k,
                doc.components.len(),
                doc.component_stddevs.len()
            )));
        }
        let model = Self {
            mean: Embedding::new(doc.mean)?,
            components: doc.components,
            component_stddevs: doc.component_stddevs,
            training_count: doc.training_count,
        };
        model.validate()?;
        Ok(model)
    }
}

impl<T: Scalar> PcaModel<T> {
    /// Fits the top-`k` principal axes of `training`.
    pub fn fit(training: &[Embedding<T>], k: usize) -> Result<Self, PcaError> {
        let n = training.len();
        if k == 0 {
            return Err(PcaError::Validation("k must be positive".into()));
        }
        if n < k {
            return Err(PcaError::Dimension(format!(
                "{n} training samples cannot support {k} components"
            )));
        }
        if k > EMBEDDING_DIM {
            return Err(PcaError::Dimension(format!(
                "k = {k} exceeds embedding dimension {EMBEDDING_DIM}"
            )));
        }

        let scale = T::one() / T::of(n as f64);
        let mut mean = vec![T::zero(); EMBEDDING_DIM];
        for e in training {
            linalg::axpy(scale, e.as_slice(), &mut mean);
        }

        let centred: Vec<Vec<T>> = training
            .iter()
            .map(|e| e.as_slice().iter().zip(&mean).map(|(&x, &m)| x - m).collect())
            .collect();
        let svd = linalg::jacobi_left_singular(centred, MAX_JACOBI_SWEEPS).ok_or_else(|| {
            PcaError::Numerical(format!(
                "Jacobi SVD did not converge in {MAX_JACOBI_SWEEPS} sweeps"
            ))
        })?;

        let dof = if n > 1 { T::of((n - 1) as f64) } else { T::one() };
        let mut components: Vec<Vec<T>> = Vec::with_capacity(k);
        let mut stddevs = Vec::with_capacity(k);
        for (vector, sigma) in svd.vectors.into_iter().zip(svd.values).take(k) {
            match vector {
                Some(v) => {
                    components.push(v);
                    stddevs.push(sigma / dof.sqrt());
                }
                None => break,
            }
        }
        // Axes beyond the numerical rank carry no variance; any orthonormal
        // completion is a valid choice.
        let ranked = components.len();
        linalg::reorthonormalize(&mut components);
        linalg::complete_basis(&mut components, EMBEDDING_DIM, k);
        stddevs.resize(k, T::zero());
        debug_assert!(components.len() == k && ranked <= k);

        for axis in &mut components {
            linalg::canonical_sign(axis);
        }

        let model = Self {
            mean: Embedding::new(mean)?,
            components,
            component_stddevs: stddevs,
            training_count: n,
        };
        Ok(model)
    }

    /// Principal-component scores of `embedding`.
    pub fn project(&self, embedding: &Embedding<T>) -> Coefficients<T> {
        let centred: Vec<T> = embedding
            .as_slice()
            .iter()
            .zip(self.mean.as_slice())
            .map(|(&x, &m)| x - m)
            .collect();
        Coefficients(
            self.components
                .iter()
                .map(|axis| linalg::dot(axis, &centred))
                .collect(),
        )
    }

    /// `mean + Σ coeffs[i] · axis[i]`.
    pub fn inverse(&self, coeffs: &Coefficients<T>) -> Result<Embedding<T>, PcaError> {
        if coeffs.len() != self.k() {
            return Err(PcaError::Dimension(format!(
                "{} coefficients for a {}-component model",
                coeffs.len(),
                self.k()
            )));
        }
        let mut out = self.mean.as_slice().to_vec();
        for (&c, axis) in coeffs.as_slice().iter().zip(&self.components) {
            linalg::axpy(c, axis, &mut out);
        }
        Embedding::new(out)
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &Embedding<T> {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn component_stddevs(&self) -> &[T] {
        &self.component_stddevs
    }

    pub fn training_count(&self) -> usize {
        self.training_count
    }

    /// Checks the structural invariants: axis count and length, unit norm and
    /// mutual orthogonality, non-increasing non-negative stddevs.
    pub fn validate(&self) -> Result<(), PcaError> {
        let k = self.k();
        if k == 0 || self.training_count < k || k > EMBEDDING_DIM {
            return Err(PcaError::Dimension(format!(
                "k = {k} invalid for training_count = {}",
                self.training_count
            )));
        }
        for (i, axis) in self.components.iter().enumerate() {
            if axis.len() != EMBEDDING_DIM {
                return Err(PcaError::Dimension(format!(
                    "component {i} has {} values",
                    axis.len()
                )));
            }
            check_finite(axis, "component")?;
        }
        check_finite(&self.component_stddevs, "component_stddevs")?;
        if self.component_stddevs.iter().any(|s| *s < T::zero()) {
            return Err(PcaError::Validation("negative component stddev".into()));
        }
        if self.component_stddevs.windows(2).any(|w| w[0] < w[1]) {
            return Err(PcaError::Validation(
                "component stddevs must be non-increasing".into(),
            ));
        }
        let tol = T::of(ORTHONORMAL_TOLERANCE).max(T::epsilon() * T::of(EMBEDDING_DIM as f64));
        for i in 0..k {
            for j in i..k {
                let d = linalg::dot(&self.components[i], &self.components[j]);
                let want = if i == j { T::one() } else { T::zero() };
                if (d - want).abs() > tol {
                    return Err(PcaError::Validation(format!(
                        "components {i} and {j} are not orthonormal (dot = {d})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PCA model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, PcaError> {
        serde_json::from_str(text).map_err(|e| PcaError::Validation(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_embeddings(n: usize, seed: u64) -> Vec<Embedding<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Embedding::new((0..EMBEDDING_DIM).map(|_| rng.sample(StandardNormal)).collect())
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn too_few_samples_is_dimension_error() {
        let data = random_embeddings(3, 1);
        assert!(matches!(PcaModel::fit(&data, 4), Err(PcaError::Dimension(_))));
        assert!(matches!(PcaModel::fit(&data, 0), Err(PcaError::Validation(_))));
    }

    #[test]
    fn non_finite_embedding_is_rejected() {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[17] = f64::NAN;
        assert!(matches!(Embedding::new(v), Err(PcaError::Validation(_))));
        assert!(matches!(
            Embedding::new(vec![0.0f64; 3]),
            Err(PcaError::Dimension(_))
        ));
    }

    #[test]
    fn identical_copies_have_zero_variance() {
        let one = random_embeddings(1, 7).remove(0);
        let data = vec![one.clone(); 4];
        let model = PcaModel::fit(&data, 4).unwrap();
        assert!(model.component_stddevs().iter().all(|&s| s == 0.0));
        for (a, b) in model.mean().as_slice().iter().zip(one.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        model.validate().unwrap();
    }

    #[test]
    fn centroid_maps_to_origin_and_back() {
        let model = PcaModel::fit(&random_embeddings(30, 3), 6).unwrap();
        let c = model.project(model.mean());
        assert!(c.as_slice().iter().all(|v| v.abs() < 1e-12));
        let back = model.inverse(&Coefficients::zeros(6)).unwrap();
        assert_eq!(&back, model.mean());
    }

    #[test]
    fn unit_step_along_first_axis() {
        let model = PcaModel::fit(&random_embeddings(30, 4), 5).unwrap();
        let mut e = model.mean().as_slice().to_vec();
        linalg::axpy(2.0, &model.components()[0], &mut e);
        let c = model.project(&Embedding::new(e).unwrap());
        assert!((c.as_slice()[0] - 2.0).abs() < 1e-12);
        assert!(c.as_slice()[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn inverse_rejects_wrong_length() {
        let model = PcaModel::fit(&random_embeddings(12, 5), 3).unwrap();
        assert!(matches!(
            model.inverse(&Coefficients::zeros(4)),
            Err(PcaError::Dimension(_))
        ));
    }

    #[test]
    fn sign_convention_holds() {
        let model = PcaModel::fit(&random_embeddings(40, 9), 8).unwrap();
        for axis in model.components() {
            let max = axis.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let model = PcaModel::fit(&random_embeddings(20, 11), 4).unwrap();
        let back = PcaModel::<f64>::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
        back.validate().unwrap();
    }

    #[test]
    fn json_with_bad_version_or_shape_is_rejected() {
        let model = PcaModel::fit(&random_embeddings(20, 12), 4).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        doc["version"] = 2.into();
        assert!(PcaModel::<f64>::from_json(&doc.to_string()).is_err());
        doc["version"] = 1.into();
        doc["k"] = 3.into();
        assert!(PcaModel::<f64>::from_json(&doc.to_string()).is_err());
    }

    #[test]
    fn single_precision_fit_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<Embedding<f32>> = (0..25)
            .map(|_| {
                Embedding::new((0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0f32..1.0)).collect())
                    .unwrap()
            })
            .collect();
        let model = PcaModel::fit(&data, 5).unwrap();
        model.validate().unwrap();
        let x = Coefficients::new(vec![0.5f32, -1.0, 0.25, 2.0, -0.75]).unwrap();
        let y = model.project(&model.inverse(&x).unwrap());
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
