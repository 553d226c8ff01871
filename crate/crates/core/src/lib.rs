//! Preference-driven voice search.
//!
//! Speaker embeddings (256-d) are compressed by a PCA into a 10-d coefficient
//! space. A (1+λ) evolution strategy walks that space, using a listener's
//! choice between two voices as its only fitness signal. Converged voices are
//! exported as portable voice files.

pub mod corpus;
pub mod evolution;
pub mod judge;
mod linalg;
pub mod pca;
pub mod rng;
pub mod scalar;
pub mod session;
pub mod synth;
pub mod voicefile;

pub use scalar::Scalar;

pub type Embedding = pca::Embedding<f64>;
pub type Coefficients = pca::Coefficients<f64>;
pub type PcaModel = pca::PcaModel<f64>;
pub type PcaModelF32 = pca::PcaModel<f32>;
pub type Individual = evolution::Individual<f64>;
pub type Population = evolution::Population<f64>;
pub type SimulatedJudge = judge::SimulatedJudge<f64>;
pub type TrialReport = judge::TrialReport<f64>;
