pub mod datamodel;
pub mod error;
pub mod frechet;
pub mod numerics;
pub mod predictor;
pub mod scalar;
pub mod scoring;
pub mod seed;
pub mod toygan;

pub use error::{Error, Result};
pub use scalar::Scalar;

// f64 instantiations of the generic types
pub type Mat = numerics::Matrix<f64>;
pub type SymMat = numerics::SymMatrix<f64>;
pub type EmbeddingSet = datamodel::LabeledEmbeddingSet<f64>;
pub type Moments = frechet::Moments<f64>;
pub type GaussianStats = frechet::GaussianStats<f64>;
pub type Calibration = predictor::LinearCalibration<f64>;
pub type Mlp = toygan::MlpParams<f64>;
pub type ToyGan = toygan::ToyGanState<f64>;
