//! Kibble-Zurek sweeps of 1D quantum critical chains with infinite
//! matrix-product states at fixed bond dimension, plus the exact solvers
//! and scaling-collapse analysis used to validate them.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod imps;
pub mod models;
pub mod oracle;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::{Real, C};
pub use imps::{Bond, UniformMPS};
pub use models::{ModelKind, ModelSpec};
pub use tensor::{Charges, SchmidtSpectrum, Tensor, Truncation};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type UniformMPS64 = UniformMPS<f64>;
