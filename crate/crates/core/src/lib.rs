//! Piecewise-multilinear structure of hinge-loss leaky-ReLU networks: cell
//! signatures, frozen-activation decompositions, Clarke subdifferentials,
//! minimum classification, data genericity and the exact-penalty multiclass scheme.
//!
//! The lower layers (`linalg`, `network`, `data`, `loss`, signatures and frozen
//! evaluation) are generic over [`Scalar`]; the analysis layers work in `f64`.

pub mod cells;
pub mod clarke;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod landscape;
pub mod linalg;
pub mod loss;
pub mod lp;
pub mod multilinear;
pub mod network;
pub mod optimize;
pub mod penalty;
pub mod scalar;

pub use error::{Error, Result};
pub use network::{leaky_relu, NetworkShape};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Params = network::Params<f64>;
pub type Dataset = data::Dataset<f64>;
pub type FrozenActivation = multilinear::FrozenActivation<f64>;
pub type Matrix = linalg::Matrix<f64>;

pub type ParamsF32 = network::Params<f32>;
pub type DatasetF32 = data::Dataset<f32>;
