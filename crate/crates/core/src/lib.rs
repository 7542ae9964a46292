pub mod dataio;
pub mod dgp;
pub mod dists;
pub mod engine;
pub mod error;
pub mod factors;
pub mod forecast;
pub mod gausslin;
pub mod layout;
pub mod rng;
pub mod scalar;
pub mod shrinkage;
pub mod stochvol;
pub mod store;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the generic core.
pub type Chain = engine::ChainState<f64>;
pub type Data = engine::VarData<f64>;
pub type SvBlock = stochvol::SvBlock<f64>;
/// Single-precision aliases, mainly for memory-bound experiments.
pub type Chain32 = engine::ChainState<f32>;
pub type Data32 = engine::VarData<f32>;
