//! Strong mixed-integer formulations and exact verification for
//! piecewise-linear neural networks.

pub mod bnc;
pub mod cuts;
pub mod error;
pub mod export;
pub mod formulation;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod scalar;

pub use error::{Error, Result};
