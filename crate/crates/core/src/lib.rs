pub mod diffusion;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lp;
pub mod recovery;
pub mod spectral;

pub use error::{Error, Result};
