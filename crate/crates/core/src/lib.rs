pub mod combinatorics;
pub mod ermmatrix;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod pointset;
pub mod spectra;
pub mod stats;
pub mod theory;

pub use error::{ErmError, Result};
pub use num_complex;
