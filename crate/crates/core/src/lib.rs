//! Drug-drug interaction prediction with a two-level heterogeneous graph
//! attention encoder.

pub mod error;
pub mod espf;
pub mod hin;
pub mod io;
pub mod metapath;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
