pub mod analysis;
pub mod corpus;
pub mod error;
pub mod geom;
pub mod graph;
pub mod synth;
pub mod ingest;
pub mod nodemodel;
pub mod tensor;
pub mod vgae;

pub use error::{Error, Result};
