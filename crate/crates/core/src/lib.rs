pub mod data;
pub mod decoder;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod llm;
pub mod model;
pub mod numerics;
pub mod scorer;
pub mod tagger;
pub mod training;

pub use error::{Error, ErrorClass, Result};
