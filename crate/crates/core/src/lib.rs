//! Video matting against a progressively restored background.

pub mod brm;
pub mod error;
pub mod matting;
pub mod metrics;
pub mod morphology;
pub mod pipeline;
pub mod prm;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{AlphaMatte, Frame, Resolution, SemanticMap, VideoSequence};
