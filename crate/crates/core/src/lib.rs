// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod data;
pub mod detection;
pub mod error;
pub mod harness;
pub mod models;
pub mod netcore;

pub use data::{FeatureSchema, LabeledSeries, Role, SampleBatch};
pub use detection::{ScoreTrace, ScoringConfig};
pub use error::{Error, Result};
pub use harness::{Detector, MethodId, RunConfig, StreamingDetector};
pub use models::{AdaptiveModule, AutoencoderModel, ModelBundle};
pub use netcore::Matrix;
