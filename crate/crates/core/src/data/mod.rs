//! Ingestion, feature partitioning, standardization, split protocols,
//! ordered streaming and the synthetic process generator.

mod ingest;
mod schema;
mod split;
mod standardize;
mod stream;
mod synth;

pub use ingest::{ingest_csv, ingest_reader, write_csv, TIME_COLUMN};
pub use schema::{
    ColumnSpec, FaultWindow, FeatureSchema, LabeledSeries, Manifest, Role, SampleBatch,
};
pub use split::{make_splits, SplitPlan, Splits};
pub use standardize::Standardizer;
pub use stream::{batch_ranges, stream_batches, StreamBatches};
pub use synth::{
    generate_synthetic, DriftSchedule, FaultKind, FaultSpec, SensorMap, SensorShift, SynthConfig,
    SyntheticSeries,
};
