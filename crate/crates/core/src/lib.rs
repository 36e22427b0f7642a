//! Customer segmentation with demographic (Condorcet-criterion) clustering.
//!
//! The pipeline has two phases. Raw customer rows are cleansed into typed
//! [`Record`]s ([`io`]), then clustered over their active variables
//! ([`engine`]). The clusters are profiled on shareholder-value variables
//! ([`profiler`]), ranked, sorted into value quadrants and paired with a
//! strategy. [`analysis`] scores partitions and variables; [`synth`]
//! generates seeded retail-like data with planted segments.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod io;
pub mod model_file;
pub mod params;
pub mod profiler;
pub mod schema;
pub mod similarity;
pub mod synth;

pub use engine::{run, Assignment, ClusterModel, RunOutput, RunTrace};
pub use params::{Mode, RunParams};
pub use schema::{coerce_record, validate_schema, FieldKind, FieldRole, FieldSpec, Record, Schema, Value};
