//! File formats: BrainVision triplets, plain-text oximetry waveforms,
//! `key=value` pipeline configuration, and the JSON run report.

pub mod brainvision;
pub mod config;
pub mod oximetry;
pub mod report;

pub use brainvision::{read_brainvision, write_brainvision, write_brainvision_int16, BinaryFormat};
pub use config::{Mode, PipelineConfig};
pub use oximetry::read_oximetry;
pub use report::{read_report, write_report, IcRecord, RunReport};
