//! Automated artifact reduction for EEG recorded during fMRI.
//!
//! The pipeline runs in two passes. Pass A removes the MRI-environment
//! artifacts: sliding-template gradient subtraction, decimation to 250 S/s,
//! band-pass and notch filtering, cardiac R-peak detection (ECG, component-
//! based, and pulse-oximetry reference), ballistocardiogram template
//! subtraction, and bad-interval screening. Pass B decomposes the cleaned
//! data with extended-Infomax ICA, labels each component (BCG, blink,
//! saccade, single-channel, muscle, or neural) with rule-based spectral,
//! topographic, and contribution tests, and reconstructs the session without
//! the artifact components.
//!
//! The crate also ships the evaluation toolkit (Welch PSD, Morse-wavelet
//! scalograms, ERP measures, paired statistics) and a synthetic session
//! generator with ground-truth constituents that serves as the test oracle.

pub mod cardiac;
pub mod classify;
pub mod dsp;
pub mod error;
pub mod evaluate;
pub mod ica;
pub mod io;
pub mod layout;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod preclean;
pub mod stats;
pub mod synth;
pub mod topo;

pub use error::{Error, Result};
pub use model::{excise_intervals, ChannelInfo, IndexMap, IntervalSet, Marker, Recording, RecordingKind};
