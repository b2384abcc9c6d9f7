//! Simulation and analysis of an excitable automaton living on a voxelized
//! network of conductive bundles, driven and read through electrodes.
//!
//! The pipeline runs bottom-up:
//!
//! - [`grid`] builds the conductive matrix (image stack, raw file or a
//!   synthetic bundle network).
//! - [`automaton`] advances the resting/excited/refractory field.
//! - [`electrodes`] stimulates input apertures and turns potentials into spike
//!   trains and machine states.
//! - [`gates`] mines two-input gates and sweeps the automaton parameters.
//! - [`machine`] runs every input string and analyses the transition graphs.
//! - [`logic`] minimises the per-electrode Boolean functions.

pub mod automaton;
pub mod electrodes;
mod error;
pub mod fixtures;
pub mod gates;
pub mod grid;
pub mod logic;
pub mod machine;

pub use automaton::{AutomatonField, AutomatonParams, VoxelState};
pub use electrodes::{Electrode, RecordingParams, SpikeDetector, Trial};
pub use error::{Error, Result};
pub use grid::{ConductiveMatrix, Dims, Voxel};
pub use machine::MachineConfig;
