//! Spike-camera ("vidar") streams and a spiking-neural-network vision pipeline.
//!
//! The crate covers the full path from photons to decisions:
//!
//! - [`spike`]: the bit-array stream model and `.vdr` codec
//! - [`sim`]: an integrate-and-fire pixel simulator with synthetic scenes
//! - [`reconstruct`]: texture reconstruction by spike count (TFW) and by
//!   interspike interval (TFI), plus no-reference quality metrics
//! - [`gate`]: a short-term-plasticity gate that drops static background
//! - [`tracking`]: LIF detection layer, connected components, tracking and
//!   CLEAR-MOT evaluation
//! - [`cann`]: anticipative position prediction with a continuous attractor
//! - [`recognizer`]: a three-layer SNN trained with BP-STDP
//! - [`pipeline`]: config files, manifests and the command implementations
//!   behind the `vidar` binary

pub mod cann;
pub mod error;
pub mod gate;
pub mod geom;
pub mod io;
pub mod pipeline;
pub mod recognizer;
pub mod reconstruct;
pub mod sim;
pub mod spike;
pub mod tracking;

pub use error::{Error, Result};
