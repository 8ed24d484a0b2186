//! Numerical toolkit for two-cluster threshold problems.
//!
//! The crate covers the cluster geometry of many-body systems, the Grushin
//! (Feshbach) reduction on finite model spaces, low-energy expansions of the
//! free resolvent, zero-energy classification of effective one-body
//! operators, critical inverse-square channels, leading resolvent laws and
//! threshold scattering quantities.

pub mod critical_channel;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod free_resolvent;
pub mod grushin_core;
pub mod linalg;
pub mod model_setup;
pub mod ode;
pub mod resolvent_expansion;
pub mod scattering_threshold;
pub mod special;
pub mod threshold_classifier;

pub use error::{Error, Result};
