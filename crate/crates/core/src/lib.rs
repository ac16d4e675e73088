//! Crowd-flow forecasting on irregular city regions with a multi-view
//! spatial graph convolutional network.
//!
//! Pipeline: [`mapseg`] turns a road raster into regions, [`stg`] builds the
//! region graph from transition counts, [`dataprep`] cuts the flow series into
//! multi-view training instances, [`model`] trains the network, and [`eval`]
//! scores it against the historical-average baseline. [`harness`] holds the
//! synthetic generator, run configuration, and file exporters used by the CLI.

pub mod dataprep;
pub mod error;
pub mod eval;
pub mod harness;
pub mod io;
pub mod mapseg;
pub mod model;
pub mod numkit;
pub mod stg;

pub use error::{Error, Result};
