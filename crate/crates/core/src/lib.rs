//! Context-aware demand forecasting for station-based bike sharing.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration and the
//! command line live in the `bikecast` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod error;
pub mod eval;
pub mod forecasters;
pub mod masks;
pub mod recurrent;
pub mod search;
pub mod segment;
pub mod series;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use segment::{Fold, Instance, SegmentSpec, SubdatasetSpec};
pub use series::{ScalerParams, Station, StationId, TimeGrid, TimeSeries};
