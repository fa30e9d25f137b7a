//! Scoring, combination, clustering and simulation for multi-speaker
//! conversation annotations.
//!
//! Times are integer ticks of 0.1 ms; see [`timeline`].

pub mod doverlap;
pub mod error;
pub mod hungarian;
pub mod io;
pub mod metrics;
pub mod simulate;
pub mod spectral;
pub mod timeline;

pub use error::{Error, Result};
pub use timeline::{Tick, Timeline, Turn, TICKS_PER_SECOND};
