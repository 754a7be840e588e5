//! File formats, calibration replay and the command-line front end for
//! [`arfa_core`].

#![forbid(unsafe_code)]

pub mod beliefs;
pub mod calibrate;
pub mod cli;
mod error;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
