//! Sparse minimax polynomial regression with anomalous-data filtering.

pub mod error;
pub mod fractional;
pub mod harness;
pub mod lp;
pub mod model_io;
pub mod oracle;
pub mod par;
pub mod poly;
pub mod relaxation;
pub mod synth;
pub mod tscrr;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
pub use par::Execution;
