//! Command line, file formats and a thread-pool executor for `liouville-core`.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod run;

pub use error::{CliError, ErrorKind};
pub use exec::Rayon;
