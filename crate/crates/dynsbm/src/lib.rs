//! File formats, parallel restarts and the `dynsbm` command line on top of
//! [`dynsbm_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod io;
pub mod output;
pub mod pipeline;
pub mod scenario;
pub mod tensor_file;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, RunOutcome};
