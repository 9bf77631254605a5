//! Command-line harness around `uplift_core`: dataset generation, training,
//! evaluation and resumable benchmark matrices.

pub mod artifact;
pub mod bench;
pub mod cli;
pub mod commands;

pub use cli::Cli;
pub use commands::run;
