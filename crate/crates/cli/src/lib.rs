//! File formats, thread pool and command line for `hin-embed-core`.

pub mod cli;
pub mod config;
pub mod exec;
pub mod io;

pub use cli::main_with_args;
pub use exec::RayonExecutor;
