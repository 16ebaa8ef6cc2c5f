//! Library surface of the command-line front end, exposed for the
//! integration and acceptance tests.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::{load_config, parse_config, OutputFormat, RunConfig};
pub use error::{CliError, CliResult};

/// The bundled sample-repo configuration behind the `table1` subcommand.
pub const TABLE1_CONFIG: &str = include_str!("../../../configs/table1.conf");
