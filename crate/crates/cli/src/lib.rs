//! Command-line front end: sequence files, result records, bundled
//! parameter tables and the subcommands.

pub mod commands;
pub mod error;
pub mod fixtures;
pub mod record;
pub mod replay;
pub mod sequence_file;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
pub use record::ResultRecord;
pub use sequence_file::SequenceFile;
