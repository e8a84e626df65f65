//! Published parameter tables shipped with the binary.

use crate::error::{CliError, CliResult};
use crate::sequence_file::SequenceFile;

/// `(name, file contents)` of every bundled sequence.
pub const BUNDLED: [(&str, &str); 4] = [
    ("cat2", include_str!("../fixtures/cat2.toml")),
    ("cat4", include_str!("../fixtures/cat4.toml")),
    ("gkp-hex", include_str!("../fixtures/gkp-hex.toml")),
    ("gkp-square", include_str!("../fixtures/gkp-square.toml")),
];

pub const BUNDLED_PREFIX: &str = "bundled:";

pub fn bundled_text(name: &str) -> CliResult<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
        CliError::Invalid(format!("no bundled sequence `{name}` (available: {})", names.join(", ")))
    })
}

pub fn bundled(name: &str) -> CliResult<SequenceFile> {
    SequenceFile::parse(bundled_text(name)?, &format!("{BUNDLED_PREFIX}{name}"))
}

/// Loads `bundled:NAME` or a path; also returns the raw text for digests.
pub fn load_source(source: &str) -> CliResult<(SequenceFile, String)> {
    if let Some(name) = source.strip_prefix(BUNDLED_PREFIX) {
        let text = bundled_text(name)?;
        return Ok((SequenceFile::parse(text, source)?, text.to_string()));
    }
    let text = std::fs::read_to_string(source).map_err(|e| CliError::Io(format!("{source}: {e}")))?;
    Ok((SequenceFile::parse(&text, source)?, text))
}
