//! TOML pulse-sequence files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use symctl::gates::ExponentSign;
use symctl::io::write_atomic;
use symctl::{
    Convention, DickeSpace, GateConvention, PulseSequence, PulseStep, Rotation, RotationComposition, SqueezeOrder,
};
use toml::Spanned;

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEntry {
    pub axis: Spanned<[f64; 3]>,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationEntry {
    pub axis: Spanned<[f64; 3]>,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    pub format_version: u32,
    pub n_emitters: usize,
    pub convention: Convention,
    pub squeeze_order: SqueezeOrder,
    pub rotation_composition: RotationComposition,
    #[serde(default)]
    pub exponent_sign: ExponentSign,
    pub final_rotation: RotationEntry,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub steps: Vec<StepEntry>,
}

fn spanned<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

/// 1-based line of byte offset `pos` in `text`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl SequenceFile {
    pub fn from_sequence(seq: &PulseSequence, metadata: BTreeMap<String, String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n_emitters: seq.space.n_emitters(),
            convention: seq.space.convention(),
            squeeze_order: seq.convention.squeeze_order,
            rotation_composition: seq.convention.rotation_composition,
            exponent_sign: seq.convention.exponent_sign,
            final_rotation: RotationEntry { axis: spanned(seq.final_rotation.axis), theta: seq.final_rotation.theta },
            metadata,
            steps: seq
                .steps
                .iter()
                .map(|s| StepEntry { axis: spanned(s.axis()), theta: s.theta(), alpha: s.alpha, beta: s.beta })
                .collect(),
        }
    }

    /// Parses and validates; `source` names the input in error messages.
    pub fn parse(text: &str, source: &str) -> CliResult<Self> {
        let file: SequenceFile =
            toml::from_str(text).map_err(|e| CliError::Schema(format!("{source}: {}", e.to_string().trim_end())))?;
        let at = |span: std::ops::Range<usize>, msg: String| {
            CliError::Schema(format!("{source}: line {}: {msg}", line_of(text, span.start)))
        };
        if file.format_version != FORMAT_VERSION {
            return Err(CliError::Schema(format!(
                "{source}: unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.n_emitters == 0 {
            return Err(CliError::Schema(format!("{source}: n_emitters must be at least 1")));
        }
        let check = |axis: &Spanned<[f64; 3]>, nums: &[f64], what: String| -> CliResult<()> {
            let a = axis.get_ref();
            if a.iter().chain(nums).any(|v| !v.is_finite()) {
                return Err(at(axis.span(), format!("{what}: non-finite value")));
            }
            if a.iter().all(|&v| v == 0.0) {
                return Err(at(axis.span(), format!("{what}: zero rotation axis")));
            }
            Ok(())
        };
        for (i, s) in file.steps.iter().enumerate() {
            check(&s.axis, &[s.theta, s.alpha, s.beta], format!("steps[{i}]"))?;
        }
        check(&file.final_rotation.axis, &[file.final_rotation.theta], "final_rotation".into())?;
        Ok(file)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sequence files always serialize")
    }

    /// Atomic write.
    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.to_toml().as_bytes()).map_err(CliError::from)
    }

    pub fn gate_convention(&self) -> GateConvention {
        GateConvention {
            squeeze_order: self.squeeze_order,
            rotation_composition: self.rotation_composition,
            exponent_sign: self.exponent_sign,
        }
    }

    pub fn space(&self) -> CliResult<DickeSpace> {
        Ok(DickeSpace::with_convention(self.n_emitters, self.convention)?)
    }

    pub fn to_sequence(&self) -> CliResult<PulseSequence> {
        let steps = self
            .steps
            .iter()
            .map(|s| PulseStep::new(*s.axis.get_ref(), s.theta, s.alpha, s.beta))
            .collect::<symctl::Result<Vec<_>>>()?;
        let fr = Rotation::new(*self.final_rotation.axis.get_ref(), self.final_rotation.theta)?;
        Ok(PulseSequence::new(self.space()?, steps, fr).with_convention(self.gate_convention()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"format_version = 1
n_emitters = 4
convention = "spin-j"
squeeze_order = "xy"
rotation_composition = "combined-generator"

[final_rotation]
axis = [0.0, 0.0, 1.0]
theta = 0.5

[metadata]
note = "sample"

[[steps]]
axis = [1.0, 0.0, 0.0]
theta = 0.25
alpha = 0.1
beta = -0.2
"#;

    #[test]
    fn parses_and_defaults_sign() {
        let f = SequenceFile::parse(SAMPLE, "sample").unwrap();
        assert_eq!(f.exponent_sign, ExponentSign::Plus);
        let seq = f.to_sequence().unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.steps[0].alpha, 0.1);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let f = SequenceFile::parse(SAMPLE, "sample").unwrap();
        let once = f.to_toml();
        let twice = SequenceFile::parse(&once, "again").unwrap().to_toml();
        assert_eq!(once, twice);
        let from_seq = SequenceFile::from_sequence(&f.to_sequence().unwrap(), f.metadata.clone());
        assert_eq!(SequenceFile::parse(&from_seq.to_toml(), "x").unwrap().to_toml(), from_seq.to_toml());
    }

    #[test]
    fn unknown_field_is_rejected_with_line() {
        let bad = SAMPLE.replace("beta = -0.2", "beta = -0.2\ngamma = 1.0");
        let err = SequenceFile::parse(&bad, "bad").unwrap_err().to_string();
        assert!(err.contains("line 19") && err.contains("gamma"), "{err}");
    }

    #[test]
    fn zero_axis_reports_line() {
        let bad = SAMPLE.replace("axis = [1.0, 0.0, 0.0]", "axis = [0.0, 0.0, 0.0]");
        let err = SequenceFile::parse(&bad, "bad").unwrap_err().to_string();
        assert!(err.contains("line 15") && err.contains("zero rotation axis"), "{err}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let bad = SAMPLE.replace("format_version = 1", "format_version = 2");
        assert!(SequenceFile::parse(&bad, "bad").is_err());
    }
}
