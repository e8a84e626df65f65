//! Replaying sequences against targets, across conventions and sizes.

use serde::Serialize;
use symctl::gates::{apply_sequence, ExponentSign};
use symctl::{
    fidelity, make_target, Convention, DickeSpace, GateConvention, PulseSequence, QuantumState, RotationComposition,
    SqueezeOrder, Target, TargetSpec,
};

use crate::error::CliResult;

/// Operator normalization plus gate conventions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Setting {
    pub convention: Convention,
    pub gates: GateConvention,
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Setting", 4)?;
        st.serialize_field("convention", self.convention.name())?;
        st.serialize_field("squeeze_order", self.gates.squeeze_order.name())?;
        st.serialize_field("rotation_composition", self.gates.rotation_composition.name())?;
        st.serialize_field("exponent_sign", self.gates.exponent_sign.name())?;
        st.end()
    }
}

/// Every combination, in a fixed order: convention, squeeze order, rotation
/// composition, exponent sign.
pub fn all_settings() -> Vec<Setting> {
    let mut out = Vec::new();
    for &convention in &Convention::ALL {
        for &squeeze_order in SqueezeOrder::ALL {
            for &rotation_composition in RotationComposition::ALL {
                for &exponent_sign in ExponentSign::ALL {
                    out.push(Setting {
                        convention,
                        gates: GateConvention { squeeze_order, rotation_composition, exponent_sign },
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayEntry {
    #[serde(flatten)]
    pub setting: Setting,
    pub fidelity: f64,
}

/// Fidelity of `seq` (run from `|0>`) with `target` under `setting`.
pub fn replay_fidelity(seq: &PulseSequence, target: &QuantumState, setting: Setting) -> CliResult<f64> {
    let space = DickeSpace::with_convention(seq.space.n_emitters(), setting.convention)?;
    let seq = seq.on_space(space).with_convention(setting.gates);
    let out = apply_sequence(&seq, &QuantumState::ground(space))?;
    Ok(fidelity(&out, &target.with_space(space)?)?)
}

/// Replays under every setting; the best entry is the first with the
/// highest fidelity.
pub fn sweep(seq: &PulseSequence, target: &QuantumState) -> CliResult<(Vec<ReplayEntry>, usize)> {
    let entries = all_settings()
        .into_iter()
        .map(|setting| Ok(ReplayEntry { setting, fidelity: replay_fidelity(seq, target, setting)? }))
        .collect::<CliResult<Vec<_>>>()?;
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.fidelity > entries[best].fidelity {
            best = i;
        }
    }
    Ok((entries, best))
}

#[derive(Clone, Debug, Serialize)]
pub struct SizeEntry {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Builds the target at the sequence's own space.
pub fn target_for(seq: &PulseSequence, spec: &TargetSpec) -> CliResult<Target> {
    Ok(make_target(spec, seq.space)?)
}

/// Same parameters replayed at each size against the target rebuilt there.
/// Sizes whose target cannot be built get an error entry.
pub fn size_sweep(seq: &PulseSequence, spec: &TargetSpec, sizes: &[usize]) -> CliResult<Vec<SizeEntry>> {
    let mut out = Vec::with_capacity(sizes.len());
    let setting = Setting { convention: seq.space.convention(), gates: seq.convention };
    for &n in sizes {
        let entry = DickeSpace::with_convention(n, seq.space.convention())
            .and_then(|space| make_target(spec, space).map(|t| (space, t)));
        out.push(match entry {
            Ok((space, target)) => {
                let f = replay_fidelity(&seq.on_space(space), &target.state, setting)?;
                SizeEntry { n, fidelity: Some(f), tail_weight: Some(target.tail_weight), error: None }
            }
            Err(e) => SizeEntry { n, fidelity: None, tail_weight: None, error: Some(e.to_string()) },
        });
    }
    Ok(out)
}

/// Population standard deviation of the fidelities that could be computed.
pub fn fidelity_spread(entries: &[SizeEntry]) -> Option<f64> {
    let f: Vec<f64> = entries.iter().filter_map(|e| e.fidelity).collect();
    if f.is_empty() {
        return None;
    }
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    Some((f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / f.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_are_distinct() {
        let s = all_settings();
        assert_eq!(s.len(), 24);
        for i in 0..s.len() {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn identity_replay_of_ground_state() {
        let space = DickeSpace::new(6).unwrap();
        let seq = PulseSequence::identity(space, 3);
        let (entries, best) = sweep(&seq, &QuantumState::ground(space)).unwrap();
        assert!(entries.iter().all(|e| e.fidelity == 1.0));
        assert_eq!(best, 0);
    }

    #[test]
    fn spread_of_constant_is_zero() {
        let e = |n, f| SizeEntry { n, fidelity: Some(f), tail_weight: None, error: None };
        assert_eq!(fidelity_spread(&[e(1, 0.5), e(2, 0.5)]), Some(0.0));
        assert_eq!(fidelity_spread(&[]), None);
    }
}
