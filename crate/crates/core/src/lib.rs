//! Simulation and control of permutation-symmetric ensembles of two-level
//! emitters: collective-spin operators, rotation and squeezing gates, target
//! states, Wigner functions, Lie-algebra checks and a pulse optimizer.

pub mod algebra;
pub mod dicke;
pub mod error;
pub mod gates;
pub mod io;
pub mod optimizer;
pub mod special;
pub mod targets;
pub mod wigner;

pub use dicke::{
    build_sminus, build_splus, build_sx, build_sy, build_sz, commutator, fidelity, hermitian_exp, Convention,
    DickeSpace, QuantumState, SymmetricOperator, C64,
};
pub use error::{Error, Result};
pub use gates::{
    apply_sequence, flatten_params, rotation_unitary, squeeze_x_unitary, squeeze_y_unitary, step_unitary,
    unflatten_params, GateConvention, PulseSequence, PulseStep, Rotation, RotationComposition, SqueezeOrder,
};
pub use targets::{make_target, GkpCodeword, GkpLattice, LegOrder, Target, TargetSpec};
