//! Rotation and squeezing gates, pulse sequences and their application.
//!
//! A pulse step applies a collective rotation `exp(i s theta n.S)` and then
//! the squeezes `exp(i s alpha Sx^2)`, `exp(i s beta Sy^2)`, where `s = +1`
//! unless [`ExponentSign::Minus`] is selected. A sequence is `M` steps
//! followed by one more rotation without squeezing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dicke::{
    build_sx, build_sy, build_sz, CMatrix, CVector, DickeSpace, HermitianEigen, QuantumState, StateRepr,
    SymmetricOperator, I, NORM_TOL,
};
use crate::error::{Error, Result};

/// How the two squeezes of a step are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SqueezeOrder {
    /// `exp(i beta Sy^2) exp(i alpha Sx^2)`: the `Sx^2` squeeze acts first.
    #[default]
    Xy,
    /// `exp(i alpha Sx^2) exp(i beta Sy^2)`.
    Yx,
    /// Single exponential `exp(i (alpha Sx^2 + beta Sy^2))`.
    Joint,
}

/// How a rotation given by per-axis angles becomes a unitary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationComposition {
    /// `exp(i (tx Sx + ty Sy + tz Sz))`.
    #[default]
    #[serde(rename = "combined-generator", alias = "combined")]
    Combined,
    /// `exp(i tz Sz) exp(i ty Sy) exp(i tx Sx)`: the x rotation acts first.
    #[serde(rename = "per-axis-product", alias = "product")]
    Product,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentSign {
    /// `exp(+i ...)`.
    #[default]
    Plus,
    /// `exp(-i ...)`.
    Minus,
}

impl ExponentSign {
    fn value(self) -> f64 {
        match self {
            ExponentSign::Plus => 1.0,
            ExponentSign::Minus => -1.0,
        }
    }
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, $( $var:ident => [$name:literal $(, $alias:literal)*] ),+ $(,)?) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$var),+];

            pub fn name(self) -> &'static str {
                match self { $($ty::$var => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name $(| $alias)* => Ok($ty::$var),)+
                    other => Err(Error::Parse {
                        what: $what.into(),
                        msg: format!("unknown value `{other}`"),
                    }),
                }
            }
        }
    };
}

named_enum!(SqueezeOrder, "squeeze order", Xy => ["xy"], Yx => ["yx"], Joint => ["joint"]);
named_enum!(
    RotationComposition,
    "rotation composition",
    Combined => ["combined-generator", "combined"],
    Product => ["per-axis-product", "product"],
);
named_enum!(ExponentSign, "exponent sign", Plus => ["plus", "+"], Minus => ["minus", "-"]);

/// Gate-level conventions that are not fixed by the operator normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct GateConvention {
    pub squeeze_order: SqueezeOrder,
    pub rotation_composition: RotationComposition,
    pub exponent_sign: ExponentSign,
}

impl fmt::Display for GateConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "squeeze={} rotation={} sign={}", self.squeeze_order, self.rotation_composition, self.exponent_sign)
    }
}

fn normalize_axis(axis: [f64; 3]) -> Result<[f64; 3]> {
    let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroAxis);
    }
    Ok(axis.map(|a| a / norm))
}

/// Axis-angle rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub axis: [f64; 3],
    pub theta: f64,
}

impl Rotation {
    /// Normalizes `axis`; a zero axis is an error.
    pub fn new(axis: [f64; 3], theta: f64) -> Result<Self> {
        Ok(Self { axis: normalize_axis(axis)?, theta })
    }

    pub fn identity() -> Self {
        Self { axis: [0.0, 0.0, 1.0], theta: 0.0 }
    }

    /// From per-axis angles `(tx, ty, tz) = theta * n`. The zero vector maps to
    /// the identity about `z`.
    pub fn from_angles(angles: [f64; 3]) -> Self {
        let theta = angles.iter().map(|a| a * a).sum::<f64>().sqrt();
        if theta == 0.0 {
            return Self::identity();
        }
        Self { axis: angles.map(|a| a / theta), theta }
    }

    pub fn angles(&self) -> [f64; 3] {
        self.axis.map(|a| a * self.theta)
    }

    pub fn is_identity(&self) -> bool {
        self.theta == 0.0
    }
}

/// One pulse: a rotation followed by the two squeezes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseStep {
    pub rotation: Rotation,
    pub alpha: f64,
    pub beta: f64,
}

impl PulseStep {
    pub fn new(axis: [f64; 3], theta: f64, alpha: f64, beta: f64) -> Result<Self> {
        Ok(Self { rotation: Rotation::new(axis, theta)?, alpha, beta })
    }

    /// The zero step, which acts as the identity.
    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(), alpha: 0.0, beta: 0.0 }
    }

    pub fn axis(&self) -> [f64; 3] {
        self.rotation.axis
    }

    pub fn theta(&self) -> f64 {
        self.rotation.theta
    }

    pub fn is_identity(&self) -> bool {
        self.rotation.is_identity() && self.alpha == 0.0 && self.beta == 0.0
    }
}

/// Ordered pulses plus a final rotation, tied to a space and gate conventions.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub space: DickeSpace,
    pub convention: GateConvention,
    pub steps: Vec<PulseStep>,
    pub final_rotation: Rotation,
}

impl PulseSequence {
    pub fn new(space: DickeSpace, steps: Vec<PulseStep>, final_rotation: Rotation) -> Self {
        Self { space, convention: GateConvention::default(), steps, final_rotation }
    }

    /// `m` zero steps and an identity final rotation.
    pub fn identity(space: DickeSpace, m: usize) -> Self {
        Self::new(space, vec![PulseStep::identity(); m], Rotation::identity())
    }

    pub fn with_convention(mut self, convention: GateConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Same parameters on a different space (size sweeps, convention sweeps).
    pub fn on_space(&self, space: DickeSpace) -> Self {
        Self { space, ..self.clone() }
    }

    /// Inserts a zero step before position `index`.
    pub fn insert_identity(&mut self, index: usize) -> Result<()> {
        if index > self.steps.len() {
            return Err(Error::InvalidArgument(format!(
                "insert position {index} outside 0..={}",
                self.steps.len()
            )));
        }
        self.steps.insert(index, PulseStep::identity());
        Ok(())
    }
}

/// Number of optimizer parameters for `m` steps.
pub fn param_count(m: usize) -> usize {
    5 * m + 3
}

/// Per step `[tx, ty, tz, alpha, beta]`, then the final `[tx, ty, tz]`.
pub fn flatten_params(seq: &PulseSequence) -> Vec<f64> {
    let mut out = Vec::with_capacity(param_count(seq.steps.len()));
    for step in &seq.steps {
        out.extend_from_slice(&step.rotation.angles());
        out.push(step.alpha);
        out.push(step.beta);
    }
    out.extend_from_slice(&seq.final_rotation.angles());
    out
}

/// Inverse of [`flatten_params`]; the sequence gets the default gate convention.
pub fn unflatten_params(space: DickeSpace, m: usize, v: &[f64]) -> Result<PulseSequence> {
    if v.len() != param_count(m) {
        return Err(Error::LengthMismatch { expected: param_count(m), got: v.len() });
    }
    let steps = v[..5 * m]
        .chunks_exact(5)
        .map(|c| PulseStep { rotation: Rotation::from_angles([c[0], c[1], c[2]]), alpha: c[3], beta: c[4] })
        .collect();
    let f = &v[5 * m..];
    Ok(PulseSequence::new(space, steps, Rotation::from_angles([f[0], f[1], f[2]])))
}

/// Collective-spin operators of one space with cached eigendecompositions,
/// so that repeated gate evaluation only pays for what changes.
#[derive(Clone, Debug)]
pub struct GateSet {
    space: DickeSpace,
    sx: SymmetricOperator,
    sy: SymmetricOperator,
    sz: SymmetricOperator,
    eig_x: HermitianEigen,
    eig_y: HermitianEigen,
    sx2: SymmetricOperator,
    sy2: SymmetricOperator,
}

impl GateSet {
    pub fn new(space: DickeSpace) -> Self {
        let sx = build_sx(space);
        let sy = build_sy(space);
        let sz = build_sz(space);
        let eig_x = HermitianEigen::new(&sx).expect("Sx is Hermitian");
        let eig_y = HermitianEigen::new(&sy).expect("Sy is Hermitian");
        let sx2 = &sx * &sx;
        let sy2 = &sy * &sy;
        Self { space, sx, sy, sz, eig_x, eig_y, sx2, sy2 }
    }

    pub fn space(&self) -> DickeSpace {
        self.space
    }

    fn diag_z(&self, angle: f64) -> SymmetricOperator {
        let diag = CVector::from_fn(self.space.dim(), |k, _| (I * angle * self.sz.entry(k, k).re).exp());
        SymmetricOperator::from_matrix(self.space, CMatrix::from_diagonal(&diag)).expect("square")
    }

    /// `exp(i s theta n.S)`, composed according to `conv`.
    pub fn rotation(&self, rot: &Rotation, conv: &GateConvention) -> SymmetricOperator {
        if rot.is_identity() {
            return SymmetricOperator::identity(self.space);
        }
        let s = conv.exponent_sign.value();
        let [tx, ty, tz] = rot.angles();
        match conv.rotation_composition {
            RotationComposition::Combined => {
                let h = &(&self.sx.scale_real(tx) + &self.sy.scale_real(ty)) + &self.sz.scale_real(tz);
                HermitianEigen::new(&h).expect("real combination of Hermitian operators").exp(I * s)
            }
            RotationComposition::Product => {
                let ux = self.eig_x.exp(I * (s * tx));
                let uy = self.eig_y.exp(I * (s * ty));
                let uz = self.diag_z(s * tz);
                &(&uz * &uy) * &ux
            }
        }
    }

    pub fn squeeze_x(&self, alpha: f64, sign: ExponentSign) -> SymmetricOperator {
        if alpha == 0.0 {
            return SymmetricOperator::identity(self.space);
        }
        let phase = sign.value() * alpha;
        self.eig_x.map(|l| (I * (phase * l * l)).exp())
    }

    pub fn squeeze_y(&self, beta: f64, sign: ExponentSign) -> SymmetricOperator {
        if beta == 0.0 {
            return SymmetricOperator::identity(self.space);
        }
        let phase = sign.value() * beta;
        self.eig_y.map(|l| (I * (phase * l * l)).exp())
    }

    /// The squeezing part of a step.
    pub fn squeeze(&self, alpha: f64, beta: f64, conv: &GateConvention) -> SymmetricOperator {
        let sign = conv.exponent_sign;
        if alpha == 0.0 && beta == 0.0 {
            return SymmetricOperator::identity(self.space);
        }
        match conv.squeeze_order {
            SqueezeOrder::Xy => &self.squeeze_y(beta, sign) * &self.squeeze_x(alpha, sign),
            SqueezeOrder::Yx => &self.squeeze_x(alpha, sign) * &self.squeeze_y(beta, sign),
            SqueezeOrder::Joint => {
                if beta == 0.0 {
                    return self.squeeze_x(alpha, sign);
                }
                if alpha == 0.0 {
                    return self.squeeze_y(beta, sign);
                }
                let h = &self.sx2.scale_real(alpha) + &self.sy2.scale_real(beta);
                HermitianEigen::new(&h).expect("Hermitian").exp(I * sign.value())
            }
        }
    }

    /// Squeeze after rotation: `squeeze * rotation`.
    pub fn step(&self, step: &PulseStep, conv: &GateConvention) -> SymmetricOperator {
        let rot = self.rotation(&step.rotation, conv);
        if step.alpha == 0.0 && step.beta == 0.0 {
            return rot;
        }
        let sq = self.squeeze(step.alpha, step.beta, conv);
        if step.rotation.is_identity() {
            return sq;
        }
        &sq * &rot
    }

    /// Final state amplitudes after each step and after the final rotation
    /// (`M + 1` vectors). Identity steps are skipped without arithmetic.
    pub fn trajectory(&self, seq: &PulseSequence, initial: &CVector) -> Vec<CVector> {
        let mut out = Vec::with_capacity(seq.steps.len() + 1);
        let mut psi = initial.clone();
        for step in &seq.steps {
            if !step.is_identity() {
                psi = self.step(step, &seq.convention).matrix() * &psi;
            }
            out.push(psi.clone());
        }
        if !seq.final_rotation.is_identity() {
            psi = self.rotation(&seq.final_rotation, &seq.convention).matrix() * &psi;
        }
        out.push(psi);
        out
    }

    /// Amplitudes after the whole sequence.
    pub fn evolve(&self, seq: &PulseSequence, initial: &CVector) -> CVector {
        let mut psi = initial.clone();
        for step in &seq.steps {
            if !step.is_identity() {
                psi = self.step(step, &seq.convention).matrix() * &psi;
            }
        }
        if !seq.final_rotation.is_identity() {
            psi = self.rotation(&seq.final_rotation, &seq.convention).matrix() * &psi;
        }
        psi
    }

    /// Unitary of the whole sequence.
    pub fn sequence_unitary(&self, seq: &PulseSequence) -> SymmetricOperator {
        let mut u = SymmetricOperator::identity(self.space);
        for step in &seq.steps {
            if !step.is_identity() {
                u = &self.step(step, &seq.convention) * &u;
            }
        }
        if !seq.final_rotation.is_identity() {
            u = &self.rotation(&seq.final_rotation, &seq.convention) * &u;
        }
        u
    }
}

/// `exp(+i theta n.S)` with the default gate convention.
pub fn rotation_unitary(space: DickeSpace, axis: [f64; 3], theta: f64) -> Result<SymmetricOperator> {
    let rot = Rotation::new(axis, theta)?;
    Ok(GateSet::new(space).rotation(&rot, &GateConvention::default()))
}

/// `exp(+i alpha Sx^2)`.
pub fn squeeze_x_unitary(space: DickeSpace, alpha: f64) -> SymmetricOperator {
    GateSet::new(space).squeeze_x(alpha, ExponentSign::Plus)
}

/// `exp(+i beta Sy^2)`.
pub fn squeeze_y_unitary(space: DickeSpace, beta: f64) -> SymmetricOperator {
    GateSet::new(space).squeeze_y(beta, ExponentSign::Plus)
}

/// Step unitary with the default gate convention.
pub fn step_unitary(step: &PulseStep, space: DickeSpace) -> SymmetricOperator {
    GateSet::new(space).step(step, &GateConvention::default())
}

fn check_norm(psi: &CVector) -> Result<()> {
    let n = psi.norm_squared();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NormDrift(n));
    }
    Ok(())
}

/// Applies the sequence (with its own conventions) to `initial`.
pub fn apply_sequence(seq: &PulseSequence, initial: &QuantumState) -> Result<QuantumState> {
    if seq.space.dim() != initial.space().dim() || seq.space.convention() != initial.space().convention() {
        return Err(Error::SpaceMismatch(seq.space, initial.space()));
    }
    let gates = GateSet::new(seq.space);
    match initial.repr() {
        StateRepr::Pure(v) => {
            let psi = gates.evolve(seq, v);
            check_norm(&psi)?;
            QuantumState::pure(seq.space, psi)
        }
        StateRepr::Mixed(_) => gates.sequence_unitary(seq).apply(initial),
    }
}

/// States after each step and after the final rotation, for pure `initial`.
pub fn sequence_states(seq: &PulseSequence, initial: &QuantumState) -> Result<Vec<QuantumState>> {
    let v = initial
        .amplitudes()
        .ok_or_else(|| Error::InvalidArgument("per-step states need a pure initial state".into()))?;
    if seq.space != initial.space() {
        return Err(Error::SpaceMismatch(seq.space, initial.space()));
    }
    GateSet::new(seq.space)
        .trajectory(seq, v)
        .into_iter()
        .map(|psi| {
            check_norm(&psi)?;
            QuantumState::pure(seq.space, psi)
        })
        .collect()
}

/// Largest deviation of `U^dagger U` from the identity; used as a sanity
/// check on replayed gates.
pub fn is_unitary(u: &SymmetricOperator) -> bool {
    u.unitarity_error() < NORM_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{fidelity, hermitian_exp, Convention, C64};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn space(n: usize) -> DickeSpace {
        DickeSpace::new(n).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn zero_rotation_is_identity() {
        let s = space(3);
        let u = rotation_unitary(s, [1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(u, SymmetricOperator::identity(s));
        assert!(matches!(rotation_unitary(s, [0.0; 3], 1.0), Err(Error::ZeroAxis)));
    }

    #[test]
    fn z_rotation_is_diagonal() {
        let s = space(2);
        let theta = 0.7;
        let u = rotation_unitary(s, [0.0, 0.0, 1.0], theta).unwrap();
        let expected = [(-I * theta).exp(), c(1.0), (I * theta).exp()];
        for (k, e) in expected.iter().enumerate() {
            assert!((u.entry(k, k) - e).norm() < 1e-12);
        }
    }

    #[test]
    fn y_pi_rotation_flips() {
        for n in [2, 7] {
            let s = space(n);
            let u = rotation_unitary(s, [0.0, 1.0, 0.0], PI).unwrap();
            let direct = hermitian_exp(&build_sy(s), I * PI).unwrap();
            assert!(u.max_abs_diff(&direct) < 1e-12);
            assert!((u.entry(n, 0).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn squeeze_identities() {
        let s = space(4);
        assert_eq!(squeeze_x_unitary(s, 0.0), SymmetricOperator::identity(s));
        let one = squeeze_x_unitary(space(1), 0.9);
        let phase = (I * 0.9 / 4.0).exp();
        let expected = SymmetricOperator::identity(space(1)).scale(phase);
        assert!(one.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn squeezes_do_not_commute() {
        // for spin 1 the squares Sx^2 and Sy^2 commute, so N = 2 is the exception
        let s = space(2);
        let (x, y) = (squeeze_x_unitary(s, 0.5), squeeze_y_unitary(s, 0.5));
        assert!((&x * &y).max_abs_diff(&(&y * &x)) < 1e-12);
        for n in [3, 4, 10] {
            let s = space(n);
            let (x, y) = (squeeze_x_unitary(s, 0.5), squeeze_y_unitary(s, 0.5));
            assert!((&x * &y).max_abs_diff(&(&y * &x)) > 1e-3);
        }
    }

    #[test]
    fn squeeze_matches_direct_exponential() {
        let s = space(5);
        let sx = build_sx(s);
        let direct = hermitian_exp(&(&sx * &sx), I * 0.37).unwrap();
        assert!(squeeze_x_unitary(s, 0.37).max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn step_reductions() {
        let s = space(3);
        let rot_only = PulseStep::new([1.0, -1.0, 0.5], 1.1, 0.0, 0.0).unwrap();
        assert_eq!(step_unitary(&rot_only, s), rotation_unitary(s, [1.0, -1.0, 0.5], 1.1).unwrap());
        let sq_only = PulseStep::new([0.0, 0.0, 1.0], 0.0, 0.4, -0.2).unwrap();
        let gates = GateSet::new(s);
        let expected = gates.squeeze(0.4, -0.2, &GateConvention::default());
        assert_eq!(step_unitary(&sq_only, s), expected);
        assert_eq!(step_unitary(&PulseStep::identity(), s), SymmetricOperator::identity(s));
    }

    #[test]
    fn step_ordering_rotation_first() {
        let s = space(3);
        let step = PulseStep::new([0.3, 0.1, 0.9], 0.8, 0.6, -0.4).unwrap();
        let rot = rotation_unitary(s, step.axis(), step.theta()).unwrap();
        let expected = &(&squeeze_y_unitary(s, -0.4) * &squeeze_x_unitary(s, 0.6)) * &rot;
        assert!(step_unitary(&step, s).max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn product_composition_order() {
        let s = space(3);
        let conv = GateConvention { rotation_composition: RotationComposition::Product, ..Default::default() };
        let rot = Rotation::from_angles([0.2, -0.5, 0.9]);
        let u = GateSet::new(s).rotation(&rot, &conv);
        let ux = hermitian_exp(&build_sx(s), I * 0.2).unwrap();
        let uy = hermitian_exp(&build_sy(s), I * -0.5).unwrap();
        let uz = hermitian_exp(&build_sz(s), I * 0.9).unwrap();
        assert!(u.max_abs_diff(&(&(&uz * &uy) * &ux)) < 1e-12);
    }

    #[test]
    fn joint_and_minus_conventions() {
        let s = space(4);
        let conv = GateConvention {
            squeeze_order: SqueezeOrder::Joint,
            exponent_sign: ExponentSign::Minus,
            ..Default::default()
        };
        let (sx, sy) = (build_sx(s), build_sy(s));
        let h = &(&sx * &sx).scale_real(0.3) + &(&sy * &sy).scale_real(-0.8);
        let direct = hermitian_exp(&h, -I).unwrap();
        assert!(GateSet::new(s).squeeze(0.3, -0.8, &conv).max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn flatten_length_and_zero() {
        let s = space(4);
        let seq = PulseSequence::identity(s, 2);
        let v = flatten_params(&seq);
        assert_eq!(v.len(), 13);
        assert!(v.iter().all(|&x| x == 0.0));
        let back = unflatten_params(s, 2, &v).unwrap();
        let psi = apply_sequence(&back, &QuantumState::ground(s)).unwrap();
        assert_eq!(psi, QuantumState::ground(s));
        assert!(unflatten_params(s, 2, &v[..12]).is_err());
    }

    #[test]
    fn empty_sequence_is_identity() {
        let s = space(5);
        let init = QuantumState::dicke(s, 2).unwrap();
        let seq = PulseSequence::identity(s, 0);
        assert_eq!(apply_sequence(&seq, &init).unwrap(), init);
    }

    #[test]
    fn flip_sequence() {
        let s = space(6);
        let seq = PulseSequence::new(
            s,
            vec![PulseStep::new([0.0, 1.0, 0.0], PI, 0.0, 0.0).unwrap()],
            Rotation::identity(),
        );
        let out = apply_sequence(&seq, &QuantumState::ground(s)).unwrap();
        assert!((fidelity(&out, &QuantumState::dicke(s, 6).unwrap()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sequence_states_count() {
        let s = space(3);
        let seq = PulseSequence::new(
            s,
            vec![PulseStep::new([1.0, 0.0, 0.0], 0.4, 0.1, 0.2).unwrap(); 4],
            Rotation::new([0.0, 1.0, 0.0], 0.3).unwrap(),
        );
        let states = sequence_states(&seq, &QuantumState::ground(s)).unwrap();
        assert_eq!(states.len(), 5);
        assert_eq!(states[4], apply_sequence(&seq, &QuantumState::ground(s)).unwrap());
    }

    #[test]
    fn mixed_initial_state() {
        let s = space(3);
        let seq = PulseSequence::new(
            s,
            vec![PulseStep::new([1.0, 0.2, 0.0], 0.4, 0.1, 0.2).unwrap()],
            Rotation::new([0.0, 1.0, 0.0], 0.3).unwrap(),
        );
        let pure = apply_sequence(&seq, &QuantumState::ground(s)).unwrap();
        let rho = QuantumState::mixed(s, QuantumState::ground(s).density_matrix()).unwrap();
        let mixed = apply_sequence(&seq, &rho).unwrap();
        assert!((fidelity(&pure, &mixed).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pauli_sum_doubles_angles() {
        let j = space(3);
        let p = DickeSpace::with_convention(3, Convention::PauliSum).unwrap();
        let rot = Rotation::new([0.2, 0.4, 0.1], 0.35).unwrap();
        let conv = GateConvention::default();
        let uj = GateSet::new(j).rotation(&Rotation { theta: 0.7, ..rot }, &conv);
        let up = GateSet::new(p).rotation(&rot, &conv);
        assert!(uj.matrix().iter().zip(up.matrix().iter()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    fn arb_params(m: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, param_count(m))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unitaries_are_unitary(n in 1usize..9, v in arb_params(2), order in 0usize..3, comp in 0usize..2, sign in 0usize..2) {
            let s = space(n);
            let conv = GateConvention {
                squeeze_order: SqueezeOrder::ALL[order],
                rotation_composition: RotationComposition::ALL[comp],
                exponent_sign: ExponentSign::ALL[sign],
            };
            let seq = unflatten_params(s, 2, &v).unwrap().with_convention(conv);
            let gates = GateSet::new(s);
            for step in &seq.steps {
                prop_assert!(gates.step(step, &conv).unitarity_error() < 1e-10);
            }
            prop_assert!(gates.sequence_unitary(&seq).unitarity_error() < 1e-10);
        }

        #[test]
        fn flatten_round_trip(n in 1usize..7, v in arb_params(3)) {
            let s = space(n);
            let seq = unflatten_params(s, 3, &v).unwrap();
            let again = unflatten_params(s, 3, &flatten_params(&seq)).unwrap();
            let gates = GateSet::new(s);
            for (a, b) in seq.steps.iter().zip(&again.steps) {
                let conv = GateConvention::default();
                prop_assert!(gates.step(a, &conv).max_abs_diff(&gates.step(b, &conv)) < 1e-12);
            }
        }

        #[test]
        fn identity_insertion_is_exact(n in 1usize..7, v in arb_params(2), pos in 0usize..3) {
            let s = space(n);
            let seq = unflatten_params(s, 2, &v).unwrap();
            let mut grown = seq.clone();
            grown.insert_identity(pos).unwrap();
            let init = QuantumState::ground(s);
            prop_assert_eq!(apply_sequence(&seq, &init).unwrap(), apply_sequence(&grown, &init).unwrap());
        }
    }
}
