//! Collective-spin operators and states on the symmetric (Dicke) subspace.
//!
//! For `N` two-level emitters the permutation-symmetric subspace has
//! dimension `N + 1`. Basis state `|m>` (index `m = 0..=N`) holds `m`
//! excitations, so `|0>` is the all-ground state and `|N>` the all-excited
//! state. Ladder operators follow
//!
//! ```text
//! S+|m> = sqrt((m+1)(N-m)) |m+1>
//! S-|m> = sqrt(m(N-m+1))   |m-1>
//! Sz|m> = (m - N/2)        |m>
//! ```
//!
//! The normalization of `Sx`, `Sy`, `Sz` depends on [`Convention`]: under
//! [`Convention::SpinJ`] they are the spin-`N/2` generators with
//! `[Sx, Sy] = i Sz`, under [`Convention::PauliSum`] they are sums of Pauli
//! matrices (twice as large). `S+` and `S-` are the same in both.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance on state norms and unitarity.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on algebraic identities between operators.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Norm drift accepted by [`SymmetricOperator::apply`] before it errors.
pub const APPLY_DRIFT_TOL: f64 = 1e-8;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Normalization of the Cartesian collective-spin operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `Sx = (S+ + S-)/2`, `Sz|m> = (m - N/2)|m>`.
    #[default]
    SpinJ,
    /// `Sx = S+ + S-`, `Sz|m> = 2(m - N/2)|m>`.
    PauliSum,
}

impl Convention {
    pub const ALL: [Convention; 2] = [Convention::SpinJ, Convention::PauliSum];

    fn factor(self) -> f64 {
        match self {
            Convention::SpinJ => 1.0,
            Convention::PauliSum => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::SpinJ => "spin-j",
            Convention::PauliSum => "pauli-sum",
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin-j" => Ok(Convention::SpinJ),
            "pauli-sum" => Ok(Convention::PauliSum),
            other => Err(Error::Parse {
                what: "convention".into(),
                msg: format!("unknown convention `{other}` (expected spin-j or pauli-sum)"),
            }),
        }
    }
}

/// `N` emitters and the operator normalization shared by everything built
/// on top of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DickeSpace {
    n: usize,
    convention: Convention,
}

impl DickeSpace {
    pub fn new(n_emitters: usize) -> Result<Self> {
        Self::with_convention(n_emitters, Convention::default())
    }

    pub fn with_convention(n_emitters: usize, convention: Convention) -> Result<Self> {
        if n_emitters == 0 {
            return Err(Error::InvalidArgument("need at least one emitter".into()));
        }
        Ok(Self { n: n_emitters, convention })
    }

    pub fn n_emitters(&self) -> usize {
        self.n
    }

    /// Dimension of the symmetric subspace, `N + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Total spin `J = N/2`.
    pub fn spin(&self) -> f64 {
        self.n as f64 / 2.0
    }

    fn check_same(&self, other: &DickeSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(*self, *other))
        }
    }
}

impl fmt::Display for DickeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} ({})", self.n, self.convention)
    }
}

/// Dense operator on the symmetric subspace; rows and columns are indexed
/// by the Dicke label `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricOperator {
    space: DickeSpace,
    matrix: CMatrix,
}

impl SymmetricOperator {
    pub fn from_matrix(space: DickeSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::LengthMismatch { expected: d, got: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: DickeSpace) -> Self {
        Self { space, matrix: CMatrix::identity(space.dim(), space.dim()) }
    }

    pub fn zeros(space: DickeSpace) -> Self {
        Self { space, matrix: CMatrix::zeros(space.dim(), space.dim()) }
    }

    pub fn space(&self) -> DickeSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space, matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { space: self.space, matrix: self.matrix.map(|z| z * c) }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.space);
        for _ in 0..k {
            out.matrix = &out.matrix * &self.matrix;
        }
        out
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest entrywise modulus of `A - A^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.space.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Hermitian to `tol`, scaled by the largest entry when that exceeds one.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol * self.max_abs().max(1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &SymmetricOperator) -> f64 {
        self.matrix.iter().zip(other.matrix.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Hilbert-Schmidt inner product `Tr(A^dagger B)`.
    pub fn hs_inner(&self, other: &SymmetricOperator) -> C64 {
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let d = self.space.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Applies the operator. Pure states map to `A|psi>`, density matrices
    /// to `A rho A^dagger`. The result is not renormalized; a norm (or trace)
    /// drift beyond [`APPLY_DRIFT_TOL`] is reported as an error.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        self.space.check_same(&state.space)?;
        let out = self.apply_raw(state);
        let norm = out.norm_measure();
        if (norm - 1.0).abs() > APPLY_DRIFT_TOL {
            return Err(Error::NormDrift(norm));
        }
        Ok(out)
    }

    /// Applies a possibly non-unitary operator and renormalizes the result.
    pub fn apply_renormalized(&self, state: &QuantumState) -> Result<QuantumState> {
        self.space.check_same(&state.space)?;
        let mut out = self.apply_raw(state);
        let norm = out.norm_measure();
        if norm <= f64::EPSILON {
            return Err(Error::InvalidArgument("operator annihilates the state".into()));
        }
        match &mut out.repr {
            StateRepr::Pure(v) => *v /= C64::new(norm.sqrt(), 0.0),
            StateRepr::Mixed(rho) => *rho /= C64::new(norm, 0.0),
        }
        Ok(out)
    }

    fn apply_raw(&self, state: &QuantumState) -> QuantumState {
        let repr = match &state.repr {
            StateRepr::Pure(v) => StateRepr::Pure(&self.matrix * v),
            StateRepr::Mixed(rho) => StateRepr::Mixed(&self.matrix * rho * self.matrix.adjoint()),
        };
        QuantumState { space: state.space, repr }
    }
}

fn same_space(a: &SymmetricOperator, b: &SymmetricOperator) {
    assert_eq!(a.space, b.space, "operator space mismatch");
}

impl Add for &SymmetricOperator {
    type Output = SymmetricOperator;
    fn add(self, rhs: Self) -> SymmetricOperator {
        same_space(self, rhs);
        SymmetricOperator { space: self.space, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &SymmetricOperator {
    type Output = SymmetricOperator;
    fn sub(self, rhs: Self) -> SymmetricOperator {
        same_space(self, rhs);
        SymmetricOperator { space: self.space, matrix: &self.matrix - &rhs.matrix }
    }
}

impl Mul for &SymmetricOperator {
    type Output = SymmetricOperator;
    fn mul(self, rhs: Self) -> SymmetricOperator {
        same_space(self, rhs);
        SymmetricOperator { space: self.space, matrix: &self.matrix * &rhs.matrix }
    }
}

/// `S+`, independent of the convention.
pub fn build_splus(space: DickeSpace) -> SymmetricOperator {
    let n = space.n_emitters();
    let mut m = CMatrix::zeros(space.dim(), space.dim());
    for k in 0..n {
        m[(k + 1, k)] = C64::new((((k + 1) * (n - k)) as f64).sqrt(), 0.0);
    }
    SymmetricOperator { space, matrix: m }
}

/// `S-`, the adjoint of `S+`.
pub fn build_sminus(space: DickeSpace) -> SymmetricOperator {
    build_splus(space).adjoint()
}

pub fn build_sz(space: DickeSpace) -> SymmetricOperator {
    let f = space.convention().factor();
    let half = space.spin();
    let diag = CVector::from_fn(space.dim(), |m, _| C64::new(f * (m as f64 - half), 0.0));
    SymmetricOperator { space, matrix: CMatrix::from_diagonal(&diag) }
}

pub fn build_sx(space: DickeSpace) -> SymmetricOperator {
    let f = space.convention().factor();
    let sum = &build_splus(space) + &build_sminus(space);
    sum.scale_real(f / 2.0)
}

pub fn build_sy(space: DickeSpace) -> SymmetricOperator {
    let f = space.convention().factor();
    let diff = &build_splus(space) - &build_sminus(space);
    // (S+ - S-) / (2i) under SpinJ
    diff.scale(C64::new(0.0, -f / 2.0))
}

/// `ab - ba`.
pub fn commutator(a: &SymmetricOperator, b: &SymmetricOperator) -> Result<SymmetricOperator> {
    a.space.check_same(&b.space)?;
    Ok(SymmetricOperator { space: a.space, matrix: &a.matrix * &b.matrix - &b.matrix * &a.matrix })
}

/// Eigendecomposition of a Hermitian operator, reusable for many exponentials.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    space: DickeSpace,
    values: Vec<f64>,
    vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &SymmetricOperator) -> Result<Self> {
        if !h.is_hermitian(NORM_TOL) {
            return Err(Error::NotHermitian(h.hermiticity_error()));
        }
        // symmetrize so roundoff asymmetry does not leak into the solver
        let sym = (&h.matrix + h.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        Ok(Self { space: h.space, values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `f(H) = V diag(f(lambda)) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> SymmetricOperator {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let c = f(lam);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= c);
        }
        SymmetricOperator { space: self.space, matrix: scaled * self.vectors.adjoint() }
    }

    /// `exp(scale * H)`.
    pub fn exp(&self, scale: C64) -> SymmetricOperator {
        self.map(|lam| (scale * lam).exp())
    }
}

/// `exp(scale * h)` for Hermitian `h`, through its eigendecomposition.
/// Unitary whenever `scale` is purely imaginary.
pub fn hermitian_exp(h: &SymmetricOperator, scale: C64) -> Result<SymmetricOperator> {
    Ok(HermitianEigen::new(h)?.exp(scale))
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateRepr {
    Pure(CVector),
    Mixed(CMatrix),
}

/// Normalized state over the Dicke basis, pure or mixed.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    space: DickeSpace,
    repr: StateRepr,
}

impl QuantumState {
    /// Pure state from amplitudes that must already be normalized.
    pub fn pure(space: DickeSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::LengthMismatch { expected: space.dim(), got: amplitudes.len() });
        }
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NormDrift(norm));
        }
        Ok(Self { space, repr: StateRepr::Pure(amplitudes) })
    }

    /// Pure state from arbitrary non-zero amplitudes, rescaled to unit norm.
    pub fn normalized(space: DickeSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::LengthMismatch { expected: space.dim(), got: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument(format!("cannot normalize amplitudes with norm {norm}")));
        }
        Ok(Self { space, repr: StateRepr::Pure(amplitudes / C64::new(norm, 0.0)) })
    }

    /// Dicke basis state `|m>`.
    pub fn dicke(space: DickeSpace, m: usize) -> Result<Self> {
        if m > space.n_emitters() {
            return Err(Error::InvalidArgument(format!("|{m}> outside 0..={}", space.n_emitters())));
        }
        let mut v = CVector::zeros(space.dim());
        v[m] = C64::new(1.0, 0.0);
        Ok(Self { space, repr: StateRepr::Pure(v) })
    }

    /// All emitters in the ground state, `|0>`.
    pub fn ground(space: DickeSpace) -> Self {
        Self::dicke(space, 0).expect("|0> always exists")
    }

    pub fn mixed(space: DickeSpace, rho: CMatrix) -> Result<Self> {
        let d = space.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::LengthMismatch { expected: d, got: rho.nrows() });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let op = SymmetricOperator { space, matrix: rho };
        if !op.is_hermitian(NORM_TOL) {
            return Err(Error::InvalidDensity(format!("not Hermitian ({:e})", op.hermiticity_error())));
        }
        let eig = HermitianEigen::new(&op)?;
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -NORM_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { space, repr: StateRepr::Mixed(op.matrix) })
    }

    pub fn maximally_mixed(space: DickeSpace) -> Self {
        let d = space.dim();
        let rho = CMatrix::identity(d, d) / C64::new(d as f64, 0.0);
        Self { space, repr: StateRepr::Mixed(rho) }
    }

    pub fn space(&self) -> DickeSpace {
        self.space
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&CVector> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Pure(v) => v * v.adjoint(),
            StateRepr::Mixed(rho) => rho.clone(),
        }
    }

    /// `<psi|psi>` for pure states, `Tr rho` for mixed ones.
    pub fn norm_measure(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => v.norm_squared(),
            StateRepr::Mixed(rho) => rho.trace().re,
        }
    }

    /// Expectation value `<A>`.
    pub fn expectation(&self, op: &SymmetricOperator) -> Result<C64> {
        self.space.check_same(&op.space)?;
        Ok(match &self.repr {
            StateRepr::Pure(v) => v.dotc(&(&op.matrix * v)),
            StateRepr::Mixed(rho) => (rho * &op.matrix).trace(),
        })
    }

    /// Same amplitudes reinterpreted in a space with the same dimension.
    pub fn with_space(&self, space: DickeSpace) -> Result<Self> {
        if space.dim() != self.space.dim() {
            return Err(Error::SpaceMismatch(self.space, space));
        }
        Ok(Self { space, repr: self.repr.clone() })
    }
}

/// Pure/pure: `|<a|b>|^2`; pure/mixed: `<a|rho|a>`; mixed/mixed: Uhlmann
/// fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    a.space.check_same(&b.space)?;
    let f = match (&a.repr, &b.repr) {
        (StateRepr::Pure(u), StateRepr::Pure(v)) => u.dotc(v).norm_sqr(),
        (StateRepr::Pure(u), StateRepr::Mixed(rho)) | (StateRepr::Mixed(rho), StateRepr::Pure(u)) => {
            u.dotc(&(rho * u)).re
        }
        (StateRepr::Mixed(rho), StateRepr::Mixed(sigma)) => uhlmann(a.space, rho, sigma)?,
    };
    Ok(f.clamp(0.0, 1.0))
}

fn uhlmann(space: DickeSpace, rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let root = HermitianEigen::new(&SymmetricOperator { space, matrix: rho.clone() })?
        .map(|lam| C64::new(lam.max(0.0).sqrt(), 0.0));
    let inner = &root.matrix * sigma * &root.matrix;
    let eig = HermitianEigen::new(&SymmetricOperator { space, matrix: inner })?;
    let tr: f64 = eig.values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok(tr * tr)
}

/// `c_n = sqrt(n! N! / (N-n)!)`, the norm of `S+^n |0>`.
pub fn ladder_norm(n_emitters: usize, n: usize) -> f64 {
    assert!(n <= n_emitters);
    let log: f64 = (n_emitters - n + 1..=n_emitters).map(|k| (k as f64).ln()).sum::<f64>()
        + (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    (0.5 * log).exp()
}
