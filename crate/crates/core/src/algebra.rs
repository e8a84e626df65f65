//! Lie-algebra closure, product formulas and synthesis by powers of `S+`.

use serde::Serialize;

use crate::dicke::{
    build_sminus, build_splus, commutator, hermitian_exp, ladder_norm, CMatrix, CVector, DickeSpace, QuantumState,
    SymmetricOperator, C64, I, NORM_TOL,
};
use crate::error::{Error, Result};

/// Default threshold for accepting a new direction, relative to the largest
/// Hilbert-Schmidt norm met so far.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureReport {
    pub generator_count: usize,
    /// Dimension of the real span reached, identity direction included.
    pub reached_dimension: usize,
    /// Dimension of the traceless part of that span.
    pub traceless_dimension: usize,
    /// `d^2 - 1` for matrices of size `d`.
    pub target_dimension: usize,
    /// Bracket rounds performed.
    pub iterations: usize,
    /// False when the round limit stopped the closure before it saturated.
    pub converged: bool,
    pub universal: bool,
    pub rank_tolerance: f64,
    /// Oscillator runs only: new directions produced by one bracket pass of
    /// the plainly truncated basis (finite-cutoff artifacts).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_artifacts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

/// Orthonormal basis (under `Re Tr(A^dagger B)`) of a real span of Hermitian
/// matrices. The inner product may be restricted to the leading `mask x mask`
/// block, in which case the full matrices are kept for further brackets.
struct SpanBasis {
    mask: usize,
    full: Vec<CMatrix>,
    vecs: Vec<Vec<f64>>,
    rank_tol: f64,
    scale: f64,
}

impl SpanBasis {
    fn new(mask: usize, rank_tol: f64) -> Self {
        Self { mask, full: Vec::new(), vecs: Vec::new(), rank_tol, scale: 0.0 }
    }

    fn vectorize(&self, m: &CMatrix) -> Vec<f64> {
        let k = self.mask;
        let mut v = Vec::with_capacity(2 * k * k);
        for j in 0..k {
            for i in 0..k {
                v.push(m[(i, j)].re);
                v.push(m[(i, j)].im);
            }
        }
        v
    }

    fn dim(&self) -> usize {
        self.vecs.len()
    }

    /// Residual of `m` after projecting out the span (two Gram-Schmidt
    /// passes), with the coefficients used.
    fn residual(&self, m: &CMatrix) -> (Vec<f64>, Vec<f64>) {
        let mut v = self.vectorize(m);
        let mut coeffs = vec![0.0; self.vecs.len()];
        for _ in 0..2 {
            for (c, b) in coeffs.iter_mut().zip(&self.vecs) {
                let proj: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                *c += proj;
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        (v, coeffs)
    }

    /// Norm of the component of `m` outside the span, relative to its own norm.
    fn relative_residual(&self, m: &CMatrix) -> f64 {
        let norm = norm2(&self.vectorize(m));
        if norm == 0.0 {
            return 0.0;
        }
        norm2(&self.residual(m).0) / norm
    }

    /// Adds `m` when it has a component above `rank_tol * scale` outside the
    /// span; returns whether it did.
    fn try_add(&mut self, m: CMatrix) -> bool {
        let raw = norm2(&self.vectorize(&m));
        self.scale = self.scale.max(raw);
        let (res, coeffs) = self.residual(&m);
        let r = norm2(&res);
        if r <= self.rank_tol * self.scale.max(f64::MIN_POSITIVE) || r == 0.0 {
            return false;
        }
        let mut full = m;
        for (c, b) in coeffs.iter().zip(&self.full) {
            full -= b * C64::new(*c, 0.0);
        }
        full /= C64::new(r, 0.0);
        self.full.push(full);
        self.vecs.push(res.into_iter().map(|x| x / r).collect());
        true
    }

    fn has_trace(&self) -> bool {
        let k = self.mask;
        self.full.iter().any(|m| {
            let tr: C64 = (0..k).map(|i| m[(i, i)]).sum();
            tr.norm() > 1e-10
        })
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `i [a, b]`, Hermitian whenever `a` and `b` are.
fn bracket(a: &CMatrix, b: &CMatrix) -> CMatrix {
    (a * b - b * a) * I
}

/// Breadth-first closure: each round brackets the elements added in the
/// previous round with every element of the basis.
fn close(basis: &mut SpanBasis, max_rounds: usize, cap: usize) -> (usize, bool) {
    let mut frontier: Vec<usize> = (0..basis.dim()).collect();
    let mut rounds = 0;
    while !frontier.is_empty() {
        if rounds == max_rounds || basis.dim() >= cap {
            return (rounds, basis.dim() >= cap);
        }
        rounds += 1;
        let start = basis.dim();
        for &i in &frontier {
            let mut j = 0;
            while j < basis.dim() {
                if j != i {
                    let c = bracket(&basis.full[i], &basis.full[j]);
                    basis.try_add(c);
                }
                j += 1;
            }
        }
        frontier = (start..basis.dim()).collect();
    }
    (rounds, true)
}

/// Real Lie algebra generated by Hermitian `generators` under `i[.,.]`.
pub struct LieClosure {
    basis: SpanBasis,
    pub report: ClosureReport,
}

impl LieClosure {
    pub fn new(generators: &[SymmetricOperator], rank_tol: f64) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::InvalidArgument("closure needs at least one generator".into()))?;
        let space = first.space();
        for g in generators {
            if g.space() != space {
                return Err(Error::SpaceMismatch(space, g.space()));
            }
            if !g.is_hermitian(NORM_TOL) {
                return Err(Error::NotHermitian(g.hermiticity_error()));
            }
        }
        let d = space.dim();
        let mut basis = SpanBasis::new(d, rank_tol);
        for g in generators {
            basis.try_add(g.matrix().clone());
        }
        let (iterations, converged) = close(&mut basis, usize::MAX, d * d);
        let reached = basis.dim();
        let traceless = reached - usize::from(basis.has_trace());
        let report = ClosureReport {
            generator_count: generators.len(),
            reached_dimension: reached,
            traceless_dimension: traceless,
            target_dimension: d * d - 1,
            iterations,
            converged,
            universal: traceless == d * d - 1,
            rank_tolerance: rank_tol,
            truncation_artifacts: None,
            cutoff: None,
        };
        Ok(Self { basis, report })
    }

    /// Norm of the part of `op` outside the closure, relative to `op`'s norm.
    pub fn residual(&self, op: &SymmetricOperator) -> f64 {
        self.basis.relative_residual(op.matrix())
    }

    pub fn dimension(&self) -> usize {
        self.basis.dim()
    }
}

/// Closure report for Hermitian `generators`.
pub fn lie_closure(generators: &[SymmetricOperator], rank_tol: f64) -> Result<ClosureReport> {
    Ok(LieClosure::new(generators, rank_tol)?.report)
}

/// Oscillator generator sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscillatorSet {
    /// `{x, p, x^2, p^2, (xp + px)/2}`.
    Gaussian,
    /// The Gaussian set plus `x^3`.
    WithCubic,
}

/// Matrix elements of polynomials in `x` and `p` truncated to `n` Fock
/// states, each computed from the untruncated operator.
struct Oscillator {
    n: usize,
}

impl Oscillator {
    fn a(&self, extra: usize) -> CMatrix {
        // annihilation operator on n + extra states
        let m = self.n + extra;
        let mut a = CMatrix::zeros(m, m);
        for k in 1..m {
            a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        a
    }

    /// `f(a, a^dagger)` evaluated with enough padding that the leading
    /// `n x n` block is exact, then cut down.
    fn exact(&self, degree: usize, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> CMatrix {
        let a = self.a(degree + 1);
        let ad = a.adjoint();
        f(&a, &ad).view((0, 0), (self.n, self.n)).into_owned()
    }

    fn x(&self) -> CMatrix {
        self.exact(1, |a, ad| (a + ad) / C64::new(2f64.sqrt(), 0.0))
    }

    fn p(&self) -> CMatrix {
        self.exact(1, |a, ad| (ad - a) * C64::new(0.0, 1.0 / 2f64.sqrt()))
    }

    fn poly(&self, degree: usize, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> CMatrix {
        self.exact(degree, |a, ad| {
            let s = C64::new(2f64.sqrt(), 0.0);
            let x = (a + ad) / s;
            let p = (ad - a) * C64::new(0.0, 1.0) / s;
            f(&x, &p)
        })
    }

    fn generators(&self, set: OscillatorSet) -> Vec<CMatrix> {
        let mut g = vec![
            self.x(),
            self.p(),
            self.poly(2, |x, _| x * x),
            self.poly(2, |_, p| p * p),
            self.poly(2, |x, p| (x * p + p * x) / C64::new(2.0, 0.0)),
        ];
        if set == OscillatorSet::WithCubic {
            g.push(self.poly(3, |x, _| x * x * x));
        }
        g
    }
}

/// Bracket rounds used for oscillator closures. The Gaussian set saturates
/// after two; the cubic contrast keeps growing, so it is cut off early.
const GAUSSIAN_DEPTH: usize = 6;
const CUBIC_DEPTH: usize = 3;

/// Closure of an oscillator generator set truncated at `cutoff` Fock states.
///
/// Brackets are evaluated on a padded working space so that the leading
/// `cutoff x cutoff` block of every nested bracket equals that of the exact
/// operator; only that block enters the rank test. The directions a plainly
/// truncated basis would add in one more bracket pass are reported
/// separately as truncation artifacts.
pub fn oscillator_closure(cutoff: usize, set: OscillatorSet, rank_tol: f64) -> Result<ClosureReport> {
    if cutoff < 4 {
        return Err(Error::InvalidArgument(format!("oscillator cutoff must be at least 4, got {cutoff}")));
    }
    let (band, depth) = match set {
        OscillatorSet::Gaussian => (2, GAUSSIAN_DEPTH),
        OscillatorSet::WithCubic => (3, CUBIC_DEPTH),
    };
    // every bracket level can pull boundary corruption in by the sum of the
    // bands involved; nested brackets of the cubic set widen the band by one
    // per level
    let margin = (1..=depth).map(|k| 2 * (band + k * (band - 2))).sum::<usize>() + band;
    let working = Oscillator { n: cutoff + margin };
    let mut basis = SpanBasis::new(cutoff, rank_tol);
    let gens = working.generators(set);
    for g in &gens {
        basis.try_add(g.clone());
    }
    let cap = cutoff * cutoff;
    let (iterations, converged) = close(&mut basis, depth, cap);

    // one naive pass at the cutoff itself
    let cut = |m: &CMatrix| m.view((0, 0), (cutoff, cutoff)).into_owned();
    let truncated: Vec<CMatrix> = basis.full.iter().map(cut).collect();
    let mut naive = SpanBasis::new(cutoff, rank_tol);
    for m in &truncated {
        naive.try_add(m.clone());
    }
    let before = naive.dim();
    for i in 0..truncated.len() {
        for j in 0..i {
            naive.try_add(bracket(&truncated[i], &truncated[j]));
        }
    }
    let artifacts = naive.dim() - before;

    let reached = basis.dim();
    let traceless = reached - usize::from(basis.has_trace());
    Ok(ClosureReport {
        generator_count: gens.len(),
        reached_dimension: reached,
        traceless_dimension: traceless,
        target_dimension: cap - 1,
        iterations,
        converged,
        universal: traceless == cap - 1,
        rank_tolerance: rank_tol,
        truncation_artifacts: Some(artifacts),
        cutoff: Some(cutoff),
    })
}

/// Closure of `{x, p, x^2, p^2, (xp+px)/2}`: bounded at six directions
/// (identity included) for every cutoff.
pub fn oscillator_counterexample(cutoff: usize) -> Result<ClosureReport> {
    oscillator_closure(cutoff, OscillatorSet::Gaussian, DEFAULT_RANK_TOL)
}

fn check_pair(a: &SymmetricOperator, b: &SymmetricOperator, k: usize) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch(a.space(), b.space()));
    }
    for op in [a, b] {
        if !op.is_hermitian(NORM_TOL) {
            return Err(Error::NotHermitian(op.hermiticity_error()));
        }
    }
    if k == 0 {
        return Err(Error::InvalidArgument("product formulas need k >= 1".into()));
    }
    Ok(())
}

fn power(u: &SymmetricOperator, k: usize) -> SymmetricOperator {
    // square-and-multiply
    let mut result = SymmetricOperator::identity(u.space());
    let mut base = u.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `(exp(-i a t/k) exp(-i b t/k))^k`.
pub fn trotter_sum(a: &SymmetricOperator, b: &SymmetricOperator, t: f64, k: usize) -> Result<SymmetricOperator> {
    check_pair(a, b, k)?;
    let h = t / k as f64;
    let step = &hermitian_exp(a, -I * h)? * &hermitian_exp(b, -I * h)?;
    Ok(power(&step, k))
}

/// Max-norm distance between [`trotter_sum`] and `exp(-i (a + b) t)`.
pub fn trotter_sum_error(a: &SymmetricOperator, b: &SymmetricOperator, t: f64, k: usize) -> Result<f64> {
    let approx = trotter_sum(a, b, t, k)?;
    let exact = hermitian_exp(&(a + b), -I * t)?;
    Ok(approx.max_abs_diff(&exact))
}

/// `(exp(-i a tau) exp(-i b tau) exp(i a tau) exp(i b tau))^k` with
/// `tau = sqrt(t/k)`.
pub fn trotter_commutator(a: &SymmetricOperator, b: &SymmetricOperator, t: f64, k: usize) -> Result<SymmetricOperator> {
    check_pair(a, b, k)?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("group-commutator formula needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(SymmetricOperator::identity(a.space()));
    }
    let tau = (t / k as f64).sqrt();
    let ea = hermitian_exp(a, -I * tau)?;
    let eb = hermitian_exp(b, -I * tau)?;
    let step = &(&(&ea * &eb) * &ea.adjoint()) * &eb.adjoint();
    Ok(power(&step, k))
}

/// The unitary the group-commutator product approaches: `exp([b, a] t)`,
/// written as `exp(-i C t)` with the Hermitian `C = i[b, a]`.
pub fn commutator_target(a: &SymmetricOperator, b: &SymmetricOperator, t: f64) -> Result<SymmetricOperator> {
    let c = commutator(b, a)?.scale(I);
    if !c.is_hermitian(NORM_TOL) {
        return Err(Error::NotHermitian(c.hermiticity_error()));
    }
    hermitian_exp(&c, -I * t)
}

/// Max-norm distance between [`trotter_commutator`] and [`commutator_target`].
pub fn trotter_commutator_error(a: &SymmetricOperator, b: &SymmetricOperator, t: f64, k: usize) -> Result<f64> {
    let approx = trotter_commutator(a, b, t, k)?;
    Ok(approx.max_abs_diff(&commutator_target(a, b, t)?))
}

/// Least-squares slope of `ln(err)` against `ln(k)`.
pub fn loglog_slope(ks: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Result of [`synthesis_by_powers`].
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub state: QuantumState,
    pub infidelity: f64,
    /// Repetitions `M` of each factor.
    pub repetitions: usize,
    /// Number of non-trivial factors `n` (those with `a_n != 0`).
    pub factors: usize,
}

/// Builds `prod_n (exp(alpha_n S+^n - conj(alpha_n) S-^n))^M |0>` for
/// `n = 1..=N` (n = 1 applied first), with
/// `alpha_n = alpha_scale * a_n / (a_0 c_n)` and `M = max(1, round(1/alpha_scale))`.
pub fn synthesis_by_powers(space: DickeSpace, target: &QuantumState, alpha_scale: f64) -> Result<Synthesis> {
    if !(alpha_scale > 0.0 && alpha_scale <= 0.1) {
        return Err(Error::InvalidArgument(format!("alpha_scale must lie in (0, 0.1], got {alpha_scale}")));
    }
    if target.space() != space {
        return Err(Error::SpaceMismatch(space, target.space()));
    }
    let a = target
        .amplitudes()
        .ok_or_else(|| Error::InvalidArgument("synthesis needs a pure target".into()))?;
    let a0 = a[0];
    if a0.norm() < 1e-12 {
        return Err(Error::ZeroGroundAmplitude);
    }
    let reps = ((1.0 / alpha_scale).round() as usize).max(1);
    let splus = build_splus(space);
    let sminus = build_sminus(space);
    let n = space.n_emitters();
    let mut psi: CVector = QuantumState::ground(space).amplitudes().unwrap().clone();
    let mut factors = 0;
    let mut sp_pow = SymmetricOperator::identity(space);
    let mut sm_pow = SymmetricOperator::identity(space);
    for k in 1..=n {
        sp_pow = &sp_pow * &splus;
        sm_pow = &sm_pow * &sminus;
        if a[k].norm() == 0.0 {
            continue;
        }
        factors += 1;
        let alpha = a[k] / (a0 * ladder_norm(n, k)) * alpha_scale;
        // G = alpha S+^k - conj(alpha) S-^k is anti-Hermitian, H = iG Hermitian
        // and exp(G) = exp(-i H)
        let g = &sp_pow.scale(alpha) - &sm_pow.scale(alpha.conj());
        let u = hermitian_exp(&g.scale(I), -I)?;
        for _ in 0..reps {
            psi = u.matrix() * psi;
        }
    }
    let state = QuantumState::normalized(space, psi)?;
    let overlap = a.dotc(state.amplitudes().unwrap()).norm_sqr();
    Ok(Synthesis { state, infidelity: (1.0 - overlap).max(0.0), repetitions: reps, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{build_sx, build_sy, build_sz};

    fn space(n: usize) -> DickeSpace {
        DickeSpace::new(n).unwrap()
    }

    fn squeezing_set(s: DickeSpace) -> Vec<SymmetricOperator> {
        let (sx, sy) = (build_sx(s), build_sy(s));
        let (sx2, sy2) = (&sx * &sx, &sy * &sy);
        vec![sx, sy, sx2, sy2]
    }

    #[test]
    fn squeezing_and_rotations_are_universal() {
        for n in 2..=5 {
            let r = lie_closure(&squeezing_set(space(n)), DEFAULT_RANK_TOL).unwrap();
            assert_eq!(r.traceless_dimension, (n + 1) * (n + 1) - 1, "N={n}");
            assert!(r.universal);
            assert!(r.reached_dimension <= r.target_dimension + 1);
        }
    }

    #[test]
    fn rotations_alone_give_su2() {
        for n in 2..=6 {
            let s = space(n);
            let r = lie_closure(&[build_sx(s), build_sy(s)], DEFAULT_RANK_TOL).unwrap();
            assert_eq!(r.reached_dimension, 3);
            assert!(!r.universal);
        }
    }

    #[test]
    fn closure_contains_anticommutators() {
        let s = space(4);
        let (sx, sy, sz) = (build_sx(s), build_sy(s), build_sz(s));
        let closure = LieClosure::new(&squeezing_set(s), DEFAULT_RANK_TOL).unwrap();
        for (a, b) in [(&sy, &sz), (&sx, &sy), (&sx, &sz)] {
            let anti = &(a * b) + &(b * a);
            assert!(closure.residual(&anti) < DEFAULT_RANK_TOL);
        }
        let rot = LieClosure::new(&[sx.clone(), sy.clone()], DEFAULT_RANK_TOL).unwrap();
        assert!(rot.residual(&(&(&sx * &sy) + &(&sy * &sx))) > 0.1);
    }

    #[test]
    fn closure_rejects_non_hermitian() {
        let s = space(3);
        assert!(matches!(lie_closure(&[build_splus(s)], DEFAULT_RANK_TOL), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn closure_invariant_under_reordering_and_mixing() {
        let s = space(3);
        let gens = squeezing_set(s);
        let base = lie_closure(&gens, DEFAULT_RANK_TOL).unwrap().reached_dimension;
        let reversed: Vec<_> = gens.iter().rev().cloned().collect();
        assert_eq!(lie_closure(&reversed, DEFAULT_RANK_TOL).unwrap().reached_dimension, base);
        let mixed = vec![
            &gens[0] + &gens[1],
            &gens[0] - &gens[1],
            &gens[2].scale_real(2.0) + &gens[3],
            gens[3].scale_real(-0.5),
        ];
        assert_eq!(lie_closure(&mixed, DEFAULT_RANK_TOL).unwrap().reached_dimension, base);
        let rot = lie_closure(&[&gens[0] + &gens[1], gens[1].scale_real(3.0)], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rot.reached_dimension, 3);
    }

    #[test]
    fn oscillator_gaussian_set_is_bounded() {
        for cutoff in [8, 16] {
            let r = oscillator_counterexample(cutoff).unwrap();
            assert_eq!(r.reached_dimension, 6, "cutoff {cutoff}");
            assert!(r.converged);
            assert!(!r.universal);
            assert!(r.truncation_artifacts.unwrap() > 0);
        }
    }

    #[test]
    fn oscillator_cubic_grows_with_cutoff() {
        let small = oscillator_closure(6, OscillatorSet::WithCubic, DEFAULT_RANK_TOL).unwrap();
        let large = oscillator_closure(10, OscillatorSet::WithCubic, DEFAULT_RANK_TOL).unwrap();
        assert!(small.reached_dimension > 6);
        assert!(large.reached_dimension > small.reached_dimension);
    }

    #[test]
    fn commuting_trotter_is_exact() {
        let s = space(4);
        let sz = build_sz(s);
        for k in [1, 3, 10] {
            assert!(trotter_sum_error(&sz, &sz, 1.3, k).unwrap() < 1e-12);
        }
    }

    #[test]
    fn trotter_first_order() {
        let s = space(2);
        let (sx, sy) = (build_sx(s), build_sy(s));
        let e10 = trotter_sum_error(&sx, &sy, 1.0, 10).unwrap();
        let e20 = trotter_sum_error(&sx, &sy, 1.0, 20).unwrap();
        let ratio = e10 / e20;
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
        let mut prev = f64::INFINITY;
        for k in 4..40 {
            let e = trotter_sum_error(&sx, &sy, 1.0, k).unwrap();
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn group_commutator_basics() {
        let s = space(4);
        let (sx, sy) = (build_sx(s), build_sy(s));
        let a = &sx * &sx;
        assert_eq!(trotter_commutator(&a, &sy, 0.0, 5).unwrap(), SymmetricOperator::identity(s));
        assert!(trotter_commutator(&a, &sy, -1.0, 5).is_err());
        assert!(trotter_commutator(&build_splus(s), &sy, 1.0, 5).is_err());
        // the target is unitary and the error shrinks with k
        assert!(commutator_target(&a, &sy, 1.0).unwrap().unitarity_error() < 1e-10);
        let e8 = trotter_commutator_error(&a, &sy, 1.0, 8).unwrap();
        let e64 = trotter_commutator_error(&a, &sy, 1.0, 64).unwrap();
        assert!(e64 < e8);
    }

    #[test]
    fn group_commutator_small_time() {
        let s = space(2);
        let (sx, sy) = (build_sx(s), build_sy(s));
        let e = trotter_commutator_error(&sx, &sy, 1e-4, 1).unwrap();
        assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn slope_of_power_law() {
        let ks = [8, 16, 32, 64];
        let errs: Vec<f64> = ks.iter().map(|&k| 3.0 / k as f64).collect();
        assert!((loglog_slope(&ks, &errs) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthesis_trivial_and_errors() {
        let s = space(3);
        let out = synthesis_by_powers(s, &QuantumState::ground(s), 0.1).unwrap();
        assert_eq!(out.infidelity, 0.0);
        assert_eq!(out.factors, 0);
        assert!(matches!(
            synthesis_by_powers(s, &QuantumState::dicke(s, 1).unwrap(), 0.1),
            Err(Error::ZeroGroundAmplitude)
        ));
        assert!(synthesis_by_powers(s, &QuantumState::ground(s), 0.5).is_err());
    }

    #[test]
    fn synthesis_single_power_is_accurate() {
        // one generator: (e^G)^M = e^{MG}, a spin coherent state close to the target
        let s = space(3);
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.3, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let target = QuantumState::normalized(s, v).unwrap();
        let coarse = synthesis_by_powers(s, &target, 0.1).unwrap();
        let fine = synthesis_by_powers(s, &target, 0.01).unwrap();
        assert_eq!(coarse.repetitions, 10);
        assert_eq!(fine.repetitions, 100);
        assert!(coarse.infidelity < 0.05 && fine.infidelity < 0.05);
    }
}
