//! Synthesis by powers of the raising operator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symctl::algebra::synthesis_by_powers;
use symctl::{fidelity, DickeSpace, QuantumState, C64};

type M = DMatrix<C64>;

/// Random normalized state at N = 3 with `|a_0| >= 0.3` (rejection sampling).
fn random_target(seed: u64) -> QuantumState {
    let space = DickeSpace::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<C64> = (0..4).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let s = QuantumState::normalized(space, DVector::from_vec(v)).unwrap();
        if s.amplitudes().unwrap()[0].norm() >= 0.3 {
            return s;
        }
    }
}

fn taylor_exp(a: &M) -> M {
    let norm: f64 = a.iter().map(|z| z.norm()).sum();
    let s = (norm / 0.5).log2().ceil().max(0.0) as i32;
    let scaled = a / C64::new(f64::powi(2.0, s), 0.0);
    let n = a.nrows();
    let (mut term, mut sum) = (M::identity(n, n), M::identity(n, n));
    for k in 1..40 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// The product state with each factor raised to its full power in a single
/// exponential: `prod_n exp(a_n/(a_0 c_n) S+^n - h.c.) |0>`, with `S+` and
/// `c_n` written out from their closed forms.
fn single_exponential_route(target: &QuantumState) -> DVector<C64> {
    let a = target.amplitudes().unwrap();
    let n = a.len() - 1;
    let mut sp = M::zeros(n + 1, n + 1);
    for m in 0..n {
        sp[(m + 1, m)] = C64::new((((m + 1) * (n - m)) as f64).sqrt(), 0.0);
    }
    let mut psi = DVector::from_element(n + 1, C64::new(0.0, 0.0));
    psi[0] = C64::new(1.0, 0.0);
    let mut power = M::identity(n + 1, n + 1);
    for k in 1..=n {
        power = &sp * &power;
        // c_k = sqrt(k! N!/(N-k)!)
        let c: f64 = (1..=k).map(|j| (j * (n - j + 1)) as f64).product::<f64>().sqrt();
        let alpha = a[k] / (a[0] * c);
        let g = &power * alpha - power.adjoint() * alpha.conj();
        psi = taylor_exp(&g) * psi;
    }
    psi
}

#[test]
fn product_equals_single_exponential_route() {
    let space = DickeSpace::new(3).unwrap();
    for seed in 0..10 {
        let target = random_target(seed);
        let oracle = QuantumState::normalized(space, single_exponential_route(&target)).unwrap();
        for scale in [0.1, 0.05, 0.02, 0.01] {
            let out = synthesis_by_powers(space, &target, scale).unwrap();
            let f = fidelity(&out.state, &oracle).unwrap();
            assert!(f > 1.0 - 1e-10, "seed {seed} scale {scale}: {f}");
        }
    }
}

#[test]
fn infidelity_does_not_depend_on_scale() {
    // (exp(alpha G))^M = exp(M alpha G) and M alpha is fixed, so only
    // floating-point rounding separates the scales
    let space = DickeSpace::new(3).unwrap();
    for seed in 0..10 {
        let target = random_target(seed);
        let errs: Vec<f64> = [0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&s| synthesis_by_powers(space, &target, s).unwrap().infidelity)
            .collect();
        for e in &errs {
            assert!((e - errs[0]).abs() < 1e-9, "{errs:?}");
        }
    }
}

#[test]
fn weak_targets_are_reached() {
    // first order in a_n / a_0: close to |0> the construction is accurate
    let space = DickeSpace::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut v = vec![C64::new(1.0, 0.0)];
        v.extend((0..3).map(|_| C64::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05))));
        let target = QuantumState::normalized(space, DVector::from_vec(v)).unwrap();
        let out = synthesis_by_powers(space, &target, 0.005).unwrap();
        assert!(out.infidelity < 0.05, "{}", out.infidelity);
    }
}
