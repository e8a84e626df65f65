//! Small special-function helpers shared by several modules.

/// `ln(n!)` by direct summation; exact enough for `n` up to a few thousand.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Table of `ln(k!)` for `k = 0..=n`.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Normalized Hermite functions `psi_0(x) ..= psi_nmax(x)`, the position
/// wavefunctions of the oscillator eigenstates with `x = (a + a^dagger)/sqrt(2)`.
pub fn hermite_functions(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if nmax >= 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..nmax {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-13);
        let t = ln_factorial_table(30);
        assert!((t[30] - ln_factorial(30)).abs() < 1e-10);
    }

    #[test]
    fn hermite_orthonormal() {
        // trapezoid quadrature on a wide grid
        let nmax = 12;
        let h = 0.01;
        let xs: Vec<f64> = (-1500..=1500).map(|k| k as f64 * h).collect();
        let vals: Vec<Vec<f64>> = xs.iter().map(|&x| hermite_functions(nmax, x)).collect();
        for m in 0..=nmax {
            for n in 0..=nmax {
                let s: f64 = vals.iter().map(|v| v[m] * v[n]).sum::<f64>() * h;
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((s - expected).abs() < 1e-10, "({m},{n}) -> {s}");
            }
        }
    }

    #[test]
    fn hermite_low_orders() {
        let x = 0.7f64;
        let v = hermite_functions(2, x);
        let g = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
        assert!((v[0] - g).abs() < 1e-15);
        assert!((v[1] - 2f64.sqrt() * x * g).abs() < 1e-15);
        assert!((v[2] - (2.0 * x * x - 1.0) / 2f64.sqrt() * g).abs() < 1e-15);
    }
}
