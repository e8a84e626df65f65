//! Wigner functions: the spherical (multipole) Wigner function of a spin-`J`
//! state and a planar oscillator Wigner function under the Dicke-to-Fock
//! identification.
//!
//! The spherical function is
//!
//! ```text
//! W(theta, phi) = sqrt((2J+1)/(4 pi)) sum_{K<=2J} sum_{|Q|<=K} rho_KQ Y_KQ(theta, phi)
//! rho_KQ = Tr(rho T_KQ^dagger),  <J m|T_KQ|J m'> = <J m'; K Q|J m> sqrt((2K+1)/(2J+1))
//! ```
//!
//! normalized so that its integral over the sphere is one. Dicke state
//! `|k>` has `m = k - N/2`, so `|0>` sits at the south pole `theta = pi`.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_bigint::{BigInt, Sign};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dicke::{CMatrix, QuantumState, C64};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::special::ln_factorial_table;

/// Label carried by every planar Wigner output.
pub const PLANAR_LABEL: &str = "approximation: Dicke->Fock identification";
/// Boundary magnitude above which a planar window is flagged as too small.
pub const PLANAR_BOUNDARY_WARN: f64 = 1e-3;

/// Clebsch-Gordan coefficients from a cached log-factorial table.
#[derive(Clone, Debug)]
pub struct ClebschGordan {
    lf: Vec<f64>,
}

impl ClebschGordan {
    /// Table good for all coefficients with `j1 + j2 + J <= max_sum`.
    pub fn new(max_sum: f64) -> Self {
        Self { lf: ln_factorial_table((max_sum.max(0.0) as usize) + 2) }
    }

    fn lf(&mut self, n: i64) -> f64 {
        let n = n as usize;
        if n >= self.lf.len() {
            self.lf = ln_factorial_table(2 * n + 2);
        }
        self.lf[n]
    }

    /// `<j1 m1; j2 m2 | J M>` with every argument given as twice its value.
    /// Invalid combinations return 0.
    pub fn doubled(&mut self, tj1: i64, tm1: i64, tj2: i64, tm2: i64, tj: i64, tm: i64) -> f64 {
        if tj1 < 0 || tj2 < 0 || tj < 0 || tm1 + tm2 != tm {
            return 0.0;
        }
        if tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
            return 0.0;
        }
        if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj + tm) % 2 != 0 {
            return 0.0;
        }
        if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
            return 0.0;
        }
        // integer arguments of the factorials
        let a = (tj1 + tj2 - tj) / 2;
        let b = (tj1 - tm1) / 2;
        let c = (tj2 + tm2) / 2;
        let d = (tj - tj2 + tm1) / 2;
        let e = (tj - tj1 - tm2) / 2;
        let pre = 0.5
            * ((tj as f64 + 1.0).ln() + self.lf((tj + tj1 - tj2) / 2) + self.lf((tj - tj1 + tj2) / 2) + self.lf(a)
                - self.lf((tj1 + tj2 + tj) / 2 + 1)
                + self.lf((tj + tm) / 2)
                + self.lf((tj - tm) / 2)
                + self.lf((tj1 - tm1) / 2)
                + self.lf((tj1 + tm1) / 2)
                + self.lf((tj2 - tm2) / 2)
                + self.lf((tj2 + tm2) / 2));
        let kmin = 0.max(-d).max(-e);
        let kmax = a.min(b).min(c);
        let mut sum = 0.0;
        let mut magnitude = 0.0;
        for k in kmin..=kmax {
            let den = self.lf(k) + self.lf(a - k) + self.lf(b - k) + self.lf(c - k) + self.lf(d + k) + self.lf(e + k);
            let term = (pre - den).exp();
            magnitude += term;
            sum += if k % 2 == 0 { term } else { -term };
        }
        if magnitude <= CANCELLATION_LIMIT * sum.abs() {
            return sum;
        }
        // the alternating sum cancelled too many digits; redo it exactly
        let (x, ln_scale) = exact_racah_sum(self, [a, b, c, d, e], kmin, kmax);
        if x.sign() == Sign::NoSign {
            return 0.0;
        }
        let value = (pre + ln_abs(&x) - ln_scale).exp();
        if x.sign() == Sign::Minus {
            -value
        } else {
            value
        }
    }
}

/// Ratio of the absolute-term sum to the result beyond which the floating
/// point Racah sum is replaced by the exact one (about 6 digits lost).
const CANCELLATION_LIMIT: f64 = 1e6;

fn falling(top: i64, count: i64) -> BigInt {
    // top * (top - 1) * ... * (top - count + 1)
    let mut out = BigInt::one();
    for v in (top - count + 1)..=top {
        out *= v;
    }
    out
}

/// `sum_k (-1)^k / (k! (a-k)! (b-k)! (c-k)! (d+k)! (e+k)!)` as an integer
/// `X` and `ln P` with the sum equal to `X / P`, where
/// `P = a! b! c! (d+kmax)! (e+kmax)!`.
fn exact_racah_sum(cg: &mut ClebschGordan, [a, b, c, d, e]: [i64; 5], kmin: i64, kmax: i64) -> (BigInt, f64) {
    let mut x = BigInt::zero();
    for k in kmin..=kmax {
        // a!/(k!(a-k)!) * b!/(b-k)! * c!/(c-k)! * (d+kmax)!/(d+k)! * (e+kmax)!/(e+k)!
        let mut t = falling(a, k);
        t /= falling(k, k);
        t *= falling(b, k);
        t *= falling(c, k);
        t *= falling(d + kmax, kmax - k);
        t *= falling(e + kmax, kmax - k);
        if k % 2 == 0 {
            x += t;
        } else {
            x -= t;
        }
    }
    let ln_scale = cg.lf(a) + cg.lf(b) + cg.lf(c) + cg.lf(d + kmax) + cg.lf(e + kmax);
    (x, ln_scale)
}

fn ln_abs(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map(f64::abs).unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x.magnitude() >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn twice(x: f64) -> Option<i64> {
    let t = 2.0 * x;
    let r = t.round();
    if (t - r).abs() > 1e-9 {
        None
    } else {
        Some(r as i64)
    }
}

/// `<j1 m1; j2 m2 | J M>` for integer or half-integer arguments; anything that
/// violates the selection rules (or is not a multiple of 1/2) gives 0.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    match (twice(j1), twice(m1), twice(j2), twice(m2), twice(j), twice(m)) {
        (Some(a), Some(b), Some(c), Some(d), Some(e), Some(f)) => {
            ClebschGordan::new(j1 + j2 + j).doubled(a, b, c, d, e, f)
        }
        _ => 0.0,
    }
}

/// Orthonormal associated Legendre functions with the Condon-Shortley phase:
/// `out[l][m] = Pbar_l^m(cos theta)` for `0 <= m <= l <= lmax`, such that
/// `Y_lm = Pbar_l^m(cos theta) e^{i m phi}`.
pub fn normalized_legendre(lmax: usize, theta: f64) -> Vec<Vec<f64>> {
    let x = theta.cos();
    let s = theta.sin();
    let mut p: Vec<Vec<f64>> = (0..=lmax).map(|l| vec![0.0; l + 1]).collect();
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[m][m] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..lmax {
        let mf = m as f64;
        p[m + 1][m] = (2.0 * mf + 3.0).sqrt() * x * p[m][m];
    }
    let a = |l: usize, m: usize| {
        let (lf, mf) = (l as f64, m as f64);
        ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt()
    };
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            p[l][m] = a(l, m) * (x * p[l - 1][m] - p[l - 2][m] / a(l - 1, m));
        }
    }
    p
}

/// Multipole coefficients of a state, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct SphericalWigner {
    n: usize,
    /// `rho[K][K + Q]` for `-K <= Q <= K`.
    multipoles: Vec<Vec<C64>>,
}

impl SphericalWigner {
    pub fn new(state: &QuantumState) -> Self {
        let n = state.space().n_emitters();
        let rho = state.density_matrix();
        Self { n, multipoles: multipoles(n, &rho) }
    }

    pub fn spin(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// `rho_KQ`.
    pub fn multipole(&self, k: usize, q: i64) -> C64 {
        if q.unsigned_abs() as usize > k || k > self.n {
            return C64::new(0.0, 0.0);
        }
        self.multipoles[k][(k as i64 + q) as usize]
    }

    fn prefactor(&self) -> f64 {
        ((self.n as f64 + 1.0) / (4.0 * PI)).sqrt()
    }

    /// `A_Q(theta) = sum_K rho_KQ Pbar_K^Q(cos theta)` for `Q >= 0`; the
    /// function is then `Re sum_Q c_Q A_Q e^{i Q phi}` with `c_0 = 1`, `c_Q = 2`.
    fn row(&self, theta: f64) -> Vec<C64> {
        let p = normalized_legendre(self.n, theta);
        (0..=self.n)
            .map(|q| {
                let mut acc = C64::new(0.0, 0.0);
                for k in q..=self.n {
                    acc += self.multipoles[k][k + q] * p[k][q];
                }
                acc * if q == 0 { 1.0 } else { 2.0 }
            })
            .collect()
    }

    fn combine(&self, row: &[C64], phi: f64) -> f64 {
        let mut w = 0.0;
        for (q, a) in row.iter().enumerate() {
            w += (a * C64::from_polar(1.0, q as f64 * phi)).re;
        }
        self.prefactor() * w
    }

    /// `W(theta, phi)`.
    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        self.combine(&self.row(theta), phi)
    }

    /// Evaluates on a grid; rows are computed in parallel and assembled in
    /// order, so the result does not depend on the thread count.
    pub fn grid(&self, n_theta: usize, n_phi: usize) -> Result<SphereGrid> {
        if n_theta < 2 || n_phi < 1 {
            return Err(Error::InvalidArgument(format!("sphere grid needs n_theta >= 2 and n_phi >= 1, got {n_theta}x{n_phi}")));
        }
        let thetas: Vec<f64> = (0..n_theta).map(|j| j as f64 * PI / (n_theta - 1) as f64).collect();
        let phis: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        let values: Vec<Vec<f64>> = thetas
            .par_iter()
            .map(|&t| {
                let row = self.row(t);
                phis.iter().map(|&f| self.combine(&row, f)).collect()
            })
            .collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let weights = clenshaw_curtis(n_theta - 1).into_iter().map(|w| w * dphi).collect();
        Ok(SphereGrid { thetas, phis, values, weights })
    }
}

fn multipoles(n: usize, rho: &CMatrix) -> Vec<Vec<C64>> {
    let tj = n as i64;
    let mut cg = ClebschGordan::new(2.0 * n as f64);
    (0..=n)
        .map(|k| {
            let scale = ((2.0 * k as f64 + 1.0) / (n as f64 + 1.0)).sqrt();
            (-(k as i64)..=(k as i64))
                .map(|q| {
                    let mut acc = C64::new(0.0, 0.0);
                    // m = m' + Q, indices a = m + J, b = m' + J
                    for b in 0..=n as i64 {
                        let a = b + q;
                        if a < 0 || a > n as i64 {
                            continue;
                        }
                        let c = cg.doubled(tj, 2 * b - tj, 2 * k as i64, 2 * q, tj, 2 * a - tj);
                        acc += rho[(a as usize, b as usize)] * (c * scale);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Clenshaw-Curtis weights for `int_{-1}^{1} f(x) dx` on the nodes
/// `x_j = cos(j pi / n)`, `j = 0..=n`.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![2.0];
    }
    let nf = n as f64;
    (0..=n)
        .map(|j| {
            let theta = j as f64 * PI / nf;
            let mut s = 0.0;
            for k in 1..=n / 2 {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
            }
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            c / nf * (1.0 - s)
        })
        .collect()
}

/// Samples of the spherical Wigner function on `theta_j = j pi/(n_theta-1)`,
/// `phi_k = 2 pi k / n_phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// `values[j][k] = W(theta_j, phi_k)`.
    pub values: Vec<Vec<f64>>,
    /// Quadrature weight of every sample in row `j` (includes the `phi` step).
    pub weights: Vec<f64>,
}

impl SphereGrid {
    /// Default resolution for `N` emitters; exact quadrature for any state.
    pub fn default_shape(n: usize) -> (usize, usize) {
        ((2 * n + 1).max(33), (2 * n + 2).max(64))
    }

    /// Quadrature estimate of the integral over the sphere.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(row, w)| w * row.iter().sum::<f64>()).sum()
    }

    /// `(theta, phi, W)` at the largest sample (first one on ties).
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        for (j, row) in self.values.iter().enumerate() {
            for (k, &w) in row.iter().enumerate() {
                if w > best.2 {
                    best = (self.thetas[j], self.phis[k], w);
                }
            }
        }
        best
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,w\n");
        for (j, row) in self.values.iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", self.thetas[j], self.phis[k], w));
            }
        }
        out
    }
}

/// Spherical Wigner function of `state` on an `n_theta x n_phi` grid.
pub fn spherical_wigner(state: &QuantumState, n_theta: usize, n_phi: usize) -> Result<SphereGrid> {
    SphericalWigner::new(state).grid(n_theta, n_phi)
}

/// `W(theta, phi)` at a single point.
pub fn spherical_wigner_at(state: &QuantumState, theta: f64, phi: f64) -> f64 {
    SphericalWigner::new(state).eval(theta, phi)
}

/// Planar Wigner function under the Dicke-to-Fock identification, on a
/// square window `[-half_width, half_width]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// `values[i][j] = W(x_i, p_j)`.
    pub values: Vec<Vec<f64>>,
    /// Largest `|W|` on the window boundary.
    pub boundary_max: f64,
    pub label: &'static str,
}

impl PlaneGrid {
    /// Window half-width that comfortably contains a state supported on
    /// Fock numbers up to `n`.
    pub fn default_half_width(n: usize) -> f64 {
        (2.0 * n as f64 + 1.0).sqrt() + 4.0
    }

    /// True when the boundary carries more than [`PLANAR_BOUNDARY_WARN`].
    pub fn window_warning(&self) -> bool {
        self.boundary_max > PLANAR_BOUNDARY_WARN
    }

    /// Trapezoid estimate of the integral over the window.
    pub fn integral(&self) -> f64 {
        let trap = |v: &[f64], h: f64| -> Vec<f64> {
            let n = v.len();
            (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
        };
        let wx = trap(&self.xs, step(&self.xs));
        let wp = trap(&self.ps, step(&self.ps));
        let mut total = 0.0;
        for (i, row) in self.values.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                total += wx[i] * wp[j] * w;
            }
        }
        total
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p,w\n");
        for (i, row) in self.values.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", self.xs[i], self.ps[j], w));
            }
        }
        out
    }
}

fn step(v: &[f64]) -> f64 {
    if v.len() < 2 {
        1.0
    } else {
        v[1] - v[0]
    }
}

/// Wigner function of the oscillator state `sum_n a_n |n>` at phase-space
/// point `(x, p)`, normalized so that its integral over the plane is one.
pub fn fock_wigner_at(amplitudes: &[C64], x: f64, p: f64) -> f64 {
    let d = amplitudes.len();
    if d == 0 {
        return 0.0;
    }
    let a = C64::new(x, p) / std::f64::consts::SQRT_2;
    let rho = |m: usize, n: usize| amplitudes[m] * amplitudes[n].conj();
    let mut wl = vec![C64::new(0.0, 0.0); d];
    wl[0] = C64::new((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
    let mut w = rho(0, 0).re * wl[0].re;
    for n in 1..d {
        wl[n] = wl[n - 1] * a * 2.0 / (n as f64).sqrt();
        w += 2.0 * (rho(0, n) * wl[n]).re;
    }
    for m in 1..d {
        let mf = (m as f64).sqrt();
        let mut temp = wl[m];
        wl[m] = (a.conj() * 2.0 * temp - wl[m - 1] * mf) / mf;
        w += (rho(m, m) * wl[m]).re;
        for n in (m + 1)..d {
            let next = (a * 2.0 * wl[n - 1] - temp * mf) / (n as f64).sqrt();
            temp = wl[n];
            wl[n] = next;
            w += 2.0 * (rho(m, n) * wl[n]).re;
        }
    }
    w
}

/// Planar Wigner function of a pure state with Dicke amplitude `a_n` read as
/// Fock amplitude `a_n`, on `resolution x resolution` points.
pub fn planar_wigner(state: &QuantumState, half_width: f64, resolution: usize) -> Result<PlaneGrid> {
    let amps: Vec<C64> = state
        .amplitudes()
        .ok_or_else(|| Error::InvalidArgument("planar Wigner function needs a pure state".into()))?
        .iter()
        .copied()
        .collect();
    if !(half_width > 0.0) || resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "plane grid needs a positive half-width and at least 2 points, got {half_width}, {resolution}"
        )));
    }
    let axis: Vec<f64> =
        (0..resolution).map(|i| -half_width + 2.0 * half_width * i as f64 / (resolution - 1) as f64).collect();
    let values: Vec<Vec<f64>> =
        axis.par_iter().map(|&x| axis.iter().map(|&p| fock_wigner_at(&amps, x, p)).collect()).collect();
    let last = resolution - 1;
    let mut boundary_max = 0.0f64;
    for i in 0..resolution {
        for j in [0, last] {
            boundary_max = boundary_max.max(values[i][j].abs()).max(values[j][i].abs());
        }
    }
    Ok(PlaneGrid { xs: axis.clone(), ps: axis, values, boundary_max, label: PLANAR_LABEL })
}

/// Writes a sphere grid as CSV (`theta,phi,w`, theta-major).
pub fn export_sphere(grid: &SphereGrid, path: &Path) -> Result<()> {
    write_atomic(path, grid.to_csv().as_bytes())
}

/// Writes a plane grid as CSV (`x,p,w`, x-major).
pub fn export_plane(grid: &PlaneGrid, path: &Path) -> Result<()> {
    write_atomic(path, grid.to_csv().as_bytes())
}

/// Reads a grid CSV back: the header and one `[a, b, w]` triple per row.
pub fn read_grid_csv(path: &Path) -> Result<(String, Vec<[f64; 3]>)> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::Parse { what: path.display().to_string(), msg: "empty file".into() })?;
    if header != "theta,phi,w" && header != "x,p,w" {
        return Err(Error::Parse { what: path.display().to_string(), msg: format!("unexpected header `{header}`") });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let bad = |msg: String| Error::Parse { what: format!("{} line {}", path.display(), i + 2), msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        }
        let mut row = [0.0; 3];
        for (slot, f) in row.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|e| bad(format!("`{f}`: {e}")))?;
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes CSV text to any sink; used for stdout output.
pub fn write_csv_to(mut sink: impl Write, csv: &str) -> Result<()> {
    sink.write_all(csv.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{build_sx, build_sy, build_sz, hermitian_exp, CVector, DickeSpace, I};
    use crate::gates::rotation_unitary;

    fn space(n: usize) -> DickeSpace {
        DickeSpace::new(n).unwrap()
    }

    #[test]
    fn cg_examples() {
        assert!((clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0.0, 0.0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0.0, 0.0) + 0.5f64.sqrt()).abs() < 1e-14);
        for j in [0.5, 1.0, 3.5, 10.0] {
            assert!((clebsch_gordan(j, j, j, j, 2.0 * j, 2.0 * j) - 1.0).abs() < 1e-12);
        }
        assert_eq!(clebsch_gordan(1.0, 0.0, 1.0, 0.0, 3.0, 0.0), 0.0);
        assert_eq!(clebsch_gordan(1.0, 1.0, 1.0, 0.0, 2.0, 0.0), 0.0);
        assert_eq!(clebsch_gordan(0.3, 0.0, 1.0, 0.0, 1.0, 0.0), 0.0);
        // <1 0; 1 0 | 2 0> = sqrt(2/3)
        assert!((clebsch_gordan(1.0, 0.0, 1.0, 0.0, 2.0, 0.0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cg_orthogonality() {
        let mut cg = ClebschGordan::new(20.0);
        let (j1, j2) = (10i64, 10i64);
        for tj in (0..=20).step_by(2) {
            for tjp in (0..=20).step_by(2) {
                for tm in (-tj.min(tjp)..=tj.min(tjp)).step_by(2) {
                    let mut s = 0.0;
                    for tm1 in (-j1..=j1).step_by(2) {
                        let tm2 = tm - tm1;
                        s += cg.doubled(j1, tm1, j2, tm2, tj, tm) * cg.doubled(j1, tm1, j2, tm2, tjp, tm);
                    }
                    let expected = if tj == tjp { 1.0 } else { 0.0 };
                    assert!((s - expected).abs() < 1e-10, "J={tj} J'={tjp} M={tm}: {s}");
                }
            }
        }
    }

    #[test]
    fn cg_large_spin_stays_normalized() {
        let mut cg = ClebschGordan::new(600.0);
        let (tj1, tj2, tj) = (400i64, 160i64, 400i64);
        let tm = 0;
        let s: f64 = (-tj1..=tj1)
            .step_by(2)
            .map(|tm1| cg.doubled(tj1, tm1, tj2, tm - tm1, tj, tm).powi(2))
            .sum();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn legendre_against_closed_forms() {
        let theta = 0.83f64;
        let (x, s) = (theta.cos(), theta.sin());
        let p = normalized_legendre(3, theta);
        let c = |v: f64| v / (4.0 * PI).sqrt();
        assert!((p[1][0] - c(3f64.sqrt() * x)).abs() < 1e-14);
        assert!((p[1][1] - c(-(1.5f64).sqrt() * s)).abs() < 1e-14);
        assert!((p[2][0] - c(5f64.sqrt() * 0.5 * (3.0 * x * x - 1.0))).abs() < 1e-14);
        assert!((p[2][2] - c(0.25 * (30.0f64).sqrt() * s * s)).abs() < 1e-14);
        assert!((p[3][1] - c(-0.25 * 21f64.sqrt() * s * (5.0 * x * x - 1.0))).abs() < 1e-14);
    }

    #[test]
    fn cc_weights_integrate_polynomials() {
        let n = 8;
        let w = clenshaw_curtis(n);
        for deg in 0..=n {
            let s: f64 = (0..=n).map(|j| w[j] * (j as f64 * PI / n as f64).cos().powi(deg as i32)).sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "degree {deg}");
        }
    }

    #[test]
    fn ground_state_peaks_at_south_pole() {
        let s = space(2);
        let g = spherical_wigner(&QuantumState::ground(s), 33, 64).unwrap();
        let (theta, _, _) = g.argmax();
        assert_eq!(theta, PI);
        for row in &g.values {
            let spread = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) - row.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(spread < 1e-12);
        }
    }

    #[test]
    fn ground_state_n2_by_hand() {
        // J = 1, m = -1: rho_00 = 1/sqrt(3), rho_10 = -1/sqrt(2), rho_20 = 1/sqrt(6)
        let wig = SphericalWigner::new(&QuantumState::ground(space(2)));
        assert!((wig.multipole(0, 0).re - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((wig.multipole(1, 0).re + 1.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!((wig.multipole(2, 0).re - 1.0 / 6f64.sqrt()).abs() < 1e-14);
        let theta = 1.1f64;
        let x = theta.cos();
        let y = |k: usize| match k {
            0 => 1.0 / (4.0 * PI).sqrt(),
            1 => (3.0 / (4.0 * PI)).sqrt() * x,
            _ => (5.0 / (4.0 * PI)).sqrt() * 0.5 * (3.0 * x * x - 1.0),
        };
        let w = (3.0 / (4.0 * PI)).sqrt() * (y(0) / 3f64.sqrt() - y(1) / 2f64.sqrt() + y(2) / 6f64.sqrt());
        assert!((wig.eval(theta, 0.4) - w).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_is_flat() {
        let g = spherical_wigner(&QuantumState::maximally_mixed(space(5)), 11, 12).unwrap();
        for w in g.values.iter().flatten() {
            assert!((w - 1.0 / (4.0 * PI)).abs() < 1e-13);
        }
    }

    #[test]
    fn multipoles_conjugate_symmetric() {
        let s = space(6);
        let v = CVector::from_fn(7, |k, _| C64::new((k as f64 * 0.7).sin(), (k as f64).cos()));
        let psi = QuantumState::normalized(s, v).unwrap();
        let wig = SphericalWigner::new(&psi);
        for k in 0..=6usize {
            for q in 1..=k as i64 {
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                assert!((wig.multipole(k, -q) - wig.multipole(k, q).conj() * sign).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn normalization_exact() {
        let s = space(10);
        let v = CVector::from_fn(11, |k, _| C64::new(1.0 / (1.0 + k as f64), (k as f64 * 1.3).sin()));
        let psi = QuantumState::normalized(s, v).unwrap();
        let (nt, np) = SphereGrid::default_shape(10);
        let g = spherical_wigner(&psi, nt, np).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-10);
        // minimal exact grid
        let g = spherical_wigner(&psi, 11, 11).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_spin_state_points_along_mean_spin() {
        let s = space(8);
        let u = rotation_unitary(s, [0.3, -0.8, 0.2], 1.9).unwrap();
        let psi = u.apply(&QuantumState::ground(s)).unwrap();
        let m = [build_sx(s), build_sy(s), build_sz(s)].map(|op| psi.expectation(&op).unwrap().re);
        let r = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        let theta0 = (m[2] / r).acos();
        let phi0 = m[1].atan2(m[0]).rem_euclid(2.0 * PI);
        let (nt, np) = (91, 180);
        let g = spherical_wigner(&psi, nt, np).unwrap();
        let (theta, phi, _) = g.argmax();
        let dphi = (phi - phi0).abs().min(2.0 * PI - (phi - phi0).abs());
        assert!((theta - theta0).abs() <= PI / (nt - 1) as f64 + 1e-12);
        assert!(dphi <= 2.0 * PI / np as f64 + 1e-12);
    }

    #[test]
    fn vacuum_and_one_photon() {
        let s = space(3);
        let vac = QuantumState::ground(s);
        let one = QuantumState::dicke(s, 1).unwrap();
        let amps = |q: &QuantumState| q.amplitudes().unwrap().iter().copied().collect::<Vec<_>>();
        assert!((fock_wigner_at(&amps(&vac), 0.0, 0.0) - 1.0 / PI).abs() < 1e-15);
        assert!((fock_wigner_at(&amps(&one), 0.0, 0.0) + 1.0 / PI).abs() < 1e-15);
        let x = 0.7f64;
        let p = -0.4f64;
        let r2 = x * x + p * p;
        assert!((fock_wigner_at(&amps(&vac), x, p) - (-r2).exp() / PI).abs() < 1e-15);
        assert!((fock_wigner_at(&amps(&one), x, p) - (2.0 * r2 - 1.0) * (-r2).exp() / PI).abs() < 1e-14);
    }

    #[test]
    fn plane_grid_normalized_and_labeled() {
        let s = space(6);
        let v = CVector::from_fn(7, |k, _| C64::new(1.0, 0.2 * k as f64));
        let psi = QuantumState::normalized(s, v).unwrap();
        let g = planar_wigner(&psi, PlaneGrid::default_half_width(6), 121).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-4);
        assert!(!g.window_warning());
        assert_eq!(g.label, PLANAR_LABEL);
        let small = planar_wigner(&psi, 1.0, 11).unwrap();
        assert!(small.window_warning());
        assert!(planar_wigner(&QuantumState::maximally_mixed(s), 5.0, 11).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SphereGrid {
            thetas: vec![0.0, PI],
            phis: vec![0.0, PI],
            values: vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]],
            weights: vec![1.0, 1.0],
        };
        let path = dir.path().join("g.csv");
        export_sphere(&grid, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("theta,phi,w\n"));
        let (header, rows) = read_grid_csv(&path).unwrap();
        assert_eq!(header, "theta,phi,w");
        let flat: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        assert_eq!(flat, vec![0.1, 1.0 / 3.0, -2.5e-17, 7.0]);
        assert_eq!(rows[1][1], PI);
    }

    #[test]
    fn rotation_sanity_for_sy_pi() {
        let s = space(4);
        let u = hermitian_exp(&build_sy(s), I * PI).unwrap();
        let top = u.apply(&QuantumState::ground(s)).unwrap();
        let g = spherical_wigner(&top, 33, 8).unwrap();
        assert_eq!(g.argmax().0, 0.0);
    }
}
