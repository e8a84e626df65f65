//! Target states written in the Dicke basis through the identification of
//! Dicke state `|n>` with the oscillator Fock state `|n>`.
//!
//! Every constructor first builds the oscillator state on an extended Fock
//! range, records how much weight falls beyond `n = N`, then truncates and
//! renormalizes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dicke::{CVector, DickeSpace, QuantumState, C64, I};
use crate::error::{Error, Result};
use crate::special::{hermite_functions, ln_factorial_table};

/// Tail weight above which a target carries a warning.
pub const WARN_TAIL: f64 = 1e-6;
/// Tail weight above which a GKP target is rejected.
pub const GKP_ERROR_TAIL: f64 = 1e-2;
/// Largest Fock index used when building GKP states.
const GKP_MAX_FOCK: usize = 400;

/// A truncated target state and the weight its untruncated form had on
/// Fock states beyond `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub state: QuantumState,
    pub tail_weight: f64,
}

impl Target {
    /// True when truncation discarded more than [`WARN_TAIL`].
    pub fn truncation_warning(&self) -> bool {
        self.tail_weight > WARN_TAIL
    }
}

fn truncate(space: DickeSpace, full: &[C64]) -> Result<Target> {
    let d = space.dim();
    let total: f64 = full.iter().map(|z| z.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("target has zero norm".into()));
    }
    let tail: f64 = full.iter().skip(d).map(|z| z.norm_sqr()).sum();
    let mut v = CVector::zeros(d);
    for (k, z) in full.iter().take(d).enumerate() {
        v[k] = *z;
    }
    Ok(Target { state: QuantumState::normalized(space, v)?, tail_weight: tail / total })
}

fn coherent_extent(gamma: C64) -> usize {
    let g = gamma.norm();
    (g * g + 12.0 * g + 40.0).ceil() as usize
}

/// Fock amplitudes `exp(-|g|^2/2) g^n / sqrt(n!)` for `n = 0..=nmax`.
pub fn coherent_amplitudes(gamma: C64, nmax: usize) -> Vec<C64> {
    let lf = ln_factorial_table(nmax);
    let r = gamma.norm();
    let arg = gamma.arg();
    (0..=nmax)
        .map(|n| {
            if r == 0.0 {
                return if n == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            }
            let log_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * lf[n];
            C64::from_polar(log_mag.exp(), n as f64 * arg)
        })
        .collect()
}

fn superpose(space: DickeSpace, legs: &[(C64, C64)]) -> Result<Target> {
    let nmax = legs.iter().map(|(_, g)| coherent_extent(*g)).max().unwrap_or(0).max(space.n_emitters());
    let mut full = vec![C64::new(0.0, 0.0); nmax + 1];
    for (w, g) in legs {
        for (acc, a) in full.iter_mut().zip(coherent_amplitudes(*g, nmax)) {
            *acc += w * a;
        }
    }
    truncate(space, &full)
}

/// Coherent state `|gamma>`.
pub fn coherent_state(space: DickeSpace, gamma: C64) -> Result<Target> {
    superpose(space, &[(C64::new(1.0, 0.0), gamma)])
}

/// `|gamma> - i|-gamma>`, normalized.
pub fn cat2_state(space: DickeSpace, gamma: C64) -> Result<Target> {
    superpose(space, &[(C64::new(1.0, 0.0), gamma), (-I, -gamma)])
}

/// Placement of the four legs of a four-legged cat.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegOrder {
    /// Leg `k` at `i^k gamma`.
    #[default]
    CounterClockwise,
    /// Leg `k` at `(-i)^k gamma`.
    Clockwise,
}

impl LegOrder {
    pub fn name(self) -> &'static str {
        match self {
            LegOrder::CounterClockwise => "counter-clockwise",
            LegOrder::Clockwise => "clockwise",
        }
    }
}

/// `sum_k exp(i k phi) |u^k gamma>` with `u = i` or `-i`, normalized.
pub fn cat4_state(space: DickeSpace, gamma: C64, phi: f64, legs: LegOrder) -> Result<Target> {
    let u = match legs {
        LegOrder::CounterClockwise => I,
        LegOrder::Clockwise => -I,
    };
    let terms: Vec<(C64, C64)> =
        (0..4).map(|k| ((I * (k as f64 * phi)).exp(), gamma * u.powu(k as u32))).collect();
    superpose(space, &terms)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GkpLattice {
    #[default]
    Square,
    Hex,
}

/// Which grid state of the lattice is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GkpCodeword {
    /// Single-mode grid with unit cell area `2 pi` (position spacing `sqrt(2 pi)` for the square lattice).
    Qunaught,
    /// Logical zero of the code with cell area `4 pi`: peaks at `2 sqrt(pi) k`.
    Zero,
    /// Logical one: peaks at `2 sqrt(pi) k + sqrt(pi)`.
    One,
}

impl GkpCodeword {
    /// Default codeword for each lattice.
    pub fn default_for(lattice: GkpLattice) -> Self {
        match lattice {
            GkpLattice::Square => GkpCodeword::One,
            GkpLattice::Hex => GkpCodeword::Zero,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GkpCodeword::Qunaught => "qunaught",
            GkpCodeword::Zero => "zero",
            GkpCodeword::One => "one",
        }
    }
}

/// Envelope parameter `Delta = 10^(-dB/20)`.
pub fn gkp_delta(squeezing_db: f64) -> f64 {
    10f64.powf(-squeezing_db / 20.0)
}

/// Comb geometry before the envelope: position spacing, offset of the first
/// peak, shear strength and the final phase-space rotation angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GkpGeometry {
    pub spacing: f64,
    pub offset: f64,
    pub shear: f64,
    pub rotation: f64,
}

impl GkpGeometry {
    pub fn new(lattice: GkpLattice, codeword: GkpCodeword) -> Self {
        let (scale, shear, rotation) = match lattice {
            GkpLattice::Square => (1.0, 0.0, 0.0),
            // shrink the comb and shear p -> p + x/sqrt(3) to turn the square
            // cell into a hexagonal one of equal area, then rotate by -30
            // degrees so one lattice vector lies along x
            GkpLattice::Hex => ((3f64.sqrt() / 2.0).sqrt(), 1.0 / 3f64.sqrt(), -PI / 6.0),
        };
        let (spacing, offset) = match codeword {
            GkpCodeword::Qunaught => ((2.0 * PI).sqrt(), 0.0),
            GkpCodeword::Zero => (2.0 * PI.sqrt(), 0.0),
            GkpCodeword::One => (2.0 * PI.sqrt(), PI.sqrt()),
        };
        Self { spacing: spacing * scale, offset: offset * scale, shear, rotation }
    }
}

/// Fock amplitudes `c_n` (`n <= nmax`) of the finite-energy grid state
/// `exp(-i rot n) exp(-Delta^2 n) exp(i shear x^2/2) sum_s |x = s d + offset>`.
pub fn gkp_fock_amplitudes(geometry: &GkpGeometry, delta: f64, nmax: usize) -> Vec<C64> {
    let reach = (2.0 * nmax as f64 + 1.0).sqrt() + 8.0;
    let smax = ((reach + geometry.offset.abs()) / geometry.spacing).ceil() as i64;
    let mut c = vec![C64::new(0.0, 0.0); nmax + 1];
    for s in -smax..=smax {
        let y = s as f64 * geometry.spacing + geometry.offset;
        if y.abs() > reach {
            continue;
        }
        let phase = (I * (0.5 * geometry.shear * y * y)).exp();
        for (acc, h) in c.iter_mut().zip(hermite_functions(nmax, y)) {
            *acc += phase * h;
        }
    }
    for (n, z) in c.iter_mut().enumerate() {
        let nf = n as f64;
        *z *= (-delta * delta * nf).exp() * (I * (geometry.rotation * nf)).exp();
    }
    c
}

fn gkp_extent(delta: f64, n: usize) -> usize {
    let needed = (34.5 / (delta * delta)).ceil() as usize;
    needed.min(GKP_MAX_FOCK).max(n)
}

/// Finite-energy GKP state with envelope `exp(-Delta^2 n)`.
pub fn gkp_state(
    space: DickeSpace,
    lattice: GkpLattice,
    squeezing_db: f64,
    codeword: GkpCodeword,
) -> Result<Target> {
    if !(squeezing_db > 0.0) || !squeezing_db.is_finite() {
        return Err(Error::InvalidArgument(format!("squeezing must be positive, got {squeezing_db} dB")));
    }
    let delta = gkp_delta(squeezing_db);
    let nmax = gkp_extent(delta, space.n_emitters());
    let full = gkp_fock_amplitudes(&GkpGeometry::new(lattice, codeword), delta, nmax);
    let target = truncate(space, &full)?;
    if target.tail_weight > GKP_ERROR_TAIL {
        let total: f64 = full.iter().map(|z| z.norm_sqr()).sum();
        let mut tail = total;
        let mut min_n = nmax;
        for (k, z) in full.iter().enumerate() {
            tail -= z.norm_sqr();
            if tail / total <= GKP_ERROR_TAIL {
                min_n = k;
                break;
            }
        }
        return Err(Error::Truncation { weight: target.tail_weight, limit: GKP_ERROR_TAIL, min_n });
    }
    Ok(target)
}

/// Description of a target state, parseable from strings such as
/// `cat2:gamma=3`, `cat4:gamma=3,phi=pi/4,legs=clockwise`,
/// `gkp-square:db=10,codeword=one` or `custom:re=1;0,im=0;0`.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    Coherent { gamma: C64 },
    Cat2 { gamma: C64 },
    Cat4 { gamma: C64, phi: f64, legs: LegOrder },
    Gkp { lattice: GkpLattice, squeezing_db: f64, codeword: GkpCodeword },
    Custom { amplitudes: Vec<C64> },
}

impl TargetSpec {
    pub fn gkp(lattice: GkpLattice, squeezing_db: f64) -> Self {
        TargetSpec::Gkp { lattice, squeezing_db, codeword: GkpCodeword::default_for(lattice) }
    }
}

/// Builds the state described by `spec` in `space`.
pub fn make_target(spec: &TargetSpec, space: DickeSpace) -> Result<Target> {
    match spec {
        TargetSpec::Coherent { gamma } => coherent_state(space, *gamma),
        TargetSpec::Cat2 { gamma } => cat2_state(space, *gamma),
        TargetSpec::Cat4 { gamma, phi, legs } => cat4_state(space, *gamma, *phi, *legs),
        TargetSpec::Gkp { lattice, squeezing_db, codeword } => gkp_state(space, *lattice, *squeezing_db, *codeword),
        TargetSpec::Custom { amplitudes } => {
            if amplitudes.len() > space.dim() {
                let tail: f64 = amplitudes[space.dim()..].iter().map(|z| z.norm_sqr()).sum();
                if tail > 0.0 {
                    return Err(Error::LengthMismatch { expected: space.dim(), got: amplitudes.len() });
                }
            }
            let mut full = amplitudes.clone();
            full.resize(space.dim().max(full.len()), C64::new(0.0, 0.0));
            truncate(space, &full)
        }
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse { what: "target spec".into(), msg: msg.into() }
}

/// Reals, optionally written as multiples or fractions of `pi`
/// (`pi`, `pi/4`, `3pi/4`, `-pi/2`, `0.5*pi`).
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let bad = || parse_err(format!("not a number: `{s}`"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    let coeff = match num.strip_suffix("pi") {
        Some(rest) => {
            let rest = rest.trim_end_matches('*').trim();
            match rest {
                "" | "+" => 1.0,
                "-" => -1.0,
                r => r.parse::<f64>().map_err(|_| bad())?,
            }
        }
        None => return Err(bad()),
    };
    Ok(coeff * PI / den)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(';').map(parse_real).collect()
}

impl FromStr for TargetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| parse_err(format!("expected key=value, got `{part}`")))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(parse_err(format!("duplicate key `{}`", k.trim())));
            }
        }
        let allowed: &[&str] = match kind.trim() {
            "coherent" | "cat2" => &["gamma", "gamma_im"],
            "cat4" => &["gamma", "gamma_im", "phi", "legs"],
            "gkp-square" | "gkp-hex" => &["db", "codeword"],
            "custom" => &["re", "im"],
            other => return Err(parse_err(format!("unknown target kind `{other}`"))),
        };
        if let Some(k) = kv.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(parse_err(format!("unknown key `{k}` for `{}`", kind.trim())));
        }
        let real = |k: &str, default: f64| kv.get(k).map(|v| parse_real(v)).unwrap_or(Ok(default));
        let gamma = || -> Result<C64> { Ok(C64::new(real("gamma", 0.0)?, real("gamma_im", 0.0)?)) };
        Ok(match kind.trim() {
            "coherent" => TargetSpec::Coherent { gamma: gamma()? },
            "cat2" => TargetSpec::Cat2 { gamma: gamma()? },
            "cat4" => {
                let legs = match kv.get("legs").map(String::as_str) {
                    None | Some("counter-clockwise") => LegOrder::CounterClockwise,
                    Some("clockwise") => LegOrder::Clockwise,
                    Some(o) => return Err(parse_err(format!("unknown leg order `{o}`"))),
                };
                TargetSpec::Cat4 { gamma: gamma()?, phi: real("phi", 0.0)?, legs }
            }
            k @ ("gkp-square" | "gkp-hex") => {
                let lattice = if k == "gkp-square" { GkpLattice::Square } else { GkpLattice::Hex };
                let codeword = match kv.get("codeword").map(String::as_str) {
                    None => GkpCodeword::default_for(lattice),
                    Some("qunaught") => GkpCodeword::Qunaught,
                    Some("zero") => GkpCodeword::Zero,
                    Some("one") => GkpCodeword::One,
                    Some(o) => return Err(parse_err(format!("unknown codeword `{o}`"))),
                };
                TargetSpec::Gkp { lattice, squeezing_db: real("db", 10.0)?, codeword }
            }
            _ => {
                let re = parse_list(kv.get("re").ok_or_else(|| parse_err("custom target needs re=..."))?)?;
                let im = match kv.get("im") {
                    Some(v) => parse_list(v)?,
                    None => vec![0.0; re.len()],
                };
                if im.len() != re.len() {
                    return Err(parse_err("re and im lists differ in length"));
                }
                TargetSpec::Custom { amplitudes: re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect() }
            }
        })
    }
}

fn fmt_gamma(f: &mut fmt::Formatter<'_>, g: C64) -> fmt::Result {
    write!(f, "gamma={}", g.re)?;
    if g.im != 0.0 {
        write!(f, ",gamma_im={}", g.im)?;
    }
    Ok(())
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Coherent { gamma } => {
                f.write_str("coherent:")?;
                fmt_gamma(f, *gamma)
            }
            TargetSpec::Cat2 { gamma } => {
                f.write_str("cat2:")?;
                fmt_gamma(f, *gamma)
            }
            TargetSpec::Cat4 { gamma, phi, legs } => {
                f.write_str("cat4:")?;
                fmt_gamma(f, *gamma)?;
                write!(f, ",phi={phi},legs={}", legs.name())
            }
            TargetSpec::Gkp { lattice, squeezing_db, codeword } => {
                let kind = match lattice {
                    GkpLattice::Square => "gkp-square",
                    GkpLattice::Hex => "gkp-hex",
                };
                write!(f, "{kind}:db={squeezing_db},codeword={}", codeword.name())
            }
            TargetSpec::Custom { amplitudes } => {
                let re: Vec<String> = amplitudes.iter().map(|z| z.re.to_string()).collect();
                let im: Vec<String> = amplitudes.iter().map(|z| z.im.to_string()).collect();
                write!(f, "custom:re={},im={}", re.join(";"), im.join(";"))
            }
        }
    }
}
