//! Random-restart Nelder-Mead over flattened pulse parameters.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dicke::{fidelity, CVector, DickeSpace, QuantumState};
use crate::error::{Error, Result};
use crate::gates::{flatten_params, param_count, unflatten_params, GateConvention, GateSet, PulseSequence};

/// How candidate points outside the box are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundHandling {
    /// Project every candidate onto the box.
    #[default]
    Clamp,
    /// Evaluate at the projected point and add the squared distance to the box.
    Penalty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_steps: usize,
    pub restarts: usize,
    pub nm_max_iters: usize,
    /// Nelder-Mead stops once the simplex diameter falls below this.
    pub nm_tolerance: f64,
    pub free_param_budget: usize,
    pub angle_bounds: [f64; 2],
    pub squeeze_bounds: [f64; 2],
    pub seed: u64,
    pub freeze_rounds: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    pub bound_handling: BoundHandling,
    /// Stop once a restart reaches this fidelity. Restarts run in fixed
    /// chunks and the check happens between chunks, so the outcome does not
    /// depend on the thread count.
    pub stop_fidelity: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            max_steps: 3,
            restarts: 50,
            nm_max_iters: 4000,
            nm_tolerance: 1e-8,
            free_param_budget: 20,
            angle_bounds: [-pi, pi],
            squeeze_bounds: [-pi, pi],
            seed: 0,
            freeze_rounds: 3,
            initial_step: 0.5,
            bound_handling: BoundHandling::Clamp,
            stop_fidelity: None,
        }
    }
}

/// Number of restarts run between early-stopping checks.
pub const RESTART_CHUNK: usize = 8;

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, b) in [("angle_bounds", self.angle_bounds), ("squeeze_bounds", self.squeeze_bounds)] {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return bad(format!("{name} must be a finite interval, got [{}, {}]", b[0], b[1]));
            }
            if b[0] > 0.0 || b[1] < 0.0 {
                return bad(format!("{name} must contain 0 so that identity steps are feasible"));
            }
        }
        if self.free_param_budget == 0 {
            return bad("free_param_budget must be positive".into());
        }
        if !(self.nm_tolerance >= 0.0) || !(self.initial_step > 0.0) {
            return bad("nm_tolerance must be >= 0 and initial_step > 0".into());
        }
        if let Some(s) = self.stop_fidelity {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("stop_fidelity must lie in [0, 1], got {s}"));
            }
        }
        Ok(())
    }

    /// Free coordinates per round: the budget, capped at the parameter count.
    pub fn free_params(&self, m: usize) -> usize {
        self.free_param_budget.min(param_count(m))
    }

    /// Per-coordinate box for `m` steps.
    pub fn bounds(&self, m: usize) -> Vec<[f64; 2]> {
        let mut b = Vec::with_capacity(param_count(m));
        for _ in 0..m {
            b.extend([self.angle_bounds; 3]);
            b.extend([self.squeeze_bounds; 2]);
        }
        b.extend([self.angle_bounds; 3]);
        b
    }
}

/// `1 - fidelity` of the sequence output (started from `|0>`) with a target.
pub struct Objective {
    gates: GateSet,
    target: QuantumState,
    convention: GateConvention,
    initial: CVector,
}

impl Objective {
    pub fn new(target: QuantumState, convention: GateConvention) -> Self {
        let space = target.space();
        Self {
            gates: GateSet::new(space),
            initial: QuantumState::ground(space).amplitudes().unwrap().clone(),
            target,
            convention,
        }
    }

    pub fn space(&self) -> DickeSpace {
        self.target.space()
    }

    pub fn target(&self) -> &QuantumState {
        &self.target
    }

    pub fn convention(&self) -> GateConvention {
        self.convention
    }

    pub fn sequence(&self, m: usize, params: &[f64]) -> Result<PulseSequence> {
        Ok(unflatten_params(self.space(), m, params)?.with_convention(self.convention))
    }

    /// Objective for `m` steps; `params.len()` must be `5m + 3`.
    pub fn eval(&self, m: usize, params: &[f64]) -> Result<f64> {
        let seq = self.sequence(m, params)?;
        let psi = self.gates.evolve(&seq, &self.initial);
        let f = match self.target.amplitudes() {
            Some(t) => t.dotc(&psi).norm_sqr(),
            None => fidelity(&QuantumState::normalized(self.space(), psi)?, &self.target)?,
        };
        Ok((1.0 - f).clamp(0.0, 1.0))
    }
}

/// Objective with the default gate convention.
pub fn objective(params: &[f64], space: DickeSpace, target: &QuantumState) -> Result<f64> {
    if target.space() != space {
        return Err(Error::SpaceMismatch(space, target.space()));
    }
    let p = params.len();
    if p < 3 || (p - 3) % 5 != 0 {
        return Err(Error::LengthMismatch { expected: param_count((p.max(3) - 3) / 5), got: p });
    }
    Objective::new(target.clone(), GateConvention::default()).eval((p - 3) / 5, params)
}

/// Settings of a single Nelder-Mead call.
#[derive(Clone, Copy, Debug)]
pub struct NelderMeadSettings {
    pub max_iters: usize,
    pub tolerance: f64,
    pub initial_step: f64,
    pub bound_handling: BoundHandling,
}

impl From<&OptimizerConfig> for NelderMeadSettings {
    fn from(c: &OptimizerConfig) -> Self {
        Self {
            max_iters: c.nm_max_iters,
            tolerance: c.nm_tolerance,
            initial_step: c.initial_step,
            bound_handling: c.bound_handling,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Boxed<'a, F> {
    f: F,
    x0: &'a [f64],
    free: &'a [usize],
    bounds: &'a [[f64; 2]],
    handling: BoundHandling,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Boxed<'_, F> {
    /// Full-length point for free coordinates `y`, clamped to the box; also
    /// the squared distance that clamping removed.
    fn embed(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mut x = self.x0.to_vec();
        let mut dist = 0.0;
        for (&i, &v) in self.free.iter().zip(y) {
            let [lo, hi] = self.bounds[i];
            let c = v.clamp(lo, hi);
            dist += (v - c) * (v - c);
            x[i] = c;
        }
        (x, dist)
    }

    fn eval(&mut self, y: &[f64]) -> Result<f64> {
        let (x, dist) = self.embed(y);
        self.evaluations += 1;
        let v = (self.f)(&x)?;
        Ok(match self.handling {
            BoundHandling::Clamp => v,
            BoundHandling::Penalty => v + dist,
        })
    }

    /// Candidate points are stored already projected when clamping, so the
    /// simplex itself never leaves the box.
    fn project(&self, y: Vec<f64>) -> Vec<f64> {
        match self.handling {
            BoundHandling::Clamp => {
                y.into_iter().zip(self.free).map(|(v, &i)| v.clamp(self.bounds[i][0], self.bounds[i][1])).collect()
            }
            BoundHandling::Penalty => y,
        }
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (a - b)
    a.iter().zip(b).map(|(x, y)| x + t * (x - y)).collect()
}

/// Nelder-Mead on the coordinates not marked in `frozen`, with coefficients
/// 1, 2, 1/2, 1/2. Frozen coordinates of the result are copied from `x0`.
pub fn nelder_mead<F>(
    f: F,
    x0: &[f64],
    frozen: &[bool],
    bounds: &[[f64; 2]],
    settings: &NelderMeadSettings,
) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    for len in [frozen.len(), bounds.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    for (i, (&x, b)) in x0.iter().zip(bounds).enumerate() {
        if !(b[0] <= x && x <= b[1]) {
            return Err(Error::InvalidArgument(format!("x0[{i}] = {x} lies outside [{}, {}]", b[0], b[1])));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !frozen[i]).collect();
    if free.is_empty() {
        return Err(Error::AllFrozen);
    }
    let d = free.len();
    let mut obj = Boxed { f, x0, free: &free, bounds, handling: settings.bound_handling, evaluations: 0 };

    let start: Vec<f64> = free.iter().map(|&i| x0[i]).collect();
    let mut simplex = vec![start.clone()];
    for (k, &i) in free.iter().enumerate() {
        let mut v = start.clone();
        let [lo, hi] = bounds[i];
        let h = settings.initial_step;
        // step inward when the forward step would leave the box
        v[k] = if v[k] + h <= hi { v[k] + h } else if v[k] - h >= lo { v[k] - h } else { v[k] + h };
        simplex.push(obj.project(v));
    }
    let mut values = Vec::with_capacity(d + 1);
    for v in &simplex {
        values.push(obj.eval(v)?);
    }

    let mut iterations = 0;
    loop {
        // stable sort keeps earlier vertices first on ties
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < settings.tolerance || iterations >= settings.max_iters {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            centroid.iter_mut().zip(v).for_each(|(c, x)| *c += x);
        }
        centroid.iter_mut().for_each(|c| *c /= d as f64);

        let worst = simplex[d].clone();
        let reflected = obj.project(affine(&centroid, &worst, 1.0));
        let fr = obj.eval(&reflected)?;
        if fr < values[0] {
            let expanded = obj.project(affine(&centroid, &worst, 2.0));
            let fe = obj.eval(&expanded)?;
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
            continue;
        }
        let outside = fr < values[d];
        let toward = if outside { &reflected } else { &worst };
        let contracted = obj.project(centroid.iter().zip(toward).map(|(c, x)| c + 0.5 * (x - c)).collect());
        let fc = obj.eval(&contracted)?;
        if (outside && fc <= fr) || (!outside && fc < values[d]) {
            simplex[d] = contracted;
            values[d] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for k in 1..=d {
            let v: Vec<f64> = best.iter().zip(&simplex[k]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            simplex[k] = obj.project(v);
            values[k] = obj.eval(&simplex[k])?;
        }
    }

    let (x, _) = obj.embed(&simplex[0]);
    let evaluations = obj.evaluations;
    // the reported value is the objective itself, penalty excluded
    let f = (obj.f)(&x)?;
    Ok(NelderMeadResult { x, f, iterations, evaluations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryEntry {
    /// `None` for the starting point evaluated before any restart.
    pub restart: Option<usize>,
    /// Freeze round within the restart; the growth stage for grown runs.
    pub round: usize,
    /// Number of steps at the time of the entry.
    pub steps: usize,
    pub fidelity: f64,
    pub best_so_far: f64,
}

/// Seed of the random stream owned by one restart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StreamRecord {
    pub restart: usize,
    pub stream_seed: u64,
}

#[derive(Clone, Debug)]
pub struct OptimizationRun {
    pub config: OptimizerConfig,
    pub steps: usize,
    pub best_params: Vec<f64>,
    pub best_sequence: PulseSequence,
    pub best_fidelity: f64,
    pub history: Vec<HistoryEntry>,
    pub rng_trace: Vec<StreamRecord>,
    /// Restarts completed so far (resume point).
    pub restarts_done: usize,
    pub evaluations: usize,
}

/// Stream seed of restart `r`.
pub fn stream_seed(seed: u64, restart: usize) -> u64 {
    seed ^ restart as u64
}

/// Outcome of one restart (or of one continuation from a fixed start).
struct Attempt {
    params: Vec<f64>,
    value: f64,
    rounds: Vec<f64>,
    evaluations: usize,
}

/// Freeze rounds from `x`; each round frees a fresh uniform subset of
/// `free_params` coordinates.
fn refine(obj: &Objective, m: usize, mut x: Vec<f64>, rng: &mut ChaCha8Rng, config: &OptimizerConfig) -> Result<Attempt> {
    let p = param_count(m);
    let bounds = config.bounds(m);
    let free = config.free_params(m);
    let settings = NelderMeadSettings::from(config);
    let mut value = obj.eval(m, &x)?;
    let mut rounds = Vec::with_capacity(config.freeze_rounds);
    let mut evaluations = 1;
    for _ in 0..config.freeze_rounds {
        let mut frozen = vec![true; p];
        for i in sample(rng, p, free) {
            frozen[i] = false;
        }
        let r = nelder_mead(|v| obj.eval(m, v), &x, &frozen, &bounds, &settings)?;
        evaluations += r.evaluations + 1;
        if r.f < value || (r.f == value && r.x != x) {
            x = r.x;
            value = r.f;
        }
        rounds.push(1.0 - value);
        if config.stop_fidelity.is_some_and(|s| 1.0 - value >= s) {
            break;
        }
    }
    Ok(Attempt { params: x, value, rounds, evaluations })
}

fn restart(obj: &Objective, m: usize, r: usize, config: &OptimizerConfig) -> Result<Attempt> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, r));
    let x0: Vec<f64> = config.bounds(m).iter().map(|b| rng.random_range(b[0]..=b[1])).collect();
    refine(obj, m, x0, &mut rng, config)
}

impl OptimizationRun {
    fn baseline(obj: &Objective, config: &OptimizerConfig, m: usize, params: Vec<f64>) -> Result<Self> {
        let value = obj.eval(m, &params)?;
        let f = 1.0 - value;
        Ok(Self {
            config: config.clone(),
            steps: m,
            best_sequence: obj.sequence(m, &params)?,
            best_params: params,
            best_fidelity: f,
            history: vec![HistoryEntry { restart: None, round: 0, steps: m, fidelity: f, best_so_far: f }],
            rng_trace: Vec::new(),
            restarts_done: 0,
            evaluations: 1,
        })
    }

    fn absorb(&mut self, obj: &Objective, r: Option<usize>, attempt: Attempt) -> Result<()> {
        self.evaluations += attempt.evaluations;
        for (round, f) in attempt.rounds.iter().enumerate() {
            let best_so_far = self.best_fidelity.max(*f);
            self.history.push(HistoryEntry { restart: r, round, steps: self.steps, fidelity: *f, best_so_far });
        }
        let f = 1.0 - attempt.value;
        // strict improvement only, so ties go to the earliest restart
        if f > self.best_fidelity {
            self.best_fidelity = f;
            self.best_sequence = obj.sequence(self.steps, &attempt.params)?;
            self.best_params = attempt.params;
        }
        Ok(())
    }

    fn reached_stop(&self) -> bool {
        self.config.stop_fidelity.is_some_and(|s| self.best_fidelity >= s)
    }

    /// Runs the configured restarts not yet done, calling `on_progress` after
    /// every chunk of restarts (checkpoints then record the resume point
    /// even when the best did not change).
    pub fn run_restarts(&mut self, obj: &Objective, mut on_progress: impl FnMut(&OptimizationRun) -> Result<()>) -> Result<()> {
        let m = self.steps;
        while self.restarts_done < self.config.restarts && !self.reached_stop() {
            let end = (self.restarts_done + RESTART_CHUNK).min(self.config.restarts);
            let attempts: Vec<Result<Attempt>> =
                (self.restarts_done..end).into_par_iter().map(|r| restart(obj, m, r, &self.config)).collect();
            for (r, attempt) in (self.restarts_done..end).zip(attempts) {
                self.rng_trace.push(StreamRecord { restart: r, stream_seed: stream_seed(self.config.seed, r) });
                self.absorb(obj, Some(r), attempt?)?;
                if self.reached_stop() {
                    self.restarts_done = r + 1;
                    break;
                }
                self.restarts_done = r + 1;
            }
            on_progress(self)?;
        }
        Ok(())
    }
}

/// Restart search for `config.max_steps` steps, starting from the all-zero
/// (identity) sequence as the incumbent.
pub fn random_restart_search(space: DickeSpace, target: &QuantumState, config: &OptimizerConfig) -> Result<OptimizationRun> {
    config.validate()?;
    if target.space() != space {
        return Err(Error::SpaceMismatch(space, target.space()));
    }
    let obj = Objective::new(target.clone(), GateConvention::default());
    search_with(&obj, config, config.max_steps, None, |_| Ok(()))
}

/// Saved progress of an interrupted run.
#[derive(Clone, Debug, PartialEq)]
pub struct Resume {
    pub params: Vec<f64>,
    pub steps: usize,
    pub restarts_done: usize,
}

/// Restart search with an explicit objective and step count. With `resume`
/// the saved parameters are the incumbent and restarts continue after the
/// last completed one.
pub fn search_with(
    obj: &Objective,
    config: &OptimizerConfig,
    m: usize,
    resume: Option<Resume>,
    on_progress: impl FnMut(&OptimizationRun) -> Result<()>,
) -> Result<OptimizationRun> {
    config.validate()?;
    let (params, done) = match resume {
        Some(r) if r.steps == m => (r.params, r.restarts_done),
        Some(r) => return Err(Error::LengthMismatch { expected: param_count(m), got: param_count(r.steps) }),
        None => (vec![0.0; param_count(m)], 0),
    };
    let mut run = OptimizationRun::baseline(obj, config, m, params)?;
    run.restarts_done = done;
    run.run_restarts(obj, on_progress)?;
    Ok(run)
}

/// Stream tag for the continuation after a growth step, kept clear of the
/// restart indices.
const GROWTH_STREAM: u64 = 1 << 63;

/// Inserts a zero step at `position` (the identity, so the objective is
/// unchanged) and continues optimizing from the grown parameter vector.
pub fn grow_sequence(run: &OptimizationRun, obj: &Objective, position: usize) -> Result<OptimizationRun> {
    let grown = grow_params(&run.best_params, run.steps, position)?;
    let m = run.steps + 1;
    let mut next = run.clone();
    next.steps = m;
    next.best_sequence = obj.sequence(m, &grown)?;
    next.best_params = grown.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(run.config.seed ^ GROWTH_STREAM ^ m as u64);
    let attempt = refine(obj, m, grown, &mut rng, &run.config)?;
    let stage = run.history.iter().filter(|h| h.restart.is_none()).count();
    next.evaluations += attempt.evaluations;
    let f = 1.0 - attempt.value;
    // refine never returns a worse point than its start, which equals the
    // incumbent; keep the incumbent on ties
    if f > next.best_fidelity {
        next.best_fidelity = f;
        next.best_sequence = obj.sequence(m, &attempt.params)?;
        next.best_params = attempt.params;
    }
    next.history.push(HistoryEntry {
        restart: None,
        round: stage,
        steps: m,
        fidelity: f,
        best_so_far: next.best_fidelity,
    });
    Ok(next)
}

fn pad_sequence(run: &OptimizationRun, obj: &Objective, position: usize) -> Result<OptimizationRun> {
    let mut next = run.clone();
    next.steps += 1;
    next.best_params = grow_params(&run.best_params, run.steps, position)?;
    next.best_sequence = obj.sequence(next.steps, &next.best_params)?;
    Ok(next)
}

/// Parameter vector of `m` steps with a zero step inserted at `position`.
pub fn grow_params(params: &[f64], m: usize, position: usize) -> Result<Vec<f64>> {
    if params.len() != param_count(m) {
        return Err(Error::LengthMismatch { expected: param_count(m), got: params.len() });
    }
    if position > m {
        return Err(Error::InvalidArgument(format!("insert position {position} exceeds step count {m}")));
    }
    let mut out = params[..5 * position].to_vec();
    out.extend([0.0; 5]);
    out.extend_from_slice(&params[5 * position..]);
    Ok(out)
}

/// Growth schedule: restart search at `start_steps`, then repeatedly insert
/// a zero step in the middle and continue optimizing, up to
/// `config.max_steps`. A resumed run picks up at its saved step count.
pub fn optimize_with_growth(
    obj: &Objective,
    config: &OptimizerConfig,
    start_steps: usize,
    resume: Option<Resume>,
    mut on_progress: impl FnMut(&OptimizationRun) -> Result<()>,
) -> Result<OptimizationRun> {
    config.validate()?;
    let start = resume.as_ref().map_or(start_steps.min(config.max_steps), |r| r.steps);
    let mut run = search_with(obj, config, start, resume, &mut on_progress)?;
    while run.steps < config.max_steps {
        run = if config.restarts == 0 {
            // no optimization budget: growth only pads with identity steps
            pad_sequence(&run, obj, run.steps / 2)?
        } else {
            grow_sequence(&run, obj, run.steps / 2)?
        };
        on_progress(&run)?;
    }
    Ok(run)
}

/// Flattened parameters of a sequence, for resuming from a saved one.
pub fn params_of(seq: &PulseSequence) -> Vec<f64> {
    flatten_params(seq)
}
