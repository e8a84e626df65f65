//! Subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use symctl::algebra::{
    lie_closure, loglog_slope, oscillator_closure, trotter_commutator_error, trotter_sum_error, OscillatorSet,
};
use symctl::gates::{apply_sequence, flatten_params, sequence_states, ExponentSign};
use symctl::io::write_atomic;
use symctl::optimizer::{optimize_with_growth, Objective, OptimizationRun, OptimizerConfig, Resume};
use symctl::wigner::{planar_wigner, spherical_wigner, PlaneGrid, SphereGrid, PLANAR_LABEL};
use symctl::{
    build_sx, build_sy, build_sz, make_target, Convention, DickeSpace, GateConvention, QuantumState,
    RotationComposition, SqueezeOrder, SymmetricOperator, TargetSpec,
};

use crate::error::{CliError, CliResult};
use crate::fixtures::load_source;
use crate::record::{InputDigest, ResultRecord};
use crate::replay::{fidelity_spread, replay_fidelity, size_sweep, sweep, Setting};
use crate::sequence_file::SequenceFile;

#[derive(Debug, Parser)]
#[command(name = "symctl", version, about = "Collective-spin control of symmetric emitter ensembles")]
pub struct Cli {
    /// Write the JSON result record to this file instead of stdout.
    #[arg(long, global = true)]
    pub record: Option<PathBuf>,
    /// Add the wall time to the result record (makes records differ between runs).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a sequence file (or `bundled:NAME`) against a target.
    Replay(ReplayArgs),
    /// Optimize a sequence for a target with random restarts and growth.
    Optimize(OptimizeArgs),
    /// Wigner function grids of a target or of a sequence's output.
    Wigner(WignerArgs),
    /// Lie-algebra closure of a generator set.
    Closure(ClosureArgs),
    /// Product-formula error scaling.
    TrotterCheck(TrotterArgs),
    /// Replay one sequence at several ensemble sizes.
    SizeSweep(SizeSweepArgs),
}

/// Overrides of the conventions stored in a sequence file.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct GateOverrides {
    #[arg(long)]
    pub convention: Option<Convention>,
    #[arg(long)]
    pub squeeze_order: Option<SqueezeOrder>,
    #[arg(long)]
    pub rotation_composition: Option<RotationComposition>,
    #[arg(long)]
    pub exponent_sign: Option<ExponentSign>,
}

impl GateOverrides {
    fn apply(&self, base: Setting) -> Setting {
        Setting {
            convention: self.convention.unwrap_or(base.convention),
            gates: GateConvention {
                squeeze_order: self.squeeze_order.unwrap_or(base.gates.squeeze_order),
                rotation_composition: self.rotation_composition.unwrap_or(base.gates.rotation_composition),
                exponent_sign: self.exponent_sign.unwrap_or(base.gates.exponent_sign),
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// Sequence file path or `bundled:cat2|cat4|gkp-hex|gkp-square`.
    pub source: String,
    /// Target spec such as `cat2:gamma=3`; defaults to the file's `target` metadata.
    #[arg(long)]
    pub target: Option<String>,
    /// Ensemble size; defaults to the file's `n_emitters`.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub gates: GateOverrides,
    /// Replay under every combination of conventions and report the best.
    #[arg(long)]
    pub sweep_conventions: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub n: usize,
    /// Sequence file written after every chunk of restarts and at the end.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with optimizer settings; flags below take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Steps of the first stage; later stages insert one zero step each.
    #[arg(long, default_value_t = 2)]
    pub start_steps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stop_fidelity: Option<f64>,
    /// Continue from the sequence already at `--out`.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub gates: GateOverrides,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Sphere,
    Plane,
}

#[derive(Debug, Args, Serialize)]
pub struct WignerArgs {
    /// Sequence whose output state (from `|0>`) is plotted.
    #[arg(long, conflicts_with = "target")]
    pub sequence: Option<String>,
    /// Target state to plot.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = GridKind::Sphere)]
    pub kind: GridKind,
    #[arg(long)]
    pub n_theta: Option<usize>,
    #[arg(long)]
    pub n_phi: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    /// One grid per step plus one after the final rotation; `--out` is a directory.
    #[arg(long, requires = "sequence")]
    pub per_step: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gates: GateOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorSet {
    /// `{Sx, Sy, Sx^2, Sy^2}`.
    SqueezingRotations,
    /// `{Sx, Sy}`.
    RotationsOnly,
    /// `{x, p, x^2, p^2, (xp+px)/2}` truncated at `--cutoff`.
    Oscillator,
    /// The oscillator set plus `x^3`.
    OscillatorCubic,
    /// Operators listed in `--generators`.
    Custom,
}

#[derive(Debug, Args, Serialize)]
pub struct ClosureArgs {
    #[arg(long, value_enum)]
    pub set: GeneratorSet,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 12)]
    pub cutoff: usize,
    /// Comma-separated names from sx, sy, sz, sx2, sy2, sz2.
    #[arg(long, value_delimiter = ',')]
    pub generators: Vec<String>,
    #[arg(long, default_value_t = symctl::algebra::DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    #[arg(long)]
    pub convention: Option<Convention>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrotterArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Operator name (sx, sy, sz, sx2, sy2, sz2).
    #[arg(long, default_value = "sx2")]
    pub a: String,
    #[arg(long, default_value = "sy")]
    pub b: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub ks: Vec<usize>,
    #[arg(long)]
    pub convention: Option<Convention>,
}

#[derive(Debug, Args, Serialize)]
pub struct SizeSweepArgs {
    pub source: String,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[command(flatten)]
    pub gates: GateOverrides,
}

/// Runs a parsed command line and returns its record.
pub fn run(cli: &Cli) -> CliResult<ResultRecord> {
    let start = Instant::now();
    let mut record = match &cli.command {
        Command::Replay(a) => cmd_replay(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Wigner(a) => cmd_wigner(a),
        Command::Closure(a) => cmd_closure(a),
        Command::TrotterCheck(a) => cmd_trotter(a),
        Command::SizeSweep(a) => cmd_size_sweep(a),
    }?;
    if cli.timing {
        record.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(record)
}

fn digest_for(command: &str, args: &impl Serialize) -> CliResult<InputDigest> {
    let mut d = InputDigest::new(command);
    d.add_json("args", args)?;
    Ok(d)
}

fn record(command: &str, digest: InputDigest, seed: Option<u64>, outputs: Value) -> ResultRecord {
    ResultRecord { command: command.into(), input_digest: digest.finish(), seed, outputs, wall_time_s: None }
}

fn parse_target(s: &str) -> CliResult<TargetSpec> {
    Ok(s.parse::<TargetSpec>()?)
}

fn target_spec(explicit: Option<&str>, file: &SequenceFile) -> CliResult<TargetSpec> {
    match explicit.or(file.metadata.get("target").map(String::as_str)) {
        Some(s) => parse_target(s),
        None => Err(CliError::Invalid("no --target given and the sequence file names none".into())),
    }
}

fn file_setting(file: &SequenceFile) -> Setting {
    Setting { convention: file.convention, gates: file.gate_convention() }
}

fn warn_truncation(tail: f64) {
    if tail > symctl::targets::WARN_TAIL {
        eprintln!("warning: target truncation discarded weight {tail:.3e}");
    }
}

pub fn cmd_replay(a: &ReplayArgs) -> CliResult<ResultRecord> {
    let (file, text) = load_source(&a.source)?;
    let mut digest = digest_for("replay", a)?;
    digest.add("sequence", text.as_bytes());
    let spec = target_spec(a.target.as_deref(), &file)?;
    let setting = a.gates.apply(file_setting(&file));
    let n = a.n.unwrap_or(file.n_emitters);
    let space = DickeSpace::with_convention(n, setting.convention)?;
    let seq = file.to_sequence()?.on_space(space);
    let target = make_target(&spec, space)?;
    warn_truncation(target.tail_weight);

    let mut outputs = json!({
        "source": a.source,
        "target": spec.to_string(),
        "n_emitters": n,
        "steps": seq.len(),
        "target_tail_weight": target.tail_weight,
    });
    if a.sweep_conventions {
        let (entries, best) = sweep(&seq, &target.state)?;
        outputs["sweep"] = serde_json::to_value(&entries).expect("serializable");
        outputs["best"] = serde_json::to_value(&entries[best]).expect("serializable");
        outputs["fidelity"] = json!(entries[best].fidelity);
    } else {
        let f = replay_fidelity(&seq, &target.state, setting)?;
        outputs["setting"] = serde_json::to_value(setting).expect("serializable");
        outputs["fidelity"] = json!(f);
    }
    Ok(record("replay", digest, None, outputs))
}

fn load_optimizer_config(a: &OptimizeArgs, digest: &mut InputDigest) -> CliResult<OptimizerConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            digest.add("config", text.as_bytes());
            toml::from_str(&text)
                .map_err(|e| CliError::Schema(format!("{}: {}", p.display(), e.to_string().trim_end())))?
        }
        None => OptimizerConfig::default(),
    };
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    if let Some(m) = a.max_steps {
        cfg.max_steps = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.stop_fidelity.is_some() {
        cfg.stop_fidelity = a.stop_fidelity;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checkpoint(run: &OptimizationRun, spec: &TargetSpec, path: &Path) -> CliResult<()> {
    let mut meta = BTreeMap::new();
    meta.insert("target".into(), spec.to_string());
    meta.insert("fidelity".into(), run.best_fidelity.to_string());
    meta.insert("restarts_done".into(), run.restarts_done.to_string());
    meta.insert("seed".into(), run.config.seed.to_string());
    SequenceFile::from_sequence(&run.best_sequence, meta).save(path)
}

fn resume_point(path: &Path, space: DickeSpace, spec: &TargetSpec) -> CliResult<Option<Resume>> {
    if !path.exists() {
        return Ok(None);
    }
    let file = SequenceFile::load(path)?;
    if file.n_emitters != space.n_emitters() {
        return Err(CliError::Invalid(format!(
            "checkpoint {} is for N={}, not N={}",
            path.display(),
            file.n_emitters,
            space.n_emitters()
        )));
    }
    if file.metadata.get("target") != Some(&spec.to_string()) {
        return Err(CliError::Invalid(format!("checkpoint {} was made for another target", path.display())));
    }
    let restarts_done = match file.metadata.get("restarts_done") {
        Some(s) => s.parse().map_err(|_| CliError::Schema(format!("{}: bad restarts_done `{s}`", path.display())))?,
        None => 0,
    };
    let seq = file.to_sequence()?;
    Ok(Some(Resume { params: flatten_params(&seq), steps: seq.len(), restarts_done }))
}

pub fn cmd_optimize(a: &OptimizeArgs) -> CliResult<ResultRecord> {
    let mut digest = digest_for("optimize", a)?;
    let cfg = load_optimizer_config(a, &mut digest)?;
    let spec = parse_target(&a.target)?;
    let setting = a.gates.apply(Setting { convention: Convention::default(), gates: GateConvention::default() });
    let space = DickeSpace::with_convention(a.n, setting.convention)?;
    let target = make_target(&spec, space)?;
    warn_truncation(target.tail_weight);
    let resume = if a.resume { resume_point(&a.out, space, &spec)? } else { None };
    if let Some(r) = &resume {
        digest.add_json("resume", &(r.steps, r.restarts_done, &r.params))?;
    }
    let obj = Objective::new(target.state, setting.gates);
    let run = optimize_with_growth(&obj, &cfg, a.start_steps.max(1), resume, |run| {
        checkpoint(run, &spec, &a.out).map_err(|e| match e {
            CliError::Core(c) => c,
            other => symctl::Error::InvalidArgument(other.to_string()),
        })
    })?;
    checkpoint(&run, &spec, &a.out)?;
    let outputs = json!({
        "target": spec.to_string(),
        "n_emitters": a.n,
        "setting": setting,
        "config": run.config,
        "best_fidelity": run.best_fidelity,
        "steps": run.steps,
        "restarts_done": run.restarts_done,
        "evaluations": run.evaluations,
        "sequence_file": a.out.display().to_string(),
        "history": run.history,
        "rng_trace": run.rng_trace,
    });
    Ok(record("optimize", digest, Some(cfg.seed), outputs))
}

fn sphere_summary(grid: &SphereGrid, file: &Path) -> Value {
    let (theta, phi, w) = grid.argmax();
    json!({
        "file": file.display().to_string(),
        "integral": grid.integral(),
        "min": grid.min_value(),
        "argmax": { "theta": theta, "phi": phi, "w": w },
    })
}

fn plane_summary(grid: &PlaneGrid, file: &Path) -> Value {
    json!({
        "file": file.display().to_string(),
        "integral": grid.integral(),
        "boundary_max": grid.boundary_max,
        "window_warning": grid.window_warning(),
    })
}

fn write_grid(state: &QuantumState, a: &WignerArgs, path: &Path) -> CliResult<Value> {
    let n = state.space().n_emitters();
    let csv_and_summary = match a.kind {
        GridKind::Sphere => {
            let (dt, dp) = SphereGrid::default_shape(n);
            let grid = spherical_wigner(state, a.n_theta.unwrap_or(dt), a.n_phi.unwrap_or(dp))?;
            (grid.to_csv(), sphere_summary(&grid, path))
        }
        GridKind::Plane => {
            let w = a.half_width.unwrap_or_else(|| PlaneGrid::default_half_width(n));
            let grid = planar_wigner(state, w, a.resolution)?;
            if grid.window_warning() {
                eprintln!("warning: |W| reaches {:.3e} on the window boundary; widen --half-width", grid.boundary_max);
            }
            (grid.to_csv(), plane_summary(&grid, path))
        }
    };
    write_atomic(path, csv_and_summary.0.as_bytes())?;
    Ok(csv_and_summary.1)
}

pub fn cmd_wigner(a: &WignerArgs) -> CliResult<ResultRecord> {
    let mut digest = digest_for("wigner", a)?;
    let mut outputs = json!({ "kind": a.kind });
    let states: Vec<(String, QuantumState)> = match (&a.sequence, &a.target) {
        (Some(source), _) => {
            let (file, text) = load_source(source)?;
            digest.add("sequence", text.as_bytes());
            let setting = a.gates.apply(file_setting(&file));
            let space = DickeSpace::with_convention(a.n.unwrap_or(file.n_emitters), setting.convention)?;
            let seq = file.to_sequence()?.on_space(space).with_convention(setting.gates);
            outputs["setting"] = serde_json::to_value(setting).expect("serializable");
            let ground = QuantumState::ground(space);
            if a.per_step {
                let states = sequence_states(&seq, &ground)?;
                let last = states.len() - 1;
                states
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| (if i == last { "final.csv".into() } else { format!("step_{:02}.csv", i + 1) }, s))
                    .collect()
            } else {
                vec![(String::new(), apply_sequence(&seq, &ground)?)]
            }
        }
        (None, Some(t)) => {
            let spec = parse_target(t)?;
            let n = a.n.ok_or_else(|| CliError::Invalid("--n is required with --target".into()))?;
            let target = make_target(&spec, DickeSpace::new(n)?)?;
            warn_truncation(target.tail_weight);
            outputs["target"] = json!(spec.to_string());
            vec![(String::new(), target.state)]
        }
        (None, None) => return Err(CliError::Invalid("give --sequence or --target".into())),
    };
    if matches!(a.kind, GridKind::Plane) {
        eprintln!("note: {PLANAR_LABEL}");
        outputs["label"] = json!(PLANAR_LABEL);
    }
    let mut grids = Vec::with_capacity(states.len());
    if a.per_step {
        fs::create_dir_all(&a.out)?;
    }
    for (name, state) in &states {
        let path = if a.per_step { a.out.join(name) } else { a.out.clone() };
        grids.push(write_grid(state, a, &path)?);
    }
    outputs["grids"] = Value::Array(grids);
    Ok(record("wigner", digest, None, outputs))
}

/// `sx`, `sy`, `sz` and their squares.
pub fn named_operator(name: &str, space: DickeSpace) -> CliResult<SymmetricOperator> {
    let base = |c: char| match c {
        'x' => Some(build_sx(space)),
        'y' => Some(build_sy(space)),
        'z' => Some(build_sz(space)),
        _ => None,
    };
    let chars: Vec<char> = name.trim().to_ascii_lowercase().chars().collect();
    let op = match chars.as_slice() {
        ['s', c] => base(*c),
        ['s', c, '2'] => base(*c).map(|o| &o * &o),
        _ => None,
    };
    op.ok_or_else(|| CliError::Invalid(format!("unknown operator `{name}` (use sx, sy, sz, sx2, sy2, sz2)")))
}

pub fn cmd_closure(a: &ClosureArgs) -> CliResult<ResultRecord> {
    let digest = digest_for("closure", a)?;
    let space = || DickeSpace::with_convention(a.n, a.convention.unwrap_or_default());
    let names: Vec<String> = match a.set {
        GeneratorSet::SqueezingRotations => ["sx", "sy", "sx2", "sy2"].map(String::from).to_vec(),
        GeneratorSet::RotationsOnly => ["sx", "sy"].map(String::from).to_vec(),
        GeneratorSet::Custom if a.generators.is_empty() => {
            return Err(CliError::Invalid("--set custom needs --generators".into()))
        }
        GeneratorSet::Custom => a.generators.clone(),
        _ => Vec::new(),
    };
    let report = match a.set {
        GeneratorSet::Oscillator => oscillator_closure(a.cutoff, OscillatorSet::Gaussian, a.rank_tol)?,
        GeneratorSet::OscillatorCubic => oscillator_closure(a.cutoff, OscillatorSet::WithCubic, a.rank_tol)?,
        _ => {
            let s = space()?;
            let gens = names.iter().map(|g| named_operator(g, s)).collect::<CliResult<Vec<_>>>()?;
            lie_closure(&gens, a.rank_tol)?
        }
    };
    let mut outputs = json!({ "set": a.set, "report": report });
    if !names.is_empty() {
        outputs["generators"] = json!(names);
        outputs["n_emitters"] = json!(a.n);
    }
    Ok(record("closure", digest, None, outputs))
}

pub fn cmd_trotter(a: &TrotterArgs) -> CliResult<ResultRecord> {
    let digest = digest_for("trotter-check", a)?;
    if a.ks.len() < 2 {
        return Err(CliError::Invalid("--ks needs at least two values".into()));
    }
    let space = DickeSpace::with_convention(a.n, a.convention.unwrap_or_default())?;
    let (op_a, op_b) = (named_operator(&a.a, space)?, named_operator(&a.b, space)?);
    let sum = a.ks.iter().map(|&k| trotter_sum_error(&op_a, &op_b, a.t, k)).collect::<symctl::Result<Vec<_>>>()?;
    let comm =
        a.ks.iter().map(|&k| trotter_commutator_error(&op_a, &op_b, a.t, k)).collect::<symctl::Result<Vec<_>>>()?;
    let outputs = json!({
        "a": a.a,
        "b": a.b,
        "n_emitters": a.n,
        "t": a.t,
        "ks": a.ks,
        "sum": { "errors": sum, "slope": loglog_slope(&a.ks, &sum) },
        "commutator": { "errors": comm, "slope": loglog_slope(&a.ks, &comm) },
    });
    Ok(record("trotter-check", digest, None, outputs))
}

pub fn cmd_size_sweep(a: &SizeSweepArgs) -> CliResult<ResultRecord> {
    let (file, text) = load_source(&a.source)?;
    let mut digest = digest_for("size-sweep", a)?;
    digest.add("sequence", text.as_bytes());
    let spec = target_spec(a.target.as_deref(), &file)?;
    let setting = a.gates.apply(file_setting(&file));
    let space = DickeSpace::with_convention(file.n_emitters, setting.convention)?;
    let seq = file.to_sequence()?.on_space(space).with_convention(setting.gates);
    let entries = size_sweep(&seq, &spec, &a.n_list)?;
    let outputs = json!({
        "source": a.source,
        "target": spec.to_string(),
        "reference_n": file.n_emitters,
        "setting": setting,
        "table": entries,
        "fidelity_std": fidelity_spread(&entries),
    });
    Ok(record("size-sweep", digest, None, outputs))
}
