use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skewrnn::experiment::{
    build_preset, run_experiment, ExperimentConfig, ExperimentPreset, PresetName, PresetOverrides, RunManifest,
    RunOptions, RunPlan,
};
use skewrnn::invariants::{classify_skew, write_level_set_csv, DEFAULT_AXIS_TOL};
use skewrnn::rng::{derive_seed, gaussian_state};
use skewrnn::spectral::{DEFAULT_STFT_HOP, DEFAULT_STFT_WINDOW};
use skewrnn::{
    amplitude_spectrum, classify_stability, invariant_trace, stft, trace_level_set, ActivationKind, Eigenvalue,
    Error, InvariantSpec, Integrator, SimulationConfig, SkewMatrix, Trajectory,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGED: u8 = 4;
const EXIT_RUNS_FAILED: u8 = 5;

/// Simulate and analyse recurrent networks ẋ = σ(Ax) with skew-symmetric A.
#[derive(Parser, Debug)]
#[command(name = "skewrnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation from flags, or every run of a config file.
    Simulate(SimulateArgs),
    /// Amplitude spectrum of one component of a trajectory CSV.
    Spectrum(SpectrumArgs),
    /// Short-time Fourier transform of one component of a trajectory CSV.
    Stft(StftArgs),
    /// Linear stability class of a matrix or an eigenvalue list.
    Classify(ClassifyArgs),
    /// Conserved quantity along a trajectory CSV.
    Invariant(InvariantArgs),
    /// Level set of the 2-D tanh invariant.
    Levelset(LevelsetArgs),
    /// Run a built-in experiment campaign.
    Preset(PresetArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// TOML run file; when given, the matrix and state flags are ignored
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// file stem of the outputs
    #[arg(long, default_value = "run")]
    name: String,
    #[arg(long, default_value = "tanh")]
    activation: ActivationKind,
    /// block-diagonal matrix with these angular frequencies
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    freqs: Option<Vec<f64>>,
    /// matrix JSON file ({dim, entries, origin})
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// random Gaussian matrix of this dimension
    #[arg(long)]
    random_dim: Option<usize>,
    /// standard deviation of the random matrix entries
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    /// random matrix with entries uniform in ±1/dim instead of Gaussian
    #[arg(long)]
    uniform: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// draw x0 from N(0, std²) instead of giving it explicitly
    #[arg(long)]
    x0_std: Option<f64>,
    #[arg(long, default_value_t = skewrnn::dynamics::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = skewrnn::dynamics::DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = skewrnn::dynamics::DEFAULT_DIVERGENCE_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = "euler")]
    integrator: Integrator,
    /// keep every k-th sample (default: 1 up to 10⁵ steps, 10 above)
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args, Debug)]
struct SignalArgs {
    /// trajectory CSV (`t,x1,...,xn`)
    #[arg(long)]
    input: PathBuf,
    /// 1-based state component
    #[arg(long, default_value_t = 1)]
    component: usize,
    /// output CSV; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    signal: SignalArgs,
}

#[derive(Args, Debug)]
struct StftArgs {
    #[command(flatten)]
    signal: SignalArgs,
    #[arg(long, default_value_t = DEFAULT_STFT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = DEFAULT_STFT_HOP)]
    hop: usize,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// matrix JSON file ({dim, entries, origin})
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    freqs: Option<Vec<f64>>,
    #[arg(long)]
    random_dim: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// eigenvalues as `re:im` pairs, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eigs: Option<Vec<String>>,
    /// half-width of the imaginary-axis band on real parts
    #[arg(long, default_value_t = DEFAULT_AXIS_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InvariantArgs {
    #[arg(long)]
    input: PathBuf,
    /// 2-D tanh invariant with this block frequency
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    /// block-diagonal tanh invariant with these frequencies
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    freqs: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LevelsetArgs {
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long)]
    level: f64,
    #[arg(long, default_value_t = 360)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PresetArgs {
    /// fig1, fig2, fig3, fig4 or custom
    #[arg(long)]
    preset: PresetName,
    /// TOML run file, required for `custom`
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// number of replicates (fig1, fig2, fig4)
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// recompute runs whose outputs already exist
    #[arg(long)]
    no_resume: bool,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Diverged(String),
    RunsFailed(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Io(_) => EXIT_IO,
            Failure::Diverged(_) => EXIT_DIVERGED,
            Failure::RunsFailed(_) => EXIT_RUNS_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Diverged(m) | Failure::RunsFailed(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Writes to `path`, or to stdout when no path is given.
fn with_output(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match path {
        Some(p) => skewrnn::table::write_atomic(p, write).map_err(Failure::from),
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            match write(&mut w).and_then(|_| w.flush()) {
                // a closed pipe (`| head`) is not an error for the writer
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn read_trajectory(path: &Path) -> std::result::Result<Trajectory, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    Trajectory::read_csv(BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_signal(args: &SignalArgs) -> std::result::Result<(Vec<f64>, f64), Failure> {
    let traj = read_trajectory(&args.input)?;
    if args.component == 0 {
        return Err(Failure::Config("--component is 1-based".into()));
    }
    let (t0, t1) = match traj.times.as_slice() {
        [t0, t1, ..] if t1 > t0 => (*t0, *t1),
        _ => return Err(Failure::Config("trajectory needs two increasing time stamps".into())),
    };
    let spacing = t1 - t0;
    let series = traj.uniform_component(args.component - 1, spacing)?;
    Ok((series, 1.0 / spacing))
}

fn report(manifest: &RunManifest, out: &Path) {
    let diverged = manifest.runs.iter().filter(|r| r.is_diverged()).count();
    let failed = manifest.failed().count();
    println!(
        "{}: {} runs written to {} ({diverged} diverged, {failed} failed)",
        manifest.preset,
        manifest.runs.len(),
        out.display()
    );
    for r in manifest.failed() {
        eprintln!("run {} failed: {}", r.name, r.error.as_deref().unwrap_or(""));
    }
}

fn execute(preset: &ExperimentPreset, out: &Path, workers: usize, resume: bool) -> std::result::Result<RunManifest, Failure> {
    let opts = RunOptions {
        out_dir: out.to_path_buf(),
        workers,
        resume,
    };
    let manifest = run_experiment(preset, &opts)?;
    report(&manifest, out);
    Ok(manifest)
}

fn single_run_plan(args: &SimulateArgs) -> std::result::Result<RunPlan, Failure> {
    let seed = derive_seed(args.seed.unwrap_or(0), 0);
    let sources = [args.freqs.is_some(), args.matrix.is_some(), args.random_dim.is_some()];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(Failure::Config(
            "give exactly one of --config, --freqs, --matrix or --random-dim".into(),
        ));
    }
    let matrix = if let Some(freqs) = &args.freqs {
        SkewMatrix::block_diagonal(freqs)?
    } else if let Some(path) = &args.matrix {
        read_json(path)?
    } else {
        let dim = args.random_dim.unwrap_or_default();
        if args.uniform {
            SkewMatrix::random_uniform_scaled(dim, seed)?
        } else {
            SkewMatrix::random_gaussian(dim, args.std, seed)?
        }
    };
    let x0 = match (&args.x0, args.x0_std) {
        (Some(x0), None) => x0.clone(),
        (None, Some(std)) => gaussian_state(matrix.dim(), std, seed)?,
        _ => return Err(Failure::Config("give exactly one of --x0 or --x0-std".into())),
    };
    let mut cfg = SimulationConfig::new(matrix, args.activation, x0)
        .with_tau(args.tau)
        .with_steps(args.steps)
        .with_threshold(args.threshold)
        .with_integrator(args.integrator);
    if let Some(stride) = args.stride {
        cfg.record_stride = stride;
    }
    let plan = RunPlan::new(args.name.clone(), cfg);
    plan.validate()?;
    Ok(plan)
}

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let preset = match &args.config {
        Some(path) => {
            let overrides = PresetOverrides {
                seed: args.seed,
                config: Some(ExperimentConfig::from_path(path)?),
                ..Default::default()
            };
            build_preset(PresetName::Custom, &overrides)?
        }
        None => {
            let preset = ExperimentPreset {
                name: PresetName::Custom,
                global_seed: args.seed.unwrap_or(0),
                runs: vec![single_run_plan(&args)?],
            };
            preset.validate()?;
            preset
        }
    };
    let manifest = execute(&preset, &args.out, args.workers, false)?;
    if let Some(r) = manifest.runs.iter().find(|r| r.error.is_some()) {
        return Err(Failure::RunsFailed(format!("run {}: {}", r.name, r.error.as_deref().unwrap_or(""))));
    }
    let diverged: Vec<String> = manifest
        .runs
        .iter()
        .filter(|r| r.is_diverged())
        .map(|r| format!("{} at step {}", r.name, r.step.unwrap_or_default()))
        .collect();
    if !diverged.is_empty() {
        return Err(Failure::Diverged(format!("diverged: {}", diverged.join(", "))));
    }
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs) -> CliResult {
    let (series, rate) = load_signal(&args.signal)?;
    let mut spec = amplitude_spectrum(&series, rate)?;
    spec.source_component = args.signal.component - 1;
    with_output(args.signal.out.as_deref(), |w| spec.write_csv(w))
}

fn cmd_stft(args: StftArgs) -> CliResult {
    let (series, rate) = load_signal(&args.signal)?;
    let report = stft(&series, rate, args.window, args.hop)?;
    with_output(args.signal.out.as_deref(), |w| report.write_csv(w))
}

fn parse_eig(s: &str) -> std::result::Result<Eigenvalue, Failure> {
    let bad = || Failure::Config(format!("eigenvalue `{s}` is not `re:im` or `re`"));
    let (re, im) = match s.split_once(':') {
        Some((re, im)) => (re, im),
        None => (s, "0"),
    };
    Ok(Eigenvalue {
        re: re.trim().parse().map_err(|_| bad())?,
        im: im.trim().parse().map_err(|_| bad())?,
    })
}

fn cmd_classify(args: ClassifyArgs) -> CliResult {
    let sources = [
        args.matrix.is_some(),
        args.freqs.is_some(),
        args.random_dim.is_some(),
        args.eigs.is_some(),
    ];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(Failure::Config(
            "give exactly one of --matrix, --freqs, --random-dim or --eigs".into(),
        ));
    }
    let report = if let Some(eigs) = &args.eigs {
        let eigs = eigs.iter().map(|s| parse_eig(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        classify_stability(&eigs, args.tol)?
    } else {
        let matrix = if let Some(path) = &args.matrix {
            read_json(path)?
        } else if let Some(freqs) = &args.freqs {
            SkewMatrix::block_diagonal(freqs)?
        } else {
            SkewMatrix::random_gaussian(args.random_dim.unwrap_or_default(), args.std, args.seed)?
        };
        classify_skew(&matrix, args.tol)?
    };
    with_output(args.out.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })
}

fn cmd_invariant(args: InvariantArgs) -> CliResult {
    let traj = read_trajectory(&args.input)?;
    let spec = match (args.omega, &args.freqs) {
        (Some(omega), None) => InvariantSpec::TanhLog2D { omega },
        (None, Some(freqs)) => InvariantSpec::TanhLogBlockDiag { freqs: freqs.clone() },
        (None, None) => InvariantSpec::QuadraticNorm,
        _ => return Err(Failure::Config("give at most one of --omega or --freqs".into())),
    };
    let trace = invariant_trace(&spec, &traj)?;
    eprintln!("abs_drift={:e} rel_drift={:e}", trace.abs_drift, trace.rel_drift);
    with_output(args.out.as_deref(), |w| trace.write_csv(w))
}

fn cmd_levelset(args: LevelsetArgs) -> CliResult {
    let points = trace_level_set(args.omega, args.level, args.points)?;
    with_output(args.out.as_deref(), |w| write_level_set_csv(&points, w))
}

fn cmd_preset(args: PresetArgs) -> CliResult {
    let config = args.config.as_deref().map(ExperimentConfig::from_path).transpose()?;
    let overrides = PresetOverrides {
        seed: args.seed,
        seeds: args.seeds,
        steps: args.steps,
        record_stride: args.stride,
        config,
    };
    let preset = build_preset(args.preset, &overrides)?;
    let manifest = execute(&preset, &args.out, args.workers, !args.no_resume)?;
    let failed = manifest.failed().count();
    if failed > 0 {
        return Err(Failure::RunsFailed(format!("{failed} of {} runs failed", manifest.runs.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Stft(a) => cmd_stft(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Invariant(a) => cmd_invariant(a),
        Command::Levelset(a) => cmd_levelset(a),
        Command::Preset(a) => cmd_preset(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
