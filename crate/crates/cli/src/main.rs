use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cafe_core::analysis::{parse_sweep_spec, run_sweep, AnalysisError};
use cafe_core::dynamics::{solve_equilibrium, CableChain, DynamicsError, RelaxationOptions};
use cafe_core::model::config::{load_config_file, parse_config, ConfigError};
use cafe_core::noise::NoiseModel;
use cafe_core::sim::{SimError, SimOptions, SimSummary, Simulation};
use cafe_core::trace::CsvTraceWriter;
use cafe_core::{default_paper_config, Scenario};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "cafe-sim", version, about = "Cable platform simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV trace.
    Simulate(SimulateArgs),
    /// Report static sag, tensions and residuals.
    Equilibrium(EquilibriumArgs),
    /// Evaluate a sag grid and write it as CSV.
    Sweep(SweepArgs),
    /// Check a configuration without running it.
    Validate(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario TOML. The laboratory rig is used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Trace destination. Without it the trace goes to stdout and the
    /// summary to stderr.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "SECONDS", default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,
    /// Inject drive and release errors.
    #[arg(long)]
    noise: bool,
    /// Noise seed; implies --noise.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Skip the vertical dynamics.
    #[arg(long)]
    kinematic: bool,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Fixed relaxation step instead of the adaptive one.
    #[arg(long, value_name = "SECONDS")]
    dt: Option<f64>,
    #[arg(long, value_name = "N")]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep TOML.
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    /// Base cable system; the laboratory rig when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Self::new(code, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION };
        Self::new(code, e.to_string())
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        let code = match e {
            DynamicsError::DegenerateGeometry(_) | DynamicsError::InvalidStep(_) => EXIT_VALIDATION,
            _ => EXIT_NUMERICAL,
        };
        Self::new(code, e.to_string())
    }
}

fn load(config: &ConfigArg) -> Result<Scenario, Failure> {
    match &config.config {
        Some(p) => Ok(load_config_file(p)?),
        None => Ok(default_paper_config()),
    }
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::io(path, e))
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let scenario = load(&args.config)?;
    let noise = (args.noise || args.seed.is_some())
        .then(|| (NoiseModel::default(), args.seed.unwrap_or(0)));
    let opts = SimOptions {
        dt: args.dt,
        duration: args.duration,
        noise,
        dynamics: !args.kinematic,
        settle: !args.kinematic,
    };
    let sim = Simulation::new(&scenario, &opts)?;
    let (out, path): (Box<dyn Write>, PathBuf) = match &args.out {
        Some(p) => (Box::new(create(p)?), p.clone()),
        None => (Box::new(io::stdout().lock()), PathBuf::from("<stdout>")),
    };
    let mut writer =
        CsvTraceWriter::new(out, scenario.cafes.len(), sim.segment_count()).map_err(|e| Failure::io(&path, e))?;
    let mut write_error = None;
    let summary = sim.run(|row| {
        if write_error.is_none() {
            write_error = writer.write(row).err();
        }
    })?;
    if let Some(e) = write_error {
        return Err(Failure::io(&path, e));
    }
    writer.finish().map_err(|e| Failure::io(&path, e))?;

    let report = format_summary(&summary);
    if args.out.is_some() {
        print!("{report}");
    } else {
        eprint!("{report}");
    }
    Ok(())
}

fn format_summary(s: &SimSummary) -> String {
    let mut r = format!("duration_s {}\nsteps {}\n", s.duration, s.steps);
    for (i, (x, z)) in s.final_x.iter().zip(&s.final_z).enumerate() {
        r += &format!("cafe{i} final_x_m {x:.9} final_z_m {z:.9}\n");
    }
    r += &format!("max_sag_m {:.9}\n", s.max_sag);
    r += &format!("max_abs_zdot_m_s {:.9}\n", s.max_speed);
    r += &format!("slip_events {}\n", s.slip_events.len());
    for e in &s.slip_events {
        r += &format!(
            "  t={:.3} s cafe{} required {:.3} N capacity {:.3} N\n",
            e.t, e.cafe, e.required, e.capacity
        );
    }
    for (group, drift) in &s.group_drift {
        let ids: Vec<String> = group.iter().map(|i| format!("cafe{i}")).collect();
        r += &format!("separation_drift_m [{}] {drift:.9}\n", ids.join(","));
    }
    r
}

fn equilibrium(args: &EquilibriumArgs) -> Result<(), Failure> {
    let scenario = load(&args.config)?;
    let chain = CableChain::new(&scenario.system, &scenario.cafes)?;
    let mut opts = RelaxationOptions {
        dt: args.dt,
        ..RelaxationOptions::default()
    };
    if let Some(n) = args.max_iterations {
        opts.max_iterations = n;
    }
    let eq = solve_equilibrium(&chain, &scenario.cafes, &opts)?;
    let per_cable = scenario.system.load_bearing_cables as f64;
    println!("iterations {}", eq.iterations);
    println!("residual_N {:.3e}", eq.residual);
    for (i, (z, f)) in eq.z.iter().zip(&eq.forces.cafes).enumerate() {
        println!(
            "cafe{i} x_m {:.6} sag_mm {:.4} horizontal_residual_N {:.6e}",
            scenario.cafes[i].x,
            -z * 1e3,
            f.horizontal_residual
        );
    }
    for (j, t) in eq.forces.tensions.iter().enumerate() {
        println!("seg{j} tension_per_cable_N {:.4}", t / per_cable);
    }
    if !eq.z.is_empty() {
        println!("max_sag_mm {:.4}", eq.max_sag() * 1e3);
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Failure::io(&args.spec, e))?;
    let spec = parse_sweep_spec(&text)
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", args.spec.display())))?;
    let base = match &args.config {
        Some(p) => load_config_file(p)?.system,
        None => default_paper_config().system,
    };
    let result = run_sweep(&spec, &base).map_err(|e| match e {
        AnalysisError::Dynamics(d) => Failure::from(d),
        other => Failure::new(EXIT_VALIDATION, other.to_string()),
    })?;
    let csv = result.to_csv();
    match &args.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Failure::io(p, e))?,
        None => print!("{csv}"),
    }
    let failed = result.cells.iter().filter(|c| !c.converged).count();
    if failed > 0 {
        eprintln!("{failed} cell(s) did not converge");
    }
    Ok(())
}

fn validate(args: &ConfigArg) -> Result<(), Failure> {
    let Some(path) = &args.config else {
        println!("ok");
        return Ok(());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let scenario = parse_config(&text)?;
    match scenario.validate() {
        Ok(()) => {
            println!("ok");
            Ok(())
        }
        Err(v) => Err(ConfigError::Invalid(v).into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Equilibrium(a) => equilibrium(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
