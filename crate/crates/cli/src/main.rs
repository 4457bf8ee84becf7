//! `qsw`: survival-time calculations for open quantum networks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsw_core::network::{dark_overlap, dark_states};
use qsw_core::sweep::{self, Model, SweepGrid};
use qsw_core::{
    assemble_generator, evolve, format, DensityMatrix, Error, Est, EstMethod, EstValue,
    MixingParams, NetworkFile, SourceMode,
};

/// Largest acceptable deviation of a reproduced dataset from the closed form.
const REPRODUCE_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "qsw", version, about = "Expected survival times on open quantum networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Survival time at a single parameter point.
    #[command(allow_negative_numbers = true)]
    Est {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value = "solve")]
        method: MethodArg,
    },
    /// Grid of survival times as CSV.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "solve")]
        method: MethodArg,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        threads: ThreadArgs,
    },
    /// Density-matrix trajectory as CSV.
    #[command(allow_negative_numbers = true)]
    Evolve {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        point: PointArgs,
        /// Final time.
        #[arg(long = "t-max", default_value_t = 20.0)]
        t_max: f64,
        /// Output sampling interval.
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Dark states of the network and their source overlaps.
    #[command(allow_negative_numbers = true)]
    Analyze {
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Regenerate a figure dataset with its plot script.
    #[command(allow_negative_numbers = true)]
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long = "out-dir", default_value = ".")]
        out_dir: PathBuf,
        /// Dephasing rates for fig3.
        #[arg(long = "lambda-set", default_value = "0,1,5")]
        lambda_set: String,
        #[command(flatten)]
        threads: ThreadArgs,
    },
}

#[derive(Args, Debug)]
struct NetworkArgs {
    /// JSON network description.
    #[arg(long = "network-file", conflicts_with = "paper_trimer")]
    network_file: Option<PathBuf>,
    /// Symmetric V-shaped trimer (the default network).
    #[arg(long = "paper-trimer")]
    paper_trimer: bool,
    /// Source rate (default 0.5 for the trimer, else from the file).
    #[arg(long = "Gamma")]
    source_rate: Option<f64>,
    /// Drain rate (default 1 for the trimer, else from the file).
    #[arg(long = "gamma")]
    drain_rate: Option<f64>,
    /// Source mode; `--phi` alone implies correlated.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
struct PointArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, conflicts_with = "alpha_grid")]
    alpha: Option<f64>,
    /// `lo:hi:n`
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<String>,
    #[arg(long, conflicts_with = "phi_grid")]
    phi: Option<f64>,
    /// `lo:hi:n`
    #[arg(long = "phi-grid")]
    phi_grid: Option<String>,
    #[arg(long, conflicts_with = "lambda_set")]
    lambda: Option<f64>,
    /// `a,b,c`
    #[arg(long = "lambda-set")]
    lambda_set: Option<String>,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThreadArgs {
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, env = "QSW_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Independent,
    Correlated,
}

impl From<ModeArg> for SourceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Independent => SourceMode::Independent,
            ModeArg::Correlated => SourceMode::Correlated,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Time,
    Solve,
    Resolvent,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<EstMethod> {
        match self {
            MethodArg::Time => vec![EstMethod::TimeDomain],
            MethodArg::Solve => vec![EstMethod::LinearSolve],
            MethodArg::Resolvent => vec![EstMethod::ResolventLimit],
            MethodArg::All => EstMethod::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = match &e {
            Error::InvalidParameter { name, .. } => format!("{e} (flag --{name})"),
            Error::Parse(_) | Error::InvalidNetwork(_) => format!("--network-file: {e}"),
            _ => e.to_string(),
        };
        Failure {
            code: if e.is_input_error() { 1 } else { 2 },
            message,
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Est { net, point, method } => run_est(&net, &point, method),
        Command::Sweep {
            net,
            grid,
            method,
            out,
            threads,
        } => run_sweep(&net, &grid, method, &out, threads.threads),
        Command::Evolve {
            net,
            point,
            t_max,
            dt,
            out,
        } => run_evolve(&net, &point, t_max, dt, &out),
        Command::Analyze { net } => {
            let report = sweep::analyze_report(&load_model(&net, None)?)?;
            print!("{report}");
            Ok(())
        }
        Command::Reproduce {
            figure,
            out_dir,
            lambda_set,
            threads,
        } => run_reproduce(figure, &out_dir, &lambda_set, threads.threads),
    }
}

/// Network from the file or the trimer with command-line overrides applied.
fn load_model(net: &NetworkArgs, phi: Option<f64>) -> Result<Model, Failure> {
    let mut model = match &net.network_file {
        Some(path) => {
            let (spec, source, drain) = NetworkFile::load(path)
                .and_then(|f| f.build())
                .map_err(|e| input_error(format!("--network-file {}: {e}", path.display())))?;
            Model {
                spec,
                source,
                drain,
            }
        }
        None => Model::trimer(0.5, 1.0),
    };
    if let Some(r) = net.source_rate {
        model.source.rate = r;
    }
    if let Some(r) = net.drain_rate {
        model.drain.rate = r;
    }
    if let Some(p) = phi {
        model.source = model.source.with_correlation(p);
    }
    if let Some(m) = net.mode {
        model.source = model.source.with_mode(m.into());
    }
    model.source.validate(&model.spec)?;
    model.drain.validate(&model.spec)?;
    Ok(model)
}

fn generator(model: &Model, point: &PointArgs) -> Result<qsw_core::Generator, Failure> {
    let mix = MixingParams::new(point.alpha, point.lambda)?;
    Ok(assemble_generator(&model.spec, &model.source, &model.drain, &mix)?)
}

fn run_est(net: &NetworkArgs, point: &PointArgs, method: MethodArg) -> Result<(), Failure> {
    let model = load_model(net, point.phi)?;
    let g = generator(&model, point)?;
    let rho0 = DensityMatrix::source_initial(model.spec.n_nodes());
    let methods = method.methods();
    let results = methods
        .iter()
        .map(|m| m.run(&g, &rho0))
        .collect::<qsw_core::Result<Vec<_>>>()?;
    // Dark states are stationary only under purely coherent network dynamics.
    let dark = (point.alpha == 0.0 && model.source.rate > 0.0)
        .then(|| dark_label(&model))
        .flatten();
    for r in &results {
        let text = describe(r, dark.as_deref());
        if methods.len() == 1 {
            println!("{text}");
        } else {
            println!("{} {text}", r.method.as_str());
        }
    }
    Ok(())
}

fn describe(r: &EstValue, dark: Option<&str>) -> String {
    match r.value {
        Est::Divergent => match dark {
            Some(label) => format!("inf (dark state {label})"),
            None => "inf".to_string(),
        },
        Est::Finite(x) if r.converged => format::short(x),
        Est::Finite(x) => match r.diagnostics.plateau {
            Some(p) => format!(
                ">= {} (not converged, survival {} at t = {})",
                format::short(x),
                format::short(p),
                format::short(r.diagnostics.horizon.unwrap_or(f64::NAN))
            ),
            None => format!("{} (not converged)", format::short(x)),
        },
    }
}

/// Dark state that captures the most source weight.
fn dark_label(model: &Model) -> Option<String> {
    let states = dark_states(&model.spec, &model.drain).ok()?;
    let weight = |d: &qsw_core::DarkState| match model.source.mode {
        SourceMode::Correlated => dark_overlap(&model.source, d).unwrap_or(0.0),
        SourceMode::Independent => model
            .source
            .targets
            .iter()
            .map(|&t| d.amplitudes[t - 1].norm_sqr())
            .sum(),
    };
    states
        .iter()
        .map(|d| (weight(d), d))
        .filter(|(w, _)| *w > 1e-10)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, d)| d.ket_label())
}

fn build_grid(model: &Model, args: &GridArgs, method: MethodArg) -> Result<SweepGrid, Failure> {
    let defaults = SweepGrid::default_grid();
    let alpha_values = match (&args.alpha, &args.alpha_grid) {
        (Some(a), _) => vec![*a],
        (None, Some(g)) => sweep::parse_grid(g, "alpha-grid")?,
        (None, None) => defaults.alpha_values,
    };
    let phi_values = match (&args.phi, &args.phi_grid) {
        (Some(p), _) => vec![*p],
        (None, Some(g)) => sweep::parse_grid(g, "phi-grid")?,
        (None, None) => defaults.phi_values,
    };
    let lambda_values = match (&args.lambda, &args.lambda_set) {
        (Some(l), _) => vec![*l],
        (None, Some(s)) => sweep::parse_list(s, "lambda-set")?,
        (None, None) => defaults.lambda_values,
    };
    let modes = if model.source.targets.len() < 2 {
        vec![SourceMode::Independent]
    } else {
        defaults.modes
    };
    Ok(SweepGrid {
        alpha_values,
        phi_values,
        lambda_values,
        modes,
        methods: method.methods(),
    })
}

fn run_sweep(
    net: &NetworkArgs,
    args: &GridArgs,
    method: MethodArg,
    out: &OutArgs,
    threads: usize,
) -> Result<(), Failure> {
    let model = load_model(net, None)?;
    let mut grid = build_grid(&model, args, method)?;
    if let Some(m) = net.mode {
        grid.modes = vec![m.into()];
    }
    let records = sweep::run_sweep(&model, &grid, threads)?;
    write_output(out, &sweep::to_csv(&records))
}

fn run_evolve(
    net: &NetworkArgs,
    point: &PointArgs,
    t_max: f64,
    dt: f64,
    out: &OutArgs,
) -> Result<(), Failure> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(input_error("--t-max must be positive and finite"));
    }
    if !(dt > 0.0 && dt <= t_max) {
        return Err(input_error("--dt must be positive and at most --t-max"));
    }
    let model = load_model(net, point.phi)?;
    let g = generator(&model, point)?;
    let rho0 = DensityMatrix::source_initial(model.spec.n_nodes());
    let n = (t_max / dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|i| t_max * i as f64 / n as f64).collect();
    let traj = evolve(&g, &rho0, &times)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    write_output(out, &String::from_utf8_lossy(&buf))
}

fn run_reproduce(
    figure: Figure,
    out_dir: &Path,
    lambda_set: &str,
    threads: usize,
) -> Result<(), Failure> {
    let dataset = match figure {
        Figure::Fig2 => sweep::reproduce_fig2(threads)?,
        Figure::Fig3 => sweep::reproduce_fig3(&sweep::parse_list(lambda_set, "lambda-set")?, threads)?,
    };
    fs::create_dir_all(out_dir)
        .map_err(|e| input_error(format!("--out-dir {}: {e}", out_dir.display())))?;
    for (name, contents) in &dataset.files {
        let path = out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| input_error(format!("--out-dir {}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
    }
    eprintln!(
        "closed-form check: max relative deviation {:e}, {} finiteness mismatches",
        dataset.max_rel_error, dataset.disagreements
    );
    if dataset.disagreements > 0 || dataset.max_rel_error > REPRODUCE_TOL {
        return Err(Failure {
            code: 2,
            message: format!(
                "dataset deviates from the closed form (max relative {:e}, tolerance {REPRODUCE_TOL:e})",
                dataset.max_rel_error
            ),
        });
    }
    Ok(())
}

fn write_output(out: &OutArgs, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| input_error(format!("--out {}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| input_error(format!("stdout: {e}"))),
    }
}
