//! Command-line front end.
//!
//! Exit codes: 0 on success (or convergence), 2 when a solver stops at its
//! iteration cap, 1 on any error, usage errors included.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use svdinstn::completion::{complete, CompletionConfig, ObservationMask, DEFAULT_COMPLETION_DATA_SCALE, DEFAULT_COMPLETION_GAMMA};
use svdinstn::init::rank_upper_bound;
use svdinstn::io;
use svdinstn::network::{compression_ratio_from_counts, param_count};
use svdinstn::report::{self, CompletionPaths, CompletionRunReport, RunReport, StripTiming, SynthReport};
use svdinstn::solver::{decompose, SolverConfig, DEFAULT_DATA_SCALE};
use svdinstn::synth::{format_summary_table, run_trials, StructureFamily, TrialSpec};
use svdinstn::{DenseTensor, RankMatrix, Result};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_CAP: u8 = 2;

#[derive(Parser)]
#[command(name = "svdinstn", version, about = "Tensor network structure search by sparse edge diagonals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a compact network for a tensor.
    Decompose(DecomposeArgs),
    /// Fill in the missing entries of a partly observed tensor.
    Complete(CompleteArgs),
    /// Run structure-recovery trials on generated data.
    Synth(SynthArgs),
    /// Print dims, norms and rank bounds of a tensor or model file.
    Info(InfoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Stnt,
    Csv,
}

/// `none` or a positive number.
#[derive(Clone, Copy, Debug)]
struct DataScale(Option<f64>);

impl FromStr for DataScale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(Self(None));
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Self(Some(v))),
            _ => Err(format!("expected 'none' or a positive number, got '{s}'")),
        }
    }
}

impl std::fmt::Display for DataScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("none"),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.001)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    #[arg(long, default_value_t = 5)]
    inner_iters: usize,
}

impl SolverArgs {
    fn config(&self, gamma: f64, data_scale: Option<f64>) -> SolverConfig {
        SolverConfig {
            gamma,
            rho: self.rho,
            mu: self.mu,
            beta: self.beta,
            epsilon: self.epsilon,
            tol: self.tol,
            max_outer: self.max_iters,
            inner_admm_iters: self.inner_iters,
            data_scale,
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "stnt")]
    input_format: InputFormat,
    #[arg(long)]
    gamma: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// RMS entry size the data are rescaled to before solving, or `none`.
    #[arg(long, default_value_t = DataScale(Some(DEFAULT_DATA_SCALE)))]
    data_scale: DataScale,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Write 0 for wall-clock fields so reports are byte-reproducible.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    input: PathBuf,
    /// Tensor file with nonzero entries marking observed positions.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = DEFAULT_COMPLETION_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = DataScale(Some(DEFAULT_COMPLETION_DATA_SCALE)))]
    data_scale: DataScale,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Family name (chain, ring, star, two-cluster, full, five-star) or a
    /// rank-matrix file.
    #[arg(long)]
    structure: String,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Rank on the family's edges; ignored for rank-matrix files.
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0015)]
    gamma: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    input: PathBuf,
}

fn display_dims(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("×")
}

fn load_input(path: &Path, format: InputFormat) -> Result<DenseTensor> {
    match format {
        InputFormat::Stnt => io::load_tensor(path),
        InputFormat::Csv => io::load_csv(path),
    }
}

fn run_decompose(args: DecomposeArgs) -> Result<u8> {
    let x = load_input(&args.input, args.input_format)?;
    let config = args.solver.config(args.gamma, args.data_scale.0);
    let (model, result) = decompose(&x, &config)?;
    let mut doc = RunReport::new(&args.input, x.shape(), &config, result);
    if args.omit_timing {
        doc.strip_timing();
    }
    if let Some(path) = &args.model_out {
        io::save_model(path, &model)?;
    }
    report::write_json(&args.report, &doc)?;
    log::info!(
        "ranks {:?}, CR {:.3}%, RE {:.3e}, {} sweeps",
        doc.ranks,
        doc.compression_ratio,
        doc.relative_error,
        doc.iterations
    );
    Ok(if doc.converged { EXIT_OK } else { EXIT_CAP })
}

fn run_complete(args: CompleteArgs) -> Result<u8> {
    let f = io::load_tensor(&args.input)?;
    let mask = ObservationMask::from_tensor(&io::load_tensor(&args.mask)?)?;
    let mut config = CompletionConfig::default();
    config.solver.gamma = args.gamma;
    config.solver.data_scale = args.data_scale.0;
    config.tol = args.tol;
    config.max_iters = args.max_iters;
    let (output, _, result) = complete(&f, &mask, &config)?;
    io::save_tensor(&args.output, &output)?;
    let paths = CompletionPaths {
        input: &args.input,
        mask: &args.mask,
        output: &args.output,
    };
    let mut doc = CompletionRunReport::new(paths, f.shape(), &config, mask.observed_count(), result);
    if args.omit_timing {
        doc.strip_timing();
    }
    report::write_json(&args.report, &doc)?;
    Ok(if doc.converged { EXIT_OK } else { EXIT_CAP })
}

fn synth_ranks(args: &SynthArgs) -> Result<RankMatrix> {
    match args.structure.parse::<StructureFamily>() {
        Ok(family) => family.ranks(args.dims.len(), args.rank),
        Err(e) if !Path::new(&args.structure).is_file() => Err(e),
        Err(_) => io::load_rank_matrix(&args.structure),
    }
}

fn run_synth(args: SynthArgs) -> Result<u8> {
    let ranks = synth_ranks(&args)?;
    let mut spec = TrialSpec::new(args.structure.clone(), args.dims.clone(), ranks, args.seed, args.trials, args.gamma);
    spec.config.max_outer = args.max_iters;
    let summary = run_trials(&spec)?;
    let table = format_summary_table(std::slice::from_ref(&summary));
    let mut doc = SynthReport {
        command: "synth".into(),
        config: spec.config.clone(),
        summary,
        table,
    };
    if args.omit_timing {
        doc.strip_timing();
    }
    print!("{}", doc.table);
    report::write_json(&args.report, &doc)?;
    Ok(EXIT_OK)
}

fn bound_table(bound: &RankMatrix, dims: &[usize]) -> String {
    let n = dims.len();
    let mut out = String::from("    ");
    for l in 0..n {
        let _ = write!(out, "{l:>5}");
    }
    out.push('\n');
    for t in 0..n {
        let _ = write!(out, "{t:>4}");
        for l in 0..n {
            if t == l {
                let _ = write!(out, "{:>5}", "-");
            } else {
                let _ = write!(out, "{:>5}", bound.get(t.min(l), t.max(l)));
            }
        }
        out.push('\n');
    }
    out
}

fn run_info(args: InfoArgs) -> Result<u8> {
    let mut magic = [0u8; 4];
    let n = std::fs::File::open(&args.input)?.read(&mut magic)?;
    let mut out = String::new();
    if n == 4 && &magic == io::MODEL_MAGIC {
        let model = io::load_model(&args.input)?;
        let dims = model.dims();
        let entries: usize = dims.iter().product();
        let _ = writeln!(out, "kind: model");
        let _ = writeln!(out, "dims: {}", display_dims(dims));
        let _ = writeln!(out, "parameters: {}", param_count(&model));
        let _ = writeln!(
            out,
            "compression ratio: {:.4}%",
            compression_ratio_from_counts(param_count(&model), entries)
        );
        let _ = writeln!(out, "ranks:");
        out.push_str(&bound_table(model.ranks(), dims));
    } else {
        let x = io::load_tensor(&args.input)?;
        let max_abs = x.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let _ = writeln!(out, "kind: tensor");
        let _ = writeln!(out, "dims: {}", display_dims(x.shape()));
        let _ = writeln!(out, "entries: {}", x.len());
        let _ = writeln!(out, "frobenius norm: {:.6e}", x.fro_norm());
        let _ = writeln!(out, "l1 norm: {:.6e}", x.l1_norm());
        let _ = writeln!(out, "max abs: {max_abs:.6e}");
        if x.order() >= 2 {
            let _ = writeln!(out, "rank bound min(I_t, I_l):");
            out.push_str(&bound_table(&rank_upper_bound(x.shape())?, x.shape()));
        }
    }
    print!("{out}");
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = svdinstn::configure_threads().and_then(|()| match cli.command {
        Command::Decompose(a) => run_decompose(a),
        Command::Complete(a) => run_complete(a),
        Command::Synth(a) => run_synth(a),
        Command::Info(a) => run_info(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
