use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use egg_core::ingest::{synthetic_records, write_gwas_file};
use egg_core::pipeline::{cve_table, emit_network, run_cross_validation, run_pipeline, run_reliability};
use egg_core::selection::{default_lambda_grid, SelectionConfig};
use egg_core::simulation::{
    run_replication, simulate_summary_panel, summarize, write_results_table, ArStructure, Method, MethodSettings,
    SimulationDesign,
};
use egg_core::solver::GammaScaling;
use egg_core::{AdmmConfig, AnalysisConfig, Estimator, PenaltyFamily};
use log::{info, warn};

mod config_file;

const EXIT_VALIDATION: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_UNCONVERGED: u8 = 3;

/// Sparse genetic networks from GWAS summary statistics.
#[derive(Parser, Debug)]
#[command(name = "egg", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write the network.
    Fit(FitArgs),
    /// Print the cross-validation table.
    Cve(FitArgs),
    /// Print per-trait reliability ratios of the screened variants.
    Reliability(FitArgs),
    /// Score estimators on simulated data.
    Simulate(SimulateArgs),
    /// Write a synthetic set of trait files with a known network.
    MakeFixture(FixtureArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.1)]
    psi: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_primal: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_dual: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// div-psi or mul-psi.
    #[arg(long, default_value = "div-psi")]
    gamma_update_scaling: GammaScaling,
    #[arg(long, default_value_t = 3.0)]
    mcp_gamma: f64,
    /// Comma-separated ascending values. Defaults to 16 log-spaced values in [0.001, 1].
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    subsamples: usize,
    #[arg(long, default_value_t = 100)]
    cv_splits: usize,
    #[arg(long, default_value_t = 0.5)]
    subsample_fraction: f64,
    #[arg(long, default_value_t = 0.95)]
    threshold: f64,
}

impl SolverArgs {
    fn admm(&self) -> AdmmConfig {
        AdmmConfig {
            psi: self.psi,
            delta: self.delta,
            tol_primal: self.tol_primal,
            tol_dual: self.tol_dual,
            max_iter: self.max_iter,
            gamma_scaling: self.gamma_update_scaling,
            ..AdmmConfig::default()
        }
    }

    fn selection(&self, seed: u64) -> SelectionConfig {
        SelectionConfig {
            lambda_grid: if self.lambda_grid.is_empty() {
                default_lambda_grid()
            } else {
                self.lambda_grid.clone()
            },
            subsamples: self.subsamples,
            cv_splits: self.cv_splits,
            subsample_fraction: self.subsample_fraction,
            threshold: self.threshold,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// key=value file; any flag may be set there, the command line wins.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Summary files, one per trait (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    trait_files: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    trait_labels: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    null_p_threshold: f64,
    #[arg(long, default_value_t = 5e-8)]
    joint_p_threshold: f64,
    #[arg(long, default_value_t = 1_000_000)]
    prune_window_bp: u64,
    /// pearson or spearman.
    #[arg(long, default_value = "spearman")]
    estimator: Estimator,
    /// mcp or lasso.
    #[arg(long, default_value = "mcp")]
    penalty: PenaltyFamily,
    #[arg(long, default_value_t = 0.05)]
    covariance_floor: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "egg-out")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with status 3 when the final fit did not converge.
    #[arg(long)]
    strict: bool,
}

impl FitArgs {
    fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            trait_files: self.trait_files.clone(),
            trait_labels: self.trait_labels.clone(),
            null_p_threshold: self.null_p_threshold,
            joint_p_threshold: self.joint_p_threshold,
            prune_window_bp: self.prune_window_bp,
            estimator: self.estimator,
            penalty: self.penalty,
            mcp_gamma: self.solver.mcp_gamma,
            covariance_floor: self.covariance_floor,
            admm: self.solver.admm(),
            selection: self.solver.selection(self.seed),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// ar1 or ar3.
    #[arg(long, default_value = "ar1")]
    structure: ArStructure,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    /// Null variants; defaults to 5m.
    #[arg(long)]
    null_count: Option<usize>,
    #[arg(long, default_value_t = 200_000)]
    n: u64,
    #[arg(long, default_value_t = 0.0)]
    pleiotropy: f64,
    #[arg(long, default_value_t = 5.0)]
    shift_multiplier: f64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "EGG-Pearson,EGG-Spearman,Glasso-Pearson,Glasso-Spearman"
    )]
    methods: Vec<Method>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Results table; printed to stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct FixtureArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "ar1")]
    structure: ArStructure,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 1500)]
    m: usize,
    #[arg(long, default_value_t = 3000)]
    null_count: usize,
    #[arg(long, default_value_t = 200_000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn fit(args: &FitArgs) -> Result<ExitCode> {
    let config = args.analysis();
    let report = run_pipeline(&config)?;
    let paths = emit_network(&report, &config.output_dir)?;
    info!("wrote {}", paths.edges.display());
    if !report.converged() {
        warn!("final fit hit the iteration limit");
        if args.strict {
            return Ok(ExitCode::from(EXIT_UNCONVERGED));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cve(args: &FitArgs) -> Result<ExitCode> {
    let cv = run_cross_validation(&args.analysis())?;
    print!("{}", cve_table(&cv));
    Ok(ExitCode::SUCCESS)
}

fn reliability(args: &FitArgs) -> Result<ExitCode> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "trait\treliability")?;
    for (label, ratio) in run_reliability(&args.analysis())? {
        writeln!(out, "{label}\t{ratio}")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let mut design =
        SimulationDesign::new(args.p, args.structure, args.m, args.n, args.seed)?.with_pleiotropy(args.pleiotropy);
    design.pleiotropy_shift_multiplier = args.shift_multiplier;
    if let Some(count) = args.null_count {
        design.null_count = count;
    }
    let selection = args.solver.selection(args.seed);
    selection.validate()?;
    let settings = MethodSettings {
        glasso_grid: selection.lambda_grid.clone(),
        selection,
        admm: args.solver.admm(),
        mcp_gamma: args.solver.mcp_gamma,
        ..MethodSettings::default()
    };
    let rows = run_replication(&design, &args.methods, args.reps, args.seed, &settings)?;
    match &args.output {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_results_table(&rows, std::io::BufWriter::new(file))?;
        }
        None => write_results_table(&rows, std::io::stdout().lock())?,
    }
    let mut err = std::io::stderr().lock();
    writeln!(err, "method\tmetric\tq1\tmedian\tq3\tfailed")?;
    for s in summarize(&rows) {
        for (name, q) in [
            ("entropy", s.entropy),
            ("quadratic", s.quadratic),
            ("t1", s.t1),
            ("t2", s.t2),
        ] {
            writeln!(
                err,
                "{}\t{name}\t{}\t{}\t{}\t{}",
                s.method, q.lower, q.median, q.upper, s.failed
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn make_fixture(args: &FixtureArgs) -> Result<ExitCode> {
    let mut design = SimulationDesign::new(args.p, args.structure, args.m, args.n, args.seed)?;
    design.null_count = args.null_count;
    let data = simulate_summary_panel(&design)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let labels = data.panel.traits().to_vec();
    for (label, records) in labels.iter().zip(synthetic_records(&data.panel, &data.nulls)) {
        write_gwas_file(&args.out_dir.join(format!("{label}.tsv")), &records)?;
    }
    let mut truth = labels.join("\t");
    truth.push('\n');
    for row in data.truth.to_rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        truth.push_str(&cells.join("\t"));
        truth.push('\n');
    }
    fs::write(args.out_dir.join("truth.tsv"), truth)?;
    let mut support = String::from("trait_a\ttrait_b\n");
    for (k, s) in data.truth.off_diagonal_support() {
        support.push_str(&format!("{}\t{}\n", labels[k], labels[s]));
    }
    fs::write(args.out_dir.join("support.tsv"), support)?;
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<egg_core::Error>() {
        Some(e) if e.is_validation() => EXIT_VALIDATION,
        Some(_) => EXIT_DATA,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_DATA,
        None => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match config_file::merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Cve(a) => cve(a),
        Command::Reliability(a) => reliability(a),
        Command::Simulate(a) => simulate(a),
        Command::MakeFixture(a) => make_fixture(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
