use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use funmix::io::{diagnostics_text, read_any, read_bundle, write_bundle, write_matrix};
use funmix::metrics::{align_abundances, prune_library, sre};
use funmix::simulate::{simulate, synthetic_library, SimulationConfig};
use funmix::solvers::{unmix, AdmmParams, Initialization, Method, Profile};
use funmix::Matrix;

#[derive(Parser)]
#[command(name = "funmix", version, about = "Semi-supervised hyperspectral unmixing")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene bundle.
    Simulate(SimulateArgs),
    /// Estimate abundances (and endmembers) from observations.
    Unmix(UnmixArgs),
    /// Print the SRE in dB of an abundance estimate.
    Eval(EvalArgs),
    /// Remove library atoms closer than a spectral angle to an earlier atom.
    Prune(PruneArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Purity,
    Dc1,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fclsu,
    Fasun,
    Suns,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Simulated,
    Real,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zero,
    Atoms,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "purity")]
    kind: KindArg,
    /// Pixel count (purity scenes).
    #[arg(long, default_value_t = 1000)]
    pixels: usize,
    /// Image side (dc1 scenes).
    #[arg(long, default_value_t = 75)]
    side: usize,
    #[arg(long, default_value_t = 5)]
    endmembers: usize,
    /// Upper bound on the l2 norm of abundance columns (purity scenes).
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Dirichlet concentration; defaults to 1/endmembers.
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise level in dB; noiseless when omitted.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Library to draw endmembers from.
    #[arg(long, required_unless_present = "synthetic_bands")]
    library: Option<PathBuf>,
    /// Generate a synthetic library with this many bands instead of reading one.
    #[arg(long, conflicts_with = "library", requires = "synthetic_atoms")]
    synthetic_bands: Option<usize>,
    #[arg(long)]
    synthetic_atoms: Option<usize>,
    /// Library atoms to use as endmembers, comma separated; random otherwise.
    #[arg(long, value_delimiter = ',')]
    atoms: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UnmixArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Observations, or a bundle directory written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Spectral library; taken from the bundle when --input is a directory.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Known endmembers (fclsu only).
    #[arg(long)]
    endmember_matrix: Option<PathBuf>,
    /// Number of endmembers to estimate.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_enum, default_value = "simulated")]
    profile: ProfileArg,
    #[arg(long)]
    mu_a: Option<f64>,
    #[arg(long)]
    mu_b1: Option<f64>,
    #[arg(long)]
    mu_b2: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    outer: Option<usize>,
    #[arg(long)]
    inner_a: Option<usize>,
    #[arg(long)]
    inner_b: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "zero")]
    init: InitArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long = "true")]
    truth: PathBuf,
    #[arg(long)]
    est: PathBuf,
    /// Compare rows as given instead of matching endmembers first.
    #[arg(long)]
    no_align: bool,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    library: PathBuf,
    #[arg(long, default_value_t = 4.44)]
    min_angle: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Bad invocations exit with 1, failures while running with 2.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<funmix::Error> for Failure {
    fn from(e: funmix::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Unmix(args) => run_unmix(args),
        Command::Eval(args) => run_eval(args),
        Command::Prune(args) => run_prune(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Honors `FUNMIX_THREADS`; rayon's default (all cores) otherwise.
fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("FUNMIX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("FUNMIX_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let library = match (&args.library, args.synthetic_bands, args.synthetic_atoms) {
        (Some(path), _, _) => read_any(path)?,
        (None, Some(p), Some(m)) => synthetic_library(p, m, args.seed)?,
        _ => {
            return Err(usage(
                "either --library or --synthetic-bands with --synthetic-atoms is required",
            ))
        }
    };
    let mut config = match args.kind {
        KindArg::Purity => SimulationConfig::purity(args.pixels, args.endmembers, args.rho, args.seed),
        KindArg::Dc1 => SimulationConfig::dc1(args.side, args.endmembers, args.seed),
    };
    config.alpha = args.alpha;
    config.snr_db = args.snr;
    config.library_indices = args.atoms;
    let bundle = simulate(&config, &library)?;
    write_bundle(&args.out, &bundle)?;
    log::info!(
        "wrote {} scene ({} bands, {} pixels, atoms {:?}) to {}",
        config.kind,
        bundle.meta.p,
        bundle.meta.n,
        bundle.meta.atoms,
        args.out.display()
    );
    Ok(())
}

fn unmix_params(args: &UnmixArgs, method: Method) -> AdmmParams {
    let profile = match args.profile {
        ProfileArg::Simulated => Profile::Simulated,
        ProfileArg::Real => Profile::Real,
    };
    let mut p = AdmmParams::profile(profile, method);
    p.mu_a = args.mu_a.unwrap_or(p.mu_a);
    p.mu_b1 = args.mu_b1.unwrap_or(p.mu_b1);
    p.mu_b2 = args.mu_b2.unwrap_or(p.mu_b2);
    p.lambda = args.lambda.unwrap_or(p.lambda);
    p.outer = args.outer.unwrap_or(p.outer);
    p.inner_a = args.inner_a.unwrap_or(p.inner_a);
    p.inner_b = args.inner_b.unwrap_or(p.inner_b);
    p.tol = args.tol.unwrap_or(p.tol);
    p.init = match args.init {
        InitArg::Zero => Initialization::Zero,
        InitArg::Atoms => Initialization::AtomSelection,
    };
    p
}

fn run_unmix(args: UnmixArgs) -> Result<(), Failure> {
    let method = match args.method {
        MethodArg::Fclsu => Method::Fclsu,
        MethodArg::Fasun => Method::Fasun,
        MethodArg::Suns => Method::Suns,
    };
    if method == Method::Fclsu && args.endmember_matrix.is_none() {
        return Err(usage("--method fclsu requires --endmember-matrix"));
    }
    if method != Method::Fclsu && args.endmember_matrix.is_some() {
        return Err(usage("--endmember-matrix is only used by --method fclsu"));
    }
    let params = unmix_params(&args, method);
    params.validate().map_err(|e| Failure::Usage(e.into()))?;

    let (y, bundled_library) = if args.input.is_dir() {
        let bundle = read_bundle(&args.input)?;
        (bundle.y, Some(bundle.d))
    } else {
        (read_any(&args.input)?, None)
    };

    let (dictionary, r) = match method {
        Method::Fclsu => {
            let e = read_any(args.endmember_matrix.as_ref().expect("checked above"))?;
            let r = e.cols();
            if args.r.is_some_and(|given| given != r) {
                return Err(usage(format!(
                    "--r {} disagrees with the {r} endmember columns",
                    args.r.unwrap()
                )));
            }
            (e, r)
        }
        _ => {
            let r = args.r.ok_or_else(|| usage(format!("--method {method} requires --r")))?;
            let d = match (&args.library, bundled_library) {
                (Some(path), _) => read_any(path)?,
                (None, Some(d)) => d,
                (None, None) => return Err(usage(format!("--method {method} requires --library"))),
            };
            (d, r)
        }
    };

    let result = unmix(method, &y, &dictionary, r, &params)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_matrix(out.join("A_raw.fumx"), &result.a_raw)?;
    write_matrix(out.join("A_feasible.fumx"), &result.a_feasible)?;
    if let Some(b) = &result.b_hat {
        write_matrix(out.join("B.fumx"), b)?;
    }
    write_matrix(out.join("E.fumx"), &result.e_hat)?;
    let diag = out.join("diagnostics.txt");
    fs::write(&diag, diagnostics_text(method, &params, r, &result.diagnostics))
        .with_context(|| format!("writing {}", diag.display()))?;
    log::info!(
        "{method}: {} outer iterations in {:.3} s",
        result.diagnostics.outer_iterations,
        result.diagnostics.elapsed_secs
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), Failure> {
    let truth = read_any(&args.truth)?;
    let est = read_any(&args.est)?;
    let est: Matrix = if args.no_align {
        est
    } else {
        align_abundances(&truth, &est)?
    };
    let report = sre(&truth, &est)?;
    println!("{}", report.sre_db);
    Ok(())
}

fn run_prune(args: PruneArgs) -> Result<(), Failure> {
    if args.min_angle.is_nan() || args.min_angle < 0.0 {
        return Err(usage(format!(
            "--min-angle must be non-negative, got {}",
            args.min_angle
        )));
    }
    let library = read_any(&args.library)?;
    let pruned = prune_library(&library, args.min_angle)?;
    write_matrix(&args.out, &pruned.library)?;
    let kept: Vec<String> = pruned.kept_indices.iter().map(usize::to_string).collect();
    println!("kept {} of {} atoms: {}", kept.len(), library.cols(), kept.join(","));
    Ok(())
}
