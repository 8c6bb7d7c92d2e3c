//! `sst`: spectral smooth goodness-of-fit tests from the command line.
//!
//! Exit codes: 0 success, 1 error, 2 null rejected at `--alpha`.

mod spec;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use sst::artifact;
use sst::harness::{self, StudyConfig, StudyOutput};
use sst::mnist::{self, RankConfig, DEFAULT_RANK_BANDWIDTH, DEFAULT_RANK_CUTOFF};
use sst::smooth_test::{SstConfig, SstResult, SstTest};

use spec::{parse_bandwidths, parse_cutoffs, parse_digit, DataSource, NullSpec};

#[derive(Parser, Debug)]
#[command(name = "sst", version, about = "Spectral smooth goodness-of-fit tests")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SST_THREADS")]
    threads: Option<usize>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test a dataset against a null distribution.
    Test(TestArgs),
    /// Power study from a JSON config.
    Power(StudyArgs),
    /// Power study with one curve per tuning setting plus SST.
    Robustness(StudyArgs),
    /// Rank test images by the estimated density ratio against a train set.
    Rank(RankArgs),
    /// Work with saved basis artifacts.
    Basis {
        #[command(subcommand)]
        command: BasisCommand,
    },
}

#[derive(Subcommand, Debug)]
enum BasisCommand {
    /// Print a JSON summary of a basis artifact.
    Inspect { path: PathBuf },
}

#[derive(Args, Debug)]
struct TestArgs {
    /// CSV file (one point per row) or idx:IMAGES:LABELS[:DIGIT].
    #[arg(long, env = "SST_DATA")]
    data: String,
    /// FAMILY[:THETA][@DIM], `normal`, or bootstrap:DATA.
    #[arg(long, env = "SST_NULL")]
    null: String,
    /// `quantiles`, `literal` or comma-separated bandwidths.
    #[arg(long, env = "SST_BANDWIDTHS", default_value = "quantiles")]
    bandwidths: String,
    /// Cutoffs as `A..=B` or a comma-separated list.
    #[arg(long, env = "SST_CUTOFFS", default_value = "1..=10")]
    cutoffs: String,
    /// Size of the null sample the bases are built from.
    #[arg(long, env = "SST_M", default_value_t = 2000)]
    m: usize,
    /// Stage-1 replicates.
    #[arg(long, visible_alias = "n-cal", env = "SST_B1", default_value_t = 2000)]
    b1: usize,
    /// Stage-2 replicates.
    #[arg(long, env = "SST_B2", default_value_t = 1000)]
    b2: usize,
    /// Master seed; a random one is drawn and reported when absent.
    #[arg(long, env = "SST_SEED")]
    seed: Option<u64>,
    /// Exit with code 2 when the p-value is at most this level.
    #[arg(long, env = "SST_ALPHA")]
    alpha: Option<f64>,
    /// Keep IDX pixels on the 0–255 scale.
    #[arg(long)]
    raw_pixels: bool,
    /// Write the JSON result here instead of stdout.
    #[arg(long, env = "SST_OUT")]
    out: Option<PathBuf>,
    /// Reuse bases and calibration from an artifact.
    #[arg(long, conflicts_with = "save_basis")]
    basis: Option<PathBuf>,
    /// Save bases and calibration to an artifact.
    #[arg(long)]
    save_basis: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// JSON study config.
    #[arg(long, env = "SST_CONFIG")]
    config: PathBuf,
    #[arg(long, env = "SST_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "SST_M")]
    m: Option<usize>,
    #[arg(long, env = "SST_B1")]
    b1: Option<usize>,
    #[arg(long, env = "SST_B2")]
    b2: Option<usize>,
    #[arg(long, env = "SST_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, env = "SST_BANDWIDTHS")]
    bandwidths: Option<String>,
    #[arg(long, env = "SST_CUTOFFS")]
    cutoffs: Option<String>,
    /// Replicates per θ.
    #[arg(long, env = "SST_REPS")]
    reps: Option<usize>,
    /// Report directory (default: the config's `out_dir`, else `.`).
    #[arg(long, env = "SST_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[arg(long)]
    train_images: PathBuf,
    #[arg(long)]
    train_labels: PathBuf,
    #[arg(long)]
    test_images: PathBuf,
    #[arg(long)]
    test_labels: PathBuf,
    /// Digit selecting both the train and the test images.
    #[arg(long)]
    digit: String,
    /// Digit for the test images when it differs from `--digit`.
    #[arg(long)]
    test_digit: Option<String>,
    #[arg(long, default_value_t = DEFAULT_RANK_CUTOFF)]
    cutoff: usize,
    #[arg(long, default_value_t = DEFAULT_RANK_BANDWIDTH)]
    bandwidth: f64,
    /// Size of the bootstrap null sample.
    #[arg(long, env = "SST_M", default_value_t = 1000)]
    m: usize,
    #[arg(long, env = "SST_SEED")]
    seed: Option<u64>,
    /// Scale pixels to [0, 1] instead of keeping 0–255.
    #[arg(long)]
    scaled_pixels: bool,
    /// Images per row of the contact sheet.
    #[arg(long, default_value_t = 8)]
    per_row: usize,
    #[arg(long, env = "SST_OUT", default_value = ".")]
    out: PathBuf,
}

#[derive(Serialize)]
struct TestReport<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    data: &'a DataSource,
    null: &'a NullSpec,
    config: &'a SstConfig,
    alpha: Option<f64>,
    rejected: Option<bool>,
    result: &'a SstResult,
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        info!("no seed given, using {s}");
        s
    })
}

fn cmd_test(args: TestArgs) -> Result<ExitCode> {
    if let Some(a) = args.alpha {
        if !(a > 0.0 && a < 1.0) {
            bail!("--alpha must lie in (0, 1), got {a}");
        }
    }
    let source = DataSource::parse(&args.data, args.raw_pixels)?;
    let null = NullSpec::parse(&args.null, args.raw_pixels)?;
    let data = source.load()?;
    if data.is_empty() {
        bail!("{} contains no points", args.data);
    }
    let seed = seed_or_random(args.seed);
    let cfg = SstConfig {
        bandwidths: parse_bandwidths(&args.bandwidths)?,
        cutoffs: parse_cutoffs(&args.cutoffs)?,
        m: args.m,
        b1: args.b1,
        b2: args.b2,
        seed,
        ..SstConfig::default()
    };
    let test = match &args.basis {
        Some(path) => {
            let a = artifact::load(path).with_context(|| format!("loading {}", path.display()))?;
            let cal = a.calibration.with_context(|| format!("{} holds no calibration", path.display()))?;
            SstTest::from_parts(a.bases, cal, None)?
        }
        None => {
            let sampler = null.sampler()?;
            SstTest::prepare(sampler.as_ref(), &cfg, data.len())?
        }
    };
    if let Some(path) = &args.save_basis {
        artifact::save(path, test.bases(), Some(test.calibration()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let result = test.test(&data)?;
    let rejected = args.alpha.map(|a| result.p_value <= a);
    let report = TestReport {
        tool: "sst",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        data: &source,
        null: &null,
        config: &cfg,
        alpha: args.alpha,
        rejected,
        result: &result,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    eprintln!("T_SST = {:.6}, p = {:.4} (n = {}, seed {seed})", result.t_sst_observed, result.p_value, result.n);
    for l in &result.lambdas {
        eprintln!("  ε = {:<12.6e} I = {:<3} T = {:.6e}  T* = {:>8.3}  p = {:.4}", l.bandwidth, l.cutoff, l.t, l.t_star, l.p_value);
    }
    for d in &result.dropped {
        eprintln!("  dropped ε = {:.6e} I = {}: {}", d.setting.bandwidth, d.setting.cutoff, d.reason);
    }
    Ok(if rejected == Some(true) { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn load_study(args: &StudyArgs) -> Result<StudyConfig> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg: StudyConfig =
        serde_json::from_str(&text).with_context(|| format!("invalid study config {}", args.config.display()))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.b1 {
        cfg.b1 = v;
    }
    if let Some(v) = args.b2 {
        cfg.b2 = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = &args.bandwidths {
        cfg.bandwidths = parse_bandwidths(v)?;
    }
    if let Some(v) = &args.cutoffs {
        cfg.cutoffs = parse_cutoffs(v)?;
    }
    if let Some(v) = &args.out {
        cfg.out_dir = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_study(cfg: &StudyConfig, out: &StudyOutput) -> Result<()> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let paths = harness::emit_reports(cfg, out, &dir).with_context(|| format!("writing reports to {}", dir.display()))?;
    for r in &out.table.rows {
        match r.se {
            Some(se) => eprintln!("{:<40} θ = {:<8} rate = {:.3} ± {:.3}", r.method, r.theta, r.rate, se),
            None => eprintln!("{:<40} θ = {:<8} rate = {:.3} (external)", r.method, r.theta, r.rate),
        }
    }
    println!("{}", paths.csv.display());
    println!("{}", paths.svg.display());
    println!("{}", paths.manifest.display());
    Ok(())
}

fn cmd_power(args: StudyArgs) -> Result<ExitCode> {
    let cfg = load_study(&args)?;
    let out = harness::run_study_detailed(&cfg)?;
    write_study(&cfg, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_robustness(args: StudyArgs) -> Result<ExitCode> {
    let cfg = load_study(&args)?;
    let out = harness::run_robustness_study(&cfg)?;
    write_study(&cfg, &out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RankManifest<'a> {
    tool: &'static str,
    version: &'static str,
    train_images: &'a Path,
    train_labels: &'a Path,
    test_images: &'a Path,
    test_labels: &'a Path,
    train_digit: u8,
    test_digit: u8,
    raw_pixels: bool,
    train_size: usize,
    test_size: usize,
    config: &'a RankConfig,
}

fn cmd_rank(args: RankArgs) -> Result<ExitCode> {
    let digit = parse_digit(&args.digit)?;
    let test_digit = args.test_digit.as_deref().map(parse_digit).transpose()?.unwrap_or(digit);
    let raw = !args.scaled_pixels;
    let train = mnist::load_labeled(&args.train_images, &args.train_labels, raw)?;
    let test = mnist::load_labeled(&args.test_images, &args.test_labels, raw)?;
    let train_set = mnist::filter_digit(&train, digit)?;
    let test_idx = test.indices_of(test_digit)?;
    if train_set.is_empty() || test_idx.is_empty() {
        bail!("no train images of digit {digit} or no test images of digit {test_digit}");
    }
    let test_set = test.images.select(&test_idx);
    let cfg = RankConfig { cutoff: args.cutoff, bandwidth: args.bandwidth, m: args.m, seed: seed_or_random(args.seed) };
    let ranked = mnist::rank_by_density_ratio(&train_set, &test_set, &cfg)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join("ranking.csv");
    let mut csv = Vec::new();
    mnist::write_ranking_csv(&mut csv, &ranked, &test_idx, &test.labels)?;
    fs::write(&csv_path, csv)?;
    let pgm_path = args.out.join("contact_sheet.pgm");
    fs::write(&pgm_path, mnist::contact_sheet(&test_set, &ranked, test.shape, args.per_row, raw)?)?;
    let manifest = RankManifest {
        tool: "sst",
        version: env!("CARGO_PKG_VERSION"),
        train_images: &args.train_images,
        train_labels: &args.train_labels,
        test_images: &args.test_images,
        test_labels: &args.test_labels,
        train_digit: digit,
        test_digit,
        raw_pixels: raw,
        train_size: train_set.len(),
        test_size: test_set.len(),
        config: &cfg,
    };
    let manifest_path = args.out.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    for p in [&csv_path, &pgm_path, &manifest_path] {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct BasisSummary {
    bandwidth: f64,
    i_max: usize,
    usable_cutoff: usize,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct CalibrationSummary {
    n: usize,
    b1: usize,
    b2: usize,
    seed: u64,
    settings: usize,
    dropped: usize,
}

#[derive(Serialize)]
struct Inspection {
    format_version: u32,
    points: usize,
    dim: usize,
    bases: Vec<BasisSummary>,
    calibration: Option<CalibrationSummary>,
}

fn cmd_inspect(path: &Path) -> Result<ExitCode> {
    let a = artifact::load(path).with_context(|| format!("loading {}", path.display()))?;
    let inspection = Inspection {
        format_version: artifact::VERSION,
        points: a.bases.training().len(),
        dim: a.bases.training().dim(),
        bases: a
            .bases
            .bases()
            .iter()
            .map(|b| BasisSummary {
                bandwidth: b.kernel().bandwidth(),
                i_max: b.i_max(),
                usable_cutoff: b.usable_cutoff(),
                eigenvalues: b.eigenvalues().to_vec(),
            })
            .collect(),
        calibration: a.calibration.map(|c| CalibrationSummary {
            n: c.n,
            b1: c.b1,
            b2: c.b2,
            seed: c.seed,
            settings: c.lambdas.len(),
            dropped: c.dropped.len(),
        }),
    };
    println!("{}", serde_json::to_string_pretty(&inspection)?);
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Power(a) => cmd_power(a),
        Command::Robustness(a) => cmd_robustness(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Basis { command: BasisCommand::Inspect { path } } => cmd_inspect(&path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SST_LOG", level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
