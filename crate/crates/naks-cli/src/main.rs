//! Command-line interface for constructing, sampling, and measuring random
//! Kakeya sets over truncated local rings.
//!
//! Subcommands map one-to-one onto the library layers: `theory` prints the
//! closed-form expectation table, `sample` runs reproducible Monte Carlo
//! experiments, `exact` averages over the entire map space, `heights` checks
//! the height-sum identity, `bound` prints deterministic lower bounds, and
//! `render` exports stored or freshly sampled sets as PGM rasters or voxel
//! lists.
//!
//! Exit codes: `0` success, `2` invariant violation, `64` usage error,
//! `70` internal error.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use naks::kakeya::KakeyaSet;
use naks::lipschitz::MapSampler;
use naks::montecarlo::{
    self, ExperimentConfig, DEFAULT_HISTOGRAM_BINS, DEFAULT_SAMPLES,
};
use naks::render::{export_voxels, render_2d};
use naks::ring::{RingDescriptor, RingFamily};
use naks::theory;

/// Upper limit on levels for exact-rational commands; see [`exact_level_cap`].
const MAX_EXACT_LEVEL: u32 = 20;

/// Largest level whose exact closed-form rationals stay tractable: their bit
/// size grows like `(p^{d-1})^n`, so the cap keeps that near `2^24` bits.
fn exact_level_cap(p: u64, d: usize) -> u32 {
    let bits_per_level = (d as f64 - 1.0) * (p as f64).log2();
    ((24.0 / bits_per_level).floor() as u32).clamp(1, MAX_EXACT_LEVEL)
}

#[derive(Parser)]
#[command(
    name = "naks",
    version,
    about = "Random Kakeya sets over truncated local rings: exact measures, \
             closed-form expectations, and reproducible sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form expectation table for a range of levels.
    Theory(TheoryArgs),
    /// Sample random Kakeya sets and report measure statistics.
    Sample(SampleArgs),
    /// Average the measure over the entire map space (small parameters only).
    Exact(ExactArgs),
    /// Evaluate the height-sum identity against the recurrence.
    Heights(HeightsArgs),
    /// Print deterministic lower bounds on planar measures.
    Bound(BoundArgs),
    /// Render a set as a PGM raster (d=2) or voxel CSV (d=3).
    Render(RenderArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    /// Integers modulo p^n.
    Padic,
    /// Polynomials over F_p truncated at degree n.
    Series,
}

impl From<FamilyArg> for RingFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Padic => RingFamily::Padic,
            FamilyArg::Series => RingFamily::Series,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct LevelRange {
    /// Single level n.
    #[arg(long, conflicts_with_all = ["n_min", "n_max"])]
    n: Option<u32>,
    /// First level of a range (default 1).
    #[arg(long)]
    n_min: Option<u32>,
    /// Last level of a range (inclusive).
    #[arg(long)]
    n_max: Option<u32>,
}

impl LevelRange {
    fn resolve(&self) -> Result<(u32, u32), CliError> {
        match (self.n, self.n_min, self.n_max) {
            (Some(n), None, None) => Ok((n, n)),
            (None, min, Some(max)) => Ok((min.unwrap_or(1), max)),
            _ => Err(CliError::usage("specify --n, or --n-max (with optional --n-min)")),
        }
    }
}

#[derive(Args)]
struct TheoryArgs {
    /// Residue characteristic (prime).
    #[arg(long)]
    p: u64,
    /// Ambient dimension d.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[command(flatten)]
    range: LevelRange,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SampleArgs {
    /// Ring family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Series)]
    family: FamilyArg,
    /// Residue characteristic (prime).
    #[arg(long)]
    p: u64,
    /// Ambient dimension d.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[command(flatten)]
    range: LevelRange,
    /// Number of sampled maps per level.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: u64,
    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = automatic; NAKS_THREADS overrides this default).
    #[arg(long)]
    workers: Option<usize>,
    /// Histogram bins.
    #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
    bins: usize,
    /// Stats output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram output file (single-level runs only).
    #[arg(long)]
    hist_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ExactArgs {
    /// Ring family.
    #[arg(long, value_enum, default_value_t = FamilyArg::Series)]
    family: FamilyArg,
    /// Residue characteristic (prime).
    #[arg(long)]
    p: u64,
    /// Ambient dimension d.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Level n.
    #[arg(long)]
    n: u32,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct HeightsArgs {
    /// Residue characteristic (prime).
    #[arg(long)]
    p: u64,
    /// Ambient dimension d.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Level n.
    #[arg(long)]
    n: u32,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    /// Residue characteristic (prime).
    #[arg(long)]
    p: u64,
    /// Level n.
    #[arg(long)]
    n: u32,
    /// Parameter valuation for the torsion bound (omitted: planar bound only).
    #[arg(long)]
    ell: Option<u32>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct RenderArgs {
    /// Input set file (raw bit-array format); mutually exclusive with --p.
    #[arg(long, conflicts_with_all = ["p", "dim", "n"])]
    input: Option<PathBuf>,
    /// Ring family (needed to interpret the input file or sample a set).
    #[arg(long, value_enum, default_value_t = FamilyArg::Series)]
    family: FamilyArg,
    /// Residue characteristic for sampling a fresh set.
    #[arg(long)]
    p: Option<u64>,
    /// Ambient dimension for sampling a fresh set.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Level for sampling a fresh set.
    #[arg(long)]
    n: Option<u32>,
    /// RNG seed for sampling; also recorded in the raster metadata.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (PGM for d=2, CSV for d=3).
    #[arg(long)]
    out: PathBuf,
}

/// Top-level failure, tagged with the process exit code.
#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 64 }
    }

    fn invariant(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 70 }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::internal(e.to_string())
    }
}

impl From<montecarlo::MonteCarloError> for CliError {
    fn from(e: montecarlo::MonteCarloError) -> Self {
        match e {
            montecarlo::MonteCarloError::LowerBoundViolation { .. } => {
                CliError::invariant(e.to_string())
            }
            montecarlo::MonteCarloError::InvalidConfig(_) => CliError::usage(e.to_string()),
            // Caps and parameter validation failures are request problems.
            _ => CliError::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("naks: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Theory(args) => cmd_theory(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Heights(args) => cmd_heights(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Render(args) => cmd_render(args),
    }
}

/// Writes `content` to the path or stdout.
fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => std::io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn check_prime(p: u64) -> Result<(), CliError> {
    RingDescriptor::new(RingFamily::Series, p, 1)
        .map(|_| ())
        .map_err(|e| CliError::usage(e.to_string()))
}

fn check_dim(d: usize) -> Result<(), CliError> {
    if d < 2 {
        return Err(CliError::usage("dimension must be at least 2"));
    }
    Ok(())
}

fn check_exact_level(n: u32, p: u64, d: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::usage("level must be at least 1"));
    }
    let cap = exact_level_cap(p, d);
    if n > cap {
        return Err(CliError::usage(format!(
            "exact rational evaluation for p={p}, d={d} is limited to n <= {cap}"
        )));
    }
    Ok(())
}

/// Reproducibility stanza prepended (as comments) to CSV outputs and embedded
/// in JSON outputs.
fn stanza(command: &str, config_json: &str) -> String {
    format!(
        "# naks {} {}\n# config: {}\n",
        env!("CARGO_PKG_VERSION"),
        command,
        config_json
    )
}

fn rational_pair(x: &num_rational::BigRational) -> (String, String) {
    (x.to_string(), theory::decimal_string(x, 6))
}

fn cmd_theory(args: TheoryArgs) -> Result<(), CliError> {
    check_prime(args.p)?;
    check_dim(args.dim)?;
    let (n_min, n_max) = args.range.resolve()?;
    check_exact_level(n_max, args.p, args.dim)?;
    if n_min > n_max || n_min == 0 {
        return Err(CliError::usage("level range must be non-empty and start at 1"));
    }

    let constant = theory::asymptotic_constant(args.p, args.dim);
    let config_json = format!(
        "{{\"p\":{},\"dim\":{},\"n_min\":{},\"n_max\":{}}}",
        args.p, args.dim, n_min, n_max
    );
    let mut rows = Vec::new();
    for n in n_min..=n_max {
        let u = theory::u_sequence(args.p, args.dim, n);
        let mean = theory::expected_measure(args.p, args.dim, n);
        let bound = theory::lower_bound_dim2(args.p, n);
        rows.push((n, u, mean, bound));
    }

    let content = match args.format {
        Format::Csv => {
            let mut s = stanza("theory", &config_json);
            s.push_str(
                "q,d,n,u_n,u_prime_n,expected_measure_rational,expected_measure_decimal,\
                 lower_bound_dim2,asymptotic_constant\n",
            );
            for (n, u, mean, bound) in &rows {
                let (mean_rat, mean_dec) = rational_pair(mean);
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    args.p, args.dim, n, u, mean_rat, mean_rat, mean_dec, bound, constant
                ));
            }
            s
        }
        Format::Json => {
            let rows_json: Vec<String> = rows
                .iter()
                .map(|(n, u, mean, bound)| {
                    let (mean_rat, mean_dec) = rational_pair(mean);
                    format!(
                        "{{\"q\":{},\"d\":{},\"n\":{},\"u_n\":\"{}\",\"u_prime_n\":\"{}\",\
                         \"expected_measure_rational\":\"{}\",\"expected_measure_decimal\":\"{}\",\
                         \"lower_bound_dim2\":\"{}\",\"asymptotic_constant\":\"{}\"}}",
                        args.p, args.dim, n, u, mean_rat, mean_rat, mean_dec, bound, constant
                    )
                })
                .collect();
            format!(
                "{{\"version\":\"{}\",\"command\":\"theory\",\"config\":{},\"rows\":[{}]}}\n",
                env!("CARGO_PKG_VERSION"),
                config_json,
                rows_json.join(",")
            )
        }
    };
    emit(&args.out, &content)
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    check_prime(args.p)?;
    check_dim(args.dim)?;
    let (n_min, n_max) = args.range.resolve()?;
    let workers = match args.workers {
        Some(w) => w,
        None => std::env::var("NAKS_THREADS")
            .ok()
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::usage("NAKS_THREADS must be a number"))
            })
            .transpose()?
            .unwrap_or(0),
    };
    if args.hist_out.is_some() && n_min != n_max {
        return Err(CliError::usage(
            "histogram export requires a single level (--n)",
        ));
    }

    let config = ExperimentConfig {
        family: args.family.into(),
        p: args.p,
        d: args.dim,
        n_min,
        n_max,
        samples: args.samples,
        seed: args.seed,
        workers,
        histogram_bins: args.bins,
        out: args.out.as_ref().map(|p| p.display().to_string()),
        histogram_out: args.hist_out.as_ref().map(|p| p.display().to_string()),
    };
    let config_json =
        serde_json::to_string(&config).map_err(|e| CliError::internal(e.to_string()))?;
    let reports = montecarlo::run_experiment(&config)?;

    let content = match args.format {
        Format::Csv => {
            let mut s = stanza("sample", &config_json);
            s.push_str(
                "q,d,n,samples,seed,mean_empirical,std_empirical,mean_theoretical,\
                 parity_even_fraction\n",
            );
            // Full f64 precision so CSV and JSON carry identical numbers.
            for report in &reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    args.p,
                    args.dim,
                    report.n,
                    config.samples,
                    config.seed,
                    report.stats.mean,
                    report.stats.std,
                    report.mean_theoretical,
                    report.stats.parity_even_fraction()
                ));
            }
            s
        }
        Format::Json => {
            let reports_json =
                serde_json::to_string(&reports).map_err(|e| CliError::internal(e.to_string()))?;
            format!(
                "{{\"version\":\"{}\",\"command\":\"sample\",\"config\":{},\"reports\":{}}}\n",
                env!("CARGO_PKG_VERSION"),
                config_json,
                reports_json
            )
        }
    };
    emit(&args.out, &content)?;

    if let Some(hist_path) = &args.hist_out {
        let report = reports.first().expect("single-level run has one report");
        let mut s = stanza("sample", &config_json);
        s.push_str("bin_lower,bin_upper,density\n");
        for bin in &report.stats.histogram {
            s.push_str(&format!("{},{},{}\n", bin.lower, bin.upper, bin.density));
        }
        std::fs::write(hist_path, s)?;
    }
    Ok(())
}

fn cmd_exact(args: ExactArgs) -> Result<(), CliError> {
    check_prime(args.p)?;
    check_dim(args.dim)?;
    check_exact_level(args.n, args.p, args.dim)?;
    let ring = RingDescriptor::new(args.family.into(), args.p, args.n)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mean = montecarlo::exact_experiment(ring, args.dim)?;
    let (rat, dec) = rational_pair(&mean);
    let expected = theory::expected_measure(args.p, args.dim, args.n);
    let config_json = format!(
        "{{\"family\":\"{}\",\"p\":{},\"dim\":{},\"n\":{}}}",
        match args.family {
            FamilyArg::Padic => "padic",
            FamilyArg::Series => "series",
        },
        args.p,
        args.dim,
        args.n
    );
    let matches_theory = mean == expected;
    let content = match args.format {
        Format::Csv => format!(
            "{}q,d,n,mean_rational,mean_decimal,matches_theory\n{},{},{},{},{},{}\n",
            stanza("exact", &config_json),
            args.p,
            args.dim,
            args.n,
            rat,
            dec,
            matches_theory
        ),
        Format::Json => format!(
            "{{\"version\":\"{}\",\"command\":\"exact\",\"config\":{},\"mean_rational\":\"{}\",\
             \"mean_decimal\":\"{}\",\"matches_theory\":{}}}\n",
            env!("CARGO_PKG_VERSION"),
            config_json,
            rat,
            dec,
            matches_theory
        ),
    };
    emit(&args.out, &content)
}

fn cmd_heights(args: HeightsArgs) -> Result<(), CliError> {
    check_prime(args.p)?;
    check_dim(args.dim)?;
    check_exact_level(args.n, args.p, args.dim)?;
    let u_rec = theory::u_sequence(args.p, args.dim, args.n);
    let u_sum = theory::weighted_height_sum(args.p, args.dim, args.n, false)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mean_rec = theory::expected_measure(args.p, args.dim, args.n);
    // The modified sum absorbs all but the residue-point-count scaling.
    let scale = num_rational::BigRational::new(
        (1..=args.dim as u32)
            .map(|i| num_bigint::BigInt::from(args.p).pow(i - 1))
            .sum(),
        num_bigint::BigInt::from(args.p).pow(args.dim as u32 - 1),
    );
    let mean_sum = scale
        * theory::weighted_height_sum(args.p, args.dim, args.n, true)
            .map_err(|e| CliError::usage(e.to_string()))?;
    let config_json = format!(
        "{{\"p\":{},\"dim\":{},\"n\":{}}}",
        args.p, args.dim, args.n
    );
    let content = match args.format {
        Format::Csv => format!(
            "{}q,d,n,u_recurrence,u_height_sum,u_equal,mean_recurrence,mean_height_sum,mean_equal\n\
             {},{},{},{},{},{},{},{},{}\n",
            stanza("heights", &config_json),
            args.p,
            args.dim,
            args.n,
            u_rec,
            u_sum,
            u_rec == u_sum,
            mean_rec,
            mean_sum,
            mean_rec == mean_sum
        ),
        Format::Json => format!(
            "{{\"version\":\"{}\",\"command\":\"heights\",\"config\":{},\
             \"u_recurrence\":\"{}\",\"u_height_sum\":\"{}\",\"u_equal\":{},\
             \"mean_recurrence\":\"{}\",\"mean_height_sum\":\"{}\",\"mean_equal\":{}}}\n",
            env!("CARGO_PKG_VERSION"),
            config_json,
            u_rec,
            u_sum,
            u_rec == u_sum,
            mean_rec,
            mean_sum,
            mean_rec == mean_sum
        ),
    };
    emit(&args.out, &content)
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    check_prime(args.p)?;
    let dim2 = theory::lower_bound_dim2(args.p, args.n);
    let (dim2_rat, dim2_dec) = rational_pair(&dim2);
    let torsion = match args.ell {
        Some(ell) => {
            if ell > args.n {
                return Err(CliError::usage("--ell must not exceed --n"));
            }
            Some(theory::lower_bound_torsion(args.p, args.n, ell))
        }
        None => None,
    };
    let config_json = format!(
        "{{\"p\":{},\"n\":{},\"ell\":{}}}",
        args.p,
        args.n,
        args.ell.map_or("null".into(), |e| e.to_string())
    );
    let (tors_rat, tors_dec) = match &torsion {
        Some(t) => rational_pair(t),
        None => (String::new(), String::new()),
    };
    let content = match args.format {
        Format::Csv => format!(
            "{}q,n,ell,bound_dim2,bound_dim2_decimal,bound_torsion,bound_torsion_decimal\n\
             {},{},{},{},{},{},{}\n",
            stanza("bound", &config_json),
            args.p,
            args.n,
            args.ell.map_or(String::new(), |e| e.to_string()),
            dim2_rat,
            dim2_dec,
            tors_rat,
            tors_dec
        ),
        Format::Json => format!(
            "{{\"version\":\"{}\",\"command\":\"bound\",\"config\":{},\
             \"bound_dim2\":\"{}\",\"bound_dim2_decimal\":\"{}\",\
             \"bound_torsion\":{},\"bound_torsion_decimal\":{}}}\n",
            env!("CARGO_PKG_VERSION"),
            config_json,
            dim2_rat,
            dim2_dec,
            torsion.as_ref().map_or("null".into(), |_| format!("\"{tors_rat}\"")),
            torsion.as_ref().map_or("null".into(), |_| format!("\"{tors_dec}\""))
        ),
    };
    emit(&args.out, &content)
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let set = match &args.input {
        Some(path) => {
            let file = File::open(path)?;
            let mut reader = BufReader::new(file);
            read_set(&mut reader, args.family.into())?
        }
        None => {
            let p = args
                .p
                .ok_or_else(|| CliError::usage("provide --input, or --p and --n to sample"))?;
            let n = args
                .n
                .ok_or_else(|| CliError::usage("provide --input, or --p and --n to sample"))?;
            check_prime(p)?;
            check_dim(args.dim)?;
            let ring = RingDescriptor::new(args.family.into(), p, n)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let sampler =
                MapSampler::new(ring, args.dim).map_err(|e| CliError::usage(e.to_string()))?;
            let map = sampler.sample(&mut ChaCha8Rng::seed_from_u64(args.seed));
            KakeyaSet::build(&map).map_err(|e| CliError::usage(e.to_string()))?
        }
    };

    match set.dim() {
        2 => {
            let image = render_2d(&set, args.seed).map_err(|e| CliError::usage(e.to_string()))?;
            let mut bytes = Vec::new();
            image
                .write_pgm(&mut bytes)
                .map_err(|e| CliError::internal(e.to_string()))?;
            std::fs::write(&args.out, bytes)?;
        }
        3 => {
            let mut bytes = Vec::new();
            export_voxels(&set, &mut bytes).map_err(|e| CliError::internal(e.to_string()))?;
            std::fs::write(&args.out, bytes)?;
        }
        d => {
            return Err(CliError::usage(format!(
                "rendering supports d = 2 (PGM) and d = 3 (voxels), not d = {d}"
            )));
        }
    }
    Ok(())
}

fn read_set<R: Read>(reader: &mut R, family: RingFamily) -> Result<KakeyaSet, CliError> {
    KakeyaSet::read_bits(reader, family).map_err(|e| CliError::usage(e.to_string()))
}
