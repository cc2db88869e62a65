use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lobbench::config::RunConfig;
use lobbench::lobster::{self, LoadOptions, LobsterError};
use lobbench::report::{self, RunError};
use lobbench::emit;
use lobbench_core::generator::{self, GeneratorError, Knob, RateProfile, SimConfig};
use lobbench_core::stats::derive_seed;
use lobbench_core::{Role, SequencePair};
use log::{info, warn};

#[derive(Parser)]
#[command(name = "lobbench", version, about = "Benchmark generated limit order book data against real data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data root with real/, generated/ and optionally cond/.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full benchmark; writes report.json and plot data to --out.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulates LOBSTER sequences with the stochastic generator.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Messages per sequence.
        #[arg(long, default_value_t = 10_000)]
        messages: usize,
        #[arg(long, default_value_t = 1)]
        sequences: usize,
        /// Rate profile JSON (as written by `rates`); reference rates otherwise.
        #[arg(long)]
        rates: Option<PathBuf>,
        /// Scales a rate family, e.g. `limit=2`.
        #[arg(long, value_parser = parse_perturb)]
        perturb: Vec<(Knob, f64)>,
        /// Visible book levels written.
        #[arg(long, default_value_t = 10)]
        levels: usize,
        #[arg(long, default_value = "sim")]
        prefix: String,
    },
    /// Estimates generator rates from LOBSTER data.
    Rates {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        levels: usize,
        #[arg(long, default_value_t = 100)]
        tick: i64,
        /// Output file; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L1 per score at the default, halved and doubled bin widths.
    AblateBins {
        #[command(flatten)]
        common: Common,
        /// Writes ablation.csv here as well as printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0])]
        factors: Vec<f64>,
    },
    /// Parses and checks LOBSTER files, reporting every problem.
    Validate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
    },
}

fn parse_perturb(s: &str) -> Result<(Knob, f64), String> {
    let (k, f) = s.split_once('=').ok_or("expected KNOB=FACTOR")?;
    let knob: Knob = k.parse().map_err(|e: GeneratorError| e.to_string())?;
    let factor: f64 = f.parse().map_err(|_| format!("bad factor '{f}'"))?;
    Ok((knob, factor))
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<LobsterError> for Failure {
    fn from(e: LobsterError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Usage(c.to_string()),
            RunError::Pool(_) => Failure::Internal(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Internal(format!("{}: {e}", path.display()))
}

fn load_config(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let data = common
        .data
        .clone()
        .or_else(|| config.data_root.clone())
        .ok_or_else(|| Failure::Usage("no data directory (use --data or data_root in the config)".into()))?;
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((config, data))
}

fn load(config: &RunConfig, data: &Path) -> Result<lobbench_core::DatasetBundle, Failure> {
    let opts = LoadOptions { n_levels: config.n_levels, tick_size: Some(config.tick_size) };
    let (bundle, warnings) = lobster::load_bundle(data, &opts)?;
    for w in warnings.iter().take(20) {
        warn!("{}, row {}: {}", w.file, w.row, w.msg);
    }
    if warnings.len() > 20 {
        warn!("{} more warnings", warnings.len() - 20);
    }
    Ok(bundle)
}

fn cmd_run(common: &Common, out: &Path) -> Result<(), Failure> {
    let (config, data) = load_config(common)?;
    let bundle = load(&config, &data)?;
    let run = report::run(&bundle, &config, common.jobs)?;
    let files = emit::emit(&run, out).map_err(io_failure(out))?;
    info!("wrote {} files to {}", files.len(), out.display());
    for a in &run.report.aggregates {
        let s = &a.summary.summary;
        println!("{:<13} mean {:.4}  median {:.4}  iqm {:.4}", a.metric.name(), s.mean, s.median, s.iqm);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    out: &Path,
    seed: u64,
    messages: usize,
    sequences: usize,
    rates: Option<&Path>,
    perturb: &[(Knob, f64)],
    levels: usize,
    prefix: &str,
) -> Result<(), Failure> {
    let mut profile = match rates {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<RateProfile>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => RateProfile::reference(),
    };
    for &(knob, f) in perturb {
        profile = generator::perturb(&profile, knob, f).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if levels == 0 || sequences == 0 {
        return Err(Failure::Usage("levels and sequences must be positive".into()));
    }
    std::fs::create_dir_all(out).map_err(io_failure(out))?;
    for i in 0..sequences {
        let mut cfg = SimConfig::reference(derive_seed(seed, &format!("sequence/{i}")), messages);
        cfg.initial = generator::reference_initial(levels, 1_000_000, cfg.tick);
        let sim = generator::simulate(&profile, &cfg).map_err(|e| Failure::Usage(e.to_string()))?;
        let stem = format!("{prefix}_{seed}_{i}");
        lobster::write_sequence(out, &stem, &sim.sequence)?;
        if sim.suspended_market_events > 0 || sim.dropped_orders > 0 {
            warn!("{stem}: {} market events suspended, {} orders dropped", sim.suspended_market_events, sim.dropped_orders);
        }
    }
    info!("wrote {sequences} sequences of {messages} messages to {}", out.display());
    Ok(())
}

fn sequences_in(data: &Path) -> Result<Vec<SequencePair>, Failure> {
    let dir = if data.join("real").is_dir() { data.join("real") } else { data.to_path_buf() };
    let pairs = lobster::pair_files(&dir)?;
    if pairs.is_empty() {
        return Err(Failure::Data(format!("{}: no LOBSTER file pairs", dir.display())));
    }
    pairs
        .iter()
        .map(|p| Ok(lobster::load_sequence(p, Role::Real, &LoadOptions::default())?.0))
        .collect()
}

fn cmd_rates(data: &Path, levels: usize, tick: i64, out: Option<&Path>) -> Result<(), Failure> {
    let seqs = sequences_in(data)?;
    let profile = generator::estimate_rates(&seqs, levels, tick).map_err(|e| Failure::Data(e.to_string()))?;
    let mut json = serde_json::to_string_pretty(&profile).map_err(|e| Failure::Internal(e.to_string()))?;
    json.push('\n');
    match out {
        Some(p) => std::fs::write(p, json).map_err(io_failure(p))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_ablate(common: &Common, out: Option<&Path>, factors: &[f64]) -> Result<(), Failure> {
    let (config, data) = load_config(common)?;
    if factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Failure::Usage("factors must be positive".into()));
    }
    let bundle = load(&config, &data)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Failure::Internal(e.to_string()))?;
    let rows = pool.install(|| report::ablate_bins(&bundle, &config, factors))?;
    println!("score,factor,l1,n_bins");
    for r in &rows {
        println!("{},{},{},{}", r.score, r.factor, r.l1, r.n_bins);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_failure(dir))?;
        let p = dir.join("ablation.csv");
        emit::write_ablation(&p, &rows).map_err(io_failure(&p))?;
    }
    Ok(())
}

fn cmd_validate(data: &Path, levels: Option<usize>) -> Result<(), Failure> {
    if !data.is_dir() {
        return Err(Failure::Data(format!("{}: not a directory", data.display())));
    }
    let r = lobster::validate_dir(data, &LoadOptions { n_levels: levels, tick_size: None });
    for w in &r.warnings {
        println!("warning: {}, row {}: {}", w.file, w.row, w.msg);
    }
    for e in &r.errors {
        println!("error: {e}");
    }
    println!("{} files checked, {} errors, {} warnings", r.files_checked, r.errors.len(), r.warnings.len());
    if r.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!("{} invalid file pairs", r.errors.len())))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { common, out } => cmd_run(common, out),
        Command::Simulate { out, seed, messages, sequences, rates, perturb, levels, prefix } => {
            cmd_simulate(out, *seed, *messages, *sequences, rates.as_deref(), perturb, *levels, prefix)
        }
        Command::Rates { data, levels, tick, out } => cmd_rates(data, *levels, *tick, out.as_deref()),
        Command::AblateBins { common, out, factors } => cmd_ablate(common, out.as_deref(), factors),
        Command::Validate { data, levels } => cmd_validate(data, *levels),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
