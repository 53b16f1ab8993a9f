//! `guardian` command line: train, evaluate, tabulate and plot.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for failures while
//! running.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use guardian_core::eval::{compare, compare_to_csv, confusion_matrix, evaluate, PolicySource};
use guardian_core::marl::{train_run, Algo, Checkpoint};
use guardian_core::scenario::{parse_scenario_list, ScenarioId, N_SCENARIOS};
use guardian_core::svg::{grouped_bars_svg, heatmap_svg, trajectory_svg};
use guardian_core::traj::{episodes_from_log, read_log};
use guardian_core::Config;

#[derive(Parser, Debug)]
#[command(name = "guardian", version, about = "Train and evaluate VIP-protection guard teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a guard team and write metrics plus checkpoints.
    Train(TrainArgs),
    /// Evaluate one policy on one scenario.
    Eval(EvalArgs),
    /// Cross-scenario matrix of four per-scenario checkpoints.
    Matrix(MatrixArgs),
    /// Scenario-conditioned policy vs per-scenario policies vs the formation controller.
    Compare(CompareArgs),
    /// Plot a trajectory log and recompute its cumulative threat.
    Replay(ReplayArgs),
    /// Print the effective configuration.
    Config(ConfigArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    algo: TrainAlgo,
    /// Comma-separated scenario letters, e.g. `A` or `A,B,C,D`.
    #[arg(long)]
    scenarios: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrainAlgo {
    Maddpg,
    Maupg,
    Qlb,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scripted {
    Qlb,
    Noop,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, conflicts_with = "algo", required_unless_present = "algo")]
    ckpt: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Scripted>,
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a JSON-lines trajectory log here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[command(flatten)]
    common: Common,
    /// `A=FILE,B=FILE,C=FILE,D=FILE`.
    #[arg(long)]
    ckpts: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    maupg: PathBuf,
    /// `A=FILE,B=FILE,C=FILE,D=FILE`, one per-scenario checkpoint each.
    #[arg(long)]
    maddpg: String,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[command(flatten)]
    common: Common,
    /// Print the full configuration as TOML.
    #[arg(long)]
    dump: bool,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<guardian_core::Error> for Failure {
    fn from(e: guardian_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Matrix(a) => matrix(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Replay(a) => replay(a),
        Command::Config(a) => config(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn load_config(c: &Common) -> std::result::Result<Config, Failure> {
    match &c.config {
        Some(p) => Config::load(p)
            .with_context(|| format!("loading {}", p.display()))
            .map_err(Failure::Runtime),
        None => Ok(Config::default()),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_checkpoint(path: &Path) -> anyhow::Result<PolicySource> {
    let c = Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(PolicySource::Checkpoint(Box::new(c)))
}

fn parse_scenario(s: &str) -> std::result::Result<ScenarioId, Failure> {
    s.parse().map_err(|e: guardian_core::Error| usage(e.to_string()))
}

/// Parses `A=path,B=path,…` into one path per scenario.
fn parse_ckpt_map(s: &str) -> std::result::Result<[PathBuf; N_SCENARIOS], Failure> {
    let mut slots: [Option<PathBuf>; N_SCENARIOS] = Default::default();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("expected SCENARIO=FILE, got `{part}`")))?;
        let id = parse_scenario(k)?;
        if slots[id.index()].replace(PathBuf::from(v)).is_some() {
            return Err(usage(format!("scenario {id} given twice")));
        }
    }
    let mut out: Vec<PathBuf> = Vec::with_capacity(N_SCENARIOS);
    for (id, slot) in ScenarioId::ALL.iter().zip(slots) {
        out.push(slot.ok_or_else(|| usage(format!("missing checkpoint for scenario {id}")))?);
    }
    Ok(out.try_into().unwrap())
}

fn load_four(paths: &[PathBuf; N_SCENARIOS]) -> anyhow::Result<[PolicySource; N_SCENARIOS]> {
    let v = paths
        .iter()
        .map(|p| load_checkpoint(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    v.try_into().map_err(|_| anyhow!("expected four checkpoints"))
}

fn train(a: TrainArgs) -> Outcome {
    let algo = match a.algo {
        TrainAlgo::Maddpg => Algo::Maddpg,
        TrainAlgo::Maupg => Algo::Maupg,
        TrainAlgo::Qlb => Algo::QlbEval,
    };
    let scenarios = parse_scenario_list(&a.scenarios).map_err(|e| usage(e.to_string()))?;
    if algo == Algo::Maddpg && scenarios.len() != 1 {
        return Err(usage(format!(
            "maddpg trains on exactly one scenario, got {}",
            scenarios.len()
        )));
    }
    let mut cfg = load_config(&a.common)?;
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(n) = a.episodes {
        cfg.train.episodes = n;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_file(&a.out.join("config.toml"), &cfg.to_toml_string()?)?;
    let metrics_path = a.out.join("metrics.csv");
    let file = fs::File::create(&metrics_path).with_context(|| format!("creating {}", metrics_path.display()))?;
    let mut metrics = BufWriter::new(file);
    let (_, saved) = train_run(algo, &scenarios, &cfg, Some(&a.out), &mut metrics)?;
    for p in saved {
        println!("{}", p.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let cfg = load_config(&a.common)?;
    let scenario = parse_scenario(&a.scenario)?;
    if a.episodes == 0 {
        return Err(usage("--episodes must be at least 1"));
    }
    let source = match (&a.ckpt, a.algo) {
        (Some(p), _) => load_checkpoint(p)?,
        (None, Some(Scripted::Qlb)) => PolicySource::Qlb,
        (None, Some(Scripted::Noop)) => PolicySource::Noop,
        (None, None) => return Err(usage("one of --ckpt or --algo is required")),
    };
    let summary = match &a.log {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(f);
            let s = evaluate(&source, scenario, a.episodes, a.seed, &cfg, Some(&mut w))?;
            w.flush().context("flushing trajectory log")?;
            s
        }
        None => evaluate(&source, scenario, a.episodes, a.seed, &cfg, None)?,
    };
    let text = match a.format {
        Format::Csv => summary.to_csv(),
        Format::Json => summary.to_json()? + "\n",
    };
    match &a.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "{} on {}: average residual threat {:.6} ± {:.6} over {} episodes",
        summary.policy, scenario, summary.mean_avg_residual_threat, summary.std_avg_residual_threat, a.episodes
    );
    Ok(())
}

fn matrix(a: MatrixArgs) -> Outcome {
    let cfg = load_config(&a.common)?;
    let paths = parse_ckpt_map(&a.ckpts)?;
    let sources = load_four(&paths)?;
    let m = confusion_matrix(&sources, a.episodes, a.seed, &cfg)?;
    write_file(&a.out.join("matrix.csv"), &m.to_csv())?;
    write_file(
        &a.out.join("matrix.svg"),
        &heatmap_svg(&m, "Average residual threat (rows: trained on, columns: tested on)"),
    )?;
    print!("{}", m.to_csv());
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Outcome {
    let cfg = load_config(&a.common)?;
    let paths = parse_ckpt_map(&a.maddpg)?;
    let per = load_four(&paths)?;
    let uni = load_checkpoint(&a.maupg)?;
    let rows = compare(&uni, &per, a.episodes, a.seed, &cfg)?;
    let csv = compare_to_csv(&rows);
    write_file(&a.out.join("compare.csv"), &csv)?;
    write_file(
        &a.out.join("compare.svg"),
        &grouped_bars_svg(&rows, "Average residual threat by method"),
    )?;
    print!("{csv}");
    Ok(())
}

fn replay(a: ReplayArgs) -> Outcome {
    let cfg = load_config(&a.common)?;
    let f = fs::File::open(&a.log).with_context(|| format!("opening {}", a.log.display()))?;
    let records = read_log(BufReader::new(f))?;
    if records.is_empty() {
        return Err(Failure::Runtime(anyhow!("{} holds no records", a.log.display())));
    }
    write_file(&a.out, &trajectory_svg(&records, cfg.sim.arena_half))?;
    for ep in episodes_from_log(&records, cfg.sim.dt)? {
        println!("{},{},{},{:.16e}", ep.scenario, ep.seed, ep.steps, ep.crt);
    }
    Ok(())
}

fn config(a: ConfigArgs) -> Outcome {
    let cfg = load_config(&a.common)?;
    if !a.dump {
        return Err(usage("nothing to do; pass --dump"));
    }
    print!("{}", cfg.to_toml_string()?);
    Ok(())
}
