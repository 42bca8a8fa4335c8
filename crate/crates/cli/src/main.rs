//! Command-line front end: instance generation and ingestion, LP benchmarks,
//! attenuation calibration, Monte Carlo simulation and sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use fairdispatch::experiment::{prepare, run_sweep, verify_hardness, warmup_bound_unit, write_plot_data, SweepConfig};
use fairdispatch::instance::{gen_hardness, gen_synthetic, ingest_trip_records, GeneratorParams, IngestOptions, Instance};
use fairdispatch::lp::{build_fairness_lp, build_profit_lp, solve, LpSolution};
use fairdispatch::policies::{build_policy, calibrate_attenuation, make_schedule, PolicyConfig, PolicyKind};
use fairdispatch::simulator::{monte_carlo_with, write_metrics_tsv, write_trial_log, McOptions, MetricsRow};

const PLOT_TEMPLATE: &str = include_str!("plot_template.py");

#[derive(Parser)]
#[command(name = "fairdispatch", version, about = "LP-based online matching for rideshare dispatch")]
struct Cli {
    /// Master seed for generators, calibration and simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// JSON file of default flag values, keyed by flag name.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic or hardness instance.
    Generate(GenerateArgs),
    /// Build an instance from a trip-record file.
    Ingest(IngestArgs),
    /// Solve the profit and fairness benchmark programs.
    Solve(SolveArgs),
    /// Calibrate AttenAlg's attenuation factors.
    Calibrate(CalibrateArgs),
    /// Simulate one policy.
    Simulate(SimulateArgs),
    /// Sweep policies over an alpha grid with beta = 1 - alpha.
    Sweep(SweepArgs),
    /// Check the ratio ceilings on the hardness family.
    VerifyHardness(HardnessArgs),
    /// Summarize a metrics table against the theoretical bounds.
    Report(ReportArgs),
}

#[derive(Args)]
struct GeneratorFlags {
    /// Capacity bound B; capacities are drawn from 1..=B.
    #[arg(long = "B")]
    capacity_bound: Option<u32>,
    /// Acceptance scaling: p = eta + (1 - eta) * base.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    drivers: Option<usize>,
    #[arg(long)]
    riders: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GeneratorFlags,
    /// Emit the n-unit hardness instance instead.
    #[arg(long)]
    hardness: bool,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    trips: PathBuf,
    #[command(flatten)]
    gen: GeneratorFlags,
    #[arg(long)]
    window_start: Option<String>,
    #[arg(long)]
    window_end: Option<String>,
    #[arg(long)]
    delimiter: Option<char>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
}

#[derive(Args)]
struct PolicyFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Monte Carlo samples per attenuation estimate.
    #[arg(long)]
    samples: Option<u32>,
}

#[derive(Args)]
struct CalibrateArgs {
    instance: PathBuf,
    #[command(flatten)]
    policy: PolicyFlags,
}

#[derive(Args)]
struct SimulateArgs {
    instance: PathBuf,
    #[arg(long)]
    policy: Option<String>,
    #[command(flatten)]
    params: PolicyFlags,
    #[arg(long)]
    n_trials: Option<u64>,
    /// Write every trial as line-delimited JSON here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    instance: PathBuf,
    /// Comma-separated policy names.
    #[arg(long)]
    policies: Option<String>,
    /// Comma-separated alpha grid.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    n_trials: Option<u64>,
    #[arg(long)]
    samples: Option<u32>,
    /// Value for the B column (defaults to the largest capacity).
    #[arg(long = "B")]
    capacity_bound: Option<u32>,
}

#[derive(Args)]
struct HardnessArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    n_trials: Option<u64>,
    #[arg(long)]
    samples: Option<u32>,
}

#[derive(Args)]
struct ReportArgs {
    metrics: PathBuf,
}

/// Errors that should exit with the usage status.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// Flag spelling for a library parameter name.
fn flag_for(param: &str) -> String {
    match param {
        "scale_eta" => "eta".into(),
        "capacity_bound" => "B".into(),
        "attenuation_samples" => "samples".into(),
        "num_driver_types" => "drivers".into(),
        "num_rider_types" => "riders".into(),
        "kind" => "policy".into(),
        other => other.replace('_', "-"),
    }
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    config: Map<String, Value>,
}

impl Ctx {
    /// Flag value, else the config file's value, else `None`.
    fn opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| usage(format!("config key `{key}`: {e}"))),
            None => Ok(None),
        }
    }

    fn get<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> anyhow::Result<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn create(&self, path: &Path) -> anyhow::Result<BufWriter<File>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        Ok(BufWriter::new(
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
        ))
    }

    fn generator(&self, flags: &GeneratorFlags) -> anyhow::Result<GeneratorParams> {
        let mut p = GeneratorParams {
            seed: self.seed,
            ..Default::default()
        };
        p.capacity_bound = self.get(flags.capacity_bound, "B", p.capacity_bound)?;
        p.scale_eta = self.get(flags.eta, "eta", p.scale_eta)?;
        p.num_driver_types = self.get(flags.drivers, "drivers", p.num_driver_types)?;
        p.num_rider_types = self.get(flags.riders, "riders", p.num_rider_types)?;
        p.validate()?;
        Ok(p)
    }

    fn policy(&self, kind: PolicyKind, flags: &PolicyFlags) -> anyhow::Result<PolicyConfig> {
        let mut pc = PolicyConfig::new(
            kind,
            self.get(flags.alpha, "alpha", 0.5)?,
            self.get(flags.beta, "beta", 0.5)?,
        );
        pc.attenuation_samples = self.get(flags.samples, "samples", pc.attenuation_samples)?;
        pc.seed = self.seed;
        pc.validate()?;
        Ok(pc)
    }
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let inst = Instance::load(path)?;
    inst.ensure_valid()?;
    Ok(inst)
}

fn summary(inst: &Instance) -> String {
    format!(
        "|U| = {}, |V| = {}, |E| = {}, T = {}",
        inst.drivers.len(),
        inst.riders.len(),
        inst.edges.len(),
        inst.horizon
    )
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| usage(format!("invalid value for --{flag}: `{s}`: {e}"))))
        .collect()
}

fn cmd_generate(ctx: &Ctx, args: &GenerateArgs) -> anyhow::Result<()> {
    let hardness = args.hardness || ctx.get(None, "hardness", false)?;
    let inst = if hardness {
        gen_hardness(ctx.get(args.n, "n", 5)?, ctx.get(args.eps, "eps", 0.1)?)?
    } else {
        gen_synthetic(&ctx.generator(&args.gen)?)?
    };
    let path = ctx.get(args.output.clone(), "output", ctx.out("instance.json"))?;
    ctx.create(&path)?.write_all(inst.to_json().as_bytes())?;
    println!("wrote {}: {}", path.display(), summary(&inst));
    Ok(())
}

fn cmd_ingest(ctx: &Ctx, args: &IngestArgs) -> anyhow::Result<()> {
    let params = ctx.generator(&args.gen)?;
    let defaults = IngestOptions::default();
    let options = IngestOptions {
        delimiter: ctx.get(args.delimiter, "delimiter", defaults.delimiter)?,
        window_start: ctx.get(args.window_start.clone(), "window-start", defaults.window_start)?,
        window_end: ctx.get(args.window_end.clone(), "window-end", defaults.window_end)?,
    };
    let (inst, report) = ingest_trip_records(&args.trips, &params, &options)?;
    let path = ctx.get(args.output.clone(), "output", ctx.out("instance.json"))?;
    ctx.create(&path)?.write_all(inst.to_json().as_bytes())?;
    println!(
        "read {} rows: {} malformed, {} outside window, {} outside box, {} kept",
        report.rows, report.malformed, report.outside_window, report.outside_box, report.kept
    );
    println!("wrote {}: {}", path.display(), summary(&inst));
    Ok(())
}

fn solution_json(sol: &LpSolution) -> String {
    serde_json::to_string_pretty(&sol.value_map()).expect("maps of floats serialize")
}

fn cmd_solve(ctx: &Ctx, args: &SolveArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let mut optima = Vec::new();
    for (name, model) in [("profit", build_profit_lp(&inst)?), ("fairness", build_fairness_lp(&inst)?)] {
        let sol = solve(&model)?;
        if !sol.is_optimal() {
            bail!("{name} program: solver status {:?}", sol.status);
        }
        ctx.create(&ctx.out(&format!("{name}.lp")))?.write_all(model.to_lp_text().as_bytes())?;
        ctx.create(&ctx.out(&format!("solution_{name}.json")))?.write_all(solution_json(&sol).as_bytes())?;
        optima.push(sol.objective_value);
    }
    println!("OPT-P = {:.6}", optima[0]);
    println!("OPT-F = {:.6}", optima[1]);
    Ok(())
}

fn cmd_calibrate(ctx: &Ctx, args: &CalibrateArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let pc = ctx.policy(PolicyKind::Attenalg, &args.policy)?;
    let prep = prepare(&inst, PolicyKind::Attenalg)?;
    let schedule = make_schedule(prep.topo.horizon)?;
    let table = calibrate_attenuation(&prep.topo, &prep.bench.x, &prep.bench.y, &pc, &schedule)?;
    let path = ctx.out("attenuation.tsv");
    table.write_tsv(&prep.topo, ctx.create(&path)?)?;
    serde_json::to_writer_pretty(ctx.create(&ctx.out("attenuation.json"))?, &table)?;
    println!(
        "wrote {}: T = {}, {} samples, max estimate stderr {:.4}",
        path.display(),
        table.horizon(),
        table.samples,
        table.max_stderr()
    );
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let kind: PolicyKind = ctx.get(args.policy.clone(), "policy", "warmup".to_string())?.parse()?;
    let pc = if kind.is_greedy() {
        PolicyConfig::new(kind, 0.0, 0.0)
    } else {
        ctx.policy(kind, &args.params)?
    };
    let n_trials = ctx.get(args.n_trials, "n-trials", 10_000)?;
    let log = ctx.opt(args.log.clone(), "log")?;
    let prep = prepare(&inst, kind)?;
    let policy = build_policy(&prep.topo, &pc, &prep.bench.x, &prep.bench.y)?;
    let opts = McOptions {
        groups: prep.groups.clone(),
        keep_records: log.is_some(),
        ..Default::default()
    };
    let metrics = monte_carlo_with(
        &prep.topo,
        policy.as_ref(),
        n_trials,
        ctx.seed,
        prep.bench.opt_profit(),
        prep.bench.opt_fairness(),
        &opts,
    )?;
    if let Some(path) = log {
        write_trial_log(&prep.topo, &metrics.records, ctx.create(&path)?)?;
    }
    let fmt = |r: Option<f64>| r.map_or("NA".to_string(), |x| format!("{x:.4}"));
    println!(
        "{kind}({}, {}): profit {:.4} ± {:.4} (ratio {}), fairness {:.4} ± {:.4} (ratio {})",
        pc.alpha,
        pc.beta,
        metrics.profit_mean,
        metrics.profit_stderr,
        fmt(metrics.profit_ratio),
        metrics.fairness,
        metrics.fairness_stderr,
        fmt(metrics.fairness_ratio)
    );
    let row = MetricsRow {
        policy: kind.to_string(),
        alpha: pc.alpha,
        beta: pc.beta,
        capacity_bound: inst.max_capacity(),
        seed: ctx.seed,
        metrics,
    };
    write_metrics_tsv(&[row], ctx.create(&ctx.out("metrics.tsv"))?)?;
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, args: &SweepArgs) -> anyhow::Result<()> {
    let inst = load_instance(&args.instance)?;
    let policies = ctx.get(args.policies.clone(), "policies", "warmup,greedy_p,greedy_f".to_string())?;
    let alphas = ctx.get(args.alphas.clone(), "alphas", "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1".to_string())?;
    let cfg = SweepConfig {
        policies: parse_list(&policies, "policies")?,
        alphas: parse_list(&alphas, "alphas")?,
        n_trials: ctx.get(args.n_trials, "n-trials", 1000)?,
        seed: ctx.seed,
        attenuation_samples: ctx.get(args.samples, "samples", 10_000)?,
        capacity_bound: ctx.get(args.capacity_bound, "B", inst.max_capacity())?,
    };
    if cfg.policies.is_empty() || cfg.alphas.is_empty() {
        return Err(usage("--policies and --alphas need at least one entry"));
    }
    let rows = run_sweep(&inst, &cfg)?;
    write_metrics_tsv(&rows, ctx.create(&ctx.out("metrics.tsv"))?)?;
    write_plot_data(&rows, ctx.create(&ctx.out("plot_data.tsv"))?)?;
    ctx.create(&ctx.out("plot_ratios.py"))?.write_all(PLOT_TEMPLATE.as_bytes())?;
    println!("{} rows written to {}", rows.len(), ctx.out_dir.display());
    Ok(())
}

fn cmd_verify_hardness(ctx: &Ctx, args: &HardnessArgs) -> anyhow::Result<bool> {
    let n = ctx.get(args.n, "n", 5)?;
    let eps = ctx.get(args.eps, "eps", 0.1)?;
    let n_trials = ctx.get(args.n_trials, "n-trials", 20_000)?;
    let samples = ctx.get(args.samples, "samples", 10_000)?;
    let mut policies = Vec::new();
    for (kind, a, b) in [
        (PolicyKind::Warmup, 1.0, 0.0),
        (PolicyKind::Warmup, 0.5, 0.5),
        (PolicyKind::Warmup, 0.0, 1.0),
        (PolicyKind::Attenalg, 0.5, 0.5),
        (PolicyKind::GreedyP, 0.0, 0.0),
        (PolicyKind::GreedyF, 0.0, 0.0),
    ] {
        let mut pc = PolicyConfig::new(kind, a, b);
        pc.attenuation_samples = samples;
        pc.seed = ctx.seed;
        policies.push(pc);
    }
    let report = verify_hardness(n, eps, &policies, n_trials, ctx.seed)?;
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!("OPT-P = {:.6} (expected {n}) {}", report.opt_profit, mark(report.opt_profit_ok));
    println!(
        "OPT-F = {:.6} (expected {:.6}) {}",
        report.opt_fairness,
        eps / (1.0 + eps),
        mark(report.opt_fairness_ok)
    );
    for c in &report.checks {
        println!(
            "{}({}, {}): profit {:.4} + fairness {:.4} = {:.4} (ceiling {:.4}) {}; profit ceiling {:.4} {}",
            c.policy,
            c.alpha,
            c.beta,
            c.profit_ratio,
            c.fairness_ratio,
            c.profit_ratio + c.fairness_ratio,
            1.0 + 2.0 * eps + 4.0 * c.sum_stderr,
            mark(c.sum_ok),
            1.0 - (-1.0f64).exp() + eps + 4.0 * c.profit_stderr,
            mark(c.profit_ok)
        );
    }
    serde_json::to_writer_pretty(ctx.create(&ctx.out("hardness.json"))?, &report)?;
    Ok(report.passed())
}

/// One parsed metrics row: the fields the report needs.
struct ReportRow {
    policy: String,
    alpha: f64,
    beta: f64,
    profit_ratio: Option<f64>,
    fairness_ratio: Option<f64>,
}

fn read_metrics(path: &Path) -> anyhow::Result<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("{} is empty", path.display()))?.split('\t').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| anyhow!("{} has no `{name}` column", path.display()))
    };
    let (ip, ia, ib, ir, jr) = (col("policy")?, col("alpha")?, col("beta")?, col("profit_ratio")?, col("fairness_ratio")?);
    let num = |s: &str| -> anyhow::Result<Option<f64>> {
        if s == "NA" {
            Ok(None)
        } else {
            Ok(Some(s.parse().with_context(|| format!("bad number `{s}`"))?))
        }
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                bail!("row has {} fields, header has {}", f.len(), header.len());
            }
            Ok(ReportRow {
                policy: f[ip].to_string(),
                alpha: f[ia].parse()?,
                beta: f[ib].parse()?,
                profit_ratio: num(f[ir])?,
                fairness_ratio: num(f[jr])?,
            })
        })
        .collect()
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let rows = read_metrics(&args.metrics)?;
    let c = warmup_bound_unit();
    let cell = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    println!("{:<10} {:>6} {:>6} {:>12} {:>12} {:>14} {:>14}", "policy", "alpha", "beta", "profit_ratio", "fair_ratio", "profit_bound", "fair_bound");
    for r in &rows {
        let bounds = match r.policy.as_str() {
            "warmup" => Some((r.alpha * c, r.beta * c)),
            "attenalg" => Some((0.46 * r.alpha, 0.46 * r.beta)),
            _ => None,
        };
        println!(
            "{:<10} {:>6.2} {:>6.2} {:>12} {:>12} {:>14} {:>14}",
            r.policy,
            r.alpha,
            r.beta,
            cell(r.profit_ratio),
            cell(r.fairness_ratio),
            cell(bounds.map(|b| b.0)),
            cell(bounds.map(|b| b.1))
        );
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => return Err(usage(format!("{} must hold a JSON object", path.display()))),
                Err(e) => return Err(usage(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let mut ctx = Ctx {
        seed: 0,
        out_dir: PathBuf::from("."),
        config,
    };
    ctx.seed = ctx.get(cli.seed, "seed", 0)?;
    ctx.out_dir = ctx.get(cli.out_dir.clone(), "out-dir", PathBuf::from("."))?;
    let jobs = ctx.get(cli.jobs, "jobs", 1)?;
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;

    match &cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a)?,
        Command::Ingest(a) => cmd_ingest(&ctx, a)?,
        Command::Solve(a) => cmd_solve(&ctx, a)?,
        Command::Calibrate(a) => cmd_calibrate(&ctx, a)?,
        Command::Simulate(a) => cmd_simulate(&ctx, a)?,
        Command::Sweep(a) => cmd_sweep(&ctx, a)?,
        Command::VerifyHardness(a) => return cmd_verify_hardness(&ctx, a),
        Command::Report(a) => cmd_report(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: hardness checks failed");
            ExitCode::from(1)
        }
        Err(err) => {
            use fairdispatch::Error;
            let status = match err.downcast_ref::<Error>() {
                Some(Error::InvalidParameter { name, reason }) => {
                    eprintln!("error: invalid value for --{}: {reason}", flag_for(name));
                    return ExitCode::from(2);
                }
                Some(Error::InvalidInstance(_)) => 2,
                _ if err.is::<Usage>() => 2,
                _ => 1,
            };
            eprintln!("error: {err:#}");
            ExitCode::from(status)
        }
    }
}
