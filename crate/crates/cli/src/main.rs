//! `thoughtgap`: theory checks on two-premise SCMs, benchmark building,
//! prompt-intervention runs and reports.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thoughtgap::bench::{
    build_winocontrol, gen_alice_with, load_bbq, load_generic, load_winobias, pilot_sample,
    read_items, sample_pairs, write_items, AliceOptions, BenchItem, Task,
};
use thoughtgap::eval::{
    read_run, run_batch, write_run, ChatBackend, ClientConfig, HttpBackend, MockBackend,
    ResponseCache, RunManifest,
};
use thoughtgap::gap::{
    demo_bias, l_explicitness_score, q_explicitness_score, run_fixture_trial, run_random_trials,
    trials_table, write_trials_csv, TrialConfig, TrialOutcome, TrialStatus, TrialSummary,
};
use thoughtgap::metrics::{build_report, ReportRun};
use thoughtgap::prompt::{InterventionKind, RenderOptions};
use thoughtgap::scm::{enumerate_joint, RandomConfig, ScmFile, DEFAULT_BUDGET};

#[derive(Parser, Debug)]
#[command(
    name = "thoughtgap",
    version,
    about = "Gap verification on thought SCMs and prompt-intervention evaluation"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Output file (directory for `report`); standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact computations on two-premise SCMs.
    #[command(subcommand)]
    Scm(ScmCommand),
    /// Build benchmark files.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Run an intervention over a benchmark file.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Tables and CSV files from run files.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
enum ScmCommand {
    /// Check the KL lower bound and the exact identities behind it.
    VerifyTheorem(VerifyArgs),
    /// Compare the shortcut distribution, the premise-first posterior and a fitted predictor.
    DemoBias(DemoArgs),
    /// L- and q-explicitness scores of one token.
    Explicitness(ExplicitnessArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Random SCMs to check, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Largest variable cardinality in random SCMs.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    max_card: u64,
    /// Largest token pool per variable in random SCMs.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    max_alphabet: u64,
    /// Check one SCM file (with a `query` block) instead of random SCMs.
    #[arg(long)]
    scm: Option<PathBuf>,
    /// Cap on joint-table cells.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Print a per-trial table in bits.
    #[arg(long)]
    table: bool,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// SCM file presented conclusion-first.
    #[arg(long)]
    scm: PathBuf,
    /// Sampled sequences for the fitted predictor.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Additive smoothing for the fitted predictor.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct ExplicitnessArgs {
    #[arg(long)]
    scm: PathBuf,
    /// Variable name or index.
    #[arg(long)]
    var: String,
    /// Value index of the variable.
    #[arg(long)]
    value: usize,
    /// Token that verbalizes the variable.
    #[arg(long)]
    token: String,
    /// Comma-separated tokens directly before the token.
    #[arg(long, value_delimiter = ',')]
    prefix: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Write a benchmark as BenchItem JSONL.
    Build(BuildArgs),
    /// Uniform subsample of a BenchItem file.
    Pilot(PilotArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BenchKind {
    Alice,
    Winobias,
    Winocontrol,
    Bbq,
    Generic,
}

#[derive(Args, Debug)]
struct BuildArgs {
    kind: BenchKind,
    /// Source file (WinoBias JSONL, BBQ JSONL or generic JSONL).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Alice: write "1 brother" and "1 sister" instead of the verbatim template.
    #[arg(long)]
    normalize_singular: bool,
    /// WinoBias: keep type-2 sentences too.
    #[arg(long)]
    all_types: bool,
    /// WinoControl L level; all nine cells when neither level is given.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    l: Option<u8>,
    /// WinoControl q level.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    q: Option<u8>,
    /// WinoControl: pairs per cell; all pairs when omitted.
    #[arg(long)]
    pairs: Option<usize>,
    /// BBQ categories, comma-separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    bias_types: Vec<String>,
}

#[derive(Args, Debug)]
struct PilotArgs {
    /// BenchItem JSONL.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 200)]
    n: usize,
}

#[derive(Subcommand, Debug)]
enum EvalCommand {
    /// Render, send, parse and record every item.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// BenchItem JSONL.
    #[arg(long)]
    items: PathBuf,
    /// Intervention slug: direct, cot, rar, rar_cot, ltm, echo, expand, lot1, lot2, lot_appendix.
    #[arg(long, default_value = "cot", value_parser = parse_kind)]
    kind: InterventionKind,
    /// Scripted mock endpoint instead of HTTP.
    #[arg(long, conflicts_with = "base_url")]
    mock: Option<PathBuf>,
    /// Chat-completions base URL.
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, default_value = "gpt-4o-mini")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 1024)]
    max_tokens: u32,
    #[arg(long, default_value_t = 60_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    /// First retry delay; doubles on each retry.
    #[arg(long, default_value_t = 500)]
    backoff_ms: u64,
    /// Response cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = "MODEL_API_KEY")]
    api_key_env: String,
    /// Echo/Expand: prefix the instruction with "Think step by step."
    #[arg(long)]
    think_prefix: bool,
    /// Append the step-by-step suffix where the intervention accepts it.
    #[arg(long)]
    cot_suffix: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Task layout of the tables.
    #[arg(long, value_parser = parse_task)]
    task: Task,
    /// BenchItem JSONL the runs were made on.
    #[arg(long)]
    items: PathBuf,
    /// Run files written by `eval run`.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Run file used as the reference for improvement and token-cost output.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<InterventionKind, String> {
    s.parse()
        .map_err(|e: thoughtgap::prompt::PromptError| e.to_string())
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

enum Outcome {
    Ok,
    VerificationFailed,
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn need_input(input: &Option<PathBuf>, kind: &str) -> Result<PathBuf> {
    input
        .clone()
        .with_context(|| format!("bench build {kind} needs --input"))
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<Outcome> {
    let outcomes: Vec<TrialOutcome> = match &a.scm {
        Some(path) => {
            let loaded = ScmFile::load(path)?;
            vec![run_fixture_trial(&loaded, a.budget)]
        }
        None => {
            let cfg = TrialConfig {
                random: RandomConfig {
                    max_card: a.max_card as usize,
                    max_alphabet: a.max_alphabet as usize,
                    ..RandomConfig::default()
                },
                budget: a.budget,
            };
            run_random_trials(cli.seed, a.trials as usize, cfg)
        }
    };
    let summary = TrialSummary::of(&outcomes);
    if cli.out.is_some() || !a.table {
        let mut out = sink(cli.out.as_deref())?;
        write_trials_csv(&mut out, &outcomes)?;
        out.flush()?;
    }
    if a.table {
        print!("{}", trials_table(&outcomes));
    }
    for o in outcomes.iter().filter(|o| o.status == TrialStatus::Skip) {
        eprintln!(
            "seed {}: skipped: {}",
            o.seed,
            o.reason.as_deref().unwrap_or("no reason")
        );
    }
    eprintln!(
        "{} trials: {} pass, {} skip, {} fail; min slack {}",
        outcomes.len(),
        summary.pass,
        summary.skip,
        summary.fail,
        summary
            .min_slack
            .map_or("n/a".into(), |s| format!("{s:.3e}"))
    );
    match outcomes.iter().find(|o| o.status == TrialStatus::Fail) {
        Some(o) => {
            eprintln!(
                "first failing seed {}: {}",
                o.seed,
                o.reason.as_deref().unwrap_or("failed")
            );
            Ok(Outcome::VerificationFailed)
        }
        None => Ok(Outcome::Ok),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.4}"))
}

fn demo(cli: &Cli, a: &DemoArgs) -> Result<Outcome> {
    let loaded = ScmFile::load(&a.scm)?;
    let d = demo_bias(&loaded, a.samples, cli.seed, a.alpha)?;
    println!("{} samples, smoothing {}", d.samples, d.alpha);
    println!(
        "{:<12} {:>8}  {:<32} {:>14}",
        "l1", "Pr(l1)", "shortcut Pr(A | l1)", "TV(ntp, short)"
    );
    for r in &d.rows {
        let probs: Vec<String> = r
            .shortcut
            .labels()
            .iter()
            .zip(r.shortcut.probs())
            .map(|(l, p)| format!("{l}={p:.4}"))
            .collect();
        println!(
            "{:<12} {:>8.4}  {:<32} {:>14}",
            r.l1,
            r.pr_l1,
            probs.join(" "),
            fmt_opt(r.tv_ntp_shortcut)
        );
    }
    println!();
    println!(
        "{:<12} {:<12} {:>8} {:>12} {:>14}",
        "l1", "l2", "Pr", "V(short, top)", "TV(ntp, top)"
    );
    for p in &d.pairs {
        println!(
            "{:<12} {:<12} {:>8.4} {:>12.4} {:>14}",
            p.l1,
            p.l2,
            p.pr,
            p.v_shortcut_topological,
            fmt_opt(p.tv_ntp_topological)
        );
    }
    println!();
    println!(
        "mean V(shortcut, topological)   {:.6}",
        d.mean_v_shortcut_topological
    );
    println!(
        "max TV(ntp, shortcut)           {:.6}",
        d.max_tv_ntp_shortcut
    );
    println!(
        "mean TV(ntp, shortcut)          {:.6}",
        d.mean_tv_ntp_shortcut
    );
    println!(
        "mean TV(ntp, topological)       {:.6}",
        d.mean_tv_ntp_topological
    );
    if let Some(path) = &cli.out {
        let mut out = sink(Some(path))?;
        serde_json::to_writer_pretty(&mut out, &d)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(Outcome::Ok)
}

fn explicitness(a: &ExplicitnessArgs) -> Result<Outcome> {
    let loaded = ScmFile::load(&a.scm)?;
    let var = loaded
        .scm
        .variables()
        .iter()
        .position(|v| v.name == a.var)
        .or_else(|| {
            a.var
                .parse()
                .ok()
                .filter(|&i| i < loaded.scm.variables().len())
        })
        .with_context(|| format!("unknown variable `{}`", a.var))?;
    let joint = enumerate_joint(&loaded.scm, &loaded.scheme)?;
    let l = l_explicitness_score(&joint, var, a.value, &a.token)?;
    let prefix: Vec<&str> = a.prefix.iter().map(String::as_str).collect();
    let q = q_explicitness_score(&joint, var, a.value, &prefix, &a.token)?;
    println!("L-explicitness {l:.6}");
    println!("q-explicitness {q:.6}");
    Ok(Outcome::Ok)
}

fn build(cli: &Cli, a: &BuildArgs) -> Result<Outcome> {
    let items: Vec<BenchItem> = match a.kind {
        BenchKind::Alice => gen_alice_with(AliceOptions {
            normalize_singular: a.normalize_singular,
        }),
        BenchKind::Winobias => load_winobias(&need_input(&a.input, "winobias")?, !a.all_types)?
            .iter()
            .map(|w| w.to_bench_item())
            .collect(),
        BenchKind::Winocontrol => {
            let base = load_winobias(&need_input(&a.input, "winocontrol")?, true)?;
            let base = match a.pairs {
                Some(n) => sample_pairs(&base, n, cli.seed)?,
                None => base,
            };
            let cells: Vec<(u8, u8)> = match (a.l, a.q) {
                (Some(l), Some(q)) => vec![(l, q)],
                (None, None) => (0..3).flat_map(|l| (0..3).map(move |q| (l, q))).collect(),
                _ => bail!("give both --l and --q, or neither for the full grid"),
            };
            let mut items = Vec::new();
            for (l, q) in cells {
                items.extend(
                    build_winocontrol(&base, l, q, cli.seed)?
                        .iter()
                        .map(|c| c.to_bench_item()),
                );
            }
            items
        }
        BenchKind::Bbq => load_bbq(&need_input(&a.input, "bbq")?, &a.bias_types)?,
        BenchKind::Generic => load_generic(&need_input(&a.input, "generic")?)?,
    };
    let mut out = sink(cli.out.as_deref())?;
    write_items(&mut out, &items)?;
    out.flush()?;
    eprintln!("{} items", items.len());
    Ok(Outcome::Ok)
}

fn pilot(cli: &Cli, a: &PilotArgs) -> Result<Outcome> {
    let items = read_items(&a.input)?;
    let picked = pilot_sample(&items, a.n, cli.seed)?;
    let mut out = sink(cli.out.as_deref())?;
    write_items(&mut out, &picked)?;
    out.flush()?;
    Ok(Outcome::Ok)
}

fn eval_run(cli: &Cli, a: &RunArgs) -> Result<Outcome> {
    let items = read_items(&a.items)?;
    let mut config = ClientConfig {
        model: a.model.clone(),
        temperature: a.temperature,
        max_tokens: a.max_tokens,
        timeout_ms: a.timeout_ms,
        max_retries: a.max_retries,
        max_in_flight: a.max_in_flight,
        cache_dir: a.cache_dir.clone(),
        api_key_env: a.api_key_env.clone(),
        backoff_base_ms: a.backoff_ms,
        ..ClientConfig::default()
    };
    let mock = match &a.mock {
        Some(path) => {
            config.base_url = format!("mock:{}", path.display());
            Some(MockBackend::from_file(path)?)
        }
        None => {
            if let Some(url) = &a.base_url {
                config.base_url = url.clone();
            }
            None
        }
    };
    config.validate()?;
    let http;
    let backend: &dyn ChatBackend = match &mock {
        Some(m) => m,
        None => {
            http = HttpBackend::new(&config)?;
            &http
        }
    };
    let cache = config
        .cache_dir
        .as_ref()
        .map(ResponseCache::open)
        .transpose()?;
    let opts = RenderOptions {
        think_prefix: a.think_prefix,
        cot_suffix: a.cot_suffix,
        format: None,
    };
    let records = run_batch(&items, a.kind, opts, &config, backend, cache.as_ref())?;
    let manifest = RunManifest::new(&items, a.kind, opts, &config);
    let mut out = sink(cli.out.as_deref())?;
    write_run(&mut out, &manifest, &records)?;
    out.flush()?;
    let failed = records.iter().filter(|r| r.answer.is_none()).count();
    let hits = records.iter().filter(|r| r.cache_hit).count();
    eprintln!(
        "{} records, {failed} without an answer, {hits} from cache",
        records.len()
    );
    if let Some(m) = &mock {
        eprintln!("backend calls: {}", m.calls());
    }
    Ok(Outcome::Ok)
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<Outcome> {
    let items = read_items(&a.items)?;
    let load = |p: &PathBuf| -> Result<ReportRun> {
        let run = read_run(p)?;
        Ok(ReportRun {
            source: p.display().to_string(),
            manifest: run.manifest,
            records: run.records,
        })
    };
    let runs = a.runs.iter().map(load).collect::<Result<Vec<_>>>()?;
    let baseline = a.baseline.as_ref().map(load).transpose()?;
    let report = build_report(a.task, &items, &runs, baseline.as_ref())?;
    print!("{}", report.markdown);
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (name, body) in &report.files {
            let path = dir.join(name);
            std::fs::write(&path, body)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    Ok(Outcome::Ok)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Scm(ScmCommand::VerifyTheorem(a)) => verify(cli, a),
        Command::Scm(ScmCommand::DemoBias(a)) => demo(cli, a),
        Command::Scm(ScmCommand::Explicitness(a)) => explicitness(a),
        Command::Bench(BenchCommand::Build(a)) => build(cli, a),
        Command::Bench(BenchCommand::Pilot(a)) => pilot(cli, a),
        Command::Eval(EvalCommand::Run(a)) => eval_run(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = if cli.verbose { "debug" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| filter.into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
