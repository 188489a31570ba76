use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use threshold_lab::campaign::{run_campaign, write_csv, CampaignConfig};
use threshold_lab::claims::claim_certificates;
use threshold_lab::cover::{
    build_cover, default_covering_constant, verify_covering_exhaustive, verify_covering_sampled, EXHAUSTIVE_LIMIT,
};
use threshold_lab::hypergeom::{cov_lemma_sweep, tail_lemma_sweep};
use threshold_lab::hypergraph::{sample_hnm, sample_hnq, Hypergraph};
use threshold_lab::seed::SeedSpec;
use threshold_lab::thresholds::{talagrand_ratio, MonotoneFamily};
use threshold_lab::weights::{weight_cover, WeightMode};
use threshold_lab::Error;

const WORKERS_ENV: &str = "THRESHOLD_LAB_WORKERS";
const LEMMA_GRID_MAX: u64 = 30;

#[derive(Parser)]
#[command(
    name = "threshold-lab",
    version,
    about = "Random hypergraph covers and expectation thresholds"
)]
struct Cli {
    /// Master seed for every random step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of standard output
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random k-uniform hypergraph
    Sample(SampleArgs),
    /// Check that the cover's upset contains the upset of g
    Verify(VerifyArgs),
    /// Weight of the cover at p/L, split by part
    Weights(WeightArgs),
    /// Evaluate every bound certificate for one parameter tuple
    Claims(ClaimArgs),
    /// Exact sweeps of the hypergeometric tail and covariance bounds
    Lemmas(LemmaArgs),
    /// Expectation and fractional expectation thresholds of a family
    Thresholds(ThresholdArgs),
    /// Run a seeded campaign and write one CSV row per sample
    Campaign(CampaignArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Gnm,
    Gnq,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long, value_enum, default_value_t = Model::Gnm)]
    model: Model,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args)]
struct CoverInput {
    /// Hypergraph JSON file, `-` for standard input
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long)]
    r: u32,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    cover: CoverInput,
    #[arg(long, value_enum, default_value_t = VerifyMode::Auto)]
    mode: VerifyMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliWeightMode {
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Args)]
struct WeightArgs {
    #[command(flatten)]
    cover: CoverInput,
    #[arg(long, value_enum, default_value_t = CliWeightMode::Auto)]
    mode: CliWeightMode,
}

#[derive(Args)]
struct ClaimArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    r: u32,
    #[arg(long = "L")]
    l: Option<f64>,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long, default_value_t = 10)]
    grid_max: u64,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Family JSON file, `-` for standard input
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct CampaignArgs {
    /// Flat JSON config; the flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u32>>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    m_rule: Option<String>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    seeds_per_cell: Option<u64>,
    #[arg(long)]
    trials_mc: Option<u64>,
    #[arg(long)]
    record_timing: bool,
    /// Write the summary JSON here (default: standard error)
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// A finished command: its output text and whether its check passed.
struct Outcome {
    text: String,
    ok: bool,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8"))
}

fn read_input(path: &str) -> Result<String, Error> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(fs::read_to_string(path)?)
    }
}

fn covering_constant(l: Option<f64>) -> Result<f64, Error> {
    let l = l.unwrap_or_else(default_covering_constant);
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::Validation(format!("--L {l} must be positive")));
    }
    Ok(l)
}

fn cmd_sample(a: &SampleArgs, seed: SeedSpec, format: Format) -> Result<Outcome, Error> {
    let h = match a.model {
        Model::Gnm => {
            let m = a.m.ok_or_else(|| Error::Validation("--model gnm needs --m".into()))?;
            sample_hnm(a.n, a.k, m, &seed)?
        }
        Model::Gnq => {
            let q = a.q.ok_or_else(|| Error::Validation("--model gnq needs --q".into()))?;
            sample_hnq(a.n, a.k, q, &seed)?
        }
    };
    let text = match format {
        Format::Json => {
            let mut s = h.to_json();
            s.push('\n');
            s
        }
        Format::Csv => h
            .edges()
            .iter()
            .map(|e| e.to_vec().iter().map(u32::to_string).collect::<Vec<_>>().join(",") + "\n")
            .collect(),
    };
    Ok(Outcome { text, ok: true })
}

fn load_hypergraph(path: &str) -> Result<Hypergraph, Error> {
    Hypergraph::from_json(&read_input(path)?)
}

fn cmd_verify(a: &VerifyArgs, seed: SeedSpec) -> Result<Outcome, Error> {
    let h = load_hypergraph(&a.cover.input)?;
    let l = covering_constant(a.cover.l)?;
    let exhaustive = match a.mode {
        VerifyMode::Auto => h.n() <= EXHAUSTIVE_LIMIT,
        VerifyMode::Exhaustive => true,
        VerifyMode::Sampled => false,
    };
    let report = if exhaustive {
        verify_covering_exhaustive(&h, a.cover.r, l)?
    } else {
        verify_covering_sampled(&h, a.cover.r, l, a.cover.trials, &seed)?
    };
    Ok(Outcome {
        ok: report.passes(),
        text: json(&report),
    })
}

#[derive(Serialize)]
struct PartRow<'a> {
    part: &'a str,
    j: Option<u32>,
    value: f64,
    ci_low: f64,
    ci_high: f64,
    kind: threshold_lab::weights::WeightKind,
    target: f64,
}

fn cmd_weights(a: &WeightArgs, seed: SeedSpec, format: Format) -> Result<Outcome, Error> {
    let h = load_hypergraph(&a.cover.input)?;
    let l = covering_constant(a.cover.l)?;
    let cover = build_cover(&h, a.cover.r, l)?;
    let mode = match a.mode {
        CliWeightMode::Auto => WeightMode::Auto,
        CliWeightMode::Exact => WeightMode::Exact,
        CliWeightMode::MonteCarlo => WeightMode::MonteCarlo,
    };
    let w = weight_cover(&h, a.cover.r, &cover, mode, a.cover.trials, &seed)?;
    let text = match format {
        Format::Json => json(&w),
        Format::Csv => {
            let rows: Vec<PartRow> = w
                .parts
                .iter()
                .map(|p| PartRow {
                    part: &p.part,
                    j: p.j,
                    value: p.estimate.value,
                    ci_low: p.estimate.ci_low,
                    ci_high: p.estimate.ci_high,
                    kind: p.estimate.kind,
                    target: p.target,
                })
                .collect();
            csv_rows(&rows)?
        }
    };
    Ok(Outcome { text, ok: true })
}

fn cmd_claims(a: &ClaimArgs, format: Format) -> Result<Outcome, Error> {
    let l = covering_constant(a.l)?;
    let report = claim_certificates(a.n, a.k, a.m, a.r, l)?;
    let text = match format {
        Format::Json => json(&report),
        Format::Csv => csv_rows(&report.certificates)?,
    };
    Ok(Outcome {
        ok: report.passes(),
        text,
    })
}

#[derive(Serialize)]
struct LemmaReport {
    grid_max: u64,
    tail: threshold_lab::hypergeom::LemmaSweep,
    covariance: threshold_lab::hypergeom::LemmaSweep,
}

fn cmd_lemmas(a: &LemmaArgs) -> Result<Outcome, Error> {
    if a.grid_max > LEMMA_GRID_MAX {
        return Err(Error::Validation(format!(
            "--grid-max must be at most {LEMMA_GRID_MAX}"
        )));
    }
    let (tail, covariance) = rayon::join(|| tail_lemma_sweep(a.grid_max), || cov_lemma_sweep(a.grid_max));
    let report = LemmaReport {
        grid_max: a.grid_max,
        tail,
        covariance,
    };
    Ok(Outcome {
        ok: report.tail.passes() && report.covariance.passes(),
        text: json(&report),
    })
}

fn cmd_thresholds(a: &ThresholdArgs) -> Result<Outcome, Error> {
    let family = MonotoneFamily::from_json(&read_input(&a.input)?)?;
    let report = talagrand_ratio(&family, a.tol)?;
    Ok(Outcome {
        ok: true,
        text: json(&report),
    })
}

fn campaign_config(a: &CampaignArgs, seed: Option<u64>) -> Result<CampaignConfig, Error> {
    let mut base: serde_json::Map<String, serde_json::Value> = match &a.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => serde_json::Map::new(),
    };
    let mut set = |key: &str, v: serde_json::Value| {
        base.insert(key.to_string(), v);
    };
    if let Some(v) = &a.n_grid {
        set("n_grid", v.clone().into());
    }
    if let Some(v) = a.k {
        set("k", v.into());
    }
    if let Some(v) = a.r {
        set("r", v.into());
    }
    if let Some(v) = &a.m_rule {
        set("m_rule", v.clone().into());
    }
    if let Some(v) = a.l {
        set("L", v.into());
    }
    if let Some(v) = a.seeds_per_cell {
        set("seeds_per_cell", v.into());
    }
    if let Some(v) = a.trials_mc {
        set("trials_mc", v.into());
    }
    if a.record_timing {
        set("record_timing", true.into());
    }
    if let Some(v) = seed {
        set("master_seed", v.into());
    }
    let cfg: CampaignConfig = serde_json::from_value(serde_json::Value::Object(base))
        .map_err(|e| Error::Validation(format!("campaign config: {e}")))?;
    Ok(cfg)
}

fn cmd_campaign(a: &CampaignArgs, seed: Option<u64>, output: &mut Option<PathBuf>) -> Result<Outcome, Error> {
    let cfg = campaign_config(a, seed)?;
    if output.is_none() {
        *output = cfg.output_path.clone().map(PathBuf::from);
    }
    let outcome = run_campaign(&cfg)?;
    let mut buf = Vec::new();
    write_csv(&outcome.rows, &mut buf)?;
    let summary = json(&outcome.summary);
    match &a.summary {
        Some(path) => fs::write(path, &summary)?,
        None => eprint!("{summary}"),
    }
    Ok(Outcome {
        ok: outcome.summary.passes(),
        text: String::from_utf8(buf).expect("utf-8"),
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capacity(_) | Error::Budget { .. } | Error::Precondition(_) => 3,
        _ => 2,
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Validation(format!("{WORKERS_ENV}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(e.to_string()))
}

fn run(cli: Cli, seed_given: bool) -> Result<(Outcome, Option<PathBuf>), Error> {
    configure_workers()?;
    let seed = SeedSpec::new(cli.seed, 0);
    let mut output = cli.output;
    let outcome = match &cli.command {
        Command::Sample(a) => cmd_sample(a, seed, cli.format)?,
        Command::Verify(a) => cmd_verify(a, seed)?,
        Command::Weights(a) => cmd_weights(a, seed, cli.format)?,
        Command::Claims(a) => cmd_claims(a, cli.format)?,
        Command::Lemmas(a) => cmd_lemmas(a)?,
        Command::Thresholds(a) => cmd_thresholds(a)?,
        Command::Campaign(a) => cmd_campaign(a, seed_given.then_some(cli.seed), &mut output)?,
    };
    Ok((outcome, output))
}

fn main() -> ExitCode {
    let seed_given = std::env::args().any(|a| a == "--seed" || a.starts_with("--seed="));
    let cli = Cli::parse();
    match run(cli, seed_given) {
        Ok((outcome, output)) => {
            let written = match output {
                Some(path) => fs::write(path, &outcome.text),
                None => io::stdout().write_all(outcome.text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
