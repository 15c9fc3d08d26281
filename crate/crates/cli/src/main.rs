use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use addmeta::binary_recon::recombine;
use addmeta::effect_model::{crude_effect_with, CrudeScale, StudySummary};
use addmeta::io::{self as aio, SimProvenance};
use addmeta::mc_harness::{full_grid, run_scenario, Scenario, SummarySource, Truncation};
use addmeta::meta_re::pool_random_effects;
use addmeta::parallel::{with_workers, WORKERS_ENV};
use addmeta::sim_estimator::{sim_effect, SimConfig, DEFAULT_ITERATIONS, DEFAULT_SEED};

#[derive(Parser)]
#[command(
    name = "addmeta",
    version,
    about = "Additive-model meta-analysis from reported genotype-group summaries"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Clone)]
struct Common {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = WORKERS_ENV, default_value_t = 0)]
    workers: usize,
    /// Significant digits for floats in output files.
    #[arg(long, global = true, default_value_t = aio::DEFAULT_PRECISION)]
    precision: usize,
    /// Output file (stdout when omitted). The run manifest goes to
    /// `<output>.manifest.json`, or to stderr when writing to stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-study additive effect sizes from a summary CSV (or .json).
    Effect(EffectArgs),
    /// Random-effects pooling of an effects CSV.
    Meta(MetaArgs),
    /// Monte Carlo bias study for one scenario or the full grid.
    Mc(McArgs),
    /// Combined odds ratio from AB-vs-AA and BB-vs-AB odds ratios.
    Or(OrArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Crude,
    Sim,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CrudeSdArg {
    /// Average of the two adjacent-pair pooled SDs.
    Pairwise,
    /// Within-group SD pooled over all three groups.
    Pooled,
}

impl From<CrudeSdArg> for CrudeScale {
    fn from(a: CrudeSdArg) -> Self {
        match a {
            CrudeSdArg::Pairwise => CrudeScale::PairwiseAverage,
            CrudeSdArg::Pooled => CrudeScale::PooledWithin,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TruncationArg {
    FirstAnchor,
    PerGroup,
}

impl From<TruncationArg> for Truncation {
    fn from(a: TruncationArg) -> Self {
        match a {
            TruncationArg::FirstAnchor => Truncation::FirstAnchor,
            TruncationArg::PerGroup => Truncation::PerGroup,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SummarySourceArg {
    Generating,
    Sample,
}

impl From<SummarySourceArg> for SummarySource {
    fn from(a: SummarySourceArg) -> Self {
        match a {
            SummarySourceArg::Generating => SummarySource::Generating,
            SummarySourceArg::Sample => SummarySource::Sample,
        }
    }
}

#[derive(Args)]
struct EffectArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Crude)]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// SD used to standardize the crude slope.
    #[arg(long, value_enum, default_value_t = CrudeSdArg::Pairwise)]
    crude_sd: CrudeSdArg,
}

#[derive(Args)]
struct MetaArgs {
    input: PathBuf,
}

#[derive(Args)]
struct McArgs {
    /// Scenario file (.toml or .json). Not needed with --full-grid.
    scenario: Option<PathBuf>,
    #[arg(long)]
    full_grid: bool,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    inner_iterations: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    truncation: Option<TruncationArg>,
    #[arg(long, value_enum)]
    summary_source: Option<SummarySourceArg>,
    #[arg(long, value_enum)]
    crude_sd: Option<CrudeSdArg>,
}

#[derive(Args)]
struct OrArgs {
    input: PathBuf,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'static str,
    version: &'static str,
    input_path: Option<&'a Path>,
    output_path: Option<&'a Path>,
    seed: Option<u64>,
    iterations: Option<u32>,
    replicates: Option<u32>,
    options: serde_json::Value,
    workers: usize,
    precision: usize,
    timestamp_unix: u64,
}

impl<'a> RunManifest<'a> {
    fn new(command: &'static str, common: &'a Common, input_path: Option<&'a Path>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            input_path,
            output_path: common.output.as_deref(),
            seed: None,
            iterations: None,
            replicates: None,
            options: serde_json::Value::Null,
            workers: common.workers,
            precision: common.precision,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn emit(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match self.output_path {
            Some(out) => {
                let mut path = out.as_os_str().to_owned();
                path.push(".manifest.json");
                fs::write(&path, text + "\n").with_context(|| {
                    format!("writing manifest {}", PathBuf::from(path).display())
                })?;
            }
            None => eprintln!("{text}"),
        }
        Ok(())
    }
}

/// Buffer the whole result so a failure never leaves a partial output file.
fn write_output(common: &Common, body: &[u8]) -> Result<()> {
    match &common.output {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            w.write_all(body)?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(body)?,
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_summaries(path: &Path) -> Result<Vec<StudySummary>> {
    let text = read_text(path)?;
    let studies = if is_json(path) {
        aio::read_summaries_json(&text)
    } else {
        aio::read_summaries(text.as_bytes())
    }
    .with_context(|| format!("parsing {}", path.display()))?;
    if studies.is_empty() {
        bail!("no studies in {}", path.display());
    }
    Ok(studies)
}

fn cmd_effect(common: &Common, args: &EffectArgs) -> Result<()> {
    let studies = load_summaries(&args.input)?;
    let mut manifest = RunManifest::new("effect", common, Some(&args.input));
    let mut body = Vec::new();
    match args.method {
        MethodArg::Crude => {
            let scale = args.crude_sd.into();
            let effects = studies
                .iter()
                .map(|s| {
                    crude_effect_with(s, scale).with_context(|| format!("study '{}'", s.study_id))
                })
                .collect::<Result<Vec<_>>>()?;
            aio::write_effects(&mut body, &effects, None, common.precision)?;
        }
        MethodArg::Sim => {
            if args.iterations == 0 {
                bail!("--iterations must be at least 1");
            }
            let config = SimConfig::new(args.iterations, args.seed).with_workers(common.workers);
            let effects = studies
                .iter()
                .map(|s| sim_effect(s, &config).with_context(|| format!("study '{}'", s.study_id)))
                .collect::<Result<Vec<_>>>()?;
            let prov = SimProvenance {
                seed: args.seed,
                iterations: args.iterations,
            };
            aio::write_effects(&mut body, &effects, Some(prov), common.precision)?;
            manifest.seed = Some(args.seed);
            manifest.iterations = Some(args.iterations);
        }
    }
    manifest.options = serde_json::json!({ "method": args.method, "crude_sd": args.crude_sd });
    write_output(common, &body)?;
    manifest.emit()
}

fn cmd_meta(common: &Common, args: &MetaArgs) -> Result<()> {
    let text = read_text(&args.input)?;
    let rows = aio::read_effects(text.as_bytes())
        .with_context(|| format!("parsing {}", args.input.display()))?;
    if rows.is_empty() {
        bail!("no studies in {}", args.input.display());
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.g, r.v_g)).collect();
    let result = pool_random_effects(&pairs)?;
    let mut body = Vec::new();
    aio::write_meta(&mut body, &result, common.precision)?;
    write_output(common, &body)?;
    RunManifest::new("meta", common, Some(&args.input)).emit()
}

fn cmd_mc(common: &Common, args: &McArgs) -> Result<()> {
    let mut scenarios = match (&args.scenario, args.full_grid) {
        (Some(_), true) => bail!("give either a scenario file or --full-grid, not both"),
        (None, false) => bail!("a scenario file or --full-grid is required"),
        (None, true) => full_grid(
            args.reps.unwrap_or(addmeta::mc_harness::DESK_REPS),
            args.inner_iterations
                .unwrap_or(addmeta::mc_harness::DESK_INNER_ITERATIONS),
            args.seed.unwrap_or(DEFAULT_SEED),
        ),
        (Some(path), false) => {
            let text = read_text(path)?;
            let s = if is_json(path) {
                Scenario::from_json(&text)
            } else {
                Scenario::from_toml(&text)
            }
            .with_context(|| format!("parsing {}", path.display()))?;
            vec![s]
        }
    };
    for s in &mut scenarios {
        if let Some(r) = args.reps {
            s.mc_reps = r;
        }
        if let Some(i) = args.inner_iterations {
            s.inner_iterations = i;
        }
        if let (Some(seed), false) = (args.seed, args.full_grid) {
            s.seed = seed;
        }
        if let Some(t) = args.truncation {
            s.truncation = t.into();
        }
        if let Some(src) = args.summary_source {
            s.summary_source = src.into();
        }
        if let Some(c) = args.crude_sd {
            s.crude_scale = c.into();
        }
    }
    let reports = with_workers(common.workers, || {
        scenarios
            .iter()
            .map(run_scenario)
            .collect::<addmeta::Result<Vec<_>>>()
    })?;
    let mut body = Vec::new();
    aio::write_bias_reports(&mut body, &reports, common.precision)?;
    write_output(common, &body)?;

    let mut manifest = RunManifest::new("mc", common, args.scenario.as_deref());
    let first = &scenarios[0];
    manifest.seed = Some(args.seed.unwrap_or(if args.full_grid {
        DEFAULT_SEED
    } else {
        first.seed
    }));
    manifest.iterations = Some(first.inner_iterations);
    manifest.replicates = Some(first.mc_reps);
    manifest.options = serde_json::json!({
        "full_grid": args.full_grid,
        "scenarios": scenarios.len(),
        "truncation": first.truncation,
        "summary_source": first.summary_source,
        "crude_scale": first.crude_scale,
        "scenario": if args.full_grid { serde_json::Value::Null } else { serde_json::to_value(first)? },
    });
    manifest.emit()
}

fn cmd_or(common: &Common, args: &OrArgs) -> Result<()> {
    let text = read_text(&args.input)?;
    let studies = aio::read_or_records(text.as_bytes())
        .with_context(|| format!("parsing {}", args.input.display()))?;
    if studies.is_empty() {
        bail!("no studies in {}", args.input.display());
    }
    let rows = studies
        .into_iter()
        .map(|s| {
            let (merged, or) =
                recombine(&s.ab_aa, &s.bb_ab).with_context(|| format!("study '{}'", s.study_id))?;
            Ok((s.study_id, merged, or))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut body = Vec::new();
    aio::write_combined_or(&mut body, &rows, common.precision)?;
    write_output(common, &body)?;
    RunManifest::new("or", common, Some(&args.input)).emit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Effect(a) => cmd_effect(&cli.common, a),
        Command::Meta(a) => cmd_meta(&cli.common, a),
        Command::Mc(a) => cmd_mc(&cli.common, a),
        Command::Or(a) => cmd_or(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
