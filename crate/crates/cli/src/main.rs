//! `layoutforge`: dataset curation, prompting, generation, preference data,
//! evaluation, and the editing service.
//!
//! Exit status: 0 on success, 1 on a domain error (including an unusable
//! layout under `validate`), 2 on a usage error.

mod args;
mod offline;
mod remote;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layoutforge_core::dataset::{parse_split_plan, SplitPlan};
use layoutforge_core::forge::OVERLAP_FRACTION;
use layoutforge_core::scene::SceneSource;

use args::{BackendArgs, PromptKind, StartPose, ThresholdArgs};

#[derive(Parser)]
#[command(name = "layoutforge", version, about = "LLM-driven indoor layout toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert source scenes (JSONL) into the canonical corpus format.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// three_d_front, holodeck_synth or generated.
        #[arg(long)]
        source: SceneSource,
        /// Pipeline config, TOML or JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Apply the curation rules to a corpus.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        rejected: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Corpus statistics as JSON.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
    /// Seeded train/test split with a per-room test quota.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// e.g. `bedroom=423,living_room=53`
        #[arg(long, value_parser = plan)]
        plan: SplitPlan,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a prompt.
    Prompt {
        #[arg(long, value_enum, default_value = "generate")]
        kind: PromptKind,
        /// Task spec, for `generate`.
        #[arg(long)]
        task: Option<PathBuf>,
        /// Current layout, for `edit`, `judge` and `summarize`.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        instruction: Option<String>,
        #[arg(long)]
        preferences: Option<String>,
        /// Print the whole bundle as JSON instead of the prompt text.
        #[arg(long)]
        json: bool,
    },
    /// Sample layouts for a task; one JSON line per sample.
    Generate {
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Validate a layout; exits 1 when it is not usable.
    Validate {
        #[arg(long)]
        layout: PathBuf,
        /// Also check object counts against this task.
        #[arg(long)]
        task: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Top-down SVG of a layout.
    Render {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        scale: f64,
        #[arg(long)]
        no_labels: bool,
        #[arg(long)]
        no_highlight: bool,
    },
    /// Preference pairs from sampled completions against curated positives.
    PairsStage1 {
        #[arg(long)]
        positives: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        skipped: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Preference pairs with synthetic overlap and out-of-bounds negatives.
    PairsStage2 {
        #[arg(long)]
        positives: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of pairs whose negative gets an overlap.
        #[arg(long, default_value_t = OVERLAP_FRACTION)]
        mix: f64,
        /// How far past the wall an out-of-bounds object is pushed, in meters.
        #[arg(long, default_value_t = 0.3)]
        magnitude: f64,
        #[arg(long)]
        skipped: Option<PathBuf>,
    },
    /// DPO loss for one set of log-probabilities, or for each row of a JSONL file.
    #[command(allow_negative_numbers = true)]
    DpoLoss {
        #[arg(long, required_unless_present = "input")]
        pos_policy: Option<f64>,
        #[arg(long, required_unless_present = "input")]
        neg_policy: Option<f64>,
        #[arg(long, required_unless_present = "input")]
        pos_ref: Option<f64>,
        #[arg(long, required_unless_present = "input")]
        neg_ref: Option<f64>,
        /// Rows of {pos_policy, neg_policy, pos_ref, neg_ref}.
        #[arg(long, conflicts_with_all = ["pos_policy", "neg_policy", "pos_ref", "neg_ref"])]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
    },
    /// Generation success rate over a task set.
    EvalSuccess {
        /// JSONL of task specs.
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Write every sample's outcome here.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Navigate to an object on an occupancy grid.
    EvalNav {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        target: String,
        /// `x,y,heading` in meters and radians; heading 0 faces +y.
        #[arg(long, allow_hyphen_values = true)]
        start: StartPose,
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        /// Half-angle of the view cone, in degrees.
        #[arg(long, default_value_t = 30.0)]
        fov: f64,
    },
    /// Score layouts with the judge prompt; one JSON line per layout.
    Judge {
        #[arg(long = "layout", required = true)]
        layouts: Vec<PathBuf>,
        #[arg(long, default_value = "")]
        preferences: String,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port; the bound address is printed on stdout.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// JSONL write-ahead log, replayed on start.
        #[arg(long)]
        persist: Option<PathBuf>,
        /// Browser origin allowed to call the API.
        #[arg(long)]
        cors_origin: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Talk to a running service.
    Session {
        #[arg(long, env = "LAYOUTFORGE_SERVICE_URL", default_value = "http://127.0.0.1:8080")]
        url: String,
        #[command(subcommand)]
        action: remote::SessionAction,
    },
}

fn plan(s: &str) -> Result<SplitPlan, String> {
    parse_split_plan(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

async fn run(command: Command) -> anyhow::Result<ExitCode> {
    use Command::*;
    match command {
        Ingest { input, output, source, config } => offline::ingest(&input, &output, source, config.as_deref()),
        Filter { input, output, rejected, config } => offline::filter(&input, &output, rejected.as_deref(), config.as_deref()),
        Stats { input } => offline::stats(&input),
        Split { input, train, test, plan, seed } => offline::split(&input, &train, &test, &plan, seed),
        Prompt { kind, task, layout, instruction, preferences, json } => {
            offline::prompt(kind, task.as_deref(), layout.as_deref(), instruction.as_deref(), preferences.as_deref(), json)
        }
        Generate { task, n, output, seed, backend, thresholds } => {
            offline::generate(&task, n, output.as_deref(), &backend.gateway()?, &backend.params(seed), &thresholds.get()?).await
        }
        Validate { layout, task, thresholds } => offline::validate(&layout, task.as_deref(), &thresholds.get()?),
        Render { layout, output, scale, no_labels, no_highlight } => offline::render(&layout, output.as_deref(), scale, !no_labels, !no_highlight),
        PairsStage1 { positives, output, k, skipped, seed, backend } => {
            offline::pairs_stage1(&positives, &output, k, skipped.as_deref(), &backend.gateway()?, &backend.params(seed)).await
        }
        PairsStage2 { positives, output, seed, mix, magnitude, skipped } => {
            offline::pairs_stage2(&positives, &output, seed, mix, magnitude, skipped.as_deref())
        }
        DpoLoss { pos_policy, neg_policy, pos_ref, neg_ref, input, beta } => match input {
            Some(path) => offline::dpo_file(&path, beta),
            None => offline::dpo_one([pos_policy, neg_policy, pos_ref, neg_ref].map(Option::unwrap), beta),
        },
        EvalSuccess { tasks, n, samples, seed, backend, thresholds } => {
            offline::eval_success(&tasks, n, samples.as_deref(), &backend.gateway()?, &backend.params(seed), &thresholds.get()?).await
        }
        EvalNav { layout, target, start, resolution, radius, fov } => offline::eval_nav(&layout, target, start, resolution, radius, fov),
        Judge { layouts, preferences, backend } => offline::judge(&layouts, &preferences, &backend.gateway()?, &backend.params(None)).await,
        Serve { host, port, persist, cors_origin, seed, backend, thresholds } => {
            remote::serve(&host, port, persist, cors_origin, backend.gateway()?, backend.params(seed), thresholds.get()?).await
        }
        Session { url, action } => remote::session(&url, action).await,
    }
}
