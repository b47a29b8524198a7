//! Subcommands that run in-process.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use layoutforge_core::dataset::{corpus_stats, filter_scene, ingest_scene, split_corpus, PipelineConfig, SourceScene, SplitPlan};
use layoutforge_core::eval::{judge_scores, nav_eval, render_svg, success_rate, validate_against, NavTask, Pose, SvgOptions, ValidationThresholds};
use layoutforge_core::forge::{dpo_loss, export_pairs, make_stage1_pairs, synth_stage2_pairs, DpoParams, PairBatch};
use layoutforge_core::gateway::{Gateway, GenerationParams};
use layoutforge_core::jsonl;
use layoutforge_core::prompt::{
    build_edit_prompt, build_generation_prompt, build_judge_prompt, build_summary_prompt, parse_completion_for_task,
};
use layoutforge_core::scene::{parse_layout, Layout, SceneRecord, SceneSource, TaskSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{PromptKind, StartPose};

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_layout(path: &Path) -> anyhow::Result<Layout> {
    parse_layout(&read_text(path)?).with_context(|| format!("layout {}", path.display()))
}

pub fn read_task(path: &Path) -> anyhow::Result<TaskSpec> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("task {}", path.display()))
}

fn read_records(path: &Path) -> anyhow::Result<Vec<SceneRecord>> {
    jsonl::read_path(path).with_context(|| format!("corpus {}", path.display()))
}

fn write_records<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    jsonl::write_path(path, items).with_context(|| format!("writing {}", path.display()))
}

fn config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    let Some(path) = path else { return Ok(PipelineConfig::default()) };
    let text = read_text(path)?;
    let cfg = if path.extension().is_some_and(|e| e == "json") {
        PipelineConfig::from_json(&text)
    } else {
        PipelineConfig::from_toml(&text)
    };
    cfg.with_context(|| format!("config {}", path.display()))
}

pub fn ingest(input: &Path, output: &Path, source: SceneSource, cfg: Option<&Path>) -> anyhow::Result<ExitCode> {
    let cfg = config(cfg)?;
    let scenes: Vec<SourceScene> = jsonl::read_path(input).with_context(|| format!("scenes {}", input.display()))?;
    let conv = cfg.convention(source);
    let mut records = Vec::new();
    let mut failed = Vec::new();
    let mut dropped = 0;
    for s in &scenes {
        match ingest_scene(s, source, &conv, &cfg.ingest) {
            Ok((record, report)) => {
                dropped += report.dropped_small_objects.len();
                records.push(record);
            }
            Err(e) => failed.push(json!({ "scene_id": s.scene_id, "error": e.to_string() })),
        }
    }
    write_records(output, &records)?;
    print_json(&json!({
        "scenes_in": scenes.len(),
        "scenes_out": records.len(),
        "dropped_small_objects": dropped,
        "failed": failed,
    }));
    Ok(ExitCode::SUCCESS)
}

pub fn filter(input: &Path, output: &Path, rejected: Option<&Path>, cfg: Option<&Path>) -> anyhow::Result<ExitCode> {
    let cfg = config(cfg)?;
    let corpus = read_records(input)?;
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    for r in corpus {
        let verdict = filter_scene(&r, &cfg.filter, None);
        for reason in &verdict.reasons {
            let key = serde_json::to_value(reason)?.as_str().unwrap_or_default().to_string();
            *reasons.entry(key).or_default() += 1;
        }
        if verdict.accepted {
            kept.push(r);
        } else {
            dropped.push(r);
        }
    }
    write_records(output, &kept)?;
    if let Some(path) = rejected {
        write_records(path, &dropped)?;
    }
    print_json(&json!({ "accepted": kept.len(), "rejected": dropped.len(), "reasons": reasons }));
    Ok(ExitCode::SUCCESS)
}

pub fn stats(input: &Path) -> anyhow::Result<ExitCode> {
    print_json(&corpus_stats(&read_records(input)?));
    Ok(ExitCode::SUCCESS)
}

pub fn split(input: &Path, train: &Path, test: &Path, plan: &SplitPlan, seed: u64) -> anyhow::Result<ExitCode> {
    let corpus = read_records(input)?;
    let (tr, te) = split_corpus(&corpus, seed, plan)?;
    write_records(train, &tr)?;
    write_records(test, &te)?;
    print_json(&json!({ "train": tr.len(), "test": te.len() }));
    Ok(ExitCode::SUCCESS)
}

pub fn prompt(
    kind: PromptKind,
    task: Option<&Path>,
    layout: Option<&Path>,
    instruction: Option<&str>,
    preferences: Option<&str>,
    as_json: bool,
) -> anyhow::Result<ExitCode> {
    let need_layout = || layout.context("--layout is required for this prompt kind").and_then(read_layout);
    let bundle = match kind {
        PromptKind::Generate => build_generation_prompt(&read_task(task.context("--task is required for a generation prompt")?)?)?,
        PromptKind::Edit => build_edit_prompt(&need_layout()?, instruction.context("--instruction is required for an edit prompt")?)?,
        PromptKind::Judge => build_judge_prompt(&need_layout()?, preferences.unwrap_or_default()),
        PromptKind::Summarize => build_summary_prompt(&need_layout()?),
    };
    if as_json {
        let mut v = serde_json::to_value(&bundle)?;
        v["fingerprint"] = json!(bundle.fingerprint());
        print_json(&v);
    } else {
        print!("{}", bundle.full_text());
    }
    Ok(ExitCode::SUCCESS)
}

pub async fn generate(
    task: &Path,
    n: usize,
    output: Option<&Path>,
    gateway: &Gateway,
    params: &GenerationParams,
    t: &ValidationThresholds,
) -> anyhow::Result<ExitCode> {
    let task = read_task(task)?;
    let bundle = build_generation_prompt(&task)?;
    let mut jobs = tokio::task::JoinSet::new();
    for i in 0..n {
        let (g, b) = (gateway.clone(), bundle.clone());
        // Distinct seeds so a seeded backend does not return n copies.
        let p = GenerationParams {
            seed: params.seed.map(|s| s.wrapping_add(i as u64)),
            ..params.clone()
        };
        jobs.spawn(async move { (i, g.complete(&b, &p).await) });
    }
    let mut results = jobs.join_all().await;
    results.sort_by_key(|(i, _)| *i);
    let mut lines = Vec::with_capacity(n);
    let mut failures = 0;
    for (i, r) in results {
        let parsed = r.map_err(|e| e.to_string()).and_then(|text| parse_completion_for_task(&text, &task).map_err(|e| e.to_string()));
        lines.push(match parsed {
            Ok(p) => {
                let report = validate_against(&p.layout, Some(&task), t);
                json!({ "sample": i, "layout": p.layout, "report": report, "reasoning": p.reasoning })
            }
            Err(e) => {
                failures += 1;
                json!({ "sample": i, "error": e })
            }
        });
    }
    match output {
        Some(path) => write_records(path, &lines)?,
        None => {
            for l in &lines {
                println!("{l}");
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} of {n} samples failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn validate(layout: &Path, task: Option<&Path>, t: &ValidationThresholds) -> anyhow::Result<ExitCode> {
    let layout = read_layout(layout)?;
    let task = task.map(read_task).transpose()?;
    let report = validate_against(&layout, task.as_ref(), t);
    print_json(&report);
    Ok(if report.usable { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn render(layout: &Path, output: Option<&Path>, scale: f64, labels: bool, highlight: bool) -> anyhow::Result<ExitCode> {
    if !(scale.is_finite() && scale > 0.0) {
        bail!("--scale must be positive");
    }
    let opts = SvgOptions {
        scale,
        labels,
        highlight,
        ..SvgOptions::default()
    };
    let svg = render_svg(&read_layout(layout)?, &opts);
    match output {
        Some(path) => std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{svg}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn report_batch(batch: &PairBatch, output: &Path, skipped: Option<&Path>) -> anyhow::Result<()> {
    export_pairs(&batch.pairs, output)?;
    if let Some(path) = skipped {
        write_records(path, &batch.skipped)?;
    }
    let mut tags: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &batch.pairs {
        for t in &p.violation_tags {
            *tags.entry(t.as_str()).or_default() += 1;
        }
    }
    print_json(&json!({ "pairs": batch.pairs.len(), "skipped": batch.skipped.len(), "violations": tags }));
    Ok(())
}

pub async fn pairs_stage1(
    positives: &Path,
    output: &Path,
    k: usize,
    skipped: Option<&Path>,
    gateway: &Gateway,
    params: &GenerationParams,
) -> anyhow::Result<ExitCode> {
    let batch = make_stage1_pairs(&read_records(positives)?, gateway, params, k).await;
    report_batch(&batch, output, skipped)?;
    Ok(ExitCode::SUCCESS)
}

pub fn pairs_stage2(positives: &Path, output: &Path, seed: u64, mix: f64, magnitude: f64, skipped: Option<&Path>) -> anyhow::Result<ExitCode> {
    let batch = synth_stage2_pairs(&read_records(positives)?, seed, mix, magnitude)?;
    report_batch(&batch, output, skipped)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
struct LogProbs {
    pos_policy: f64,
    neg_policy: f64,
    pos_ref: f64,
    neg_ref: f64,
}

pub fn dpo_one([pp, np, pr, nr]: [f64; 4], beta: f64) -> anyhow::Result<ExitCode> {
    print_json(&json!({ "loss": dpo_loss(pp, np, pr, nr, &DpoParams { beta })? }));
    Ok(ExitCode::SUCCESS)
}

pub fn dpo_file(path: &Path, beta: f64) -> anyhow::Result<ExitCode> {
    let rows: Vec<LogProbs> = jsonl::read_path(path).with_context(|| format!("reading {}", path.display()))?;
    let losses = rows
        .iter()
        .enumerate()
        .map(|(i, r)| dpo_loss(r.pos_policy, r.neg_policy, r.pos_ref, r.neg_ref, &DpoParams { beta }).with_context(|| format!("row {}", i + 1)))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let mean = if losses.is_empty() { Value::Null } else { json!(losses.iter().sum::<f64>() / losses.len() as f64) };
    print_json(&json!({ "losses": losses, "mean": mean }));
    Ok(ExitCode::SUCCESS)
}

pub async fn eval_success(
    tasks: &Path,
    n: usize,
    samples: Option<&Path>,
    gateway: &Gateway,
    params: &GenerationParams,
    t: &ValidationThresholds,
) -> anyhow::Result<ExitCode> {
    let tasks: Vec<TaskSpec> = jsonl::read_path(tasks).with_context(|| format!("tasks {}", tasks.display()))?;
    if tasks.is_empty() || n == 0 {
        bail!("need at least one task and --n >= 1");
    }
    let report = success_rate(&tasks, gateway, params, n, t).await;
    if let Some(path) = samples {
        write_records(path, &report.samples)?;
    }
    print_json(&json!({ "overall_rate": report.overall_rate(), "rooms": report.rooms }));
    Ok(ExitCode::SUCCESS)
}

pub fn eval_nav(layout: &Path, target: String, start: StartPose, resolution: f64, radius: f64, fov_deg: f64) -> anyhow::Result<ExitCode> {
    let layout = read_layout(layout)?;
    let task = NavTask {
        start: Pose::new(start.0, start.1, start.2),
        target_instance: target,
        fov_half_angle: fov_deg.to_radians(),
        success_radius: radius,
        grid_resolution: resolution,
    };
    print_json(&nav_eval(&layout, &task)?);
    Ok(ExitCode::SUCCESS)
}

pub async fn judge(layouts: &[PathBuf], preferences: &str, gateway: &Gateway, params: &GenerationParams) -> anyhow::Result<ExitCode> {
    let loaded = layouts.iter().map(|p| read_layout(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut failed = false;
    for (i, r) in judge_scores(&loaded, preferences, gateway, params).await.into_iter().enumerate() {
        let line = match r {
            Ok(score) => json!({ "layout": layouts[i], "score": score }),
            Err(e) => {
                failed = true;
                json!({ "layout": layouts[i], "error": e.to_string() })
            }
        };
        println!("{line}");
    }
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
