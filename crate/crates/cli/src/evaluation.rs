use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use amr_core::losses::{overall_loss, LossBreakdown, PredictionSet};
use amr_core::manifest::{read_manifest, AudioItem};
use amr_core::metrics::{
    self, avg_map_thresholds, FrameCounts, MetricReport, QueryResult, SedScores,
};
use amr_core::predictions::{read_predictions, PredictionRow};
use amr_core::span::{Candidate, NormalizedMoment, Span};
use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::write_json;
use crate::{Failure, OutputArg};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Predictions JSONL.
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    #[command(flatten)]
    output: OutputArg,
    /// Also write R1 and mAP for every θ of the average-mAP grid.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SedEvalArgs {
    /// Reference annotations; queries act as class labels.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    /// Frame length in seconds.
    #[arg(long)]
    frame: Option<f64>,
    /// Candidates below this confidence are dropped.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    threshold: f64,
    /// Comma-separated thresholds; reports one row per threshold.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "threshold"
    )]
    sweep: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// JSON with `candidates` (center, width, confidence) and `ground_truths` (center, width).
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long)]
    lambda_l1: Option<f64>,
    #[arg(long)]
    lambda_giou: Option<f64>,
    #[arg(long)]
    lambda_score: Option<f64>,
    #[command(flatten)]
    output: OutputArg,
}

type Key = (String, String);

fn load_manifest(path: &PathBuf) -> anyhow::Result<Vec<AudioItem>> {
    read_manifest(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn join_error(kind: &str, rows: &[String]) -> anyhow::Error {
    for r in rows {
        eprintln!("{kind}: {r}");
    }
    Failure::Join(format!("{} {kind} prediction row(s)", rows.len())).into()
}

/// Pairs every manifest query with its prediction row. Rows that match no
/// manifest query, or repeat one, fail the join; queries without a row get no
/// candidates.
pub fn join(items: &[AudioItem], rows: Vec<PredictionRow>) -> anyhow::Result<Vec<QueryResult>> {
    let mut order: Vec<Key> = Vec::new();
    let mut truth: HashMap<Key, (Vec<Span>, f64)> = HashMap::new();
    for item in items {
        for (q, spans) in item.grouped_queries() {
            let key = (item.audio_id.clone(), q.to_string());
            order.push(key.clone());
            truth.insert(key, (spans, item.duration_s));
        }
    }
    let mut preds: HashMap<Key, PredictionRow> = HashMap::new();
    let mut unmatched = Vec::new();
    let mut duplicated = Vec::new();
    for row in rows {
        let key = (row.audio_id.clone(), row.query.clone());
        let label = format!("{} / {:?}", row.audio_id, row.query);
        if !truth.contains_key(&key) {
            unmatched.push(label);
        } else if preds.insert(key, row).is_some() {
            duplicated.push(label);
        }
    }
    if !unmatched.is_empty() {
        return Err(join_error("unmatched", &unmatched));
    }
    if !duplicated.is_empty() {
        return Err(join_error("duplicate", &duplicated));
    }
    let missing = order.iter().filter(|k| !preds.contains_key(*k)).count();
    if missing > 0 {
        log::warn!("{missing} queries have no prediction row and count as misses");
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let (ground_truths, duration_s) = truth.remove(&key).expect("key from manifest");
            QueryResult {
                ground_truths,
                candidates: preds.remove(&key).map(|r| r.candidates).unwrap_or_default(),
                duration_s,
            }
        })
        .collect())
}

fn write_threshold_csv(path: &PathBuf, results: &[QueryResult]) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["theta", "r1", "map"])?;
    for theta in avg_map_thresholds() {
        w.write_record([
            metrics::theta_key(theta),
            format!("{:.4}", metrics::recall1_at(results, theta)?),
            format!("{:.4}", metrics::map_at(results, theta)?),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn eval(args: &EvalArgs, cfg: RunConfig) -> anyhow::Result<()> {
    let items = load_manifest(&args.manifest)?;
    let rows = read_predictions(&args.predictions)?;
    let results = join(&items, rows)?;
    let report: MetricReport =
        metrics::evaluate(&results, &cfg.eval.r1_thresholds, &cfg.eval.map_thresholds)
            .map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(path) = &args.csv {
        write_threshold_csv(path, &results)?;
    }
    write_json(&report, args.output.out.as_deref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SedReport {
    pub threshold: f64,
    pub frame_s: f64,
    #[serde(flatten)]
    pub scores: SedScores,
    #[serde(flatten)]
    pub counts: FrameCounts,
}

fn label_spans(rows: &[&PredictionRow], threshold: f64) -> BTreeMap<String, Vec<Span>> {
    let mut out: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    for row in rows {
        let spans = out.entry(row.query.clone()).or_default();
        spans.extend(
            row.candidates
                .iter()
                .filter(|c| c.confidence >= threshold)
                .map(|c| c.span),
        );
    }
    out
}

pub fn sed_eval(args: &SedEvalArgs, cfg: RunConfig) -> anyhow::Result<()> {
    let frame_s = args.frame.unwrap_or(cfg.eval.frame_s);
    if frame_s.is_nan() || frame_s <= 0.0 {
        return Err(Failure::Config(format!("frame length must be > 0, got {frame_s}")).into());
    }
    let items = load_manifest(&args.manifest)?;
    let rows = read_predictions(&args.predictions)?;
    let mut by_audio: HashMap<&str, Vec<&PredictionRow>> = HashMap::new();
    let known: HashMap<&str, ()> = items.iter().map(|i| (i.audio_id.as_str(), ())).collect();
    let unmatched: Vec<String> = rows
        .iter()
        .filter(|r| !known.contains_key(r.audio_id.as_str()))
        .map(|r| format!("{} / {:?}", r.audio_id, r.query))
        .collect();
    if !unmatched.is_empty() {
        return Err(join_error("unmatched", &unmatched));
    }
    for r in &rows {
        by_audio.entry(r.audio_id.as_str()).or_default().push(r);
    }

    let references: Vec<BTreeMap<String, Vec<Span>>> = items
        .iter()
        .map(|item| {
            let mut m: BTreeMap<String, Vec<Span>> = BTreeMap::new();
            for a in &item.annotations {
                m.entry(a.query.clone()).or_default().push(a.span);
            }
            m
        })
        .collect();

    let report_at = |threshold: f64| -> anyhow::Result<SedReport> {
        let mut counts = FrameCounts::default();
        for (item, reference) in items.iter().zip(&references) {
            let preds = by_audio
                .get(item.audio_id.as_str())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            counts.add_recording(
                &label_spans(preds, threshold),
                reference,
                item.duration_s,
                frame_s,
            )?;
        }
        Ok(SedReport {
            threshold,
            frame_s,
            scores: counts.scores(),
            counts,
        })
    };

    match &args.sweep {
        Some(thresholds) => {
            let mut sorted = thresholds.clone();
            sorted.sort_by(f64::total_cmp);
            let reports = sorted
                .into_iter()
                .map(report_at)
                .collect::<anyhow::Result<Vec<_>>>()?;
            write_json(&reports, args.output.out.as_deref())
        }
        None => write_json(&report_at(args.threshold)?, args.output.out.as_deref()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossInput {
    candidates: Vec<Candidate>,
    ground_truths: Vec<NormalizedMoment>,
}

pub fn loss(args: &LossArgs, cfg: RunConfig) -> anyhow::Result<()> {
    let mut w = cfg.loss;
    if let Some(v) = args.lambda_l1 {
        w.lambda_l1 = v;
    }
    if let Some(v) = args.lambda_giou {
        w.lambda_giou = v;
    }
    if let Some(v) = args.lambda_score {
        w.lambda_score = v;
    }
    w.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let input: LossInput =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    for c in &input.candidates {
        Candidate::new(c.moment, c.confidence)?;
    }
    let preds = PredictionSet::new(input.candidates)?;
    let out: LossBreakdown = overall_loss(&preds, &input.ground_truths, &w)?;
    write_json(&out, args.output.out.as_deref())
}
