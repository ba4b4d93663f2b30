use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use amr_core::baseline::{self, BaselineConfig, TuningQuery};
use amr_core::embeddings::{
    audio_store_path, query_store_path, read_store, write_store, EmbeddingStore, MockEmbedder,
};
use amr_core::manifest::{read_manifest, AudioItem};
use amr_core::predictions::{write_predictions, PredictionRow};
use anyhow::Context;
use clap::Args;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::write_json;
use crate::{Failure, OutputArg};

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Window length in seconds.
    #[arg(long)]
    window: Option<f64>,
    /// Window hop in seconds.
    #[arg(long)]
    hop: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MockEmbedArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Store directory; receives `audio/` and `text/`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    /// Noise norm relative to the unit-norm signal.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    windows: WindowArgs,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    emb_dir: PathBuf,
    /// Similarity threshold.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Median filter length (odd).
    #[arg(long)]
    median: Option<usize>,
    #[command(flatten)]
    windows: WindowArgs,
    /// Predictions JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Validation manifest.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    emb_dir: PathBuf,
    #[command(flatten)]
    windows: WindowArgs,
    /// Comma-separated threshold grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thresholds: Option<Vec<f64>>,
    /// Comma-separated median length grid.
    #[arg(long, value_delimiter = ',')]
    medians: Option<Vec<usize>>,
    #[command(flatten)]
    output: OutputArg,
}

fn baseline_config(
    cfg: &RunConfig,
    windows: &WindowArgs,
    tau: Option<f64>,
    median: Option<usize>,
) -> anyhow::Result<BaselineConfig> {
    let mut b = cfg.baseline;
    if let Some(v) = tau {
        b.threshold = v;
    }
    if let Some(v) = median {
        b.median_len = v;
    }
    if let Some(v) = windows.window {
        b.window_s = v;
    }
    if let Some(v) = windows.hop {
        b.hop_s = v;
    }
    b.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(b)
}

fn load_manifest(path: &Path) -> anyhow::Result<Vec<AudioItem>> {
    read_manifest(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn unique_queries(items: &[AudioItem]) -> BTreeSet<&str> {
    items
        .iter()
        .flat_map(|i| i.annotations.iter().map(|a| a.query.as_str()))
        .collect()
}

#[derive(Serialize)]
struct MockReport {
    audio_stores: usize,
    query_stores: usize,
    dim: usize,
    noise_sigma: f64,
    window_s: f64,
    hop_s: f64,
}

pub fn mock_embed(args: &MockEmbedArgs, mut cfg: RunConfig) -> anyhow::Result<()> {
    if let Some(v) = args.dim {
        cfg.mock.dim = v;
    }
    if let Some(v) = args.sigma {
        cfg.mock.noise_sigma = v;
    }
    if let Some(v) = args.seed {
        cfg.mock.seed = v;
    }
    let b = baseline_config(&cfg, &args.windows, None, None)?;
    let items = load_manifest(&args.manifest)?;
    let world =
        MockEmbedder::new(cfg.mock.clone(), &items).map_err(|e| Failure::Config(e.to_string()))?;

    let mut audio_stores = 0;
    for item in &items {
        let mut store = world.embed_audio(item, b.window_s, b.hop_s)?;
        store.model = Some("mock".into());
        write_store(&store, audio_store_path(&args.out, &item.audio_id))?;
        audio_stores += 1;
    }
    let queries = unique_queries(&items);
    for q in &queries {
        let mut store = world.embed_query(q)?;
        store.model = Some("mock".into());
        write_store(&store, query_store_path(&args.out, q))?;
    }
    write_json(
        &MockReport {
            audio_stores,
            query_stores: queries.len(),
            dim: cfg.mock.dim,
            noise_sigma: cfg.mock.noise_sigma,
            window_s: b.window_s,
            hop_s: b.hop_s,
        },
        None,
    )
}

fn load_query(dir: &Path, query: &str) -> anyhow::Result<EmbeddingStore> {
    let path = query_store_path(dir, query);
    read_store(&path).with_context(|| format!("query store for {query:?}"))
}

pub fn baseline(args: &BaselineArgs, cfg: RunConfig) -> anyhow::Result<()> {
    let b = baseline_config(&cfg, &args.windows, args.tau, args.median)?;
    let items = load_manifest(&args.manifest)?;
    let mut rows = Vec::new();
    for item in &items {
        let audio = read_store(audio_store_path(&args.emb_dir, &item.audio_id))?;
        for (query, _) in item.grouped_queries() {
            let text = load_query(&args.emb_dir, query)?;
            let candidates = baseline::retrieve_within(&audio, &text, &b, item.duration_s)
                .with_context(|| format!("{} / {query:?}", item.audio_id))?;
            rows.push(PredictionRow {
                audio_id: item.audio_id.clone(),
                query: query.to_string(),
                candidates,
            });
        }
    }
    write_predictions(&rows, &args.out)?;
    log::info!(
        "{} prediction rows written to {}",
        rows.len(),
        args.out.display()
    );
    Ok(())
}

/// Tuned parameters in run-configuration shape, usable with `--config`.
#[derive(Serialize)]
struct TunedConfig {
    baseline: BaselineConfig,
}

pub fn tune(args: &TuneArgs, cfg: RunConfig) -> anyhow::Result<()> {
    let b = baseline_config(&cfg, &args.windows, None, None)?;
    let thresholds = args
        .thresholds
        .clone()
        .unwrap_or(cfg.tune.thresholds.clone());
    let medians = args.medians.clone().unwrap_or(cfg.tune.medians.clone());
    if medians.iter().any(|m| m % 2 == 0) {
        return Err(Failure::Config("median lengths must be odd".into()).into());
    }
    let items = load_manifest(&args.manifest)?;
    let mut queries = Vec::new();
    for item in &items {
        let audio = read_store(audio_store_path(&args.emb_dir, &item.audio_id))?;
        for (query, gts) in item.grouped_queries() {
            let text = load_query(&args.emb_dir, query)?;
            if (audio.window_s - b.window_s).abs() > 1e-9 || (audio.hop_s - b.hop_s).abs() > 1e-9 {
                return Err(Failure::Config(format!(
                    "{}: store windows ({} s, hop {} s) differ from configured ({} s, hop {} s)",
                    item.audio_id, audio.window_s, audio.hop_s, b.window_s, b.hop_s
                ))
                .into());
            }
            queries.push(TuningQuery {
                similarities: baseline::similarity_curve(&audio, &text)?,
                ground_truths: gts,
                duration_s: item.duration_s,
            });
        }
    }
    let out = baseline::tune(&queries, &thresholds, &medians, b.window_s, b.hop_s)
        .map_err(|e| Failure::Config(e.to_string()))?;
    log::info!(
        "best τ={} m={} avg mAP {:.2} over {} queries",
        out.config.threshold,
        out.config.median_len,
        out.avg_map,
        queries.len()
    );
    write_json(
        &TunedConfig {
            baseline: out.config,
        },
        args.output.out.as_deref(),
    )
}
