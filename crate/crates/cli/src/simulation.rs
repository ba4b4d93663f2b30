use std::path::{Path, PathBuf};

use amr_core::simulate::{
    generate_dataset, segment_background, AudioSource, BackgroundPool, DatasetSummary,
    ForegroundClip, ForegroundPool,
};
use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::write_json;
use crate::Failure;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory holding the foreground clips named in the caption table.
    #[arg(long, value_name = "DIR")]
    fg_audio: PathBuf,
    /// CSV with columns `file_name,caption_1,…,caption_5`.
    #[arg(long, value_name = "CSV")]
    fg_captions: PathBuf,
    /// Directory of long background recordings.
    #[arg(long, value_name = "DIR")]
    bg_audio: PathBuf,
    /// Output directory for `audio/` and `manifest.jsonl`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of items to generate.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Mean gap between moments in seconds.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Background segment length in seconds.
    #[arg(long)]
    segment_len: Option<f64>,
    /// Background level in dB relative to unit RMS.
    #[arg(long, allow_hyphen_values = true)]
    bg_db: Option<f64>,
    /// Prefix of generated audio ids.
    #[arg(long, default_value = "sim")]
    id_prefix: String,
}

#[derive(Serialize)]
struct Report<'a> {
    out: &'a Path,
    #[serde(flatten)]
    summary: DatasetSummary,
    backgrounds: usize,
    background_segments: usize,
    foreground_clips: usize,
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Foreground clips listed in a caption table whose audio exists.
pub fn load_foreground(audio_dir: &Path, captions: &Path) -> anyhow::Result<ForegroundPool> {
    let mut reader = csv::Reader::from_path(captions)
        .with_context(|| format!("reading {}", captions.display()))?;
    let headers = reader.headers()?.clone();
    let Some(name_col) = headers.iter().position(|h| h.trim() == "file_name") else {
        bail!(Failure::Config(format!(
            "{}: no file_name column",
            captions.display()
        )));
    };
    let caption_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.trim().starts_with("caption"))
        .map(|(i, _)| i)
        .collect();

    let mut clips = Vec::new();
    for record in reader.records() {
        let record = record?;
        let name = record.get(name_col).unwrap_or_default().trim().to_string();
        let captions: Vec<String> = caption_cols
            .iter()
            .filter_map(|&i| record.get(i))
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        let path = audio_dir.join(&name);
        if !path.is_file() {
            log::warn!("{}: not found, skipping", path.display());
            continue;
        }
        if !is_wav(&path) {
            log::warn!("{}: only WAV input is supported, skipping", path.display());
            continue;
        }
        if captions.is_empty() {
            log::warn!("{name}: no captions, skipping");
            continue;
        }
        clips.push(ForegroundClip {
            name,
            source: AudioSource::Wav(path),
            captions,
        });
    }
    Ok(ForegroundPool::new(clips)?)
}

/// WAV files in `dir`, sorted by name.
fn background_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        if is_wav(&path) {
            files.push(path);
        } else {
            log::warn!("{}: not a WAV file, skipping", path.display());
        }
    }
    files.sort();
    Ok(files)
}

pub fn run(args: &SimulateArgs, mut cfg: RunConfig) -> anyhow::Result<()> {
    let sim = &mut cfg.simulate;
    if let Some(v) = args.seed {
        sim.seed = v;
    }
    if let Some(v) = args.beta {
        sim.beta_s = v;
    }
    if let Some(v) = args.sample_rate {
        sim.sample_rate_hz = v;
    }
    if let Some(v) = args.segment_len {
        sim.segment_len_s = v;
    }
    if let Some(v) = args.bg_db {
        sim.bg_target_db = v;
    }
    sim.validate().map_err(|e| Failure::Config(e.to_string()))?;

    let fg = load_foreground(&args.fg_audio, &args.fg_captions)?;
    let files = background_files(&args.bg_audio)?;
    let mut segments = Vec::new();
    for path in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        segments.extend(segment_background(
            &name,
            &AudioSource::Wav(path.clone()),
            sim,
        )?);
    }
    let bg = BackgroundPool { segments };
    log::info!(
        "{} foreground clips, {} background segments from {} files",
        fg.len(),
        bg.len(),
        files.len()
    );

    let (_, summary) = generate_dataset(&fg, &bg, args.n, sim, &args.out, &args.id_prefix)?;
    log::info!(
        "{} items, {} moments, mean interval {:.2} s",
        summary.items,
        summary.moments,
        summary.mean_interval_s
    );
    write_json(
        &Report {
            out: &args.out,
            summary,
            backgrounds: files.len(),
            background_segments: bg.len(),
            foreground_clips: fg.len(),
        },
        None,
    )
}
