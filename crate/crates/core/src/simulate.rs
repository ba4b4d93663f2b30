//! Simulated moment-annotated long audio.
//!
//! Foreground clips (each with one or more captions) are trimmed of silent
//! onsets/offsets, normalized to unit RMS, jittered by a random gain and
//! overlaid onto a gain-calibrated background segment at exponentially
//! distributed intervals. Each placed clip becomes one `(caption, span)`
//! annotation. Moments never overlap: the next interval is drawn from the end
//! of the previous clip, and generation stops at the first clip that would
//! run past the end of the background.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hound::WavReader;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{self, Audio};
use crate::error::{Error, Result};
use crate::manifest::{self, AudioItem, MomentAnnotation};
use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Mean of the exponential gap between consecutive moments, seconds.
    pub beta_s: f64,
    /// Foreground gain range in dB relative to unit RMS.
    pub fg_gain_db_range: (f64, f64),
    /// Background level in dB relative to unit RMS.
    pub bg_target_db: f64,
    pub bg_gain_jitter_db: (f64, f64),
    /// Leading/trailing frames this many dB below the clip power are trimmed.
    pub trim_threshold_db: f64,
    pub trim_frame_ms: f64,
    pub segment_len_s: f64,
    pub segment_hop_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            beta_s: 30.0,
            fg_gain_db_range: (-5.0, 5.0),
            bg_target_db: -20.0,
            bg_gain_jitter_db: (-5.0, 5.0),
            trim_threshold_db: 20.0,
            trim_frame_ms: 50.0,
            segment_len_s: 60.0,
            segment_hop_s: 1.0,
            sample_rate_hz: 16_000,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(msg.to_string()))
            }
        };
        check(
            self.beta_s.is_finite() && self.beta_s >= 0.0,
            "beta_s must be >= 0",
        )?;
        check(
            self.trim_threshold_db.is_finite() && self.trim_threshold_db > 0.0,
            "trim_threshold_db must be > 0",
        )?;
        check(self.trim_frame_ms > 0.0, "trim_frame_ms must be > 0")?;
        check(self.segment_len_s > 0.0, "segment_len_s must be > 0")?;
        check(self.segment_hop_s > 0.0, "segment_hop_s must be > 0")?;
        check(self.sample_rate_hz > 0, "sample_rate_hz must be > 0")?;
        check(
            self.fg_gain_db_range.0 <= self.fg_gain_db_range.1,
            "fg_gain_db_range must be ordered",
        )?;
        check(
            self.bg_gain_jitter_db.0 <= self.bg_gain_jitter_db.1,
            "bg_gain_jitter_db must be ordered",
        )?;
        Ok(())
    }

    fn seconds_to_samples(&self, s: f64) -> usize {
        (s * f64::from(self.sample_rate_hz)).round() as usize
    }
}

/// Where a clip's samples come from. WAV sources are read on demand so that
/// hour-long backgrounds and large clip pools need not be held in memory.
#[derive(Debug, Clone)]
pub enum AudioSource {
    Memory(Arc<[f32]>),
    Wav(PathBuf),
}

impl AudioSource {
    pub fn from_samples(samples: Vec<f32>) -> Self {
        AudioSource::Memory(samples.into())
    }

    /// Length in samples; WAV sources must match `sample_rate`.
    pub fn len_samples(&self, sample_rate: u32) -> Result<usize> {
        match self {
            AudioSource::Memory(s) => Ok(s.len()),
            AudioSource::Wav(path) => {
                let reader = open_wav(path, sample_rate)?;
                Ok(reader.duration() as usize)
            }
        }
    }

    pub fn read_all(&self, sample_rate: u32) -> Result<Vec<f32>> {
        match self {
            AudioSource::Memory(s) => Ok(s.to_vec()),
            AudioSource::Wav(path) => {
                let a = audio::read_wav(path)?;
                check_rate(path, a.sample_rate, sample_rate)?;
                Ok(a.samples)
            }
        }
    }

    pub fn read_range(&self, range: Range<usize>, sample_rate: u32) -> Result<Vec<f32>> {
        match self {
            AudioSource::Memory(s) => s
                .get(range.clone())
                .map(<[f32]>::to_vec)
                .ok_or_else(|| Error::invalid(format!("range {range:?} out of bounds"))),
            AudioSource::Wav(path) => read_wav_range(path, range, sample_rate),
        }
    }
}

fn check_rate(path: &Path, found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::invalid(format!(
            "{}: sample rate {found} Hz, expected {expected} Hz",
            path.display()
        )));
    }
    Ok(())
}

fn open_wav(path: &Path, sample_rate: u32) -> Result<WavReader<std::io::BufReader<fs::File>>> {
    let reader = WavReader::open(path).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    check_rate(path, reader.spec().sample_rate, sample_rate)?;
    Ok(reader)
}

fn read_wav_range(path: &Path, range: Range<usize>, sample_rate: u32) -> Result<Vec<f32>> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = open_wav(path, sample_rate)?;
    if range.end > reader.duration() as usize {
        return Err(Error::invalid(format!(
            "{}: range {range:?} beyond {} samples",
            path.display(),
            reader.duration()
        )));
    }
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    reader
        .seek(range.start as u32)
        .map_err(|e| Error::io(path, e))?;
    let want = range.len() * channels;
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .take(want)
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .take(want)
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    Ok(if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|f| f.iter().sum::<f32>() / channels as f32)
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct ForegroundClip {
    pub name: String,
    pub source: AudioSource,
    pub captions: Vec<String>,
}

/// Query-foreground pairs to draw moments from.
#[derive(Debug, Clone)]
pub struct ForegroundPool {
    entries: Vec<ForegroundClip>,
}

impl ForegroundPool {
    pub fn new(entries: Vec<ForegroundClip>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("foreground pool is empty"));
        }
        for e in &entries {
            if e.captions.iter().all(|c| c.trim().is_empty()) {
                return Err(Error::invalid(format!("clip {} has no caption", e.name)));
            }
        }
        Ok(ForegroundPool { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ForegroundClip] {
        &self.entries
    }

    /// Loads clip `index`, trims silent ends and normalizes it to unit RMS.
    pub fn prepared_clip(&self, index: usize, cfg: &SimulationConfig) -> Result<Vec<f32>> {
        let entry = &self.entries[index];
        let raw = entry.source.read_all(cfg.sample_rate_hz)?;
        if raw.is_empty() {
            return Err(Error::invalid(format!("clip {} is empty", entry.name)));
        }
        let kept = trim_silence_range(&raw, cfg);
        let gained = apply_gain_to_power(&raw[kept], 0.0);
        if gained.silent {
            return Err(Error::invalid(format!("clip {} is silent", entry.name)));
        }
        Ok(gained.samples)
    }
}

/// A window of a long background recording.
#[derive(Debug, Clone)]
pub struct BackgroundSegment {
    pub name: String,
    pub source: AudioSource,
    pub offset: usize,
    pub len: usize,
}

impl BackgroundSegment {
    pub fn read(&self, sample_rate: u32) -> Result<Vec<f32>> {
        self.source
            .read_range(self.offset..self.offset + self.len, sample_rate)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BackgroundPool {
    pub segments: Vec<BackgroundSegment>,
}

impl BackgroundPool {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Cuts a long recording into `segment_len_s` windows every `segment_hop_s`.
/// Audio shorter than one window yields no segments and a warning.
pub fn segment_background(
    name: &str,
    source: &AudioSource,
    cfg: &SimulationConfig,
) -> Result<Vec<BackgroundSegment>> {
    let total = source.len_samples(cfg.sample_rate_hz)?;
    let len = cfg.seconds_to_samples(cfg.segment_len_s);
    let hop = cfg.seconds_to_samples(cfg.segment_hop_s).max(1);
    if total < len || len == 0 {
        log::warn!(
            "{name}: {:.2} s is shorter than one {:.2} s segment",
            total as f64 / f64::from(cfg.sample_rate_hz),
            cfg.segment_len_s
        );
        return Ok(Vec::new());
    }
    let count = (total - len) / hop + 1;
    Ok((0..count)
        .map(|i| BackgroundSegment {
            name: format!("{name}@{}", i * hop),
            source: source.clone(),
            offset: i * hop,
            len,
        })
        .collect())
}

/// Sample range kept after removing quiet leading and trailing frames.
///
/// A frame is quiet when its mean power is more than `trim_threshold_db`
/// below the mean power of the whole clip. Interior frames are never
/// removed; a clip with no loud frame is returned whole.
pub fn trim_silence_range(x: &[f32], cfg: &SimulationConfig) -> Range<usize> {
    let full = 0..x.len();
    let overall = audio::mean_power(x);
    if x.is_empty() || overall <= 0.0 {
        return full;
    }
    let floor = overall * 10f64.powf(-cfg.trim_threshold_db / 10.0);
    let frame =
        ((cfg.trim_frame_ms * 1e-3 * f64::from(cfg.sample_rate_hz)).round() as usize).max(1);
    let loud = |chunk: &[f32]| audio::mean_power(chunk) >= floor;

    let frames: Vec<&[f32]> = x.chunks(frame).collect();
    let Some(first) = frames.iter().position(|c| loud(c)) else {
        return full;
    };
    let last = frames.iter().rposition(|c| loud(c)).unwrap_or(first);
    first * frame..((last + 1) * frame).min(x.len())
}

/// [`trim_silence_range`] expressed in seconds within the clip.
pub fn trim_silence(x: &[f32], cfg: &SimulationConfig) -> Span {
    let r = trim_silence_range(x, cfg);
    let sr = f64::from(cfg.sample_rate_hz);
    Span {
        start_s: r.start as f64 / sr,
        end_s: r.end as f64 / sr,
    }
}

/// Draws an exponential interval with mean `beta_s` by inverting the CDF.
pub fn sample_interval<R: Rng + ?Sized>(rng: &mut R, beta_s: f64) -> f64 {
    let u: f64 = rng.random();
    (1.0 - u).ln().abs() * beta_s
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainOutcome {
    pub samples: Vec<f32>,
    /// Set when the input had no energy and was returned unchanged.
    pub silent: bool,
}

/// Scales `x` so its RMS equals `target_db` relative to unit RMS.
pub fn apply_gain_to_power(x: &[f32], target_db: f64) -> GainOutcome {
    let level = audio::rms(x);
    if level <= 0.0 || !level.is_finite() {
        log::warn!("gain requested on a signal with no energy; left unchanged");
        return GainOutcome {
            samples: x.to_vec(),
            silent: true,
        };
    }
    let scale = audio::db_to_amplitude(target_db) / level;
    GainOutcome {
        samples: x.iter().map(|&v| (f64::from(v) * scale) as f32).collect(),
        silent: false,
    }
}

/// Record of one clip placed into the mix.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub clip_index: usize,
    pub caption_index: usize,
    pub gain_db: f64,
    pub start_sample: usize,
    pub len_samples: usize,
}

#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub mix: Vec<f32>,
    /// The gain-calibrated background alone; `mix - background` is exactly
    /// the sum of placed foregrounds.
    pub background: Vec<f32>,
    pub background_gain_db: f64,
    pub annotations: Vec<MomentAnnotation>,
    pub placements: Vec<Placement>,
    /// Every interval drawn, including the one that ended generation.
    pub intervals: Vec<f64>,
}

impl GeneratedSample {
    pub fn duration_s(&self, sample_rate: u32) -> f64 {
        self.mix.len() as f64 / f64::from(sample_rate)
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Generates one long-audio sample by overlaying foreground clips on `bg`.
pub fn generate_sample<R: Rng + ?Sized>(
    bg: &[f32],
    pool: &ForegroundPool,
    cfg: &SimulationConfig,
    rng: &mut R,
) -> Result<GeneratedSample> {
    if pool.is_empty() {
        return Err(Error::invalid("foreground pool is empty"));
    }
    let sr = f64::from(cfg.sample_rate_hz);
    let background_gain_db = cfg.bg_target_db + uniform(rng, cfg.bg_gain_jitter_db);
    let background = apply_gain_to_power(bg, background_gain_db).samples;
    let mut mix = background.clone();
    let n = mix.len();

    let mut annotations = Vec::new();
    let mut placements = Vec::new();
    let mut intervals = Vec::new();
    let mut t = 0.0f64;
    loop {
        let d = sample_interval(rng, cfg.beta_s);
        intervals.push(d);
        let clip_index = rng.random_range(0..pool.len());
        let entry = &pool.entries()[clip_index];
        let caption_index = rng.random_range(0..entry.captions.len());
        let clip = pool.prepared_clip(clip_index, cfg)?;

        // Moments start on the sample grid so spans and samples agree exactly.
        let start_sample = ((t + d) * sr).round() as usize;
        let end_sample = start_sample.saturating_add(clip.len());
        if end_sample > n {
            break;
        }
        let gain_db = uniform(rng, cfg.fg_gain_db_range);
        let g = audio::db_to_amplitude(gain_db);
        for (m, &c) in mix[start_sample..end_sample].iter_mut().zip(&clip) {
            *m += (f64::from(c) * g) as f32;
        }
        let span = Span {
            start_s: start_sample as f64 / sr,
            end_s: end_sample as f64 / sr,
        };
        annotations.push(MomentAnnotation {
            query: entry.captions[caption_index].clone(),
            span,
        });
        placements.push(Placement {
            clip_index,
            caption_index,
            gain_db,
            start_sample,
            len_samples: clip.len(),
        });
        t = span.end_s;
    }

    Ok(GeneratedSample {
        mix,
        background,
        background_gain_db,
        annotations,
        placements,
        intervals,
    })
}

/// Per-item seed: a splitmix64 finalizer applied to `seed` xor the mixed
/// item index, so any item can be regenerated independently.
pub fn item_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generated item together with the background segment it was built on.
#[derive(Debug, Clone)]
pub struct GeneratedItem {
    pub index: usize,
    pub background_index: usize,
    pub sample: GeneratedSample,
}

/// Deterministically generates item `index` of a dataset.
pub fn generate_item(
    index: usize,
    fg: &ForegroundPool,
    bg: &BackgroundPool,
    cfg: &SimulationConfig,
) -> Result<GeneratedItem> {
    if bg.is_empty() {
        return Err(Error::invalid("background pool is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed(cfg.seed, index as u64));
    let background_index = rng.random_range(0..bg.len());
    let samples = bg.segments[background_index].read(cfg.sample_rate_hz)?;
    let sample = generate_sample(&samples, fg, cfg, &mut rng)?;
    Ok(GeneratedItem {
        index,
        background_index,
        sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub items: usize,
    pub moments: usize,
    pub mean_moments_per_item: f64,
    /// Mean of all interval draws; estimates `beta_s`.
    pub mean_interval_s: f64,
    pub interval_draws: usize,
}

/// Generates `n_items` items, writing `audio/<id>.wav` files and
/// `manifest.jsonl` under `out_dir`.
pub fn generate_dataset(
    fg: &ForegroundPool,
    bg: &BackgroundPool,
    n_items: usize,
    cfg: &SimulationConfig,
    out_dir: &Path,
    id_prefix: &str,
) -> Result<(Vec<AudioItem>, DatasetSummary)> {
    cfg.validate()?;
    if n_items > 0 && bg.is_empty() {
        return Err(Error::invalid("background pool is empty"));
    }
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let produced: Vec<(AudioItem, Vec<f64>)> = (0..n_items)
        .into_par_iter()
        .map(|index| {
            let wrap = |e: Error| Error::Item {
                index,
                source: Box::new(e),
            };
            let item = generate_item(index, fg, bg, cfg).map_err(wrap)?;
            let audio_id = format!("{id_prefix}{index:06}");
            let rel = format!("audio/{audio_id}.wav");
            let wav = Audio {
                sample_rate: cfg.sample_rate_hz,
                samples: item.sample.mix,
            };
            audio::write_wav(out_dir.join(&rel), &wav).map_err(wrap)?;
            let row = AudioItem {
                audio_id,
                audio_path: rel,
                duration_s: wav.duration_s(),
                annotations: item.sample.annotations,
            };
            Ok((row, item.sample.intervals))
        })
        .collect::<Result<_>>()?;

    let mut items = Vec::with_capacity(produced.len());
    let mut draws = 0usize;
    let mut draw_sum = 0.0;
    for (row, intervals) in produced {
        draws += intervals.len();
        draw_sum += intervals.iter().sum::<f64>();
        items.push(row);
    }
    manifest::write_manifest(&items, out_dir.join("manifest.jsonl"))?;

    let moments: usize = items.iter().map(|i| i.annotations.len()).sum();
    let summary = DatasetSummary {
        items: items.len(),
        moments,
        mean_moments_per_item: if items.is_empty() {
            0.0
        } else {
            moments as f64 / items.len() as f64
        },
        mean_interval_s: if draws == 0 {
            0.0
        } else {
            draw_sum / draws as f64
        },
        interval_draws: draws,
    };
    Ok((items, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sr: u32) -> SimulationConfig {
        SimulationConfig {
            sample_rate_hz: sr,
            ..Default::default()
        }
    }

    fn tone(sr: u32, secs: f64, amp: f32) -> Vec<f32> {
        let n = (secs * f64::from(sr)).round() as usize;
        (0..n)
            .map(|i| amp * (2.0 * std::f32::consts::PI * 440.0 * i as f32 / sr as f32).sin())
            .collect()
    }

    #[test]
    fn trim_keeps_constant_tone() {
        let c = cfg(16_000);
        let x = tone(16_000, 2.0, 0.5);
        assert_eq!(trim_silence_range(&x, &c), 0..x.len());
        assert_eq!(
            trim_silence(&x, &c),
            Span {
                start_s: 0.0,
                end_s: 2.0
            }
        );
    }

    // Independent oracle: the first/last sample whose neighbourhood holds
    // energy, found by a direct scan of the constructed signal.
    fn first_nonzero(x: &[f32]) -> usize {
        x.iter().position(|&v| v != 0.0).unwrap()
    }

    #[test]
    fn trim_removes_leading_zeros() {
        let c = cfg(16_000);
        let mut x = vec![0.0; 16_000];
        x.extend(tone(16_000, 2.0, 0.5));
        let onset = first_nonzero(&x) as f64 / 16_000.0;
        let kept = trim_silence(&x, &c);
        let frame = c.trim_frame_ms * 1e-3;
        assert!((kept.start_s - 1.0).abs() <= frame, "{kept:?}");
        assert!((kept.start_s - onset).abs() <= frame);
        assert!((kept.end_s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn trim_removes_trailing_zeros() {
        let c = cfg(16_000);
        let mut x = tone(16_000, 2.0, 0.5);
        x.extend(vec![0.0; 16_000]);
        let kept = trim_silence(&x, &c);
        assert_eq!(kept.start_s, 0.0);
        assert!((kept.end_s - 2.0).abs() <= c.trim_frame_ms * 1e-3);
    }

    #[test]
    fn trim_never_touches_interior_gap() {
        let c = cfg(8000);
        let mut x = tone(8000, 1.0, 0.5);
        x.extend(vec![0.0; 8000]);
        x.extend(tone(8000, 1.0, 0.5));
        assert_eq!(trim_silence_range(&x, &c), 0..x.len());
    }

    #[test]
    fn trim_uniformly_quiet_is_whole_clip() {
        let c = cfg(8000);
        let x = vec![0.0; 1000];
        assert_eq!(trim_silence_range(&x, &c), 0..1000);
        let x = vec![1e-6; 1000];
        assert_eq!(trim_silence_range(&x, &c), 0..1000);
    }

    #[test]
    fn interval_degenerate_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_interval(&mut rng, 0.0), 0.0);
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let xa: Vec<f64> = (0..50).map(|_| sample_interval(&mut a, 30.0)).collect();
        let xb: Vec<f64> = (0..50).map(|_| sample_interval(&mut b, 30.0)).collect();
        assert_eq!(xa, xb);
        assert!(xa.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn interval_mean_matches_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_interval(&mut rng, 30.0)).sum::<f64>() / n as f64;
        assert!((mean - 30.0).abs() <= 0.3, "mean {mean}");
    }

    #[test]
    fn gain_examples() {
        let unit: Vec<f32> = vec![1.0, -1.0, 1.0, -1.0];
        let out = apply_gain_to_power(&unit, 0.0);
        assert_eq!(out.samples, unit);
        let out = apply_gain_to_power(&unit, -20.0);
        assert!((audio::rms(&out.samples) - 0.1).abs() < 1e-7);
        let out = apply_gain_to_power(&unit, 5.0);
        assert!((audio::rms(&out.samples) - 10f64.powf(0.25)).abs() < 1e-6);
        let x = tone(8000, 0.5, 0.123);
        let out = apply_gain_to_power(&x, -7.5);
        assert!((audio::amplitude_to_db(audio::rms(&out.samples)) + 7.5).abs() < 0.01);
    }

    #[test]
    fn gain_on_silence_is_flagged() {
        let out = apply_gain_to_power(&[0.0; 16], 3.0);
        assert!(out.silent);
        assert_eq!(out.samples, vec![0.0; 16]);
    }

    #[test]
    fn segment_counts() {
        let c = SimulationConfig {
            sample_rate_hz: 100,
            ..Default::default()
        };
        let count = |secs: usize| {
            let src = AudioSource::from_samples(vec![0.1; secs * 100]);
            segment_background("bg", &src, &c).unwrap()
        };
        let segs = count(62);
        assert_eq!(segs.len(), 3);
        assert_eq!(
            segs.iter().map(|s| s.offset).collect::<Vec<_>>(),
            vec![0, 100, 200]
        );
        assert!(segs.iter().all(|s| s.len == 6000));
        assert_eq!(count(60).len(), 1);
        assert_eq!(count(59).len(), 0);
    }

    fn fixed_pool(sr: u32, secs: f64) -> ForegroundPool {
        ForegroundPool::new(vec![ForegroundClip {
            name: "clip".into(),
            source: AudioSource::from_samples(tone(sr, secs, 0.3)),
            captions: vec!["a steady whistle".into()],
        }])
        .unwrap()
    }

    #[test]
    fn zero_beta_packs_clips_back_to_back() {
        let sr = 200;
        let c = SimulationConfig {
            beta_s: 0.0,
            sample_rate_hz: sr,
            ..Default::default()
        };
        let bg = vec![0.05f32; 60 * sr as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate_sample(&bg, &fixed_pool(sr, 10.0), &c, &mut rng).unwrap();
        let spans: Vec<(f64, f64)> = s
            .annotations
            .iter()
            .map(|a| (a.span.start_s, a.span.end_s))
            .collect();
        let expected: Vec<(f64, f64)> = (0..6)
            .map(|i| (10.0 * i as f64, 10.0 * (i + 1) as f64))
            .collect();
        assert_eq!(spans, expected);
        // The seventh draw would end at 70 s and stops the loop.
        assert_eq!(s.intervals.len(), 7);
    }

    #[test]
    fn clip_longer_than_background_places_nothing() {
        let sr = 100;
        let c = SimulationConfig {
            sample_rate_hz: sr,
            ..Default::default()
        };
        let bg = vec![0.05f32; 5 * sr as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = generate_sample(&bg, &fixed_pool(sr, 10.0), &c, &mut rng).unwrap();
        assert!(s.annotations.is_empty());
        assert_eq!(s.mix, s.background);
    }

    #[test]
    fn mix_minus_background_recovers_scaled_clip() {
        let sr = 400;
        let c = SimulationConfig {
            beta_s: 5.0,
            sample_rate_hz: sr,
            ..Default::default()
        };
        let pool = fixed_pool(sr, 8.0);
        let bg: Vec<f32> = (0..60 * sr as usize)
            .map(|i| ((i * 7919 % 1000) as f32 / 500.0) - 1.0)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let s = generate_sample(&bg, &pool, &c, &mut rng).unwrap();
        assert!(!s.placements.is_empty());
        let clip = pool.prepared_clip(0, &c).unwrap();
        for p in &s.placements {
            let g = audio::db_to_amplitude(p.gain_db);
            let r = p.start_sample..p.start_sample + p.len_samples;
            let err: Vec<f32> = s.mix[r.clone()]
                .iter()
                .zip(&s.background[r])
                .zip(&clip)
                .map(|((m, b), c)| (m - b) - (f64::from(*c) * g) as f32)
                .collect();
            assert!(audio::rms(&err) < 1e-6);
        }
        let bg_db = audio::amplitude_to_db(audio::rms(&s.background));
        assert!((bg_db - s.background_gain_db).abs() < 0.01);
        assert!((-25.0..=-15.0).contains(&s.background_gain_db));
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(ForegroundPool::new(vec![]).is_err());
        let no_caption = ForegroundClip {
            name: "x".into(),
            source: AudioSource::from_samples(vec![0.1; 10]),
            captions: vec![" ".into()],
        };
        assert!(ForegroundPool::new(vec![no_caption]).is_err());
    }

    #[test]
    fn item_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| item_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(item_seed(5, 0), item_seed(6, 0));
    }

    #[test]
    fn wav_source_reads_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bg.wav");
        let samples: Vec<f32> = (0..500).map(|i| i as f32 / 500.0).collect();
        audio::write_wav(
            &path,
            &Audio {
                sample_rate: 100,
                samples: samples.clone(),
            },
        )
        .unwrap();
        let src = AudioSource::Wav(path);
        assert_eq!(src.len_samples(100).unwrap(), 500);
        assert_eq!(
            src.read_range(120..180, 100).unwrap(),
            samples[120..180].to_vec()
        );
        assert!(src.read_range(450..520, 100).is_err());
        assert!(src.len_samples(44_100).is_err());
    }
}
