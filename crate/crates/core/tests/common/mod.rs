#![allow(dead_code)]

use amr_core::simulate::{
    segment_background, AudioSource, BackgroundPool, ForegroundClip, ForegroundPool,
    SimulationConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense pseudo-random noise with no silent frames.
pub fn noise(len: usize, amp: f32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| amp * rng.random_range(-1.0f32..1.0))
        .collect()
}

pub fn config(sample_rate_hz: u32, seed: u64) -> SimulationConfig {
    SimulationConfig {
        sample_rate_hz,
        seed,
        ..Default::default()
    }
}

/// Clips of the given lengths, each with two captions unique to the clip.
pub fn foreground(cfg: &SimulationConfig, lengths_s: &[f64]) -> ForegroundPool {
    let sr = f64::from(cfg.sample_rate_hz);
    let clips = lengths_s
        .iter()
        .enumerate()
        .map(|(i, &secs)| ForegroundClip {
            name: format!("clip{i}"),
            source: AudioSource::from_samples(noise(
                (secs * sr).round() as usize,
                0.3,
                100 + i as u64,
            )),
            captions: vec![
                format!("event {i} variant a"),
                format!("event {i} variant b"),
            ],
        })
        .collect();
    ForegroundPool::new(clips).unwrap()
}

/// One long noise recording cut into 60 s segments.
pub fn background(cfg: &SimulationConfig, total_s: f64) -> BackgroundPool {
    let n = (total_s * f64::from(cfg.sample_rate_hz)).round() as usize;
    let source = AudioSource::from_samples(noise(n, 0.05, 7));
    BackgroundPool {
        segments: segment_background("ambience", &source, cfg).unwrap(),
    }
}
