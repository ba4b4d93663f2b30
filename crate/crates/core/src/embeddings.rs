//! Embedding stores, window pooling, cosine similarity and a deterministic
//! mock embedder.
//!
//! A store is a file pair: `NAME.emb` holds `rows × dim` little-endian f32
//! values in row-major order and `NAME.emb.json` is a sidecar
//! `{"dim":D,"rows":L,"window_s":w,"hop_s":h,"kind":"audio-windows"}`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifest::AudioItem;

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoreKind {
    #[serde(rename = "audio-windows")]
    AudioWindows,
    #[serde(rename = "text-query")]
    TextQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    rows: usize,
    #[serde(default)]
    window_s: f64,
    #[serde(default = "default_hop")]
    hop_s: f64,
    kind: StoreKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
}

fn default_hop() -> f64 {
    1.0
}

/// Row-major matrix of embeddings with window metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    data: Vec<f32>,
    pub window_s: f64,
    pub hop_s: f64,
    pub kind: StoreKind,
    /// Encoder identifier recorded by exporters, if any.
    pub model: Option<String>,
}

impl EmbeddingStore {
    pub fn new(
        dim: usize,
        data: Vec<f32>,
        window_s: f64,
        hop_s: f64,
        kind: StoreKind,
    ) -> Result<Self> {
        let store = EmbeddingStore {
            dim,
            data,
            window_s,
            hop_s,
            kind,
            model: None,
        };
        store.validate()?;
        Ok(store)
    }

    /// A single pooled query vector.
    pub fn text_query(vector: Vec<f32>) -> Result<Self> {
        let dim = vector.len();
        Self::new(dim, vector, 0.0, 1.0, StoreKind::TextQuery)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("embedding dim must be positive"));
        }
        if !self.data.len().is_multiple_of(self.dim) {
            return Err(Error::invalid(format!(
                "{} values do not form rows of dim {}",
                self.data.len(),
                self.dim
            )));
        }
        if self.hop_s.is_nan() || self.hop_s <= 0.0 {
            return Err(Error::invalid(format!(
                "hop_s must be > 0, got {}",
                self.hop_s
            )));
        }
        if self.kind == StoreKind::TextQuery && self.rows() != 1 {
            return Err(Error::invalid(format!(
                "text-query store must have 1 row, got {}",
                self.rows()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {}",
                i / self.dim
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Seconds spanned from the first window start to the last window end.
    pub fn covered_duration(&self) -> f64 {
        match self.rows() {
            0 => 0.0,
            n => (n - 1) as f64 * self.hop_s + self.window_s,
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` (raw f32) and `path.json` (sidecar).
pub fn write_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let bytes: Vec<u8> = store.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        dim: store.dim,
        rows: store.rows(),
        window_s: store.window_s,
        hop_s: store.hop_s,
        kind: store.kind,
        model: store.model.clone(),
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_vec(&sidecar)?).map_err(|e| Error::io(&side, e))
}

pub fn read_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let store_err = |reason: String| Error::Store {
        path: path.to_path_buf(),
        reason,
    };
    let meta_bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar =
        serde_json::from_slice(&meta_bytes).map_err(|e| store_err(format!("sidecar: {e}")))?;
    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = meta.rows * meta.dim * 4;
    if payload.len() != expected {
        return Err(store_err(format!(
            "expected rows·dim·4 = {}·{}·4 = {expected} bytes, found {}",
            meta.rows,
            meta.dim,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut store = EmbeddingStore::new(meta.dim, data, meta.window_s, meta.hop_s, meta.kind)
        .map_err(|e| store_err(e.to_string()))?;
    store.model = meta.model;
    Ok(store)
}

/// Lowercase hex SHA-256 of the query text; names query store files.
pub fn query_key(query: &str) -> String {
    Sha256::digest(query.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `DIR/audio/<audio_id>.emb`
pub fn audio_store_path(dir: &Path, audio_id: &str) -> PathBuf {
    dir.join("audio").join(format!("{audio_id}.emb"))
}

/// `DIR/text/<sha256(query)>.emb`
pub fn query_store_path(dir: &Path, query: &str) -> PathBuf {
    dir.join("text").join(format!("{}.emb", query_key(query)))
}

/// Arithmetic mean over frames.
pub fn mean_pool(frames: &[Vec<f32>]) -> Result<Vec<f32>> {
    let Some(first) = frames.first() else {
        return Err(Error::invalid("cannot pool zero frames"));
    };
    let dim = first.len();
    let mut acc = vec![0.0f64; dim];
    for f in frames {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: f.len(),
            });
        }
        for (a, &v) in acc.iter_mut().zip(f) {
            *a += f64::from(v);
        }
    }
    let n = frames.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}

/// Cosine similarity computed in f64, clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine of a zero vector"));
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Parameters of the synthetic embedding world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockWorldSpec {
    pub dim: usize,
    /// Noise scale relative to the unit-norm signal; each component gets
    /// `N(0, σ²/dim)` so the noise vector has norm ≈ σ.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for MockWorldSpec {
    fn default() -> Self {
        MockWorldSpec {
            dim: 128,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Deterministic embedder driven by annotations instead of audio.
///
/// Every label (query text) maps to a seeded random unit vector. A window's
/// embedding is the normalized sum of the vectors of events covering its
/// midpoint, or a fresh random unit vector when no event does, plus noise.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    spec: MockWorldSpec,
    labels: BTreeSet<String>,
}

impl MockEmbedder {
    pub fn new(spec: MockWorldSpec, items: &[AudioItem]) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::invalid("mock dim must be positive"));
        }
        if spec.noise_sigma.is_nan() || spec.noise_sigma < 0.0 {
            return Err(Error::invalid("noise_sigma must be >= 0"));
        }
        let labels = items
            .iter()
            .flat_map(|i| i.annotations.iter().map(|a| a.query.clone()))
            .collect();
        Ok(MockEmbedder { spec, labels })
    }

    pub fn spec(&self) -> &MockWorldSpec {
        &self.spec
    }

    fn rng(&self, parts: &[&[u8]]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.spec.seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    fn unit_vector(&self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let raw: Vec<f64> = (0..self.spec.dim)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.iter().map(|v| (v / norm) as f32).collect()
    }

    pub fn label_vector(&self, label: &str) -> Result<Vec<f32>> {
        if !self.labels.contains(label) {
            return Err(Error::invalid(format!("unknown label {label:?}")));
        }
        Ok(self.unit_vector(&mut self.rng(&[b"label", label.as_bytes()])))
    }

    pub fn embed_query(&self, query: &str) -> Result<EmbeddingStore> {
        EmbeddingStore::text_query(self.label_vector(query)?)
    }

    /// Window starts `0, hop, 2·hop, …` while the window fits in the item.
    pub fn window_count(duration_s: f64, window_s: f64, hop_s: f64) -> usize {
        if duration_s + 1e-9 < window_s {
            return 0;
        }
        ((duration_s - window_s) / hop_s + 1e-9).floor() as usize + 1
    }

    pub fn embed_audio(
        &self,
        item: &AudioItem,
        window_s: f64,
        hop_s: f64,
    ) -> Result<EmbeddingStore> {
        if !(window_s > 0.0 && hop_s > 0.0) {
            return Err(Error::invalid("window_s and hop_s must be > 0"));
        }
        let rows = Self::window_count(item.duration_s, window_s, hop_s);
        if rows == 0 {
            return Err(Error::invalid(format!(
                "{}: {} s is shorter than one {window_s} s window",
                item.audio_id, item.duration_s
            )));
        }
        let dim = self.spec.dim;
        let noise_scale = self.spec.noise_sigma / (dim as f64).sqrt();
        let mut data = Vec::with_capacity(rows * dim);
        for i in 0..rows {
            let mid = i as f64 * hop_s + 0.5 * window_s;
            let mut rng = self.rng(&[
                b"window",
                item.audio_id.as_bytes(),
                &(i as u64).to_le_bytes(),
            ]);
            let active: Vec<&str> = item
                .annotations
                .iter()
                .filter(|a| a.span.covers(mid))
                .map(|a| a.query.as_str())
                .collect();
            let mut row = match active.as_slice() {
                [] => self.unit_vector(&mut rng),
                [one] => self.label_vector(one)?,
                many => {
                    let mut sum = vec![0.0f64; dim];
                    for label in many {
                        for (s, v) in sum.iter_mut().zip(self.label_vector(label)?) {
                            *s += f64::from(v);
                        }
                    }
                    let norm = sum
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                        .sqrt()
                        .max(f64::MIN_POSITIVE);
                    sum.iter().map(|v| (v / norm) as f32).collect()
                }
            };
            if noise_scale > 0.0 {
                for v in row.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *v = (f64::from(*v) + noise_scale * n) as f32;
                }
            }
            data.extend(row);
        }
        EmbeddingStore::new(dim, data, window_s, hop_s, StoreKind::AudioWindows)
    }
}
