use std::path::PathBuf;

use amr_core::baseline::{retrieve, retrieve_within, similarity_curve, BaselineConfig};
use amr_core::embeddings::{
    audio_store_path, cosine, query_key, query_store_path, read_store, write_store, EmbeddingStore,
    MockEmbedder, MockWorldSpec, StoreKind,
};
use amr_core::manifest::{AudioItem, MomentAnnotation};
use amr_core::span::Span;
use proptest::prelude::*;
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/store")
        .join(name)
}

#[derive(Deserialize)]
struct GoldenValues {
    audio_values: Vec<f64>,
    text_values: Vec<f64>,
    cosines: Vec<f64>,
    query: String,
    query_key: String,
}

#[test]
fn externally_written_store_loads() {
    let g: GoldenValues =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden_values.json")).unwrap())
            .unwrap();
    let audio = read_store(fixture("audio_golden.emb")).unwrap();
    assert_eq!((audio.rows(), audio.dim()), (6, 5));
    assert_eq!(audio.kind, StoreKind::AudioWindows);
    assert_eq!((audio.window_s, audio.hop_s), (4.0, 1.0));
    assert_eq!(audio.model.as_deref(), Some("golden-encoder-v1"));
    let values: Vec<f64> = audio.as_slice().iter().map(|&v| f64::from(v)).collect();
    assert_eq!(values, g.audio_values);

    let text = read_store(fixture("text_golden.emb")).unwrap();
    assert_eq!(text.kind, StoreKind::TextQuery);
    assert_eq!(
        text.row(0)
            .iter()
            .map(|&v| f64::from(v))
            .collect::<Vec<_>>(),
        g.text_values
    );

    let sims = similarity_curve(&audio, &text).unwrap();
    for (s, e) in sims.iter().zip(&g.cosines) {
        assert!((s - e).abs() < 1e-12, "{s} vs {e}");
    }
    assert_eq!(query_key(&g.query), g.query_key);
}

#[test]
fn rewritten_store_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let audio = read_store(fixture("audio_golden.emb")).unwrap();
    let out = dir.path().join("copy.emb");
    write_store(&audio, &out).unwrap();
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(fixture("audio_golden.emb")).unwrap()
    );
    assert_eq!(read_store(&out).unwrap(), audio);
}

#[test]
fn layout_paths() {
    let dir = std::path::Path::new("/data/emb");
    assert_eq!(
        audio_store_path(dir, "sim000003"),
        PathBuf::from("/data/emb/audio/sim000003.emb")
    );
    let q = query_store_path(dir, "birds chirping");
    assert_eq!(q.parent().unwrap(), dir.join("text"));
    assert_eq!(
        q.file_name().unwrap().to_str().unwrap(),
        format!("{}.emb", query_key("birds chirping"))
    );
    assert_eq!(
        query_key("abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}

fn item(events: &[(&str, f64, f64)], duration_s: f64) -> AudioItem {
    let mut annotations: Vec<MomentAnnotation> = events
        .iter()
        .map(|&(q, s, e)| MomentAnnotation {
            query: q.to_string(),
            span: Span::new(s, e).unwrap(),
        })
        .collect();
    annotations.sort_by(|a, b| a.span.start_s.total_cmp(&b.span.start_s));
    AudioItem {
        audio_id: "item".into(),
        audio_path: String::new(),
        duration_s,
        annotations,
    }
}

#[test]
fn lone_event_recovered_by_noise_free_mock() {
    let it = item(&[("rain on a tin roof", 17.0, 37.0)], 60.0);
    let world = MockEmbedder::new(MockWorldSpec::default(), std::slice::from_ref(&it)).unwrap();
    let audio = world.embed_audio(&it, 1.0, 1.0).unwrap();
    assert_eq!(audio.rows(), 60);
    let q = world.embed_query("rain on a tin roof").unwrap();
    let cfg = BaselineConfig::default();
    let out = retrieve(&audio, &q, &cfg).unwrap();
    assert_eq!(out.len(), 1);
    assert!((out[0].span.start_s - 17.0).abs() <= 1.0 && (out[0].span.end_s - 37.0).abs() <= 1.0);
    assert_eq!(out[0].confidence, 1.0);
}

#[test]
fn background_windows_stay_dissimilar() {
    let it = item(&[("thunder", 20.0, 30.0)], 300.0);
    let world = MockEmbedder::new(
        MockWorldSpec {
            seed: 5,
            ..Default::default()
        },
        std::slice::from_ref(&it),
    )
    .unwrap();
    let audio = world.embed_audio(&it, 1.0, 1.0).unwrap();
    let q = world.embed_query("thunder").unwrap();
    let bound = 3.0 / (128f64).sqrt();
    let sims = similarity_curve(&audio, &q).unwrap();
    let outside: Vec<f64> = sims
        .iter()
        .enumerate()
        .filter(|(i, _)| !(19..31).contains(i))
        .map(|(_, &s)| s)
        .collect();
    let within = outside.iter().filter(|s| s.abs() <= bound).count();
    assert!(
        within as f64 >= 0.98 * outside.len() as f64,
        "{within}/{}",
        outside.len()
    );
    assert!(outside.iter().all(|s| s.abs() < 0.5));
    assert!(sims[20..30].iter().all(|&s| s == 1.0));
    assert!(world.embed_query("lightning").is_err());
}

#[test]
fn mock_is_deterministic_and_seed_sensitive() {
    let it = item(&[("a", 2.0, 14.0), ("b", 10.0, 30.0)], 40.0);
    let spec = MockWorldSpec {
        noise_sigma: 0.3,
        seed: 1,
        ..Default::default()
    };
    let a = MockEmbedder::new(spec.clone(), std::slice::from_ref(&it))
        .unwrap()
        .embed_audio(&it, 4.0, 1.0)
        .unwrap();
    let b = MockEmbedder::new(spec, std::slice::from_ref(&it))
        .unwrap()
        .embed_audio(&it, 4.0, 1.0)
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows(), 37);
    let c = MockEmbedder::new(
        MockWorldSpec {
            noise_sigma: 0.3,
            seed: 2,
            ..Default::default()
        },
        std::slice::from_ref(&it),
    )
    .unwrap()
    .embed_audio(&it, 4.0, 1.0)
    .unwrap();
    assert_ne!(a, c);
}

#[test]
fn retrieval_clips_to_explicit_duration() {
    let store = EmbeddingStore::new(
        2,
        vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        7.0,
        1.0,
        StoreKind::AudioWindows,
    )
    .unwrap();
    let q = EmbeddingStore::text_query(vec![1.0, 0.0]).unwrap();
    let cfg = BaselineConfig {
        window_s: 7.0,
        ..Default::default()
    };
    let out = retrieve_within(&store, &q, &cfg, 8.2).unwrap();
    assert_eq!((out[0].span.start_s, out[0].span.end_s), (1.0, 8.2));
}

proptest! {
    #[test]
    fn store_round_trip_is_bit_exact(rows in 1usize..6, dim in 1usize..9, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..rows * dim).map(|_| rng.random_range(-1e3f32..1e3)).collect();
        let store = EmbeddingStore::new(dim, data, 1.0, 0.5, StoreKind::AudioWindows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.emb");
        write_store(&store, &path).unwrap();
        let back = read_store(&path).unwrap();
        prop_assert_eq!(
            back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            store.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(back, store);
    }

    #[test]
    fn cosine_is_scale_invariant(a in proptest::collection::vec(-5.0f32..5.0, 4), s in 0.1f32..10.0) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
        let b: Vec<f32> = a.iter().map(|v| v * s).collect();
        prop_assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-6);
    }
}
