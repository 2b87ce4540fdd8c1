use proptest::prelude::*;
use ragcap::embed_store::{
    build_datastore, retrieve_captions, retrieve_images, write_datastore, DatastoreFiles, EmbeddingVector, Split,
    SplitFilter,
};
use ragcap::synthetic::{generate_store, StoreBuilder, SyntheticConfig};
use ragcap::Datastore;

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na = a.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let nb = b.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Full scan: score everything, sort by (score desc, id asc), cut at m.
fn brute_force(rows: &[(String, Vec<f32>)], query: &[f32], m: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = rows.iter().map(|(id, v)| (id.clone(), cosine(v, query))).collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(m);
    all
}

fn random_store(vectors: &[Vec<f32>]) -> (Datastore, Vec<(String, Vec<f32>)>) {
    let dim = vectors[0].len();
    let mut b = StoreBuilder::new(dim);
    let mut rows = Vec::new();
    b.image("img", Split::Train, &vectors[0]);
    for (i, v) in vectors.iter().enumerate() {
        let id = format!("c{i:04}");
        b.caption(&id, "img", "text", v);
        rows.push((id, v.clone()));
    }
    (b.build().unwrap(), rows)
}

fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-4i8..=4, dim)
        .prop_filter("nonzero", |v| v.iter().any(|&x| x != 0))
        .prop_map(|v| v.into_iter().map(f32::from).collect())
}

fn store_and_query() -> impl Strategy<Value = (Vec<Vec<f32>>, Vec<f32>, usize)> {
    (1usize..6).prop_flat_map(|dim| {
        (
            prop::collection::vec(nonzero_vec(dim), 1..80),
            nonzero_vec(dim),
            0usize..90,
        )
    })
}

proptest! {
    // Small integer coordinates make exact ties common.
    #[test]
    fn top_m_equals_full_scan((vectors, query, m) in store_and_query()) {
        let (store, rows) = random_store(&vectors);
        let q = EmbeddingVector::new(query.clone()).unwrap();
        let hits = retrieve_captions(&store, &q, m, &SplitFilter::all()).unwrap();
        let expected = brute_force(&rows, &query, m);
        prop_assert_eq!(hits.len(), expected.len());
        for (i, (h, (id, score))) in hits.iter().zip(&expected).enumerate() {
            prop_assert_eq!(&h.target_id, id);
            prop_assert_eq!(h.score, *score);
            prop_assert_eq!(h.rank, i + 1);
        }
    }
}

#[test]
fn ties_break_by_ascending_id() {
    let mut b = StoreBuilder::new(2);
    b.image("z", Split::Train, &[1.0, 0.0])
        .image("a", Split::Train, &[2.0, 0.0])
        .image("m", Split::Train, &[0.0, 1.0]);
    for id in ["c3", "c1", "c2"] {
        b.caption(id, "z", "same direction", &[3.0, 0.0]);
    }
    b.caption("c0", "m", "other", &[0.0, 1.0]);
    let store = b.build().unwrap();
    let q = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
    let caps = retrieve_captions(&store, &q, 3, &SplitFilter::all()).unwrap();
    let ids: Vec<&str> = caps.iter().map(|h| h.target_id.as_str()).collect();
    assert_eq!(ids, ["c1", "c2", "c3"]);
    let imgs = retrieve_images(&store, &q, 2, &SplitFilter::all()).unwrap();
    let ids: Vec<&str> = imgs.iter().map(|h| h.target_id.as_str()).collect();
    assert_eq!(ids, ["a", "z"]);
}

#[test]
fn split_filter_is_respected() {
    let store = generate_store(&SyntheticConfig {
        images: 20,
        ..Default::default()
    })
    .unwrap();
    let q = store.image_embedding("img00000").unwrap();
    let hits = retrieve_captions(&store, &q, 1000, &SplitFilter::train_only()).unwrap();
    assert_eq!(hits.len(), 16 * 5);
    assert!(hits
        .iter()
        .all(|h| store.caption(&h.target_id).unwrap().split == Split::Train));
    let hits = retrieve_captions(&store, &q, 1000, &SplitFilter::new([Split::Test])).unwrap();
    assert_eq!(hits.len(), 4 * 5);
}

#[test]
fn write_load_write_is_byte_stable() {
    let store = generate_store(&SyntheticConfig {
        images: 15,
        translations: vec![ragcap::Language::French],
        ..Default::default()
    })
    .unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = DatastoreFiles::in_dir(a.path());
    let fb = DatastoreFiles::in_dir(b.path());
    write_datastore(&store, &fa).unwrap();
    let loaded = build_datastore(&fa).unwrap();
    write_datastore(&loaded, &fb).unwrap();
    for name in ["images.evec", "captions.evec", "metadata.jsonl", "translations.jsonl"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert_eq!(loaded.captions(), store.captions());
    assert_eq!(loaded.summary(), store.summary());
}
