mod common;

use clipvqa::head::{init_params, Checkpoint, CheckpointMeta, GateInput, HeadArch};
use clipvqa::ingest::{decode_features, encode_features, read_feature_file, write_feature_file, FeatureRecord};
use clipvqa::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn records_strategy() -> impl Strategy<Value = (usize, Vec<FeatureRecord>)> {
    (1usize..6).prop_flat_map(|dim| {
        let record = ("[a-z0-9_.]{1,12}", 0u32..3, prop::collection::vec(-1e6f32..1e6f32, dim));
        prop::collection::vec(record, 0..20).prop_map(move |raw| {
            let mut seen = std::collections::HashSet::new();
            let records = raw
                .into_iter()
                .filter(|(k, v, _)| seen.insert((k.clone(), *v)))
                .map(|(key, variant, vector)| FeatureRecord { key, variant, vector })
                .collect();
            (dim, records)
        })
    })
}

fn checkpoint(arch: HeadArch, seed: u64) -> Checkpoint {
    let mut params = init_params(&arch, seed).unwrap();
    common::randomize(&mut params, &mut ChaCha8Rng::seed_from_u64(seed), 0.7);
    let meta = CheckpointMeta {
        type_names: (0..arch.num_types).map(|t| format!("type{t}")).collect(),
        arch,
        vocab_hash: "ab".repeat(32),
        seed,
        dropout_rate: 0.5,
        epochs_trained: 3,
        best_epoch: Some(2),
    };
    Checkpoint::new(meta, params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn feature_round_trip_is_bitwise((dim, records) in records_strategy()) {
        let bytes = encode_features(dim, &records).unwrap();
        let set = decode_features(&bytes).unwrap();
        prop_assert_eq!(set.dim(), dim);
        let back = set.to_records();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(&a.key, &b.key);
            prop_assert_eq!(a.variant, b.variant);
            let bits_a: Vec<u32> = a.vector.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u32> = b.vector.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(bits_a, bits_b);
        }
        prop_assert_eq!(encode_features(dim, &back).unwrap(), bytes);
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise(
        img in 1usize..5, txt in 1usize..5, hidden in 1usize..6,
        answers in 2usize..6, types in 2usize..4, seed in any::<u64>(),
        probs in any::<bool>(), relu in any::<bool>(), two_layers in any::<bool>(),
    ) {
        let mut arch = HeadArch::new(img, txt, hidden, answers, types);
        arch.trunk_relu = relu;
        if two_layers {
            arch.hidden_dims = vec![hidden + 1, hidden];
        }
        if probs {
            arch.gate_input = GateInput::Probabilities;
        }
        let ckpt = checkpoint(arch, seed);
        let bytes = ckpt.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        prop_assert_eq!(&back.meta, &ckpt.meta);
        for (a, b) in ckpt.params.tensors().iter().zip(back.params.tensors()) {
            let bits_a: Vec<u64> = a.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(bits_a, bits_b);
        }
        prop_assert_eq!(back.encode(), bytes);
    }
}

#[test]
fn feature_file_size_is_exact() {
    const D: usize = 768;
    let mut rng = 0x9E37_79B9_7F4A_7C15u64;
    let records: Vec<FeatureRecord> = (0..10_000)
        .map(|i| {
            let vector = (0..D)
                .map(|_| {
                    rng ^= rng << 13;
                    rng ^= rng >> 7;
                    rng ^= rng << 17;
                    (rng >> 40) as f32 / (1u64 << 24) as f32 - 0.5
                })
                .collect();
            FeatureRecord {
                key: format!("VizWiz_train_{i:08}.jpg"),
                variant: (i % 2) as u32,
                vector,
            }
        })
        .collect();
    let expected: u64 = 20 + records.iter().map(|r| (2 + r.key.len() + 4 + 4 * D) as u64).sum::<u64>();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.cfv");
    write_feature_file(&path, D, &records).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), expected);
    let set = read_feature_file(&path).unwrap();
    assert_eq!(set.len(), 10_000);
    assert_eq!(set.get("VizWiz_train_00009999.jpg", 1).unwrap(), records[9999].vector.as_slice());
}

#[test]
fn every_strict_prefix_is_truncated() {
    let records = vec![
        FeatureRecord { key: "k1".into(), variant: 0, vector: vec![1.0, 2.0] },
        FeatureRecord { key: "k1".into(), variant: 1, vector: vec![3.0, 4.0] },
    ];
    let bytes = encode_features(2, &records).unwrap();
    for cut in 0..bytes.len() {
        match decode_features(&bytes[..cut]) {
            Err(Error::Truncated(_)) => {}
            other => panic!("prefix of {cut} bytes: {other:?}"),
        }
    }
    let ckpt = checkpoint(HeadArch::new(2, 2, 3, 3, 2), 1).encode();
    for cut in (0..ckpt.len()).step_by(7) {
        assert!(
            matches!(Checkpoint::decode(&ckpt[..cut]), Err(Error::Truncated(_))),
            "checkpoint prefix {cut}"
        );
    }
}

#[test]
fn header_and_content_violations() {
    let ok = encode_features(1, &[FeatureRecord { key: "a".into(), variant: 0, vector: vec![0.5] }]).unwrap();

    let mut bad = ok.clone();
    bad[0] = b'X';
    assert!(matches!(decode_features(&bad), Err(Error::BadMagic { .. })));

    let mut bad = ok.clone();
    bad[4] = 2;
    assert!(matches!(decode_features(&bad), Err(Error::UnsupportedVersion(2))));

    let mut bad = ok.clone();
    bad.push(0);
    assert!(matches!(decode_features(&bad), Err(Error::Validation(_))));

    let mut bad = ok.clone();
    let n = bad.len();
    bad[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(decode_features(&bad), Err(Error::NonFinite(_))));

    let dup = [
        FeatureRecord { key: "a".into(), variant: 0, vector: vec![0.5] },
        FeatureRecord { key: "a".into(), variant: 0, vector: vec![0.25] },
    ];
    assert!(matches!(encode_features(1, &dup), Err(Error::DuplicateRecord { .. })));

    let ragged = [FeatureRecord { key: "a".into(), variant: 0, vector: vec![0.5, 1.0] }];
    assert!(matches!(encode_features(1, &ragged), Err(Error::Dimension(_))));

    let mut ckpt = checkpoint(HeadArch::new(2, 2, 3, 3, 2), 1).encode();
    ckpt[0] = b'Z';
    assert!(matches!(Checkpoint::decode(&ckpt), Err(Error::BadMagic { .. })));
}
