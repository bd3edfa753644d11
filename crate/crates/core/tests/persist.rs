use explainbench::classifiers::{
    evaluate_indices, load_model, save_model, train, BlackBox, MlpParams, TrainConfig,
};
use explainbench::dataset::{generate_synthetic, split_random, FeatureVector, SyntheticSpec};
use explainbench::Error;
use rand::{Rng, SeedableRng};

fn data() -> (explainbench::dataset::LabeledDataset, explainbench::dataset::Split) {
    let ds = generate_synthetic(&SyntheticSpec::single_rule(16, 300, &[2, 9], 4)).unwrap();
    let split = split_random(&ds, 0.5, 4).unwrap();
    (ds, split)
}

fn configs() -> Vec<TrainConfig> {
    let mlp = MlpParams {
        hidden_layers: 1,
        neurons_per_layer: 8,
        max_iterations: 20,
        ..MlpParams::default()
    };
    vec![TrainConfig::random_forest(15, 1), TrainConfig::knn(3), TrainConfig::mlp(mlp, 1)]
}

#[test]
fn round_trip_preserves_predictions_and_scores() {
    let (ds, split) = data();
    let dir = tempfile::tempdir().unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let probes: Vec<FeatureVector> = (0..1000)
        .map(|_| FeatureVector::from_bools((0..16).map(|_| r.gen_bool(0.5))))
        .collect();
    for (i, cfg) in configs().iter().enumerate() {
        let m = train(&ds, &split, cfg).unwrap();
        let path = dir.path().join(format!("m{i}.json"));
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.model_id(), m.model_id());
        for x in &probes {
            assert_eq!(back.predict_bits(x.bits()), m.predict_bits(x.bits()));
            assert_eq!(back.class_scores(x.bits()), m.class_scores(x.bits()));
        }
    }
}

#[test]
fn truncated_or_tampered_files_are_rejected() {
    let (ds, split) = data();
    let dir = tempfile::tempdir().unwrap();
    let m = train(&ds, &split, &TrainConfig::random_forest(5, 2)).unwrap();
    let path = dir.path().join("m.json");
    save_model(&m, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();

    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(Error::ModelFile(_))));

    std::fs::write(&path, text.replace("EXPLAINBENCH-MODEL", "SOMETHING-ELSE")).unwrap();
    assert!(matches!(load_model(&path), Err(Error::ModelFile(_))));

    std::fs::write(&path, text.replace("\"format_version\":1", "\"format_version\":99")).unwrap();
    assert!(matches!(load_model(&path), Err(Error::ModelFile(_))));

    // changing a stored seed breaks the content hash
    let seed_field = format!("\"seed\":{}", m.config().seed);
    assert!(text.contains(&seed_field));
    std::fs::write(&path, text.replacen(&seed_field, "\"seed\":777", 1)).unwrap();
    assert!(matches!(load_model(&path), Err(Error::ModelFile(_))));

    assert!(matches!(load_model(dir.path().join("absent.json")), Err(Error::Io { .. })));
}

#[test]
fn one_nearest_neighbour_fits_its_training_set() {
    let (ds, split) = data();
    let m = train(&ds, &split, &TrainConfig::knn(1)).unwrap();
    // duplicate training vectors with conflicting labels cannot occur at noise 0
    let r = evaluate_indices(&m, &ds, split.train()).unwrap();
    assert_eq!(r.accuracy, 1.0);
}

#[test]
fn retraining_is_deterministic() {
    let (ds, split) = data();
    for cfg in configs() {
        let a = train(&ds, &split, &cfg).unwrap();
        let b = train(&ds, &split, &cfg).unwrap();
        assert_eq!(a.model_id(), b.model_id());
    }
}
