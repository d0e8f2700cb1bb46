use astskin::dataset::{kfold, split_holdout, CalibrationDataset, FoldAssignment};
use astskin::dsp::SpectralFeatures;
use astskin::learn::tree::argmax3;
use astskin::learn::{load_model, registry, save_model, train, ModelSpec, Parameters, Task};
use astskin::metrics::{cv_compare_with_folds, tolerance_bands};
use astskin::rng::SplitMix64;
use astskin::simskin::{generate_dataset, SkinProfile};

fn ast1() -> SkinProfile {
    SkinProfile::bundled("ast1").unwrap()
}

fn small(seed: u64) -> CalibrationDataset {
    generate_dataset(&ast1(), 34, 6, seed).unwrap()
}

fn spec(task: Task, kind: &str) -> ModelSpec {
    ModelSpec::parse(task, kind).unwrap()
}

#[test]
fn bagged_prediction_is_member_aggregate() {
    let ds = small(3);
    let probe = small(4);
    let reg = train(&spec(Task::ForceRegression, "bagged-trees"), &ds, 11).unwrap();
    let cls = train(&spec(Task::LocationClassification, "bagged-trees"), &ds, 11).unwrap();
    let (Parameters::Bagged(rb), Parameters::Bagged(cb)) = (&reg.parameters, &cls.parameters) else {
        panic!("bagged parameters expected");
    };
    assert_eq!(rb.members.len(), 30);
    for r in &probe.records {
        let z = reg.standardization.apply_features(&r.features);
        let mean = rb.members.iter().map(|t| t.predict_value(&z)).sum::<f64>() / rb.members.len() as f64;
        assert_eq!(reg.predict_force(&r.features).unwrap(), mean);

        let z = cls.standardization.apply_features(&r.features);
        let mut votes = [0usize; 3];
        for t in &cb.members {
            votes[argmax3(&t.class_scores(&z)).index()] += 1;
        }
        let majority = argmax3(&votes.map(|v| v as f64));
        assert_eq!(cls.predict_location(&r.features).unwrap().label, majority);
    }
}

#[test]
fn feature_scale_does_not_change_labels() {
    let ds = small(5);
    let probe = small(6);
    let scale = |d: &CalibrationDataset, j: usize| {
        let mut out = d.clone();
        for r in &mut out.records {
            let mut a = r.features.to_array();
            a[j] *= 10.0;
            r.features = SpectralFeatures::from_array(a);
        }
        out
    };
    let kinds = ["knn-fine", "knn-medium", "knn-cosine", "knn-cubic", "knn-weighted", "linear-discriminant"];
    for j in 0..4 {
        let (ds10, probe10) = (scale(&ds, j), scale(&probe, j));
        for kind in kinds {
            let s = spec(Task::LocationClassification, kind);
            let a = train(&s, &ds, 1).unwrap();
            let b = train(&s, &ds10, 1).unwrap();
            for (r, r10) in probe.records.iter().zip(&probe10.records) {
                assert_eq!(
                    a.predict_location(&r.features).unwrap().label,
                    b.predict_location(&r10.features).unwrap().label,
                    "{kind}, feature {j}"
                );
            }
        }
    }
}

#[test]
fn training_is_deterministic_and_round_trips() {
    let ds = small(8);
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SplitMix64::new(42);
    let probes: Vec<SpectralFeatures> =
        (0..100).map(|_| SpectralFeatures::from_array([0; 4].map(|_| 0.05 + 0.5 * rng.next_f64()))).collect();
    for task in [Task::ForceRegression, Task::LocationClassification] {
        for s in registry(task) {
            let a = train(&s, &ds, 9).unwrap();
            let b = train(&s, &ds, 9).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{s}");
            let path = dir.path().join(format!("{s}.json"));
            save_model(&a, &path).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.to_json(), a.to_json());
            for p in &probes {
                match task {
                    Task::ForceRegression => {
                        assert_eq!(a.predict_force(p).unwrap().to_bits(), back.predict_force(p).unwrap().to_bits());
                    }
                    Task::LocationClassification => {
                        let (x, y) = (a.predict_location(p).unwrap(), back.predict_location(p).unwrap());
                        assert_eq!(x.label, y.label);
                        assert_eq!(x.scores.map(f64::to_bits), y.scores.map(f64::to_bits));
                    }
                }
            }
        }
    }
}

#[test]
fn cv_report_ignores_row_order() {
    let ds = small(10);
    let folds = kfold(&ds, 5, 2).unwrap();
    let specs: Vec<ModelSpec> = ["linear-ols", "tree-medium", "gp-exponential"]
        .iter()
        .map(|k| spec(Task::ForceRegression, k))
        .collect();
    let base = cv_compare_with_folds(&specs, &ds, &folds, 2).unwrap();

    // Reverse the rows and carry each row's fold with it.
    let n = ds.len();
    let order: Vec<usize> = (0..n).rev().collect();
    let shuffled = ds.subset(&order);
    let moved = FoldAssignment { k: folds.k, assignment: order.iter().map(|&i| folds.assignment[i]).collect() };
    let other = cv_compare_with_folds(&specs, &shuffled, &moved, 2).unwrap();
    assert_eq!(base.selected, other.selected);
    for (a, b) in base.rows.iter().zip(&other.rows) {
        // Summation order differs, so scores agree to rounding only.
        for (x, y) in a.fold_scores.iter().zip(&b.fold_scores) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{}: {x} vs {y}", a.spec);
        }
    }
}

#[test]
fn gp_exponential_on_noiseless_rows() {
    let p = ast1().with_noise_sigma(0.0).unwrap();
    // 34 levels x 2 samples x 3 locations = 204 rows; keep the first 200.
    let full = generate_dataset(&p, 34, 2, 7).unwrap();
    let train_ds = full.subset(&(0..200).collect::<Vec<_>>());
    let model = train(&spec(Task::ForceRegression, "gp-exponential"), &train_ds, 7).unwrap();

    // 100 held-out in-range points between the calibration levels.
    let mut rng = SplitMix64::new(99);
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for i in 0..100 {
        let loc = astskin::simskin::Location::ALL[i % 3];
        let f = 30.0 * rng.next_f64();
        truth.push(f);
        pred.push(model.predict_force(&p.mean_features(loc, f)).unwrap());
    }
    let r = tolerance_bands(&truth, &pred).unwrap();
    assert!(r.rmse_n <= 0.5, "rmse {}", r.rmse_n);
}

#[test]
fn noiseless_holdout_is_classified_perfectly() {
    let p = ast1().with_noise_sigma(0.0).unwrap();
    let ds = generate_dataset(&p, 34, 50, 7).unwrap();
    let (tr, te) = split_holdout(&ds, 0.9, 7).unwrap();
    assert_eq!(te.len(), 510);
    for kind in ["knn-weighted", "knn-fine"] {
        let m = train(&spec(Task::LocationClassification, kind), &tr, 7).unwrap();
        for r in &te.records {
            assert_eq!(m.predict_location(&r.features).unwrap().label, r.location, "{kind}");
        }
    }
}
