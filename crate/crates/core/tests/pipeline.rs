use std::fs;

use scalebench_core::metrics::evaluate;
use scalebench_core::{
    fit_scaler, load_csv, split_train_test, train, ModelKind, ModelSpec, ScalerKind, Task,
};

const CSV: &str = "\
height (cm),mass,colour ratio,label
150.2,52.1,0.31,small
181.0,88.4,0.52,large
?,60.0,0.33,small
176.4,81.9,0.49,large
158.8,NA,0.35,small
185.5,92.3,0.55,large
149.9,50.7,0.29,small
179.2,85.0,0.51,large
153.3,55.8,0.30,small
183.1,90.1,0.53,large
156.0,57.2,0.34,small
177.7,83.3,0.50,large
";

#[test]
fn csv_to_scores_through_the_public_api() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("people.csv");
    fs::write(&path, CSV).unwrap();

    let ds = load_csv(&path, "label", Task::Classification).unwrap();
    assert_eq!(ds.n_samples(), 10, "rows with missing tokens are dropped");
    assert_eq!(ds.feature_names, ["height_cm", "mass", "colour_ratio"]);
    assert_eq!(ds.class_names, ["small", "large"]);

    let split = split_train_test(&ds, 0.7, 11).unwrap();
    assert_eq!(split.train.n_samples(), 7);

    for scaler in ScalerKind::ALL {
        let fitted = fit_scaler(scaler, split.train.x.view()).unwrap();
        assert_eq!(fitted.fit_row_count, 7);
        let train_x = fitted.transform(split.train.x.view()).unwrap();
        let test_x = fitted.transform(split.test.x.view()).unwrap();
        for kind in [ModelKind::Knn, ModelKind::GaussianNb, ModelKind::Cart] {
            let mut spec = ModelSpec::new(kind, Task::Classification, 3);
            if kind == ModelKind::Knn {
                spec = spec.with_params(
                    scalebench_core::models::Hyperparams::with_overrides(
                        kind,
                        serde_json::json!({"k": 3}).as_object().unwrap(),
                    )
                    .unwrap(),
                );
            }
            let mut train_split = split.train.clone();
            train_split.x = train_x.clone();
            let model = train(&spec, train_split.samples()).unwrap();
            let pred = model.predict(test_x.view()).unwrap();
            let scores = evaluate(Task::Classification, &split.test.y, &pred).unwrap();
            let acc = scores.accuracy.unwrap();
            assert!((0.0..=1.0).contains(&acc));
        }
    }
}
