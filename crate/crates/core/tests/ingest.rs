use std::sync::Arc;

use aof_core::analysis::{decompose, joint_training_loss, min_training_loss};
use aof_core::aoi::AgeVector;
use aof_core::ingest::{
    dynamic_age_law, quantize, read_records, stationarity_diagnostic, Dataset, EmpiricalProvider,
    QuantizerConfig, Record,
};
use aof_core::process::{
    make_hidden_nonmarkov, sample_trajectory, LagVar, LawProvider, ModelSizes,
};
use aof_core::{Error, LossSpec};

fn sampled(n: usize) -> Dataset {
    let m = make_hidden_nonmarkov(31, &ModelSizes::default(), 0.15).unwrap();
    sample_trajectory(&m, n, 77).unwrap()
}

#[test]
fn csv_round_trip() {
    let d = sampled(500);
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t,x_1,x_2,age_1,age_2,y\n"));
    let back = Dataset::from_csv_reader(buf.as_slice(), b',').unwrap();
    assert_eq!(back.records(), d.records());
}

#[test]
fn empirical_decomposition_is_exact() {
    let p = EmpiricalProvider::new(Arc::new(sampled(20_000))).with_lag_cap(6);
    for delta in [[0, 0], [2, 1], [3, 3]] {
        let delta = AgeVector::new(delta.to_vec());
        for path in [[0, 1], [1, 0]] {
            let r = decompose(&p, &delta, &LossSpec::Logarithmic, &path).unwrap();
            assert!(r.residual.abs() <= 1e-9, "residual {}", r.residual);
        }
    }
}

#[test]
fn common_windows_make_laws_consistent() {
    let data = Arc::new(sampled(3_000));
    let small = [LagVar::target(0), LagVar::feature(0, 1)];
    let large = [
        LagVar::target(0),
        LagVar::feature(0, 1),
        LagVar::feature(1, 5),
    ];
    let p = EmpiricalProvider::new(data.clone()).with_lag_cap(5);
    let a = p.window_law(&small).unwrap();
    let b = p
        .window_law(&large)
        .unwrap()
        .law
        .marginal(&["Y@0", "X1@1"])
        .unwrap();
    for (x, y) in a.law.probs().iter().zip(b.probs()) {
        assert!((x - y).abs() < 1e-15);
    }
    assert_eq!(a.samples, Some(2_995));
    let loose = EmpiricalProvider::new(data)
        .with_lag_cap(5)
        .with_common_windows(false);
    assert_eq!(loose.window_law(&small).unwrap().samples, Some(2_999));
}

#[test]
fn empirical_loss_approaches_exact() {
    let m = make_hidden_nonmarkov(31, &ModelSizes::default(), 0.15).unwrap();
    let p = EmpiricalProvider::new(Arc::new(sampled(100_000)));
    for delta in [[1, 1], [0, 3]] {
        let delta = AgeVector::new(delta.to_vec());
        let exact = min_training_loss(&m, &delta, &LossSpec::Logarithmic).unwrap();
        let emp = min_training_loss(&p, &delta, &LossSpec::Logarithmic).unwrap();
        assert!((exact - emp).abs() < 0.01, "{exact} vs {emp}");
    }
}

#[test]
fn too_few_windows() {
    let p = EmpiricalProvider::new(Arc::new(sampled(40))).with_lag_cap(16);
    let err =
        min_training_loss(&p, &AgeVector::new(vec![1, 1]), &LossSpec::Logarithmic).unwrap_err();
    assert!(matches!(
        err,
        Error::InsufficientWindows {
            found: 24,
            required: 30
        }
    ));
}

const AGED: &str = "\
t,x_1,age_1,y
0,0.2,1,1.5
1,0.7,1,0.5
2,1.4,2,2.5
3,0.1,1,0.5
4,1.9,2,1.5
5,0.3,1,2.5
";

#[test]
fn quantized_dynamic_ages() {
    let records = read_records(AGED.as_bytes(), b',').unwrap();
    let cfg = QuantizerConfig::from_json(r#"{"x_1": [0, 1, 2], "y": [0, 1, 2, 3]}"#).unwrap();
    let d = quantize(&records, &cfg).unwrap();
    assert_eq!(d.feature_space(0).labels(), ["B0", "B1"]);
    let (ages, family) = dynamic_age_law(&d, 2).unwrap();
    assert_eq!(ages.support().len(), 2);
    assert_eq!(family.laws().len(), 2);
    let with = joint_training_loss(&family, &ages, &LossSpec::Quadratic, true).unwrap();
    let without = joint_training_loss(&family, &ages, &LossSpec::Quadratic, false).unwrap();
    assert!(without >= with - 1e-12);
    // four rows with age 1, all with x in B0
    let age1 = family.laws()[&AgeVector::new(vec![1])].law.clone();
    assert_eq!(age1.names(), ["Y@0", "X1@1"]);
    assert_eq!(age1.probs(), [0.5, 0.0, 0.25, 0.0, 0.25, 0.0]);
    match dynamic_age_law(&d, 3) {
        Err(Error::SparseAgeCells(cells)) => assert_eq!(cells, vec![("(2)".to_string(), 2)]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stationarity_flags_a_regime_change() {
    let mut rows = Vec::new();
    for t in 0..200 {
        let y = if t < 100 { "a" } else { "b" };
        rows.push(Record {
            t,
            features: vec!["x".into()],
            ages: vec![0],
            target: y.into(),
        });
    }
    let d = Dataset::new(rows, None, None).unwrap();
    assert!(stationarity_diagnostic(&d).unwrap().warned);
    let steady = sampled(4_000);
    assert!(!stationarity_diagnostic(&steady).unwrap().warned);
}
