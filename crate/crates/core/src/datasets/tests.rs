use std::io::Write;
use std::path::PathBuf;

use approx::assert_abs_diff_eq;

use super::*;

fn temp_csv(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn diabetes_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/diabetes64.csv")
}

const SMALL: &str = "y,a,b\n1.0,0.5,2\n2.0,1.5,1\n0.5,-0.3,0\n3.1,2.2,5\n1.7,0.1,-1\n";

#[test]
fn loads_a_small_file() {
    let f = temp_csv(SMALL);
    let d = load_csv(f.path(), "y", &[]).unwrap();
    assert_eq!((d.n(), d.p0(), d.p()), (5, 1, 2));
    assert_eq!(d.names(), &["a".to_string(), "b".to_string()]);
    assert_eq!(d.y()[3], 3.1);
}

#[test]
fn forced_columns_join_the_base() {
    let f = temp_csv(SMALL);
    let d = load_csv(f.path(), "a", &["y".to_string()]).unwrap();
    assert_eq!((d.p0(), d.p()), (2, 1));
    assert_eq!(d.forced_names()[1], "y");
}

#[test]
fn reports_bad_cells_and_columns() {
    let f = temp_csv("y,a,b\n1,2,3\n4,oops,6\n7,8,9\n1,1,2\n3,5,1\n");
    match load_csv(f.path(), "y", &[]) {
        Err(Error::File { source, .. }) => match *source {
            Error::NonNumericCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "a", "oops"));
            }
            other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
    let f = temp_csv("y,a\n1,NA\n2,3\n");
    assert!(load_csv(f.path(), "y", &[]).is_err());
    let f = temp_csv(SMALL);
    let err = load_csv(f.path(), "response", &[]).unwrap_err();
    assert!(err.to_string().contains("response"));
    assert_eq!(err.category(), crate::ErrorCategory::Data);
    assert!(load_csv("/nonexistent/file.csv", "y", &[]).is_err());
}

#[test]
fn round_trip_is_exact() {
    let d = crate::datasets::simulate(
        40,
        6,
        &SyntheticTruth { true_model: ModelKey::from_indices([1]), beta0: vec![0.3], beta: vec![1.0], tau: 1.0 },
        DesignKind::IidGaussian,
        3,
    )
    .unwrap()
    .0;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&d, &path).unwrap();
    let back = load_csv(&path, "y", &[]).unwrap();
    assert_eq!(back.x(), d.x());
    assert_eq!(back.y(), d.y());
    assert_eq!(back.names(), d.names());
    let path2 = dir.path().join("e.csv");
    write_csv(&back, &path2).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn diabetes_has_expected_shape() {
    let d = load_csv(diabetes_path(), "y", &[]).unwrap();
    assert_eq!((d.n(), d.p0(), d.p()), (442, 1, 64));
    assert_eq!(d.names()[2], "bmi");
    assert_eq!(d.names()[8], "ltg");
}

#[test]
fn augmentation_hits_target_correlations() {
    let d = load_csv(diabetes_path(), "y", &[]).unwrap();
    let spec = AugmentSpec::new(62, 6, 42);
    let a = augment_correlated(&d, &spec).unwrap();
    assert_eq!(a.p(), 436);
    let n = a.n() as f64;
    for j in 0..62 {
        let source = a.x().column(j);
        for i in 0..6 {
            let col = a.x().column(64 + 6 * j + i);
            assert_abs_diff_eq!(col.sum() / n, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(col.norm_squared() / n, 1.0, epsilon = 1e-12);
            let corr = col.dot(&source) / n;
            assert_abs_diff_eq!(corr, spec.target_correlation(j + 1, i + 1), epsilon = 1e-10);
        }
    }
    // source columns are untouched
    assert_eq!(a.x().columns(0, 64), d.x().columns(0, 64));
    assert_abs_diff_eq!(spec.target_correlation(1, 1), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    assert!(spec.target_correlation(2, 1) < 0.0);
    let again = augment_correlated(&d, &spec).unwrap();
    assert_eq!(again.x(), a.x());
}

#[test]
fn sign_patterns() {
    let per_copy = AugmentSpec { sign: SignPattern::PerCopy, ..AugmentSpec::new(2, 3, 0) };
    assert!(per_copy.target_correlation(2, 1) > 0.0);
    assert!(per_copy.target_correlation(2, 2) < 0.0);
    let per_col = AugmentSpec::new(2, 3, 0);
    assert!(per_col.target_correlation(2, 1) < 0.0 && per_col.target_correlation(2, 3) < 0.0);
}

#[test]
fn augmentation_edge_cases() {
    let d = load_csv(diabetes_path(), "y", &[]).unwrap();
    let same = augment_correlated(&d, &AugmentSpec::new(62, 0, 1)).unwrap();
    assert_eq!(same.x(), d.x());
    assert!(matches!(augment_correlated(&d, &AugmentSpec::new(62, 7, 1)), Err(Error::Dimension { .. })));
    assert!(augment_correlated(&d, &AugmentSpec::new(65, 1, 1)).is_err());
}

#[test]
fn simulation_is_reproducible() {
    let truth = SyntheticTruth {
        true_model: ModelKey::from_indices([0, 1, 2]),
        beta0: vec![0.0],
        beta: vec![2.0, -2.0, 1.0],
        tau: 1.0,
    };
    let (a, echo) = simulate(100, 25, &truth, DesignKind::IidGaussian, 9).unwrap();
    let (b, _) = simulate(100, 25, &truth, DesignKind::IidGaussian, 9).unwrap();
    let (c, _) = simulate(100, 25, &truth, DesignKind::IidGaussian, 10).unwrap();
    assert_eq!(echo, truth);
    assert_eq!(a.x(), b.x());
    assert_eq!(a.y(), b.y());
    assert_ne!(a.y(), c.y());
    let (e, _) = simulate(100, 25, &truth, DesignKind::EquiCorrelated(0.5), 9).unwrap();
    let r = e.x().column(3).dot(&e.x().column(7)) / 100.0;
    assert!(r > 0.2, "equicorrelated columns should correlate, got {r}");
}

#[test]
fn null_truth_gives_small_r2() {
    let truth = SyntheticTruth { true_model: ModelKey::empty(), beta0: vec![1.0], beta: vec![], tau: 1.0 };
    let (d, _) = simulate(2000, 5, &truth, DesignKind::IidGaussian, 1).unwrap();
    for j in 0..5 {
        let r2 = crate::design::compute_r_squared(&d, &ModelKey::from_indices([j])).unwrap();
        assert!(r2 < 0.01);
    }
}

#[test]
fn simulation_validates_inputs() {
    let truth = SyntheticTruth { true_model: ModelKey::from_indices([9]), beta0: vec![0.0], beta: vec![1.0], tau: 1.0 };
    assert!(simulate(50, 5, &truth, DesignKind::IidGaussian, 0).is_err());
    let ok = SyntheticTruth { true_model: ModelKey::from_indices([0]), ..truth.clone() };
    assert!(matches!(simulate(10, 9, &ok, DesignKind::IidGaussian, 0), Err(Error::Dimension { .. })));
    assert!(simulate(50, 5, &SyntheticTruth { tau: 0.0, ..ok }, DesignKind::IidGaussian, 0).is_err());
}
