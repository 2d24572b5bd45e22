use std::ffi::{CStr, CString};
use std::ptr;

use modelspace::search::enumerate;
use modelspace::{DesignData, ModelKey, PriorSpec, PruneRule, WPriorSpec};
use modelspace_ffi::*;
use nalgebra::{DMatrix, DVector};

/// Small design with signal on columns 0 and 2.
fn data() -> (Vec<f64>, Vec<f64>, usize, usize) {
    let (n, p) = (40, 4);
    let mut x = vec![0.0; n * p];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let t = i as f64;
        let cols = [(t * 0.37).sin(), (t * 1.3).cos(), ((t * 0.71).sin() * 3.0).tanh(), (t * 2.9).sin()];
        for (j, v) in cols.iter().enumerate() {
            x[j * n + i] = *v;
        }
        y[i] = 1.5 * cols[0] - 0.8 * cols[2] + 0.1 * (t * 5.3).cos();
    }
    (y, x, n, p)
}

fn new_design() -> *mut MsDesign {
    let (y, x, n, p) = data();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ms_design_new(y.as_ptr(), x.as_ptr(), n, p, &mut d) }, MsStatus::Ok);
    d
}

fn rust_design() -> DesignData {
    let (y, x, n, p) = data();
    DesignData::with_intercept(DVector::from_vec(y), DMatrix::zeros(n, 0), DMatrix::from_column_slice(n, p, &x)).unwrap()
}

fn last_error() -> String {
    let p = ms_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const BB11: MsPrior = MsPrior { family: MsPriorFamily::BetaBinomial, param1: 1.0, param2: 1.0 };

#[test]
fn design_dims_round_trip() {
    let d = new_design();
    let (mut n, mut p0, mut p) = (0, 0, 0);
    assert_eq!(unsafe { ms_design_dims(d, &mut n, &mut p0, &mut p) }, MsStatus::Ok);
    assert_eq!((n, p0, p), (40, 1, 4));
    unsafe { ms_design_free(d) };
}

#[test]
fn r_squared_matches_core() {
    let d = new_design();
    let idx = [2usize, 0];
    let mut r2 = f64::NAN;
    assert_eq!(unsafe { ms_r_squared(d, idx.as_ptr(), idx.len(), &mut r2) }, MsStatus::Ok);
    let expected = modelspace::design::compute_r_squared(&rust_design(), &ModelKey::from_indices([0, 2])).unwrap();
    assert!((r2 - expected).abs() < 1e-14);
    assert!(r2 > 0.9);

    let dup = [1usize, 1];
    assert_eq!(unsafe { ms_r_squared(d, dup.as_ptr(), 2, &mut r2) }, MsStatus::InvalidArgument);
    let bad = [9usize];
    assert_eq!(unsafe { ms_r_squared(d, bad.as_ptr(), 1, &mut r2) }, MsStatus::ConfigError);
    assert!(last_error().contains("out of range"));
    unsafe { ms_design_free(d) };
}

#[test]
fn null_pointers_are_reported() {
    let mut d = ptr::null_mut();
    let status = unsafe { ms_design_new(ptr::null(), ptr::null(), 3, 1, &mut d) };
    assert_eq!(status, MsStatus::NullPointer);
    assert!(last_error().contains("y"));
    assert!(d.is_null());
    let mut r2 = 0.0;
    assert_eq!(unsafe { ms_r_squared(ptr::null(), ptr::null(), 0, &mut r2) }, MsStatus::NullPointer);
    unsafe {
        ms_design_free(ptr::null_mut());
        ms_report_free(ptr::null_mut());
        ms_string_free(ptr::null_mut());
    }
}

#[test]
fn log_bf_and_prior_match_core() {
    let mut got = 0.0;
    let status = unsafe { ms_log_bf_vs_null(0.4, 3, 50, 1, MsWPrior::ZellnerSiow, 1.0, &mut got) };
    assert_eq!(status, MsStatus::Ok);
    let w = WPriorSpec::zellner_siow(1.0);
    let rule = modelspace::evidence::build_quadrature(w, w.default_order()).unwrap();
    let expected = modelspace::evidence::log_bf_vs_null(0.4, 3, 50, 1, &w, &rule).unwrap();
    assert_eq!(got, expected);

    assert_eq!(
        unsafe { ms_log_bf_vs_null(1.5, 3, 50, 1, MsWPrior::Intrinsic, 0.0, &mut got) },
        MsStatus::NumericalError
    );
    assert_eq!(
        unsafe { ms_log_bf_vs_null(0.4, 3, 50, 1, MsWPrior::ZellnerSiow, -1.0, &mut got) },
        MsStatus::ConfigError
    );

    let mut pmf = vec![0.0; 7];
    assert_eq!(unsafe { ms_prior_log_pmf(&BB11, 6, pmf.as_mut_ptr()) }, MsStatus::Ok);
    // BB(1,1) puts mass 1/(p+1) on every size.
    for v in &pmf {
        assert!((v.exp() - 1.0 / 7.0).abs() < 1e-14);
    }
    let bad = MsPrior { family: MsPriorFamily::Descendant, param1: -1.0, param2: 0.0 };
    assert_eq!(unsafe { ms_prior_log_pmf(&bad, 6, pmf.as_mut_ptr()) }, MsStatus::ConfigError);
}

#[test]
fn search_matches_core_enumeration() {
    let d = new_design();
    let rule = MsRule { kind: MsRuleKind::None, epsilon: 0.0 };
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { ms_search(d, &BB11, rule, 0, &mut report) }, MsStatus::Ok);

    let (mut visited, mut considered, mut cover, mut truncated) = (0, 0, 0, true);
    assert_eq!(
        unsafe { ms_report_counts(report, &mut visited, &mut considered, &mut cover, &mut truncated) },
        MsStatus::Ok
    );
    assert_eq!((visited, considered, truncated), (16, 16, false));

    let core = enumerate(
        &rust_design(),
        PriorSpec::BetaBinomial { a: 1.0, b_mode: modelspace::BetaMode::Fixed(1.0) },
        WPriorSpec::intrinsic(),
        PruneRule::None,
    )
    .unwrap();
    assert_eq!(cover, core.n_to_cover_90);

    let mut modal = [usize::MAX; 4];
    let mut len = 0;
    assert_eq!(unsafe { ms_report_modal(report, modal.as_mut_ptr(), 4, &mut len) }, MsStatus::Ok);
    assert_eq!(&modal[..len], core.modal.indices());
    assert_eq!(&modal[..len], &[0, 2]);
    assert_eq!(unsafe { ms_report_modal(report, modal.as_mut_ptr(), 1, &mut len) }, MsStatus::InvalidArgument);
    assert_eq!(len, 2);

    let mut prob = 0.0;
    assert_eq!(unsafe { ms_report_modal_probability(report, &mut prob) }, MsStatus::Ok);
    assert_eq!(prob, core.posterior(&core.modal).unwrap());

    let mut incl = [0.0; 4];
    assert_eq!(unsafe { ms_report_inclusion(report, incl.as_mut_ptr(), 4) }, MsStatus::Ok);
    assert_eq!(incl.to_vec(), core.inclusion_prob);
    assert_eq!(unsafe { ms_report_inclusion(report, incl.as_mut_ptr(), 3) }, MsStatus::InvalidArgument);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ms_report_to_json(report, &mut json) }, MsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["n_visited"], 16);
    unsafe {
        ms_string_free(json);
        ms_report_free(report);
        ms_design_free(d);
    }
}

#[test]
fn search_respects_visit_cap_and_rule_validation() {
    let d = new_design();
    let mut report = ptr::null_mut();
    let rule = MsRule { kind: MsRuleKind::None, epsilon: 0.0 };
    assert_eq!(unsafe { ms_search(d, &BB11, rule, 5, &mut report) }, MsStatus::Ok);
    let (mut visited, mut truncated) = (0, false);
    unsafe { ms_report_counts(report, &mut visited, ptr::null_mut(), ptr::null_mut(), &mut truncated) };
    assert_eq!(visited, 5);
    assert!(truncated);
    unsafe { ms_report_free(report) };

    let bad = MsRule { kind: MsRuleKind::Path, epsilon: 1.5 };
    assert_eq!(unsafe { ms_search(d, &BB11, bad, 0, &mut report) }, MsStatus::ConfigError);
    unsafe { ms_design_free(d) };
}

#[test]
fn csv_load_and_augment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let (y, x, n, p) = data();
    let mut text = String::from("y,a,b,c,d\n");
    for i in 0..n {
        let row: Vec<String> = std::iter::once(y[i]).chain((0..p).map(|j| x[j * n + i])).map(|v| v.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let ycol = CString::new("y").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ms_design_load_csv(cpath.as_ptr(), ycol.as_ptr(), &mut d) }, MsStatus::Ok);

    let mut aug = ptr::null_mut();
    assert_eq!(unsafe { ms_design_augment(d, 2, 3, 7, &mut aug) }, MsStatus::Ok);
    let mut pa = 0;
    unsafe { ms_design_dims(aug, ptr::null_mut(), ptr::null_mut(), &mut pa) };
    assert_eq!(pa, 4 + 2 * 3);

    let missing = CString::new("nope").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { ms_design_load_csv(cpath.as_ptr(), missing.as_ptr(), &mut other) }, MsStatus::DataError);
    assert!(other.is_null());
    unsafe {
        ms_design_free(aug);
        ms_design_free(d);
    }
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/modelspace.h")).unwrap();
    for name in ["ms_design_new", "ms_search", "ms_report_to_json", "MS_STATUS_OK", "MODELSPACE_H"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
