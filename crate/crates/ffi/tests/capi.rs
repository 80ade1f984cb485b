use std::ffi::CStr;
use std::ptr;

use mbvge_ffi::*;

const SET2: [f64; 9] = [0.6, 0.5, 0.4, 0.3, 2.0, 0.5, 1.5, 0.5, 1.5];

fn model(params: &[f64; 9]) -> *mut MbvgeModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mbvge_model_new(params.as_ptr(), &mut m) }, MbvgeStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mbvge_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn rejects_bad_parameters_with_message() {
    let mut bad = SET2;
    bad[0] = 1.2;
    let mut m = ptr::null_mut();
    let st = unsafe { mbvge_model_new(bad.as_ptr(), &mut m) };
    assert_eq!(st, MbvgeStatus::InvalidParameter);
    assert!(m.is_null());
    assert!(last_error().contains("p must lie in (0,1)"), "{}", last_error());
}

#[test]
fn null_pointers_are_reported() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mbvge_model_new(ptr::null(), &mut m) }, MbvgeStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { mbvge_model_cdf(ptr::null(), 1.0, 1.0, &mut v) }, MbvgeStatus::NullPointer);
    assert_eq!(unsafe { mbvge_fit_estimates(ptr::null(), &mut v) }, MbvgeStatus::NullPointer);
    unsafe {
        mbvge_model_free(ptr::null_mut());
        mbvge_fit_free(ptr::null_mut());
    }
}

#[test]
fn model_queries_match_library() {
    let m = model(&SET2);
    let lib = mbvge::MixtureParams::from_array(SET2).unwrap();
    let (mut d, mut c, mut s) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(mbvge_model_log_density(m, 0.7, 1.3, &mut d), MbvgeStatus::Ok);
        assert_eq!(mbvge_model_cdf(m, 0.7, 1.3, &mut c), MbvgeStatus::Ok);
        assert_eq!(mbvge_model_singular_mass(m, &mut s), MbvgeStatus::Ok);
        assert_eq!(mbvge_model_log_density(m, f64::NAN, 1.0, &mut d), MbvgeStatus::InvalidData);
        mbvge_model_free(m);
    }
    assert_eq!(c, lib.cdf(0.7, 1.3));
    assert_eq!(s, lib.singular_mass());
}

#[test]
fn sample_is_seeded_and_labels_optional() {
    let m = model(&SET2);
    let n = 200;
    let (mut a1, mut a2, mut b1, mut b2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut labels = vec![9u8; n];
    unsafe {
        assert_eq!(mbvge_model_sample(m, 7, n, a1.as_mut_ptr(), a2.as_mut_ptr(), labels.as_mut_ptr()), MbvgeStatus::Ok);
        assert_eq!(mbvge_model_sample(m, 7, n, b1.as_mut_ptr(), b2.as_mut_ptr(), ptr::null_mut()), MbvgeStatus::Ok);
        mbvge_model_free(m);
    }
    assert_eq!(a1, b1);
    assert_eq!(a2, b2);
    assert!(labels.iter().all(|&l| l < 2));
    let lib = mbvge::MixtureParams::from_array(SET2).unwrap().sample_seeded(n, 7);
    assert!(lib.iter().zip(&a1).all(|(d, &x)| d.pair.x1 == x));
}

#[test]
fn fit_round_trip() {
    let m = model(&SET2);
    let n = 600;
    let (mut x1, mut x2) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        mbvge_model_sample(m, 11, n, x1.as_mut_ptr(), x2.as_mut_ptr(), ptr::null_mut());
        mbvge_model_free(m);
    }
    let mut opts = mbvge_fit_options_default();
    opts.seed = 3;
    opts.max_iter = 300;
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { mbvge_fit(x1.as_ptr(), x2.as_ptr(), n, &opts, &mut f) }, MbvgeStatus::Ok);
    let mut est = [0.0; 9];
    let (mut ll, mut it, mut conv) = (0.0, 0usize, false);
    unsafe {
        assert_eq!(mbvge_fit_estimates(f, est.as_mut_ptr()), MbvgeStatus::Ok);
        assert_eq!(mbvge_fit_info(f, &mut ll, &mut it, &mut conv), MbvgeStatus::Ok);
        assert_eq!(mbvge_fit_info(f, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), MbvgeStatus::Ok);
    }
    assert!(ll.is_finite());
    assert!((1..=300).contains(&it));
    assert!(est[0] > 0.0 && est[0] < 1.0);

    let mut fm = ptr::null_mut();
    let mut dep = MbvgeDependence::default();
    unsafe {
        assert_eq!(mbvge_fit_model(f, &mut fm), MbvgeStatus::Ok);
        assert_eq!(mbvge_dependence(fm, &mut dep), MbvgeStatus::Ok);
        mbvge_model_free(fm);
        mbvge_fit_free(f);
    }
    assert!(dep.kendall_tau > 0.0 && dep.kendall_tau < 1.0);
    assert!(dep.spearman_rho > 0.0 && dep.spearman_rho < 1.0);
    assert_eq!(dep.tail_lower, 0.0);
}

#[test]
fn fit_error_codes() {
    let ties = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
    let mut f = ptr::null_mut();
    let st = unsafe { mbvge_fit(ties.as_ptr(), ties.as_ptr(), ties.len(), ptr::null(), &mut f) };
    assert_eq!(st, MbvgeStatus::ModelInadequacy);
    assert!(f.is_null());
    assert!(!last_error().is_empty());

    let bad = [1.0, -2.0];
    let st = unsafe { mbvge_fit(bad.as_ptr(), bad.as_ptr(), 2, ptr::null(), &mut f) };
    assert_ne!(st, MbvgeStatus::Ok);

    let mut opts = mbvge_fit_options_default();
    opts.init = 5;
    let x = [1.0, 2.0, 3.0];
    let y = [2.0, 1.0, 3.5];
    let st = unsafe { mbvge_fit(x.as_ptr(), y.as_ptr(), 3, &opts, &mut f) };
    assert_eq!(st, MbvgeStatus::InvalidParameter);
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mbvge.h")).unwrap();
    for name in [
        "mbvge_last_error_message",
        "mbvge_model_new",
        "mbvge_model_free",
        "mbvge_model_log_density",
        "mbvge_model_cdf",
        "mbvge_model_singular_mass",
        "mbvge_model_sample",
        "mbvge_dependence",
        "mbvge_fit_options_default",
        "mbvge_fit(",
        "mbvge_fit_free",
        "mbvge_fit_estimates",
        "mbvge_fit_info",
        "mbvge_fit_model",
        "MBVGE_STATUS_MODEL_INADEQUACY",
        "typedef struct MbvgeModel MbvgeModel",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}
