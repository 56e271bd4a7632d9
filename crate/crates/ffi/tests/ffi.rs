use std::ffi::{CStr, CString};
use std::ptr;

use dsync_ffi::*;

fn model_path(name: &str) -> CString {
    CString::new(format!("{}/../../models/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn last_error() -> String {
    let p = dsync_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { dsync_string_free(s) };
    out
}

#[test]
fn simulate_discover_check_round_trip() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(dsync_net_load(model_path("blocking").as_ptr(), &mut net), DsyncStatus::Ok);
        assert!(dsync_last_error().is_null());

        let mut log = ptr::null_mut();
        assert_eq!(dsync_simulate(net, 1, 500, 0.0, &mut log), DsyncStatus::Ok);
        assert_eq!(dsync_log_len(log), 1500);

        let (mut matched, mut unmatched) = (0usize, 1usize);
        assert_eq!(dsync_check(net, log, &mut matched, &mut unmatched), DsyncStatus::Ok);
        assert_eq!((matched, unmatched), (1500, 0));

        let mut json = ptr::null_mut();
        assert_eq!(dsync_discover(net, log, ptr::null(), &mut json), DsyncStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(report["constraints"][0]["constraint"], "nrtokens(q1) <= 4.5");

        let mut csv = ptr::null_mut();
        assert_eq!(dsync_log_to_csv(log, &mut csv), DsyncStatus::Ok);
        let csv = CString::new(take(csv)).unwrap();
        let mut again = ptr::null_mut();
        assert_eq!(dsync_log_parse_csv(csv.as_ptr(), &mut again), DsyncStatus::Ok);
        assert_eq!(dsync_log_len(again), 1500);

        dsync_log_free(again);
        dsync_log_free(log);
        dsync_net_free(net);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut net = ptr::null_mut();
        let missing = CString::new("/no/such/net.json").unwrap();
        assert_eq!(dsync_net_load(missing.as_ptr(), &mut net), DsyncStatus::Io);
        assert!(last_error().contains("/no/such/net.json"));
        assert!(net.is_null());

        assert_eq!(dsync_net_from_json(ptr::null(), &mut net), DsyncStatus::NullPointer);
        let garbage = CString::new("{not json").unwrap();
        assert_eq!(dsync_net_from_json(garbage.as_ptr(), &mut net), DsyncStatus::Parse);
        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(dsync_net_from_json(bad_utf8.as_ptr().cast(), &mut net), DsyncStatus::InvalidUtf8);

        assert_eq!(dsync_net_load(model_path("priority").as_ptr(), &mut net), DsyncStatus::Ok);
        let mut log = ptr::null_mut();
        assert_eq!(dsync_simulate(net, 1, 0, 0.0, &mut log), DsyncStatus::Validation);
        assert!(last_error().contains("max_cases"));

        let csv = CString::new("case,activity,start,complete\n1,packing,0,1\n").unwrap();
        assert_eq!(dsync_log_parse_csv(csv.as_ptr(), &mut log), DsyncStatus::Ok);
        assert_eq!(dsync_check(net, log, ptr::null_mut(), ptr::null_mut()), DsyncStatus::Validation);
        assert!(last_error().contains("packing"));

        let bad_cfg = CString::new("[tree]\nmax_depth = 0\n").unwrap();
        let mut json = ptr::null_mut();
        assert_eq!(dsync_discover(net, log, bad_cfg.as_ptr(), &mut json), DsyncStatus::Validation);
        assert!(json.is_null());
        assert_eq!(dsync_discover(ptr::null(), log, ptr::null(), &mut json), DsyncStatus::NullPointer);

        dsync_log_free(log);
        dsync_net_free(net);
        dsync_net_free(ptr::null_mut());
        dsync_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dsync_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
