use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use macstate_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ms_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn small_search() -> MsSearch {
    MsSearch {
        directions: 9,
        restarts: 3,
        local_steps: 120,
        ..ms_search_default()
    }
}

fn switch(pz: f64, p1: f64, p2: f64) -> *mut MsChannel {
    let mut ch = ptr::null_mut();
    assert_eq!(unsafe { ms_channel_switch_bsc(pz, p1, p2, &mut ch) }, MsStatus::Ok);
    assert!(!ch.is_null());
    ch
}

fn one_way(c12: f64) -> MsCoop {
    MsCoop {
        mode: MsMode::OneWay,
        c12,
        c21: 0.0,
        c12m: 0.0,
        c12s: 0.0,
    }
}

#[test]
fn trace_query_and_release() {
    let ch = switch(0.01, 0.25, 0.25);
    let mut r = ptr::null_mut();
    let s = unsafe { ms_trace_region(ch, one_way(0.5), small_search(), &mut r) };
    assert_eq!(s, MsStatus::Ok, "{}", last_error());
    let len = unsafe { ms_region_len(r) };
    assert!(len >= 2);

    let (mut r1, mut r2) = (0.0, 0.0);
    let mut best_r1: f64 = 0.0;
    for i in 0..len {
        assert_eq!(unsafe { ms_region_point(r, i, &mut r1, &mut r2) }, MsStatus::Ok);
        assert!(r1 >= 0.0 && r2 >= 0.0);
        best_r1 = best_r1.max(r1);
    }
    assert!(best_r1 > 0.5 && best_r1 <= 1.0);
    assert_eq!(
        unsafe { ms_region_point(r, len, &mut r1, &mut r2) },
        MsStatus::InvalidArgument
    );
    assert!(last_error().contains("out of range"));

    let mut inside = -1;
    assert_eq!(unsafe { ms_region_contains(r, 0.05, 0.05, 1e-9, &mut inside) }, MsStatus::Ok);
    assert_eq!(inside, 1);
    assert_eq!(unsafe { ms_region_contains(r, 2.0, 2.0, 1e-9, &mut inside) }, MsStatus::Ok);
    assert_eq!(inside, 0);

    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { ms_region_to_csv(r, &mut csv) }, MsStatus::Ok);
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    unsafe { ms_string_free(csv) };
    assert!(text.starts_with("# mode=one_way"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), len + 1);

    unsafe {
        ms_region_free(r);
        ms_channel_free(ch);
    }
}

#[test]
fn witness_feeds_the_simulator() {
    let ch = switch(0.01, 0.25, 0.25);
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { ms_trace_region(ch, one_way(0.5), small_search(), &mut r) },
        MsStatus::Ok
    );
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ms_region_witness_json(r, 0, &mut json) }, MsStatus::Ok);

    let mut res = MsSimResult::default();
    let s = unsafe { ms_simulate(ch, json, 6, 0.1, 0.1, 0.5, 0.9, 20, 3, &mut res) };
    assert_eq!(s, MsStatus::Ok, "{}", last_error());
    assert_eq!(res.trials, 20);
    assert!(res.errors <= 20);
    assert!((res.error_rate - res.errors as f64 / 20.0).abs() < 1e-12);
    assert!(res.coverage_fail + res.decoder_errors <= res.errors);

    let s = unsafe { ms_simulate(ch, json, 20, 1.5, 0.5, 0.5, 0.9, 20, 3, &mut res) };
    assert_eq!(s, MsStatus::ResourceGuard);

    let s = unsafe { ms_simulate(ch, json, 6, 0.1, 0.1, 0.5, 0.9, 0, 3, &mut res) };
    assert_eq!(s, MsStatus::InvalidArgument);

    unsafe {
        ms_string_free(json);
        ms_region_free(r);
        ms_channel_free(ch);
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut ch = ptr::null_mut();
    assert_eq!(
        unsafe { ms_channel_switch_bsc(1.5, -1.0, -1.0, &mut ch) },
        MsStatus::InvalidArgument
    );
    assert!(ch.is_null());

    let doc = CString::new(r#"{"preset": "switch_bsc"}"#).unwrap();
    assert_eq!(
        unsafe { ms_channel_from_json(doc.as_ptr(), &mut ch) },
        MsStatus::InvalidArgument
    );
    assert!(last_error().contains("pz"), "{}", last_error());

    assert_eq!(
        unsafe { ms_channel_from_json(ptr::null(), &mut ch) },
        MsStatus::NullPointer
    );

    let ok = CString::new(r#"{"preset": "switch_bsc", "pz": 0.1, "constraints": {"p1": 0.25}}"#).unwrap();
    assert_eq!(unsafe { ms_channel_from_json(ok.as_ptr(), &mut ch) }, MsStatus::Ok);
    assert_eq!(last_error(), "");

    let mut r = ptr::null_mut();
    let s = unsafe { ms_trace_region(ch, one_way(-1.0), small_search(), &mut r) };
    assert_eq!(s, MsStatus::InvalidArgument);
    assert!(r.is_null());

    let s = unsafe { ms_trace_region(ptr::null(), one_way(0.1), small_search(), &mut r) };
    assert_eq!(s, MsStatus::NullPointer);

    unsafe {
        ms_channel_free(ch);
        ms_channel_free(ptr::null_mut());
        ms_region_free(ptr::null_mut());
        ms_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/macstate.h")).unwrap();
    for name in [
        "typedef struct MsChannel MsChannel;",
        "typedef struct MsRegion MsRegion;",
        "MS_STATUS_RESOURCE_GUARD = 3",
        "ms_channel_switch_bsc",
        "ms_channel_from_json",
        "ms_trace_region",
        "ms_region_len",
        "ms_region_point",
        "ms_region_contains",
        "ms_region_to_csv",
        "ms_region_witness_json",
        "ms_simulate",
        "ms_string_free",
        "ms_region_free",
        "ms_channel_free",
        "ms_last_error_message",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }

    // Parse the header as C when a compiler is around.
    let probe = std::env::temp_dir().join("macstate_header_probe.c");
    std::fs::write(&probe, "#include \"macstate.h\"\nint main(void) { return MS_STATUS_OK; }\n").unwrap();
    match Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&probe)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found; skipped header compile"),
    }
}
