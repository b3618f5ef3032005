use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use porous_da_ffi::*;

fn last_error() -> String {
    let p = pda_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut PdaConfig {
    let toml = CString::new(
        r#"
        [grid]
        nx = 8
        ny = 8
        coarse_nx = 4
        coarse_ny = 4
        [time]
        t_spin = 0.5
        t_end = 1.5
        [assimilation]
        mu = 20.0
        "#,
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { pda_config_from_toml(toml.as_ptr(), &mut cfg) }, PdaStatus::Ok);
    cfg
}

#[test]
fn reference_and_assimilation_round_trip() {
    unsafe {
        let cfg = small_config();
        let mut reference = ptr::null_mut();
        assert_eq!(pda_run_reference(cfg, &mut reference), PdaStatus::Ok);
        assert_eq!(pda_trajectory_len(reference), 21);

        let (mut nx, mut ny) = (0, 0);
        assert_eq!(pda_trajectory_dims(reference, &mut nx, &mut ny), PdaStatus::Ok);
        assert_eq!((nx, ny), (8, 8));
        let mut buf = vec![0.0; 64];
        let (mut step, mut t) = (0usize, 0.0);
        assert_eq!(
            pda_trajectory_snapshot(reference, 20, &mut step, &mut t, buf.as_mut_ptr(), buf.len()),
            PdaStatus::Ok
        );
        assert_eq!(step, 30);
        assert!((t - 1.5).abs() < 1e-12);
        assert!(buf[0] > 0.0);
        assert_eq!(
            pda_trajectory_snapshot(reference, 0, &mut step, &mut t, buf.as_mut_ptr(), 10),
            PdaStatus::BufferTooSmall
        );

        let dir = tempfile::tempdir().unwrap();
        let cdir = CString::new(dir.path().join("ref").to_str().unwrap()).unwrap();
        assert_eq!(pda_trajectory_write(reference, cdir.as_ptr()), PdaStatus::Ok);
        let mut reread = ptr::null_mut();
        assert_eq!(pda_trajectory_read(cdir.as_ptr(), &mut reread), PdaStatus::Ok);
        assert_eq!(pda_trajectory_len(reread), 21);

        let mut series = ptr::null_mut();
        assert_eq!(pda_run_assimilation(cfg, reread, ptr::null_mut(), &mut series), PdaStatus::Ok);
        assert_eq!(pda_series_len(series), 21);
        let mut first = PdaErrorRecord::default();
        let mut last = PdaErrorRecord::default();
        assert_eq!(pda_series_get(series, 0, &mut first), PdaStatus::Ok);
        assert_eq!(pda_series_get(series, 20, &mut last), PdaStatus::Ok);
        assert!(first.has_v0star && last.has_v0star);
        assert!(last.l2 < first.l2);
        let mut fit = PdaDecayFit::default();
        assert_eq!(pda_series_fit_decay(series, PdaMetric::L2, 0.0, 1.0, &mut fit), PdaStatus::Ok);
        assert_eq!(fit.points, 21);
        assert!(fit.rate > 0.0);

        let csv = dir.path().join("series.csv");
        let ccsv = CString::new(csv.to_str().unwrap()).unwrap();
        assert_eq!(pda_series_write_csv(series, ccsv.as_ptr()), PdaStatus::Ok);
        assert!(std::fs::read_to_string(&csv).unwrap().starts_with("t,l2,linf,v0star\n"));

        pda_series_free(series);
        pda_trajectory_free(reread);
        pda_trajectory_free(reference);
        pda_config_free(cfg);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("[grid]\nnz = 3\n").unwrap();
        assert_eq!(pda_config_from_toml(bad.as_ptr(), &mut cfg), PdaStatus::Parse);
        assert!(cfg.is_null());
        assert!(last_error().contains("line 2"), "{}", last_error());

        assert_eq!(pda_config_from_toml(ptr::null(), &mut cfg), PdaStatus::NullPointer);
        assert_eq!(pda_run_reference(ptr::null(), &mut ptr::null_mut()), PdaStatus::NullPointer);

        let cfg = small_config();
        let before = CStr::from_ptr(pda_config_hash(cfg)).to_owned();
        assert_eq!(pda_config_set_time(cfg, 0.05, 2.0, 1.0), PdaStatus::Config);
        let after_ptr = pda_config_hash(cfg);
        assert_eq!(CStr::from_ptr(after_ptr), before.as_c_str(), "failed edit must not change the config");
        pda_string_free(after_ptr);

        let missing = CString::new("/nonexistent/dir").unwrap();
        let mut traj = ptr::null_mut();
        assert_eq!(pda_trajectory_read(missing.as_ptr(), &mut traj), PdaStatus::Io);

        let mut reference = ptr::null_mut();
        assert_eq!(pda_run_reference(cfg, &mut reference), PdaStatus::Ok);
        assert_eq!(pda_config_set_grid(cfg, 16, 16, 4, 4), PdaStatus::Ok);
        assert_eq!(pda_run_assimilation(cfg, reference, ptr::null_mut(), ptr::null_mut()), PdaStatus::Reference);
        pda_trajectory_free(reference);
        pda_config_free(cfg);

        pda_config_free(ptr::null_mut());
        pda_string_free(ptr::null_mut());
    }
}

#[test]
fn dual_norm_of_cosine_mode() {
    let n = 100;
    let e: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos()).collect();
    let k = vec![1.0; n];
    let mut out = 0.0;
    let status = unsafe { pda_v0star_norm(n, 1, 1.0, 1.0, e.as_ptr(), k.as_ptr(), &mut out) };
    assert_eq!(status, PdaStatus::Ok);
    let expected = 1.0 / std::f64::consts::PI / 2f64.sqrt();
    assert!((out - expected).abs() / expected < 0.01);
}

#[test]
fn config_toml_round_trips_through_strings() {
    unsafe {
        let cfg = small_config();
        let text = pda_config_to_toml(cfg);
        let mut again = ptr::null_mut();
        assert_eq!(pda_config_from_toml(text, &mut again), PdaStatus::Ok);
        let (h1, h2) = (pda_config_hash(cfg), pda_config_hash(again));
        assert_eq!(CStr::from_ptr(h1), CStr::from_ptr(h2));
        for p in [text, h1, h2] {
            pda_string_free(p);
        }
        pda_config_free(again);
        pda_config_free(cfg);
        let v = CStr::from_ptr(pda_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/porous_da.h")
}

#[test]
fn header_declares_the_exported_functions() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "pda_version",
        "pda_last_error_message",
        "pda_config_new",
        "pda_config_from_toml",
        "pda_config_read",
        "pda_config_free",
        "pda_run_reference",
        "pda_run_assimilation",
        "pda_trajectory_snapshot",
        "pda_trajectory_free",
        "pda_series_get",
        "pda_series_fit_decay",
        "pda_series_free",
        "pda_v0star_norm",
    ] {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(text.contains("typedef struct PdaConfig PdaConfig;"));
    assert!(text.contains("PDA_STATUS_OK = 0"));
}

/// Compiles and runs a C program against the header and the static library
/// built alongside this test.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libporous_da_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "C program failed: {}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("records=21 "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
