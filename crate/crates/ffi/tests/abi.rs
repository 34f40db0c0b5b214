use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ser_core::synth::synthetic_clip;
use ser_ffi::*;

fn last_error() -> String {
    let p = ser_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

struct Handle(*mut SerModel);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { ser_model_free(self.0) };
    }
}

fn new_model(feature: SerFeature, classes: usize, seed: u64) -> Handle {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ser_model_new(feature, classes, seed, &mut m) }, SerStatus::Ok);
    assert!(!m.is_null());
    Handle(m)
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ser_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_shape_and_param_count() {
    for (feature, height, params) in [(SerFeature::Lms, 40, 166_263), (SerFeature::Lmsddc, 78, 168_055)] {
        let m = new_model(feature, 7, 0);
        let (mut c, mut h, mut t, mut k, mut n) = (0, 0, 0, 0, 0);
        unsafe {
            assert_eq!(ser_model_shape(m.0, &mut c, &mut h, &mut t, &mut k), SerStatus::Ok);
            assert_eq!(ser_model_param_count(m.0, &mut n), SerStatus::Ok);
        }
        assert_eq!((c, h, t, k), (1, height, 300, 7));
        assert_eq!(n, params);
        let (mut fc, mut fh, mut ft) = (0, 0, 0);
        assert_eq!(unsafe { ser_feature_shape(feature, &mut fc, &mut fh, &mut ft) }, SerStatus::Ok);
        assert_eq!((fc, fh, ft), (c, h, t));
    }
}

#[test]
fn null_and_bad_arguments_report_codes() {
    let mut n = 0;
    assert_eq!(unsafe { ser_model_param_count(ptr::null(), &mut n) }, SerStatus::NullPointer);
    assert!(last_error().contains("model"));

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ser_model_new(SerFeature::Lms, 1, 0, &mut m) }, SerStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("n_classes"));

    let missing = cpath(Path::new("/nonexistent/model.cfg"));
    assert_eq!(unsafe { ser_model_from_config(missing.as_ptr(), &mut m) }, SerStatus::Io);

    let mut out = SerMetrics::default();
    let (p, l) = ([0u32, 5], [0u32, 1]);
    assert_eq!(unsafe { ser_metrics(p.as_ptr(), l.as_ptr(), 2, 3, &mut out) }, SerStatus::InvalidArgument);

    unsafe { ser_model_free(ptr::null_mut()) };
}

#[test]
fn features_predict_and_weights_roundtrip() {
    let clip = synthetic_clip(2, 7, 16_000, 1.0);
    let mut need = 0;
    let status = unsafe {
        ser_extract_features(clip.samples.as_ptr(), clip.len(), 16_000, SerFeature::Lms, ptr::null_mut(), 0, &mut need)
    };
    assert_eq!(status, SerStatus::BufferTooSmall);
    assert_eq!(need, 40 * 300);
    let mut feats = vec![0f32; need];
    let status = unsafe {
        ser_extract_features(clip.samples.as_ptr(), clip.len(), 16_000, SerFeature::Lms, feats.as_mut_ptr(), need, &mut need)
    };
    assert_eq!(status, SerStatus::Ok, "{}", last_error());
    assert!(feats.iter().all(|v| v.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("clip.wav");
    ser_core::audio_io::write_wav(&wav, &clip).unwrap();
    let mut from_file = vec![0f32; need];
    let status = unsafe {
        ser_extract_features_wav(cpath(&wav).as_ptr(), SerFeature::Lms, from_file.as_mut_ptr(), need, &mut need)
    };
    assert_eq!(status, SerStatus::Ok, "{}", last_error());
    let max_diff = feats.iter().zip(&from_file).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
    assert!(max_diff < 1e-2, "16-bit WAV roundtrip moved features by {max_diff}");

    let a = new_model(SerFeature::Lms, 7, 1);
    let mut probs = vec![0f32; 7];
    assert_eq!(unsafe { ser_model_predict_proba(a.0, feats.as_ptr(), 1, probs.as_mut_ptr(), 7) }, SerStatus::Ok);
    assert!((probs.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    let mut small = [0f32; 3];
    assert_eq!(
        unsafe { ser_model_predict_proba(a.0, feats.as_ptr(), 1, small.as_mut_ptr(), 3) },
        SerStatus::BufferTooSmall
    );

    let weights = dir.path().join("w.serw");
    assert_eq!(unsafe { ser_model_save_weights(a.0, cpath(&weights).as_ptr()) }, SerStatus::Ok);
    let b = new_model(SerFeature::Lms, 7, 2);
    let mut other = vec![0f32; 7];
    assert_eq!(unsafe { ser_model_predict_proba(b.0, feats.as_ptr(), 1, other.as_mut_ptr(), 7) }, SerStatus::Ok);
    assert_ne!(probs, other);
    assert_eq!(unsafe { ser_model_load_weights(b.0, cpath(&weights).as_ptr()) }, SerStatus::Ok);
    assert_eq!(unsafe { ser_model_predict_proba(b.0, feats.as_ptr(), 1, other.as_mut_ptr(), 7) }, SerStatus::Ok);
    assert_eq!(probs, other);

    let mut class = [u32::MAX];
    assert_eq!(unsafe { ser_model_predict(b.0, feats.as_ptr(), 1, class.as_mut_ptr()) }, SerStatus::Ok);
    let best = (0..7).max_by(|&i, &j| probs[i].total_cmp(&probs[j])).unwrap();
    assert_eq!(class[0] as usize, best);

    let wrong = new_model(SerFeature::Lms, 4, 0);
    assert_eq!(unsafe { ser_model_load_weights(wrong.0, cpath(&weights).as_ptr()) }, SerStatus::Model);
}

#[test]
fn metrics_match_worked_example() {
    // [[8, 2], [3, 7]] as actual x predicted.
    let mut pred = Vec::new();
    let mut label = Vec::new();
    for (a, p, n) in [(0u32, 0u32, 8), (0, 1, 2), (1, 0, 3), (1, 1, 7)] {
        pred.extend(std::iter::repeat_n(p, n));
        label.extend(std::iter::repeat_n(a, n));
    }
    let mut m = SerMetrics::default();
    assert_eq!(unsafe { ser_metrics(pred.as_ptr(), label.as_ptr(), 20, 2, &mut m) }, SerStatus::Ok);
    assert!((m.accuracy - 0.75).abs() < 1e-12);
    assert!((m.recall - 0.75).abs() < 1e-12);
    let precision = (8.0 / 11.0 + 7.0 / 9.0) / 2.0;
    assert!((m.precision - precision).abs() < 1e-12);
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have_cc() {
        eprintln!("cc not found; header check skipped");
        return;
    }
    let header = crate_dir().join("include/ser.h");
    for lang in ["c", "c++"] {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror", "-x", lang])
            .arg(&header)
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("examples/classify.c"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/ser.h")).unwrap();
    let src = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from ser.h");
    }
}

/// Builds the C example against the shared library and classifies a clip.
#[test]
fn c_example_links_and_runs() {
    let target = std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| crate_dir().join("../../target"));
    let lib_dir = target.join("debug");
    if !have_cc() || !lib_dir.join("libser_ffi.so").exists() {
        eprintln!("cc or libser_ffi.so not available; link test skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("classify");
    let out = Command::new("cc")
        .arg(crate_dir().join("examples/classify.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lser_ffi", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = ser_core::ModelConfig::for_input(1, 40, 300, 7);
    let cfg_path = dir.path().join("model.cfg");
    std::fs::write(&cfg_path, cfg.render()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ser_model_from_config(cpath(&cfg_path).as_ptr(), &mut m) }, SerStatus::Ok);
    let m = Handle(m);
    let weights = dir.path().join("w.serw");
    assert_eq!(unsafe { ser_model_save_weights(m.0, cpath(&weights).as_ptr()) }, SerStatus::Ok);
    let wav = dir.path().join("clip.wav");
    ser_core::audio_io::write_wav(&wav, &synthetic_clip(0, 1, 16_000, 1.0)).unwrap();

    let run = Command::new(&exe)
        .args([&cfg_path, &weights, &wav])
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let probs: Vec<f64> = stdout
        .lines()
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 7);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-3);

    let bad = Command::new(&exe)
        .args([&cfg_path, Path::new("/nonexistent.serw"), &wav])
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error "));
}
