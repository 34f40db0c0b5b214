//! C ABI over `ser-core`.
//!
//! Every function returns a [`SerStatus`]; on failure a message is kept per
//! thread and can be read with [`ser_last_error`]. Models are opaque
//! [`SerModel`] handles owned by the caller and released with
//! [`ser_model_free`]. Buffers are always caller-allocated: functions that
//! fill one take its capacity and report the length they need.
//!
//! The header `include/ser.h` is generated from this file at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ser_core::audio_io::{load_wav, AudioError};
use ser_core::config_file::ConfigError;
use ser_core::eval::MetricsReport;
use ser_core::model::{build_model, count_parameters, ModelError};
use ser_core::nn::Tensor;
use ser_core::pipeline::{prepare_clip, PipelineConfig};
use ser_core::{AudioClip, Error, FeatureKind, Model, ModelConfig};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Config = 4,
    Io = 5,
    Audio = 6,
    Feature = 7,
    Model = 8,
    Panic = 9,
}

/// Input feature kind.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerFeature {
    /// Log-mel spectrogram.
    Lms = 0,
    /// Log-mel spectrogram stacked with MFCC deltas and chroma.
    Lmsddc = 1,
}

impl From<SerFeature> for FeatureKind {
    fn from(f: SerFeature) -> Self {
        match f {
            SerFeature::Lms => FeatureKind::Lms,
            SerFeature::Lmsddc => FeatureKind::Lmsddc,
        }
    }
}

/// Macro-averaged scores.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SerMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Opaque model handle.
pub struct SerModel {
    model: Model<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(SerStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(ConfigError::Io { .. }) => SerStatus::Io,
            Error::Config(_) | Error::Model(ModelError::BadConfig(_)) => SerStatus::Config,
            Error::Io { .. } | Error::Audio(AudioError::Io { .. } | AudioError::MissingFile(_)) => {
                SerStatus::Io
            }
            Error::Audio(_) => SerStatus::Audio,
            Error::Dsp(_) | Error::Preprocess(_) => SerStatus::Feature,
            Error::Eval(_) => SerStatus::InvalidArgument,
            _ => SerStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

macro_rules! impl_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
impl_failure!(AudioError, ModelError, ser_core::eval::EvalError, ConfigError);

fn fail(status: SerStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, records any error or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SerStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SerStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SerStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(SerStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    non_null(p, name)?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SerStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn model_ref<'a>(m: *const SerModel) -> Result<&'a SerModel, Failure> {
    non_null(m, "model")?;
    Ok(&*m)
}

unsafe fn model_mut<'a>(m: *mut SerModel) -> Result<&'a mut SerModel, Failure> {
    non_null(m, "model")?;
    Ok(&mut *m)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ser_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ser_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Network input shape `channels x height x frames` for a feature kind
/// under the default pipeline.
///
/// # Safety
/// The out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ser_feature_shape(
    feature: SerFeature,
    channels: *mut usize,
    height: *mut usize,
    frames: *mut usize,
) -> SerStatus {
    guard(|| {
        non_null(channels, "channels")?;
        non_null(height, "height")?;
        non_null(frames, "frames")?;
        let (c, h, t) = PipelineConfig::new(feature.into()).input_shape();
        *channels = c;
        *height = h;
        *frames = t;
        Ok(())
    })
}

fn features_into(clip: &AudioClip, feature: SerFeature, out: *mut f32, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    non_null(out_len, "out_len")?;
    let cfg = PipelineConfig::new(feature.into());
    let (c, h, t) = cfg.input_shape();
    let need = c * h * t;
    unsafe { *out_len = need };
    if out.is_null() || capacity < need {
        return Err(fail(
            SerStatus::BufferTooSmall,
            format!("feature buffer holds {capacity} values, {need} needed"),
        ));
    }
    let prepared = prepare_clip(clip, &cfg)?;
    let f = ser_core::dsp::extract_features(&prepared, cfg.kind, &cfg.features).map_err(Error::from)?;
    if f.values.len() != need {
        return Err(fail(SerStatus::Feature, format!("extractor produced {} values, {need} expected", f.values.len())));
    }
    unsafe { std::slice::from_raw_parts_mut(out, need) }.copy_from_slice(&f.values);
    Ok(())
}

/// Runs the full preparation and feature pipeline on mono PCM samples.
///
/// Writes `channels * height * frames` values (see [`ser_feature_shape`]) to
/// `out` and their count to `out_len`. If `out` is NULL or `capacity` is too
/// small, only `out_len` is written and `SER_STATUS_BUFFER_TOO_SMALL` returned.
///
/// # Safety
/// `samples` must point to `n_samples` floats and `out` to `capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn ser_extract_features(
    samples: *const f32,
    n_samples: usize,
    sample_rate: u32,
    feature: SerFeature,
    out: *mut f32,
    capacity: usize,
    out_len: *mut usize,
) -> SerStatus {
    guard(|| {
        non_null(samples, "samples")?;
        if n_samples == 0 {
            return Err(fail(SerStatus::InvalidArgument, "no samples"));
        }
        let clip = AudioClip::new(std::slice::from_raw_parts(samples, n_samples).to_vec(), sample_rate);
        features_into(&clip, feature, out, capacity, out_len)
    })
}

/// Like [`ser_extract_features`] but reads a WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must point to `capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn ser_extract_features_wav(
    path: *const c_char,
    feature: SerFeature,
    out: *mut f32,
    capacity: usize,
    out_len: *mut usize,
) -> SerStatus {
    guard(|| {
        let clip = load_wav(path_arg(path, "path")?)?;
        features_into(&clip, feature, out, capacity, out_len)
    })
}

fn boxed(cfg: &ModelConfig, out: *mut *mut SerModel) -> Result<(), Failure> {
    non_null(out, "out")?;
    let model = build_model::<f32>(cfg)?;
    unsafe { *out = Box::into_raw(Box::new(SerModel { model })) };
    Ok(())
}

/// New model with the default architecture for `feature` and `n_classes`,
/// initialized from `seed`.
///
/// # Safety
/// `out` must be valid for writes. Release the handle with [`ser_model_free`].
#[no_mangle]
pub unsafe extern "C" fn ser_model_new(
    feature: SerFeature,
    n_classes: usize,
    seed: u64,
    out: *mut *mut SerModel,
) -> SerStatus {
    guard(|| {
        let (c, h, t) = PipelineConfig::new(feature.into()).input_shape();
        let mut cfg = ModelConfig::for_input(c, h, t, n_classes);
        cfg.seed = seed;
        boxed(&cfg, out)
    })
}

/// New model from a model config file, as written by `ser train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ser_model_from_config(path: *const c_char, out: *mut *mut SerModel) -> SerStatus {
    guard(|| {
        let cfg = ModelConfig::from_file(&path_arg(path, "path")?, &[])?;
        boxed(&cfg, out)
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ser_model_free(model: *mut SerModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Replaces the weights with those stored at `path`.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ser_model_load_weights(model: *mut SerModel, path: *const c_char) -> SerStatus {
    guard(|| {
        let m = model_mut(model)?;
        m.model.load_weights(&path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Writes the weights to `path`.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ser_model_save_weights(model: *const SerModel, path: *const c_char) -> SerStatus {
    guard(|| {
        let m = model_ref(model)?;
        m.model.save_weights(&path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of trainable parameters.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ser_model_param_count(model: *const SerModel, out: *mut usize) -> SerStatus {
    guard(|| {
        let m = model_ref(model)?;
        non_null(out, "out")?;
        *out = count_parameters(&m.model);
        Ok(())
    })
}

/// Per-sample input shape and class count.
///
/// # Safety
/// `model` must be a live handle and every out pointer valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ser_model_shape(
    model: *const SerModel,
    channels: *mut usize,
    height: *mut usize,
    frames: *mut usize,
    n_classes: *mut usize,
) -> SerStatus {
    guard(|| {
        let m = model_ref(model)?;
        for (p, name) in [(channels, "channels"), (height, "height"), (frames, "frames"), (n_classes, "n_classes")] {
            non_null(p, name)?;
        }
        let [c, h, t] = m.model.input_shape;
        *channels = c;
        *height = h;
        *frames = t;
        *n_classes = m.model.n_classes;
        Ok(())
    })
}

/// Class probabilities for `n_items` samples laid out back to back, each of
/// `channels * height * frames` values. Writes `n_items * n_classes`
/// probabilities to `out`, row per sample.
///
/// # Safety
/// `model` must be a live handle, `input` must point to the full batch and
/// `out` to `capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn ser_model_predict_proba(
    model: *mut SerModel,
    input: *const f32,
    n_items: usize,
    out: *mut f32,
    capacity: usize,
) -> SerStatus {
    guard(|| {
        let m = model_mut(model)?;
        non_null(input, "input")?;
        non_null(out, "out")?;
        if n_items == 0 {
            return Err(fail(SerStatus::InvalidArgument, "n_items is 0"));
        }
        let [c, h, t] = m.model.input_shape;
        let need = n_items * m.model.n_classes;
        if capacity < need {
            return Err(fail(
                SerStatus::BufferTooSmall,
                format!("output holds {capacity} values, {need} needed"),
            ));
        }
        let data = std::slice::from_raw_parts(input, n_items * c * h * t).to_vec();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(fail(SerStatus::InvalidArgument, "input contains non-finite values"));
        }
        let x = Tensor::from_vec(&[n_items, c, h, t], data).map_err(ModelError::from)?;
        let probs = m.model.predict_proba(&x, 32)?;
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(probs.data());
        Ok(())
    })
}

/// Most likely class per sample. Same input layout as
/// [`ser_model_predict_proba`]; writes `n_items` class indices.
///
/// # Safety
/// As for [`ser_model_predict_proba`], with `out` pointing to `n_items` values.
#[no_mangle]
pub unsafe extern "C" fn ser_model_predict(
    model: *mut SerModel,
    input: *const f32,
    n_items: usize,
    out: *mut u32,
) -> SerStatus {
    guard(|| {
        let k = model_ref(model)?.model.n_classes;
        non_null(out, "out")?;
        let mut probs = vec![0f32; n_items * k];
        let status = ser_model_predict_proba(model, input, n_items, probs.as_mut_ptr(), probs.len());
        if status != SerStatus::Ok {
            let msg = LAST_ERROR.with(|e| e.borrow().as_ref().map(|s| s.to_string_lossy().into_owned()));
            return Err(fail(status, msg.unwrap_or_default()));
        }
        let out = std::slice::from_raw_parts_mut(out, n_items);
        for (i, row) in probs.chunks(k).enumerate() {
            let best = (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b });
            out[i] = best as u32;
        }
        Ok(())
    })
}

/// Accuracy and macro precision, recall and F1 of `predictions` against
/// `labels`, both of length `n` with values below `n_classes`.
///
/// # Safety
/// `predictions` and `labels` must point to `n` values and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ser_metrics(
    predictions: *const u32,
    labels: *const u32,
    n: usize,
    n_classes: usize,
    out: *mut SerMetrics,
) -> SerStatus {
    guard(|| {
        non_null(predictions, "predictions")?;
        non_null(labels, "labels")?;
        non_null(out, "out")?;
        let to_usize = |p: *const u32| -> Vec<usize> {
            std::slice::from_raw_parts(p, n).iter().map(|&v| v as usize).collect()
        };
        let names: Vec<String> = (0..n_classes).map(|c| c.to_string()).collect();
        let r = MetricsReport::evaluate(&to_usize(predictions), &to_usize(labels), &names)?;
        *out = SerMetrics {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        };
        Ok(())
    })
}
