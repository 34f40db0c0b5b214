use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::audio_io::{
    load_wav, read_manifest, scan_dataset, split_dataset, write_manifest, write_rejects, write_wav,
    ClassScheme, Dataset, SplitRatios, UtteranceRecord,
};
use crate::dsp::{write_serf_file, FeatureKind};
use crate::error::{Error, Result};
use crate::eval::{format_report, AggregateReport, MetricsReport};
use crate::model::{build_2dlflb_baseline, Architecture, build_model, count_parameters, BaselineConfig, Model};
use crate::nn::checkpoint::write_state_file;
use crate::pipeline::{
    hex16, load_prepared, prepare_clip, variant_features, variant_seed, CachedSource, FeatureStore,
};
use crate::preprocess::{add_noise, pitch_shift, Variant};
use crate::train::{
    evaluate_loss, gather_set, run_crossval, train_model, CrossvalConfig, FeatureSource,
};

use super::{Cli, Command, DataArgs, RunConfig};

/// Share of clips allowed to fail extraction before a command gives up.
const MAX_FAILURE_RATE: f64 = 0.05;

pub fn dispatch(cli: Cli) -> Result<()> {
    let run = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(crate::config_file::ConfigError::Invalid("--jobs must be >= 1".into()).into());
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Other(format!("thread pool: {e}")))?;
    let overrides = cli.overrides;
    pool.install(move || match cli.command {
        Command::Scan {
            root,
            dataset,
            out,
            rejects,
        } => cmd_scan(&root, dataset.into(), &out, rejects.as_deref()),
        Command::Extract {
            manifest,
            feature,
            cache,
            augment,
        } => cmd_extract(&run, &manifest, feature.into(), cache.as_deref(), augment),
        Command::AugmentPreview {
            input,
            out,
            feature,
        } => cmd_augment_preview(&run, &input, &out, feature.into()),
        Command::Train { data, out } => cmd_train(&run, &overrides, &data, &out),
        Command::Crossval { data, out, k } => cmd_crossval(&run, &overrides, &data, &out, k),
        Command::Paramcount {
            model_config,
            feature,
            classes,
        } => cmd_paramcount(&run, &overrides, model_config.as_deref(), feature.map(Into::into), classes),
        Command::Report { inputs, out } => cmd_report(&inputs, out.as_deref()),
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_scan(root: &Path, dataset: Dataset, out: &Path, rejects: Option<&Path>) -> Result<()> {
    let scan = scan_dataset(root, dataset)?;
    let mut buf = Vec::new();
    write_manifest(&mut buf, &scan.records).map_err(|e| Error::io(out, e))?;
    write(out, &buf)?;
    let rejects_path = rejects.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".rejects.csv");
        PathBuf::from(p)
    });
    let mut buf = Vec::new();
    write_rejects(&mut buf, &scan.rejects).map_err(|e| Error::io(&rejects_path, e))?;
    write(&rejects_path, &buf)?;
    println!(
        "{}: {} records, {} rejected -> {}",
        dataset.name(),
        scan.records.len(),
        scan.rejects.len(),
        out.display()
    );
    Ok(())
}

fn load_records(manifest: &Path) -> Result<(Vec<UtteranceRecord>, Option<PathBuf>)> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let records = read_manifest(&text)?;
    if records.is_empty() {
        return Err(crate::audio_io::AudioError::EmptyDataset(manifest.display().to_string()).into());
    }
    let base = manifest.parent().map(Path::to_path_buf);
    Ok((records, base))
}

fn resolve(base: &Option<PathBuf>, clip_path: &str) -> PathBuf {
    let p = PathBuf::from(clip_path);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn check_failures(failed: usize, total: usize, what: &str) -> Result<()> {
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::Other(format!(
            "{failed} of {total} clips failed {what} (limit {:.0}%)",
            MAX_FAILURE_RATE * 100.0
        )));
    }
    Ok(())
}

pub fn cmd_extract(
    run: &RunConfig,
    manifest: &Path,
    kind: FeatureKind,
    cache: Option<&Path>,
    augment: bool,
) -> Result<()> {
    let (records, base) = load_records(manifest)?;
    let cfg = run.pipeline(kind)?;
    let root = cache
        .map(Path::to_path_buf)
        .unwrap_or_else(|| FeatureStore::default_root(Path::new("ser-cache")));
    let store = FeatureStore::new(&root, cfg);
    store.write_manifest()?;
    let recipe = &run.augment.recipe;
    let variants: Vec<Variant> = if augment {
        recipe.variants()
    } else {
        vec![Variant::Clean]
    };
    let spec = recipe.spec_augment.unwrap_or_default();

    // (computed, cached) per clip, or the failure message
    let results: Vec<std::result::Result<(usize, usize), String>> = records
        .par_iter()
        .map(|r| {
            let mut prepared = None;
            let (mut computed, mut cached) = (0, 0);
            for (i, v) in variants.iter().enumerate() {
                if store.lookup(&r.clip_path, v).map_err(|e| e.to_string())?.is_some() {
                    cached += 1;
                    continue;
                }
                if prepared.is_none() {
                    prepared = Some(
                        load_prepared(&resolve(&base, &r.clip_path), &store.cfg)
                            .map_err(|e| e.to_string())?,
                    );
                }
                let clip = prepared.as_ref().expect("prepared above");
                let seed = variant_seed(run.seed, &r.clip_path, i);
                let t = variant_features(clip, *v, &store.cfg, &spec, seed)
                    .map_err(|e| e.to_string())?;
                store.store(&r.clip_path, v, &t).map_err(|e| e.to_string())?;
                computed += 1;
            }
            Ok((computed, cached))
        })
        .collect();

    let mut failures = String::new();
    let (mut computed, mut cached, mut failed) = (0, 0, 0);
    for (r, res) in records.iter().zip(&results) {
        match res {
            Ok((c, h)) => {
                computed += c;
                cached += h;
            }
            Err(msg) => {
                log::warn!("{}: {msg}", r.clip_path);
                failures.push_str(&format!("{}\t{msg}\n", r.clip_path));
                failed += 1;
            }
        }
    }
    write(&store.dir.join("failures.txt"), &failures)?;
    println!(
        "{}: {} clips, {} features computed, {} cached, {} failed -> {}",
        kind,
        records.len(),
        computed,
        cached,
        failed,
        store.dir.display()
    );
    check_failures(failed, records.len(), "extraction")
}

pub fn cmd_augment_preview(run: &RunConfig, input: &Path, out: &Path, kind: FeatureKind) -> Result<()> {
    let cfg = run.pipeline(kind)?;
    let prepared = prepare_clip(&load_wav(input)?, &cfg)?;
    create_dir(out)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "clip".into());
    let recipe = &run.augment.recipe;
    let spec = recipe.spec_augment.unwrap_or_default();
    let key = input.display().to_string();
    for (i, v) in recipe.variants().into_iter().enumerate() {
        let seed = variant_seed(run.seed, &key, i);
        let label = v.label();
        let audio = match v {
            Variant::Clean => Some(prepared.clone()),
            Variant::Noise { snr_db } => Some(add_noise(&prepared, snr_db, seed)?),
            Variant::Pitch { semitones } => Some(pitch_shift(&prepared, semitones)?),
            Variant::SpecAugment => None,
        };
        if let Some(a) = &audio {
            write_wav(out.join(format!("{stem}.{label}.wav")), a)?;
        }
        let t = variant_features(&prepared, v, &cfg, &spec, seed)?;
        write_serf_file(out.join(format!("{stem}.{label}.serf")), &t)?;
        println!(
            "{label:<12} {} samples, features {}x{}x{}, mean {:.4}",
            audio.as_ref().map_or(prepared.len(), |a| a.len()),
            t.channels,
            t.height,
            t.frames,
            t.mean()
        );
    }
    Ok(())
}

/// Records of one dataset with their labels, after dropping clips whose
/// clean features cannot be produced.
struct Prepared<'a> {
    records: &'a [UtteranceRecord],
    labels: Vec<usize>,
    class_names: Vec<String>,
    dataset: Dataset,
    source: CachedSource<'a>,
}

fn prepare_data<'a>(
    run: &RunConfig,
    data: &DataArgs,
    out: &Path,
    all: &'a mut Vec<UtteranceRecord>,
    base: Option<PathBuf>,
) -> Result<Prepared<'a>> {
    let dataset = all[0].dataset;
    if let Some(r) = all.iter().find(|r| r.dataset != dataset) {
        return Err(Error::Other(format!(
            "manifest mixes datasets: {} and {}",
            dataset.name(),
            r.dataset.name()
        )));
    }
    let scheme = ClassScheme::new(dataset, run.joint_gender);
    let kind: FeatureKind = data.feature.into();
    let cfg = run.pipeline(kind)?;
    let root = data
        .cache
        .clone()
        .unwrap_or_else(|| FeatureStore::default_root(&out.join("cache")));
    let store = FeatureStore::new(&root, cfg);
    store.write_manifest()?;

    // prefilter: every kept record has a label and cached clean features
    let probe = CachedSource {
        records: all.as_slice(),
        store: store.clone(),
        recipe: run.augment.recipe.clone(),
        seed: run.seed,
        base_dir: base.clone(),
    };
    let keep: Vec<bool> = (0..all.len())
        .into_par_iter()
        .map(|i| {
            if scheme.label(&all[i]).is_none() {
                log::warn!("{}: emotion not in the {} class set", all[i].clip_path, dataset.name());
                return false;
            }
            match probe.clean(i) {
                Ok(_) => true,
                Err(e) => {
                    log::warn!("{}: {e}", all[i].clip_path);
                    false
                }
            }
        })
        .collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    check_failures(dropped, all.len(), "feature extraction")?;
    let mut i = 0;
    all.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    let all: &'a [UtteranceRecord] = all;
    let labels = all
        .iter()
        .map(|r| scheme.label(r).expect("filtered above"))
        .collect();
    Ok(Prepared {
        records: all,
        labels,
        class_names: scheme.class_names(),
        dataset,
        source: CachedSource {
            records: all,
            store,
            recipe: run.augment.recipe.clone(),
            seed: run.seed,
            base_dir: base,
        },
    })
}

fn method_name(a: Architecture) -> &'static str {
    match a {
        Architecture::DeepResLflb => "DeepResLFLB",
        Architecture::Baseline => "2D-LFLB",
    }
}

fn model_config(
    run: &RunConfig,
    overrides: &[String],
    data: &DataArgs,
    n_classes: usize,
) -> Result<crate::model::ModelConfig> {
    let cfg = run.pipeline(data.feature.into())?;
    Ok(run.model(data.model_config.as_deref(), overrides, cfg.input_shape(), n_classes)?)
}

pub fn cmd_train(run: &RunConfig, overrides: &[String], data: &DataArgs, out: &Path) -> Result<()> {
    let (mut all, base) = load_records(&data.manifest)?;
    create_dir(out)?;
    let p = prepare_data(run, data, out, &mut all, base)?;
    let model_cfg = model_config(run, overrides, data, p.class_names.len())?;
    let plan = split_dataset(p.records, SplitRatios::default(), run.seed)?;
    let (c, h, w) = model_cfg.input;
    let shape = [c, h, w];
    let train = gather_set(&p.source, &plan.train, &p.labels, run.augment.enabled, shape)?;
    let val = gather_set(&p.source, &plan.validation, &p.labels, false, shape)?;
    let test = gather_set(&p.source, &plan.test, &p.labels, false, shape)?;
    log::info!(
        "train {} (from {} clips), val {}, test {}",
        train.len(),
        plan.train.len(),
        val.len(),
        test.len()
    );
    let mut model: Model<f32> = build_model(&model_cfg)?;
    let history = train_model(&mut model, &train, &val, &run.train)?;
    let (test_loss, _, preds) = evaluate_loss(&mut model, &test, 32)?;
    let report = MetricsReport::evaluate(&preds, &test.labels, &p.class_names)?;
    let kind: FeatureKind = data.feature.into();
    let agg = AggregateReport::new(
        method_name(model_cfg.architecture),
        &kind.name().to_ascii_uppercase(),
        &p.dataset.name().to_ascii_uppercase(),
        std::slice::from_ref(&report),
    )?;

    write(&out.join("history.csv"), history.to_csv())?;
    model.save_weights(&out.join("weights.serw"))?;
    write(&out.join("metrics.json"), agg.to_json())?;
    write(
        &out.join("report.json"),
        serde_json::to_string_pretty(&json!({ "test_loss": test_loss, "report": report }))
            .expect("json"),
    )?;
    write(&out.join("split.json"), plan.to_json())?;
    write(&out.join("model.cfg"), model_cfg.render())?;
    println!(
        "test accuracy {:.4}, macro F1 {:.4}, best epoch {:?} of {}",
        report.accuracy,
        report.f1,
        history.best_epoch,
        history.epochs.len()
    );
    Ok(())
}

/// Order-sensitive digest over the bytes of every clip.
fn dataset_checksum(records: &[UtteranceRecord], base: &Option<PathBuf>) -> Result<String> {
    let digests: Vec<Vec<u8>> = records
        .par_iter()
        .map(|r| {
            let p = resolve(base, &r.clip_path);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            Ok(Sha256::digest(&bytes).to_vec())
        })
        .collect::<Result<_>>()?;
    let mut h = Sha256::new();
    for d in digests {
        h.update(d);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn cmd_crossval(
    run: &RunConfig,
    overrides: &[String],
    data: &DataArgs,
    out: &Path,
    k: Option<usize>,
) -> Result<()> {
    let manifest_bytes = fs::read(&data.manifest).map_err(|e| Error::io(&data.manifest, e))?;
    let (mut all, base) = load_records(&data.manifest)?;
    create_dir(out)?;
    let p = prepare_data(run, data, out, &mut all, base.clone())?;
    let model_cfg = model_config(run, overrides, data, p.class_names.len())?;
    let kind: FeatureKind = data.feature.into();
    let k = k.unwrap_or(run.k);
    let cfg = CrossvalConfig {
        k,
        seed: run.seed,
        model: model_cfg.clone(),
        train: run.train.clone(),
        augment: run.augment.enabled,
        parallel_folds: run.parallel_folds,
        method: method_name(model_cfg.architecture).to_string(),
        feature: kind.name().to_ascii_uppercase(),
        dataset: p.dataset.name().to_ascii_uppercase(),
    };
    let result = run_crossval(p.records, &p.labels, &p.class_names, &p.source, &cfg)?;

    for f in &result.folds {
        let i = f.fold;
        write(&out.join(format!("fold{i}.history.csv")), f.history.to_csv())?;
        write_state_file(&out.join(format!("fold{i}.weights.serw")), &f.weights)?;
        write(
            &out.join(format!("fold{i}.report.json")),
            serde_json::to_string_pretty(&json!({ "test_loss": f.test_loss, "report": f.report }))
                .expect("json"),
        )?;
        write(&out.join(format!("fold{i}.split.json")), f.plan.to_json())?;
    }
    write(&out.join("metrics.json"), result.aggregate.to_json())?;
    let (csv, _) = format_report(std::slice::from_ref(&result.aggregate));
    write(&out.join("metrics.csv"), &csv)?;
    let model_text = model_cfg.render();
    write(&out.join("model.cfg"), &model_text)?;
    write(&out.join("run.cfg"), run.doc.render())?;

    let pipeline_hash = p.source.store.hash.clone();
    let train_json = serde_json::to_string(&run.train).expect("json");
    let config_hash = hex16(
        format!(
            "{}\n{pipeline_hash}\n{model_text}\n{train_json}\n{k}\n{}\n{:?}",
            run.seed, run.augment.enabled, run.augment.recipe
        )
        .as_bytes(),
    );
    let folds: Vec<_> = result
        .folds
        .iter()
        .map(|f| {
            json!({
                "fold": f.fold,
                "train": f.plan.train.len(),
                "validation": f.plan.validation.len(),
                "test": f.plan.test.len(),
                "epochs": f.history.epochs.len(),
                "best_epoch": f.history.best_epoch,
                "stopped_early": f.history.stopped_early,
                "test_loss": f.test_loss,
                "accuracy": f.report.accuracy,
                "precision": f.report.precision,
                "recall": f.report.recall,
                "f1": f.report.f1,
            })
        })
        .collect();
    let manifest = json!({
        "config_hash": config_hash,
        "pipeline_hash": pipeline_hash,
        "feature": kind.name(),
        "dataset": &p.dataset.name().to_ascii_uppercase(),
        "k": k,
        "augment": run.augment.enabled,
        "seeds": {
            "run": run.seed,
            "model": model_cfg.seed,
            "train": run.train.seed,
            "per_fold": "base + fold index",
        },
        "dataset_checksums": {
            "manifest_sha256": Sha256::digest(&manifest_bytes).iter().map(|b| format!("{b:02x}")).collect::<String>(),
            "clips_sha256": dataset_checksum(p.records, &base)?,
            "clips": p.records.len(),
        },
        "folds": folds,
    });
    write(
        &out.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("json"),
    )?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_paramcount(
    run: &RunConfig,
    overrides: &[String],
    model_config: Option<&Path>,
    feature: Option<FeatureKind>,
    classes: usize,
) -> Result<()> {
    let kinds = match feature {
        Some(k) => vec![k],
        None => vec![FeatureKind::Lms, FeatureKind::Lmsddc],
    };
    for kind in kinds {
        let input = run.pipeline(kind)?.input_shape();
        let cfg = run.model(model_config, overrides, input, classes)?;
        let model = build_model::<f32>(&cfg)?;
        let baseline = build_2dlflb_baseline::<f32>(&BaselineConfig::matched(&cfg))?;
        let (m, b) = (count_parameters(&model), count_parameters(&baseline));
        let reduction = 100.0 * (1.0 - m as f64 / b as f64);
        println!(
            "{}: {} {m}, baseline {b}, reduction: {reduction:.2}%",
            kind.name().to_ascii_uppercase(),
            method_name(cfg.architecture)
        );
    }
    Ok(())
}

pub fn cmd_report(inputs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let rows = inputs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<AggregateReport>(&text)
                .map_err(|e| Error::Other(format!("{}: not a metrics JSON: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let (csv, json) = format_report(&rows);
    print!("{csv}");
    if let Some(o) = out {
        write(&o.with_extension("csv"), &csv)?;
        write(&o.with_extension("json"), &json)?;
    }
    Ok(())
}
