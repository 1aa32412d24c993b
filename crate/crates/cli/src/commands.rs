use std::path::{Path, PathBuf};

use han_ddi::espf::{FeatureMatrix, Fingerprints, Vocabulary};
use han_ddi::hin::{stats, validate, EntityKind, EntityRegistry, Hin, RegistryMode, Relation};
use han_ddi::io::{read_to_string, tsv_records};
use han_ddi::metapath::{CommutingMatrix, NeighborGraph};
use han_ddi::model::{
    checkpoint_precision, decode_checkpoint, encode_checkpoint, HanModel, ModelInputs, Variant,
};
use han_ddi::pipeline::{
    build_hin_with, espf_from_smiles, metapath_graphs, FeatureMode, HinSources, SourceText,
};
use han_ddi::synth::{planted, PlantedConfig};
use han_ddi::tensor::Real;
use han_ddi::train::{
    evaluate_pairs, run_experiment, split_cold_start, split_edges, Metrics, Protocol, SplitBundle,
    DEFAULT_THRESHOLD,
};
use han_ddi::verify::{gradcheck_synthetic, GRADCHECK_DRUGS, GRADCHECK_TOLERANCE};
use serde_json::{json, Value};

use crate::config::{Precision, RunConfig};
use crate::manifest::Manifest;
use crate::CliError;

fn read_source(path: Option<&Path>, key: &str, m: &mut Manifest) -> Result<SourceText, CliError> {
    let path = path.ok_or_else(|| CliError::config(format!("paths.{key} is not set")))?;
    let text = read_to_string(path)?;
    m.input(path, text.as_bytes());
    Ok(SourceText::new(path.display().to_string(), text))
}

fn load_hin(cfg: &RunConfig, m: &mut Manifest) -> Result<(Hin, Option<Fingerprints>), CliError> {
    let p = &cfg.paths;
    let sources = HinSources {
        targets: read_source(p.targets.as_deref(), "targets", m)?,
        side_effects: read_source(p.side_effects.as_deref(), "side_effects", m)?,
        ppi: read_source(p.ppi.as_deref(), "ppi", m)?,
        fingerprints: match &p.fingerprints {
            Some(path) => Some(read_source(Some(path), "fingerprints", m)?),
            None => None,
        },
        ddis: read_source(p.ddis.as_deref(), "ddis", m)?,
    };
    let registry = match &p.registry {
        Some(path) => {
            let src = read_source(Some(path), "registry", m)?;
            EntityRegistry::from_tsv(&src.text, &src.name)?
        }
        None if cfg.registry_mode == RegistryMode::Strict => {
            return Err(CliError::config(
                "strict registry mode needs paths.registry",
            ));
        }
        None => EntityRegistry::new(),
    };
    Ok(build_hin_with(&sources, registry, cfg.registry_mode)?)
}

fn load_features(
    cfg: &RunConfig,
    hin: &Hin,
    fingerprints: Option<&Fingerprints>,
    m: &mut Manifest,
) -> Result<(FeatureMatrix, Option<Vocabulary>), CliError> {
    match cfg.features {
        FeatureMode::Espf => {
            let smiles = read_source(cfg.paths.smiles.as_deref(), "smiles", m)?;
            let (vocab, fm) = espf_from_smiles(
                &smiles,
                hin.registry(),
                cfg.espf_threshold,
                cfg.espf_max_size,
            )?;
            Ok((fm, Some(vocab)))
        }
        FeatureMode::Fingerprint => {
            let fp = fingerprints
                .ok_or_else(|| CliError::config("fingerprint features need paths.fingerprints"))?;
            Ok((fp.feature_matrix(hin.drug_count())?, None))
        }
    }
}

fn load_graphs(
    cfg: &RunConfig,
    hin: &Hin,
) -> Result<Vec<(CommutingMatrix, NeighborGraph)>, CliError> {
    Ok(metapath_graphs(hin, &cfg.specs()?, cfg.graph_threshold)?)
}

fn split(cfg: &RunConfig, hin: &Hin) -> Result<SplitBundle, CliError> {
    Ok(match cfg.protocol {
        Protocol::Edges => split_edges(hin.drug_count(), hin.ddis(), cfg.ratios, cfg.seed)?,
        Protocol::ColdStart => {
            split_cold_start(hin.drug_count(), hin.ddis(), cfg.drug_fraction, cfg.seed)?
        }
    })
}

/// Everything a model-facing command needs.
struct Prepared {
    hin: Hin,
    features: FeatureMatrix,
    graphs: Vec<NeighborGraph>,
}

fn prepare(cfg: &RunConfig, m: &mut Manifest) -> Result<Prepared, CliError> {
    let (hin, fp) = load_hin(cfg, m)?;
    let (features, _) = load_features(cfg, &hin, fp.as_ref(), m)?;
    let graphs = load_graphs(cfg, &hin)?
        .into_iter()
        .map(|(_, g)| g)
        .collect();
    Ok(Prepared {
        hin,
        features,
        graphs,
    })
}

fn metrics_json(m: &Metrics) -> Value {
    json!({
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "auroc": m.auroc,
        "threshold": m.threshold,
        "tp": m.tp,
        "fp": m.fp,
        "tn": m.tn,
        "fn": m.fn_,
    })
}

fn split_json(bundle: &SplitBundle) -> Value {
    json!({
        "protocol": bundle.protocol.to_string(),
        "train_pairs": bundle.train.len(),
        "validation_pairs": bundle.validation.len(),
        "test_pairs": bundle.test.len(),
        "held_out_drugs": bundle.held_out.len(),
        "warnings": bundle.warnings,
    })
}

/// Metrics of every non-empty partition, as `(name, metrics)`.
type PartitionMetrics = Vec<(&'static str, Metrics)>;

fn evaluate_partitions<T: Real>(
    model: &HanModel<T>,
    inputs: &ModelInputs<T>,
    bundle: &SplitBundle,
) -> Result<PartitionMetrics, CliError> {
    let mut out = Vec::new();
    for (name, pairs) in bundle.partitions() {
        if !pairs.is_empty() {
            out.push((
                name,
                evaluate_pairs(model, inputs, pairs, DEFAULT_THRESHOLD)?,
            ));
        }
    }
    Ok(out)
}

fn metrics_text(metrics: &PartitionMetrics) -> String {
    metrics
        .iter()
        .map(|(name, m)| m.to_text(&format!("{name}_")))
        .collect()
}

fn metrics_object(metrics: &PartitionMetrics) -> Value {
    Value::Object(
        metrics
            .iter()
            .map(|(name, m)| (name.to_string(), metrics_json(m)))
            .collect(),
    )
}

fn beta_of<T: Real>(model: &HanModel<T>, inputs: &ModelInputs<T>) -> Result<Vec<f64>, CliError> {
    Ok(model
        .encode(inputs)?
        .beta
        .into_iter()
        .map(Real::as_f64)
        .collect())
}

struct Fitted {
    checkpoint: Vec<u8>,
    history: String,
    metrics: PartitionMetrics,
    beta: Vec<f64>,
    summary: Value,
}

fn fit_in<T: Real>(
    cfg: &RunConfig,
    data: &Prepared,
    bundle: &SplitBundle,
    variant: Variant,
) -> Result<Fitted, CliError> {
    let model_cfg = cfg.model_config(data.features.dim());
    let exp = run_experiment::<T>(
        &model_cfg,
        &data.graphs,
        &data.features,
        bundle,
        &cfg.train_config(),
        variant,
    )?;
    let inputs = ModelInputs::<T>::new(&data.features, &data.graphs)?;
    let metrics = evaluate_partitions(&exp.model, &inputs, bundle)?;
    let beta = beta_of(&exp.model, &inputs)?;
    let h = &exp.history;
    let summary = json!({
        "best_epoch": h.best_epoch,
        "stopped_epoch": h.stopped_epoch,
        "early_stopped": h.early_stopped,
    });
    Ok(Fitted {
        checkpoint: encode_checkpoint(&exp.model),
        history: h.to_tsv(),
        metrics,
        beta,
        summary,
    })
}

fn fit(
    cfg: &RunConfig,
    command: &str,
    dir_name: &str,
    variant: Variant,
) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new(command);
    let data = prepare(cfg, &mut m)?;
    let bundle = split(cfg, &data.hin)?;
    let fitted = match cfg.precision {
        Precision::F32 => fit_in::<f32>(cfg, &data, &bundle, variant)?,
        Precision::F64 => fit_in::<f64>(cfg, &data, &bundle, variant)?,
    };
    let dir = cfg.paths.output.join(dir_name);
    m.write(&dir.join("checkpoint.bin"), &fitted.checkpoint)?;
    m.write(&dir.join("history.tsv"), fitted.history.as_bytes())?;
    let text = metrics_text(&fitted.metrics);
    m.write(&dir.join("metrics.txt"), text.as_bytes())?;
    let summary = json!({
        "command": command,
        "variant": variant.to_string(),
        "seed": cfg.seed,
        "precision": cfg.precision.bits(),
        "config": cfg.echo(),
        "metapaths": cfg.metapaths,
        "beta": fitted.beta,
        "training": fitted.summary,
        "split": split_json(&bundle),
        "metrics": metrics_object(&fitted.metrics),
    });
    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    m.write(&dir.join("summary.json"), summary_text.as_bytes())?;
    m.note("variant", json!(variant.to_string()));
    m.note("beta", json!(fitted.beta));
    m.note("beta_fixed", json!(variant == Variant::UniformMetaPath));
    m.finish(&dir, cfg)?;
    print!("{text}");
    Ok(dir)
}

pub fn synth(
    cfg: &RunConfig,
    dir: &Path,
    drugs: usize,
    proteins: usize,
) -> Result<PathBuf, CliError> {
    if drugs < 2 {
        return Err(CliError::config("synth needs at least 2 drugs"));
    }
    let mut m = Manifest::new("synth");
    let files = planted(&PlantedConfig {
        drugs,
        proteins,
        seed: cfg.seed,
        ..PlantedConfig::default()
    });
    let paths = files.write_dir(dir)?;
    for p in [
        &paths.targets,
        &paths.side_effects,
        &paths.ppi,
        &paths.fingerprints,
        &paths.smiles,
        &paths.ddis,
    ] {
        let text = read_to_string(p)?;
        m.input(p, text.as_bytes());
    }
    let config = format!(
        "# Planted synthetic dataset, seed {seed}.\n\
         [paths]\ntargets = targets.tsv\nside_effects = side_effects.tsv\nppi = ppi.tsv\n\
         fingerprints = fingerprints.tsv\nsmiles = smiles.tsv\nddis = ddi.tsv\noutput = out\n\n\
         [features]\nmode = fingerprint\n\n[run]\nseed = {seed}\n",
        seed = cfg.seed
    );
    m.write(&dir.join("config.ini"), config.as_bytes())?;
    m.note("drugs", json!(drugs));
    m.note("proteins", json!(proteins));
    m.finish(dir, cfg)?;
    println!("{}", dir.join("config.ini").display());
    Ok(dir.to_path_buf())
}

pub fn build_graph(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new("build-graph");
    let (hin, _) = load_hin(cfg, &mut m)?;
    let dir = cfg.paths.output.join("graph");
    hin.write_dir(&dir)?;
    let mut written = vec![dir.join("registry.tsv"), dir.join("ddi.tsv")];
    written.extend(
        Relation::ALL
            .iter()
            .map(|r| dir.join(format!("{}.tsv", r.symbol()))),
    );
    for path in &written {
        let bytes = std::fs::read(path).map_err(|e| han_ddi::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        m.write(path, &bytes)?;
    }
    let report = validate(&hin);
    let report_text = report.to_text();
    m.write(&dir.join("validation.txt"), report_text.as_bytes())?;
    let stats_text = stats(&hin).to_tsv();
    m.write(&dir.join("stats.tsv"), stats_text.as_bytes())?;
    m.note("validation_passed", json!(report.passed()));
    m.finish(&dir, cfg)?;
    print!("{stats_text}");
    if report.passed() {
        Ok(dir)
    } else {
        eprint!("{report_text}");
        Err(CliError::CheckFailed(format!(
            "network validation failed; see {}",
            dir.join("validation.txt").display()
        )))
    }
}

pub fn metapaths(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new("metapaths");
    let (hin, _) = load_hin(cfg, &mut m)?;
    let dir = cfg.paths.output.join("metapaths");
    for (cm, graph) in load_graphs(cfg, &hin)? {
        m.write(
            &dir.join(format!("{}.tsv", cm.name)),
            cm.to_tsv().as_bytes(),
        )?;
        let edges = (0..graph.drugs())
            .map(|i| graph.neighbors(i).count())
            .sum::<usize>();
        println!(
            "{}\t{} nonzero counts\t{} neighbor entries",
            cm.name,
            cm.counts.nnz(),
            edges
        );
    }
    m.finish(&dir, cfg)?;
    Ok(dir)
}

pub fn featurize(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new("featurize");
    let (hin, fp) = load_hin(cfg, &mut m)?;
    let (features, vocab) = load_features(cfg, &hin, fp.as_ref(), &mut m)?;
    let dir = cfg.paths.output.join("features");
    if let Some(v) = &vocab {
        m.write(&dir.join("vocabulary.txt"), v.to_text().as_bytes())?;
    }
    m.write(
        &dir.join("features.tsv"),
        features.to_tsv(hin.registry()).as_bytes(),
    )?;
    m.note("mode", json!(cfg.features.to_string()));
    m.note("dim", json!(features.dim()));
    m.finish(&dir, cfg)?;
    println!("{} drugs x {} features", features.drugs(), features.dim());
    Ok(dir)
}

pub fn train(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fit(cfg, "train", "train", Variant::Full)
}

pub fn ablate(cfg: &RunConfig, variant: &str) -> Result<PathBuf, CliError> {
    let v: Variant = variant.parse()?;
    if v == Variant::Full {
        return Err(CliError::config("ablate needs --variant mp or n"));
    }
    fit(cfg, "ablate", &format!("ablate-{v}"), v)
}

fn read_checkpoint(
    cfg: &RunConfig,
    path: Option<&Path>,
    m: &mut Manifest,
) -> Result<Vec<u8>, CliError> {
    let path = path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.paths.output.join("train").join("checkpoint.bin"));
    let bytes = std::fs::read(&path).map_err(|e| han_ddi::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    m.input(&path, &bytes);
    Ok(bytes)
}

fn compatible<T: Real>(
    model: &HanModel<T>,
    data: &Prepared,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    if model.config().input_dim != data.features.dim() {
        return Err(CliError::config(format!(
            "checkpoint expects {} input features, the configured features have {}",
            model.config().input_dim,
            data.features.dim()
        )));
    }
    if model.metapaths() != cfg.metapaths.as_slice() {
        return Err(CliError::config(format!(
            "checkpoint was trained on meta-paths {:?}, configuration selects {:?}",
            model.metapaths(),
            cfg.metapaths
        )));
    }
    Ok(())
}

fn evaluate_in<T: Real>(
    bytes: &[u8],
    cfg: &RunConfig,
    data: &Prepared,
    bundle: &SplitBundle,
) -> Result<(PartitionMetrics, Vec<f64>, String), CliError> {
    let model = decode_checkpoint::<T>(bytes)?;
    compatible(&model, data, cfg)?;
    let inputs = ModelInputs::<T>::new(&data.features, &data.graphs)?;
    let metrics = evaluate_partitions(&model, &inputs, bundle)?;
    Ok((
        metrics,
        beta_of(&model, &inputs)?,
        model.variant().to_string(),
    ))
}

pub fn evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new("evaluate");
    let bytes = read_checkpoint(cfg, checkpoint, &mut m)?;
    let data = prepare(cfg, &mut m)?;
    let bundle = split(cfg, &data.hin)?;
    let (metrics, beta, variant) = match checkpoint_precision(&bytes)? {
        64 => evaluate_in::<f64>(&bytes, cfg, &data, &bundle)?,
        _ => evaluate_in::<f32>(&bytes, cfg, &data, &bundle)?,
    };
    let dir = cfg.paths.output.join("evaluate");
    let text = metrics_text(&metrics);
    m.write(&dir.join("metrics.txt"), text.as_bytes())?;
    let summary = json!({
        "command": "evaluate",
        "variant": variant,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "beta": beta,
        "split": split_json(&bundle),
        "metrics": metrics_object(&metrics),
    });
    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    m.write(&dir.join("summary.json"), summary_text.as_bytes())?;
    m.finish(&dir, cfg)?;
    print!("{text}");
    Ok(dir)
}

/// Reads `drug<TAB>drug` lines, rejecting unknown ids and self-pairs.
fn parse_pairs(
    text: &str,
    source: &str,
    registry: &EntityRegistry,
) -> Result<Vec<(usize, usize)>, CliError> {
    let mut out = Vec::new();
    for (line, fields) in tsv_records(text) {
        let [a, b] = fields[..] else {
            return Err(CliError::config(format!(
                "{source}:{line}: expected 2 tab-separated drug ids"
            )));
        };
        let resolve = |id: &str| {
            registry.get(EntityKind::Drug, id.trim()).ok_or_else(|| {
                CliError::config(format!("{source}:{line}: unknown drug id {:?}", id.trim()))
            })
        };
        let (i, j) = (resolve(a)?, resolve(b)?);
        if i == j {
            return Err(CliError::config(format!(
                "{source}:{line}: self-pair ({}, {}) cannot be scored",
                a.trim(),
                b.trim()
            )));
        }
        out.push((i, j));
    }
    Ok(out)
}

fn predict_in<T: Real>(
    bytes: &[u8],
    cfg: &RunConfig,
    data: &Prepared,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>, CliError> {
    let model = decode_checkpoint::<T>(bytes)?;
    compatible(&model, data, cfg)?;
    let inputs = ModelInputs::<T>::new(&data.features, &data.graphs)?;
    Ok(model
        .score_pairs(&inputs, pairs)?
        .into_iter()
        .map(Real::as_f64)
        .collect())
}

pub fn predict(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    pairs_path: &Path,
) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new("predict");
    let bytes = read_checkpoint(cfg, checkpoint, &mut m)?;
    let data = prepare(cfg, &mut m)?;
    let src = read_source(Some(pairs_path), "pairs", &mut m)?;
    let pairs = parse_pairs(&src.text, &src.name, data.hin.registry())?;
    let scores = match checkpoint_precision(&bytes)? {
        64 => predict_in::<f64>(&bytes, cfg, &data, &pairs)?,
        _ => predict_in::<f32>(&bytes, cfg, &data, &pairs)?,
    };
    let mut ranked: Vec<((usize, usize), f64)> = pairs.into_iter().zip(scores).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let reg = data.hin.registry();
    let mut out = String::from("drug_a\tdrug_b\tscore\n");
    for ((i, j), s) in &ranked {
        out.push_str(&format!(
            "{}\t{}\t{s:.8}\n",
            reg.id(EntityKind::Drug, *i),
            reg.id(EntityKind::Drug, *j)
        ));
    }
    let dir = cfg.paths.output.join("predict");
    m.write(&dir.join("predictions.tsv"), out.as_bytes())?;
    m.finish(&dir, cfg)?;
    print!("{out}");
    Ok(dir)
}

pub fn gradcheck(
    cfg: &RunConfig,
    probes: usize,
    epsilon: f64,
    fault: Option<&str>,
) -> Result<PathBuf, CliError> {
    let mut m = Manifest::new("gradcheck");
    let report = gradcheck_synthetic(cfg.seed, probes, epsilon, fault)?;
    let passed = report.passes(GRADCHECK_TOLERANCE);
    let mut text = String::from("group\tindex\tanalytic\tnumeric\trelative_error\n");
    for c in &report.worst {
        text.push_str(&format!(
            "{}\t{}\t{:.12e}\t{:.12e}\t{:.3e}\n",
            c.group, c.index, c.analytic, c.numeric, c.error
        ));
    }
    text.push_str(&format!(
        "# drugs\t{GRADCHECK_DRUGS}\n# probes\t{}\n# epsilon\t{epsilon:e}\n# max_relative_error\t{:.3e}\n# tolerance\t{GRADCHECK_TOLERANCE:e}\n# status\t{}\n",
        report.probes,
        report.max_error(),
        if passed { "PASS" } else { "FAIL" }
    ));
    let dir = cfg.paths.output.join("gradcheck");
    m.write(&dir.join("report.tsv"), text.as_bytes())?;
    m.note("max_relative_error", json!(report.max_error()));
    m.note("passed", json!(passed));
    if let Some(f) = fault {
        m.note("injected_fault", json!(f));
    }
    m.finish(&dir, cfg)?;
    print!("{text}");
    if passed {
        Ok(dir)
    } else {
        Err(CliError::CheckFailed(format!(
            "max relative error {:.3e} is not below {GRADCHECK_TOLERANCE:e}",
            report.max_error()
        )))
    }
}
