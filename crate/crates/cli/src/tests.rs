use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::Value;

use super::*;

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("han-ddi")
        .chain(list.iter().copied())
        .map(String::from)
        .collect()
}

fn status(list: &[&str]) -> i32 {
    run(args(list))
}

fn exec(list: &[&str]) -> Result<PathBuf, CliError> {
    execute(&Cli::try_parse_from(args(list)).unwrap())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two drugs, two proteins, one side effect, one interaction.
fn toy_dir(ppi: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("targets.tsv"),
        "# drug\tprotein\nd1\tp1\nd1\tp2\nd2\tp2\n",
    )
    .unwrap();
    fs::write(d.join("se.tsv"), "d2\ts1\n").unwrap();
    fs::write(d.join("ppi.tsv"), ppi).unwrap();
    fs::write(d.join("ddi.tsv"), "d1\td2\n").unwrap();
    fs::write(d.join("smiles.tsv"), "d1\tCCO\nd2\tCCN\n").unwrap();
    fs::write(
        d.join("run.ini"),
        "[paths]\ntargets = targets.tsv\nside_effects = se.tsv\nppi = ppi.tsv\nddis = ddi.tsv\nsmiles = smiles.tsv\noutput = out\n\n[features]\nthreshold = 2\n",
    )
    .unwrap();
    dir
}

fn synth_dir(drugs: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        status(&[
            "synth",
            "--dir",
            s(dir.path()),
            "--drugs",
            drugs,
            "--proteins",
            "4"
        ]),
        0
    );
    dir
}

/// Flags for a fast training run.
const SMALL: [&str; 8] = [
    "--set",
    "model.hidden=4",
    "--set",
    "model.heads=2",
    "--set",
    "model.metapath_dim=8",
    "--set",
    "train.epochs=8",
];

fn with_small<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter()
        .chain(SMALL.iter())
        .chain(tail)
        .copied()
        .collect()
}

#[test]
fn build_graph_writes_exact_fixture_stats() {
    let dir = toy_dir("p1\tp2\n");
    let cfg = dir.path().join("run.ini");
    assert_eq!(status(&["--config", s(&cfg), "build-graph"]), 0);
    let out = dir.path().join("out/graph");
    assert_eq!(
        fs::read_to_string(out.join("stats.tsv")).unwrap(),
        "Drug\t2\nProtein\t2\nSideEffect\t1\nSubstructure\t0\nDDI\t1\nDPI\t3\nDrugSideEffect\t1\nDrugSubstructure\t0\nPPI\t1\n"
    );
    for f in [
        "registry.tsv",
        "T.tsv",
        "C.tsv",
        "H.tsv",
        "P.tsv",
        "ddi.tsv",
        "validation.txt",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["validation_passed"], true);
    assert!(manifest["config"]
        .as_str()
        .unwrap()
        .contains("[train]\nlr = 0.005"));
}

#[test]
fn corrupt_protein_interactions_fail_validation() {
    let dir = toy_dir("p1\tp2\np1\tp1\n");
    let cfg = dir.path().join("run.ini");
    assert_eq!(
        status(&["--config", s(&cfg), "build-graph"]),
        EXIT_CHECK_FAILED
    );
    let report = fs::read_to_string(dir.path().join("out/graph/validation.txt")).unwrap();
    assert!(report.contains("(p1, p1)"), "{report}");
}

#[test]
fn missing_input_names_the_path() {
    let dir = toy_dir("p1\tp2\n");
    let cfg = dir.path().join("run.ini");
    fs::remove_file(dir.path().join("se.tsv")).unwrap();
    let err = exec(&["--config", s(&cfg), "build-graph"]).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_ERROR);
    assert!(err.to_string().contains("se.tsv"), "{err}");
}

#[test]
fn bad_configuration_is_a_usage_error() {
    let dir = toy_dir("p1\tp2\n");
    let cfg = dir.path().join("run.ini");
    assert_eq!(
        status(&["--config", s(&cfg), "--set", "model.width=3", "build-graph"]),
        EXIT_USAGE
    );
    assert_eq!(
        status(&["--config", s(&cfg), "--protocol", "sideways", "build-graph"]),
        EXIT_USAGE
    );
    assert_eq!(
        status(&["--config", s(&cfg), "--metapaths", "DID-7", "build-graph"]),
        EXIT_USAGE
    );
    assert_eq!(status(&["--precision", "16", "gradcheck"]), EXIT_USAGE);
    assert_eq!(
        status(&[
            "--config",
            s(&cfg),
            "--set",
            "graph.registry_mode=strict",
            "build-graph"
        ]),
        EXIT_USAGE
    );
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let dir = toy_dir("p1\tp2\n");
    let cfg_path = dir.path().join("run.ini");
    let mut text = fs::read_to_string(&cfg_path).unwrap();
    text.push_str("\n[run]\nseed = 5\nprecision = 64\n[model]\nhidden = 3\n");
    fs::write(&cfg_path, text).unwrap();
    let cli = Cli::try_parse_from(args(&[
        "--config",
        s(&cfg_path),
        "--seed",
        "7",
        "--set",
        "model.hidden=2",
        "train",
    ]))
    .unwrap();
    let cfg = resolve_config(&cli).unwrap();
    assert_eq!(
        (cfg.seed, cfg.precision, cfg.hidden, cfg.heads),
        (7, Precision::F64, 2, 8)
    );
    assert_eq!(cfg.paths.targets.unwrap(), dir.path().join("targets.tsv"));
    assert_eq!(cfg.paths.output, dir.path().join("out"));
}

#[test]
fn featurize_traces_the_fixture_and_is_deterministic() {
    let dir = toy_dir("p1\tp2\n");
    let cfg = dir.path().join("run.ini");
    let out = dir.path().join("out/features");
    assert_eq!(status(&["--config", s(&cfg), "featurize"]), 0);
    let vocab = fs::read(out.join("vocabulary.txt")).unwrap();
    let features = fs::read(out.join("features.tsv")).unwrap();
    let text = String::from_utf8(vocab.clone()).unwrap();
    assert!(text.lines().any(|l| l == "CC\tC\tC"), "{text}");
    assert_eq!(status(&["--config", s(&cfg), "featurize"]), 0);
    assert_eq!(fs::read(out.join("vocabulary.txt")).unwrap(), vocab);
    assert_eq!(fs::read(out.join("features.tsv")).unwrap(), features);
}

#[test]
fn fingerprint_features_have_167_columns() {
    let dir = synth_dir("12");
    let cfg = dir.path().join("config.ini");
    assert_eq!(
        status(&[
            "--config",
            s(&cfg),
            "--features",
            "fingerprint",
            "featurize"
        ]),
        0
    );
    let manifest = json(&dir.path().join("out/features/manifest.json"));
    assert_eq!(manifest["dim"], 167);
    assert!(!dir.path().join("out/features/vocabulary.txt").exists());
    assert_eq!(
        status(&["--config", s(&cfg), "--features", "espf", "featurize"]),
        0
    );
    assert!(dir.path().join("out/features/vocabulary.txt").exists());
}

#[test]
fn metapaths_writes_one_matrix_per_selection() {
    let dir = synth_dir("12");
    let cfg = dir.path().join("config.ini");
    assert_eq!(
        status(&[
            "--config",
            s(&cfg),
            "--metapaths",
            "DID-1,DID-3",
            "metapaths"
        ]),
        0
    );
    let out = dir.path().join("out/metapaths");
    assert!(out.join("DID-1.tsv").exists() && out.join("DID-3.tsv").exists());
    assert!(!out.join("DID-2.tsv").exists());
}

#[test]
fn train_then_evaluate_agree() {
    let dir = synth_dir("20");
    let cfg = dir.path().join("config.ini");
    assert_eq!(status(&with_small(&["--config", s(&cfg)], &["train"])), 0);
    let out = dir.path().join("out/train");
    for f in [
        "checkpoint.bin",
        "history.tsv",
        "metrics.txt",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(out.join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 9);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["seed"], 0);
    assert_eq!(summary["variant"], "full");
    assert!(summary["metrics"]["test"]["auroc"].is_number());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 4);
    assert!(manifest["duration_seconds"].as_f64().unwrap() >= 0.0);

    assert_eq!(
        status(&with_small(&["--config", s(&cfg)], &["evaluate"])),
        0
    );
    let evaluated = fs::read_to_string(dir.path().join("out/evaluate/metrics.txt")).unwrap();
    assert_eq!(
        evaluated,
        fs::read_to_string(out.join("metrics.txt")).unwrap()
    );

    // A checkpoint trained on four meta-paths cannot score with two.
    let err = exec(&with_small(
        &["--config", s(&cfg), "--metapaths", "DID-1,DID-2"],
        &["evaluate"],
    ))
    .unwrap_err();
    assert!(err.to_string().contains("meta-paths"), "{err}");
}

#[test]
fn cold_start_scores_held_out_pairs() {
    let dir = synth_dir("20");
    let cfg = dir.path().join("config.ini");
    assert_eq!(
        status(&with_small(
            &[
                "--config",
                s(&cfg),
                "--protocol",
                "coldstart",
                "--precision",
                "64"
            ],
            &["train"]
        )),
        0
    );
    let summary = json(&dir.path().join("out/train/summary.json"));
    assert_eq!(summary["split"]["protocol"], "coldstart");
    assert_eq!(summary["split"]["held_out_drugs"], 4);
    assert_eq!(summary["precision"], 64);
    let m = &summary["metrics"]["test"];
    let total = ["tp", "fp", "tn", "fn"]
        .iter()
        .map(|k| m[k].as_u64().unwrap())
        .sum::<u64>();
    assert_eq!(total, summary["split"]["test_pairs"].as_u64().unwrap());
}

#[test]
fn ablations_record_their_attention() {
    let dir = synth_dir("16");
    let cfg = dir.path().join("config.ini");
    assert_eq!(
        status(&with_small(
            &["--config", s(&cfg)],
            &["ablate", "--variant", "n"]
        )),
        0
    );
    let manifest = json(&dir.path().join("out/ablate-n/manifest.json"));
    assert_eq!(
        manifest["beta"],
        serde_json::json!([0.25, 0.25, 0.25, 0.25])
    );
    assert_eq!(manifest["beta_fixed"], true);
    assert_eq!(
        status(&with_small(
            &["--config", s(&cfg)],
            &["ablate", "--variant", "mp"]
        )),
        0
    );
    assert_eq!(
        json(&dir.path().join("out/ablate-mp/summary.json"))["variant"],
        "mp"
    );
    assert_eq!(
        status(&["--config", s(&cfg), "ablate", "--variant", "full"]),
        EXIT_USAGE
    );
}

#[test]
fn predict_ranks_pairs_and_rejects_bad_ones() {
    let dir = synth_dir("12");
    let cfg = dir.path().join("config.ini");
    assert_eq!(status(&with_small(&["--config", s(&cfg)], &["train"])), 0);
    let pairs = dir.path().join("pairs.tsv");
    fs::write(
        &pairs,
        "DB00001\tDB00002\nDB00003\tDB00007\nDB00002\tDB00001\nDB00005\tDB00012\n",
    )
    .unwrap();
    assert_eq!(
        status(&["--config", s(&cfg), "predict", "--pairs", s(&pairs)]),
        0
    );
    let text = fs::read_to_string(dir.path().join("out/predict/predictions.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let scores: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(scores.iter().all(|&x| x > 0.0 && x < 1.0));
    let score_of = |a: &str, b: &str| rows.iter().find(|r| r[0] == a && r[1] == b).unwrap()[2];
    assert_eq!(
        score_of("DB00001", "DB00002"),
        score_of("DB00002", "DB00001")
    );

    fs::write(&pairs, "DB00001\tDB00001\n").unwrap();
    let err = exec(&["--config", s(&cfg), "predict", "--pairs", s(&pairs)]).unwrap_err();
    assert!(err.to_string().contains("self-pair"), "{err}");
    fs::write(&pairs, "DB00001\tDB99999\n").unwrap();
    let err = exec(&["--config", s(&cfg), "predict", "--pairs", s(&pairs)]).unwrap_err();
    assert!(err.to_string().contains("DB99999"), "{err}");
}

#[test]
fn strict_registry_mode_uses_a_registry_file() {
    let dir = toy_dir("p1\tp2\n");
    let cfg = dir.path().join("run.ini");
    assert_eq!(status(&["--config", s(&cfg), "build-graph"]), 0);
    let registry = dir.path().join("out/graph/registry.tsv");
    let strict = |extra: &str| {
        let set = format!("paths.registry={}", registry.display());
        status(&[
            "--config",
            s(&cfg),
            "--set",
            &set,
            "--set",
            "graph.registry_mode=strict",
            "--set",
            extra,
            "build-graph",
        ])
    };
    assert_eq!(strict("run.seed=0"), 0);
    fs::write(dir.path().join("ddi2.tsv"), "d1\td9\n").unwrap();
    let ddis = format!("paths.ddis={}", dir.path().join("ddi2.tsv").display());
    assert_eq!(strict(&ddis), EXIT_ERROR);
}

#[test]
fn gradcheck_reports_every_group() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        status(&["--output", s(dir.path()), "gradcheck", "--probes", "2"]),
        0
    );
    let report = fs::read_to_string(dir.path().join("gradcheck/report.tsv")).unwrap();
    let groups: Vec<&str> = report
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(groups.len(), 8 + 4 * 8 + 3);
    assert!(groups.contains(&"W") && groups.contains(&"b") && groups.contains(&"q"));
    assert!(report.contains("# status\tPASS"));
}

#[test]
fn gradcheck_catches_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let code = status(&[
        "--output",
        s(dir.path()),
        "gradcheck",
        "--probes",
        "2",
        "--inject-fault",
        "softmax-no-correction",
    ]);
    assert_eq!(code, EXIT_CHECK_FAILED);
    assert!(fs::read_to_string(dir.path().join("gradcheck/report.tsv"))
        .unwrap()
        .contains("# status\tFAIL"));
}
