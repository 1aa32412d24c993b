//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
//! Training criteria drive the real binary on the bundled planted dataset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use han_ddi::espf::{build_vocab, tokenize_smiles, FeatureMatrix, TokenSequence, DEFAULT_MAX_SIZE};
use han_ddi::hin::RegistryMode;
use han_ddi::metapath::{brute_force_path_count, builtin_specs, commuting_matrix, NeighborGraph};
use han_ddi::model::{
    checkpoint_precision, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
    HanModel, ModelConfig, ModelInputs, Variant,
};
use han_ddi::pipeline::{build_hin, metapath_graphs};
use han_ddi::synth::{planted, random_hin, PlantedConfig};
use han_ddi::tensor::{Mask, Real};
use han_ddi::train::auroc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SEEDS: [u64; 3] = [0, 1, 2];
const PROTOCOLS: [&str; 2] = ["edges", "coldstart"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn han_ddi(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_han-ddi"))
        .args(args)
        .stdout(Stdio::null())
        .status()
        .expect("binary runs")
        .code()
        .unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap_or_default()).unwrap_or(Value::Null)
}

fn gradients(root: &Path) -> Verdict {
    let out = root.join("gradcheck");
    let start = Instant::now();
    let code = han_ddi(&["--output", s(&out), "--precision", "64", "gradcheck"]);
    let took = start.elapsed();
    let manifest = json(&out.join("gradcheck/manifest.json"));
    let worst = manifest["max_relative_error"]
        .as_f64()
        .unwrap_or(f64::INFINITY);
    let groups = fs::read_to_string(out.join("gradcheck/report.tsv"))
        .map(|t| t.lines().skip(1).filter(|l| !l.starts_with('#')).count())
        .unwrap_or(0);
    verdict(
        code == 0 && worst < 1e-5 && took < Duration::from_secs(30),
        format!(
            "max relative error {worst:.2e} over {groups} parameter groups in {:.1}s",
            took.as_secs_f64()
        ),
    )
}

fn commuting_oracle() -> Verdict {
    let start = Instant::now();
    let mut mismatches = 0;
    for seed in 0..100 {
        let hin = random_hin(&mut ChaCha8Rng::seed_from_u64(seed), 20).unwrap();
        let n = hin.drug_count();
        for spec in builtin_specs() {
            let m = commuting_matrix(&hin, &spec).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if m.get(i, j) != brute_force_path_count(&hin, &spec, i, j).unwrap() {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let took = start.elapsed();
    verdict(
        mismatches == 0 && took < Duration::from_secs(10),
        format!(
            "100 networks, {mismatches} mismatching entries, {:.2}s",
            took.as_secs_f64()
        ),
    )
}

fn random_model(seed: u64) -> (HanModel<f64>, FeatureMatrix, Vec<NeighborGraph>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let dim = rng.gen_range(1..=6);
    let bits = (0..n * dim).map(|_| rng.gen_bool(0.4)).collect();
    let features = FeatureMatrix::new(n, dim, bits).unwrap();
    let density = rng.gen_range(0.0..1.0);
    let graphs: Vec<_> = (0..rng.gen_range(1..=4))
        .map(|v| {
            let mut mask = Mask::empty(n, n);
            for i in 0..n {
                mask.set(i, i, true);
                for j in i + 1..n {
                    if rng.gen_bool(density) {
                        mask.set(i, j, true);
                        mask.set(j, i, true);
                    }
                }
            }
            NeighborGraph {
                name: format!("G{v}"),
                adjacency: Arc::new(mask),
            }
        })
        .collect();
    let mut cfg = ModelConfig::new(dim);
    cfg.hidden = rng.gen_range(1..=4);
    cfg.heads = rng.gen_range(1..=3);
    cfg.metapath_dim = rng.gen_range(1..=5);
    cfg.seed = seed;
    let names = graphs.iter().map(|g| g.name.clone()).collect();
    let mut model = HanModel::new(cfg, names, Variant::Full, &graphs).unwrap();
    let scale = rng.gen_range(0.1..20.0);
    for t in model.params_mut().tensors_mut() {
        *t = t.map(|x| x * scale);
    }
    (model, features, graphs)
}

fn normalization() -> Verdict {
    let cases = 1000;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for seed in 0..cases {
        let (model, features, graphs) = random_model(seed);
        let out = model
            .encode(&ModelInputs::new(&features, &graphs).unwrap())
            .unwrap();
        for (v, heads) in out.alpha.iter().enumerate() {
            let mask = &graphs[v].adjacency;
            for alpha in heads {
                for i in 0..alpha.rows() {
                    let mut sum = 0.0;
                    for j in 0..alpha.cols() {
                        let a = alpha.get(i, j);
                        if a < 0.0 || (!mask.get(i, j) && a != 0.0) {
                            violations += 1;
                        }
                        sum += a;
                    }
                    worst = worst.max((sum - 1.0).abs());
                }
            }
        }
        if out.beta.iter().any(|&b| b < 0.0) {
            violations += 1;
        }
        worst = worst.max((out.beta.iter().sum::<f64>() - 1.0).abs());
    }
    verdict(
        violations == 0 && worst <= 1e-6,
        format!("{cases} models, worst row-sum deviation {worst:.1e}, {violations} sign or mask violations"),
    )
}

fn pair_count_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn auroc_oracle() -> Verdict {
    let mut mismatches = 0;
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(1..=6);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0..levels) as f64 / levels as f64)
            .collect();
        if auroc(&scores, &labels).unwrap() != pair_count_auroc(&scores, &labels) {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("500 tied score vectors, {mismatches} inexact"),
    )
}

fn espf_determinism() -> Verdict {
    let fixture: Vec<TokenSequence> = ["CCO", "CCN"]
        .iter()
        .map(|m| tokenize_smiles(m).unwrap())
        .collect();
    let vocab = build_vocab(&fixture, 2, DEFAULT_MAX_SIZE).unwrap();
    let first = vocab.merges().next().map(|(a, b)| format!("{a}+{b}"));
    let traced = first.as_deref() == Some("C+C") && vocab.merges().count() == 1;

    let corpus: Vec<TokenSequence> = (0..3)
        .flat_map(|seed| {
            let files = planted(&PlantedConfig {
                seed,
                ..PlantedConfig::default()
            });
            files
                .smiles
                .lines()
                .filter(|l| !l.starts_with('#'))
                .map(|l| tokenize_smiles(l.split('\t').nth(1).unwrap()).unwrap())
                .collect::<Vec<_>>()
        })
        .collect();
    let a = build_vocab(&corpus, 5, DEFAULT_MAX_SIZE).unwrap().to_text();
    let b = build_vocab(&corpus, 5, DEFAULT_MAX_SIZE).unwrap().to_text();
    verdict(
        traced && a == b,
        format!(
            "fixture first merge {}, corpus of {} drugs rebuilt {}",
            first.unwrap_or_else(|| "none".into()),
            corpus.len(),
            if a == b { "identically" } else { "differently" }
        ),
    )
}

struct Run {
    train: f64,
    test: f64,
    took: Duration,
}

fn read_run(dir: &Path, took: Duration) -> Option<Run> {
    let summary = json(&dir.join("summary.json"));
    Some(Run {
        train: summary["metrics"]["train"]["auroc"].as_f64()?,
        test: summary["metrics"]["test"]["auroc"].as_f64()?,
        took,
    })
}

/// Every (seed, protocol) run of the full model and both ablations.
struct Experiments {
    full: Vec<Vec<Option<Run>>>,
    mp: Vec<Vec<Option<Run>>>,
    n: Vec<Vec<Option<Run>>>,
    configs: Vec<PathBuf>,
}

fn timed(args: &[&str], dir: PathBuf) -> Option<Run> {
    let start = Instant::now();
    let code = han_ddi(args);
    let took = start.elapsed();
    if code != 0 {
        return None;
    }
    read_run(&dir, took)
}

fn experiments(root: &Path) -> Experiments {
    let mut e = Experiments {
        full: vec![],
        mp: vec![],
        n: vec![],
        configs: vec![],
    };
    for seed in SEEDS {
        let data = root.join(format!("planted-{seed}"));
        assert_eq!(
            han_ddi(&["--seed", &seed.to_string(), "synth", "--dir", s(&data)]),
            0
        );
        let config = data.join("config.ini");
        let (mut full, mut mp, mut n) = (vec![], vec![], vec![]);
        for protocol in PROTOCOLS {
            let out = data.join(protocol);
            let base = [
                "--config",
                s(&config),
                "--protocol",
                protocol,
                "--output",
                s(&out),
            ];
            let with = |tail: &[&'static str]| -> Vec<&str> {
                base.iter().copied().chain(tail.iter().copied()).collect()
            };
            full.push(timed(&with(&["train"]), out.join("train")));
            mp.push(timed(
                &with(&["ablate", "--variant", "mp"]),
                out.join("ablate-mp"),
            ));
            n.push(timed(
                &with(&["ablate", "--variant", "n"]),
                out.join("ablate-n"),
            ));
        }
        e.full.push(full);
        e.mp.push(mp);
        e.n.push(n);
        e.configs.push(config);
    }
    e
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn test_aurocs(runs: &[Vec<Option<Run>>], protocol: usize) -> Option<Vec<f64>> {
    runs.iter()
        .map(|r| r[protocol].as_ref().map(|r| r.test))
        .collect()
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.3}"))
        .collect::<Vec<_>>()
        .join("/")
}

fn planted_learning(e: &Experiments) -> Verdict {
    let runs: Option<Vec<&Run>> = e.full.iter().map(|r| r[0].as_ref()).collect();
    let Some(runs) = runs else {
        return verdict(false, "a training run failed");
    };
    let train: Vec<f64> = runs.iter().map(|r| r.train).collect();
    let test: Vec<f64> = runs.iter().map(|r| r.test).collect();
    let took: Duration = runs.iter().map(|r| r.took).sum();
    verdict(
        mean(&train) >= 0.95 && mean(&test) >= 0.90 && took < Duration::from_secs(120),
        format!(
            "mean train AUROC {:.3} ({}), mean test AUROC {:.3} ({}), {:.1}s for 3 runs",
            mean(&train),
            list(&train),
            mean(&test),
            list(&test),
            took.as_secs_f64()
        ),
    )
}

fn cold_start(e: &Experiments) -> Verdict {
    let Some(test) = test_aurocs(&e.full, 1) else {
        return verdict(false, "a training run failed");
    };
    verdict(
        mean(&test) >= 0.80,
        format!(
            "mean held-out test AUROC {:.3} ({})",
            mean(&test),
            list(&test)
        ),
    )
}

fn ablation_ordering(e: &Experiments) -> Verdict {
    let mut pass = true;
    let mut parts = vec![];
    for (p, protocol) in PROTOCOLS.iter().enumerate() {
        let (Some(full), Some(mp), Some(n)) = (
            test_aurocs(&e.full, p),
            test_aurocs(&e.mp, p),
            test_aurocs(&e.n, p),
        ) else {
            return verdict(false, "a training run failed");
        };
        let (f, m, u) = (mean(&full), mean(&mp), mean(&n));
        pass &= f >= m && f >= u;
        parts.push(format!("{protocol}: full {f:.3} mp {m:.3} n {u:.3}"));
    }
    verdict(pass, format!("mean test AUROC, {}", parts.join("; ")))
}

fn end_to_end_determinism(e: &Experiments, root: &Path) -> Verdict {
    let first = e.configs[0].parent().unwrap().join("edges/train");
    let again = root.join("rerun");
    let code = han_ddi(&[
        "--config",
        s(&e.configs[0]),
        "--protocol",
        "edges",
        "--output",
        s(&again),
        "train",
    ]);
    let same = |f: &str| {
        fs::read(first.join(f))
            .ok()
            .is_some_and(|a| fs::read(again.join("train").join(f)).ok() == Some(a))
    };
    let (history, checkpoint) = (same("history.tsv"), same("checkpoint.bin"));
    verdict(
        code == 0 && history && checkpoint,
        format!("history identical: {history}, checkpoint identical: {checkpoint}"),
    )
}

fn symmetric_and_reloadable<T: Real>(
    bytes: &[u8],
    features: &FeatureMatrix,
    graphs: &[NeighborGraph],
    scratch: &Path,
) -> Verdict {
    let model: HanModel<T> = decode_checkpoint(bytes).unwrap();
    let inputs = ModelInputs::new(features, graphs).unwrap();
    let n = features.drugs();
    let forward: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let backward: Vec<(usize, usize)> = forward.iter().map(|&(i, j)| (j, i)).collect();
    let a = model.score_pairs(&inputs, &forward).unwrap();
    let b = model.score_pairs(&inputs, &backward).unwrap();
    let asymmetric = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.as_f64().to_bits() != y.as_f64().to_bits())
        .count();

    let path = scratch.join("reloaded.bin");
    save_checkpoint(&path, &model).unwrap();
    let reloaded: HanModel<T> = load_checkpoint(&path).unwrap();
    let c = reloaded.score_pairs(&inputs, &forward).unwrap();
    let drifted = a
        .iter()
        .zip(&c)
        .filter(|(x, y)| x.as_f64().to_bits() != y.as_f64().to_bits())
        .count();
    let same_bytes = encode_checkpoint(&reloaded) == bytes;
    verdict(
        asymmetric == 0 && drifted == 0 && same_bytes,
        format!(
            "{} pairs, {asymmetric} asymmetric, {drifted} changed after save and load, re-encoded bytes identical: {same_bytes}",
            forward.len()
        ),
    )
}

fn decoder_and_checkpoint(e: &Experiments, root: &Path) -> Verdict {
    let checkpoint = e.configs[0]
        .parent()
        .unwrap()
        .join("edges/train/checkpoint.bin");
    let Ok(bytes) = fs::read(&checkpoint) else {
        return verdict(false, "no checkpoint");
    };
    let files = planted(&PlantedConfig {
        seed: SEEDS[0],
        ..PlantedConfig::default()
    });
    let (hin, fp) = build_hin(&files.sources(true), RegistryMode::Discover).unwrap();
    let features = fp.unwrap().feature_matrix(hin.drug_count()).unwrap();
    let graphs: Vec<_> = metapath_graphs(&hin, &builtin_specs(), 1)
        .unwrap()
        .into_iter()
        .map(|(_, g)| g)
        .collect();
    match checkpoint_precision(&bytes).unwrap() {
        32 => symmetric_and_reloadable::<f32>(&bytes, &features, &graphs, root),
        _ => symmetric_and_reloadable::<f64>(&bytes, &features, &graphs, root),
    }
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let root = scratch.path();
    let mut verdicts = vec![
        ("gradient correctness", gradients(root)),
        ("commuting-matrix oracle", commuting_oracle()),
        ("attention normalization", normalization()),
        ("AUROC oracle", auroc_oracle()),
    ];
    let e = experiments(root);
    verdicts.push(("planted-signal learning", planted_learning(&e)));
    verdicts.push(("cold-start inductivity", cold_start(&e)));
    verdicts.push(("ablation ordering", ablation_ordering(&e)));
    verdicts.push(("ESPF determinism", espf_determinism()));
    verdicts.push(("end-to-end determinism", end_to_end_determinism(&e, root)));
    verdicts.push((
        "decoder symmetry and checkpoint round-trip",
        decoder_and_checkpoint(&e, root),
    ));

    let mut failed = 0;
    for (k, (name, v)) in verdicts.iter().enumerate() {
        println!(
            "criterion {:>2} {} {name}: {}",
            k + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        verdicts.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
