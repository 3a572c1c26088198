use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::{array, Array1, Array2};
use serde_json::Value;
use tempfile::TempDir;
use tetot_core::{save_classifier_head, save_embedding_set, ClassifierHead, EmbeddingSet};

fn tetot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tetot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn value(record: &Value) -> f64 {
    record["reports"][0]["value"].as_f64().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Files {
    _dir: TempDir,
    src: PathBuf,
    tgt: PathBuf,
    unlabeled: PathBuf,
    head: PathBuf,
    flat_head: PathBuf,
    root: PathBuf,
}

fn files() -> Files {
    let dir = TempDir::new().unwrap();
    let root = dir.path().to_path_buf();
    let x = array![[1.0, 0.2], [0.1, 2.0], [1.5, -0.3], [-0.2, 1.1], [0.7, 0.7]];
    let src = EmbeddingSet::labeled(x.clone(), vec![0, 1, 0, 1, 0], 2, "src").unwrap();
    let tgt = EmbeddingSet::labeled(x.mapv(|v| v * 0.5 + 0.25), vec![0, 1, 0, 1, 1], 2, "tgt").unwrap();
    let head = ClassifierHead::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0]).unwrap();
    let flat = ClassifierHead::new(Array2::zeros((7, 2)), Array1::zeros(7)).unwrap();
    let f = Files {
        src: root.join("src.emb"),
        tgt: root.join("tgt.emb"),
        unlabeled: root.join("u.emb"),
        head: root.join("h.hed"),
        flat_head: root.join("flat.hed"),
        root,
        _dir: dir,
    };
    save_embedding_set(&src, &f.src).unwrap();
    save_embedding_set(&tgt, &f.tgt).unwrap();
    save_embedding_set(&EmbeddingSet::new(x, "u").unwrap(), &f.unlabeled).unwrap();
    save_classifier_head(&head, &f.head).unwrap();
    save_classifier_head(&flat, &f.flat_head).unwrap();
    f
}

#[test]
fn compute_self_distance_is_zero_at_lambda_zero() {
    let f = files();
    let out = tetot(&["compute", "--source", p(&f.src), "--target", p(&f.src), "--head", p(&f.head), "--lambda", "0"]);
    let record = json(&out);
    assert_eq!(value(&record), 0.0);
    assert_eq!(record["command"], "compute");
    assert_eq!(record["config"]["lambda"], 0.0);
}

#[test]
fn entropy_of_uniform_head_is_ln_7() {
    let f = files();
    let record = json(&tetot(&["entropy", "--target", p(&f.tgt), "--head", p(&f.flat_head)]));
    assert!((value(&record) - 7f64.ln()).abs() < 1e-12);
    assert!((value(&record) - 1.94591).abs() < 1e-5);
}

#[test]
fn accuracy_reports_fraction_correct() {
    let f = files();
    let record = json(&tetot(&["accuracy", "--target", p(&f.src), "--head", p(&f.head)]));
    assert_eq!(value(&record), 1.0);
}

fn write_manifest(f: &Files, entries: &[(&str, &Path, Option<f64>)]) -> PathBuf {
    let list: Vec<Value> = entries
        .iter()
        .map(|(id, target, acc)| {
            let mut e = serde_json::json!({
                "candidate_id": id,
                "source": "src.emb",
                "target": target.file_name().unwrap().to_str().unwrap(),
                "head": "h.hed",
            });
            if let Some(a) = acc {
                e["accuracy"] = serde_json::json!(a);
            }
            e
        })
        .collect();
    let path = f.root.join("batch.json");
    std::fs::write(&path, serde_json::to_string(&list).unwrap()).unwrap();
    path
}

#[test]
fn rank_orders_by_score_with_manifest_order_reports() {
    let f = files();
    let manifest = write_manifest(&f, &[("far", &f.tgt, None), ("self", &f.src, None), ("unl", &f.unlabeled, None)]);
    let record = json(&tetot(&["rank", "--manifest", p(&manifest), "--lambda", "0"]));
    let reports = record["reports"].as_array().unwrap();
    let ids: Vec<&str> = reports.iter().map(|r| r["meta"]["candidate_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["far", "self", "unl"]);

    let mut scored: Vec<(f64, &str)> = reports.iter().zip(&ids).map(|(r, id)| (r["value"].as_f64().unwrap(), *id)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    let expected: Vec<&str> = scored.iter().map(|s| s.1).collect();
    let ranking: Vec<&str> = record["ranking"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(ranking, expected);
    assert_eq!(ranking.len(), 3);
}

#[test]
fn gen_fixtures_then_correlate() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("fx");
    let gen = json(&tetot(&["gen-fixtures", "--out-dir", p(&out_dir), "--n-per-domain", "100", "--seed", "2"]));
    assert_eq!(gen["reports"].as_array().unwrap().len(), 10);
    let record = json(&tetot(&["correlate", "--manifest", p(&out_dir.join("manifest.json"))]));
    assert!(record["correlation"]["pooled"]["rho"].as_f64().unwrap() < -0.8);
    assert_eq!(record["correlation"]["pooled"]["n_points"], 10);
}

#[test]
fn approx_from_stats_matches_embeddings() {
    let f = files();
    let sta = f.root.join("s.sta");
    json(&tetot(&["stats", "--source", p(&f.src), "--stats-out", p(&sta)]));
    let a = json(&tetot(&["approx", "--source-stats", p(&sta), "--target", p(&f.tgt)]));
    let b = json(&tetot(&["approx", "--source-emb", p(&f.src), "--target", p(&f.tgt)]));
    assert_eq!(value(&a), value(&b));
    assert_eq!(a["reports"][0]["metric_name"], "tetot_approx");
}

#[test]
fn out_flag_writes_file_instead_of_stdout() {
    let f = files();
    let dest = f.root.join("r.json");
    let out = tetot(&["entropy", "--target", p(&f.tgt), "--head", p(&f.head), "--out", p(&dest)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let record: Value = serde_json::from_str(&std::fs::read_to_string(dest).unwrap()).unwrap();
    assert_eq!(record["command"], "entropy");
}

fn strip_timestamp(out: &Output) -> Value {
    let mut v = json(out);
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn reruns_are_identical_apart_from_timestamp() {
    let f = files();
    let manifest = write_manifest(&f, &[("a", &f.tgt, Some(0.5)), ("b", &f.src, Some(0.9)), ("c", &f.unlabeled, Some(0.7))]);
    let runs: [Vec<&str>; 4] = [
        vec!["compute", "--source", p(&f.src), "--target", p(&f.tgt), "--head", p(&f.head), "--num-source", "3", "--num-target", "4", "--seed", "9"],
        vec!["compute", "--source", p(&f.src), "--target", p(&f.tgt), "--head", p(&f.head), "--solver", "sinkhorn"],
        vec!["rank", "--manifest", p(&manifest), "--seed", "4"],
        vec!["correlate", "--manifest", p(&manifest), "--metric", "approx"],
    ];
    for args in &runs {
        let first = tetot(args);
        let second = tetot(args);
        assert_eq!(strip_timestamp(&first), strip_timestamp(&second), "{args:?}");
        let text = |o: &Output| {
            String::from_utf8(o.stdout.clone())
                .unwrap()
                .lines()
                .filter(|l| !l.contains("\"timestamp\""))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(text(&first), text(&second));
    }
}

#[test]
fn exit_codes() {
    let f = files();
    assert_eq!(tetot(&["bogus"]).status.code(), Some(1));
    assert_eq!(tetot(&["entropy", "--target", p(&f.tgt), "--head", p(&f.head), "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(tetot(&["compute", "--source", p(&f.src)]).status.code(), Some(1));
    assert_eq!(tetot(&["compute", "--source", p(&f.src), "--target", p(&f.tgt), "--head", p(&f.head), "--norm", "max"]).status.code(), Some(1));
    assert_eq!(tetot(&["--help"]).status.code(), Some(0));

    let missing = f.root.join("nope.emb");
    assert_eq!(tetot(&["entropy", "--target", p(&missing), "--head", p(&f.head)]).status.code(), Some(1));

    let out = tetot(&["compute", "--source", p(&f.unlabeled), "--target", p(&f.tgt), "--head", p(&f.head)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("label cost requires source labels"));

    let bad = f.root.join("bad.hed");
    std::fs::write(&bad, b"TETOTHED\x01\x00").unwrap();
    assert_eq!(tetot(&["entropy", "--target", p(&f.tgt), "--head", p(&bad)]).status.code(), Some(2));

    let manifest = f.root.join("broken.json");
    std::fs::write(&manifest, "[{\"candidate_id\": 3").unwrap();
    assert_eq!(tetot(&["rank", "--manifest", p(&manifest)]).status.code(), Some(2));

    let wide = f.root.join("wide.hed");
    save_classifier_head(&ClassifierHead::new(Array2::zeros((2, 3)), Array1::zeros(2)).unwrap(), &wide).unwrap();
    assert_eq!(tetot(&["entropy", "--target", p(&f.tgt), "--head", p(&wide)]).status.code(), Some(1));
}
