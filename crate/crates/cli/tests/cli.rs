//! The `sldsgcn` binary end to end: exit codes, artifacts, determinism.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sldsgcn"));
    cmd.arg("--quiet");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sldsgcn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn cora() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cora")
}

/// Two dense clusters of `half` nodes joined by one edge, features marking
/// the cluster, labels by cluster.
fn write_toy(dir: &Path, half: usize, edges: bool) {
    std::fs::create_dir_all(dir).unwrap();
    let n = 2 * half;
    let mut e = String::new();
    if edges {
        for c in 0..2 {
            for i in 0..half {
                for j in i + 1..half {
                    if (i + j) % 3 == 0 {
                        writeln!(e, "{},{}", c * half + i, c * half + j).unwrap();
                    }
                }
                if i > 0 {
                    writeln!(e, "{},{}", c * half + i - 1, c * half + i).unwrap();
                }
            }
        }
        writeln!(e, "0,{half}").unwrap();
    }
    let mut f = String::new();
    let mut l = String::new();
    for i in 0..n {
        let c = i / half;
        let row: Vec<String> = (0..4).map(|k| if k % 2 == c || (k == 3 && i % 2 == 0) { "1" } else { "0" }.into()).collect();
        writeln!(f, "{}", row.join(",")).unwrap();
        writeln!(l, "{i},{c}").unwrap();
    }
    std::fs::write(dir.join("edges.csv"), e).unwrap();
    std::fs::write(dir.join("features.csv"), f).unwrap();
    std::fs::write(dir.join("labels.csv"), l).unwrap();
}

/// Flags for a fast run on the toy graph.
fn quick(dataset: &Path, out: &Path) -> Vec<String> {
    [
        "--dataset",
        dataset.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--label-rate",
        "0.2",
        "--seeds",
        "7",
        "--set",
        "training.supervised_epochs=10",
        "--set",
        "training.pretrain_epochs=10",
        "--set",
        "training.finetune_epochs=10",
        "--set",
        "training.teacher.epochs=10",
        "--set",
        "training.teacher.samples=4",
        "--set",
        "training.d_max=3",
        "--set",
        "influence.trials=2",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

fn with<'a>(cmd: &'a str, rest: &'a [String], extra: &'a [&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(rest.iter().map(String::as_str));
    v.extend_from_slice(extra);
    v
}

/// CSV rows with the `#` config echo removed.
fn csv_rows(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# "), "{} lacks the config echo", path.display());
    text.lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn ingest_reports_cora_counts() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["ingest", cora().to_str().unwrap(), tmp.path().join("cora").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = stdout(&out);
    assert!(report.starts_with("N=2708 E="), "{report}");
    assert!(report.contains("C=7 F=1433"), "{report}");
    assert!(report.contains("raw edge lines 5429"), "{report}");
    for f in ["edges.csv", "features.csv", "labels.csv", "ingest_report.json"] {
        assert!(tmp.path().join("cora").join(f).exists(), "{f}");
    }
}

fn duplicates_dropped(report: &str) -> usize {
    let tail = report.split("duplicates dropped ").nth(1).expect("report names duplicates");
    tail.split(|c: char| !c.is_ascii_digit()).next().unwrap().parse().unwrap()
}

#[test]
fn ingest_counts_duplicate_edges() {
    let tmp = TempDir::new().unwrap();
    let src = tmp.path().join("toy");
    write_toy(&src, 5, true);
    let base = run(&["ingest", src.to_str().unwrap(), tmp.path().join("base").to_str().unwrap()]);
    assert_eq!(code(&base), 0, "{}", stderr(&base));

    let mut edges = std::fs::read_to_string(src.join("edges.csv")).unwrap();
    edges.push_str("1,0\n0,1\n");
    std::fs::write(src.join("edges.csv"), edges).unwrap();
    let out = run(&["ingest", src.to_str().unwrap(), tmp.path().join("copy").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(duplicates_dropped(&stdout(&out)), duplicates_dropped(&stdout(&base)) + 2, "{}", stdout(&out));

    // The copy is itself valid and loses nothing further.
    let again = run(&["ingest", tmp.path().join("copy").to_str().unwrap(), tmp.path().join("copy2").to_str().unwrap()]);
    assert_eq!(code(&again), 0);
    assert_eq!(duplicates_dropped(&stdout(&again)), 0);
}

#[test]
fn missing_labels_is_a_data_error_naming_the_file() {
    let tmp = TempDir::new().unwrap();
    let src = tmp.path().join("toy");
    write_toy(&src, 5, true);
    std::fs::remove_file(src.join("labels.csv")).unwrap();
    let out = run(&["ingest", src.to_str().unwrap(), tmp.path().join("dst").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("labels.csv"), "{}", stderr(&out));
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(code(&run(&["train", "--bogus"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["train", "--variant", "GAT"])), 1);
    assert_eq!(code(&run(&["train", "--set", "training.gamma=1"])), 1);
    assert_eq!(code(&run(&["train", "--label-rate", "1.5"])), 1);
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    for cmd in ["ingest", "profile", "train", "ablate", "evaluate"] {
        assert!(stdout(&help).contains(cmd), "help lacks {cmd}");
    }
}

#[test]
fn unknown_key_in_config_file_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[training]\nalpha = 0.5\ncolour = 1\n").unwrap();
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
}

#[test]
fn training_failure_exits_three() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, true);
    let args = quick(&data, &tmp.path().join("out"));
    let out = run(&with("train", &args, &["--variant", "GCN", "--set", "training.lr=1e200", "--set", "training.supervised_epochs=50"]));
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("non-finite"), "{}", stderr(&out));
}

#[test]
fn train_is_byte_reproducible_and_evaluate_agrees() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, true);
    let mut docs = Vec::new();
    for run_dir in ["a", "b"] {
        let args = quick(&data, &tmp.path().join(run_dir));
        let out = run(&with("train", &args, &["--variant", "SL-DSGCN"]));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        docs.push(std::fs::read(tmp.path().join(run_dir).join("SL-DSGCN/seed_7.json")).unwrap());
    }
    // Output directories differ, so compare everything except the echoed path.
    let strip = |b: &[u8]| String::from_utf8_lossy(b).replace(tmp.path().join("a").to_str().unwrap(), "").replace(tmp.path().join("b").to_str().unwrap(), "");
    assert_eq!(strip(&docs[0]), strip(&docs[1]));

    let seed_doc: serde_json::Value = serde_json::from_slice(&docs[0]).unwrap();
    assert_eq!(seed_doc["schema_version"], 1);
    assert_eq!(seed_doc["config"]["variant"], "SL-DSGCN");
    assert_eq!(seed_doc["config"]["training"]["finetune_epochs"], 10);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("a/SL-DSGCN/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["accuracy"]["n"], 1);
    assert_eq!(summary["accuracy"]["mean"], seed_doc["metrics"]["accuracy"]);

    let ckpt = tmp.path().join("a/SL-DSGCN/seed_7.ckpt");
    let out = run(&["evaluate", ckpt.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let eval: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(eval["accuracy"], seed_doc["metrics"]["accuracy"]);
    assert_eq!(eval["checkpoint"]["config"], seed_doc["config"]);

    let not_ckpt = run(&["evaluate", tmp.path().join("a/SL-DSGCN/seed_7.json").to_str().unwrap()]);
    assert_eq!(code(&not_ckpt), 2);
}

#[test]
fn rerun_is_byte_identical_in_place() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, true);
    let args = quick(&data, &tmp.path().join("out"));
    let path = tmp.path().join("out/GCN/seed_7.json");
    let mut docs = Vec::new();
    for _ in 0..2 {
        assert_eq!(code(&run(&with("train", &args, &["--variant", "GCN"]))), 0);
        docs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(docs[0], docs[1]);
    // Atomic writes leave no temporary files behind.
    let names: Vec<String> = std::fs::read_dir(tmp.path().join("out/GCN"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.contains(".tmp")), "{names:?}");
}

#[test]
fn workers_do_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, true);
    let mut summaries = Vec::new();
    for (dir, workers) in [("one", "1"), ("three", "3")] {
        let out_dir = tmp.path().join(dir);
        let mut args = quick(&data, &out_dir);
        let seeds = args.iter().position(|a| a == "--seeds").unwrap() + 1;
        args[seeds] = "1,2,3".into();
        let out = run(&with("train", &args, &["--variant", "DSGCN", "--workers", workers]));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let s: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("DSGCN/summary.json")).unwrap()).unwrap();
        summaries.push(s["per_seed"].clone());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn profile_writes_all_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, true);
    let out_dir = tmp.path().join("out");
    let out = run(&with("profile", &quick(&data, &out_dir), &[]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = out_dir.join("profile");

    let degrees = csv_rows(&dir.join("degree_distribution.csv"));
    assert_eq!(degrees[0], "degree,count");
    let total: usize = degrees[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 20);

    let ratio = csv_rows(&dir.join("labeled_neighbor_ratio.csv"));
    let buckets: Vec<&str> = ratio[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    let mut unique = buckets.clone();
    unique.dedup();
    assert_eq!(unique, buckets, "one row per degree bucket");

    let errors = csv_rows(&dir.join("error_by_degree.csv"));
    assert_eq!(errors[0], "bucket,nodes,correct,accuracy,error_rate");
    let influence = csv_rows(&dir.join("influence.csv"));
    assert_eq!(influence.len(), 21);
}

#[test]
fn edgeless_graph_has_only_labeled_self_influence() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, false);
    let out_dir = tmp.path().join("out");
    let out = run(&with("profile", &quick(&data, &out_dir), &[]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&out_dir.join("profile/influence.csv"));
    assert_eq!(rows[0], "node_id,degree,labeled,influence");
    let mut labeled = 0;
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        let s: f64 = cols[3].parse().unwrap();
        if cols[2] == "1" {
            labeled += 1;
            assert!(s > 0.0, "{row}");
        } else {
            assert_eq!(s, 0.0, "{row}");
        }
    }
    assert!(labeled > 0);
}

#[test]
fn ablate_writes_one_row_per_variant_and_rate() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("toy");
    write_toy(&data, 10, true);
    let out_dir = tmp.path().join("out");
    let out = run(&with("ablate", &quick(&data, &out_dir), &["--label-rates", "0.2,0.3"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&out_dir.join("ablation.csv"));
    assert_eq!(rows[0], "variant,label_rate,seeds,mean_accuracy,std_accuracy");
    assert_eq!(rows.len(), 1 + 2 * 8);
    let names: Vec<&str> = rows[1..9].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(
        names,
        ["DSGCN", "MT-GNN", "SL-fs", "SL-GNN", "SL-DSGCN", "soft-set-A", "soft-set-T", "soft-set-intersection"]
    );
    let tail = |r: &str| r.split_once(',').unwrap().1.to_string();
    assert_eq!(tail(&rows[5]), tail(&rows[8]), "intersection row repeats SL-DSGCN");
}
