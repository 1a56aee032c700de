//! End-to-end CLI checks through the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poisonclust"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_embed_cluster_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "synth",
            "--synth-families",
            "3",
            "--synth-samples",
            "5",
            "--seed",
            "2",
            "--output",
            "reports.jsonl",
        ],
    );
    assert_success(&out);
    assert!(dir.path().join("reports.jsonl").exists());

    let out = run_in(
        dir.path(),
        &[
            "embed",
            "--input",
            "reports.jsonl",
            "--format",
            "jsonl",
            "--output",
            "vectors.tsv",
        ],
    );
    assert_success(&out);
    let dump = std::fs::read_to_string(dir.path().join("vectors.tsv")).unwrap();
    assert_eq!(dump.lines().count(), 15);
    assert!(dump.lines().all(|l| l.contains('\t')));

    let out = run_in(
        dir.path(),
        &[
            "cluster",
            "--input",
            "reports.jsonl",
            "--format",
            "jsonl",
            "--calibrate",
            "--output",
            "clust",
        ],
    );
    assert_success(&out);
    let dend = std::fs::read_to_string(dir.path().join("clust/dendrogram.csv")).unwrap();
    assert!(dend.starts_with("merge_index,left,right,height,pair_i,pair_j"));
    assert_eq!(dend.lines().count(), 15); // header + n-1 merges
    assert!(dir.path().join("clust/clusters.csv").exists());
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = run_in(dir.path(), &["synth", "--seed", "9", "--output", name]);
        assert_success(&out);
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn experiment_happy_path_writes_result_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "experiment",
            "--synth-families",
            "4",
            "--synth-samples",
            "6,8",
            "--strategy",
            "bridge-best",
            "--max-fraction",
            "0.1",
            "--reps",
            "2",
            "--cutoff-mode",
            "fixed",
            "--seed",
            "7",
            "--output",
            "exp",
            "--render",
        ],
    );
    assert_success(&out);
    for file in [
        "exp/config.json",
        "exp/manifest.json",
        "exp/aggregate_bridge-best.csv",
        "exp/raw_bridge-best_rep0.csv",
        "exp/raw_bridge-best_rep1.steps.json",
        "exp/objective.svg",
        "exp/clusters.svg",
        "exp/f_measure.svg",
    ] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }

    // Rerunning over the same directory refuses without --force.
    let out = run_in(
        dir.path(),
        &[
            "experiment",
            "--synth-families",
            "4",
            "--synth-samples",
            "6,8",
            "--strategy",
            "bridge-best",
            "--max-fraction",
            "0.1",
            "--reps",
            "2",
            "--cutoff-mode",
            "fixed",
            "--seed",
            "7",
            "--output",
            "exp",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    // Render from the written directory.
    let out = run_in(
        dir.path(),
        &["render", "--input", "exp", "--output", "charts"],
    );
    assert_success(&out);
    assert!(dir.path().join("charts/objective.svg").exists());
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = bin().args(["synth", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn attack_without_dataset_is_usage_error() {
    let out = bin().args(["attack"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "attack",
            "--input",
            "nope.jsonl",
            "--format",
            "jsonl",
            "--strategy",
            "random",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.lines().count() == 1,
        "diagnostic not single-line: {stderr}"
    );
    assert!(stderr.contains("attack stage"));
}

#[test]
fn attack_trace_files_report_the_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_success(&run_in(
        dir.path(),
        &[
            "synth",
            "--synth-families",
            "3",
            "--synth-samples",
            "6",
            "--seed",
            "4",
            "--output",
            "r.jsonl",
        ],
    ));
    let out = run_in(
        dir.path(),
        &[
            "attack",
            "--input",
            "r.jsonl",
            "--format",
            "jsonl",
            "--strategy",
            "bridge-hard",
            "--count",
            "2",
            "--cutoff-mode",
            "fixed",
            "--seed",
            "1",
            "--output",
            "atk",
        ],
    );
    assert_success(&out);
    let trace = std::fs::read_to_string(dir.path().join("atk/trace.csv")).unwrap();
    assert!(trace.starts_with(
        "poison_count,poison_fraction,objective_dc,clusters,precision,recall,f_measure"
    ));
    let steps = std::fs::read_to_string(dir.path().join("atk/trace.steps.json")).unwrap();
    assert!(steps.contains("\"strategy\": \"bridge-hard\""));
}
