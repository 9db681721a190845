use std::path::Path;
use std::process::{Command, Output};

fn priorart(workspace: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_priorart"))
        .arg("--workspace")
        .arg(workspace)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_corpus_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = priorart(dir.path(), &["ingest"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("corpus.jsonl"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = priorart(dir.path(), &["--set", "retrieval.lamda=0.5", "gen"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("lamda"), "{}", stderr(&out));
}

#[test]
fn eval_warns_about_unjudged_topics() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("a.run");
    let qrels = dir.path().join("qrels.txt");
    std::fs::write(&run, "EP1000001 Q0 EP2000001 1 2.5 m\nEP1000002 Q0 EP2000002 1 1.5 m\n").unwrap();
    std::fs::write(&qrels, "EP1000001 0 EP2000001 2\n").unwrap();
    let out = priorart(
        dir.path(),
        &[
            "eval",
            "--run",
            run.to_str().unwrap(),
            "--qrels",
            qrels.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning: topic EP1000002"), "{}", stderr(&out));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("1.0000"), "{report}");
}

#[test]
fn small_collection_end_to_end_and_index_stats() {
    let dir = tempfile::tempdir().unwrap();
    let settings = [
        "--set",
        "gen.n_patents=400",
        "--set",
        "gen.n_topics=40",
        "--set",
        "fusion.validation_size=20",
        "--threads",
        "2",
    ];
    let mut args = settings.to_vec();
    args.push("pipeline");
    let out = priorart(dir.path(), &args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("final"));

    let index = dir.path().join("index").join("lemma-en.idx");
    let out = priorart(dir.path(), &["index", "stats", index.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!out.stdout.is_empty());
}
