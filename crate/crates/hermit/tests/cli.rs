use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::io::Write;

use hermit::checkpoint;
use hermit_core::corpus::{parse_conll, parse_tagged};

const SMALL: [&str; 10] = [
    "--set", "hidden=8", "--set", "attention=4", "--set", "embedding_dim=8", "--set", "max_epochs=3", "--set", "dropout=0.1",
];

const TOY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy.conll");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn hermit<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_hermit")).args(args).output().unwrap()
}

fn hermit_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hermit"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // The child may exit without reading its input.
    if let Err(e) = child.stdin.take().unwrap().write_all(input.as_bytes()) {
        assert_eq!(e.kind(), std::io::ErrorKind::BrokenPipe, "{e}");
    }
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn train_small(out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "--quiet", "--data", TOY, "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend(extra);
    ok(&hermit(&args));
}

#[test]
fn train_default_config_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&hermit([
        "train", "--quiet", "--data", TOY, "--out", out.to_str().unwrap(), "--set", "max_epochs=1",
    ]));
    assert!(out.join("model.hmt").is_file());
    let history = std::fs::read_to_string(out.join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 1);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config"]["hidden"], "200");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["path"].as_str().unwrap().ends_with("model.hmt") && o["sha256"].as_str().unwrap().len() == 64));
    let model = checkpoint::load(&out.join("model.hmt"), None).unwrap();
    assert_eq!(model.settings().hidden, 200);
}

#[test]
fn ablation_flags_reach_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path(), &["--ablation", "-sa-cn-crf"]);
    let s = checkpoint::load(&dir.path().join("model.hmt"), None).unwrap().settings().clone();
    assert!(!s.use_self_attention && !s.use_shortcuts && !s.use_crf);
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path(), &["--ablation", "-sa"]);
    let s = checkpoint::load(&dir.path().join("model.hmt"), None).unwrap().settings().clone();
    assert!(!s.use_self_attention && s.use_shortcuts && s.use_crf);
}

#[test]
fn training_is_replayable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train_small(a.path(), &["--seed", "9"]);
    train_small(b.path(), &["--seed", "9"]);
    for f in ["history.jsonl", "model.hmt", "report.txt", "config.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    train_small(c.path(), &["--seed", "10"]);
    assert_ne!(std::fs::read(a.path().join("model.hmt")).unwrap(), std::fs::read(c.path().join("model.hmt")).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small model\nhidden = 6\nattention = 3\nembedding_dim = 5\nmax_epochs = 1\nseed = 4\n").unwrap();
    let out = dir.path().join("run");
    ok(&hermit([
        "train", "--quiet", "--data", TOY, "--config", cfg.to_str().unwrap(),
        "--out", out.to_str().unwrap(), "--set", "hidden=7",
    ]));
    let config = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("hidden = 7\n") && config.contains("attention = 3\n") && config.contains("seed = 4\n"));
}

#[test]
fn grid_axes_select_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    std::fs::write(&cfg, "attention = 3\nembedding_dim = 5\nmax_epochs = 1\ngrid.hidden = 4, 6\n").unwrap();
    let out = dir.path().join("run");
    ok(&hermit([
        "train", "--quiet", "--data", TOY, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]));
    let grid = std::fs::read_to_string(out.join("grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(grid.contains("hidden=4\t") && grid.contains("hidden=6\t"));
}

#[test]
fn tag_shapes() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path(), &[]);
    let model = dir.path().join("model.hmt");
    let model = model.to_str().unwrap();

    let text = ok(&hermit_stdin(&["tag", "--model", model], "where can i find starbucks ?\n"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split('\t').count() == 4));
    assert_eq!(rows[5].split('\t').next(), Some("?"));
    assert!(text.starts_with("# id: line-1\n"));

    assert_eq!(ok(&hermit_stdin(&["tag", "--model", model], "")), "");
    assert_eq!(ok(&hermit_stdin(&["tag", "--model", model], "\n  \n")), "");

    let gold = fixture("eval_gold.conll");
    let tagged = ok(&hermit(["tag", "--model", model, "--format", "conll", "--input", gold.to_str().unwrap()]));
    let parsed = parse_tagged(&tagged).unwrap();
    let original = parse_conll(&std::fs::read_to_string(&gold).unwrap()).unwrap();
    assert_eq!(parsed.iter().map(|t| t.gold.clone()).collect::<Vec<_>>(), original);

    let pred = dir.path().join("pred.conll");
    std::fs::write(&pred, &tagged).unwrap();
    ok(&hermit(["eval", "--gold", gold.to_str().unwrap(), "--pred", pred.to_str().unwrap()]));
}

#[test]
fn tag_rejects_other_checkpoint_versions() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path(), &["--set", "max_epochs=1"]);
    let path = dir.path().join("model.hmt");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[4] = 7;
    std::fs::write(&path, bytes).unwrap();
    let out = hermit_stdin(&["tag", "--model", path.to_str().unwrap()], "hello\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 7"));
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    ok(&hermit(["eval", "--gold", TOY, "--pred", TOY, "--out", dir.path().to_str().unwrap()]));
    let tsv = std::fs::read_to_string(dir.path().join("metrics.tsv")).unwrap();
    for line in tsv.lines().skip(1) {
        assert!(line.ends_with("\t1"), "{line}");
    }
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn eval_reports_misalignment() {
    let dir = tempfile::tempdir().unwrap();
    let gold = fixture("eval_gold.conll");
    let text = std::fs::read_to_string(fixture("eval_pred.conll")).unwrap();
    let short = dir.path().join("short.conll");
    std::fs::write(&short, text.split("# id: fx-5").next().unwrap()).unwrap();
    let out = hermit(["eval", "--gold", gold.to_str().unwrap(), "--pred", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fx-5"));

    let swapped = dir.path().join("swapped.conll");
    std::fs::write(&swapped, text.replace("fx-2", "fx-9")).unwrap();
    let out = hermit(["eval", "--gold", gold.to_str().unwrap(), "--pred", swapped.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sentence fx-2"));
}

#[test]
fn convert_writes_four_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.conll");
    ok(&hermit(["convert", "--nlubm-in", fixture("calendar.jsonl").to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let corpus = parse_conll(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(corpus.len(), 1);
    assert_eq!(corpus[0].ar_tags[1], "B-event_name");
}

#[test]
fn crossval_two_folds_and_self_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path, jobs: &str| {
        let mut args = vec![
            "crossval", "--quiet", "--data", TOY, "--k", "2", "--jobs", jobs, "--out", out.to_str().unwrap(),
        ];
        args.extend(SMALL);
        ok(&hermit(&args))
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let summary = run(&a, "1");
    run(&b, "2");
    assert!(summary.contains("combined f1: ") && summary.contains(" ± "));
    for f in ["fold-0.txt", "fold-1.txt", "folds.tsv", "aggregate.tsv", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert!(!a.join("fold-2.txt").exists());
    for f in ["folds.tsv", "aggregate.tsv", "fold-0.txt", "fold-1.history.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let folds = a.join("folds.tsv");
    let cmp = ok(&hermit(["crossval", "--compare", folds.to_str().unwrap(), folds.to_str().unwrap()]));
    let mut lines = cmp.lines();
    assert!(lines.next().unwrap().starts_with("task\tmetric\tn\t"));
    for line in lines {
        assert!(line.ends_with("\t-\t1.000000"), "{line}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(hermit(["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(hermit(["frobnicate"]).status.code(), Some(1));
    assert_eq!(hermit(["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = hermit(["train", "--data", "/nonexistent/x.conll", "--out", out]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_key = hermit(["train", "--data", TOY, "--out", out, "--set", "nonsense=1"]);
    assert_eq!(bad_key.status.code(), Some(2));
    let bad_protocol = hermit(["crossval", "--data", TOY, "--protocol", "nope"]);
    assert_eq!(bad_protocol.status.code(), Some(1));
    let bad = dir.path().join("bad.conll");
    std::fs::write(&bad, "a\tI-X\tO\tO\n").unwrap();
    let invalid = hermit(["eval", "--gold", bad.to_str().unwrap(), "--pred", bad.to_str().unwrap()]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("line 1"));
}
