use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn condrum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condrum"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = condrum(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn first_song(corpus: &Path) -> PathBuf {
    let mut songs: Vec<_> = std::fs::read_dir(corpus)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .collect();
    songs.sort();
    songs.remove(0)
}

/// synth -> train -> generate -> features -> embed; returns digests of every output.
fn pipeline(dir: &Path) -> Vec<String> {
    ok(dir, &["synth", "--songs", "3", "--bars", "4", "--meters", "4/4,7/8", "--seed", "5", "--out", "corpus"]);
    ok(dir, &["train", "--corpus", "corpus", "--epochs", "2", "--snapshots", "1", "--hidden", "8", "--seed", "5", "--out", "ckpt"]);
    let song = first_song(&dir.join("corpus"));
    let song = song.to_str().unwrap();
    ok(dir, &["generate", "--checkpoint", "ckpt/epoch-0002.ckpt", "--conditions", song, "--temperature", "0.8", "--seed-steps", "4", "--seed", "3", "--out", "gen.json"]);
    ok(dir, &["features", "corpus", "--out", "gt.csv"]);
    ok(dir, &["features", "gen.json", "--group", "late", "--out", "late.csv"]);
    ok(dir, &["embed", "gt.csv", "late.csv", "--perplexity", "1", "--seed", "2", "--out", "emb.csv"]);
    [
        "corpus/manifest.json",
        "ckpt/epoch-0001.ckpt",
        "ckpt/epoch-0002.ckpt",
        "ckpt/loss.csv",
        "gen.json",
        "gt.csv",
        "late.csv",
        "emb.csv",
    ]
    .iter()
    .map(|f| digest(&dir.join(f)))
    .collect()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = condrum(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = condrum(dir.path(), &["synth", "--bogus", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = condrum(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("generate"));
}

#[test]
fn missing_checkpoint_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--songs", "1", "--bars", "2", "--out", "corpus"]);
    let song = first_song(&dir.path().join("corpus"));
    let out = condrum(dir.path(), &["generate", "--checkpoint", "missing.ckpt", "--conditions", song.to_str().unwrap(), "--out", "g.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ckpt"));
    assert!(!dir.path().join("g.json").exists());
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--songs", "1", "--bars", "2", "--out", "corpus"]);
    ok(dir.path(), &["train", "--corpus", "corpus", "--epochs", "1", "--hidden", "4", "--out", "ckpt"]);
    let path = dir.path().join("ckpt/epoch-0001.ckpt");
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    let song = first_song(&dir.path().join("corpus"));
    let out = condrum(dir.path(), &["generate", "--checkpoint", "ckpt/epoch-0001.ckpt", "--conditions", song.to_str().unwrap(), "--out", "g.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn full_pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(pipeline(a.path()), pipeline(b.path()));
}

#[test]
fn generation_seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let song = first_song(&dir.path().join("corpus"));
    let song = song.to_str().unwrap();
    let run = |seed: &str, out: &str| {
        ok(dir.path(), &["generate", "--checkpoint", "ckpt/epoch-0002.ckpt", "--conditions", song, "--seed-steps", "1", "--seed", seed, "--out", out]);
        digest(&dir.path().join(out))
    };
    assert_eq!(run("1", "a.json"), run("1", "b.json"));
    assert_ne!(run("1", "a.json"), run("2", "c.json"));
}

#[test]
fn resume_continues_the_loss_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--songs", "2", "--bars", "2", "--out", "corpus"]);
    ok(d, &["train", "--corpus", "corpus", "--epochs", "3", "--hidden", "4", "--out", "straight"]);
    ok(d, &["train", "--corpus", "corpus", "--epochs", "1", "--hidden", "4", "--out", "first"]);
    ok(d, &["train", "--corpus", "corpus", "--epochs", "3", "--resume", "first/epoch-0001.ckpt", "--out", "resumed"]);
    assert_eq!(digest(&d.join("straight/epoch-0003.ckpt")), digest(&d.join("resumed/epoch-0003.ckpt")));
}

#[test]
fn config_file_sets_defaults_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), r#"{"songs": 2, "bars": 2, "style": "disco"}"#).unwrap();
    ok(d, &["--config", "run.json", "synth", "--out", "corpus"]);
    let manifest = std::fs::read_to_string(d.join("corpus/manifest.json")).unwrap();
    assert!(manifest.contains("disco"));
    assert_eq!(std::fs::read_dir(d.join("corpus")).unwrap().count(), 3);

    std::fs::write(d.join("bad.json"), r#"{"sngs": 2}"#).unwrap();
    let out = condrum(d, &["--config", "bad.json", "synth", "--out", "c2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sngs"));
}

#[test]
fn unknown_style_lists_known_styles() {
    let dir = tempfile::tempdir().unwrap();
    let out = condrum(dir.path(), &["synth", "--style", "polka", "--out", "c"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("synthrock") && err.contains("disco"), "{err}");
}

#[test]
fn invalid_temperature_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let song = first_song(&dir.path().join("corpus"));
    let out = condrum(dir.path(), &["generate", "--checkpoint", "ckpt/epoch-0002.ckpt", "--conditions", song.to_str().unwrap(), "--temperature", "0", "--out", "g.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_output_directory_fails_before_work() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let out = condrum(dir.path(), &["features", "corpus", "--out", "nowhere/f.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["gradcheck", "--hidden", "3", "--steps", "2", "--seed", "4"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative error"));
}
