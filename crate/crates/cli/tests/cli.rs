use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqctc::ctc::FramePosteriors;
use seqctc::metrics::EvalReport;

const CONFIG: &str = "\
[run]
seed = 5

[network]
scale = 1/8
input_width = 64

[optimizer]
batch_size = 8
epochs = 2

[gen]
out_dir = data
train_lengths = 1:12, 2:12, 3:8
test_lengths = 1:6, 3:6
noise = 0.05

[train]
train_eval_samples = 8
";

fn seqctc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqctc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn trained() -> Run {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.cfg"), CONFIG).unwrap();
        let run = Run { dir };
        let out = seqctc(&["train", "--config", s(&run.config())]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        run
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn config(&self) -> PathBuf {
        self.path("run.cfg")
    }

    fn checkpoint(&self) -> PathBuf {
        self.path("checkpoints/last.ckpt")
    }
}

#[test]
fn train_writes_one_log_line_and_checkpoint_per_epoch() {
    let run = Run::trained();
    let log = fs::read_to_string(run.path("train.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("epoch=1 loss="));
    assert!(lines[1].starts_with("epoch=2 loss="));
    assert!(!log.contains("wall="));
    for f in ["epoch-0001.ckpt", "epoch-0002.ckpt", "last.ckpt"] {
        assert!(run.path("checkpoints").join(f).is_file(), "{f}");
    }
    assert_eq!(
        fs::read(run.path("checkpoints/epoch-0002.ckpt")).unwrap(),
        fs::read(run.checkpoint()).unwrap()
    );
    assert!(run.path("data/train/manifest.tsv").is_file());
}

#[test]
fn gen_prints_manifests_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, CONFIG).unwrap();
    let out = seqctc(&["gen", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("length 1: 12"), "{stdout}");
    assert!(stdout.contains("length 3: 6"), "{stdout}");
    let text = fs::read_to_string(dir.path().join("data/test/manifest.tsv")).unwrap();
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn width_one_beam_report_equals_greedy_report() {
    let run = Run::trained();
    let (greedy, beam) = (run.path("greedy.txt"), run.path("beam.txt"));
    let ck = run.checkpoint();
    let out = seqctc(&["eval", "--config", s(&run.config()), "--checkpoint", s(&ck), "--report", s(&greedy)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = seqctc(&[
        "eval",
        "--config",
        s(&run.config()),
        "--checkpoint",
        s(&ck),
        "--report",
        s(&beam),
        "--beam-width",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let g = fs::read_to_string(&greedy).unwrap();
    assert_eq!(g, fs::read_to_string(&beam).unwrap());
    let report = EvalReport::from_key_values(&g).unwrap();
    assert_eq!(report.total, 12);
}

#[test]
fn eval_defaults_report_path_next_to_checkpoint() {
    let run = Run::trained();
    let manifest = run.path("data/train/manifest.tsv");
    let out = seqctc(&["eval", "--checkpoint", s(&run.checkpoint()), "--manifest", s(&manifest)]);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(run.path("checkpoints/last.ckpt.report.txt")).unwrap();
    assert_eq!(EvalReport::from_key_values(&report).unwrap().total, 32);
}

#[test]
fn decode_prints_label_and_writes_posteriors() {
    let run = Run::trained();
    let post = run.path("post.txt");
    let image = run.path("data/train/imgs/000000.pgm");
    let out = seqctc(&[
        "decode",
        "--checkpoint",
        s(&run.checkpoint()),
        s(&image),
        "--emit-posteriors",
        s(&post),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let (label, score) = stdout.trim_end().split_once('\t').unwrap();
    assert!(label.chars().all(|c| c.is_ascii_digit()));
    assert!(score.parse::<f64>().unwrap() <= 0.0);
    let y = FramePosteriors::from_text(&fs::read_to_string(&post).unwrap()).unwrap();
    assert_eq!((y.steps(), y.classes()), (8, 11));
    for row in y.rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn bad_inputs_exit_with_status_2() {
    let run = Run::trained();
    let ck = run.checkpoint();

    assert_eq!(code(&seqctc(&[])), 2);

    let out = seqctc(&["eval", "--checkpoint", s(&ck), "--manifest", s(&run.path("nope.tsv"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.tsv"));

    let junk = run.path("junk.pgm");
    fs::write(&junk, b"not an image").unwrap();
    assert_eq!(code(&seqctc(&["decode", "--checkpoint", s(&ck), s(&junk)])), 2);

    let out = seqctc(&["decode", "--checkpoint", s(&run.path("train.log")), s(&junk)]);
    assert_eq!(code(&out), 2);

    let out = seqctc(&["eval", "--config", s(&run.config()), "--checkpoint", s(&ck), "--decoder", "greedy", "--beam-width", "3"]);
    assert_eq!(code(&out), 2);

    let bad_cfg = run.path("bad.cfg");
    fs::write(&bad_cfg, "[run]\nseed = 1\n[optimizer]\nlearning_rate = 3\n").unwrap();
    let out = seqctc(&["train", "--config", s(&bad_cfg)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":4"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn checkpoint_from_another_topology_is_rejected() {
    let run = Run::trained();
    let other = run.path("other.cfg");
    fs::write(&other, CONFIG.replace("scale = 1/8", "scale = 1/4")).unwrap();
    let out = seqctc(&["eval", "--config", s(&other), "--checkpoint", s(&run.checkpoint())]);
    assert_eq!(code(&out), 2);
    let out = seqctc(&["train", "--config", s(&other), "--checkpoint", s(&run.checkpoint())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, CONFIG.replace("test_lengths = 1:6, 3:6", "test_lengths = 2:0")).unwrap();
    let out = seqctc(&["gen", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no samples"));
    assert_eq!(fs::read_to_string(dir.path().join("data/test/manifest.tsv")).unwrap(), "");

    fs::write(&cfg, CONFIG.replace("test_lengths = 1:6, 3:6", "test_lengths = 9:1")).unwrap();
    let out = seqctc(&["gen", "--config", s(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("length 9"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_on_training_manifest_agrees_with_logged_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, CONFIG.replace("train_eval_samples = 8", "train_eval_samples = 100")).unwrap();
    assert_eq!(code(&seqctc(&["train", "--config", s(&cfg)])), 0);
    let log = fs::read_to_string(dir.path().join("train.log")).unwrap();
    let logged: f64 = log
        .lines()
        .last()
        .unwrap()
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("train_rate="))
        .unwrap()
        .parse()
        .unwrap();
    let report = dir.path().join("r.txt");
    let out = seqctc(&[
        "eval",
        "--checkpoint",
        s(&dir.path().join("checkpoints/last.ckpt")),
        "--manifest",
        s(&dir.path().join("data/train/manifest.tsv")),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 0);
    let rate = EvalReport::from_key_values(&fs::read_to_string(&report).unwrap()).unwrap().rate;
    assert!(rate >= logged - 0.01, "{rate} vs {logged}");
}
