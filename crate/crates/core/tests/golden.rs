//! Frozen artifacts under `tests/golden/`. Run with `SEQCTC_BLESS=1` to
//! regenerate them after an intentional format change.

use std::fs;
use std::path::{Path, PathBuf};

use seqctc::checkpoint::Checkpoint;
use seqctc::metrics::{evaluate, EvalReport};
use seqctc::net::{ExtractorKind, Init, Network, NetworkConfig};
use seqctc::optim::AdadeltaState;
use seqctc::rng;
use seqctc::synth::{render, GenSpec, GlyphSet, GrayImage, ManifestRecord, SampleManifest};
use seqctc::tensor::Tensor;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check_golden(name: &str, bytes: &[u8]) -> Vec<u8> {
    let path = golden_dir().join(name);
    if std::env::var_os("SEQCTC_BLESS").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, bytes).unwrap();
    }
    let frozen = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(frozen == bytes, "{name} differs from the frozen copy");
    frozen
}

fn seven() -> GrayImage {
    let spec = GenSpec {
        noise: 0.0,
        jitter: 0,
        scale: (1.9, 1.9),
        ..GenSpec::default()
    };
    render(&spec, &GlyphSet::default(), "7", &mut rng::stream(0, "golden", 0))
}

fn small_checkpoint() -> Checkpoint {
    let cfg = NetworkConfig {
        input_height: 3,
        input_width: 4,
        extractor: ExtractorKind::Identity,
        scale: 0.04,
        ..NetworkConfig::default()
    };
    let mut net = Network::build(cfg, Init::Seeded(3)).unwrap();
    let mut state = AdadeltaState::with_defaults(net.params());
    let x = Tensor::from_vec(&[1, 3, 4], (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
    let label = seqctc::ctc::LabelSequence(vec![4, 2]);
    let mut g = net.zero_grads();
    net.loss_and_grad(&x, &label, 1.0, &mut g).unwrap();
    state.step(net.params_mut(), &g).unwrap();
    Checkpoint::from_network(&net, 2, Some(&state))
}

fn small_report() -> EvalReport {
    let ids = ["a", "b", "c", "d", "e"];
    let truth = ["7", "12", "12", "4031", "5"].map(String::from);
    let pred = ["7", "12", "112", "431", "5"].map(String::from);
    evaluate(&ids, &pred, &truth).unwrap()
}

fn tiny_logits() -> Tensor {
    let net = Network::build(NetworkConfig::tiny(), Init::Seeded(1)).unwrap();
    let data = (0..32 * 64).map(|i| ((i * 37 % 11) as f64) / 10.0).collect();
    let x = Tensor::from_vec(&[1, 32, 64], data).unwrap();
    net.forward(&x).unwrap().logits
}

#[test]
fn pgm_golden_round_trips() {
    let frozen = check_golden("seven.pgm", &seven().encode());
    let img = GrayImage::decode(&frozen).unwrap();
    assert_eq!(img, seven());
    assert_eq!(img.encode(), frozen);
    let dir = tempfile::tempdir().unwrap();
    img.save(&dir.path().join("x.pgm")).unwrap();
    assert_eq!(fs::read(dir.path().join("x.pgm")).unwrap(), frozen);
}

#[test]
fn manifest_golden_round_trips() {
    let m = SampleManifest {
        root: PathBuf::from("."),
        records: ["3", "19", "0042", "7777777"]
            .iter()
            .enumerate()
            .map(|(i, l)| ManifestRecord {
                path: format!("imgs/{i:06}.pgm"),
                label: l.to_string(),
            })
            .collect(),
    };
    let frozen = check_golden("manifest.tsv", m.to_text().as_bytes());
    let parsed = SampleManifest::parse(std::str::from_utf8(&frozen).unwrap(), Path::new("."), "golden").unwrap();
    assert_eq!(parsed, m);
    assert_eq!(parsed.to_text().as_bytes(), frozen);
}

#[test]
fn checkpoint_golden_round_trips() {
    let ck = small_checkpoint();
    let frozen = check_golden("small.ckpt", &ck.encode());
    let back = Checkpoint::decode(&frozen).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.encode(), frozen);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.ckpt");
    back.save(&path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), frozen);
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}

#[test]
fn report_golden_round_trips() {
    let report = small_report();
    let text = report.to_key_values().unwrap();
    let frozen = check_golden("report.txt", text.as_bytes());
    let back = EvalReport::from_key_values(std::str::from_utf8(&frozen).unwrap()).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_key_values().unwrap().as_bytes(), frozen);
}

#[test]
fn tiny_network_logits_match_the_frozen_copy() {
    let logits = tiny_logits();
    let k = logits.shape()[1];
    let text: String = logits
        .data()
        .chunks(k)
        .map(|row| row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ") + "\n")
        .collect();
    let path = golden_dir().join("tiny_logits.txt");
    if std::env::var_os("SEQCTC_BLESS").is_some() {
        fs::write(&path, &text).unwrap();
    }
    let frozen: Vec<Vec<f64>> = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!((frozen.len(), frozen[0].len()), (8, 11));
    for (a, b) in logits.data().iter().zip(frozen.iter().flatten()) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}
