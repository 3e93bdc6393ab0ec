use seqctc::ctc::LabelSequence;
use seqctc::gradcheck::{self, GradCheck};
use seqctc::net::{ExtractorKind, NetworkConfig};

const LAYER_TOL: f64 = 1e-4;
const NETWORK_TOL: f64 = 1e-3;

fn assert_within(c: &GradCheck, tol: f64) {
    println!("{}: {} entries, max relative error {:e}", c.name, c.checked, c.max_rel_error);
    assert!(c.checked > 0, "{}: nothing checked", c.name);
    assert!(
        c.max_rel_error <= tol,
        "{}: max relative error {:e} > {tol:e} ({})",
        c.name,
        c.max_rel_error,
        c.worst
    );
}

#[test]
fn ctc_logit_gradient() {
    assert_within(&gradcheck::ctc_logits(1, 200).unwrap(), LAYER_TOL);
}

#[test]
fn conv2d_gradient() {
    assert_within(&gradcheck::conv2d(2).unwrap(), LAYER_TOL);
}

#[test]
fn maxpool_gradient() {
    assert_within(&gradcheck::maxpool(3).unwrap(), LAYER_TOL);
}

#[test]
fn inner_product_gradient() {
    assert_within(&gradcheck::inner_product(4).unwrap(), LAYER_TOL);
}

#[test]
fn lstm_bptt_gradient() {
    assert_within(&gradcheck::lstm(5).unwrap(), LAYER_TOL);
}

#[test]
fn relu_gradient() {
    assert_within(&gradcheck::relu(6).unwrap(), LAYER_TOL);
}

#[test]
fn reverse_permute_sum_gradients() {
    assert_within(&gradcheck::sequence_ops(7).unwrap(), LAYER_TOL);
}

#[test]
fn tiny_network_end_to_end() {
    let cfg = NetworkConfig {
        input_height: 16,
        input_width: 32,
        ..NetworkConfig::tiny()
    };
    let c = gradcheck::network(cfg, &LabelSequence(vec![2, 7]), 11, 50).unwrap();
    assert_eq!(c.checked, 50);
    assert_within(&c, NETWORK_TOL);
}

#[test]
fn identity_extractor_network_end_to_end() {
    let cfg = NetworkConfig {
        input_height: 4,
        input_width: 6,
        extractor: ExtractorKind::Identity,
        ..NetworkConfig::tiny()
    };
    let c = gradcheck::network(cfg, &LabelSequence(vec![3, 3, 1]), 12, 50).unwrap();
    assert_within(&c, NETWORK_TOL);
}
