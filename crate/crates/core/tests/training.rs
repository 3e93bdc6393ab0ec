use std::collections::BTreeMap;

use seqctc::net::{Init, Network, NetworkConfig};
use seqctc::optim::AdadeltaState;
use seqctc::synth::{generate, load_dataset, GenSpec};
use seqctc::train::{train_epoch, TrainOptions};

#[test]
fn loss_decreases_over_the_first_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GenSpec {
        lengths: BTreeMap::from([(2, 50)]),
        seed: 1,
        ..GenSpec::default()
    };
    let manifest = generate(&spec, dir.path()).unwrap();
    let data = load_dataset(&manifest, 32, 64).unwrap();
    let mut net = Network::build(NetworkConfig::tiny(), Init::Seeded(3)).unwrap();
    let mut state = AdadeltaState::with_defaults(net.params());
    let opts = TrainOptions {
        batch_size: 10,
        ..TrainOptions::default()
    };
    let losses: Vec<f64> = (0..5)
        .map(|e| train_epoch(&mut net, &data, &opts, &mut state, 3, e).unwrap().mean_loss)
        .collect();
    println!("losses {losses:?}");
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}
