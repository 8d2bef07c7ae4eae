//! Every file format written by the crate, read back through the public API.

use std::io::Cursor;
use std::sync::Arc;

use rwstate::dataset::{self, CaptureSession};
use rwstate::harness::{self, Pipeline};
use rwstate::nn::{LayerSpec, Network};
use rwstate::reward::{self, ClassifierParams, TrainConfig};
use rwstate::rl::{AgentParams, Algorithm, HyperParams};
use rwstate::sim::EnvConfig;
use rwstate::state::{self, PcaBasis, StateSpec};
use rwstate::Error;

fn small_sessions(count: u16) -> Vec<CaptureSession> {
    let env = EnvConfig::default().with_resolution(16, 8);
    dataset::generate_sessions(&env, count, 42, 12, 20, 1).unwrap()
}

fn truncations_fail(bytes: &[u8], read: impl Fn(&[u8]) -> rwstate::Result<()>) {
    for cut in [0, 3, 5, bytes.len() / 2, bytes.len() - 1] {
        assert!(read(&bytes[..cut]).is_err(), "accepted a file cut at {cut} of {}", bytes.len());
    }
}

#[test]
fn network_bytes_round_trip() {
    let specs = [
        LayerSpec::Conv2d { in_channels: 1, out_channels: 2 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d,
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 2 * 4 * 3, outputs: 3 },
        LayerSpec::Tanh,
    ];
    let net = Network::new(&[1, 8, 6], &specs, 1).unwrap();
    let bytes = net.to_bytes();
    let back = Network::from_bytes(&bytes).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.to_bytes(), bytes);
    truncations_fail(&bytes, |b| Network::from_bytes(b).map(drop));
}

#[test]
fn classifier_file_round_trip() {
    let clf = ClassifierParams::new(16, 8, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.rwcl");
    clf.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"RWCL");
    let back = ClassifierParams::load(&path).unwrap();
    let mut again = Vec::new();
    back.write_to(&mut again).unwrap();
    assert_eq!(again, bytes);
    truncations_fail(&bytes, |b| ClassifierParams::read_from(&mut Cursor::new(b)).map(drop));
}

#[test]
fn dataset_round_trip_and_predicted_size() {
    let sessions = small_sessions(3);
    let mut bytes = Vec::new();
    dataset::write_dataset(&mut bytes, &sessions).unwrap();
    let images: usize = sessions.iter().map(|s| s.images.len()).sum();
    assert_eq!(images, 3 * 32);
    assert_eq!(bytes.len(), dataset::expected_file_size(16, 8, 3, images));

    let back = dataset::read_dataset(&mut Cursor::new(&bytes)).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in sessions.iter().zip(&back) {
        assert_eq!((a.session_id, a.seed), (b.session_id, b.seed));
        assert_eq!(a.images.len(), b.images.len());
        for (x, y) in a.images.iter().zip(&b.images) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.image.to_u8(), y.image.to_u8());
        }
    }
    let mut again = Vec::new();
    dataset::write_dataset(&mut again, &back).unwrap();
    assert_eq!(again, bytes);
    truncations_fail(&bytes, |b| dataset::read_dataset(&mut Cursor::new(b)).map(drop));
}

#[test]
fn pca_basis_round_trip() {
    let sessions = small_sessions(2);
    let pixels: Vec<&[f64]> = sessions.iter().flat_map(|s| s.images.iter().map(|i| i.image.pixels())).collect();
    let basis = state::fit_pca(&pixels, 6).unwrap();
    let mut bytes = Vec::new();
    basis.write_to(&mut bytes).unwrap();
    let back = PcaBasis::read_from(&mut Cursor::new(&bytes)).unwrap();
    assert_eq!(back, basis);
    let mut again = Vec::new();
    back.write_to(&mut again).unwrap();
    assert_eq!(again, bytes);
    truncations_fail(&bytes, |b| PcaBasis::read_from(&mut Cursor::new(b)).map(drop));
}

#[test]
fn policy_round_trip_for_every_spec_and_algorithm() {
    let specs = [
        StateSpec::RewardWindow { n: 15, width: 32, height: 24 },
        StateSpec::PcaImage { k: 50, width: 32, height: 24 },
        StateSpec::Pixels { width: 8, height: 6 },
    ];
    for spec in specs {
        for algo in [Algorithm::Ddpg, Algorithm::Td3] {
            let p = AgentParams::new(algo, spec, 16, 5).unwrap();
            let bytes = p.to_bytes().unwrap();
            let back = AgentParams::read_from(&mut Cursor::new(&bytes)).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.to_bytes().unwrap(), bytes);
            truncations_fail(&bytes, |b| AgentParams::read_from(&mut Cursor::new(b)).map(drop));
        }
    }
}

#[test]
fn files_are_not_confused_with_each_other() {
    let clf = ClassifierParams::new(16, 8, 0).unwrap();
    let mut bytes = Vec::new();
    clf.write_to(&mut bytes).unwrap();
    assert!(matches!(AgentParams::read_from(&mut Cursor::new(&bytes)), Err(Error::BadMagic { .. })));
    assert!(matches!(PcaBasis::read_from(&mut Cursor::new(&bytes)), Err(Error::BadMagic { .. })));
    assert!(matches!(dataset::read_dataset(&mut Cursor::new(&bytes)), Err(Error::BadMagic { .. })));
}

#[test]
fn classifier_training_is_bit_reproducible() {
    let env = EnvConfig::default().with_resolution(16, 8);
    let split = dataset::split(dataset::generate_sessions(&env, 3, 7, 10, 22, 1).unwrap()).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 16, seed: 9, ..TrainConfig::default() };
    let (a, ra) = reward::train_classifier(&split, &cfg).unwrap();
    let (b, rb) = reward::train_classifier(&split, &cfg).unwrap();
    assert_eq!(ra, rb);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_to(&mut x).unwrap();
    b.write_to(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn policy_files_are_bit_reproducible() {
    let clf = Arc::new(ClassifierParams::new(32, 24, 1).unwrap());
    let spec = StateSpec::RewardWindow { n: 15, width: 32, height: 24 };
    let pipeline = Pipeline::new(EnvConfig::default(), clf, spec, None).unwrap();
    let hp = HyperParams { hidden: 8, warmup_steps: 30, batch_size: 8, ..HyperParams::default() };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in 0..2 {
        let out = harness::train_policy(&pipeline, Algorithm::Td3, &hp, 90, 11).unwrap();
        let path = dir.path().join(format!("p{run}.rwpl"));
        out.params.save(&path).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}
