use std::collections::HashMap;

use super::*;
use crate::dataset::{generate_session, split, DEFAULT_NONSUCCESS, DEFAULT_SUCCESS};
use crate::sim::EnvConfig;

struct Constant(f64);

impl SuccessPredictor for Constant {
    fn resolution(&self) -> (usize, usize) {
        (32, 24)
    }
    fn predict_success(&self, _: &Image) -> Result<RewardScore> {
        Ok(RewardScore(self.0))
    }
}

/// Looks up the stored label of each image.
struct Oracle(HashMap<Vec<u8>, Label>);

impl SuccessPredictor for Oracle {
    fn resolution(&self) -> (usize, usize) {
        (32, 24)
    }
    fn predict_success(&self, image: &Image) -> Result<RewardScore> {
        Ok(RewardScore(if self.0[&image.to_u8()] == Label::Success { 1.0 } else { 0.0 }))
    }
}

fn tiny_split(width: usize, height: usize) -> DatasetSplit {
    let cfg = EnvConfig::default().with_resolution(width, height);
    let sessions = (0..3u16).map(|id| generate_session(&cfg, id, 100 + u64::from(id), 8, 12).unwrap()).collect();
    split(sessions).unwrap()
}

#[test]
fn zeroed_head_predicts_one_half() {
    let mut params = ClassifierParams::new(32, 24, 3).unwrap();
    {
        let mut p = params.network_mut().params_mut();
        let n = p.len();
        p[n - 2].data_mut().fill(0.0);
        p[n - 1].data_mut().fill(0.0);
    }
    let img = crate::sim::render(&crate::sim::reset(&EnvConfig::default(), 1).unwrap(), &EnvConfig::default());
    assert_eq!(params.predict_success(&img).unwrap().0, 0.5);
    assert_eq!(predicted_label(0.5), Label::NonSuccess);
}

#[test]
fn resolution_mismatch_is_an_error() {
    let params = ClassifierParams::new(32, 24, 0).unwrap();
    let img = Image::filled(16, 12, 0.1);
    assert!(matches!(params.predict_success(&img), Err(Error::Config(_))));
}

#[test]
fn probabilities_sum_to_one() {
    let params = ClassifierParams::new(32, 24, 5).unwrap();
    let img = crate::sim::render(&crate::sim::reset(&EnvConfig::default(), 2).unwrap(), &EnvConfig::default());
    let p = params.predict_probs(&[&img]).unwrap()[0];
    assert!((p[0] + p[1] - 1.0).abs() <= 1e-9);
}

#[test]
fn accuracy_bounds_from_trivial_predictors() {
    let session = generate_session(&EnvConfig::default(), 0, 9, DEFAULT_SUCCESS, DEFAULT_NONSUCCESS).unwrap();
    assert_eq!(evaluate_accuracy(&Constant(0.0), &session).unwrap(), 440.0 / 640.0);
    let oracle = Oracle(session.images.iter().map(|l| (l.image.to_u8(), l.label)).collect());
    assert_eq!(evaluate_accuracy(&oracle, &session).unwrap(), 1.0);
    let empty = CaptureSession { session_id: 0, seed: 0, images: vec![] };
    assert!(evaluate_accuracy(&Constant(0.0), &empty).is_err());
}

#[test]
fn training_is_deterministic_and_selects_by_validation() {
    let sp = tiny_split(16, 16);
    let cfg = TrainConfig { epochs: 3, batch_size: 8, seed: 4, ..TrainConfig::default() };
    let (a, ra) = train_classifier(&sp, &cfg).unwrap();
    let (b, rb) = train_classifier(&sp, &cfg).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
    assert_eq!(ra.history.len(), 3);
    let best = ra.history.iter().map(|h| h.validation_accuracy).fold(0.0, f64::max);
    assert_eq!(ra.history[ra.selected_epoch - 1].validation_accuracy, best);
    assert!((0.0..=1.0).contains(&ra.test_accuracy));
}

#[test]
fn empty_partition_is_rejected() {
    let mut sp = tiny_split(16, 16);
    sp.validation.clear();
    assert!(train_classifier(&sp, &TrainConfig::default()).is_err());
    let sp = tiny_split(16, 16);
    assert!(train_classifier(&sp, &TrainConfig { epochs: 0, ..TrainConfig::default() }).is_err());
}

#[test]
fn rwcl_round_trip_predicts_identically() {
    let params = ClassifierParams::new(32, 24, 8).unwrap();
    let mut buf = Vec::new();
    params.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"RWCL");
    let back = ClassifierParams::read_from(&mut buf.as_slice()).unwrap();
    assert_eq!(back, params);
    let img = crate::sim::render(&crate::sim::reset(&EnvConfig::default(), 3).unwrap(), &EnvConfig::default());
    assert_eq!(
        back.predict_success(&img).unwrap().0.to_bits(),
        params.predict_success(&img).unwrap().0.to_bits()
    );
    let mut bad = buf.clone();
    bad[3] = b'N';
    assert!(matches!(ClassifierParams::read_from(&mut bad.as_slice()), Err(Error::BadMagic { .. })));
}
