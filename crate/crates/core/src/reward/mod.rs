//! Image-based task-success classifier whose softmax confidence is the reward.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::binio::*;
use crate::dataset::{CaptureSession, DatasetSplit, Label, LabeledImage};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{AdamState, LayerSpec, Network, Tensor};
use crate::rng;

pub const MAGIC: [u8; 4] = *b"RWCL";

/// Success probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct RewardScore(pub f64);

impl RewardScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Anything that maps an image to a success probability.
pub trait SuccessPredictor {
    fn resolution(&self) -> (usize, usize);
    fn predict_success(&self, image: &Image) -> Result<RewardScore>;
}

/// Layer stack for `width x height` grayscale inputs.
pub fn classifier_layers(width: usize, height: usize) -> Vec<LayerSpec> {
    let flat = 64 * (height / 8) * (width / 8);
    vec![
        LayerSpec::Conv2d { in_channels: 1, out_channels: 16 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d,
        LayerSpec::Conv2d { in_channels: 16, out_channels: 32 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d,
        LayerSpec::Conv2d { in_channels: 32, out_channels: 64 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d,
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: flat, outputs: 128 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 128, outputs: 2 },
        LayerSpec::Softmax,
    ]
}

/// Trained classifier plus the input resolution it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    width: usize,
    height: usize,
    network: Network,
}

impl ClassifierParams {
    pub fn new(width: usize, height: usize, seed: u64) -> Result<Self> {
        if width < 8 || height < 8 {
            return Err(Error::Config(format!("classifier needs at least 8x8 inputs, got {width}x{height}")));
        }
        let network = Network::new(&[1, height, width], &classifier_layers(width, height), seed)?;
        Ok(Self { width, height, network })
    }

    /// Wraps an existing network after checking it maps the resolution to two classes.
    pub fn from_network(width: usize, height: usize, network: Network) -> Result<Self> {
        let out = network.output_shape(&[1, height, width])?;
        if out != [2] {
            return Err(Error::Inconsistent(format!("classifier must output 2 classes, got {out:?}")));
        }
        if network.layers().last().map(|l| l.spec) != Some(LayerSpec::Softmax) {
            return Err(Error::Inconsistent("classifier must end in softmax".into()));
        }
        Ok(Self { width, height, network })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    fn batch_tensor<'a, I: IntoIterator<Item = &'a Image>>(&self, images: I) -> Result<Tensor> {
        let mut data = Vec::new();
        let mut n = 0;
        for img in images {
            if img.resolution() != (self.width, self.height) {
                return Err(Error::Config(format!(
                    "image is {}x{}, classifier expects {}x{}",
                    img.width(),
                    img.height(),
                    self.width,
                    self.height
                )));
            }
            data.extend_from_slice(img.pixels());
            n += 1;
        }
        if n == 0 {
            return Err(Error::Config("empty image batch".into()));
        }
        Ok(Tensor::from_parts(vec![n, 1, self.height, self.width], data))
    }

    /// `[p(NonSuccess), p(Success)]` for each image.
    pub fn predict_probs(&self, images: &[&Image]) -> Result<Vec<[f64; 2]>> {
        let x = self.batch_tensor(images.iter().copied())?;
        let y = self.network.predict(x)?;
        Ok(y.data().chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn predict_batch(&self, images: &[&Image]) -> Result<Vec<RewardScore>> {
        Ok(self.predict_probs(images)?.into_iter().map(|p| RewardScore(p[1])).collect())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u16::<LittleEndian>(checked_u16(self.width, "width")?)?;
        w.write_u16::<LittleEndian>(checked_u16(self.height, "height")?)?;
        self.network.write_to(w)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        let width = read_u16(r, "width")? as usize;
        let height = read_u16(r, "height")? as usize;
        let network = Network::read_from(r)?;
        expect_eof(r)?;
        Self::from_network(width, height, network)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}

impl SuccessPredictor for ClassifierParams {
    fn resolution(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn predict_success(&self, image: &Image) -> Result<RewardScore> {
        Ok(self.predict_batch(&[image])?[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 32, learning_rate: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
    pub test_accuracy: f64,
}

const EVAL_CHUNK: usize = 64;

/// Mean cross-entropy and accuracy over labeled images.
fn loss_and_accuracy(params: &ClassifierParams, images: &[&LabeledImage]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for chunk in images.chunks(EVAL_CHUNK) {
        let imgs: Vec<&Image> = chunk.iter().map(|l| &l.image).collect();
        let probs = params.predict_probs(&imgs)?;
        for (p, l) in probs.iter().zip(chunk) {
            loss -= p[l.label.class_index()].max(f64::MIN_POSITIVE).ln();
            if predicted_label(p[1]) == l.label {
                correct += 1;
            }
        }
    }
    let n = images.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Argmax over the two classes; an exact tie goes to NonSuccess.
pub fn predicted_label(p_success: f64) -> Label {
    if p_success > 0.5 { Label::Success } else { Label::NonSuccess }
}

/// Minibatch Adam on softmax cross-entropy. Keeps the parameters from the
/// epoch with the best validation accuracy (lower validation loss breaks
/// ties) and measures test accuracy once, after selection.
pub fn train_classifier(split: &DatasetSplit, config: &TrainConfig) -> Result<(ClassifierParams, TrainReport)> {
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be >= 1".into()));
    }
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        if part.iter().all(|s| s.images.is_empty()) {
            return Err(Error::Config(format!("{name} partition is empty")));
        }
    }
    let train: Vec<&LabeledImage> = split.train_images().collect();
    let validation: Vec<&LabeledImage> = split.validation.iter().flat_map(|s| &s.images).collect();
    let test: Vec<&LabeledImage> = split.test.iter().flat_map(|s| &s.images).collect();
    let (width, height) = train[0].image.resolution();
    if train.iter().chain(&validation).chain(&test).any(|l| l.image.resolution() != (width, height)) {
        return Err(Error::Inconsistent("dataset mixes image resolutions".into()));
    }

    let mut params = ClassifierParams::new(width, height, rng::derive_seed(config.seed, 1))?;
    let mut adam = AdamState::new(&params.network, config.learning_rate);
    let mut shuffle_rng = rng::stream(config.seed, 2);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, f64, usize, ClassifierParams)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let imgs: Vec<&Image> = batch.iter().map(|&i| &train[i].image).collect();
            let targets: Vec<usize> = batch.iter().map(|&i| train[i].label.class_index()).collect();
            let x = params.batch_tensor(imgs)?;
            let (probs, tape) = params.network.forward(x)?;
            for (p, &t) in probs.data().chunks_exact(2).zip(&targets) {
                if predicted_label(p[1]).class_index() == t {
                    correct += 1;
                }
            }
            let (loss, back) = params.network.backward_cross_entropy(&tape, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("classifier loss in epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            adam.step(&mut params.network, &back.params)?;
        }
        let (validation_loss, validation_accuracy) = loss_and_accuracy(&params, &validation)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            validation_loss,
            validation_accuracy,
        });
        let better = match &best {
            None => true,
            Some((acc, loss, _, _)) => {
                validation_accuracy > *acc || (validation_accuracy == *acc && validation_loss < *loss)
            }
        };
        if better {
            best = Some((validation_accuracy, validation_loss, epoch, params.clone()));
        }
    }

    let (_, _, selected_epoch, selected) = best.expect("at least one epoch");
    let (_, test_accuracy) = loss_and_accuracy(&selected, &test)?;
    let report = TrainReport {
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        seed: config.seed,
        history,
        selected_epoch,
        test_accuracy,
    };
    Ok((selected, report))
}

/// Trains every `(epochs, batch)` pair and keeps the model with the best
/// final validation accuracy. Returns all reports, best first.
pub fn sweep_classifiers(
    split: &DatasetSplit,
    epochs: &[usize],
    batches: &[usize],
    seed: u64,
) -> Result<(ClassifierParams, Vec<TrainReport>)> {
    let mut runs = Vec::new();
    for &e in epochs {
        for &b in batches {
            let cfg = TrainConfig { epochs: e, batch_size: b, seed, ..TrainConfig::default() };
            let (params, report) = train_classifier(split, &cfg)?;
            let val = report.history[report.selected_epoch - 1].validation_accuracy;
            runs.push((val, params, report));
        }
    }
    if runs.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }
    // stable sort keeps grid order among equal scores
    runs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite accuracy"));
    let mut iter = runs.into_iter();
    let (_, best, first) = iter.next().expect("non-empty");
    let mut reports = vec![first];
    reports.extend(iter.map(|(_, _, r)| r));
    Ok((best, reports))
}

/// Fraction of images whose predicted class equals the label.
pub fn evaluate_accuracy<P: SuccessPredictor + ?Sized>(predictor: &P, session: &CaptureSession) -> Result<f64> {
    if session.images.is_empty() {
        return Err(Error::Config(format!("session {} has no images", session.session_id)));
    }
    let mut correct = 0usize;
    for l in &session.images {
        if predicted_label(predictor.predict_success(&l.image)?.0) == l.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / session.images.len() as f64)
}

#[cfg(test)]
mod tests;
