use super::layer::{self, Cache, Layer, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// A feed-forward stack with its parameters.
///
/// `version` changes on every parameter mutation so tapes recorded against
/// older parameters are rejected by `backward`.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    version: u64,
}

/// Compares parameters only; the version counter is bookkeeping.
impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by `forward`, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    specs: Vec<LayerSpec>,
    version: u64,
    caches: Vec<Cache>,
    output: Tensor,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

/// Gradients in parameter order: weight then bias for each parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flat_map(|t| t.data().iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// In-place `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }
}

#[derive(Debug)]
pub struct Backward {
    pub params: Gradients,
    pub input: Tensor,
}

impl Network {
    /// Builds and initializes a network, checking that layer shapes chain
    /// from `input_shape` (per sample, without the batch dimension).
    pub fn new(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let net = Self::from_layers(specs.iter().map(|&s| Layer { spec: s, weight: None, bias: None }).collect());
        net.output_shape(input_shape)?;
        let mut r = rng::rng_from(seed);
        let layers = specs.iter().map(|&s| Layer::init(s, &mut r)).collect();
        Ok(Self::from_layers(layers))
    }

    pub(crate) fn from_layers(layers: Vec<Layer>) -> Self {
        Self { layers, version: 0 }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        let mut shape = input_shape.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            shape = l.spec.output_shape(i, &shape)?;
        }
        Ok(shape)
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .collect()
    }

    /// Mutable parameter access; bumps the version.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
            .collect()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.params().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect())
    }

    /// Batched forward pass. `input` has shape `[batch, ...sample]`.
    pub fn forward(&self, input: Tensor) -> Result<(Tensor, Tape)> {
        if input.shape().len() < 2 {
            return Err(Error::Shape {
                layer: 0,
                detail: format!("input must be [batch, ...], got {:?}", input.shape()),
            });
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input;
        for (i, l) in self.layers.iter().enumerate() {
            let (y, cache) = layer::forward(i, l, x)?;
            caches.push(cache);
            x = y;
        }
        let tape = Tape { specs: self.specs(), version: self.version, caches, output: x.clone() };
        Ok((x, tape))
    }

    /// Forward without keeping a tape.
    pub fn predict(&self, input: Tensor) -> Result<Tensor> {
        if input.shape().len() < 2 {
            return Err(Error::Shape {
                layer: 0,
                detail: format!("input must be [batch, ...], got {:?}", input.shape()),
            });
        }
        let mut x = input;
        for (i, l) in self.layers.iter().enumerate() {
            x = layer::forward(i, l, x)?.0;
        }
        Ok(x)
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.specs != self.specs() {
            return Err(Error::Usage("tape was recorded on a different network".into()));
        }
        if tape.version != self.version {
            return Err(Error::Usage("stale tape: parameters changed since forward".into()));
        }
        Ok(())
    }

    /// Backpropagates `output_gradient` (same shape as the forward output).
    pub fn backward(&self, tape: &Tape, output_gradient: &Tensor) -> Result<Backward> {
        self.check_tape(tape)?;
        if output_gradient.shape() != tape.output.shape() {
            return Err(Error::Shape {
                layer: self.layers.len() - 1,
                detail: format!(
                    "output gradient {:?} does not match output {:?}",
                    output_gradient.shape(),
                    tape.output.shape()
                ),
            });
        }
        Ok(self.backward_from(tape, self.layers.len(), output_gradient.clone()))
    }

    /// Fused softmax + mean cross-entropy. The last layer must be `Softmax`;
    /// its Jacobian is skipped and `(p - onehot) / batch` is fed to the layer
    /// before it. Returns the mean loss with the gradients.
    pub fn backward_cross_entropy(&self, tape: &Tape, targets: &[usize]) -> Result<(f64, Backward)> {
        self.check_tape(tape)?;
        let last = self.layers.len() - 1;
        if self.layers[last].spec != LayerSpec::Softmax {
            return Err(Error::Usage("cross-entropy backward needs a softmax head".into()));
        }
        let p = &tape.output;
        let (batch, classes) = (p.shape()[0], p.shape()[1]);
        if targets.len() != batch {
            return Err(Error::Dimension { expected: batch, got: targets.len() });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::Config(format!("target class {t} out of range for {classes} classes")));
        }
        let scale = 1.0 / batch as f64;
        let mut grad = p.data().to_vec();
        let mut loss = 0.0;
        for (n, &t) in targets.iter().enumerate() {
            loss -= p.data()[n * classes + t].max(f64::MIN_POSITIVE).ln();
            grad[n * classes + t] -= 1.0;
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        let dlogits = Tensor::from_parts(p.shape().to_vec(), grad);
        Ok((loss * scale, self.backward_from(tape, last, dlogits)))
    }

    fn backward_from(&self, tape: &Tape, end: usize, mut dy: Tensor) -> Backward {
        let mut grads: Vec<Tensor> = Vec::new();
        for i in (0..end).rev() {
            let (dx, dw, db) = layer::backward(&self.layers[i], &tape.caches[i], &dy);
            if let Some(db) = db {
                grads.push(db);
            }
            if let Some(dw) = dw {
                grads.push(dw);
            }
            dy = dx;
        }
        // layers after `end` (a skipped softmax) have no parameters
        grads.reverse();
        Backward { params: Gradients(grads), input: dy }
    }

    /// Elementwise `self <- tau * online + (1 - tau) * self`.
    pub fn polyak_from(&mut self, online: &Network, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Config(format!("polyak tau must be in (0, 1], got {tau}")));
        }
        if self.specs() != online.specs() {
            return Err(Error::Usage("polyak update between networks of different shape".into()));
        }
        let src: Vec<Tensor> = online.params().into_iter().cloned().collect();
        for (t, s) in self.params_mut().into_iter().zip(&src) {
            for (a, &b) in t.data_mut().iter_mut().zip(s.data()) {
                *a = if tau == 1.0 { b } else { tau * b + (1.0 - tau) * *a };
            }
        }
        Ok(())
    }
}
