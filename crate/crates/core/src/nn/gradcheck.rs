//! Finite-difference verification of `Network::backward`.

use rand::Rng;

use super::layer::LayerSpec;
use super::network::Network;
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng;

/// Scalar objective used for the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLoss {
    /// Mean cross-entropy through the fused softmax path (softmax heads only).
    CrossEntropy,
    /// Random linear functional of the output through the generic backward.
    Linear,
}

const BATCH: usize = 2;

/// Max relative error between analytic and central-difference gradients over
/// every parameter. Cross-entropy is used for softmax heads.
pub fn grad_check(input_shape: &[usize], specs: &[LayerSpec], seed: u64, eps: f64) -> Result<f64> {
    let loss = if specs.last() == Some(&LayerSpec::Softmax) { CheckLoss::CrossEntropy } else { CheckLoss::Linear };
    grad_check_with(input_shape, specs, seed, eps, loss)
}

pub fn grad_check_with(
    input_shape: &[usize],
    specs: &[LayerSpec],
    seed: u64,
    eps: f64,
    loss: CheckLoss,
) -> Result<f64> {
    let mut net = Network::new(input_shape, specs, seed)?;
    let out_shape = net.output_shape(input_shape)?;
    let mut r = rng::stream(seed, 1);

    // inputs bounded away from zero so relu/pool ties are unlikely
    let n_in: usize = input_shape.iter().product();
    let input_data: Vec<f64> = (0..BATCH * n_in)
        .map(|_| {
            let mag = r.random_range(0.1..1.0);
            if r.random_bool(0.5) { mag } else { -mag }
        })
        .collect();
    let mut shape = vec![BATCH];
    shape.extend_from_slice(input_shape);
    let input = Tensor::new(shape, input_data)?;

    let n_out: usize = out_shape.iter().product();
    let coeffs: Vec<f64> = (0..BATCH * n_out).map(|_| r.random_range(-1.0..1.0)).collect();
    let targets: Vec<usize> = (0..BATCH).map(|_| r.random_range(0..n_out)).collect();

    let objective = |net: &Network| -> Result<f64> {
        let y = net.predict(input.clone())?;
        Ok(match loss {
            CheckLoss::Linear => y.data().iter().zip(&coeffs).map(|(a, b)| a * b).sum(),
            CheckLoss::CrossEntropy => {
                -targets.iter().enumerate().map(|(n, &t)| y.data()[n * n_out + t].ln()).sum::<f64>() / BATCH as f64
            }
        })
    };

    let (y, tape) = net.forward(input.clone())?;
    let analytic = match loss {
        CheckLoss::Linear => net.backward(&tape, &Tensor::new(y.shape().to_vec(), coeffs.clone())?)?.params,
        CheckLoss::CrossEntropy => net.backward_cross_entropy(&tape, &targets)?.1.params,
    };

    let sizes: Vec<usize> = net.params().iter().map(|t| t.len()).collect();
    let mut worst: f64 = 0.0;
    for (pi, &size) in sizes.iter().enumerate() {
        for j in 0..size {
            let orig = net.params()[pi].data()[j];
            net.params_mut()[pi].data_mut()[j] = orig + eps;
            let plus = objective(&net)?;
            net.params_mut()[pi].data_mut()[j] = orig - eps;
            let minus = objective(&net)?;
            net.params_mut()[pi].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.0[pi].data()[j];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
