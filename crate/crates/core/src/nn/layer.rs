use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const CONV_KERNEL: usize = 3;
pub const POOL_SIZE: usize = 2;

/// One layer of a feed-forward stack.
///
/// Convolutions are 3x3, stride 1, "same" padding; pooling is 2x2 max with
/// floor semantics. Shapes exclude the batch dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Conv2d { in_channels: usize, out_channels: usize },
    MaxPool2d,
    Relu,
    Tanh,
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some(vec![inputs, outputs]),
            LayerSpec::Conv2d { in_channels, out_channels } => {
                Some(vec![out_channels, in_channels, CONV_KERNEL, CONV_KERNEL])
            }
            _ => None,
        }
    }

    pub fn bias_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Dense { outputs, .. } => Some(vec![outputs]),
            LayerSpec::Conv2d { out_channels, .. } => Some(vec![out_channels]),
            _ => None,
        }
    }

    /// Output sample shape for a given input sample shape.
    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |detail: String| Error::Shape { layer: index, detail };
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(bad(format!("dense expects [{inputs}], got {input:?}")));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d { in_channels, out_channels } => match input {
                [c, h, w] if *c == in_channels => Ok(vec![out_channels, *h, *w]),
                _ => Err(bad(format!("conv2d expects [{in_channels}, H, W], got {input:?}"))),
            },
            LayerSpec::MaxPool2d => match input {
                [c, h, w] if *h >= POOL_SIZE && *w >= POOL_SIZE => {
                    Ok(vec![*c, h / POOL_SIZE, w / POOL_SIZE])
                }
                _ => Err(bad(format!("maxpool2d expects [C, H>=2, W>=2], got {input:?}"))),
            },
            LayerSpec::Relu | LayerSpec::Tanh => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Softmax => match input {
                [n] if *n >= 1 => Ok(vec![*n]),
                _ => Err(bad(format!("softmax expects a vector, got {input:?}"))),
            },
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
            LayerSpec::Conv2d { in_channels, out_channels } => {
                let k = CONV_KERNEL * CONV_KERNEL;
                (in_channels * k, out_channels * k)
            }
            _ => (0, 0),
        }
    }
}

/// A layer together with its parameters (empty for parameter-free kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Option<Tensor>,
    pub bias: Option<Tensor>,
}

impl Layer {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(spec: LayerSpec, rng: &mut R) -> Self {
        match (spec.weight_shape(), spec.bias_shape()) {
            (Some(ws), Some(bs)) => {
                let (fan_in, fan_out) = spec.fans();
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let n: usize = ws.iter().product();
                let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
                Layer {
                    spec,
                    weight: Some(Tensor::from_parts(ws, data)),
                    bias: Some(Tensor::zeros(bs)),
                }
            }
            _ => Layer { spec, weight: None, bias: None },
        }
    }
}

/// Per-layer values kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Tensor),
    Output(Tensor),
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Flatten { input_shape: Vec<usize> },
}

pub(crate) fn forward(index: usize, layer: &Layer, x: Tensor) -> Result<(Tensor, Cache)> {
    let sample: Vec<usize> = x.shape()[1..].to_vec();
    let out_sample = layer.spec.output_shape(index, &sample)?;
    let batch = x.batch();
    let mut out_shape = vec![batch];
    out_shape.extend_from_slice(&out_sample);
    match layer.spec {
        LayerSpec::Dense { inputs, outputs } => {
            let w = layer.weight.as_ref().expect("dense weight").data();
            let b = layer.bias.as_ref().expect("dense bias").data();
            let mut y = vec![0.0; batch * outputs];
            for (xr, yr) in x.data().chunks_exact(inputs).zip(y.chunks_exact_mut(outputs)) {
                yr.copy_from_slice(b);
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let wr = &w[i * outputs..(i + 1) * outputs];
                    for (yo, &wo) in yr.iter_mut().zip(wr) {
                        *yo += xi * wo;
                    }
                }
            }
            Ok((Tensor::from_parts(out_shape, y), Cache::Input(x)))
        }
        LayerSpec::Conv2d { in_channels, out_channels } => {
            let (h, w) = (sample[1], sample[2]);
            let wt = layer.weight.as_ref().expect("conv weight").data();
            let b = layer.bias.as_ref().expect("conv bias").data();
            let plane = h * w;
            let mut y = vec![0.0; batch * out_channels * plane];
            for (xs, ys) in x.data().chunks_exact(in_channels * plane).zip(y.chunks_exact_mut(out_channels * plane)) {
                for oc in 0..out_channels {
                    let yp = &mut ys[oc * plane..(oc + 1) * plane];
                    yp.fill(b[oc]);
                    for ic in 0..in_channels {
                        let xp = &xs[ic * plane..(ic + 1) * plane];
                        let kbase = (oc * in_channels + ic) * CONV_KERNEL * CONV_KERNEL;
                        conv_accumulate(xp, yp, &wt[kbase..kbase + 9], h, w);
                    }
                }
            }
            Ok((Tensor::from_parts(out_shape, y), Cache::Input(x)))
        }
        LayerSpec::MaxPool2d => {
            let (c, h, w) = (sample[0], sample[1], sample[2]);
            let (oh, ow) = (h / POOL_SIZE, w / POOL_SIZE);
            let mut y = Vec::with_capacity(batch * c * oh * ow);
            let mut argmax = Vec::with_capacity(batch * c * oh * ow);
            let xd = x.data();
            for n in 0..batch {
                for ch in 0..c {
                    let base = (n * c + ch) * h * w;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = base + (2 * oy) * w + 2 * ox;
                            for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                                if xd[idx] > xd[best] {
                                    best = idx;
                                }
                            }
                            y.push(xd[best]);
                            argmax.push(best);
                        }
                    }
                }
            }
            let input_shape = x.shape().to_vec();
            Ok((Tensor::from_parts(out_shape, y), Cache::Pool { input_shape, argmax }))
        }
        LayerSpec::Relu => {
            let y: Vec<f64> = x.data().iter().map(|&v| v.max(0.0)).collect();
            Ok((Tensor::from_parts(out_shape, y), Cache::Input(x)))
        }
        LayerSpec::Tanh => {
            let y = Tensor::from_parts(out_shape, x.data().iter().map(|v| v.tanh()).collect());
            Ok((y.clone(), Cache::Output(y)))
        }
        LayerSpec::Flatten => {
            let input_shape = x.shape().to_vec();
            Ok((Tensor::from_parts(out_shape, x.into_data()), Cache::Flatten { input_shape }))
        }
        LayerSpec::Softmax => {
            let n = out_sample[0];
            let mut y = x.into_data();
            for row in y.chunks_exact_mut(n) {
                softmax_in_place(row);
            }
            let y = Tensor::from_parts(out_shape, y);
            Ok((y.clone(), Cache::Output(y)))
        }
    }
}

/// Returns `(input gradient, weight gradient, bias gradient)`.
pub(crate) fn backward(
    layer: &Layer,
    cache: &Cache,
    dy: &Tensor,
) -> (Tensor, Option<Tensor>, Option<Tensor>) {
    match (layer.spec, cache) {
        (LayerSpec::Dense { inputs, outputs }, Cache::Input(x)) => {
            let w = layer.weight.as_ref().expect("dense weight").data();
            let mut dw = vec![0.0; inputs * outputs];
            let mut db = vec![0.0; outputs];
            let mut dx = vec![0.0; x.len()];
            for ((xr, dyr), dxr) in x
                .data()
                .chunks_exact(inputs)
                .zip(dy.data().chunks_exact(outputs))
                .zip(dx.chunks_exact_mut(inputs))
            {
                for (o, &g) in dyr.iter().enumerate() {
                    db[o] += g;
                }
                for (i, &xi) in xr.iter().enumerate() {
                    let wr = &w[i * outputs..(i + 1) * outputs];
                    let dwr = &mut dw[i * outputs..(i + 1) * outputs];
                    let mut acc = 0.0;
                    for ((dwo, &wo), &g) in dwr.iter_mut().zip(wr).zip(dyr) {
                        *dwo += xi * g;
                        acc += wo * g;
                    }
                    dxr[i] = acc;
                }
            }
            (
                Tensor::from_parts(x.shape().to_vec(), dx),
                Some(Tensor::from_parts(vec![inputs, outputs], dw)),
                Some(Tensor::from_parts(vec![outputs], db)),
            )
        }
        (LayerSpec::Conv2d { in_channels, out_channels }, Cache::Input(x)) => {
            let (h, w) = (x.shape()[2], x.shape()[3]);
            let plane = h * w;
            let wt = layer.weight.as_ref().expect("conv weight").data();
            let mut dw = vec![0.0; wt.len()];
            let mut db = vec![0.0; out_channels];
            let mut dx = vec![0.0; x.len()];
            for ((xs, dys), dxs) in x
                .data()
                .chunks_exact(in_channels * plane)
                .zip(dy.data().chunks_exact(out_channels * plane))
                .zip(dx.chunks_exact_mut(in_channels * plane))
            {
                for oc in 0..out_channels {
                    let gp = &dys[oc * plane..(oc + 1) * plane];
                    db[oc] += gp.iter().sum::<f64>();
                    for ic in 0..in_channels {
                        let xp = &xs[ic * plane..(ic + 1) * plane];
                        let dxp = &mut dxs[ic * plane..(ic + 1) * plane];
                        let kbase = (oc * in_channels + ic) * 9;
                        conv_backward(xp, gp, &wt[kbase..kbase + 9], &mut dw[kbase..kbase + 9], dxp, h, w);
                    }
                }
            }
            (
                Tensor::from_parts(x.shape().to_vec(), dx),
                Some(Tensor::from_parts(layer.spec.weight_shape().expect("conv"), dw)),
                Some(Tensor::from_parts(vec![out_channels], db)),
            )
        }
        (LayerSpec::MaxPool2d, Cache::Pool { input_shape, argmax }) => {
            let mut dx = vec![0.0; input_shape.iter().product()];
            for (&idx, &g) in argmax.iter().zip(dy.data()) {
                dx[idx] += g;
            }
            (Tensor::from_parts(input_shape.clone(), dx), None, None)
        }
        (LayerSpec::Relu, Cache::Input(x)) => {
            let dx = x.data().iter().zip(dy.data()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
            (Tensor::from_parts(x.shape().to_vec(), dx), None, None)
        }
        (LayerSpec::Tanh, Cache::Output(y)) => {
            let dx = y.data().iter().zip(dy.data()).map(|(&t, &g)| g * (1.0 - t * t)).collect();
            (Tensor::from_parts(y.shape().to_vec(), dx), None, None)
        }
        (LayerSpec::Flatten, Cache::Flatten { input_shape }) => {
            (Tensor::from_parts(input_shape.clone(), dy.data().to_vec()), None, None)
        }
        (LayerSpec::Softmax, Cache::Output(p)) => {
            let n = p.shape()[1];
            let mut dx = vec![0.0; p.len()];
            for ((pr, gr), dxr) in p.data().chunks_exact(n).zip(dy.data().chunks_exact(n)).zip(dx.chunks_exact_mut(n)) {
                let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for ((d, &pi), &gi) in dxr.iter_mut().zip(pr).zip(gr) {
                    *d = pi * (gi - dot);
                }
            }
            (Tensor::from_parts(p.shape().to_vec(), dx), None, None)
        }
        (spec, _) => unreachable!("cache kind does not match layer {spec:?}"),
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Valid output column range for kernel column offset `kx` (input col = out col + kx - 1).
#[inline]
fn col_range(kx: usize, w: usize) -> (usize, usize) {
    match kx {
        0 => (1, w),
        1 => (0, w),
        _ => (0, w - 1),
    }
}

fn conv_accumulate(x: &[f64], y: &mut [f64], k: &[f64], h: usize, w: usize) {
    for ky in 0..3 {
        for kx in 0..3 {
            let wv = k[ky * 3 + kx];
            let (x0, x1) = col_range(kx, w);
            if x0 >= x1 {
                continue;
            }
            for oy in 0..h {
                let iy = oy + ky;
                if iy == 0 || iy > h {
                    continue;
                }
                let iy = iy - 1;
                let yr = &mut y[oy * w + x0..oy * w + x1];
                let xr = &x[iy * w + x0 + kx - 1..iy * w + x1 + kx - 1];
                for (a, &b) in yr.iter_mut().zip(xr) {
                    *a += wv * b;
                }
            }
        }
    }
}

fn conv_backward(x: &[f64], g: &[f64], k: &[f64], dk: &mut [f64], dx: &mut [f64], h: usize, w: usize) {
    for ky in 0..3 {
        for kx in 0..3 {
            let wv = k[ky * 3 + kx];
            let (x0, x1) = col_range(kx, w);
            if x0 >= x1 {
                continue;
            }
            let mut acc = 0.0;
            for oy in 0..h {
                let iy = oy + ky;
                if iy == 0 || iy > h {
                    continue;
                }
                let iy = iy - 1;
                let gr = &g[oy * w + x0..oy * w + x1];
                let off = iy * w + x0 + kx - 1;
                let xr = &x[off..off + (x1 - x0)];
                let dxr = &mut dx[off..off + (x1 - x0)];
                for ((&gv, &xv), d) in gr.iter().zip(xr).zip(dxr.iter_mut()) {
                    acc += gv * xv;
                    *d += wv * gv;
                }
            }
            dk[ky * 3 + kx] += acc;
        }
    }
}
