//! `RWNN` network files.
//!
//! Little-endian layout:
//!
//! ```text
//! "RWNN" | version u16 | layer_count u16
//! per layer: tag u8 | dims u32* | weight f64* | bias f64*
//! ```
//!
//! | tag | kind      | dims                       |
//! |-----|-----------|----------------------------|
//! | 0   | Dense     | inputs, outputs            |
//! | 1   | Conv2d    | in_channels, out_channels, kernel (=3) |
//! | 2   | MaxPool2d | size (=2)                  |
//! | 3   | Relu      | -                          |
//! | 4   | Tanh      | -                          |
//! | 5   | Flatten   | -                          |
//! | 6   | Softmax   | -                          |
//!
//! Weights are stored as `[inputs, outputs]` for dense layers and
//! `[out, in, 3, 3]` for convolutions; parameter-free layers carry no data.

use std::io::{Read, Write};

use byteorder::{LittleEndian, WriteBytesExt};

use super::layer::{Layer, LayerSpec, CONV_KERNEL, POOL_SIZE};
use super::network::Network;
use super::tensor::Tensor;
use crate::binio::*;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"RWNN";
pub const VERSION: u16 = 1;

impl Network {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u16::<LittleEndian>(checked_u16(self.layers().len(), "layer count")?)?;
        for layer in self.layers() {
            let (tag, dims): (u8, Vec<usize>) = match layer.spec {
                LayerSpec::Dense { inputs, outputs } => (0, vec![inputs, outputs]),
                LayerSpec::Conv2d { in_channels, out_channels } => (1, vec![in_channels, out_channels, CONV_KERNEL]),
                LayerSpec::MaxPool2d => (2, vec![POOL_SIZE]),
                LayerSpec::Relu => (3, vec![]),
                LayerSpec::Tanh => (4, vec![]),
                LayerSpec::Flatten => (5, vec![]),
                LayerSpec::Softmax => (6, vec![]),
            };
            w.write_u8(tag)?;
            for d in dims {
                w.write_u32::<LittleEndian>(checked_u32(d, "layer dimension")?)?;
            }
            if let (Some(wt), Some(b)) = (&layer.weight, &layer.bias) {
                write_f64s(w, wt.data())?;
                write_f64s(w, b.data())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        expect_version(r, VERSION)?;
        let count = read_u16(r, "layer count")? as usize;
        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let tag = read_u8(r, "layer tag")?;
            let spec = match tag {
                0 => {
                    let inputs = read_u32(r, "dense inputs")? as usize;
                    let outputs = read_u32(r, "dense outputs")? as usize;
                    if inputs == 0 || outputs == 0 {
                        return Err(Error::Inconsistent(format!("layer {i}: zero-sized dense layer")));
                    }
                    LayerSpec::Dense { inputs, outputs }
                }
                1 => {
                    let in_channels = read_u32(r, "conv in_channels")? as usize;
                    let out_channels = read_u32(r, "conv out_channels")? as usize;
                    let k = read_u32(r, "conv kernel")? as usize;
                    if k != CONV_KERNEL || in_channels == 0 || out_channels == 0 {
                        return Err(Error::Inconsistent(format!("layer {i}: unsupported conv {in_channels}->{out_channels} k={k}")));
                    }
                    LayerSpec::Conv2d { in_channels, out_channels }
                }
                2 => {
                    let size = read_u32(r, "pool size")? as usize;
                    if size != POOL_SIZE {
                        return Err(Error::Inconsistent(format!("layer {i}: unsupported pool size {size}")));
                    }
                    LayerSpec::MaxPool2d
                }
                3 => LayerSpec::Relu,
                4 => LayerSpec::Tanh,
                5 => LayerSpec::Flatten,
                6 => LayerSpec::Softmax,
                t => return Err(Error::Inconsistent(format!("layer {i}: unknown kind tag {t}"))),
            };
            let (weight, bias) = match (spec.weight_shape(), spec.bias_shape()) {
                (Some(ws), Some(bs)) => {
                    let wn = ws.iter().product();
                    let bn = bs.iter().product();
                    let wd = read_f64s(r, wn, "weights")?;
                    let bd = read_f64s(r, bn, "biases")?;
                    (Some(Tensor::new(ws, wd)?), Some(Tensor::new(bs, bd)?))
                }
                _ => (None, None),
            };
            layers.push(Layer { spec, weight, bias });
        }
        Ok(Network::from_layers(layers))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses a complete buffer; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let net = Self::read_from(&mut cursor)?;
        expect_eof(&mut cursor)?;
        Ok(net)
    }
}
