//! Binary checkpoint format.
//!
//! ```text
//! magic "SCNFCKPT" | version u32 | iteration u64 | config hash [u8; 32]
//! layer count u32
//! per layer: kind u8 | relu u8 | in u32 | out u32 | weights f32[] | bias f32[]
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Layer, LayerKind, NetShape, PatchNet, NUM_CONVS};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SCNFCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: PatchNet<f32>,
    /// Training iterations that produced these parameters.
    pub iteration: u64,
}

impl Checkpoint {
    /// Hash identifying the architecture the parameters belong to.
    pub fn config_hash(shape: &NetShape) -> [u8; 32] {
        Sha256::digest(shape.describe().as_bytes()).into()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&Self::config_hash(self.net.shape()));
        out.extend_from_slice(&(self.net.layers().len() as u32).to_le_bytes());
        for layer in self.net.layers() {
            out.push(match layer.kind {
                LayerKind::Conv3x3 => 0,
                LayerKind::Pointwise => 1,
            });
            out.push(layer.relu as u8);
            out.extend_from_slice(&(layer.in_channels as u32).to_le_bytes());
            out.extend_from_slice(&(layer.out_channels as u32).to_le_bytes());
            for v in layer.weights.iter().chain(&layer.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::InvalidData("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::InvalidData(format!("unsupported checkpoint version {version}")));
        }
        let iteration = r.u64()?;
        let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let count = r.u32()? as usize;
        if count < NUM_CONVS + 1 {
            return Err(Error::InvalidData(format!("checkpoint has only {count} layers")));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let kind = match r.u8()? {
                0 => LayerKind::Conv3x3,
                1 => LayerKind::Pointwise,
                k => return Err(Error::InvalidData(format!("unknown layer kind {k}"))),
            };
            let relu = r.u8()? != 0;
            let in_channels = r.u32()? as usize;
            let out_channels = r.u32()? as usize;
            let fan_in = if kind == LayerKind::Conv3x3 { 9 * in_channels } else { in_channels };
            let weights = r.f32s(fan_in * out_channels)?;
            let bias = r.f32s(out_channels)?;
            layers.push(Layer {
                kind,
                in_channels,
                out_channels,
                relu,
                weights,
                bias,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::InvalidData("trailing bytes after checkpoint".into()));
        }
        let conv: Vec<usize> = layers.iter().take(NUM_CONVS).map(|l| l.out_channels).collect();
        let shape = NetShape {
            conv_widths: conv
                .try_into()
                .map_err(|_| Error::InvalidData("checkpoint lacks convolution layers".into()))?,
            fc_widths: layers[NUM_CONVS..count - 1].iter().map(|l| l.out_channels).collect(),
            use_image: layers[0].in_channels == 2,
        };
        if Self::config_hash(&shape) != hash {
            return Err(Error::InvalidData("checkpoint config hash does not match its layers".into()));
        }
        let net = PatchNet::from_layers(&shape, layers)?;
        Ok(Self { net, iteration })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::InvalidData("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::InvalidData("layer too large".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; with `expected` set, the architecture must match it.
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&NetShape>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt = Checkpoint::from_bytes(&bytes)
        .map_err(|e| Error::format("checkpoint", path, e.to_string()))?;
    if let Some(shape) = expected {
        if Checkpoint::config_hash(shape) != Checkpoint::config_hash(ckpt.net.shape()) {
            return Err(Error::Config(format!(
                "checkpoint {} was trained for {}, configuration asks for {}",
                path.display(),
                ckpt.net.shape().describe(),
                shape.describe()
            )));
        }
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let shape = NetShape {
            conv_widths: [3, 4, 5, 6],
            fc_widths: vec![7],
            use_image: true,
        };
        let ckpt = Checkpoint {
            net: PatchNet::init(&shape, 9).unwrap(),
            iteration: 42,
        };
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corruption_detected() {
        let ckpt = Checkpoint {
            net: PatchNet::init(&NetShape::default(), 1).unwrap(),
            iteration: 0,
        };
        let bytes = ckpt.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[30] ^= 1;
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }
}
