//! Binary weight checkpoints.
//!
//! Layout (all integers little-endian `u32` unless noted, floats are raw
//! little-endian IEEE-754 `f64` bit patterns):
//!
//! ```text
//! magic "CQNN" | version | n_networks
//! per network:
//!   transform: u8 (0 none, 1 shifted softplus) | skip | n_layers
//!   per layer:
//!     in_dim | out_dim | activation: u8 (0 identity, 1 relu, 2 softplus)
//!     constraint: u8 (0 free, 1 non-negative, 2 per-entry) [+ in·out bytes 0/1]
//!     has_mask: u8 [+ in·out bytes 0/1]
//!     in·out weights (f64) | out biases (f64)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Activation, DenseLayer, Network, OutputTransform, WeightConstraint};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CQNN";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_flags(out: &mut Vec<u8>, flags: &[bool]) {
    out.extend(flags.iter().map(|&f| f as u8));
}

pub fn encode_networks(nets: &[&Network]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, nets.len() as u32);
    for net in nets {
        match net.output_transform {
            OutputTransform::None => {
                out.push(0);
                put_u32(&mut out, 0);
            }
            OutputTransform::ShiftedSoftplus { skip } => {
                out.push(1);
                put_u32(&mut out, skip as u32);
            }
        }
        put_u32(&mut out, net.layers.len() as u32);
        for l in &net.layers {
            put_u32(&mut out, l.in_dim as u32);
            put_u32(&mut out, l.out_dim as u32);
            out.push(match l.activation {
                Activation::Identity => 0,
                Activation::Relu => 1,
                Activation::Softplus => 2,
            });
            match &l.constraint {
                WeightConstraint::Free => out.push(0),
                WeightConstraint::NonNegative => out.push(1),
                WeightConstraint::PerEntry(flags) => {
                    out.push(2);
                    put_flags(&mut out, flags);
                }
            }
            match &l.mask {
                None => out.push(0),
                Some(mask) => {
                    out.push(1);
                    put_flags(&mut out, mask);
                }
            }
            for w in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn flags(&mut self, n: usize) -> Result<Vec<bool>> {
        self.take(n)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Checkpoint(format!("invalid flag byte {other}"))),
            })
            .collect()
    }
}

pub fn decode_networks(buf: &[u8]) -> Result<Vec<Network>> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_nets = c.u32()? as usize;
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let tag = c.u8()?;
        let skip = c.u32()? as usize;
        let output_transform = match tag {
            0 => OutputTransform::None,
            1 => OutputTransform::ShiftedSoftplus { skip },
            t => return Err(Error::Checkpoint(format!("unknown output transform {t}"))),
        };
        let n_layers = c.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = c.u32()? as usize;
            let out_dim = c.u32()? as usize;
            let n = in_dim * out_dim;
            let activation = match c.u8()? {
                0 => Activation::Identity,
                1 => Activation::Relu,
                2 => Activation::Softplus,
                t => return Err(Error::Checkpoint(format!("unknown activation {t}"))),
            };
            let constraint = match c.u8()? {
                0 => WeightConstraint::Free,
                1 => WeightConstraint::NonNegative,
                2 => WeightConstraint::PerEntry(c.flags(n)?),
                t => return Err(Error::Checkpoint(format!("unknown constraint {t}"))),
            };
            let mask = match c.u8()? {
                0 => None,
                1 => Some(c.flags(n)?),
                t => return Err(Error::Checkpoint(format!("invalid mask flag {t}"))),
            };
            let weights = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..out_dim).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(DenseLayer {
                in_dim,
                out_dim,
                weights,
                bias,
                activation,
                constraint,
                mask,
            });
        }
        nets.push(Network::new(layers, output_transform)?);
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Ok(nets)
}

pub fn save_networks(path: &Path, nets: &[&Network]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_networks(nets))?;
    Ok(())
}

pub fn load_networks(path: &Path) -> Result<Vec<Network>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_networks(&buf)
}
