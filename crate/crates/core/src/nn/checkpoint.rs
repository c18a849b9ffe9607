//! Binary checkpoint format for [`DenseNet`] parameters.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"RGNET1\0\0"            8 bytes
//! n_dims  u32, then n_dims * u32   layer dims
//! acts    one u8 per layer         0 = relu, 1 = identity
//! dropout f64 bit pattern
//! params  f64 per parameter, layer order, weights then bias
//! ```
//!
//! Floats are written as raw IEEE-754 bit patterns so a round trip is
//! bit-exact.

use std::io::{Read, Write};

use super::{Activation, DenseNet};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RGNET1\0\0";

pub fn write_dense_net<W: Write>(net: &DenseNet, w: &mut W) -> Result<()> {
    let ctx = "writing dense net checkpoint";
    let io = |e| Error::io(ctx, e);
    w.write_all(MAGIC).map_err(io)?;
    let dims = net.layer_dims();
    w.write_all(&(dims.len() as u32).to_le_bytes())
        .map_err(io)?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
    }
    for act in net.activations() {
        let tag: u8 = match act {
            Activation::Relu => 0,
            Activation::Identity => 1,
        };
        w.write_all(&[tag]).map_err(io)?;
    }
    w.write_all(&net.dropout_rate().to_bits().to_le_bytes())
        .map_err(io)?;
    for i in 0..net.num_params() {
        w.write_all(&net.param(i).to_bits().to_le_bytes())
            .map_err(io)?;
    }
    Ok(())
}

pub fn read_dense_net<R: Read>(r: &mut R) -> Result<DenseNet> {
    let ctx = "reading dense net checkpoint";
    let io = |e| Error::io(ctx, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(
            "bad magic (not a dense-net checkpoint)".into(),
        ));
    }
    let n_dims = read_u32(r, ctx)? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Checkpoint(format!("implausible dim count {n_dims}")));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        dims.push(read_u32(r, ctx)? as usize);
    }
    let mut acts = Vec::with_capacity(n_dims - 1);
    for _ in 0..n_dims - 1 {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag).map_err(io)?;
        acts.push(match tag[0] {
            0 => Activation::Relu,
            1 => Activation::Identity,
            other => {
                return Err(Error::Checkpoint(format!("unknown activation tag {other}")));
            }
        });
    }
    let dropout = f64::from_bits(read_u64(r, ctx)?);
    let mut net = DenseNet::new(&dims, &acts, dropout)?;
    for i in 0..net.num_params() {
        net.set_param(i, f64::from_bits(read_u64(r, ctx)?));
    }
    Ok(net)
}

fn read_u32<R: Read>(r: &mut R, ctx: &'static str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(ctx, e))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R, ctx: &'static str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| Error::io(ctx, e))?;
    Ok(u64::from_le_bytes(buf))
}
