//! Weight checkpoints.
//!
//! Layout, all little-endian: magic `VSNN`, u32 version (1), u32 input_h,
//! u32 input_w, u32 hidden, u32 group_size, u32 classes, u32 window, f64
//! tau_m, f64 v_th_hidden, f64 v_th_output, then the input-to-hidden matrix
//! and the hidden-to-output matrix as row-major f64.

use std::io::{Read, Write};
use std::path::Path;

use super::{NeuronParams, SnnTopology, SnnWeights};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"VSNN";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, w: &SnnWeights) -> Result<()> {
    w.validate()?;
    let t = &w.topology;
    out.write_all(&CHECKPOINT_MAGIC)?;
    let dims = [
        VERSION,
        t.input_h,
        t.input_w,
        t.hidden as u32,
        t.group_size as u32,
        t.classes as u32,
        t.window as u32,
    ];
    for d in dims {
        out.write_all(&d.to_le_bytes())?;
    }
    for v in [w.neurons.tau_m, w.neurons.v_th_hidden, w.neurons.v_th_output] {
        out.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * (w.w_ih.len() + w.w_ho.len()));
    for v in w.w_ih.iter().chain(&w.w_ho) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<SnnWeights> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("checkpoint too short".into()))?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    let mut dims = [0u32; 7];
    for d in dims.iter_mut() {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Format("truncated checkpoint header".into()))?;
        *d = u32::from_le_bytes(word);
    }
    if dims[0] != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", dims[0])));
    }
    let mut f = [0.0f64; 3];
    let mut dword = [0u8; 8];
    for v in f.iter_mut() {
        input
            .read_exact(&mut dword)
            .map_err(|_| Error::Format("truncated checkpoint header".into()))?;
        *v = f64::from_le_bytes(dword);
    }
    let topology = SnnTopology {
        input_h: dims[1],
        input_w: dims[2],
        hidden: dims[3] as usize,
        group_size: dims[4] as usize,
        classes: dims[5] as usize,
        window: dims[6] as usize,
    };
    let neurons = NeuronParams {
        tau_m: f[0],
        v_th_hidden: f[1],
        v_th_output: f[2],
    };
    let mut w = SnnWeights::zeros(topology, neurons)?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    let expected = 8 * (w.w_ih.len() + w.w_ho.len());
    if body.len() != expected {
        return Err(Error::Format(format!(
            "checkpoint body has {} bytes, expected {expected}",
            body.len()
        )));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    w.w_ih.iter_mut().chain(w.w_ho.iter_mut()).for_each(|v| *v = values.next().unwrap());
    w.validate()?;
    Ok(w)
}

pub fn save_checkpoint(path: &Path, w: &SnnWeights) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, w)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_checkpoint(path: &Path) -> Result<SnnWeights> {
    let file = std::fs::File::open(path).map_err(|e| crate::io::open_error(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}
