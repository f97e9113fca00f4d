//! On-disk containers: the "SGCL" checkpoint (length-prefixed named
//! tensors, little-endian f32) and the "SGCB" bit-packed embedding file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bits::BinaryMatrix;
use crate::contrastive::PredictorParams;
use crate::encoder::EncoderParams;
use crate::error::{Result, SgclError};
use crate::nd::{DenseMatrix, ParamTensor};
use crate::neuron::{NeuronConfig, NeuronKind, ResetMode};

const CHECKPOINT_MAGIC: &[u8; 4] = b"SGCL";
const EMBEDDING_MAGIC: &[u8; 4] = b"SGCB";
const VERSION: u8 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_tensor<W: Write>(w: &mut W, name: &str, m: &DenseMatrix) -> Result<()> {
    write_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    write_u32(w, m.rows as u32)?;
    write_u32(w, m.cols as u32)?;
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R) -> Result<Option<(String, DenseMatrix)>> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let name_len = u32::from_le_bytes(len_buf) as usize;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name)
        .map_err(|_| SgclError::Parse { line: 0, msg: "tensor name is not utf-8".into() })?;
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    let mut data = vec![0.0f32; rows * cols];
    let mut buf = [0u8; 4];
    for v in &mut data {
        r.read_exact(&mut buf)?;
        *v = f32::from_le_bytes(buf);
    }
    Ok(Some((name, DenseMatrix::from_vec(rows, cols, data)?)))
}

fn neuron_meta(cfg: &NeuronConfig) -> Vec<f32> {
    vec![
        match cfg.kind {
            NeuronKind::If => 0.0,
            NeuronKind::Lif => 1.0,
            NeuronKind::Plif => 2.0,
        },
        cfg.v_threshold,
        cfg.v_reset,
        match cfg.reset_mode {
            ResetMode::ToZero => 0.0,
            ResetMode::BySubtraction => 1.0,
        },
        cfg.tau_m,
        cfg.surrogate_alpha,
    ]
}

fn neuron_from_meta(meta: &[f32]) -> Result<NeuronConfig> {
    if meta.len() != 6 {
        return Err(SgclError::Parse { line: 0, msg: "bad neuron meta block".into() });
    }
    Ok(NeuronConfig {
        kind: match meta[0] as u32 {
            0 => NeuronKind::If,
            1 => NeuronKind::Lif,
            2 => NeuronKind::Plif,
            _ => return Err(SgclError::Parse { line: 0, msg: "bad neuron kind".into() }),
        },
        v_threshold: meta[1],
        v_reset: meta[2],
        reset_mode: if meta[3] == 0.0 {
            ResetMode::ToZero
        } else {
            ResetMode::BySubtraction
        },
        tau_m: meta[4],
        surrogate_alpha: meta[5],
    })
}

/// Writes encoder + predictor parameters to a checkpoint file.
pub fn save_checkpoint(
    path: &Path,
    encoder: &EncoderParams,
    predictor: &PredictorParams,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[VERSION])?;
    let mut meta = vec![
        encoder.t_steps() as f32,
        encoder.hidden as f32,
        encoder.depth as f32,
    ];
    meta.extend(neuron_meta(&encoder.neuron));
    write_tensor(&mut w, "meta", &DenseMatrix::from_vec(1, meta.len(), meta)?)?;
    for (t, p) in encoder.first_w.iter().enumerate() {
        write_tensor(&mut w, &format!("first_w.{t}"), &p.value)?;
    }
    for (t, p) in encoder.first_b.iter().enumerate() {
        write_tensor(&mut w, &format!("first_b.{t}"), &p.value)?;
    }
    for (l, p) in encoder.shared.iter().enumerate() {
        write_tensor(&mut w, &format!("shared.{l}"), &p.value)?;
    }
    write_tensor(&mut w, "tau_raw", &encoder.tau_raw.value)?;
    write_tensor(&mut w, "pred_w", &predictor.w.value)?;
    write_tensor(&mut w, "pred_b", &predictor.b.value)?;
    Ok(())
}

/// Reads a checkpoint written by `save_checkpoint`.
pub fn load_checkpoint(path: &Path) -> Result<(EncoderParams, PredictorParams)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(SgclError::Parse { line: 0, msg: "not an SGCL checkpoint".into() });
    }
    let mut ver = [0u8; 1];
    r.read_exact(&mut ver)?;
    if ver[0] != VERSION {
        return Err(SgclError::Parse { line: 0, msg: format!("unsupported version {}", ver[0]) });
    }
    let mut tensors = std::collections::HashMap::new();
    while let Some((name, m)) = read_tensor(&mut r)? {
        tensors.insert(name, m);
    }
    let take = |tensors: &mut std::collections::HashMap<String, DenseMatrix>,
                name: &str|
     -> Result<DenseMatrix> {
        tensors
            .remove(name)
            .ok_or_else(|| SgclError::Parse { line: 0, msg: format!("missing tensor {name}") })
    };
    let meta = take(&mut tensors, "meta")?;
    if meta.data.len() != 9 {
        return Err(SgclError::Parse { line: 0, msg: "bad meta tensor".into() });
    }
    let t_steps = meta.data[0] as usize;
    let hidden = meta.data[1] as usize;
    let depth = meta.data[2] as usize;
    let neuron = neuron_from_meta(&meta.data[3..])?;
    let mut first_w = Vec::with_capacity(t_steps);
    let mut first_b = Vec::with_capacity(t_steps);
    for t in 0..t_steps {
        first_w.push(ParamTensor::new(take(&mut tensors, &format!("first_w.{t}"))?));
        first_b.push(ParamTensor::new(take(&mut tensors, &format!("first_b.{t}"))?));
    }
    let mut shared = Vec::with_capacity(depth.saturating_sub(1));
    for l in 0..depth.saturating_sub(1) {
        shared.push(ParamTensor::new(take(&mut tensors, &format!("shared.{l}"))?));
    }
    let tau_raw = ParamTensor::new(take(&mut tensors, "tau_raw")?);
    let predictor = PredictorParams {
        w: ParamTensor::new(take(&mut tensors, "pred_w")?),
        b: ParamTensor::new(take(&mut tensors, "pred_b")?),
    };
    Ok((
        EncoderParams {
            first_w,
            first_b,
            shared,
            tau_raw,
            neuron,
            depth,
            hidden,
        },
        predictor,
    ))
}

/// Embedding header size in bytes: magic + version + (N, T, k).
pub const EMBEDDING_HEADER_BYTES: usize = 4 + 1 + 3 * 4;

/// Writes a pooled bit-packed embedding: magic "SGCB", version, N, T, k,
/// then ceil(T*k/8) bytes per row.
pub fn save_embedding(path: &Path, z: &BinaryMatrix, t_steps: usize, k: usize) -> Result<()> {
    if z.cols != t_steps * k {
        return Err(SgclError::Dimension(format!(
            "embedding width {} != T*k = {}",
            z.cols,
            t_steps * k
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&[VERSION])?;
    write_u32(&mut w, z.rows as u32)?;
    write_u32(&mut w, t_steps as u32)?;
    write_u32(&mut w, k as u32)?;
    for r in 0..z.rows {
        w.write_all(&z.row_bytes(r))?;
    }
    Ok(())
}

/// Reads an embedding file; returns (Z, T, k).
pub fn load_embedding(path: &Path) -> Result<(BinaryMatrix, usize, usize)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(SgclError::Parse { line: 0, msg: "not an SGCB embedding file".into() });
    }
    let mut ver = [0u8; 1];
    r.read_exact(&mut ver)?;
    if ver[0] != VERSION {
        return Err(SgclError::Parse { line: 0, msg: format!("unsupported version {}", ver[0]) });
    }
    let n = read_u32(&mut r)? as usize;
    let t_steps = read_u32(&mut r)? as usize;
    let k = read_u32(&mut r)? as usize;
    let mut z = BinaryMatrix::zeros(n, t_steps * k);
    let nbytes = z.packed_row_bytes();
    let mut buf = vec![0u8; nbytes];
    for row in 0..n {
        r.read_exact(&mut buf)?;
        z.set_row_bytes(row, &buf);
    }
    Ok((z, t_steps, k))
}
