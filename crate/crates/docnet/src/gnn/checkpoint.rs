//! Versioned binary model checkpoints.
//!
//! Layout: magic `GNN1`, u32 version, u32 config-JSON length + bytes, u32
//! tensor count, then per tensor: u32 name length + bytes, u32 rows, u32
//! cols, row-major little-endian f64 values. Tensors cover the trainable
//! parameters plus batch-norm running statistics.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"GNN1";
const VERSION: u32 = 1;

/// A loaded checkpoint: the configuration echo and the named tensors.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: EncoderConfig,
    pub in_dim: usize,
    pub tensors: Vec<(String, DenseMatrix<f64>)>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ConfigEcho {
    config: EncoderConfig,
    in_dim: usize,
}

/// Write an encoder's configuration and state.
pub fn save_checkpoint<S: Scalar>(encoder: &Encoder<S>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let echo = serde_json::to_vec(&ConfigEcho {
        config: encoder.config.clone(),
        in_dim: encoder.in_dim,
    })?;
    out.write_all(&(echo.len() as u32).to_le_bytes())?;
    out.write_all(&echo)?;
    let tensors = encoder.named_state();
    out.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, tensor) in &tensors {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(tensor.rows() as u32).to_le_bytes())?;
        out.write_all(&(tensor.cols() as u32).to_le_bytes())?;
        for &v in tensor.data() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut file = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadFormat("not a model checkpoint".into()));
    }
    let version = read_u32(&mut file)?;
    if version != VERSION {
        return Err(Error::BadFormat(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let echo_len = read_u32(&mut file)? as usize;
    let mut echo = vec![0u8; echo_len];
    file.read_exact(&mut echo)?;
    let echo: ConfigEcho = serde_json::from_slice(&echo)?;
    let count = read_u32(&mut file)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut file)? as usize;
        let mut name = vec![0u8; name_len];
        file.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::BadFormat("tensor name is not utf-8".into()))?;
        let rows = read_u32(&mut file)? as usize;
        let cols = read_u32(&mut file)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut buf = [0u8; 8];
        for _ in 0..rows * cols {
            file.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push((name, DenseMatrix::from_vec(rows, cols, data)));
    }
    Ok(Checkpoint {
        config: echo.config,
        in_dim: echo.in_dim,
        tensors,
    })
}

/// Rebuild an encoder from a checkpoint.
pub fn restore_encoder(checkpoint: &Checkpoint) -> Result<Encoder<f64>> {
    let mut rng = crate::rng::substream(0, "checkpoint-restore");
    let mut encoder = Encoder::new(checkpoint.config.clone(), checkpoint.in_dim, &mut rng)?;
    encoder.load_state(&checkpoint.tensors)?;
    Ok(encoder)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
