//! Model parameter and training-trace serialization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::federated::TrainingTrace;
use super::model::{Activation, Layer, ModelParams};
use crate::error::{Error, Result};

const PARAMS_MAGIC: &[u8; 4] = b"FSMP";
const PARAMS_VERSION: u32 = 1;

pub fn write_params(m: &ModelParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    let act: u32 = match m.activation {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    };
    w.write_all(&act.to_le_bytes())?;
    w.write_all(&(m.layers.len() as u32).to_le_bytes())?;
    for layer in &m.layers {
        w.write_all(&(layer.weight.nrows() as u64).to_le_bytes())?;
        w.write_all(&(layer.weight.ncols() as u64).to_le_bytes())?;
        for v in layer.weight.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in layer.bias.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(Error::BadFormat(format!(
            "{}: not a model parameter file (bad magic)",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != PARAMS_VERSION {
        return Err(Error::BadFormat(format!(
            "{}: unsupported params version {version}",
            path.display()
        )));
    }
    let activation = match read_u32(&mut r)? {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        other => {
            return Err(Error::BadFormat(format!(
                "{}: unknown activation code {other}",
                path.display()
            )))
        }
    };
    let n_layers = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut wvals = vec![0.0f64; rows * cols];
        let mut buf = [0u8; 8];
        for v in &mut wvals {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let mut bvals = vec![0.0f64; rows];
        for v in &mut bvals {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let weight = Array2::from_shape_vec((rows, cols), wvals)
            .map_err(|e| Error::BadFormat(format!("{}: {e}", path.display())))?;
        layers.push(Layer { weight, bias: Array1::from_vec(bvals) });
    }
    if layers.is_empty() {
        return Err(Error::BadFormat(format!("{}: empty model", path.display())));
    }
    Ok(ModelParams { layers, activation })
}

/// Columns: round, client, divergence, accuracy, loss.
pub fn write_trace_csv(trace: &TrainingTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["round", "client", "divergence", "accuracy", "loss"])?;
    for record in &trace.rounds {
        for (client, (&div, metrics)) in
            record.divergence.iter().zip(&record.metrics).enumerate()
        {
            w.write_record([
                record.round.to_string(),
                client.to_string(),
                format!("{div}"),
                format!("{}", metrics.accuracy),
                format!("{}", metrics.loss),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
