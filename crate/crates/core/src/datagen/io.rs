//! Dataset serialization: CSV with a `f0..f{p-1},label` header and a
//! versioned binary cache.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 4] = b"FSDS";
const CACHE_VERSION: u32 = 1;

pub fn write_csv(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..d.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (i, &label) in d.labels().iter().enumerate() {
        let mut record: Vec<String> = d
            .features()
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        record.push(label.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset from CSV. `n_classes` defaults to `max(label) + 1`.
pub fn read_csv(path: &Path, n_classes: Option<usize>) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.is_empty() || &header[header.len() - 1] != "label" {
        return Err(Error::BadFormat(format!(
            "{}: expected trailing `label` column",
            path.display()
        )));
    }
    let p = header.len() - 1;
    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != p + 1 {
            return Err(Error::BadFormat(format!(
                "{}: row with {} fields, expected {}",
                path.display(),
                record.len(),
                p + 1
            )));
        }
        for j in 0..p {
            rows.push(record[j].parse::<f64>().map_err(|e| {
                Error::BadFormat(format!("{}: bad float {:?}: {e}", path.display(), &record[j]))
            })?);
        }
        labels.push(record[p].parse::<usize>().map_err(|e| {
            Error::BadFormat(format!("{}: bad label {:?}: {e}", path.display(), &record[p]))
        })?);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, p), rows)
        .map_err(|e| Error::BadFormat(format!("{}: {e}", path.display())))?;
    let k = n_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Dataset::new(features, labels, k)
}

pub fn write_cache(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(d.n() as u64).to_le_bytes())?;
    w.write_all(&(d.dim() as u64).to_le_bytes())?;
    w.write_all(&(d.n_classes() as u64).to_le_bytes())?;
    for v in d.features().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &l in d.labels() {
        w.write_all(&(l as u32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::BadFormat(format!(
            "{}: not a dataset cache (bad magic)",
            path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != CACHE_VERSION {
        return Err(Error::BadFormat(format!(
            "{}: unsupported cache version {version}",
            path.display()
        )));
    }
    let n = read_u64(&mut r)? as usize;
    let p = read_u64(&mut r)? as usize;
    let k = read_u64(&mut r)? as usize;
    let mut values = vec![0.0f64; n * p];
    let mut buf = [0u8; 8];
    for v in &mut values {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    let mut labels = vec![0usize; n];
    let mut lbuf = [0u8; 4];
    for l in &mut labels {
        r.read_exact(&mut lbuf)?;
        *l = u32::from_le_bytes(lbuf) as usize;
    }
    let features = Array2::from_shape_vec((n, p), values)
        .map_err(|e| Error::BadFormat(format!("{}: {e}", path.display())))?;
    Dataset::new(features, labels, k)
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
