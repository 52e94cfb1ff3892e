//! Export of generated samples.
//!
//! CSV: header `y,x_1,...,x_p`, one row per observation.
//!
//! Binary, all integers and floats little-endian:
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 8 | magic `b"SPCSMPL1"` |
//! | 8 | 4 | format version `u32` = 1 |
//! | 12 | 8 | `n` as `u64` |
//! | 20 | 8 | `p` as `u64` |
//! | 28 | 8 | seed `u64` |
//! | 36 | 8p | `theta` as `f64` |
//! | 36 + 8p | 8n | `Y` as `f64` |
//! | 36 + 8p + 8n | 8np | `X` column-major as `f64` |

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::synth::LinearSample;

pub const MAGIC: &[u8; 8] = b"SPCSMPL1";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_sample_csv<W: Write>(sample: &LinearSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend((1..=sample.p()).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(sample.p() + 1);
    for i in 0..sample.n() {
        row.clear();
        row.push(sample.y[i].to_string());
        row.extend(sample.x.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(X, Y)` back from the CSV layout.
pub fn read_sample_csv<R: Read>(input: R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let p = r
        .headers()?
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::Format("empty header".into()))?;
    let mut y = Vec::new();
    let mut x = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != p + 1 {
            return Err(Error::Format(format!("row with {} fields, expected {}", rec.len(), p + 1)));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("not a number: {field:?}")))?;
            if j == 0 {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    let n = y.len();
    Ok((DMatrix::from_row_slice(n, p, &x), DVector::from_vec(y)))
}

pub fn write_sample_binary<W: Write>(sample: &LinearSample, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(sample.n() as u64).to_le_bytes())?;
    out.write_all(&(sample.p() as u64).to_le_bytes())?;
    out.write_all(&sample.seed.to_le_bytes())?;
    for v in sample
        .theta_true
        .iter()
        .chain(sample.y.iter())
        .chain(sample.x.as_slice())
    {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(input: &mut R, len: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; len * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_sample_binary<R: Read>(mut input: R) -> Result<LinearSample> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut ver = [0u8; 4];
    input.read_exact(&mut ver)?;
    let ver = u32::from_le_bytes(ver);
    if ver != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {ver}")));
    }
    let n = read_u64(&mut input)? as usize;
    let p = read_u64(&mut input)? as usize;
    let seed = read_u64(&mut input)?;
    let theta = DVector::from_vec(read_f64s(&mut input, p)?);
    let y = DVector::from_vec(read_f64s(&mut input, n)?);
    let x = DMatrix::from_vec(n, p, read_f64s(&mut input, n * p)?);
    let mut sample = LinearSample::from_parts(x, theta, y)?;
    sample.seed = seed;
    Ok(sample)
}
