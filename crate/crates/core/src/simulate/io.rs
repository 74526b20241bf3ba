//! CSV and binary cache formats for samples.
//!
//! CSV columns are `x0,x1,x2` or `w1,w2`, values written with the shortest
//! decimal that round-trips to the same `f64`.
//!
//! Binary layout (little endian): 16-byte header `b"CEVNORM\0"`, version `u32`,
//! kind `u32` (1 = exceedance, 2 = normed); then `t: f64`, `seed: u64`,
//! `n: u64`, model id as `u16` length + UTF-8 bytes, a mode byte for normed
//! samples, and finally the columns one after another.

use std::io::{Read, Write};

use super::{ExceedanceSample, NormedSample, NormingMode};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: [u8; 8] = *b"CEVNORM\0";
pub const BINARY_VERSION: u32 = 1;

const KIND_EXCEEDANCE: u32 = 1;
const KIND_NORMED: u32 = 2;

pub fn write_exceedance_csv<W: Write>(sample: &ExceedanceSample, out: W) -> Result<()> {
    write_columns_csv(out, &["x0", "x1", "x2"], &[&sample.x0, &sample.x1, &sample.x2])
}

pub fn write_normed_csv<W: Write>(sample: &NormedSample, out: W) -> Result<()> {
    write_columns_csv(out, &["w1", "w2"], &[&sample.w1, &sample.w2])
}

pub(crate) fn write_columns_csv<W: Write>(out: W, header: &[&str], cols: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    let n = cols.first().map_or(0, |c| c.len());
    let mut record: Vec<String> = vec![String::new(); cols.len()];
    for row in 0..n {
        for (cell, col) in record.iter_mut().zip(cols) {
            cell.clear();
            use std::fmt::Write as _;
            let _ = write!(cell, "{}", col[row]);
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn read_columns_csv<R: Read>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Format(format!("expected header {:?}, found {:?}", header, found)));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (col, field) in cols.iter_mut().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {}: `{field}` is not a number", line + 1)))?;
            col.push(v);
        }
    }
    Ok(cols)
}

/// Columns `(x0, x1, x2)`; metadata is not part of the CSV form.
pub fn read_exceedance_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut cols = read_columns_csv(input, &["x0", "x1", "x2"])?;
    let x2 = cols.pop().unwrap();
    let x1 = cols.pop().unwrap();
    let x0 = cols.pop().unwrap();
    Ok((x0, x1, x2))
}

pub fn read_normed_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cols = read_columns_csv(input, &["w1", "w2"])?;
    let w2 = cols.pop().unwrap();
    let w1 = cols.pop().unwrap();
    Ok((w1, w2))
}

fn write_header<W: Write>(out: &mut W, kind: u32, t: f64, seed: u64, n: usize, model_id: &str) -> Result<()> {
    out.write_all(&BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&kind.to_le_bytes())?;
    out.write_all(&t.to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    out.write_all(&(n as u64).to_le_bytes())?;
    let id = model_id.as_bytes();
    let len = u16::try_from(id.len()).map_err(|_| Error::Format("model id too long".into()))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(id)?;
    Ok(())
}

fn write_column<W: Write>(out: &mut W, col: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(col.len() * 8);
    for v in col {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_exceedance_binary<W: Write>(sample: &ExceedanceSample, mut out: W) -> Result<()> {
    write_header(&mut out, KIND_EXCEEDANCE, sample.t, sample.seed, sample.len(), &sample.model_id)?;
    for col in [&sample.x0, &sample.x1, &sample.x2] {
        write_column(&mut out, col)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_normed_binary<W: Write>(sample: &NormedSample, mut out: W) -> Result<()> {
    write_header(&mut out, KIND_NORMED, sample.t, sample.seed, sample.len(), &sample.model_id)?;
    let mode = match sample.mode {
        NormingMode::Random => 0u8,
        NormingMode::Deterministic => 1u8,
    };
    out.write_all(&[mode])?;
    write_column(&mut out, &sample.w1)?;
    write_column(&mut out, &sample.w2)?;
    out.flush()?;
    Ok(())
}

struct Header {
    t: f64,
    seed: u64,
    n: usize,
    model_id: String,
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| truncated(e, "header"))?;
    Ok(buf)
}

fn truncated(e: std::io::Error, what: &str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format(format!("truncated binary sample ({what})"))
    } else {
        Error::Io(e)
    }
}

fn read_header<R: Read>(input: &mut R, kind: u32) -> Result<Header> {
    let magic: [u8; 8] = read_array(input)?;
    if magic != BINARY_MAGIC {
        return Err(Error::Format("bad magic, not a cevnorm sample".into()));
    }
    let version = u32::from_le_bytes(read_array(input)?);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported binary version {version}")));
    }
    let found = u32::from_le_bytes(read_array(input)?);
    if found != kind {
        return Err(Error::Format(format!("expected sample kind {kind}, found {found}")));
    }
    let t = f64::from_le_bytes(read_array(input)?);
    let seed = u64::from_le_bytes(read_array(input)?);
    let n = u64::from_le_bytes(read_array(input)?) as usize;
    let len = u16::from_le_bytes(read_array(input)?) as usize;
    let mut id = vec![0u8; len];
    input.read_exact(&mut id).map_err(|e| truncated(e, "model id"))?;
    let model_id = String::from_utf8(id).map_err(|_| Error::Format("model id is not UTF-8".into()))?;
    Ok(Header { t, seed, n, model_id })
}

fn read_column<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n.checked_mul(8).ok_or_else(|| Error::Format("row count overflow".into()))?];
    input.read_exact(&mut buf).map_err(|e| truncated(e, "column data"))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_exceedance_binary<R: Read>(mut input: R) -> Result<ExceedanceSample> {
    let h = read_header(&mut input, KIND_EXCEEDANCE)?;
    let x0 = read_column(&mut input, h.n)?;
    let x1 = read_column(&mut input, h.n)?;
    let x2 = read_column(&mut input, h.n)?;
    Ok(ExceedanceSample { x0, x1, x2, t: h.t, seed: h.seed, model_id: h.model_id })
}

pub fn read_normed_binary<R: Read>(mut input: R) -> Result<NormedSample> {
    let h = read_header(&mut input, KIND_NORMED)?;
    let [mode] = read_array::<1, _>(&mut input)?;
    let mode = match mode {
        0 => NormingMode::Random,
        1 => NormingMode::Deterministic,
        other => return Err(Error::Format(format!("unknown norming mode byte {other}"))),
    };
    let w1 = read_column(&mut input, h.n)?;
    let w2 = read_column(&mut input, h.n)?;
    Ok(NormedSample { w1, w2, mode, t: h.t, seed: h.seed, model_id: h.model_id })
}
