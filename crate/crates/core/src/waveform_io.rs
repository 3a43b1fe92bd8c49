//! Waveform export: CSV (`index,re,im`) and raw interleaved little-endian
//! f32 I/Q.

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::ComplexSequence;

pub fn write_csv<T: Scalar, W: Write>(seq: &ComplexSequence<T>, mut out: W) -> Result<()> {
    writeln!(out, "index,re,im")?;
    for (i, s) in seq.samples.iter().enumerate() {
        writeln!(out, "{i},{:e},{:e}", s.re.as_f64(), s.im.as_f64())?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(mut input: R, sample_rate_hz: f64) -> Result<ComplexSequence<f64>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || lineno == 0 && line.starts_with("index") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse { line: lineno + 1, message: format!("bad number {s:?}") })
        };
        if fields.len() != 3 {
            return Err(Error::Parse { line: lineno + 1, message: "expected index,re,im".into() });
        }
        samples.push(Complex::new(parse(fields[1])?, parse(fields[2])?));
    }
    Ok(ComplexSequence::new(samples, sample_rate_hz))
}

/// Raw I/Q: for each sample, `re` then `im` as little-endian `f32`.
pub fn write_raw_iq<T: Scalar, W: Write>(seq: &ComplexSequence<T>, mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(seq.len() * 8);
    for s in &seq.samples {
        buf.extend_from_slice(&(s.re.as_f64() as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im.as_f64() as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_raw_iq<R: Read>(mut input: R, sample_rate_hz: f64) -> Result<ComplexSequence<f32>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidArgument(format!("raw I/Q length {} is not a multiple of 8", bytes.len())));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex::new(re, im)
        })
        .collect();
    Ok(ComplexSequence::new(samples, sample_rate_hz))
}
