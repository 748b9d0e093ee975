// Copyright 2026 The wsdrive Authors
// SPDX-License-Identifier: Apache-2.0

//! Bit-stable file formats: CSV with 17 significant digits, raw density
//! frames with a one-line header, and 8-bit graymaps.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;

/// `v` in scientific notation with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a header row.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_real).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// A density map sampled on a regular grid, row-major with `x` contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub shape: (usize, usize),
    pub spacing: [f64; 2],
    /// Coordinates of the first cell.
    pub origin: [f64; 2],
    pub data: Vec<f64>,
}

impl Frame {
    pub fn header(&self) -> String {
        let mut h = String::from("wsdrive-density");
        let _ = write!(
            h,
            " nx={} ny={} dx={} dy={} x0={} y0={} time={}",
            self.shape.0,
            self.shape.1,
            fmt_real(self.spacing[0]),
            fmt_real(self.spacing[1]),
            fmt_real(self.origin[0]),
            fmt_real(self.origin[1]),
            fmt_real(self.time)
        );
        h
    }

    /// Header line followed by little-endian `f64` samples.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        out.push(b'\n');
        out.reserve(self.data.len() * 8);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses [`Frame::to_bytes`] output.
    pub fn from_bytes(bytes: &[u8]) -> Option<Frame> {
        let nl = bytes.iter().position(|&b| b == b'\n')?;
        let header = std::str::from_utf8(&bytes[..nl]).ok()?;
        let mut fields = header.split_whitespace();
        if fields.next()? != "wsdrive-density" {
            return None;
        }
        let mut get = |key: &str| -> Option<String> {
            let f = fields.next()?;
            f.strip_prefix(key)?.strip_prefix('=').map(str::to_string)
        };
        let nx: usize = get("nx")?.parse().ok()?;
        let ny: usize = get("ny")?.parse().ok()?;
        let dx: f64 = get("dx")?.parse().ok()?;
        let dy: f64 = get("dy")?.parse().ok()?;
        let x0: f64 = get("x0")?.parse().ok()?;
        let y0: f64 = get("y0")?.parse().ok()?;
        let time: f64 = get("time")?.parse().ok()?;
        let body = &bytes[nl + 1..];
        if body.len() != nx * ny * 8 {
            return None;
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Some(Frame {
            time,
            shape: (nx, ny),
            spacing: [dx, dy],
            origin: [x0, y0],
            data,
        })
    }

    /// Binary graymap scaled to the frame maximum, top row = largest `y`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (nx, ny) = self.shape;
        let peak = self.data.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        for iy in (0..ny).rev() {
            for ix in 0..nx {
                let v = if peak > 0.0 {
                    self.data[iy * nx + ix] / peak
                } else {
                    0.0
                };
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(-2.0), "-2.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, -7.25e-12, 6.02e23] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_layout() {
        let s = csv(&["a", "b"], vec![vec![1.0, 2.0]]);
        assert_eq!(s, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }

    #[test]
    fn frame_round_trip() {
        let f = Frame {
            time: 12.5,
            shape: (3, 2),
            spacing: [1.0, 1.0],
            origin: [-1.0, 0.0],
            data: vec![0.0, 0.25, 0.5, 1.0, 0.125, 1.0 / 3.0],
        };
        assert_eq!(Frame::from_bytes(&f.to_bytes()).unwrap(), f);
        let pgm = f.to_pgm();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[255, 32, 85, 0, 64, 128]);
    }
}
