//! Binary field files and raw PGM/PPM rendering.
//!
//! A field file is the 4 bytes `FLD1`, a little-endian `u32` header length,
//! a JSON header, then the node values as little-endian `f64` in row-major
//! order (complex values interleaved as `re, im`).

use crate::domain::{AnyField, BoundaryCondition, DomainSpec, Field, Grid, ScalarKind};
use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const MAGIC: &[u8; 4] = b"FLD1";
/// Version stamped into every JSON report.
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub domain: DomainSpec,
    pub bc: Option<BoundaryCondition>,
    pub dims: [usize; 2],
    /// Node offset in grid steps (`0.5` cell-centred, `0` vertex-anchored).
    pub offset: f64,
    pub s: Option<f64>,
    pub q: Option<f64>,
    pub scalar_kind: ScalarKind,
    pub lambda: Option<f64>,
    pub residual: Option<f64>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub field: AnyField,
}

impl FieldFile {
    /// File with a header describing only the grid.
    pub fn new(field: AnyField) -> Self {
        let g = field.grid();
        let header = FieldHeader {
            domain: g.domain().clone(),
            bc: None,
            dims: g.dims(),
            offset: g.offset(),
            s: None,
            q: None,
            scalar_kind: field.kind(),
            lambda: None,
            residual: None,
            provenance: serde_json::Value::Null,
        };
        FieldFile { header, field }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        let len = u32::try_from(header.len()).map_err(|_| Error::Format("header too long".into()))?;
        let mut buf = Vec::with_capacity(8 + header.len() + 16 * self.field.grid().len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(&header);
        match &self.field {
            AnyField::Real(f) => {
                for v in f.values().iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            AnyField::Complex(f) => {
                for z in f.values().iter() {
                    buf.extend_from_slice(&z.re.to_le_bytes());
                    buf.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing FLD1 magic".into()));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(8..8 + len).ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: FieldHeader = serde_json::from_slice(body).map_err(|e| Error::Format(e.to_string()))?;
        let grid = Arc::new(Grid::new(&header.domain, header.dims)?.with_offset(header.offset)?);
        let payload = &bytes[8 + len..];
        let n = grid.len();
        let per = match header.scalar_kind {
            ScalarKind::Real => 1,
            ScalarKind::Complex => 2,
        };
        if payload.len() != n * 8 * per {
            return Err(Error::Format(format!("payload holds {} bytes, expected {}", payload.len(), n * 8 * per)));
        }
        let floats: Vec<f64> =
            payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let shape = (header.dims[0], header.dims[1]);
        let field = match header.scalar_kind {
            ScalarKind::Real => {
                AnyField::Real(Field::new(grid, Array2::from_shape_vec(shape, floats).expect("length checked"))?)
            }
            ScalarKind::Complex => {
                let zs = floats.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
                AnyField::Complex(Field::new(grid, Array2::from_shape_vec(shape, zs).expect("length checked"))?)
            }
        };
        Ok(FieldFile { header, field })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<AnyField> {
    Ok(FieldFile::load(path)?.field)
}

/// Marker drawn over a rendered image: node index and sign (or phase).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marker {
    pub index: [usize; 2],
    pub positive: bool,
}

/// Binary PGM: gray `127.5·(1 + u/max|u|)`, so zero is mid-gray and signs
/// separate. Rows run top to bottom in decreasing second index.
pub fn render_pgm(u: &Field<f64>, markers: &[Marker]) -> Vec<u8> {
    let [n1, n2] = u.grid().dims();
    let max = u.max_modulus();
    let mut pix = vec![0u8; n1 * n2];
    for ((i, j), &v) in u.values().indexed_iter() {
        let t = if max > 0.0 { v / max } else { 0.0 };
        pix[pixel(i, j, n1, n2)] = (127.5 * (1.0 + t)).round().clamp(0.0, 255.0) as u8;
    }
    for m in markers {
        for (i, j) in cross(m.index, n1, n2) {
            pix[pixel(i, j, n1, n2)] = if m.positive { 255 } else { 0 };
        }
    }
    let mut out = format!("P5\n{n1} {n2}\n255\n").into_bytes();
    out.extend_from_slice(&pix);
    out
}

/// Binary PPM: hue from the phase, value from `|u|/max|u|`. Markers are red
/// (positive real part) or blue.
pub fn render_ppm(u: &Field<Complex64>, markers: &[Marker]) -> Vec<u8> {
    let [n1, n2] = u.grid().dims();
    let max = u.max_modulus();
    let mut pix = vec![[0u8; 3]; n1 * n2];
    for ((i, j), z) in u.values().indexed_iter() {
        let v = if max > 0.0 { z.norm() / max } else { 0.0 };
        let hue = (z.arg() + PI) / (2.0 * PI);
        pix[pixel(i, j, n1, n2)] = hsv(hue, v);
    }
    for m in markers {
        for (i, j) in cross(m.index, n1, n2) {
            pix[pixel(i, j, n1, n2)] = if m.positive { [255, 0, 0] } else { [0, 0, 255] };
        }
    }
    let mut out = format!("P6\n{n1} {n2}\n255\n").into_bytes();
    out.extend(pix.iter().flatten());
    out
}

fn pixel(i: usize, j: usize, n1: usize, n2: usize) -> usize {
    (n2 - 1 - j) * n1 + i
}

fn cross(c: [usize; 2], n1: usize, n2: usize) -> Vec<(usize, usize)> {
    let mut v = vec![(c[0], c[1])];
    if c[0] > 0 {
        v.push((c[0] - 1, c[1]));
    }
    if c[0] + 1 < n1 {
        v.push((c[0] + 1, c[1]));
    }
    if c[1] > 0 {
        v.push((c[0], c[1] - 1));
    }
    if c[1] + 1 < n2 {
        v.push((c[0], c[1] + 1));
    }
    v
}

fn hsv(h: f64, v: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let k = h6.floor();
    let f = h6 - k;
    let (p, q, t) = (0.0, v * (1.0 - f), v * f);
    let (r, g, b) = match k as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let c = |x: f64| (255.0 * x).round().clamp(0.0, 255.0) as u8;
    [c(r), c(g), c(b)]
}
