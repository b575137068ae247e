//! Binary container and JSON sidecar for field samples.
//!
//! Layout (little-endian): magic "SLFS", u16 version, u64 n, n node
//! coordinates (re, im), n gaussian values, u64 + smooth values, u64 + scale
//! values, u64 insertion count and insertions, constant, weight, u64 seed.

use super::grid::{GridDescriptor, GridSpec};
use super::sample::{FieldSample, Insertion, Tails};
use crate::error::{Error, Result};
use crate::params::LqgParams;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const MAGIC: &[u8; 4] = b"SLFS";
const VERSION: u16 = 1;

/// Decoded container contents, independent of any grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    pub nodes: Vec<C64>,
    pub gaussian: Vec<f64>,
    pub smooth: Vec<f64>,
    pub scale: Vec<f64>,
    pub insertions: Vec<Insertion>,
    pub constant: f64,
    pub weight: f64,
    pub seed: u64,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Decode(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// A length prefix whose payload of `unit`-byte items must fit in the rest.
    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        let rest = (self.buf.len() - self.pos) as u64;
        if n.checked_mul(unit as u64).is_none_or(|b| b > rest) {
            return Err(Error::Decode(format!("length {n} exceeds remaining {rest} bytes")));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Decode(format!("invalid flag byte {b}"))),
        }
    }
}

impl FieldRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 24 * self.nodes.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let f = |out: &mut Vec<u8>, x: f64| out.extend_from_slice(&x.to_le_bytes());
        let u = |out: &mut Vec<u8>, x: u64| out.extend_from_slice(&x.to_le_bytes());
        u(&mut out, self.nodes.len() as u64);
        for z in &self.nodes {
            f(&mut out, z.re);
            f(&mut out, z.im);
        }
        for &x in &self.gaussian {
            f(&mut out, x);
        }
        for v in [&self.smooth, &self.scale] {
            u(&mut out, v.len() as u64);
            for &x in v.iter() {
                f(&mut out, x);
            }
        }
        u(&mut out, self.insertions.len() as u64);
        for ins in &self.insertions {
            f(&mut out, ins.alpha);
            f(&mut out, ins.location.re);
            f(&mut out, ins.location.im);
            out.push(ins.boundary as u8);
            match ins.tails {
                None => out.push(0),
                Some(t) => {
                    out.push(1);
                    f(&mut out, t.gamma);
                    f(&mut out, t.area);
                    match t.length {
                        None => out.push(0),
                        Some(l) => {
                            out.push(1);
                            f(&mut out, l);
                        }
                    }
                }
            }
        }
        f(&mut out, self.constant);
        f(&mut out, self.weight);
        u(&mut out, self.seed);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Decode("bad magic".into()));
        }
        let v = r.u16()?;
        if v != VERSION {
            return Err(Error::Decode(format!("unsupported version {v}")));
        }
        let n = r.len(24)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            nodes.push(C64::new(r.f64()?, r.f64()?));
        }
        let gaussian = r.f64s(n)?;
        let k = r.len(8)?;
        let smooth = r.f64s(k)?;
        let k = r.len(8)?;
        let scale = r.f64s(k)?;
        for (name, v) in [("smooth", &smooth), ("scale", &scale)] {
            if !v.is_empty() && v.len() != n {
                return Err(Error::Decode(format!("{name} has {} entries for {n} nodes", v.len())));
            }
        }
        let k = r.len(26)?;
        let mut insertions = Vec::with_capacity(k);
        for _ in 0..k {
            let alpha = r.f64()?;
            let location = C64::new(r.f64()?, r.f64()?);
            let boundary = r.flag()?;
            let tails = if r.flag()? {
                let gamma = r.f64()?;
                let area = r.f64()?;
                let length = if r.flag()? { Some(r.f64()?) } else { None };
                Some(Tails { gamma, area, length })
            } else {
                None
            };
            insertions.push(Insertion { alpha, location, boundary, tails });
        }
        let constant = r.f64()?;
        let weight = r.f64()?;
        let seed = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::Decode(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if !(weight >= 0.0) {
            return Err(Error::Decode(format!("invalid weight {weight}")));
        }
        Ok(FieldRecord { nodes, gaussian, smooth, scale, insertions, constant, weight, seed })
    }

    pub fn from_sample(f: &FieldSample) -> Self {
        FieldRecord {
            nodes: f.grid.nodes.clone(),
            gaussian: f.gaussian.clone(),
            smooth: f.smooth.clone(),
            scale: f.scale.clone(),
            insertions: f.insertions.clone(),
            constant: f.constant,
            weight: f.weight,
            seed: f.seed,
        }
    }

    /// Attach to `grid`; node coordinates must match bit for bit.
    pub fn into_sample(self, grid: Arc<GridSpec>) -> Result<FieldSample> {
        if self.nodes.len() != grid.len()
            || self.nodes.iter().zip(&grid.nodes).any(|(a, b)| a.re.to_bits() != b.re.to_bits() || a.im.to_bits() != b.im.to_bits())
        {
            return Err(Error::Decode("node coordinates do not match the grid".into()));
        }
        Ok(FieldSample {
            grid,
            gaussian: self.gaussian,
            smooth: self.smooth,
            scale: self.scale,
            insertions: self.insertions,
            constant: self.constant,
            weight: self.weight,
            seed: self.seed,
            origin: None,
        })
    }
}

pub fn encode_field(f: &FieldSample) -> Vec<u8> {
    FieldRecord::from_sample(f).encode()
}

pub fn decode_field(bytes: &[u8], grid: Arc<GridSpec>) -> Result<FieldSample> {
    FieldRecord::decode(bytes)?.into_sample(grid)
}

/// Grid metadata and provenance stored next to a binary field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSidecar {
    pub format: String,
    pub version: u16,
    pub grid: GridDescriptor,
    pub n_nodes: usize,
    pub seed: u64,
    pub params: Option<LqgParams>,
    pub constant: f64,
    pub weight: f64,
    pub insertions: Vec<Insertion>,
}

impl FieldSidecar {
    pub fn new(f: &FieldSample, params: Option<LqgParams>) -> Self {
        FieldSidecar {
            format: "slelab-field".into(),
            version: VERSION,
            grid: f.grid.descriptor(),
            n_nodes: f.grid.len(),
            seed: f.seed,
            params,
            constant: f.constant,
            weight: f.weight,
            insertions: f.insertions.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: FieldSidecar = serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))?;
        if c.format != "slelab-field" || c.version != VERSION {
            return Err(Error::Decode(format!("unsupported sidecar {} v{}", c.format, c.version)));
        }
        Ok(c)
    }

    /// Rebuild the grid described by the sidecar and check its size.
    pub fn grid(&self) -> Result<GridSpec> {
        let g = GridSpec::from_descriptor(&self.grid)?;
        if g.len() != self.n_nodes {
            return Err(Error::Decode(format!("sidecar declares {} nodes, grid has {}", self.n_nodes, g.len())));
        }
        Ok(g)
    }
}
