//! Binary container: b"MPS1", n (u32), n−1 bond dims (u32), then every core
//! row-major as little-endian (re, im) f64 pairs.

use super::{Core, Mps};
use crate::error::{bail, Result};
use crate::linalg::C64;

const MAGIC: &[u8; 4] = b"MPS1";

pub fn write_binary(mps: &Mps) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(mps.n() as u32).to_le_bytes());
    for d in mps.bond_dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for core in mps.cores() {
        for x in core.data() {
            out.extend_from_slice(&x.re.to_le_bytes());
            out.extend_from_slice(&x.im.to_le_bytes());
        }
    }
    out
}

pub fn read_binary(bytes: &[u8]) -> Result<Mps> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        bail!(Format, "missing MPS1 magic");
    }
    let n = cur.u32()? as usize;
    if n == 0 {
        bail!(Format, "MPS with zero sites");
    }
    let mut dims = vec![1usize];
    for _ in 0..n - 1 {
        let d = cur.u32()? as usize;
        if d == 0 {
            bail!(Format, "zero bond dimension");
        }
        dims.push(d);
    }
    dims.push(1);
    let mut cores = Vec::with_capacity(n);
    for k in 0..n {
        let len = dims[k] * 2 * dims[k + 1];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let re = cur.f64()?;
            let im = cur.f64()?;
            data.push(C64::new(re, im));
        }
        cores.push(Core::new(dims[k], dims[k + 1], data)?);
    }
    if cur.pos != bytes.len() {
        bail!(Format, "{} trailing bytes", bytes.len() - cur.pos);
    }
    Mps::from_cores(cores)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            bail!(Format, "truncated MPS container");
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
