//! `HWV1` raw snapshots: a 44-byte little-endian header, then one
//! row-major `f64` array per field in layout order.

use std::io::{Read, Write};
use std::path::Path;

use super::{FieldLayout, FieldState, Grid2D};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HWV1";

pub fn write_snapshot<W: Write>(mut w: W, state: &FieldState) -> Result<()> {
    let g = &state.grid;
    w.write_all(MAGIC)?;
    w.write_all(&(g.n_per_axis as u64).to_le_bytes())?;
    w.write_all(&g.h.to_le_bytes())?;
    w.write_all(&g.half_width.to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&(state.layout.p as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(g.nodes() * g.nodes() * 8);
    for f in 0..state.layout.nf() {
        buf.clear();
        for v in state.data.iter().skip(f).step_by(state.layout.nf()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<FieldState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let h = f64::from_le_bytes(next(&mut r)?);
    let half_width = f64::from_le_bytes(next(&mut r)?);
    let t = f64::from_le_bytes(next(&mut r)?);
    let p = u64::from_le_bytes(next(&mut r)?) as usize;
    if p == 0 || p > crate::model::MAX_COMPONENTS {
        return Err(Error::Snapshot(format!("unsupported p = {p}")));
    }
    let grid = Grid2D::new(half_width, h, n).map_err(|e| Error::Snapshot(e.to_string()))?;
    let layout = FieldLayout::new(p);
    let mut state = FieldState::zeros(&grid, layout, t);
    let cells = grid.nodes() * grid.nodes();
    let mut bytes = vec![0u8; cells * 8];
    for f in 0..layout.nf() {
        r.read_exact(&mut bytes)?;
        for (c, chunk) in bytes.chunks_exact(8).enumerate() {
            state.data[c * layout.nf() + f] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok(state)
}

pub fn save(path: &Path, state: &FieldState) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(file), state)
}

pub fn load(path: &Path) -> Result<FieldState> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = Grid2D::new(2.0, 0.5, 8).unwrap();
        let mut s = FieldState::zeros(&g, FieldLayout::new(1), 3.25);
        for (k, v) in s.data.iter_mut().enumerate() {
            *v = k as f64 * 0.1 - 7.0;
        }
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &s).unwrap();
        assert_eq!(&bytes[..4], b"HWV1");
        assert_eq!(bytes.len(), 44 + 8 * 81 * 8);
        // Field 0 row-major comes first after the header.
        assert_eq!(f64::from_le_bytes(bytes[44..52].try_into().unwrap()), s.data[0]);
        assert_eq!(f64::from_le_bytes(bytes[52..60].try_into().unwrap()), s.data[8]);
        let back = read_snapshot(&bytes[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = b"HWV2aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
        assert!(matches!(read_snapshot(&bytes[..]), Err(Error::Snapshot(_))));
    }
}
