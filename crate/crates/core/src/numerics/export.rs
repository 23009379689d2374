//! Grid dumps for external plotting.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `FBSGRID1` |
//! | 8 | u64 number of time nodes `nt` |
//! | 8 | u64 number of space nodes `nx` |
//! | 8·nt | f64 times |
//! | 8·nx | f64 space nodes |
//! | 8·nt·nx | f64 values, row-major by time |

use std::io::{self, Read, Write};

use super::GridFunction;

pub const MAGIC: &[u8; 8] = b"FBSGRID1";

/// One `t x u` triple per line, tab-separated, rows separated by blank lines.
pub fn write_text<W: Write>(u: &GridFunction, mut w: W) -> io::Result<()> {
    writeln!(w, "# t\tx\tu")?;
    for (m, row) in u.values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            writeln!(w, "{:e}\t{:e}\t{:e}", u.times[m], u.xs[i], v)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(u: &GridFunction, mut w: W) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(u.times.len() as u64).to_le_bytes())?;
    w.write_all(&(u.xs.len() as u64).to_le_bytes())?;
    for v in u.times.iter().chain(&u.xs).chain(u.values.iter().flatten()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> io::Result<GridFunction> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "not a grid dump (bad magic)",
        ));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> io::Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let nt = next_u64(&mut r)? as usize;
    let nx = next_u64(&mut r)? as usize;
    let mut floats = |n: usize| -> io::Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * n];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let times = floats(nt)?;
    let xs = floats(nx)?;
    let flat = floats(nt * nx)?;
    let values = if nx == 0 {
        vec![Vec::new(); nt]
    } else {
        flat.chunks(nx).map(<[f64]>::to_vec).collect()
    };
    Ok(GridFunction { times, xs, values })
}
