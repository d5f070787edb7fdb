//! Binary field files.
//!
//! ```text
//! NLRG1 <dim>\n
//! <n> <h> <origin> <periodic|clamp>\n      (one line per axis)
//! \n
//! <row-major little-endian float64 payload>
//! ```

use std::fs;
use std::path::Path;

use super::{Axis, Boundary, Field, Grid};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &str = "NLRG1";

pub fn write_field<T: Real>(field: &Field<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(field);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_field<T: Real>(path: impl AsRef<Path>) -> Result<Field<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|(offset, msg)| Error::Format {
        path: path.to_path_buf(),
        offset,
        msg,
    })
}

pub(crate) fn encode<T: Real>(field: &Field<T>) -> Vec<u8> {
    let grid = field.grid();
    let mut out = format!("{MAGIC} {}\n", grid.dim()).into_bytes();
    for a in grid.axes() {
        // f64 Display is the shortest representation that round-trips.
        out.extend_from_slice(
            format!(
                "{} {} {} {}\n",
                a.n,
                a.h.to_f64_lossless(),
                a.origin.to_f64_lossless(),
                a.boundary
            )
            .as_bytes(),
        );
    }
    out.push(b'\n');
    out.reserve(8 * field.values().len());
    for v in field.values() {
        out.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
    }
    out
}

type DecodeError = (u64, String);

/// Splits off one `\n`-terminated line starting at `pos`.
fn next_line(bytes: &[u8], pos: usize) -> Result<(&str, usize), DecodeError> {
    let rest = &bytes[pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or((pos as u64, "unterminated header line".to_string()))?;
    let line = std::str::from_utf8(&rest[..end])
        .map_err(|_| (pos as u64, "header is not valid UTF-8".to_string()))?;
    Ok((line, pos + end + 1))
}

pub(crate) fn decode<T: Real>(bytes: &[u8]) -> Result<Field<T>, DecodeError> {
    let (line, mut pos) = next_line(bytes, 0)?;
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err((0, format!("missing `{MAGIC}` magic")));
    }
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or((MAGIC.len() as u64 + 1, "bad dimension".to_string()))?;
    if parts.next().is_some() || !(1..=2).contains(&dim) {
        return Err((
            MAGIC.len() as u64 + 1,
            format!("bad dimension line `{line}`"),
        ));
    }

    let mut axes = Vec::with_capacity(dim);
    for i in 0..dim {
        let start = pos;
        let (line, next) = next_line(bytes, pos)?;
        pos = next;
        let fields: Vec<&str> = line.split(' ').collect();
        let bad = |msg: String| (start as u64, format!("axis {i}: {msg}"));
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 entries, got `{line}`")));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad point count `{}`", fields[0])))?;
        let h: f64 = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad spacing `{}`", fields[1])))?;
        let origin: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad origin `{}`", fields[2])))?;
        let boundary: Boundary = fields[3].parse().map_err(|e: Error| bad(e.to_string()))?;
        let axis = Axis::new(n, T::from_f64_round(h), T::from_f64_round(origin), boundary);
        axes.push(axis);
    }
    let grid = Grid::new(axes).map_err(|e| (MAGIC.len() as u64 + 1, e.to_string()))?;

    if bytes.get(pos) != Some(&b'\n') {
        return Err((pos as u64, "expected blank line before payload".to_string()));
    }
    pos += 1;

    let need = grid.len() * 8;
    let have = bytes.len() - pos;
    if have < need {
        return Err((
            bytes.len() as u64,
            format!("truncated payload: {have} of {need} bytes"),
        ));
    }
    if have > need {
        return Err((
            (pos + need) as u64,
            "trailing bytes after payload".to_string(),
        ));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (k, chunk) in bytes[pos..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return Err(((pos + 8 * k) as u64, format!("non-finite value {v}")));
        }
        values.push(T::from_f64_round(v));
    }
    Ok(Field::from_parts(grid, values))
}
