//! Raw dense Q8.8 tensor file: `EVAD`, u16 channels/height/width, then i16
//! values, all little-endian, channel-major.

use std::io::{Read, Write};

use crate::activation::Q88;
use crate::error::{Error, Result};
use crate::tensor::Shape3;

pub const DENSE_MAGIC: &[u8; 4] = b"EVAD";
pub const DENSE_HEADER_BYTES: usize = 4 + 6;

pub fn write_dense(mut w: impl Write, shape: Shape3, values: &[Q88]) -> Result<()> {
    if values.len() != shape.len() {
        return Err(Error::Format(format!(
            "{shape} tensor needs {} values, got {}",
            shape.len(),
            values.len()
        )));
    }
    let dims = [shape.channels, shape.height, shape.width];
    if dims.iter().any(|&d| d > u16::MAX as usize) {
        return Err(Error::Format(format!("{shape} does not fit u16 dims")));
    }
    let mut buf = Vec::with_capacity(DENSE_HEADER_BYTES + values.len() * 2);
    buf.extend_from_slice(DENSE_MAGIC);
    for d in dims {
        buf.extend_from_slice(&(d as u16).to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.0.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a dense file; trailing bytes are an error.
pub fn read_dense(mut r: impl Read) -> Result<(Shape3, Vec<Q88>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < DENSE_HEADER_BYTES || &bytes[..4] != DENSE_MAGIC {
        return Err(Error::Format("not a dense tensor file".into()));
    }
    let dim = |i: usize| u16::from_le_bytes([bytes[4 + 2 * i], bytes[5 + 2 * i]]) as usize;
    let shape = Shape3::new(dim(0), dim(1), dim(2));
    if shape.is_empty() {
        return Err(Error::Format(format!(
            "dense tensor has zero extent ({shape})"
        )));
    }
    let body = &bytes[DENSE_HEADER_BYTES..];
    if body.len() != shape.len() * 2 {
        return Err(Error::Format(format!(
            "{shape} tensor needs {} data bytes, file has {}",
            shape.len() * 2,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(2)
        .map(|b| Q88(i16::from_le_bytes([b[0], b[1]])))
        .collect();
    Ok((shape, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let shape = Shape3::new(1, 1, 2);
        let values = [Q88(256), Q88(-1)];
        let mut buf = Vec::new();
        write_dense(&mut buf, shape, &values).unwrap();
        assert_eq!(buf, b"EVAD\x01\x00\x01\x00\x02\x00\x00\x01\xff\xff");
        let (s, v) = read_dense(&buf[..]).unwrap();
        assert_eq!(s, shape);
        assert_eq!(v, values);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_dense(&b"EVAX\x01\x00\x01\x00\x01\x00\x00\x00"[..]).is_err());
        assert!(read_dense(&b"EVAD\x01\x00\x01\x00\x01\x00\x00"[..]).is_err());
        assert!(read_dense(&b"EVAD\x00\x00\x01\x00\x01\x00"[..]).is_err());
        assert!(write_dense(Vec::new(), Shape3::new(1, 1, 2), &[Q88(0)]).is_err());
    }
}
