//! Run-length storage for sparse Q8.8 activations.
//!
//! Each channel is a stream of `(gap, value)` pairs. A pair stands for `gap`
//! zeros followed by `value`, so it covers `gap + 1` elements. Gaps are 8
//! bits wide; a longer zero run is split with `(255, 0)` pairs, each of which
//! covers 256 zeros. A channel that ends in zeros ends with a pair whose
//! value is zero.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::q88::Q88;
use crate::error::{Error, Result};
use crate::tensor::{Shape3, Tensor3};

pub const MAGIC: &[u8; 4] = b"EVA2";
pub const VERSION: u8 = 1;
pub const GAP_BITS: u8 = 8;
/// Fixed header: magic, version, gap width, then three u16 dims.
pub const HEADER_BYTES: usize = 4 + 1 + 1 + 6;
/// Bytes per encoded pair: u8 gap plus i16 value.
pub const PAIR_BYTES: usize = 3;

const MAX_GAP: usize = u8::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunPair {
    pub gap: u8,
    pub value: Q88,
}

impl RunPair {
    pub const fn new(gap: u8, value: i16) -> Self {
        Self {
            gap,
            value: Q88(value),
        }
    }
}

/// A run-length encoded `channels × height × width` Q8.8 activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseActivation {
    shape: Shape3,
    streams: Vec<Vec<RunPair>>,
}

impl SparseActivation {
    /// Wraps pre-built streams after checking that every channel covers
    /// exactly `height × width` elements.
    pub fn from_streams(shape: Shape3, streams: Vec<Vec<RunPair>>) -> Result<Self> {
        if streams.len() != shape.channels {
            return Err(Error::MalformedStream(format!(
                "{} channel streams for {} channels",
                streams.len(),
                shape.channels
            )));
        }
        for (c, stream) in streams.iter().enumerate() {
            let covered: usize = stream.iter().map(|p| p.gap as usize + 1).sum();
            if covered != shape.plane() {
                return Err(Error::MalformedStream(format!(
                    "channel {c} covers {covered} elements, expected {}",
                    shape.plane()
                )));
            }
        }
        Ok(Self { shape, streams })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn stream(&self, channel: usize) -> &[RunPair] {
        &self.streams[channel]
    }

    pub fn pair_count(&self) -> usize {
        self.streams.iter().map(Vec::len).sum()
    }

    /// Size of the serialized form in bytes.
    pub fn encoded_bytes(&self) -> usize {
        HEADER_BYTES + self.shape.channels * 4 + self.pair_count() * PAIR_BYTES
    }

    /// Size of the same tensor stored densely at 16 bits per element.
    pub fn dense_bytes(&self) -> usize {
        self.shape.len() * 2
    }

    /// Decodes one channel to raw Q8.8 values.
    pub fn decode_channel(&self, channel: usize) -> Vec<Q88> {
        let mut out = Vec::with_capacity(self.shape.plane());
        for pair in &self.streams[channel] {
            out.extend(std::iter::repeat_n(Q88::ZERO, pair.gap as usize));
            out.push(pair.value);
        }
        out
    }

    pub fn decode_raw(&self) -> Vec<Q88> {
        (0..self.shape.channels)
            .flat_map(|c| self.decode_channel(c))
            .collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let dims = [self.shape.channels, self.shape.height, self.shape.width];
        let mut header = Vec::with_capacity(HEADER_BYTES);
        header.extend_from_slice(MAGIC);
        header.push(VERSION);
        header.push(GAP_BITS);
        for d in dims {
            let d = u16::try_from(d)
                .map_err(|_| Error::Format(format!("dimension {d} does not fit in u16")))?;
            header.extend_from_slice(&d.to_le_bytes());
        }
        w.write_all(&header)?;
        for stream in &self.streams {
            let n = u32::try_from(stream.len())
                .map_err(|_| Error::Format("too many pairs in a channel".into()))?;
            let mut buf = Vec::with_capacity(4 + stream.len() * PAIR_BYTES);
            buf.extend_from_slice(&n.to_le_bytes());
            for p in stream {
                buf.push(p.gap);
                buf.extend_from_slice(&p.value.0.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_bytes());
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_BYTES];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        if &header[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected EVA2".into()));
        }
        if header[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", header[4])));
        }
        if header[5] != GAP_BITS {
            return Err(Error::Format(format!(
                "unsupported gap width {}",
                header[5]
            )));
        }
        let dim = |i: usize| u16::from_le_bytes([header[6 + 2 * i], header[7 + 2 * i]]) as usize;
        let shape = Shape3::new(dim(0), dim(1), dim(2));
        if shape.is_empty() {
            return Err(Error::Format(format!("degenerate shape {shape}")));
        }
        let mut streams = Vec::with_capacity(shape.channels);
        for c in 0..shape.channels {
            let mut n = [0u8; 4];
            r.read_exact(&mut n)
                .map_err(|e| Error::Format(format!("channel {c}: truncated pair count: {e}")))?;
            let n = u32::from_le_bytes(n) as usize;
            if n > shape.plane() {
                return Err(Error::MalformedStream(format!(
                    "channel {c}: {n} pairs for {} elements",
                    shape.plane()
                )));
            }
            let mut buf = vec![0u8; n * PAIR_BYTES];
            r.read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("channel {c}: truncated pairs: {e}")))?;
            streams.push(
                buf.chunks_exact(PAIR_BYTES)
                    .map(|p| RunPair::new(p[0], i16::from_le_bytes([p[1], p[2]])))
                    .collect(),
            );
        }
        Self::from_streams(shape, streams)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let s = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", cursor.len())));
        }
        Ok(s)
    }
}

/// Canonical encoding of one channel of raw values.
fn encode_channel(values: impl Iterator<Item = Q88>, out: &mut Vec<RunPair>) {
    let mut zeros = 0usize;
    for v in values {
        if v.is_zero() {
            zeros += 1;
            continue;
        }
        while zeros > MAX_GAP {
            out.push(RunPair::new(u8::MAX, 0));
            zeros -= MAX_GAP + 1;
        }
        out.push(RunPair {
            gap: zeros as u8,
            value: v,
        });
        zeros = 0;
    }
    // trailing zeros: the last pair's value is itself one of the zeros
    while zeros > MAX_GAP + 1 {
        out.push(RunPair::new(u8::MAX, 0));
        zeros -= MAX_GAP + 1;
    }
    if zeros > 0 {
        out.push(RunPair::new((zeros - 1) as u8, 0));
    }
}

/// Encodes a tensor of raw Q8.8 values, channel-major.
pub fn rle_encode_raw(
    shape: Shape3,
    values: &[Q88],
    zero_epsilon: f64,
) -> Result<SparseActivation> {
    if values.len() != shape.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values for {shape}", shape.len()),
            actual: values.len().to_string(),
        });
    }
    let plane = shape.plane();
    let streams = values
        .chunks(plane)
        .map(|channel| {
            let mut stream = Vec::new();
            encode_channel(
                channel.iter().map(|&v| {
                    if v.to_f64().abs() <= zero_epsilon {
                        Q88::ZERO
                    } else {
                        v
                    }
                }),
                &mut stream,
            );
            stream
        })
        .collect();
    Ok(SparseActivation { shape, streams })
}

/// Encodes a Q8.8-valued tensor. Values with `|v| ≤ zero_epsilon` are
/// stored as zeros.
pub fn rle_encode(t: &Tensor3, zero_epsilon: f64) -> SparseActivation {
    let raw: Vec<Q88> = t.data().iter().map(|&v| Q88::from_f32(v)).collect();
    rle_encode_raw(t.shape(), &raw, zero_epsilon).expect("tensor length matches its shape")
}

pub fn rle_decode(s: &SparseActivation) -> Tensor3 {
    let data = s.decode_raw().into_iter().map(Q88::to_f32).collect();
    Tensor3::new(s.shape, data).expect("validated streams cover the shape")
}
