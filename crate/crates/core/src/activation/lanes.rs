//! Four-lane sparse gather.
//!
//! Each lane walks the channel's run-length stream towards its own target
//! element. At every step the smallest outstanding zero gap among the active
//! lanes is subtracted from all of them, so zero runs shared by the four
//! neighbors are skipped together. A lane whose target falls inside a
//! skipped run yields zero; a lane whose gap reaches zero exactly at its
//! target yields the stored value.

use super::q88::Q88;
use super::rle::SparseActivation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Lane {
    target: usize,
    /// Index of the pair currently being consumed.
    pair: usize,
    /// Flat position of the next undecoded element.
    pos: usize,
    /// Zeros of the current pair not yet skipped.
    gap: usize,
    out: Option<Q88>,
}

/// Loads the values at four `(y, x)` coordinates of `channel`.
pub fn lane_decode4(
    s: &SparseActivation,
    channel: usize,
    coords: [(usize, usize); 4],
) -> Result<[Q88; 4]> {
    let shape = s.shape();
    if channel >= shape.channels {
        return Err(Error::OutOfBounds {
            y: 0,
            x: 0,
            height: shape.height,
            width: shape.width,
        });
    }
    for &(y, x) in &coords {
        if y >= shape.height || x >= shape.width {
            return Err(Error::OutOfBounds {
                y,
                x,
                height: shape.height,
                width: shape.width,
            });
        }
    }
    let stream = s.stream(channel);
    let first_gap = stream
        .first()
        .map(|p| p.gap as usize)
        .ok_or_else(|| Error::MalformedStream(format!("channel {channel} is empty")))?;

    let mut lanes = coords.map(|(y, x)| Lane {
        target: y * shape.width + x,
        pair: 0,
        pos: 0,
        gap: first_gap,
        out: None,
    });

    while lanes.iter().any(|l| l.out.is_none()) {
        let step = lanes
            .iter()
            .filter(|l| l.out.is_none())
            .map(|l| l.gap)
            .min()
            .unwrap_or(0);
        for lane in lanes.iter_mut().filter(|l| l.out.is_none()) {
            if lane.target < lane.pos + step {
                lane.out = Some(Q88::ZERO);
            } else {
                lane.pos += step;
                lane.gap -= step;
            }
        }
        for lane in lanes.iter_mut().filter(|l| l.out.is_none() && l.gap == 0) {
            let pair = stream[lane.pair];
            if lane.target == lane.pos {
                lane.out = Some(pair.value);
                continue;
            }
            lane.pos += 1;
            lane.pair += 1;
            lane.gap = stream
                .get(lane.pair)
                .ok_or_else(|| {
                    Error::MalformedStream(format!(
                        "channel {channel} ended before element {}",
                        lane.target
                    ))
                })?
                .gap as usize;
        }
    }
    Ok(lanes.map(|l| l.out.expect("all lanes resolved")))
}
