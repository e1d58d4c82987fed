use super::{check_frames, Frame, SearchParams, TileDiffTable};
use crate::error::Result;

/// Tile-level SAD search of `current` against `key`.
///
/// Only full `tile×tile` squares of `current` are considered; partial tiles
/// on the right and bottom borders are ignored. An offset is valid for a
/// tile when the displaced block lies fully inside `key`.
pub fn produce_tile_diffs(
    current: &Frame,
    key: &Frame,
    tile: usize,
    search: &SearchParams,
) -> Result<TileDiffTable> {
    check_frames(current, key, tile)?;
    search.validate()?;

    let (h, w) = current.dims();
    let tiles_y = h / tile;
    let tiles_x = w / tile;
    let tiles = tiles_y * tiles_x;
    let offsets = search.offsets();

    let mut sad = vec![0u64; offsets.len() * tiles];
    let mut valid = vec![false; offsets.len() * tiles];
    let mut ops = 0u64;

    let cur = current.luma();
    let keyl = key.luma();
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let y0 = (ty * tile) as i64;
            let x0 = (tx * tile) as i64;
            for (k, &(dy, dx)) in offsets.iter().enumerate() {
                let ky = y0 + dy as i64;
                let kx = x0 + dx as i64;
                if ky < 0 || kx < 0 || ky + tile as i64 > h as i64 || kx + tile as i64 > w as i64 {
                    continue;
                }
                let (ky, kx) = (ky as usize, kx as usize);
                let mut acc = 0u64;
                for i in 0..tile {
                    let crow = &cur[(y0 as usize + i) * w + x0 as usize..][..tile];
                    let krow = &keyl[(ky + i) * w + kx..][..tile];
                    acc += crow
                        .iter()
                        .zip(krow)
                        .map(|(&a, &b)| a.abs_diff(b) as u64)
                        .sum::<u64>();
                }
                ops += (tile * tile) as u64;
                let idx = k * tiles + ty * tiles_x + tx;
                sad[idx] = acc;
                valid[idx] = true;
            }
        }
    }

    Ok(TileDiffTable {
        tile,
        tiles_y,
        tiles_x,
        offsets,
        sad,
        valid,
        ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Frame {
        Frame::from_fn(h, w, |_, _| rng.gen())
    }

    #[test]
    fn identical_frames_zero_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_frame(&mut rng, 12, 10);
        let t = produce_tile_diffs(&f, &f, 3, &SearchParams::new(3, 3).unwrap()).unwrap();
        assert_eq!(t.offsets[0], (0, 0));
        for ty in 0..t.tiles_y {
            for tx in 0..t.tiles_x {
                assert_eq!(t.entry(0, ty, tx), (0, true));
            }
        }
    }

    #[test]
    fn constant_difference() {
        let cur = Frame::from_fn(8, 8, |y, x| (y * 8 + x) as u8);
        let key = Frame::from_fn(8, 8, |y, x| (y * 8 + x) as u8 + 1);
        let t = produce_tile_diffs(&cur, &key, 2, &SearchParams::new(2, 2).unwrap()).unwrap();
        for k in 0..t.offsets.len() {
            for ty in 0..t.tiles_y {
                for tx in 0..t.tiles_x {
                    let (sad, valid) = t.entry(k, ty, tx);
                    if valid {
                        assert!(sad >= 4);
                        if t.offsets[k] == (0, 0) {
                            assert_eq!(sad, 4);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn matches_direct_tile_sad() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cur = random_frame(&mut rng, 16, 16);
        let key = random_frame(&mut rng, 16, 16);
        let search = SearchParams::new(4, 2).unwrap();
        let t = produce_tile_diffs(&cur, &key, 4, &search).unwrap();
        assert_eq!((t.tiles_y, t.tiles_x), (4, 4));
        for (k, &(dy, dx)) in t.offsets.iter().enumerate() {
            for ty in 0..4 {
                for tx in 0..4 {
                    let y0 = ty as i32 * 4 + dy;
                    let x0 = tx as i32 * 4 + dx;
                    let inside = y0 >= 0 && x0 >= 0 && y0 + 4 <= 16 && x0 + 4 <= 16;
                    let (sad, valid) = t.entry(k, ty, tx);
                    assert_eq!(valid, inside);
                    if inside {
                        let mut expected = 0u64;
                        for i in 0..4 {
                            for j in 0..4 {
                                let a = cur.at(ty * 4 + i, tx * 4 + j) as i64;
                                let b = key.at((y0 + i as i32) as usize, (x0 + j as i32) as usize)
                                    as i64;
                                expected += (a - b).unsigned_abs();
                            }
                        }
                        assert_eq!(sad, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_tiles_are_ignored() {
        let f = Frame::from_fn(10, 7, |y, x| (y + x) as u8);
        let t = produce_tile_diffs(&f, &f, 3, &SearchParams::new(0, 1).unwrap()).unwrap();
        assert_eq!((t.tiles_y, t.tiles_x), (3, 2));
        assert_eq!(t.ops, 6 * 9);
    }

    #[test]
    fn rejects_mismatched_or_tiny_frames() {
        let a = Frame::from_fn(8, 8, |_, _| 0);
        let b = Frame::from_fn(8, 9, |_, _| 0);
        let s = SearchParams::new(0, 1).unwrap();
        assert!(produce_tile_diffs(&a, &b, 2, &s).is_err());
        assert!(produce_tile_diffs(&a, &a, 9, &s).is_err());
    }
}
