use super::{
    check_frames, covered_tiles, FieldGrid, Frame, MotionVectorField, SearchParams, NO_MATCH,
};
use crate::error::Result;
use crate::geometry::ReceptiveFieldGeometry;

/// Reference block matcher: for every field and offset, sums absolute pixel
/// differences over the field's covered tiles directly, without sharing
/// work between fields. Same coverage, validity and tie-break rules as
/// [`super::rfbme`].
pub fn exhaustive_bme(
    current: &Frame,
    key: &Frame,
    geometry: &ReceptiveFieldGeometry,
    search: &SearchParams,
) -> Result<MotionVectorField> {
    let grid = FieldGrid::from_geometry(geometry, current.dims());
    exhaustive_bme_on_grid(current, key, geometry, search, grid)
}

pub fn exhaustive_bme_on_grid(
    current: &Frame,
    key: &Frame,
    geometry: &ReceptiveFieldGeometry,
    search: &SearchParams,
    grid: FieldGrid,
) -> Result<MotionVectorField> {
    let tile = geometry.stride;
    check_frames(current, key, tile)?;
    search.validate()?;

    let (h, w) = current.dims();
    let tiles_y = h / tile;
    let tiles_x = w / tile;
    let offsets = search.offsets();

    let mut field = MotionVectorField::zero(grid);
    field.min_sad.fill(NO_MATCH);
    let mut ops = 0u64;

    for fy in 0..grid.fields_y {
        let rows = covered_tiles(geometry, fy, tiles_y);
        for fx in 0..grid.fields_x {
            let cols = covered_tiles(geometry, fx, tiles_x);
            if rows.is_empty() || cols.is_empty() {
                continue;
            }
            let (py0, py1) = (rows.start * tile, rows.end * tile);
            let (px0, px1) = (cols.start * tile, cols.end * tile);
            let f = fy * grid.fields_x + fx;
            for &(dy, dx) in &offsets {
                // every covered tile must land inside the key frame
                let ky0 = py0 as i64 + dy as i64;
                let kx0 = px0 as i64 + dx as i64;
                let ky1 = py1 as i64 + dy as i64;
                let kx1 = px1 as i64 + dx as i64;
                if ky0 < 0 || kx0 < 0 || ky1 > h as i64 || kx1 > w as i64 {
                    continue;
                }
                let mut sad = 0u64;
                for y in py0..py1 {
                    let ky = (y as i64 + dy as i64) as usize;
                    for x in px0..px1 {
                        let kx = (x as i64 + dx as i64) as usize;
                        sad += current.at(y, x).abs_diff(key.at(ky, kx)) as u64;
                    }
                }
                ops += ((py1 - py0) * (px1 - px0)) as u64;
                if field.min_sad[f] == NO_MATCH || sad < field.min_sad[f] {
                    field.min_sad[f] = sad;
                    field.vectors[f] = (dy, dx);
                }
            }
        }
    }

    let tile_area = (tile * tile) as u64;
    field.finish(|fy, fx| {
        (covered_tiles(geometry, fy, tiles_y).len() * covered_tiles(geometry, fx, tiles_x).len())
            as u64
            * tile_area
    });
    field.ops = ops;
    Ok(field)
}
