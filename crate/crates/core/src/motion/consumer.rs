use std::ops::Range;

use super::{covered_tiles, FieldGrid, MotionVectorField, TileDiffTable, NO_MATCH};
use crate::error::{Error, Result};
use crate::geometry::ReceptiveFieldGeometry;

/// Aggregates tile SADs into per-receptive-field SADs and keeps the best
/// offset for every field.
///
/// `frame_dims` is `(height, width)` of the frames the table was built from.
pub fn consume_tile_diffs(
    table: &TileDiffTable,
    geometry: &ReceptiveFieldGeometry,
    frame_dims: (usize, usize),
) -> Result<MotionVectorField> {
    if table.tiles_y != frame_dims.0 / table.tile || table.tiles_x != frame_dims.1 / table.tile {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "{}x{} tiles for a {}x{} frame",
                frame_dims.0 / table.tile,
                frame_dims.1 / table.tile,
                frame_dims.0,
                frame_dims.1
            ),
            actual: format!("{}x{} tiles", table.tiles_y, table.tiles_x),
        });
    }
    consume_on_grid(
        table,
        geometry,
        FieldGrid::from_geometry(geometry, frame_dims),
    )
}

/// Running sum over a sliding window of slots. Moving the window adds the
/// slots entering at the leading edge and subtracts those leaving at the
/// trailing edge instead of re-summing.
struct RollingWindow {
    window: Option<Range<usize>>,
    sum: u64,
    invalid: u32,
}

impl RollingWindow {
    fn new() -> Self {
        Self {
            window: None,
            sum: 0,
            invalid: 0,
        }
    }

    fn advance(&mut self, next: Range<usize>, slot: impl Fn(usize) -> (u64, u32), ops: &mut u64) {
        match self.window.take() {
            Some(prev)
                if prev.start <= next.start && prev.end <= next.end && next.start <= prev.end =>
            {
                for i in prev.start..next.start {
                    let (s, bad) = slot(i);
                    self.sum -= s;
                    self.invalid -= bad;
                    *ops += 1;
                }
                for i in prev.end..next.end {
                    let (s, bad) = slot(i);
                    self.sum += s;
                    self.invalid += bad;
                    *ops += 1;
                }
            }
            _ => {
                self.sum = 0;
                self.invalid = 0;
                for i in next.clone() {
                    let (s, bad) = slot(i);
                    self.sum += s;
                    self.invalid += bad;
                    *ops += 1;
                }
            }
        }
        self.window = Some(next);
    }
}

pub(crate) fn consume_on_grid(
    table: &TileDiffTable,
    geometry: &ReceptiveFieldGeometry,
    grid: FieldGrid,
) -> Result<MotionVectorField> {
    if table.tile != geometry.stride {
        return Err(Error::InvalidSearch(format!(
            "tile side {} differs from receptive-field stride {}",
            table.tile, geometry.stride
        )));
    }
    let row_ranges: Vec<_> = (0..grid.fields_y)
        .map(|i| covered_tiles(geometry, i, table.tiles_y))
        .collect();
    let col_ranges: Vec<_> = (0..grid.fields_x)
        .map(|j| covered_tiles(geometry, j, table.tiles_x))
        .collect();

    let mut field = MotionVectorField::zero(grid);
    field.min_sad.fill(NO_MATCH);
    let mut ops = 0u64;

    let tiles_x = table.tiles_x;
    // per tile column: rolling sum over the current field row's tile rows
    let mut columns: Vec<RollingWindow> = (0..tiles_x).map(|_| RollingWindow::new()).collect();

    for k in 0..table.offsets.len() {
        columns.iter_mut().for_each(|c| c.window = None);
        for (fy, rows) in row_ranges.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            for (tx, column) in columns.iter_mut().enumerate() {
                column.advance(
                    rows.clone(),
                    |ty| {
                        let (s, v) = table.entry(k, ty, tx);
                        (s, u32::from(!v))
                    },
                    &mut ops,
                );
            }
            // leading/trailing column updates along the field row
            let mut row = RollingWindow::new();
            for (fx, cols) in col_ranges.iter().enumerate() {
                if cols.is_empty() {
                    continue;
                }
                row.advance(
                    cols.clone(),
                    |tx| (columns[tx].sum, columns[tx].invalid),
                    &mut ops,
                );
                let f = fy * grid.fields_x + fx;
                // offsets arrive in tie-break order, so a strict compare keeps the first minimum
                if row.invalid == 0 && (field.min_sad[f] == NO_MATCH || row.sum < field.min_sad[f])
                {
                    field.min_sad[f] = row.sum;
                    field.vectors[f] = table.offsets[k];
                }
            }
        }
    }

    let tile_area = (table.tile * table.tile) as u64;
    field.finish(|fy, fx| (row_ranges[fy].len() * col_ranges[fx].len()) as u64 * tile_area);
    field.ops = ops;
    Ok(field)
}
