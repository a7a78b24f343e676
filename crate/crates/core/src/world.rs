//! Rectangular workspace: uniform square tiling, static-obstacle occupancy,
//! and the cell-level queries (point-to-cell, l x l neighborhoods, segment
//! feasibility) shared by the tree and the repair search.

use crate::geometry::{Disc, Point2, Segment2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("point ({0}, {1}) is outside the workspace")]
    OutOfWorkspace(f64, f64),
    #[error("neighborhood size {0} must be an odd positive integer")]
    BadNeighborhoodSize(usize),
}

#[derive(Debug, Error)]
pub enum MapParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}, column {col}: unexpected character '{ch}' (want '#' or '.')")]
    BadCell { line: usize, col: usize, ch: char },
}

/// Tile identifier: column and row in the grid, origin at the bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Uniform square-cell decomposition of a `width x height` rectangle.
///
/// Cells have mutually exclusive interiors and cover the workspace; the last
/// column/row may extend past the far boundary when the dimensions are not
/// multiples of `cell_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tiling {
    pub origin: Point2,
    pub width: f64,
    pub height: f64,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl Tiling {
    pub fn new(origin: Point2, width: f64, height: f64, cell_size: f64) -> Self {
        assert!(width > 0.0 && height > 0.0 && cell_size > 0.0);
        Self {
            origin,
            width,
            height,
            cell_size,
            cols: (width / cell_size).ceil() as usize,
            rows: (height / cell_size).ceil() as usize,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn linear(&self, c: CellIndex) -> usize {
        c.row * self.cols + c.col
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.origin.x
            && p.x <= self.origin.x + self.width
            && p.y >= self.origin.y
            && p.y <= self.origin.y + self.height
    }

    /// Cell containing `p`. Cells are half-open; points on the far boundary
    /// clamp to the last cell so the closed workspace is fully covered.
    pub fn cell_of(&self, p: Point2) -> Result<CellIndex, WorldError> {
        if !self.contains(p) {
            return Err(WorldError::OutOfWorkspace(p.x, p.y));
        }
        let col = (((p.x - self.origin.x) / self.cell_size).floor() as usize).min(self.cols - 1);
        let row = (((p.y - self.origin.y) / self.cell_size).floor() as usize).min(self.rows - 1);
        Ok(CellIndex::new(col, row))
    }

    /// Centroid of cell `c`.
    pub fn cell_center(&self, c: CellIndex) -> Point2 {
        Point2::new(
            self.origin.x + (c.col as f64 + 0.5) * self.cell_size,
            self.origin.y + (c.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// The in-bounds cells of the l x l block centered on `c`, row-major.
    /// `l` must be odd; cells falling outside the grid are omitted.
    pub fn neighborhood(&self, c: CellIndex, l: usize) -> Result<Vec<CellIndex>, WorldError> {
        if l == 0 || l % 2 == 0 {
            return Err(WorldError::BadNeighborhoodSize(l));
        }
        let half = (l as isize - 1) / 2;
        let mut cells = Vec::new();
        for dr in -half..=half {
            let row = c.row as isize + dr;
            if row < 0 || row >= self.rows as isize {
                continue;
            }
            for dc in -half..=half {
                let col = c.col as isize + dc;
                if col < 0 || col >= self.cols as isize {
                    continue;
                }
                cells.push(CellIndex::new(col as usize, row as usize));
            }
        }
        Ok(cells)
    }

    /// The 3x3 block around `c` (same and adjacent cells).
    pub fn adjacent(&self, c: CellIndex) -> Vec<CellIndex> {
        self.neighborhood(c, 3).expect("3 is odd")
    }

    /// Every cell whose closed square the closed segment touches, including
    /// corner grazes: a conservative supercover of the segment.
    ///
    /// Computed by clipping the segment (in grid coordinates) against each
    /// candidate cell of the segment's bounding box, so tangency and
    /// degenerate segments need no special cases.
    pub fn touched_cells(&self, s: Segment2) -> Vec<CellIndex> {
        let gx = |x: f64| (x - self.origin.x) / self.cell_size;
        let gy = |y: f64| (y - self.origin.y) / self.cell_size;
        let (ax, ay) = (gx(s.a.x), gy(s.a.y));
        let (bx, by) = (gx(s.b.x), gy(s.b.y));

        let clamp_col = |v: f64| (v.floor().max(0.0) as usize).min(self.cols.saturating_sub(1));
        let clamp_row = |v: f64| (v.floor().max(0.0) as usize).min(self.rows.saturating_sub(1));
        let c0 = clamp_col(ax.min(bx));
        let c1 = clamp_col(ax.max(bx));
        let r0 = clamp_row(ay.min(by));
        let r1 = clamp_row(ay.max(by));

        let mut cells = Vec::with_capacity((c1 - c0 + 1) * (r1 - r0 + 1));
        for row in r0..=r1 {
            for col in c0..=c1 {
                if segment_touches_unit_cell(ax, ay, bx, by, col as f64, row as f64) {
                    cells.push(CellIndex::new(col, row));
                }
            }
        }
        cells
    }
}

/// Liang-Barsky clip of segment (ax,ay)-(bx,by) against the closed unit cell
/// [cx, cx+1] x [cy, cy+1]; a nonempty (possibly degenerate) clip interval
/// means the segment touches the cell.
fn segment_touches_unit_cell(ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64) -> bool {
    let dx = bx - ax;
    let dy = by - ay;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    // (numerator, denominator) for each half-plane p + t*d >= bound / <= bound
    let checks = [
        (dx, cx - ax),       // x >= cx
        (-dx, ax - (cx + 1.0)), // x <= cx+1
        (dy, cy - ay),       // y >= cy
        (-dy, ay - (cy + 1.0)), // y <= cy+1
    ];
    for (den, num) in checks {
        if den == 0.0 {
            // parallel to this boundary: reject if strictly outside
            if num > 0.0 {
                return false;
            }
        } else {
            let t = num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    t0 <= t1
}

/// Occupancy grid over a tiling. Occupied cells stand for static obstacles,
/// already inflated by the robot radius, so the planner can treat the robot
/// as a point.
#[derive(Debug, Clone)]
pub struct StaticMap {
    tiling: Tiling,
    occupied: Vec<bool>,
}

impl StaticMap {
    /// All-free map.
    pub fn empty(tiling: Tiling) -> Self {
        Self {
            occupied: vec![false; tiling.cell_count()],
            tiling,
        }
    }

    pub fn tiling(&self) -> &Tiling {
        &self.tiling
    }

    pub fn set_occupied(&mut self, c: CellIndex, value: bool) {
        let idx = self.tiling.linear(c);
        self.occupied[idx] = value;
    }

    pub fn is_occupied(&self, c: CellIndex) -> bool {
        self.occupied[self.tiling.linear(c)]
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        !self.is_occupied(c)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let cols = self.tiling.cols;
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, occ)| !**occ)
            .map(move |(i, _)| CellIndex::new(i % cols, i / cols))
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let cols = self.tiling.cols;
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, occ)| **occ)
            .map(move |(i, _)| CellIndex::new(i % cols, i / cols))
    }

    /// True iff the segment passes through (touches) any occupied cell.
    pub fn segment_blocked(&self, s: Segment2) -> bool {
        self.tiling.touched_cells(s).iter().any(|c| self.is_occupied(*c))
    }

    /// Map with every cell within `radius` (square-to-square distance) of an
    /// occupied cell also marked occupied.
    pub fn inflated(&self, radius: f64) -> StaticMap {
        if radius <= 0.0 {
            return self.clone();
        }
        let t = self.tiling;
        let ring = (radius / t.cell_size).ceil() as isize + 1;
        let mut out = self.clone();
        for c in self.occupied_cells() {
            for dr in -ring..=ring {
                let row = c.row as isize + dr;
                if row < 0 || row >= t.rows as isize {
                    continue;
                }
                for dc in -ring..=ring {
                    let col = c.col as isize + dc;
                    if col < 0 || col >= t.cols as isize {
                        continue;
                    }
                    // distance between the two closed cell squares
                    let gap_x = (dc.abs() - 1).max(0) as f64 * t.cell_size;
                    let gap_y = (dr.abs() - 1).max(0) as f64 * t.cell_size;
                    if gap_x.hypot(gap_y) <= radius {
                        out.set_occupied(CellIndex::new(col as usize, row as usize), true);
                    }
                }
            }
        }
        out
    }

    /// Parse the plain-text map format.
    ///
    /// Line 1: `width height cell_size` (meters). Then one line per grid row,
    /// `#` occupied / `.` free, written top row first so the file reads like
    /// a picture of the workspace (the last data line is row 0 at y = 0).
    pub fn parse(text: &str) -> Result<StaticMap, MapParseError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MapParseError::Syntax {
            line: 1,
            msg: "empty map file".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(MapParseError::Syntax {
                line: 1,
                msg: format!("want `width height cell_size`, got {} fields", fields.len()),
            });
        }
        let mut dims = [0.0f64; 3];
        for (i, f) in fields.iter().enumerate() {
            dims[i] = f.parse().map_err(|_| MapParseError::Syntax {
                line: 1,
                msg: format!("bad number `{f}`"),
            })?;
            if dims[i] <= 0.0 || !dims[i].is_finite() {
                return Err(MapParseError::Syntax {
                    line: 1,
                    msg: format!("dimension `{f}` must be positive and finite"),
                });
            }
        }
        let tiling = Tiling::new(Point2::new(0.0, 0.0), dims[0], dims[1], dims[2]);
        let mut map = StaticMap::empty(tiling);
        let mut rows_read = 0;
        for (line_idx, line) in lines {
            if rows_read == tiling.rows {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(MapParseError::Syntax {
                    line: line_idx + 1,
                    msg: format!("expected {} data rows, found more", tiling.rows),
                });
            }
            if line.chars().count() != tiling.cols {
                return Err(MapParseError::Syntax {
                    line: line_idx + 1,
                    msg: format!(
                        "row has {} cells, want {}",
                        line.chars().count(),
                        tiling.cols
                    ),
                });
            }
            let row = tiling.rows - 1 - rows_read;
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '#' => map.set_occupied(CellIndex::new(col, row), true),
                    '.' => {}
                    _ => {
                        return Err(MapParseError::BadCell {
                            line: line_idx + 1,
                            col: col + 1,
                            ch,
                        })
                    }
                }
            }
            rows_read += 1;
        }
        if rows_read != tiling.rows {
            return Err(MapParseError::Syntax {
                line: rows_read + 1,
                msg: format!("expected {} data rows, found {rows_read}", tiling.rows),
            });
        }
        Ok(map)
    }
}

/// Straight edge feasibility: clear of static occupancy and of every disc.
pub fn edge_feasible(map: &StaticMap, discs: &[Disc], a: Point2, b: Point2) -> bool {
    let seg = Segment2::new(a, b);
    if map.segment_blocked(seg) {
        return false;
    }
    !discs
        .iter()
        .any(|d| crate::geometry::segment_intersects_disc(seg, *d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid32() -> Tiling {
        Tiling::new(Point2::new(0.0, 0.0), 32.0, 32.0, 1.0)
    }

    #[test]
    fn cell_of_floor_and_clamp() {
        let t = grid32();
        assert_eq!(t.cell_of(Point2::new(3.5, 4.2)).unwrap(), CellIndex::new(3, 4));
        assert_eq!(t.cell_of(Point2::new(32.0, 32.0)).unwrap(), CellIndex::new(31, 31));
        assert_eq!(t.cell_of(Point2::new(0.0, 0.0)).unwrap(), CellIndex::new(0, 0));
        assert!(t.cell_of(Point2::new(-0.1, 3.0)).is_err());
    }

    #[test]
    fn neighborhood_sizes() {
        let t = grid32();
        let interior = CellIndex::new(10, 10);
        assert_eq!(t.neighborhood(interior, 3).unwrap().len(), 9);
        assert_eq!(t.neighborhood(CellIndex::new(0, 0), 3).unwrap().len(), 4);
        assert_eq!(t.neighborhood(interior, 1).unwrap(), vec![interior]);
        assert!(t.neighborhood(interior, 2).is_err());
        assert!(t.neighborhood(interior, 0).is_err());
    }

    #[test]
    fn segment_blocked_cases() {
        let t = Tiling::new(Point2::new(0.0, 0.0), 5.0, 5.0, 1.0);
        let empty = StaticMap::empty(t);
        let seg = Segment2::new(Point2::new(0.0, 2.5), Point2::new(5.0, 2.5));
        assert!(!empty.segment_blocked(seg));

        let mut map = StaticMap::empty(t);
        map.set_occupied(CellIndex::new(2, 2), true);
        assert!(map.segment_blocked(seg));
        let low = Segment2::new(Point2::new(0.0, 0.5), Point2::new(5.0, 0.5));
        assert!(!map.segment_blocked(low));
    }

    #[test]
    fn touched_cells_includes_corner_graze() {
        let t = Tiling::new(Point2::new(0.0, 0.0), 4.0, 4.0, 1.0);
        // diagonal through the corner (2,2): all four cells meeting there
        let seg = Segment2::new(Point2::new(1.5, 2.5), Point2::new(2.5, 1.5));
        let cells = t.touched_cells(seg);
        for c in [
            CellIndex::new(1, 2),
            CellIndex::new(2, 1),
            CellIndex::new(1, 1),
            CellIndex::new(2, 2),
        ] {
            assert!(cells.contains(&c), "missing {c:?}");
        }
    }

    #[test]
    fn parse_round_trip_and_orientation() {
        let text = "3 2 1\n#..\n..#\n";
        let map = StaticMap::parse(text).unwrap();
        assert_eq!(map.tiling().cols, 3);
        assert_eq!(map.tiling().rows, 2);
        // last line is the bottom row
        assert!(map.is_occupied(CellIndex::new(2, 0)));
        assert!(map.is_occupied(CellIndex::new(0, 1)));
        assert!(map.is_free(CellIndex::new(0, 0)));
    }

    #[test]
    fn parse_errors_carry_position() {
        match StaticMap::parse("3 2 1\n#..\n.x#\n") {
            Err(MapParseError::BadCell { line, col, ch }) => {
                assert_eq!((line, col, ch), (3, 2, 'x'));
            }
            other => panic!("want BadCell, got {other:?}"),
        }
        assert!(StaticMap::parse("3 2\n").is_err());
        assert!(StaticMap::parse("3 2 1\n#..\n").is_err());
    }

    #[test]
    fn inflation_is_conservative() {
        let t = Tiling::new(Point2::new(0.0, 0.0), 5.0, 5.0, 1.0);
        let mut map = StaticMap::empty(t);
        map.set_occupied(CellIndex::new(2, 2), true);
        let inflated = map.inflated(0.5);
        // adjacent squares are at distance 0: whole ring occupied
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                let c = CellIndex::new((2 + dc) as usize, (2 + dr) as usize);
                assert!(inflated.is_occupied(c));
            }
        }
        assert!(inflated.is_free(CellIndex::new(0, 0)));
        assert!(inflated.is_free(CellIndex::new(2, 0)));
    }

    proptest! {
        #[test]
        fn point_lies_in_its_cell(x in 0.0..32.0f64, y in 0.0..32.0f64) {
            let t = grid32();
            let c = t.cell_of(Point2::new(x, y)).unwrap();
            let x0 = t.origin.x + c.col as f64 * t.cell_size;
            let y0 = t.origin.y + c.row as f64 * t.cell_size;
            prop_assert!(x >= x0 && x <= x0 + t.cell_size);
            prop_assert!(y >= y0 && y <= y0 + t.cell_size);
        }

        #[test]
        fn neighborhoods_nest(col in 0usize..32, row in 0usize..32, half in 0usize..4) {
            let t = grid32();
            let c = CellIndex::new(col, row);
            let l = 2 * half + 1;
            let small = t.neighborhood(c, l).unwrap();
            let big = t.neighborhood(c, l + 2).unwrap();
            for cell in &small {
                prop_assert!(big.contains(cell));
            }
        }

        /// Supercover answers true whenever dense point sampling answers true.
        #[test]
        fn supercover_dominates_sampling(
            ax in 0.0..8.0f64, ay in 0.0..8.0f64,
            bx in 0.0..8.0f64, by in 0.0..8.0f64,
            occupied_bits in prop::collection::vec(any::<bool>(), 64),
        ) {
            let t = Tiling::new(Point2::new(0.0, 0.0), 8.0, 8.0, 1.0);
            let mut map = StaticMap::empty(t);
            for (i, occ) in occupied_bits.iter().enumerate() {
                if *occ {
                    map.set_occupied(CellIndex::new(i % 8, i / 8), true);
                }
            }
            let a = Point2::new(ax, ay);
            let b = Point2::new(bx, by);
            let mut sampled_hit = false;
            for i in 0..=10_000 {
                let s = i as f64 / 10_000.0;
                let p = Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
                if map.is_occupied(t.cell_of(p).unwrap()) {
                    sampled_hit = true;
                    break;
                }
            }
            let seg = Segment2::new(a, b);
            if sampled_hit {
                prop_assert!(map.segment_blocked(seg));
            }
        }
    }
}
