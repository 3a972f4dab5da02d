//! Occupancy grids, binary masks and the raster geometry shared by the
//! planner, the region sources and the sample generator.
//!
//! Coordinates are `(col, row)` with row 0 at the top of the map. Headings
//! live in a right-handed frame where `+x = +col` and `+y = -row`, so a
//! heading of `π/2` points up the map.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimensions {width}x{height} do not match {len} cells")]
    CellCount { width: usize, height: usize, len: usize },
    #[error("grid must be at least 1x1")]
    Empty,
    #[error("cell ({col}, {row}) is outside the {width}x{height} grid")]
    OutOfBounds { col: i32, row: i32, width: usize, height: usize },
    #[error("ego cell ({col}, {row}) is occupied")]
    EgoOccupied { col: i32, row: i32 },
    #[error("resolution must be positive, got {0}")]
    Resolution(f64),
    #[error("mask is {mask_w}x{mask_h} but grid is {grid_w}x{grid_h}")]
    MaskMismatch { mask_w: usize, mask_h: usize, grid_w: usize, grid_h: usize },
}

/// A grid cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub const fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }

    pub fn offset(self, dcol: i32, drow: i32) -> Self {
        Self::new(self.col + dcol, self.row + drow)
    }

    /// Euclidean distance; the squared sum is exact, so this is correctly rounded.
    pub fn distance(self, other: Cell) -> f64 {
        let dc = (self.col - other.col) as i64;
        let dr = (self.row - other.row) as i64;
        ((dc * dc + dr * dr) as f64).sqrt()
    }
}

/// A cell plus a heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pose {
    pub col: i32,
    pub row: i32,
    pub heading: f64,
}

impl Pose {
    pub const fn new(col: i32, row: i32, heading: f64) -> Self {
        Self { col, row, heading }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.col, self.row)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Absolute circular distance between two angles, in `[0, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Row-major binary raster marking a path region (or any other cell set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, GridError> {
        if bits.len() != width * height {
            return Err(GridError::CellCount { width, height, len: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        in_bounds(self.width, self.height, cell)
    }

    /// Out-of-bounds cells read as unset.
    pub fn get(&self, cell: Cell) -> bool {
        self.in_bounds(cell) && self.bits[cell.row as usize * self.width + cell.col as usize]
    }

    /// Out-of-bounds writes are ignored.
    pub fn set(&mut self, cell: Cell, value: bool) {
        if self.in_bounds(cell) {
            self.bits[cell.row as usize * self.width + cell.col as usize] = value;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| Cell::new((i % w) as i32, (i / w) as i32))
    }

    /// True if every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn union_with(&mut self, other: &RegionMask) {
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// Marks a disk of the given radius around `center`, clipped to bounds.
    pub fn stamp_disk(&mut self, center: Cell, radius: u32) {
        let r = radius as i32;
        let r2 = r * r;
        for dr in -r..=r {
            for dc in -r..=r {
                if dc * dc + dr * dr <= r2 {
                    self.set(center.offset(dc, dr), true);
                }
            }
        }
    }

    /// Marks every cell of the 8-connected polyline through `cells`.
    pub fn stamp_polyline(&mut self, cells: &[Cell]) {
        if let [only] = cells {
            self.set(*only, true);
        }
        for pair in cells.windows(2) {
            for c in line_cells(pair[0], pair[1]) {
                self.set(c, true);
            }
        }
    }

    /// True if the set bits form a single 8-connected component.
    pub fn is_connected(&self) -> bool {
        let Some(first) = self.cells().next() else {
            return true;
        };
        let mut seen = vec![false; self.bits.len()];
        let mut stack = vec![first];
        seen[first.row as usize * self.width + first.col as usize] = true;
        let mut reached = 0usize;
        while let Some(c) = stack.pop() {
            reached += 1;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let n = c.offset(dc, dr);
                    if self.get(n) {
                        let idx = n.row as usize * self.width + n.col as usize;
                        if !seen[idx] {
                            seen[idx] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
        reached == self.count()
    }
}

fn in_bounds(width: usize, height: usize, cell: Cell) -> bool {
    cell.col >= 0 && cell.row >= 0 && (cell.col as usize) < width && (cell.row as usize) < height
}

/// Binary obstacle raster with a resolution and a fixed ego anchor cell.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<bool>,
    ego: Cell,
    clearance: OnceLock<Vec<u8>>,
}

impl PartialEq for OccupancyGrid {
    fn eq(&self, other: &Self) -> bool {
        (self.width, self.height, self.resolution, self.ego) == (other.width, other.height, other.resolution, other.ego)
            && self.cells == other.cells
    }
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<bool>,
        ego: Cell,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::Empty);
        }
        if cells.len() != width * height {
            return Err(GridError::CellCount { width, height, len: cells.len() });
        }
        if !(resolution > 0.0) {
            return Err(GridError::Resolution(resolution));
        }
        if !in_bounds(width, height, ego) {
            return Err(GridError::OutOfBounds { col: ego.col, row: ego.row, width, height });
        }
        let grid = Self { width, height, resolution, cells, ego, clearance: OnceLock::new() };
        if grid.is_occupied(ego) {
            return Err(GridError::EgoOccupied { col: ego.col, row: ego.row });
        }
        Ok(grid)
    }

    /// An obstacle-free grid.
    pub fn free(width: usize, height: usize, resolution: f64, ego: Cell) -> Result<Self, GridError> {
        Self::new(width, height, resolution, vec![false; width * height], ego)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn ego(&self) -> Cell {
        self.ego
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        in_bounds(self.width, self.height, cell)
    }

    pub fn check_bounds(&self, cell: Cell) -> Result<(), GridError> {
        if self.in_bounds(cell) {
            Ok(())
        } else {
            Err(GridError::OutOfBounds {
                col: cell.col,
                row: cell.row,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Out-of-bounds cells count as occupied.
    #[inline]
    pub fn is_occupied(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.cells[cell.row as usize * self.width + cell.col as usize]
    }

    /// Caller guarantees `cell` is in bounds.
    #[inline]
    pub(crate) fn occupied_unchecked(&self, col: i32, row: i32) -> bool {
        self.cells[row as usize * self.width + col as usize]
    }

    /// Chebyshev distance from each cell to the nearest occupied cell,
    /// saturating at 255. Cells outside the grid do not count as occupied.
    /// Computed once per grid.
    pub fn clearance(&self) -> &[u8] {
        self.clearance.get_or_init(|| self.chamfer())
    }

    fn chamfer(&self) -> Vec<u8> {
        let (w, h) = (self.width, self.height);
        let mut d: Vec<u8> = self.cells.iter().map(|&o| if o { 0 } else { u8::MAX }).collect();
        let relax = |d: &mut Vec<u8>, i: usize, j: usize| {
            let via = d[j].saturating_add(1);
            if via < d[i] {
                d[i] = via;
            }
        };
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if c > 0 {
                    relax(&mut d, i, i - 1);
                }
                if r > 0 {
                    relax(&mut d, i, i - w);
                    if c > 0 {
                        relax(&mut d, i, i - w - 1);
                    }
                    if c + 1 < w {
                        relax(&mut d, i, i - w + 1);
                    }
                }
            }
        }
        for r in (0..h).rev() {
            for c in (0..w).rev() {
                let i = r * w + c;
                if c + 1 < w {
                    relax(&mut d, i, i + 1);
                }
                if r + 1 < h {
                    relax(&mut d, i, i + w);
                    if c + 1 < w {
                        relax(&mut d, i, i + w + 1);
                    }
                    if c > 0 {
                        relax(&mut d, i, i + w - 1);
                    }
                }
            }
        }
        d
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        if self.in_bounds(cell) {
            self.cells[cell.row as usize * self.width + cell.col as usize] = occupied;
            self.clearance = OnceLock::new();
        }
    }

    pub fn as_mask(&self) -> RegionMask {
        RegionMask { width: self.width, height: self.height, bits: self.cells.clone() }
    }

    pub fn check_mask(&self, mask: &RegionMask) -> Result<(), GridError> {
        if mask.width != self.width || mask.height != self.height {
            return Err(GridError::MaskMismatch {
                mask_w: mask.width,
                mask_h: mask.height,
                grid_w: self.width,
                grid_h: self.height,
            });
        }
        Ok(())
    }

    /// Dilates obstacles by `radius` cells. The ego cell may become occupied,
    /// in which case the result is an error.
    pub fn inflate(&self, radius: u32) -> Result<OccupancyGrid, GridError> {
        let grown = dilate(&self.as_mask(), radius);
        Self::new(self.width, self.height, self.resolution, grown.bits, self.ego)
    }

    /// Walks the 8-connected discrete line `from → to` (inclusive) and returns
    /// the first occupied cell, or `None` if the line is clear.
    pub fn trace_line(&self, from: Cell, to: Cell) -> Result<Option<Cell>, GridError> {
        self.check_bounds(from)?;
        self.check_bounds(to)?;
        Ok(line_cells(from, to).find(|&c| self.occupied_unchecked(c.col, c.row)))
    }
}

/// Euclidean dilation: an output bit is set iff some input bit lies within
/// `radius` cells.
///
/// Runs a 1-D nearest-set-bit pass along each row, then combines rows within
/// `radius` of each output cell, which is exact for Euclidean disks.
pub fn dilate(mask: &RegionMask, radius: u32) -> RegionMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let r = radius as i64;
    let r2 = r * r;
    let far = i64::MAX / 4;

    // Horizontal distance to the nearest set bit in the same row.
    let mut hdist = vec![far; w * h];
    for row in 0..h {
        let line = &mask.bits[row * w..(row + 1) * w];
        let out = &mut hdist[row * w..(row + 1) * w];
        let mut last = None;
        for col in 0..w {
            if line[col] {
                last = Some(col);
            }
            if let Some(l) = last {
                out[col] = (col - l) as i64;
            }
        }
        last = None;
        for col in (0..w).rev() {
            if line[col] {
                last = Some(col);
            }
            if let Some(l) = last {
                out[col] = out[col].min((l - col) as i64);
            }
        }
    }

    let mut bits = vec![false; w * h];
    for row in 0..h {
        let lo = row.saturating_sub(radius as usize);
        let hi = (row + radius as usize).min(h - 1);
        for col in 0..w {
            bits[row * w + col] = (lo..=hi).any(|src| {
                let d = hdist[src * w + col];
                let dr = src as i64 - row as i64;
                d <= r && d * d + dr * dr <= r2
            });
        }
    }
    RegionMask { width: w, height: h, bits }
}

/// The cells of the 8-connected line from `a` to `b`, inclusive.
///
/// At each step along the major axis the minor coordinate is the exact line
/// value rounded half-up in absolute coordinates, so the cell set does not
/// depend on direction and is translation invariant.
pub fn line_cells(a: Cell, b: Cell) -> impl Iterator<Item = Cell> {
    let dc = (b.col - a.col) as i64;
    let dr = (b.row - a.row) as i64;
    let steps = dc.abs().max(dr.abs());
    let col_major = dc.abs() >= dr.abs();
    (0..=steps).map(move |k| {
        if steps == 0 {
            return a;
        }
        let (major0, minor0, dmaj, dmin) = if col_major {
            (a.col as i64, a.row as i64, dc, dr)
        } else {
            (a.row as i64, a.col as i64, dr, dc)
        };
        let major = major0 + dmaj.signum() * k;
        // minor = minor0 + k·dmin/steps, rounded half-up.
        let num = 2 * (minor0 * steps + k * dmin) + steps;
        let minor = num.div_euclid(2 * steps);
        if col_major {
            Cell::new(major as i32, minor as i32)
        } else {
            Cell::new(minor as i32, major as i32)
        }
    })
}

/// A rough global route: ordered `(col, row, heading)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RefPathError {
    #[error("reference path needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("heading at point {0} disagrees with the segment direction by more than π/2")]
    Heading(usize),
    #[error("consecutive points starting at index {0} coincide")]
    Degenerate(usize),
}

impl ReferencePath {
    pub fn new(points: Vec<(f64, f64, f64)>) -> Result<Self, RefPathError> {
        if points.len() < 2 {
            return Err(RefPathError::TooShort(points.len()));
        }
        for (i, pair) in points.windows(2).enumerate() {
            let (c0, r0, h0) = pair[0];
            let (c1, r1, _) = pair[1];
            if (c1 - c0).hypot(r1 - r0) < 1e-9 {
                return Err(RefPathError::Degenerate(i));
            }
            let dir = (r0 - r1).atan2(c1 - c0);
            if angle_diff(dir, h0) > PI / 2.0 + 1e-9 {
                return Err(RefPathError::Heading(i));
            }
        }
        Ok(Self { points })
    }

    /// Builds a path from positions, deriving each heading from the segment
    /// that leaves it (the last point reuses the previous heading).
    pub fn from_positions(positions: &[(f64, f64)]) -> Result<Self, RefPathError> {
        if positions.len() < 2 {
            return Err(RefPathError::TooShort(positions.len()));
        }
        let mut points = Vec::with_capacity(positions.len());
        let mut heading = 0.0;
        for (i, &(c, r)) in positions.iter().enumerate() {
            if let Some(&(nc, nr)) = positions.get(i + 1) {
                heading = (r - nr).atan2(nc - c);
            }
            points.push((c, r, heading));
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64, f64)] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|p| (p[1].0 - p[0].0).hypot(p[1].1 - p[0].1)).sum()
    }

    /// Position and segment heading at arc length `s`, or `None` past the end.
    pub fn station(&self, s: f64) -> Option<(f64, f64, f64)> {
        if s < 0.0 {
            return None;
        }
        let mut acc = 0.0;
        for p in self.points.windows(2) {
            let (c0, r0, _) = p[0];
            let (c1, r1, _) = p[1];
            let seg = (c1 - c0).hypot(r1 - r0);
            if s <= acc + seg {
                let t = (s - acc) / seg;
                let heading = (r0 - r1).atan2(c1 - c0);
                return Some((c0 + t * (c1 - c0), r0 + t * (r1 - r0), heading));
            }
            acc += seg;
        }
        None
    }

    /// Shifts every point sideways by `offset` cells; positive is to the left
    /// of the direction of travel.
    pub fn shifted(&self, offset: f64) -> ReferencePath {
        let n = self.points.len();
        let points = (0..n)
            .map(|i| {
                let (c, r, h) = self.points[i];
                let seg_heading = if i + 1 < n {
                    let (nc, nr, _) = self.points[i + 1];
                    (r - nr).atan2(nc - c)
                } else {
                    let (pc, pr, _) = self.points[i - 1];
                    (pr - r).atan2(c - pc)
                };
                let (dc, dr) = left_normal(seg_heading);
                (c + dc * offset, r + dr * offset, h)
            })
            .collect();
        ReferencePath { points }
    }

    /// Rounded cell positions of the points.
    pub fn cells(&self) -> Vec<Cell> {
        self.points.iter().map(|&(c, r, _)| Cell::new(c.round() as i32, r.round() as i32)).collect()
    }

    /// Rasterized polyline.
    pub fn raster(&self, width: usize, height: usize) -> RegionMask {
        let mut mask = RegionMask::new(width, height);
        mask.stamp_polyline(&self.cells());
        mask
    }
}

/// Unit vector to the left of `heading`, in `(dcol, drow)` screen terms.
pub fn left_normal(heading: f64) -> (f64, f64) {
    // Left normal in the math frame is (-sin, cos); +y maps to -row.
    (-heading.sin(), -heading.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> RegionMask {
        let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        RegionMask::from_bits(w, h, bits).unwrap()
    }

    /// Brute-force disk stamping: every output cell scans all set input bits.
    fn dilate_oracle(mask: &RegionMask, radius: u32) -> RegionMask {
        let r2 = (radius * radius) as i64;
        let set: Vec<Cell> = mask.cells().collect();
        let mut out = RegionMask::new(mask.width(), mask.height());
        for row in 0..mask.height() as i32 {
            for col in 0..mask.width() as i32 {
                let hit = set.iter().any(|s| {
                    let dc = (s.col - col) as i64;
                    let dr = (s.row - row) as i64;
                    dc * dc + dr * dr <= r2
                });
                out.set(Cell::new(col, row), hit);
            }
        }
        out
    }

    #[test]
    fn clearance_matches_brute_force() {
        let mut g = OccupancyGrid::free(40, 30, 0.2, Cell::new(0, 0)).unwrap();
        for &(c, r) in &[(5, 5), (20, 12), (39, 29), (33, 3), (12, 25)] {
            g.set_occupied(Cell::new(c, r), true);
        }
        let d = g.clearance();
        let obstacles: Vec<Cell> = g.as_mask().cells().collect();
        for r in 0..30 {
            for c in 0..40 {
                let want = obstacles.iter().map(|o| (o.col - c).abs().max((o.row - r).abs())).min().unwrap();
                assert_eq!(d[r as usize * 40 + c as usize] as i32, want, "({c},{r})");
            }
        }
        let free = OccupancyGrid::free(300, 2, 0.2, Cell::new(0, 0)).unwrap();
        assert!(free.clearance().iter().all(|&v| v == u8::MAX));
    }

    #[test]
    fn dilate_radius_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_mask(&mut rng, 37, 23, 0.2);
        assert_eq!(dilate(&m, 0), m);
    }

    #[test]
    fn dilate_unit_radius_is_plus_shape() {
        let mut m = RegionMask::new(21, 21);
        m.set(Cell::new(10, 10), true);
        let d = dilate(&m, 1);
        assert_eq!(d.count(), 5);
        for c in [(10, 10), (9, 10), (11, 10), (10, 9), (10, 11)] {
            assert!(d.get(Cell::new(c.0, c.1)));
        }
    }

    #[test]
    fn dilate_matches_brute_force_stamping() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for density in [0.002, 0.01, 0.05] {
            let m = random_mask(&mut rng, 64, 64, density);
            assert_eq!(dilate(&m, 3), dilate_oracle(&m, 3), "density {density}");
        }
        let m = random_mask(&mut rng, 40, 17, 0.01);
        for r in [1, 2, 5, 9, 30] {
            assert_eq!(dilate(&m, r), dilate_oracle(&m, r), "radius {r}");
        }
    }

    #[test]
    fn dilate_composition_can_miss_cells() {
        // Discrete disks: D1 ⊕ D2 lacks (2, 2) although |(2, 2)| ≤ 3.
        let mut m = RegionMask::new(21, 21);
        m.set(Cell::new(10, 10), true);
        let twice = dilate(&dilate(&m, 1), 2);
        let once = dilate(&m, 3);
        assert!(once.get(Cell::new(12, 12)));
        assert!(!twice.get(Cell::new(12, 12)));
    }

    #[test]
    fn trace_line_zero_length() {
        let g = OccupancyGrid::free(21, 21, 0.2, Cell::new(0, 0)).unwrap();
        assert_eq!(g.trace_line(Cell::new(4, 4), Cell::new(4, 4)), Ok(None));
    }

    #[test]
    fn trace_line_hits_wall_cell() {
        let mut g = OccupancyGrid::free(21, 21, 0.2, Cell::new(0, 0)).unwrap();
        g.set_occupied(Cell::new(10, 5), true);
        g.set_occupied(Cell::new(15, 5), true);
        assert_eq!(g.trace_line(Cell::new(2, 5), Cell::new(18, 5)), Ok(Some(Cell::new(10, 5))));
        assert_eq!(g.trace_line(Cell::new(18, 5), Cell::new(2, 5)), Ok(Some(Cell::new(15, 5))));
        assert_eq!(g.trace_line(Cell::new(2, 6), Cell::new(18, 6)), Ok(None));
    }

    #[test]
    fn trace_line_rejects_out_of_bounds() {
        let g = OccupancyGrid::free(21, 21, 0.2, Cell::new(0, 0)).unwrap();
        assert!(matches!(
            g.trace_line(Cell::new(0, 0), Cell::new(21, 3)),
            Err(GridError::OutOfBounds { col: 21, .. })
        ));
        assert!(g.trace_line(Cell::new(-1, 0), Cell::new(2, 3)).is_err());
    }

    /// Float walk along the segment, sampled every 0.1 cells of the major
    /// axis; a sample that lands on an integer major coordinate contributes
    /// the cell whose minor coordinate is the rounded exact line value.
    fn sampled_cells(a: Cell, b: Cell) -> Vec<Cell> {
        let (ax, ay, bx, by) = (a.col as f64, a.row as f64, b.col as f64, b.row as f64);
        let major = (bx - ax).abs().max((by - ay).abs());
        if major == 0.0 {
            return vec![a];
        }
        let samples = (major * 10.0).round() as usize;
        let col_major = (bx - ax).abs() >= (by - ay).abs();
        let mut out: Vec<Cell> = Vec::new();
        for s in 0..=samples {
            if s % 10 != 0 {
                continue;
            }
            let t = s as f64 / samples as f64;
            let x = ax + t * (bx - ax);
            let y = ay + t * (by - ay);
            let cell = if col_major {
                Cell::new(x.round() as i32, (y + 0.5 + 1e-9).floor() as i32)
            } else {
                Cell::new((x + 0.5 + 1e-9).floor() as i32, y.round() as i32)
            };
            if out.last() != Some(&cell) {
                out.push(cell);
            }
        }
        out
    }

    #[test]
    fn trace_line_agrees_with_sampled_walk() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..200 {
            let w = rng.gen_range(21..60);
            let h = rng.gen_range(21..60);
            let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.08)).collect();
            let mut bits = bits;
            bits[0] = false;
            let g = OccupancyGrid::new(w, h, 0.2, bits, Cell::new(0, 0)).unwrap();
            let a = Cell::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
            let b = Cell::new(rng.gen_range(0..w as i32), rng.gen_range(0..h as i32));
            let cells: Vec<Cell> = line_cells(a, b).collect();
            assert_eq!(cells, sampled_cells(a, b), "segment {i}: {a:?} -> {b:?}");
            let oracle_blocked = sampled_cells(a, b).iter().any(|&c| g.is_occupied(c));
            assert_eq!(g.trace_line(a, b).unwrap().is_some(), oracle_blocked, "segment {i}");
        }
    }

    #[test]
    fn line_cells_are_eight_connected() {
        let a = Cell::new(3, 17);
        let b = Cell::new(40, 2);
        let cells: Vec<Cell> = line_cells(a, b).collect();
        assert_eq!(cells.first(), Some(&a));
        assert_eq!(cells.last(), Some(&b));
        for p in cells.windows(2) {
            assert!((p[1].col - p[0].col).abs() <= 1 && (p[1].row - p[0].row).abs() <= 1);
        }
    }

    #[test]
    fn grid_construction_errors() {
        assert_eq!(OccupancyGrid::new(2, 2, 0.2, vec![false; 3], Cell::new(0, 0)), Err(GridError::CellCount { width: 2, height: 2, len: 3 }));
        assert_eq!(
            OccupancyGrid::new(2, 2, 0.2, vec![true, false, false, true], Cell::new(0, 0)),
            Err(GridError::EgoOccupied { col: 0, row: 0 })
        );
        assert!(OccupancyGrid::free(4, 4, 0.0, Cell::new(0, 0)).is_err());
        assert!(OccupancyGrid::free(4, 4, 0.2, Cell::new(4, 0)).is_err());
    }

    #[test]
    fn inflate_can_swallow_ego() {
        let mut g = OccupancyGrid::free(30, 30, 0.2, Cell::new(15, 15)).unwrap();
        g.set_occupied(Cell::new(15, 18), true);
        assert!(g.inflate(2).is_ok());
        assert_eq!(g.inflate(3), Err(GridError::EgoOccupied { col: 15, row: 15 }));
    }

    #[test]
    fn reference_path_station_and_shift() {
        let p = ReferencePath::from_positions(&[(10.0, 100.0), (10.0, 0.0)]).unwrap();
        assert!((p.length() - 100.0).abs() < 1e-12);
        let (c, r, h) = p.station(30.0).unwrap();
        assert!((c - 10.0).abs() < 1e-12 && (r - 70.0).abs() < 1e-12);
        assert!((h - PI / 2.0).abs() < 1e-12);
        assert!(p.station(100.5).is_none());
        // Heading up: left is -col.
        let s = p.shifted(4.0);
        assert!((s.points()[0].0 - 6.0).abs() < 1e-12);
        assert!((s.points()[1].0 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn reference_path_validation() {
        assert_eq!(ReferencePath::new(vec![(0.0, 0.0, 0.0)]), Err(RefPathError::TooShort(1)));
        // Moving right with a heading pointing left.
        assert_eq!(ReferencePath::new(vec![(0.0, 0.0, PI), (5.0, 0.0, PI)]), Err(RefPathError::Heading(0)));
        assert!(ReferencePath::new(vec![(0.0, 0.0, 0.3), (5.0, 0.0, 0.0)]).is_ok());
    }

    #[test]
    fn mask_connectivity() {
        let mut m = RegionMask::new(10, 10);
        assert!(m.is_connected());
        m.set(Cell::new(1, 1), true);
        m.set(Cell::new(2, 2), true);
        assert!(m.is_connected());
        m.set(Cell::new(5, 5), true);
        assert!(!m.is_connected());
    }

    fn mask_strategy() -> impl Strategy<Value = RegionMask> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.05), w * h)
                .prop_map(move |bits| RegionMask::from_bits(w, h, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn dilate_is_monotone_in_radius(m in mask_strategy(), r1 in 0u32..5, extra in 0u32..5) {
            let small = dilate(&m, r1);
            let large = dilate(&m, r1 + extra);
            prop_assert!(small.is_subset_of(&large));
            prop_assert!(m.is_subset_of(&small));
        }

        #[test]
        fn dilate_composition_stays_inside_sum_radius(m in mask_strategy(), a in 0u32..4, b in 0u32..4) {
            let twice = dilate(&dilate(&m, a), b);
            let once = dilate(&m, a + b);
            prop_assert!(twice.is_subset_of(&once));
        }

        #[test]
        fn trace_line_is_symmetric(seed in any::<u64>(), ac in 0i32..30, ar in 0i32..30, bc in 0i32..30, br in 0i32..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut bits: Vec<bool> = (0..900).map(|_| rng.gen_bool(0.1)).collect();
            bits[0] = false;
            let g = OccupancyGrid::new(30, 30, 0.2, bits, Cell::new(0, 0)).unwrap();
            let (a, b) = (Cell::new(ac, ar), Cell::new(bc, br));
            let mut fwd: Vec<Cell> = line_cells(a, b).collect();
            let back: Vec<Cell> = line_cells(b, a).collect();
            fwd.reverse();
            prop_assert_eq!(&fwd, &back);
            prop_assert_eq!(g.trace_line(a, b).unwrap().is_some(), g.trace_line(b, a).unwrap().is_some());
        }
    }
}
