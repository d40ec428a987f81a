//! Hexagonal-lattice geometry.
//!
//! Bits live on a hexagonally packed lattice stored as a plain rectangular
//! array in axial coordinates: cell `(row, col)` has the six neighbors
//! `(row±1, col)`, `(row, col±1)`, `(row+1, col-1)`, `(row-1, col+1)`.
//! Storing axial coordinates in a rectangle avoids the row-parity case
//! analysis of offset coordinates.
//!
//! Tracks may be separated by guard bands: with `track_height = t`, every
//! `(t+1)`-th row is an empty (all-zero) bit row. Cells outside the grid are
//! treated as stored zeros known to both channel and decoder, which keeps
//! edge likelihoods well-defined.

use crate::error::{Error, Result};

/// The six axial neighbor offsets, as `(d_row, d_col)`.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

/// A lattice coordinate: `(row, col)` into the rectangular storage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }
}

/// The in-bounds neighbors of a cell, at most six.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeighborSet {
    coords: [Coord; 6],
    len: u8,
}

impl NeighborSet {
    fn push(&mut self, c: Coord) {
        self.coords[self.len as usize] = c;
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[Coord] {
        &self.coords[..self.len as usize]
    }

    pub fn contains(&self, c: Coord) -> bool {
        self.as_slice().contains(&c)
    }

    pub fn iter(&self) -> impl Iterator<Item = Coord> + '_ {
        self.as_slice().iter().copied()
    }
}

/// A hexagonally packed binary bit array with optional guard-band rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HexGrid {
    rows: usize,
    cols: usize,
    track_height: Option<usize>,
    bits: Vec<u8>,
}

impl HexGrid {
    /// All-zero grid.
    pub fn new(rows: usize, cols: usize, track_height: Option<usize>) -> Result<Self> {
        Self::validate_dims(rows, cols, track_height)?;
        Ok(HexGrid {
            rows,
            cols,
            track_height,
            bits: vec![0; rows * cols],
        })
    }

    /// Grid from a full row-major bit array (guard rows included).
    pub fn from_bits(
        rows: usize,
        cols: usize,
        track_height: Option<usize>,
        bits: Vec<u8>,
    ) -> Result<Self> {
        Self::validate_dims(rows, cols, track_height)?;
        if bits.len() != rows * cols {
            return Err(Error::domain(format!(
                "bit array has {} entries, grid needs {}",
                bits.len(),
                rows * cols
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::domain(format!("bit value {b} is not in {{0,1}}")));
        }
        let grid = HexGrid {
            rows,
            cols,
            track_height,
            bits,
        };
        for r in 0..rows {
            if grid.is_guard_row(r) && grid.row(r).iter().any(|&b| b != 0) {
                return Err(Error::domain(format!("guard row {r} contains nonzero bits")));
            }
        }
        Ok(grid)
    }

    fn validate_dims(rows: usize, cols: usize, track_height: Option<usize>) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain("grid dimensions must be positive".to_string()));
        }
        if track_height == Some(0) {
            return Err(Error::domain("track height must be positive".to_string()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn track_height(&self) -> Option<usize> {
        self.track_height
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// True when `row` is a guard-band row (all-zero by invariant).
    pub fn is_guard_row(&self, row: usize) -> bool {
        match self.track_height {
            Some(t) => row % (t + 1) == t,
            None => false,
        }
    }

    /// Number of non-guard (data) cells.
    pub fn data_cell_count(&self) -> usize {
        (0..self.rows)
            .filter(|&r| !self.is_guard_row(r))
            .count()
            * self.cols
    }

    pub fn in_bounds(&self, coord: Coord) -> bool {
        coord.row < self.rows && coord.col < self.cols
    }

    pub fn bit(&self, coord: Coord) -> u8 {
        self.bits[coord.row * self.cols + coord.col]
    }

    /// Bit value with out-of-bounds positions reading as stored zeros.
    pub fn bit_or_zero(&self, row: i64, col: i64) -> u8 {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            0
        } else {
            self.bits[row as usize * self.cols + col as usize]
        }
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// The in-bounds subset of the six axial neighbors of `coord`.
    ///
    /// Guard rows are included as coordinates; their bits are identically 0.
    pub fn neighbors(&self, coord: Coord) -> Result<NeighborSet> {
        if !self.in_bounds(coord) {
            return Err(Error::domain(format!(
                "coordinate ({}, {}) outside {}x{} grid",
                coord.row, coord.col, self.rows, self.cols
            )));
        }
        let mut set = NeighborSet::default();
        for (dr, dc) in NEIGHBOR_OFFSETS {
            let r = coord.row as i64 + dr as i64;
            let c = coord.col as i64 + dc as i64;
            if r >= 0 && c >= 0 && (r as usize) < self.rows && (c as usize) < self.cols {
                set.push(Coord::new(r as usize, c as usize));
            }
        }
        Ok(set)
    }

    /// Number of neighbors of `coord` storing a 1; out-of-bounds positions count as 0.
    pub fn count_nonzero_neighbors(&self, coord: Coord) -> Result<usize> {
        Ok(self
            .neighbors(coord)?
            .iter()
            .map(|c| self.bit(c) as usize)
            .sum())
    }

    /// Text dump: one row per line, characters '0'/'1', guard rows included.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for &b in self.row(r) {
                out.push(if b == 0 { '0' } else { '1' });
            }
            out.push('\n');
        }
        out
    }

    /// Parse a [`dump`](Self::dump)-format grid. The dump does not record the
    /// guard convention, so `track_height` is supplied by the caller.
    pub fn parse(text: &str, track_height: Option<usize>) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::Parse("empty grid dump".to_string()));
        }
        let cols = lines[0].len();
        let mut bits = Vec::with_capacity(lines.len() * cols);
        for (i, line) in lines.iter().enumerate() {
            if line.len() != cols {
                return Err(Error::Parse(format!(
                    "row {i} has {} characters, expected {cols}",
                    line.len()
                )));
            }
            for ch in line.chars() {
                match ch {
                    '0' => bits.push(0),
                    '1' => bits.push(1),
                    _ => return Err(Error::Parse(format!("invalid character {ch:?} in row {i}"))),
                }
            }
        }
        Self::from_bits(lines.len(), cols, track_height, bits)
    }
}

/// Raster (row-major) fill of the non-guard cells of a fresh grid.
pub fn codeword_to_grid(
    code_bits: &[u8],
    rows: usize,
    cols: usize,
    track_height: Option<usize>,
) -> Result<HexGrid> {
    let mut grid = HexGrid::new(rows, cols, track_height)?;
    let needed = grid.data_cell_count();
    if code_bits.len() != needed {
        return Err(Error::domain(format!(
            "codeword has {} bits, grid has {} data cells",
            code_bits.len(),
            needed
        )));
    }
    if let Some(b) = code_bits.iter().find(|&&b| b > 1) {
        return Err(Error::domain(format!("bit value {b} is not in {{0,1}}")));
    }
    let mut next = 0;
    for r in 0..rows {
        if grid.is_guard_row(r) {
            continue;
        }
        let base = r * cols;
        grid.bits[base..base + cols].copy_from_slice(&code_bits[next..next + cols]);
        next += cols;
    }
    Ok(grid)
}

/// Inverse of [`codeword_to_grid`]: non-guard cells in raster order.
pub fn grid_to_codeword(grid: &HexGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.data_cell_count());
    for r in 0..grid.rows {
        if !grid.is_guard_row(r) {
            out.extend_from_slice(grid.row(r));
        }
    }
    out
}
