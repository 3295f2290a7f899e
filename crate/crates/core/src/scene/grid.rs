use super::{SceneError, Vec2};

/// Grid cell address, `(row, col)`. Rows advance along +y, columns along +x.
pub type Cell = (usize, usize);

/// 2D traversability map of the floor.
///
/// `origin` is the world position of the lower-left corner of cell (0, 0);
/// cell `(r, c)` covers `[origin.x + c*res, origin.x + (c+1)*res)` by
/// `[origin.y + r*res, origin.y + (r+1)*res)`. Cells are stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSpaceGrid {
    origin: Vec2,
    resolution: f64,
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl FreeSpaceGrid {
    pub fn new(
        origin: Vec2,
        resolution: f64,
        width: usize,
        height: usize,
        cells: Vec<bool>,
    ) -> Result<Self, SceneError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(SceneError::InvalidGrid(format!("resolution {resolution} must be > 0")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(SceneError::InvalidGrid("origin must be finite".into()));
        }
        if width.checked_mul(height) != Some(cells.len()) {
            return Err(SceneError::InvalidGrid(format!(
                "{width}x{height} grid needs {} cells, got {}",
                width.saturating_mul(height),
                cells.len()
            )));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            cells,
        })
    }

    /// Grid of `width x height` cells that are all traversable.
    pub fn all_free(origin: Vec2, resolution: f64, width: usize, height: usize) -> Result<Self, SceneError> {
        Self::new(origin, resolution, width, height, vec![true; width * height])
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn is_free(&self, (row, col): Cell) -> bool {
        row < self.height && col < self.width && self.cells[row * self.width + col]
    }

    pub fn cell_center(&self, (row, col): Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let col = ((p.x - self.origin.x) / self.resolution).floor();
        let row = ((p.y - self.origin.y) / self.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    /// Traversable cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, free)| **free)
            .map(move |(i, _)| (i / self.width, i % self.width))
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Cells packed LSB-first: cell `i` is bit `i % 8` of byte `i / 8`.
    pub fn to_bitset(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.cells.len().div_ceil(8)];
        for (i, free) in self.cells.iter().enumerate() {
            if *free {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        bytes
    }

    pub fn cells_from_bitset(bytes: &[u8], count: usize) -> Result<Vec<bool>, SceneError> {
        if bytes.len() != count.div_ceil(8) {
            return Err(SceneError::InvalidGrid(format!(
                "bitset of {} bytes cannot hold exactly {count} cells",
                bytes.len()
            )));
        }
        Ok((0..count).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect())
    }
}
