//! Non-overlapping square block partitioning of maps.
//!
//! Blocks are emitted in row-major block order and vectorised row-major.
//! Maps whose sides are not multiples of the block size are zero-padded at
//! the bottom and right; the padding is cropped again on reassembly.

use crate::error::{Error, Result};
use crate::map::ParametricMap;

/// One `size x size` block, stored as its row-major vectorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    size: usize,
    data: Vec<f64>,
}

impl Block {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if size == 0 || data.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "block of side {size} needs {} values, got {}",
                size * size,
                data.len()
            )));
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major vectorised form, length `size^2`.
    pub fn vectorized(&self) -> &[f64] {
        &self.data
    }

    pub fn vectorized_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }
}

/// Geometry of a block partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_size: usize,
    pub n_block_rows: usize,
    pub n_block_cols: usize,
    pub pad_rows: usize,
    pub pad_cols: usize,
    pub source_rows: usize,
    pub source_cols: usize,
}

impl BlockGrid {
    pub fn new(source_rows: usize, source_cols: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidArgument("block size must be >= 1".into()));
        }
        if source_rows == 0 || source_cols == 0 {
            return Err(Error::EmptyInput);
        }
        let n_block_rows = source_rows.div_ceil(block_size);
        let n_block_cols = source_cols.div_ceil(block_size);
        Ok(Self {
            block_size,
            n_block_rows,
            n_block_cols,
            pad_rows: n_block_rows * block_size - source_rows,
            pad_cols: n_block_cols * block_size - source_cols,
            source_rows,
            source_cols,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.n_block_rows * self.n_block_cols
    }

    pub fn padded_rows(&self) -> usize {
        self.n_block_rows * self.block_size
    }

    pub fn padded_cols(&self) -> usize {
        self.n_block_cols * self.block_size
    }

    /// Row-major index into the padded image of pixel `p` of block `b`.
    #[inline]
    pub fn padded_index(&self, b: usize, p: usize) -> usize {
        let bs = self.block_size;
        let (br, bc) = (b / self.n_block_cols, b % self.n_block_cols);
        let (r, c) = (p / bs, p % bs);
        (br * bs + r) * self.padded_cols() + bc * bs + c
    }

    /// Whether pixel `p` of block `b` lies inside the unpadded source region.
    #[inline]
    pub fn in_source(&self, b: usize, p: usize) -> bool {
        let bs = self.block_size;
        let (br, bc) = (b / self.n_block_cols, b % self.n_block_cols);
        br * bs + p / bs < self.source_rows && bc * bs + p % bs < self.source_cols
    }
}

/// Splits `map` into `block_size x block_size` blocks in row-major block order.
pub fn block_partition(map: &ParametricMap, block_size: usize) -> Result<(Vec<Block>, BlockGrid)> {
    if map.is_empty() {
        return Err(Error::EmptyInput);
    }
    let grid = BlockGrid::new(map.rows(), map.cols(), block_size)?;
    let blocks = partition_slice(map.data(), &grid)
        .into_iter()
        .map(|data| Block { size: block_size, data })
        .collect();
    Ok((blocks, grid))
}

/// Inverse of [`block_partition`]: stitches blocks together and crops padding.
pub fn block_reassemble(blocks: &[Block], grid: &BlockGrid, unit: &str) -> Result<ParametricMap> {
    if blocks.len() != grid.n_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "grid expects {} blocks, got {}",
            grid.n_blocks(),
            blocks.len()
        )));
    }
    if let Some(b) = blocks.iter().find(|b| b.size != grid.block_size) {
        return Err(Error::DimensionMismatch(format!(
            "grid block size {}, got block of side {}",
            grid.block_size, b.size
        )));
    }
    let vecs: Vec<&[f64]> = blocks.iter().map(|b| b.data.as_slice()).collect();
    ParametricMap::new(grid.source_rows, grid.source_cols, reassemble_slices(&vecs, grid), unit)
}

/// Partitions a row-major `source_rows x source_cols` slice into vectorised
/// blocks.
pub(crate) fn partition_slice(data: &[f64], grid: &BlockGrid) -> Vec<Vec<f64>> {
    let bs = grid.block_size;
    (0..grid.n_blocks())
        .map(|b| {
            let (br, bc) = (b / grid.n_block_cols, b % grid.n_block_cols);
            let mut out = vec![0.0; bs * bs];
            for r in 0..bs {
                let row = br * bs + r;
                if row >= grid.source_rows {
                    break;
                }
                for c in 0..bs {
                    let col = bc * bs + c;
                    if col >= grid.source_cols {
                        break;
                    }
                    out[r * bs + c] = data[row * grid.source_cols + col];
                }
            }
            out
        })
        .collect()
}

pub(crate) fn reassemble_slices<B: AsRef<[f64]>>(blocks: &[B], grid: &BlockGrid) -> Vec<f64> {
    let bs = grid.block_size;
    let mut out = vec![0.0; grid.source_rows * grid.source_cols];
    for (b, block) in blocks.iter().enumerate() {
        let block = block.as_ref();
        let (br, bc) = (b / grid.n_block_cols, b % grid.n_block_cols);
        for r in 0..bs {
            let row = br * bs + r;
            if row >= grid.source_rows {
                break;
            }
            for c in 0..bs {
                let col = bc * bs + c;
                if col >= grid.source_cols {
                    break;
                }
                out[row * grid.source_cols + col] = block[r * bs + c];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize) -> ParametricMap {
        ParametricMap::from_fn(rows, cols, "", |r, c| (r * cols + c) as f64 + 1.0).unwrap()
    }

    #[test]
    fn exact_tiling() {
        let (blocks, grid) = block_partition(&ramp(4, 4), 2).unwrap();
        assert_eq!(blocks.len(), 4);
        assert_eq!((grid.pad_rows, grid.pad_cols), (0, 0));
        assert_eq!(blocks[1].vectorized(), &[3.0, 4.0, 7.0, 8.0]);
    }

    #[test]
    fn padded_cells_are_zero() {
        let (blocks, grid) = block_partition(&ramp(5, 5), 2).unwrap();
        assert_eq!(blocks.len(), 9);
        assert_eq!((grid.pad_rows, grid.pad_cols), (1, 1));
        // bottom-right block holds the single pixel (4,4) = 25
        assert_eq!(blocks[8].vectorized(), &[25.0, 0.0, 0.0, 0.0]);
        assert_eq!(blocks[2].vectorized(), &[5.0, 0.0, 10.0, 0.0]);
    }

    #[test]
    fn reassemble_inverts_partition() {
        let m = ramp(7, 11);
        let (blocks, grid) = block_partition(&m, 3).unwrap();
        assert_eq!(block_reassemble(&blocks, &grid, "").unwrap(), m);
    }

    #[test]
    fn zero_blocks_give_zero_map() {
        let grid = BlockGrid::new(4, 4, 2).unwrap();
        let blocks = vec![Block::new(2, vec![0.0; 4]).unwrap(); 4];
        let m = block_reassemble(&blocks, &grid, "").unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn perturbing_one_block_changes_only_its_footprint() {
        let m = ramp(7, 8);
        let (mut blocks, grid) = block_partition(&m, 3).unwrap();
        // block (2,1): rows 6..9 (only row 6 in source), cols 3..6
        for v in blocks[2 * grid.n_block_cols + 1].vectorized_mut() {
            *v += 100.0;
        }
        let out = block_reassemble(&blocks, &grid, "").unwrap();
        for r in 0..7 {
            for c in 0..8 {
                let changed = out.get(r, c) != m.get(r, c);
                let in_footprint = r == 6 && (3..6).contains(&c);
                assert_eq!(changed, in_footprint, "pixel ({r},{c})");
            }
        }
    }

    #[test]
    fn mismatches_are_errors() {
        let grid = BlockGrid::new(4, 4, 2).unwrap();
        let three = vec![Block::new(2, vec![0.0; 4]).unwrap(); 3];
        assert!(block_reassemble(&three, &grid, "").is_err());
        let wrong = vec![Block::new(1, vec![0.0]).unwrap(); 4];
        assert!(block_reassemble(&wrong, &grid, "").is_err());
        assert!(BlockGrid::new(4, 4, 0).is_err());
    }

    #[test]
    fn grid_indexing() {
        let grid = BlockGrid::new(5, 5, 2).unwrap();
        assert_eq!(grid.padded_cols(), 6);
        assert_eq!(grid.padded_index(4, 3), 3 * 6 + 3);
        assert!(grid.in_source(8, 0));
        assert!(!grid.in_source(8, 1));
    }
}
