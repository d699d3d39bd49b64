use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const DEFAULT_BLOCK_HOURS: usize = 96;
pub const DEFAULT_TEST_FRAC: f64 = 0.2;

/// Contiguous blocks of rows, each wholly in train or test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockedSplit {
    pub block_hours: usize,
    pub test_frac: f64,
    pub seed: u64,
    pub n_rows: usize,
    /// `test_blocks[b]` tells whether block `b` (rows `b*block_hours..`) is held out.
    pub test_blocks: Vec<bool>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl BlockedSplit {
    pub fn n_blocks(&self) -> usize {
        self.test_blocks.len()
    }

    pub fn realized_test_frac(&self) -> f64 {
        self.test.len() as f64 / self.n_rows as f64
    }
}

/// Cuts `n_rows` hourly rows into blocks of `block_hours` (the last block may
/// be shorter) and holds out `round(test_frac * n_blocks)` blocks chosen by a
/// seeded shuffle.
pub fn blocked_split(n_rows: usize, block_hours: usize, test_frac: f64, seed: u64) -> Result<BlockedSplit> {
    if block_hours == 0 {
        return Err(Error::invalid("block length must be positive"));
    }
    if !(0.0..=1.0).contains(&test_frac) {
        return Err(Error::invalid("test fraction must lie in [0, 1]"));
    }
    if n_rows < block_hours {
        return Err(Error::Degenerate(format!(
            "{n_rows} rows are shorter than one {block_hours}-hour block"
        )));
    }
    let n_blocks = n_rows.div_ceil(block_hours);
    let n_test = (test_frac * n_blocks as f64).round() as usize;
    let mut order: Vec<usize> = (0..n_blocks).collect();
    order.shuffle(&mut rng_for(seed, "gbt/blocked_split"));
    let mut test_blocks = vec![false; n_blocks];
    for &b in &order[..n_test] {
        test_blocks[b] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in 0..n_rows {
        if test_blocks[r / block_hours] {
            test.push(r);
        } else {
            train.push(r);
        }
    }
    Ok(BlockedSplit { block_hours, test_frac, seed, n_rows, test_blocks, train, test })
}
