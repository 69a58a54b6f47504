//! Block-partitioned vectors and the problem interface shared by all
//! algorithms.
//!
//! A decision vector is split into `N` blocks, one per agent. Every
//! algorithm in this crate manipulates whole blocks: a block is replaced,
//! never mutated in place, so snapshots can be shared read-only across
//! worker threads.

use crate::error::{Error, Result};

/// A decision vector partitioned into `N` contiguous blocks.
///
/// Block `i` has dimension `n_i`; the total dimension is the sum of the
/// block dimensions. Values are immutable once constructed; updates go
/// through [`BlockVector::replace_block`], which returns a new vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    blocks: Vec<Vec<f64>>,
}

impl BlockVector {
    /// Builds a block vector from per-block storage.
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Dimension("need at least one block".into()));
        }
        if let Some(i) = blocks.iter().position(|b| b.is_empty()) {
            return Err(Error::Dimension(format!("block {i} is empty")));
        }
        Ok(BlockVector { blocks })
    }

    /// Splits a flat vector into consecutive blocks of the given sizes.
    pub fn partition(flat: &[f64], sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total != flat.len() {
            return Err(Error::Dimension(format!(
                "sizes sum to {total} but flat vector has length {}",
                flat.len()
            )));
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Dimension("all block sizes must be >= 1".into()));
        }
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for &n in sizes {
            blocks.push(flat[offset..offset + n].to_vec());
            offset += n;
        }
        Ok(BlockVector { blocks })
    }

    /// Concatenates all blocks back into one flat vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Per-block dimensions `[n_1, ..., n_N]`.
    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    /// Returns a copy of `self` with block `i` replaced by `v`.
    ///
    /// `self` is left untouched; the composition `(v, x_{-i})` used by the
    /// per-block subproblems is expressed through this operation.
    pub fn replace_block(&self, i: usize, v: &[f64]) -> Result<Self> {
        if i >= self.blocks.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n_blocks: self.blocks.len(),
            });
        }
        if v.len() != self.blocks[i].len() {
            return Err(Error::Dimension(format!(
                "block {i} has dimension {} but replacement has length {}",
                self.blocks[i].len(),
                v.len()
            )));
        }
        let mut blocks = self.blocks.clone();
        blocks[i] = v.to_vec();
        Ok(BlockVector { blocks })
    }

    /// In-place block write for solver-internal working copies.
    pub(crate) fn set_block(&mut self, i: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.blocks[i].len());
        self.blocks[i].copy_from_slice(v);
    }
}

/// Whether a block subproblem minimizes the joint objective or only the
/// owning agent's cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostMode {
    /// Minimize the full joint objective `f(x_i, x_{-i})` per block.
    Joint,
    /// Minimize only the agent's own cost `f_i(x_i, x_{-i})` per block.
    Local,
}

impl std::fmt::Display for CostMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostMode::Joint => write!(f, "joint"),
            CostMode::Local => write!(f, "local"),
        }
    }
}

impl std::str::FromStr for CostMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(CostMode::Joint),
            "local" => Ok(CostMode::Local),
            other => Err(Error::Domain(format!("unknown cost mode '{other}'"))),
        }
    }
}

/// The abstract optimization problem: a smooth joint objective over a
/// block-separable feasible set.
///
/// `eval` and `block_grad` always describe the joint objective `f`; the
/// Proposition-1 descent check and the PVD synchronization step rely on
/// that pairing. A problem may route the per-block subproblems to a
/// different smooth cost (e.g. the agent-local cost of the resource
/// benchmark) by overriding `block_cost` / `block_cost_grad`.
///
/// Implementations must be shareable read-only across worker threads.
pub trait Problem: Sync {
    /// Per-block dimensions `[n_1, ..., n_N]`.
    fn dims(&self) -> Vec<usize>;

    /// The joint objective `f(x)`.
    fn eval(&self, x: &BlockVector) -> f64;

    /// Gradient of the joint objective with respect to block `i`,
    /// length `n_i`.
    fn block_grad(&self, i: usize, x: &BlockVector) -> Vec<f64>;

    /// Euclidean projection of `v` onto the feasible set of block `i`.
    fn project_block(&self, i: usize, v: &[f64]) -> Vec<f64>;

    /// Smooth part of block `i`'s subproblem. Defaults to the joint
    /// objective.
    fn block_cost(&self, _i: usize, x: &BlockVector) -> f64 {
        self.eval(x)
    }

    /// Gradient of [`Problem::block_cost`] with respect to block `i`.
    fn block_cost_grad(&self, i: usize, x: &BlockVector) -> Vec<f64> {
        self.block_grad(i, x)
    }

    /// True when block `i`'s feasible set is all of R^{n_i}.
    fn block_is_unconstrained(&self, _i: usize) -> bool {
        false
    }
}

/// One block's recorded movement in an outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStep {
    /// The step `h_i^k = x_i^k - x_i^{k-1}`.
    pub h: Vec<f64>,
    /// Euclidean norm of `h`.
    pub norm: f64,
    /// The direction `d_i^k = -grad_i f(x_i^k, x_{-i}^{k-1})`.
    pub neg_grad: Vec<f64>,
}

impl BlockStep {
    pub fn new(h: Vec<f64>, neg_grad: Vec<f64>) -> Self {
        let norm = norm2(&h);
        BlockStep { h, norm, neg_grad }
    }
}

/// Per-iteration record of every block's step and direction.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub blocks: Vec<BlockStep>,
}

impl StepRecord {
    pub fn max_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm).fold(0.0, f64::max)
    }
}

/// Euclidean norm, summed in index order.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Dot product, summed in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_slices_in_order() {
        let x = BlockVector::partition(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 2, 2]).unwrap();
        assert_eq!(x.blocks(), &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
    }

    #[test]
    fn partition_single_block() {
        let x = BlockVector::partition(&[7.0], &[1]).unwrap();
        assert_eq!(x.blocks(), &[vec![7.0]]);
    }

    #[test]
    fn partition_size_mismatch() {
        let err = BlockVector::partition(&[1.0, 2.0, 3.0], &[2, 2]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn replace_block_value_semantics() {
        let x = BlockVector::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = x.replace_block(1, &[9.0, 9.0]).unwrap();
        assert_eq!(y.blocks(), &[vec![1.0, 2.0], vec![9.0, 9.0]]);
        assert_eq!(x.blocks(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn replace_block_identity() {
        let x = BlockVector::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = x.replace_block(0, &[1.0, 2.0]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn replace_block_out_of_range() {
        let x = BlockVector::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(matches!(
            x.replace_block(2, &[0.0, 0.0]).unwrap_err(),
            Error::IndexOutOfRange { index: 2, n_blocks: 2 }
        ));
    }

    #[test]
    fn replace_block_length_mismatch() {
        let x = BlockVector::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            x.replace_block(0, &[0.0]).unwrap_err(),
            Error::Dimension(_)
        ));
    }

    #[test]
    fn flatten_partition_round_trip() {
        let x = BlockVector::new(vec![vec![1.0], vec![2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let y = BlockVector::partition(&x.flatten(), &x.dims()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn block_step_norm_matches() {
        let s = BlockStep::new(vec![3.0, 4.0], vec![0.0, 0.0]);
        assert_eq!(s.norm, 5.0);
    }
}
