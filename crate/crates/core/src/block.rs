//! Block partitions of the flattened variable and the feasible blocked iterate.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous, disjoint, covering partition of `0..n` into `s >= 1` blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    ranges: Vec<Range<usize>>,
}

impl BlockPartition {
    /// Partition from consecutive block sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("a partition needs at least one block"));
        }
        let mut ranges = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for (b, &len) in sizes.iter().enumerate() {
            if len == 0 {
                return Err(Error::invalid(format!("block {b} is empty")));
            }
            ranges.push(start..start + len);
            start += len;
        }
        Ok(Self { ranges })
    }

    /// `count` blocks of equal size `len`.
    pub fn uniform(count: usize, len: usize) -> Result<Self> {
        Self::from_sizes(&vec![len; count])
    }

    /// Explicit ranges; they must tile `0..n` in order.
    pub fn from_ranges(ranges: Vec<Range<usize>>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("a partition needs at least one block"));
        }
        let mut expected = 0;
        for (b, r) in ranges.iter().enumerate() {
            if r.start != expected {
                return Err(Error::invalid(format!(
                    "block {b} starts at {} but previous block ends at {expected}",
                    r.start
                )));
            }
            if r.is_empty() {
                return Err(Error::invalid(format!("block {b} is empty")));
            }
            expected = r.end;
        }
        Ok(Self { ranges })
    }

    pub fn block_count(&self) -> usize {
        self.ranges.len()
    }

    /// Total number of coordinates `n`.
    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.ranges[block].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn block_len(&self, block: usize) -> usize {
        self.ranges[block].len()
    }

    /// Block owning coordinate `i`.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.contains(&i))
    }
}

/// Nonnegative iterate `x` together with its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedIterate {
    values: Vec<f64>,
    partition: BlockPartition,
}

impl BlockedIterate {
    pub fn new(values: Vec<f64>, partition: BlockPartition) -> Result<Self> {
        if values.len() != partition.dim() {
            return Err(Error::dims(format!(
                "iterate has {} values, partition covers {}",
                values.len(),
                partition.dim()
            )));
        }
        check_feasible(&values)?;
        Ok(Self { values, partition })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn block(&self, b: usize) -> &[f64] {
        &self.values[self.partition.range(b)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces block `b`; the new values must be feasible.
    pub fn set_block(&mut self, b: usize, values: &[f64]) -> Result<()> {
        let range = self.partition.range(b);
        if values.len() != range.len() {
            return Err(Error::dims(format!(
                "block {b} has {} coordinates, got {}",
                range.len(),
                values.len()
            )));
        }
        check_feasible(values)?;
        self.values[range].copy_from_slice(values);
        Ok(())
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::dims(format!(
                "iterate has {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        check_feasible(values)?;
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_feasible(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        Some(i) => Err(Error::invalid(format!(
            "coordinate {i} is infeasible: {}",
            values[i]
        ))),
        None => Ok(()),
    }
}
