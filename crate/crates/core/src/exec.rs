//! Execution strategy for the data-parallel sweeps.
//!
//! Every sweep in the crate is expressed as a map over fixed-size blocks of
//! an index range followed by a reduction performed sequentially in block
//! order. The block partition does not depend on the number of worker
//! threads, so floating-point reductions are bit-identical across thread
//! counts and between the sequential and parallel paths.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Default block length for profile sweeps.
pub const BLOCK: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls
    /// back to the sequential path.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over consecutive blocks of `0..len`. Results come back in
    /// block order.
    pub fn map_blocks<T, F>(self, len: usize, block: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let block = block.max(1);
        let count = len.div_ceil(block);
        let range = |b: usize| b * block..((b + 1) * block).min(len);
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..count).into_par_iter().map(|b| f(range(b))).collect()
            }
            _ => (0..count).map(|b| f(range(b))).collect(),
        }
    }

    /// Maps `f` over every index of `0..len`, preserving order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..len).into_par_iter().map(f).collect()
            }
            _ => (0..len).map(f).collect(),
        }
    }

    /// Blocked sum of `f(i)` over `0..len` with a fixed reduction order.
    pub fn sum_f64<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        self.map_blocks(len, BLOCK, |r| r.map(&f).sum::<f64>())
            .into_iter()
            .sum()
    }

    /// Sum of integer contributions; order is irrelevant for exact values.
    pub fn sum_i128<F>(self, len: usize, f: F) -> i128
    where
        F: Fn(usize) -> i128 + Sync + Send,
    {
        self.map_blocks(len, BLOCK, |r| r.map(&f).sum::<i128>())
            .into_iter()
            .sum()
    }
}
