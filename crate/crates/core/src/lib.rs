//! Computable combinatorics of B-free integers.
//!
//! `F_B` is the set of integers divisible by no element of `B`, `M_B` its
//! complement and `eta` the two-sided 0/1 indicator of `F_B`. Note that `0` lies
//! in `M_B` for every nonempty `B`.

pub mod abundant;
pub mod admissibility;
pub mod arith;
pub mod bset;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod par;
pub mod progressions;
pub mod ratio;
pub mod sieve;
pub mod taut;

pub use admissibility::{Block, YSignature};
pub use bset::{BFamily, Descriptor};
pub use error::{Error, Result};
pub use par::Parallelism;
pub use ratio::Rational;
pub use sieve::EtaWindow;

/// Resource limits shared by the exact routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest allowed lcm, in bits.
    pub lcm_bits: u32,
    /// Largest residue table (one entry per residue mod the lcm).
    pub table_limit: u64,
    /// Largest word length for exact block counting.
    pub enum_n: usize,
    /// Node budget for backtracking searches.
    pub nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            lcm_bits: 64,
            table_limit: 1 << 27,
            enum_n: 28,
            nodes: 50_000_000,
        }
    }
}
