//! Segmented sieve for `eta` on integer windows, plus gap, zero-run and block
//! frequency statistics.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::admissibility::Block;
use crate::arith::lcm_big;
use crate::bset::BFamily;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::ratio::{self, Rational};
use crate::Budget;

/// Bits per sieving chunk.
pub const CHUNK_BITS: u64 = 1 << 20;

/// `eta` on `[start, start + len)`; bit `i` is `eta(start + i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtaWindow {
    pub start: i64,
    len: u64,
    words: Vec<u64>,
    /// The truncation of the family that was sieved.
    pub moduli: Vec<u64>,
}

impl EtaWindow {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn end(&self) -> i64 {
        self.start + self.len as i64
    }

    #[inline]
    pub fn bit(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    /// `eta(n)` when `n` lies in the window.
    pub fn at(&self, n: i64) -> Option<bool> {
        (n >= self.start && n < self.end()).then(|| self.bit((n - self.start) as u64))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Absolute positions of the ones, ascending.
    pub fn ones(&self) -> impl Iterator<Item = i64> + '_ {
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let base = self.start + 64 * wi as i64;
            BitIter(w).map(move |b| base + b as i64)
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    /// `eta` on `[n, n + len)`, which must lie inside the window.
    pub fn block_at(&self, n: i64, len: usize) -> Block {
        let off = (n - self.start) as u64;
        assert!(
            n >= self.start && off + len as u64 <= self.len,
            "block outside window"
        );
        Block::from_bits((0..len as u64).map(|i| self.bit(off + i)).collect())
    }

    /// Packed little-endian bytes, `ceil(len / 8)` of them.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8) as usize;
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect()
    }

    /// Wraps raw words (bits past `len` are cleared).
    pub fn from_words(start: i64, len: u64, mut words: Vec<u64>, moduli: Vec<u64>) -> Self {
        words.resize(len.div_ceil(64) as usize, 0);
        if len % 64 != 0 {
            let last = words.len() - 1;
            words[last] &= (1u64 << (len % 64)) - 1;
        }
        EtaWindow {
            start,
            len,
            words,
            moduli,
        }
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u32;
    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let t = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(t)
    }
}

/// Elements of the family that can divide a nonzero integer of the window.
pub fn relevant_moduli(family: &BFamily, start: i64, len: u64) -> Vec<u64> {
    let last = start as i128 + len as i128 - 1;
    let reach = (start as i128)
        .unsigned_abs()
        .max(last.unsigned_abs())
        .max(1);
    family.truncate(reach.min(u64::MAX as u128) as u64)
}

pub fn sieve_window(family: &BFamily, start: i64, len: u64, par: Parallelism) -> Result<EtaWindow> {
    let mods = relevant_moduli(family, start, len);
    sieve_moduli(&mods, start, len, par)
}

/// Sieves an explicit modulus list. Position `0` is always marked.
pub fn sieve_moduli(mods: &[u64], start: i64, len: u64, par: Parallelism) -> Result<EtaWindow> {
    if len == 0 {
        return Err(Error::InvalidArgument(
            "window length must be positive".into(),
        ));
    }
    if (start as i128 + len as i128) > i64::MAX as i128 {
        return Err(Error::InvalidArgument("window end overflows".into()));
    }
    let mut words = vec![u64::MAX; len.div_ceil(64) as usize];
    let chunk_words = (CHUNK_BITS / 64) as usize;
    par::for_each_chunk_mut(par, &mut words, chunk_words, |ci, chunk| {
        let lo = start as i128 + ci as i128 * CHUNK_BITS as i128;
        let nbits = (chunk.len() as u64 * 64).min((len as i128 - (lo - start as i128)) as u64);
        mark_chunk(mods, lo, nbits, chunk);
    });
    Ok(EtaWindow::from_words(start, len, words, mods.to_vec()))
}

fn mark_chunk(mods: &[u64], lo: i128, nbits: u64, chunk: &mut [u64]) {
    let hi = lo + nbits as i128;
    for &b in mods {
        let mut i = (-lo).rem_euclid(b as i128) as u64;
        while i < nbits {
            chunk[(i / 64) as usize] &= !(1u64 << (i % 64));
            i += b;
        }
    }
    // zero is divisible by every modulus, including when the list is empty
    if lo <= 0 && 0 < hi && !mods.is_empty() {
        let i = (-lo) as u64;
        chunk[(i / 64) as usize] &= !(1u64 << (i % 64));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub positions: Vec<i64>,
    pub gaps: Vec<u64>,
    /// Entry `K`: max over `j` of `min(gaps[j..=j+K])`.
    pub min_window_gaps: Vec<u64>,
}

pub fn gap_statistics(window: &EtaWindow, k_max: usize) -> Result<GapReport> {
    let positions: Vec<i64> = window.ones().collect();
    if positions.len() < k_max + 2 {
        return Err(Error::InsufficientFreePositions {
            found: positions.len(),
            needed: k_max + 2,
        });
    }
    let gaps: Vec<u64> = positions.windows(2).map(|w| (w[1] - w[0]) as u64).collect();
    let min_window_gaps = max_min_gaps(positions.iter().copied(), k_max);
    Ok(GapReport {
        positions,
        gaps,
        min_window_gaps,
    })
}

/// Streaming form of the gap statistic over ascending positions. Entry `K` is
/// zero when fewer than `K + 1` gaps were seen.
pub fn max_min_gaps(positions: impl IntoIterator<Item = i64>, k_max: usize) -> Vec<u64> {
    let mut best = vec![0u64; k_max + 1];
    // one monotone deque of (index, gap) per window size
    let mut deques: Vec<VecDeque<(usize, u64)>> = vec![VecDeque::new(); k_max + 1];
    let mut prev: Option<i64> = None;
    let mut idx = 0usize;
    for p in positions {
        if let Some(q) = prev {
            let g = (p - q) as u64;
            for (k, dq) in deques.iter_mut().enumerate() {
                while dq.back().is_some_and(|&(_, v)| v >= g) {
                    dq.pop_back();
                }
                dq.push_back((idx, g));
                if dq.front().is_some_and(|&(i, _)| i + k + 1 <= idx) {
                    dq.pop_front();
                }
                if idx >= k {
                    best[k] = best[k].max(dq.front().unwrap().1);
                }
            }
            idx += 1;
        }
        prev = Some(p);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroBlockScan {
    pub found: bool,
    pub first_start: Option<i64>,
    pub occurrences: u64,
    /// Largest distance between consecutive run starts (runs may overlap).
    pub max_gap: Option<u64>,
}

pub fn zero_block_scan(window: &EtaWindow, k: usize) -> Result<ZeroBlockScan> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "zero-run length must be at least 1".into(),
        ));
    }
    let mut run = 0usize;
    let mut first = None;
    let mut last: Option<i64> = None;
    let mut occurrences = 0;
    let mut max_gap: Option<u64> = None;
    for i in 0..window.len() {
        if window.bit(i) {
            run = 0;
            continue;
        }
        run += 1;
        if run >= k {
            let s = window.start + i as i64 + 1 - k as i64;
            occurrences += 1;
            if let Some(l) = last {
                let g = (s - l) as u64;
                max_gap = Some(max_gap.map_or(g, |m| m.max(g)));
            }
            first.get_or_insert(s);
            last = Some(s);
        }
    }
    Ok(ZeroBlockScan {
        found: first.is_some(),
        first_start: first,
        occurrences,
        max_gap,
    })
}

/// Length of the longest zero run, and whether a run touches a window edge.
pub fn longest_zero_run(window: &EtaWindow) -> (u64, bool) {
    let (mut best, mut run, mut edge) = (0u64, 0u64, false);
    for i in 0..window.len() {
        if window.bit(i) {
            run = 0;
        } else {
            run += 1;
            if run > best {
                best = run;
                edge = i + 1 == run || i + 1 == window.len();
            } else if run == best && i + 1 == window.len() {
                edge = true;
            }
        }
    }
    (best, edge)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockFrequency {
    pub block: Block,
    pub count: u64,
    /// Number of block positions counted.
    pub window_length: u64,
    #[serde(with = "crate::ratio")]
    pub frequency: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockFrequencies {
    pub empirical: Vec<BlockFrequency>,
    /// Residue count over one period; only for explicit finite families.
    pub exact: Option<Vec<BlockFrequency>>,
}

pub const MAX_BLOCK_LENGTH: usize = 24;

/// Occurrence counts of every length-`l` word read at positions `[start, start + len)`
/// of the window (each start needs `l` bits). Keyed by code, first bit most significant.
pub fn count_blocks(window: &EtaWindow, l: usize) -> BTreeMap<u32, u64> {
    let mut out = BTreeMap::new();
    if (l as u64) > window.len() || l == 0 {
        return out;
    }
    let mask = if l == 32 { u32::MAX } else { (1u32 << l) - 1 };
    let small = l <= 16;
    let mut table = if small {
        vec![0u64; 1 << l]
    } else {
        Vec::new()
    };
    let mut code = 0u32;
    for i in 0..window.len() {
        code = ((code << 1) | window.bit(i) as u32) & mask;
        if i + 1 >= l as u64 {
            if small {
                table[code as usize] += 1;
            } else {
                *out.entry(code).or_insert(0) += 1;
            }
        }
    }
    if small {
        for (c, &n) in table.iter().enumerate() {
            if n > 0 {
                out.insert(c as u32, n);
            }
        }
    }
    out
}

fn to_frequencies(counts: &BTreeMap<u32, u64>, l: usize, total: u64) -> Vec<BlockFrequency> {
    counts
        .iter()
        .map(|(&code, &count)| BlockFrequency {
            block: Block::from_code(code, l),
            count,
            window_length: total,
            frequency: ratio::ratio(count, total.max(1)),
        })
        .collect()
}

/// Empirical frequencies over the windows (block starts inside each window),
/// plus exact Mirsky frequencies when the family is explicit with a table-sized lcm.
pub fn block_frequencies(
    family: &BFamily,
    block_length: usize,
    windows: &[(i64, u64)],
    budget: &Budget,
    par: Parallelism,
) -> Result<BlockFrequencies> {
    if block_length == 0 || block_length > MAX_BLOCK_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "block length must be in 1..={MAX_BLOCK_LENGTH}"
        )));
    }
    let mut agg: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total = 0u64;
    for &(start, len) in windows {
        let w = sieve_window(family, start, len + block_length as u64 - 1, par)?;
        for (c, n) in count_blocks(&w, block_length) {
            *agg.entry(c).or_insert(0) += n;
        }
        total += len;
    }
    let exact = if family.is_explicit() {
        let mods = family.elements();
        match exact_block_counts(&mods, block_length, budget, par) {
            Ok((counts, period)) => Some(to_frequencies(&counts, block_length, period)),
            Err(Error::TableTooLarge { .. }) | Err(Error::StepOverflowBudget { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(BlockFrequencies {
        empirical: to_frequencies(&agg, block_length, total),
        exact,
    })
}

/// Counts of each block over one full period `[1, lcm]` of an explicit family.
pub fn exact_block_counts(
    mods: &[u64],
    block_length: usize,
    budget: &Budget,
    par: Parallelism,
) -> Result<(BTreeMap<u32, u64>, u64)> {
    let period = period_of(mods, budget)?;
    let w = sieve_moduli(mods, 1, period + block_length as u64 - 1, par)?;
    Ok((count_blocks(&w, block_length), period))
}

/// The lcm of an explicit list as a table-sized integer (`1` for the empty list).
pub fn period_of(mods: &[u64], budget: &Budget) -> Result<u64> {
    let l: BigUint = lcm_big(mods);
    let bits = l.bits();
    if bits > budget.lcm_bits as u64 {
        return Err(Error::StepOverflowBudget {
            step_bits: bits,
            budget_bits: budget.lcm_bits,
        });
    }
    let l = l.to_u64().expect("within 64 bits");
    if l > budget.table_limit {
        return Err(Error::TableTooLarge {
            size: l as u128,
            limit: budget.table_limit,
        });
    }
    Ok(l)
}

/// Frequency of ones in the window.
pub fn ones_frequency(window: &EtaWindow) -> f64 {
    window.count_ones() as f64 / window.len() as f64
}

/// Exact frequency of ones as a rational.
pub fn ones_ratio(window: &EtaWindow) -> Rational {
    ratio::ratio(window.count_ones(), window.len())
}
