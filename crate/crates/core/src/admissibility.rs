//! Block admissibility, deficiency signatures, the heredity congruence system
//! and exact counts of admissible words.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::gcd;
use crate::bset::BFamily;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::sieve::{self, EtaWindow};
use crate::Budget;

/// A finite 0/1 word. Positions are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block {
    bits: Vec<bool>,
}

impl Block {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Block { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Block {
            bits: vec![false; n],
        }
    }

    /// First bit is the most significant of `code`.
    pub fn from_code(code: u32, len: usize) -> Self {
        Block {
            bits: (0..len).map(|i| code >> (len - 1 - i) & 1 == 1).collect(),
        }
    }

    /// Word with ones exactly at the given 1-based positions.
    pub fn from_support(n: usize, support: &[u64]) -> Self {
        let mut bits = vec![false; n];
        for &p in support {
            bits[p as usize - 1] = true;
        }
        Block { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn support(&self) -> Vec<u64> {
        (0..self.bits.len())
            .filter(|&i| self.bits[i])
            .map(|i| i as u64 + 1)
            .collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Coordinatewise `self <= other`; lengths must match.
    pub fn dominated_by(&self, other: &Block) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Block {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidArgument(format!(
                    "block character {c:?} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Block::from_bits)
    }
}

impl Serialize for Block {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Deficiency `s_b = b - |supp mod b|` for each modulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YSignature {
    pub entries: Vec<(u64, u64)>,
}

impl YSignature {
    pub fn is_admissible(&self) -> bool {
        self.entries.iter().all(|&(_, s)| s >= 1)
    }

    pub fn in_y(&self) -> bool {
        self.entries.iter().all(|&(_, s)| s == 1)
    }

    pub fn deficiency(&self, b: u64) -> Option<u64> {
        self.entries.iter().find(|e| e.0 == b).map(|e| e.1)
    }
}

fn residues_hit(support: &[i64], b: u64) -> Vec<bool> {
    let mut hit = vec![false; b as usize];
    for &p in support {
        hit[p.rem_euclid(b as i64) as usize] = true;
    }
    hit
}

/// Signature of a block read at positions `1..=n`.
pub fn admissible(block: &Block, mods: &[u64]) -> YSignature {
    let support: Vec<i64> = block.support().into_iter().map(|p| p as i64).collect();
    signature_of_support(&support, mods)
}

pub fn signature_of_support(support: &[i64], mods: &[u64]) -> YSignature {
    let entries = mods
        .iter()
        .map(|&b| {
            let used = if (b as usize) > support.len() {
                // cheap path for moduli larger than the support
                let mut r: Vec<u64> = support
                    .iter()
                    .map(|p| p.rem_euclid(b as i64) as u64)
                    .collect();
                r.sort_unstable();
                r.dedup();
                r.len() as u64
            } else {
                residues_hit(support, b).iter().filter(|&&h| h).count() as u64
            };
            (b, b - used)
        })
        .collect();
    YSignature { entries }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TherWitness {
    /// `(b, n_b)` pairs in ascending order of `b`.
    Satisfiable {
        assignment: Vec<(u64, u64)>,
    },
    Unsatisfiable,
}

impl TherWitness {
    pub fn is_satisfiable(&self) -> bool {
        matches!(self, TherWitness::Satisfiable { .. })
    }
}

/// Finds `n_b` with `support ∩ (bZ + n_b) = ∅` and `gcd(b, b') | n_b - n_b'`.
///
/// Moduli sharing no factor with the rest form separate components and are
/// solved independently. Inside a component moduli are tried in descending
/// order, residues ascending.
pub fn ther_solve(support: &[i64], mods: &[u64], budget: &Budget) -> Result<TherWitness> {
    let mut sorted = mods.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut assignment = Vec::with_capacity(sorted.len());
    let mut nodes = 0u64;
    for comp in gcd_components(&sorted) {
        let mut order = comp.clone();
        order.sort_unstable_by(|a, b| b.cmp(a));
        let free: Vec<Vec<u64>> = order
            .iter()
            .map(|&b| {
                let hit = residues_hit(support, b);
                (0..b).filter(|&r| !hit[r as usize]).collect()
            })
            .collect();
        let mut chosen = Vec::with_capacity(order.len());
        if !backtrack(&order, &free, &mut chosen, &mut nodes, budget.nodes)? {
            return Ok(TherWitness::Unsatisfiable);
        }
        assignment.extend(order.iter().copied().zip(chosen));
    }
    assignment.sort_unstable();
    Ok(TherWitness::Satisfiable { assignment })
}

fn backtrack(
    order: &[u64],
    free: &[Vec<u64>],
    chosen: &mut Vec<u64>,
    nodes: &mut u64,
    limit: u64,
) -> Result<bool> {
    let i = chosen.len();
    if i == order.len() {
        return Ok(true);
    }
    for &r in &free[i] {
        *nodes += 1;
        if *nodes > limit {
            return Err(Error::BudgetExceeded(format!(
                "heredity search passed {limit} nodes"
            )));
        }
        let ok = (0..i).all(|j| {
            let g = gcd(order[i], order[j]);
            (r % g) == (chosen[j] % g)
        });
        if ok {
            chosen.push(r);
            if backtrack(order, free, chosen, nodes, limit)? {
                return Ok(true);
            }
            chosen.pop();
        }
    }
    Ok(false)
}

/// Connected components of the "shares a factor" graph, each ascending.
pub fn gcd_components(sorted: &[u64]) -> Vec<Vec<u64>> {
    let n = sorted.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    let join = |p: &mut [usize], i: usize, j: usize| {
        let (a, b) = (find(p, i), find(p, j));
        if a != b {
            p[a.max(b)] = a.min(b);
        }
    };
    if sorted.last().is_some_and(|&m| m <= 1 << 32) {
        // link through shared prime factors
        let mut owner: HashMap<u64, usize> = HashMap::new();
        for (i, &b) in sorted.iter().enumerate() {
            for (p, _) in crate::arith::factorize(b) {
                match owner.get(&p) {
                    Some(&j) => join(&mut parent, i, j),
                    None => {
                        owner.insert(p, i);
                    }
                }
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                if gcd(sorted[i], sorted[j]) > 1 {
                    join(&mut parent, i, j);
                }
            }
        }
    }
    let mut groups: Vec<Vec<u64>> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let g = *index.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(sorted[i]);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Smallest offset `k` such that the block matches `eta` on `[k+1, k+n]`.
    pub found_at: Option<u64>,
    /// True when the answer cannot change with a larger search bound.
    pub definitive: bool,
}

/// Searches offsets `k` in `[0, search_bound)`. Exact mode needs equality with
/// `eta[k+1..=k+n]`; dominated mode needs `block <= eta` coordinatewise.
pub fn eta_admissible_search(
    block: &Block,
    family: &BFamily,
    search_bound: u64,
    dominated: bool,
    budget: &Budget,
    par: Parallelism,
) -> Result<SearchResult> {
    if search_bound == 0 {
        return Err(Error::InvalidArgument(
            "search bound must be positive".into(),
        ));
    }
    let n = block.len() as u64;
    let window = sieve::sieve_window(family, 1, search_bound + n.max(1) - 1, par)?;
    let found_at = find_in_window(&window, block, dominated, search_bound);
    let exhaustive = family.is_explicit()
        && sieve::period_of(
            &family.elements(),
            &Budget {
                table_limit: u64::MAX,
                ..*budget
            },
        )
        .is_ok_and(|p| search_bound >= p);
    Ok(SearchResult {
        found_at,
        definitive: found_at.is_some() || exhaustive,
    })
}

/// Offset `k` (relative to `window.start - 1`) of the first match among the
/// first `limit` offsets.
pub fn find_in_window(
    window: &EtaWindow,
    block: &Block,
    dominated: bool,
    limit: u64,
) -> Option<u64> {
    let n = block.len() as u64;
    if n > window.len() {
        return None;
    }
    let support: Vec<u64> = block.support().into_iter().map(|p| p - 1).collect();
    let last = (window.len() - n).min(limit.saturating_sub(1));
    (0..=last).find(|&k| {
        if dominated {
            support.iter().all(|&p| window.bit(k + p))
        } else {
            (0..n).all(|i| window.bit(k + i) == block.bits()[i as usize])
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CountMode {
    AllAdmissible,
    EtaDominated,
    /// Required deficiency per listed modulus; unlisted moduli need deficiency 1.
    DeficiencyAtLeast {
        s: Vec<(u64, u64)>,
    },
}

/// Exact number of length-`n` words of the given kind for an explicit family.
pub fn count_admissible_blocks(
    mods: &[u64],
    n: usize,
    mode: &CountMode,
    budget: &Budget,
    par: Parallelism,
) -> Result<BigUint> {
    if n > budget.enum_n {
        return Err(Error::BudgetExceeded(format!(
            "word length {n} exceeds enumeration budget {}",
            budget.enum_n
        )));
    }
    match mode {
        CountMode::AllAdmissible => count_constrained(mods, n, &[], budget, par),
        CountMode::DeficiencyAtLeast { s } => count_constrained(mods, n, s, budget, par),
        CountMode::EtaDominated => count_dominated(mods, n, budget),
    }
}

/// Forward DP over positions; state is the hit mask of every modulus that can
/// still be violated.
fn count_constrained(
    mods: &[u64],
    n: usize,
    required: &[(u64, u64)],
    budget: &Budget,
    par: Parallelism,
) -> Result<BigUint> {
    let mut all: Vec<u64> = mods.to_vec();
    all.extend(required.iter().map(|r| r.0));
    all.sort_unstable();
    all.dedup();
    // (modulus, largest allowed number of hit residues)
    let mut tracked: Vec<(u64, u32)> = Vec::new();
    for &b in &all {
        let s = required.iter().find(|r| r.0 == b).map_or(1, |r| r.1);
        if s > b {
            return Ok(BigUint::zero());
        }
        let cap = b - s;
        if cap >= n as u64 {
            continue; // never binding
        }
        if b > 64 {
            return Err(Error::BudgetExceeded(format!(
                "modulus {b} too large for mask state"
            )));
        }
        tracked.push((b, cap as u32));
    }
    if tracked.is_empty() {
        return Ok(BigUint::one() << n);
    }
    // split on the first position so both halves can run in parallel
    let starts: Vec<bool> = if n == 0 { vec![] } else { vec![false, true] };
    if starts.is_empty() {
        return Ok(BigUint::one());
    }
    let parts = par::map_collect(par, starts, |first| dp_from(&tracked, n, first, budget));
    let mut total = BigUint::zero();
    for p in parts {
        total += p?;
    }
    Ok(total)
}

fn dp_from(tracked: &[(u64, u32)], n: usize, first: bool, budget: &Budget) -> Result<BigUint> {
    let mut layer: HashMap<Vec<u64>, BigUint> = HashMap::new();
    let init = vec![0u64; tracked.len()];
    match step(tracked, &init, 1, first) {
        Some(s) => {
            layer.insert(s, BigUint::one());
        }
        None => return Ok(BigUint::zero()),
    }
    for pos in 2..=n as u64 {
        let mut next: HashMap<Vec<u64>, BigUint> = HashMap::with_capacity(layer.len() * 2);
        for (state, count) in &layer {
            for bit in [false, true] {
                if let Some(s) = step(tracked, state, pos, bit) {
                    *next.entry(s).or_insert_with(BigUint::zero) += count;
                }
            }
        }
        if next.len() as u64 > budget.table_limit {
            return Err(Error::BudgetExceeded(format!("{} DP states", next.len())));
        }
        layer = next;
    }
    Ok(layer.into_values().sum())
}

fn step(tracked: &[(u64, u32)], state: &[u64], pos: u64, bit: bool) -> Option<Vec<u64>> {
    if !bit {
        return Some(state.to_vec());
    }
    let mut s = state.to_vec();
    for (i, &(b, cap)) in tracked.iter().enumerate() {
        s[i] |= 1u64 << (pos % b);
        if s[i].count_ones() > cap {
            return None;
        }
    }
    Some(s)
}

/// Distinct words dominated by some `eta[k+1..=k+n]`, offsets over one period.
fn count_dominated(mods: &[u64], n: usize, budget: &Budget) -> Result<BigUint> {
    if n > 64 {
        return Err(Error::BudgetExceeded(
            "dominated counting needs n <= 64".into(),
        ));
    }
    if n == 0 {
        return Ok(BigUint::one());
    }
    let period = sieve::period_of(mods, budget)?;
    let w = sieve::sieve_moduli(mods, 1, period + n as u64 - 1, Parallelism::Sequential)?;
    let mut masks: Vec<u64> = (0..period)
        .map(|k| (0..n as u64).fold(0u64, |m, i| m | (w.bit(k + i) as u64) << i))
        .collect();
    masks = maximal(masks);
    let mut memo: HashMap<(usize, Vec<u64>), BigUint> = HashMap::new();
    let mut nodes = 0u64;
    dominated_dfs(0, n, masks, &mut memo, &mut nodes, budget.nodes)
}

/// Keeps the inclusion-maximal masks, sorted.
fn maximal(mut masks: Vec<u64>) -> Vec<u64> {
    masks.sort_unstable();
    masks.dedup();
    masks.sort_unstable_by_key(|m| std::cmp::Reverse(m.count_ones()));
    let mut kept: Vec<u64> = Vec::new();
    for m in masks {
        if !kept.iter().any(|&k| k & m == m) {
            kept.push(m);
        }
    }
    kept.sort_unstable();
    kept
}

fn dominated_dfs(
    pos: usize,
    n: usize,
    cands: Vec<u64>,
    memo: &mut HashMap<(usize, Vec<u64>), BigUint>,
    nodes: &mut u64,
    limit: u64,
) -> Result<BigUint> {
    if cands.is_empty() {
        return Ok(BigUint::zero());
    }
    if pos == n {
        return Ok(BigUint::one());
    }
    if cands.len() == 1 {
        return Ok(BigUint::one() << cands[0].count_ones());
    }
    let key = (pos, cands);
    if let Some(v) = memo.get(&key) {
        return Ok(v.clone());
    }
    *nodes += 1;
    if *nodes > limit {
        return Err(Error::BudgetExceeded(format!(
            "dominated count passed {limit} nodes"
        )));
    }
    let bit = 1u64 << pos;
    let zero = maximal(key.1.iter().map(|&m| m & !bit).collect());
    let one = maximal(
        key.1
            .iter()
            .filter(|&&m| m & bit != 0)
            .map(|&m| m & !bit)
            .collect(),
    );
    let total = dominated_dfs(pos + 1, n, zero, memo, nodes, limit)?
        + dominated_dfs(pos + 1, n, one, memo, nodes, limit)?;
    memo.insert(key, total.clone());
    Ok(total)
}

/// `log2` of a positive big integer.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().log2() + shift as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub n: usize,
    pub count: String,
    pub estimate: f64,
}

/// Plug-in estimates `(1/n) log2 count(n)` for an explicit family.
pub fn entropy_estimate(
    mods: &[u64],
    n_grid: &[usize],
    mode: &CountMode,
    budget: &Budget,
    par: Parallelism,
) -> Result<Vec<EntropyPoint>> {
    n_grid
        .iter()
        .map(|&n| {
            let c = count_admissible_blocks(mods, n, mode, budget, par)?;
            let estimate = if n == 0 { 0.0 } else { log2_big(&c) / n as f64 };
            Ok(EntropyPoint {
                n,
                count: c.to_string(),
                estimate,
            })
        })
        .collect()
}

/// Lower bound `max_k |supp eta[k+1..=k+n]| / n` over a sieved window; every
/// subset of one window support is dominated, so `2^|supp|` words are counted.
pub fn entropy_lower_bound(
    family: &BFamily,
    n: usize,
    window_len: u64,
    par: Parallelism,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "word length must be positive".into(),
        ));
    }
    let w = sieve::sieve_window(family, 1, window_len + n as u64 - 1, par)?;
    let mut ones = (0..n as u64).filter(|&i| w.bit(i)).count();
    let mut best = ones;
    for k in 1..window_len {
        ones = ones + w.bit(k + n as u64 - 1) as usize - w.bit(k - 1) as usize;
        best = best.max(ones);
    }
    Ok(best as f64 / n as f64)
}
