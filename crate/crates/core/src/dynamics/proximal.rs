use serde::{Deserialize, Serialize};

use crate::arith::gcd;
#[cfg(test)]
use crate::arith::modulo;
use crate::bset::{greedy_coprime, BFamily, Descriptor};
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::progressions::{intersect, Progression};
use crate::sieve::{self, zero_block_scan};
use crate::Budget;

#[derive(Debug, Clone, Copy)]
pub struct ProximalityOptions {
    /// Symbolic families are cut at this bound.
    pub truncation: u64,
    /// Longest zero run and `T_prox` tuple size looked for.
    pub k_max: usize,
    /// Sieve window `[1, N]` scanned for zero runs.
    pub scan_window: u64,
    pub budget: Budget,
    pub par: Parallelism,
}

impl Default for ProximalityOptions {
    fn default() -> Self {
        ProximalityOptions {
            truncation: 10_000,
            k_max: 4,
            scan_window: 1_000_000,
            budget: Budget::default(),
            par: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroBlockEvidence {
    pub k: usize,
    /// First start of a run of `k` zeros in the scan window.
    pub scan_start: Option<i64>,
    /// Start placed by congruences on `k` coprime moduli, with their product.
    pub crt_start: Option<u64>,
    pub crt_bound: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TProxEvidence {
    pub k: usize,
    /// `b_1..b_k` with `gcd(b_i, b_j) | j - i`.
    pub witness: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Proximal,
    NotProximal,
    /// All finite-scale evidence points to proximality; not a proof.
    ProximalAtTruncation,
    UndecidedAtTruncation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProximalityVerdict {
    pub truncation: Vec<u64>,
    pub zero_blocks: Vec<ZeroBlockEvidence>,
    pub t_prox: Vec<TProxEvidence>,
    pub coprime_subset: Vec<u64>,
    /// A class `dZ + r` inside `F_B`, when one is known.
    pub free_progression: Option<Progression>,
    pub overall: Overall,
    pub reason: String,
}

/// Scales of the infinite leaves (primes, prime squares) of a descriptor.
fn infinite_leaf_scales(d: &Descriptor, scale: u64, out: &mut Vec<u64>) {
    match d {
        Descriptor::Explicit { .. } => {}
        Descriptor::Primes { .. } | Descriptor::SquaresOfPrimes { .. } => out.push(scale),
        Descriptor::Scaled { c, base, .. } => {
            infinite_leaf_scales(base, scale.saturating_mul(*c), out)
        }
        Descriptor::Union { parts } => parts
            .iter()
            .for_each(|p| infinite_leaf_scales(p, scale, out)),
        Descriptor::Sifted { base, .. } => infinite_leaf_scales(base, scale, out),
    }
}

pub fn proximality_suite(
    family: &BFamily,
    opts: &ProximalityOptions,
) -> Result<ProximalityVerdict> {
    let explicit = family.is_explicit();
    let truncation = if explicit {
        family.elements()
    } else {
        family.truncate(opts.truncation)
    };
    if truncation.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let coprime_subset = greedy_coprime(&truncation);

    let scan = sieve::sieve_moduli(
        &truncation
            .iter()
            .copied()
            .filter(|&b| b <= opts.scan_window)
            .collect::<Vec<_>>(),
        1,
        opts.scan_window,
        opts.par,
    )?;
    let mut zero_blocks = Vec::with_capacity(opts.k_max);
    for k in 1..=opts.k_max {
        let z = zero_block_scan(&scan, k)?;
        let (crt_start, crt_bound) = crt_zero_run(&coprime_subset, k);
        zero_blocks.push(ZeroBlockEvidence {
            k,
            scan_start: z.first_start,
            crt_start,
            crt_bound,
        });
    }

    let mut t_prox = Vec::with_capacity(opts.k_max);
    let candidates: Vec<u64> = truncation.iter().copied().take(512).collect();
    for k in 1..=opts.k_max {
        let mut nodes = 0u64;
        let witness = t_prox_search(&candidates, k, &mut nodes, opts.budget.nodes);
        t_prox.push(TProxEvidence { k, witness });
    }

    let (free_progression, overall, reason) = if truncation[0] == 1 {
        (
            None,
            Overall::Proximal,
            "1 in B: eta is identically zero".to_string(),
        )
    } else if explicit {
        let (d, r) = max_equicontinuous_period(&truncation, &opts.budget)?;
        (
            Some(Progression::new(d, r as i128)),
            Overall::NotProximal,
            format!("finite B: F_B contains {d}Z+{r}"),
        )
    } else {
        let mut scales = Vec::new();
        infinite_leaf_scales(family.descriptor(), 1, &mut scales);
        if scales.iter().all(|&c| c > 1) {
            let mut qs: Vec<u64> = scales.clone();
            qs.extend(
                family
                    .elements()
                    .into_iter()
                    .filter(|b| !scales.iter().any(|c| b % c == 0)),
            );
            qs.sort_unstable();
            qs.dedup();
            let shown: Vec<String> = qs.iter().take(8).map(u64::to_string).collect();
            (
                None,
                Overall::NotProximal,
                format!(
                    "B lies in a finite union of qZ with q > 1 (q in {{{}{}}})",
                    shown.join(","),
                    if qs.len() > 8 { ",..." } else { "" }
                ),
            )
        } else if coprime_subset.len() >= opts.k_max
            && zero_blocks
                .iter()
                .all(|z| z.scan_start.is_some() || z.crt_start.is_some())
            && t_prox.iter().all(|t| t.witness.is_some())
        {
            (
                None,
                Overall::ProximalAtTruncation,
                format!(
                    "coprime subset of size {} and zero runs up to {}",
                    coprime_subset.len(),
                    opts.k_max
                ),
            )
        } else {
            (
                None,
                Overall::UndecidedAtTruncation,
                "evidence incomplete at this truncation".to_string(),
            )
        }
    };
    Ok(ProximalityVerdict {
        truncation,
        zero_blocks,
        t_prox,
        coprime_subset,
        free_progression,
        overall,
        reason,
    })
}

/// Solves `n = -i mod c_{i+1}` for the first `k` coprime moduli so `n..n+k-1` are all in `M_B`.
fn crt_zero_run(coprime: &[u64], k: usize) -> (Option<u64>, Option<u64>) {
    if coprime.len() < k {
        return (None, None);
    }
    let ps: Vec<Progression> = coprime[..k]
        .iter()
        .enumerate()
        .map(|(i, &c)| Progression::new(c, -(i as i128)))
        .collect();
    match intersect(&ps) {
        Ok(Some(p)) => {
            // 0 is divisible by everything; report the first positive solution
            let start = if p.offset == 0 { p.step } else { p.offset };
            (Some(start), Some(p.step))
        }
        _ => (None, None),
    }
}

fn t_prox_search(cands: &[u64], k: usize, nodes: &mut u64, limit: u64) -> Option<Vec<u64>> {
    fn go(cands: &[u64], k: usize, acc: &mut Vec<u64>, nodes: &mut u64, limit: u64) -> bool {
        let i = acc.len();
        if i == k {
            return true;
        }
        for &b in cands {
            *nodes += 1;
            if *nodes > limit {
                return false;
            }
            if (0..i).all(|j| (i - j) as u64 % gcd(acc[j], b) == 0) {
                acc.push(b);
                if go(cands, k, acc, nodes, limit) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut acc = Vec::with_capacity(k);
    go(cands, k, &mut acc, nodes, limit).then_some(acc)
}

/// Smallest `d` with some class `dZ + r` inside `F_B`, and the smallest such `r`.
pub fn max_equicontinuous_period(mods: &[u64], budget: &Budget) -> Result<(u64, u64)> {
    let l = sieve::period_of(mods, budget)?;
    let w = sieve::sieve_moduli(mods, 0, l, Parallelism::Sequential)?;
    let mut free = w.to_bools();
    if mods.is_empty() {
        free[0] = true;
    }
    for d in crate::arith::divisors(l) {
        for r in 0..d {
            if (r..l).step_by(d as usize).all(|n| free[n as usize]) {
                return Ok((d, r));
            }
        }
    }
    Err(Error::NoFreeProgression)
}

/// Smallest period of `eta` for an explicit family: shrinks `lcm` by prime
/// factors while the quotient is still a period.
pub fn minimal_period(mods: &[u64], budget: &Budget) -> Result<u64> {
    let l = sieve::period_of(mods, budget)?;
    let w = sieve::sieve_moduli(mods, 1, 2 * l, Parallelism::Sequential)?;
    let is_period = |d: u64| (0..l).all(|i| w.bit(i) == w.bit(i + d));
    let mut d = l;
    for (p, _) in crate::arith::factorize(l) {
        while d % p == 0 && is_period(d / p) {
            d /= p;
        }
    }
    Ok(d)
}
