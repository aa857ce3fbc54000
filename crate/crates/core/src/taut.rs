//! Taut reduction of families whose infinite blocks carry Behrend flags, and
//! empirical comparison of block frequencies.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bset::{BFamily, Descriptor};
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::sieve::{count_blocks, sieve_window};
use crate::Block;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TautStep {
    pub c: u64,
    /// The flagged block(s) whose quotient by `c` is Behrend.
    pub removed: Vec<Descriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", content = "n", rename_all = "snake_case")]
pub enum StoppedAt {
    /// `1` is in `B`; the output is `{1}`.
    Step0,
    /// Stopped after `n` replacement steps (`0` when the input is already taut).
    Step(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TautReduction {
    pub input: BFamily,
    pub steps: Vec<TautStep>,
    pub output: BFamily,
    pub stopped_at: StoppedAt,
}

struct Flagged {
    scale: u64,
    node: Descriptor,
}

/// Collects `Behrend = true` blocks that survive the enclosing sifts, and checks
/// that every infinite leaf sits under some flag.
fn walk(
    d: &Descriptor,
    scale: u64,
    flagged_above: bool,
    avoid: &[u64],
    out: &mut Vec<Flagged>,
) -> Result<()> {
    match d {
        Descriptor::Explicit { .. } => Ok(()),
        Descriptor::Primes { .. } | Descriptor::SquaresOfPrimes { .. } => {
            if flagged_above {
                Ok(())
            } else {
                Err(Error::MissingBehrendFlag(serde_json::to_string(d).unwrap()))
            }
        }
        Descriptor::Scaled { c, behrend, base } => {
            let s = scale.saturating_mul(*c);
            match behrend {
                None if !is_finite(base) => {
                    Err(Error::MissingBehrendFlag(serde_json::to_string(d).unwrap()))
                }
                _ => {
                    // a sift by a divisor of the scale empties the block
                    if *behrend == Some(true) && !avoid.iter().any(|a| s % a == 0) {
                        out.push(Flagged {
                            scale: s,
                            node: d.clone(),
                        });
                    }
                    walk(base, s, flagged_above || behrend.is_some(), avoid, out)
                }
            }
        }
        Descriptor::Union { parts } => parts
            .iter()
            .try_for_each(|p| walk(p, scale, flagged_above, avoid, out)),
        Descriptor::Sifted { base, avoid: more } => {
            let mut all = avoid.to_vec();
            all.extend(more.iter().map(|&a| a.saturating_mul(scale)));
            walk(base, scale, flagged_above, &all, out)
        }
    }
}

fn is_finite(d: &Descriptor) -> bool {
    match d {
        Descriptor::Explicit { .. } => true,
        Descriptor::Primes { .. } | Descriptor::SquaresOfPrimes { .. } => false,
        Descriptor::Scaled { base, .. } | Descriptor::Sifted { base, .. } => is_finite(base),
        Descriptor::Union { parts } => parts.iter().all(is_finite),
    }
}

/// Replaces `B` by `(B \ U c_n Z) ∪ {c_n}`, where `c_1 < c_2 < ...` are the
/// successive smallest scales with a Behrend quotient.
///
/// Behrendness is read off the flags only: the quotient `{b / c : c | b}` is
/// taken to be Behrend exactly when a flagged block has cumulative scale `c`.
/// A flagged block partly sifted by moduli `q > 1` stays Behrend, since a
/// Behrend set minus finitely many classes `qZ` is still Behrend.
pub fn reduce_taut(family: &BFamily) -> Result<TautReduction> {
    let mut flagged = Vec::new();
    walk(family.descriptor(), 1, false, &[], &mut flagged)?;
    if family.contains_one() {
        return Ok(TautReduction {
            input: family.clone(),
            steps: Vec::new(),
            output: BFamily::explicit([1]),
            stopped_at: StoppedAt::Step0,
        });
    }
    let scales: BTreeSet<u64> = flagged.iter().map(|f| f.scale).collect();
    let mut cs: Vec<u64> = Vec::new();
    let mut steps = Vec::new();
    for c in scales {
        if cs.iter().any(|&prev| c % prev == 0) {
            continue;
        }
        cs.push(c);
        let removed = flagged
            .iter()
            .filter(|f| f.scale == c)
            .map(|f| f.node.clone())
            .collect();
        steps.push(TautStep { c, removed });
    }
    let output = if cs.is_empty() {
        family.clone()
    } else {
        BFamily::union([
            BFamily::sifted(family.clone(), cs.clone()),
            BFamily::explicit(cs.clone()),
        ])
    };
    let n = steps.len();
    Ok(TautReduction {
        input: family.clone(),
        steps,
        output,
        stopped_at: StoppedAt::Step(n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirskyCheck {
    pub window: u64,
    pub block_length: usize,
    pub max_abs_frequency_gap: f64,
    pub worst_block: Option<Block>,
    /// `eta_output <= eta_input` at every position of the window.
    pub output_dominated: bool,
}

/// Compares empirical frequencies of all length-`l` blocks of the two sieved
/// sequences on `[1, window]`.
pub fn verify_mirsky_preserved(
    input: &BFamily,
    output: &BFamily,
    window: u64,
    block_length: usize,
    par: Parallelism,
) -> Result<MirskyCheck> {
    if block_length == 0 || block_length > crate::sieve::MAX_BLOCK_LENGTH {
        return Err(Error::InvalidArgument("block length out of range".into()));
    }
    let a = sieve_window(input, 1, window, par)?;
    let b = sieve_window(output, 1, window, par)?;
    let output_dominated = a.words().iter().zip(b.words()).all(|(x, y)| y & !x == 0);
    let ca = count_blocks(&a, block_length);
    let cb = count_blocks(&b, block_length);
    let total = (window + 1).saturating_sub(block_length as u64).max(1) as f64;
    let keys: BTreeSet<u32> = ca.keys().chain(cb.keys()).copied().collect();
    let mut max_gap = 0.0f64;
    let mut worst = None;
    for k in keys {
        let fa = *ca.get(&k).unwrap_or(&0) as f64 / total;
        let fb = *cb.get(&k).unwrap_or(&0) as f64 / total;
        let g = (fa - fb).abs();
        if g > max_gap {
            max_gap = g;
            worst = Some(Block::from_code(k, block_length));
        }
    }
    Ok(MirskyCheck {
        window,
        block_length,
        max_abs_frequency_gap: max_gap,
        worst_block: worst,
        output_dominated,
    })
}
