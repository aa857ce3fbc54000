//! Exact densities of `M_B` for finite `B`, Davenport-Erdos truncations and
//! classification diagnostics.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::admissibility::gcd_components;
use crate::bset::{division_witness, primitive_part, BFamily};
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::progressions::{union_density_ie, Progression};
use crate::ratio::{self, Rational};
use crate::sieve;
use crate::Budget;

/// Largest component handled by inclusion-exclusion when its lcm is too big to tabulate.
const IE_MAX: usize = 20;

/// `d(M_B)` for a finite list of moduli.
///
/// Moduli are split into components that share no prime factor across each
/// other; the free densities of the components multiply. Each component is
/// solved by a residue table, or by inclusion-exclusion when the table is too
/// large. The lcm budget applies per component.
pub fn exact_density(mods: &[u64], budget: &Budget) -> Result<Rational> {
    let mut sorted = mods.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let prim = primitive_part(&sorted);
    // numerator and denominator of the free density, reduced once at the end
    let (mut num, mut den) = (BigInt::one(), BigInt::one());
    for comp in gcd_components(&prim) {
        let d = component_density(&comp, budget)?;
        num *= d.denom() - d.numer();
        den *= d.denom();
    }
    Ok(ratio::one() - Rational::new(num, den))
}

fn component_density(comp: &[u64], budget: &Budget) -> Result<Rational> {
    if comp.len() == 1 {
        return Ok(Rational::new(BigInt::one(), BigInt::from(comp[0])));
    }
    match sieve::period_of(comp, budget) {
        Ok(l) => {
            let w = sieve::sieve_moduli(comp, 1, l, Parallelism::Sequential)?;
            Ok(ratio::ratio(l - w.count_ones(), l))
        }
        Err(Error::TableTooLarge { .. }) if comp.len() <= IE_MAX => {
            let ps: Vec<_> = comp.iter().map(|&b| Progression::new(b, 0)).collect();
            union_density_ie(&ps)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    /// Counted on `[1, N]` of a sieve window.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeEntry {
    pub k: u64,
    #[serde(with = "crate::ratio")]
    pub value: Rational,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEntry {
    pub k: u64,
    /// `sum 1/b` over `K < b <= K_max`.
    pub union_bound: f64,
    /// Density of `U_{K < b <= K_max} bZ` on the sample window.
    pub sampled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesicovitchEntry {
    pub k: u64,
    /// Density of `M_{B<=K_max} \ M_{B<=K}`.
    pub estimate: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    pub thin: bool,
    /// `(N, sum_{b <= N} 1/b)` at powers of ten up to the largest grid value.
    pub reciprocal_sums: Vec<(u64, f64)>,
    pub light_tails_estimate: Vec<TailEntry>,
    pub besicovitch_diagnostic: Vec<BesicovitchEntry>,
    pub behrend_diagnostic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    #[serde(with = "crate::ratio::option")]
    pub exact_density_m: Option<Rational>,
    pub de_sequence: Vec<DeEntry>,
    #[serde(with = "crate::ratio")]
    pub delta_estimate: Rational,
    pub monotone: bool,
    pub log_partial_sums: Vec<(u64, f64)>,
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy)]
pub struct DensityOptions {
    /// Length of `[1, N]` used for sampled values and logarithmic sums.
    pub sample_window: u64,
    pub budget: Budget,
    pub par: Parallelism,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            sample_window: 1_000_000,
            budget: Budget::default(),
            par: Parallelism::default(),
        }
    }
}

pub const BEHREND_THRESHOLD: f64 = 1e-3;
/// A family is reported thin when the last decade adds less than this to `sum 1/b`.
pub const THIN_INCREMENT: f64 = 1e-2;

pub fn davenport_erdos(
    family: &BFamily,
    k_grid: &[u64],
    opts: &DensityOptions,
) -> Result<DensityReport> {
    if k_grid.is_empty() {
        return Err(Error::InvalidArgument("K grid is empty".into()));
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let k_max = *grid.last().unwrap();
    let n = opts.sample_window;
    let full = family.truncate(k_max);

    // moduli beyond N cannot divide anything in [1, N]
    let sampled = |mods: &[u64]| -> Result<Rational> {
        let relevant: Vec<u64> = mods.iter().copied().filter(|&b| b <= n).collect();
        let w = sieve::sieve_moduli(&relevant, 1, n, opts.par)?;
        Ok(ratio::ratio(n - w.count_ones(), n))
    };

    let mut de_sequence = Vec::with_capacity(grid.len());
    for &k in &grid {
        let mods: Vec<u64> = full.iter().copied().filter(|&b| b <= k).collect();
        let entry = match exact_density(&mods, &opts.budget) {
            Ok(v) => DeEntry {
                k,
                value: v,
                method: Method::Exact,
            },
            Err(
                Error::StepOverflowBudget { .. }
                | Error::TableTooLarge { .. }
                | Error::BudgetExceeded(_),
            ) => DeEntry {
                k,
                value: sampled(&mods)?,
                method: Method::Sampled,
            },
            Err(e) => return Err(e),
        };
        de_sequence.push(entry);
    }
    let monotone = de_sequence.windows(2).all(|w| w[0].value <= w[1].value);
    let delta_estimate = de_sequence.last().unwrap().value.clone();

    let exact_density_m = if family.is_explicit() && family.elements() == full {
        exact_density(&full, &opts.budget).ok()
    } else {
        None
    };

    // logarithmic partial sums over [1, N]
    let mods_n = family.truncate(n);
    let w = sieve::sieve_moduli(&mods_n, 1, n, opts.par)?;
    let mut log_partial_sums = Vec::new();
    let mut acc = 0.0f64;
    let mut next = 10u64;
    for i in 0..n {
        let a = i + 1;
        if !w.bit(i) {
            acc += 1.0 / a as f64;
        }
        if a == next || a == n {
            if a >= 2 {
                log_partial_sums.push((a, acc / (a as f64).ln()));
            }
            next = next.saturating_mul(10);
        }
    }

    let mut reciprocal_sums = Vec::new();
    let mut decade = 10u64;
    loop {
        let cut = decade.min(k_max);
        let s: f64 = full
            .iter()
            .filter(|&&b| b <= cut)
            .fold(0.0, |s, &b| s + 1.0 / b as f64);
        reciprocal_sums.push((cut, s));
        if cut == k_max {
            break;
        }
        decade = decade.saturating_mul(10);
    }
    let thin = match reciprocal_sums.as_slice() {
        [.., a, b] => b.1 - a.1 < THIN_INCREMENT,
        _ => true,
    };

    let mut light_tails_estimate = Vec::new();
    let mut besicovitch_diagnostic = Vec::new();
    for (i, &k) in grid.iter().enumerate().take(grid.len() - 1) {
        let tail: Vec<u64> = full.iter().copied().filter(|&b| b > k).collect();
        let union_bound = tail.iter().fold(0.0, |s, &b| s + 1.0 / b as f64);
        let tail_in_window: Vec<u64> = tail.iter().copied().filter(|&b| b <= n).collect();
        let tw = sieve::sieve_moduli(&tail_in_window, 1, n, opts.par)?;
        let sampled_tail = if tail_in_window.is_empty() {
            0.0
        } else {
            1.0 - sieve::ones_frequency(&tw)
        };
        light_tails_estimate.push(TailEntry {
            k,
            union_bound,
            sampled: sampled_tail,
        });
        let (lo, hi) = (&de_sequence[i], de_sequence.last().unwrap());
        let method = if lo.method == Method::Exact && hi.method == Method::Exact {
            Method::Exact
        } else {
            Method::Sampled
        };
        besicovitch_diagnostic.push(BesicovitchEntry {
            k,
            estimate: ratio::to_f64(&(hi.value.clone() - lo.value.clone())),
            method,
        });
    }

    let behrend_diagnostic = ratio::to_f64(&delta_estimate) > 1.0 - BEHREND_THRESHOLD;
    Ok(DensityReport {
        exact_density_m,
        de_sequence,
        delta_estimate,
        monotone,
        log_partial_sums,
        flags: Flags {
            thin,
            reciprocal_sums,
            light_tails_estimate,
            besicovitch_diagnostic,
            behrend_diagnostic,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TautWitness {
    pub b: u64,
    #[serde(with = "crate::ratio")]
    pub with: Rational,
    #[serde(with = "crate::ratio")]
    pub without: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TautVerdict {
    pub is_taut: bool,
    pub witnesses: Vec<TautWitness>,
}

/// For finite families `delta = d`, so tautness is a comparison of exact densities.
pub fn taut_check_finite(mods: &[u64], budget: &Budget) -> Result<TautVerdict> {
    let mut sorted = mods.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some((divisor, multiple)) = division_witness(&sorted) {
        return Err(Error::NotPrimitive { divisor, multiple });
    }
    let with = exact_density(&sorted, budget)?;
    let mut witnesses = Vec::with_capacity(sorted.len());
    for i in 0..sorted.len() {
        let rest: Vec<u64> = sorted
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &b)| b)
            .collect();
        let without = exact_density(&rest, budget)?;
        witnesses.push(TautWitness {
            b: sorted[i],
            with: with.clone(),
            without,
        });
    }
    let is_taut = witnesses.iter().all(|w| w.with > w.without);
    Ok(TautVerdict { is_taut, witnesses })
}

/// `to_f64` of a density, for reporting.
pub fn approx(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| ratio::to_f64(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{checked_lcm, primes_up_to};
    use crate::ratio::ratio;
    use num_traits::Zero;
    use proptest::prelude::*;

    /// Independent route: signed sum over all nonempty subsets of `1/lcm(S)`.
    fn ie_oracle(mods: &[u64]) -> Rational {
        let mut total = Rational::zero();
        for mask in 1u32..1 << mods.len() {
            let mut l = 1u64;
            for (i, &b) in mods.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    l = checked_lcm(l, b).unwrap();
                }
            }
            let term = ratio(1, l);
            if mask.count_ones() % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        total
    }

    #[test]
    fn exact_examples() {
        let b = Budget::default();
        assert_eq!(exact_density(&[4, 6], &b).unwrap(), ratio(1, 3));
        assert_eq!(exact_density(&[2, 3], &b).unwrap(), ratio(2, 3));
        assert_eq!(exact_density(&[1], &b).unwrap(), ratio(1, 1));
        assert_eq!(exact_density(&[], &b).unwrap(), ratio(0, 1));
    }

    #[test]
    fn large_coprime_components_stay_exact() {
        let sq: Vec<u64> = primes_up_to(100).into_iter().map(|p| p * p).collect();
        let d = exact_density(&sq, &Budget::default()).unwrap();
        let mut free = ratio(1, 1);
        for p in primes_up_to(100) {
            free *= ratio(p * p - 1, p * p);
        }
        assert_eq!(d, ratio(1, 1) - free);
    }

    #[test]
    fn de_examples() {
        let opts = DensityOptions {
            sample_window: 10_000,
            ..Default::default()
        };
        let r = davenport_erdos(&BFamily::explicit([2, 3]), &[1, 2, 3, 10, 100], &opts).unwrap();
        assert!(r.monotone);
        assert!(r.de_sequence[2..].iter().all(|e| e.value == ratio(2, 3)));
        assert_eq!(r.exact_density_m, Some(ratio(2, 3)));

        let r = davenport_erdos(
            &BFamily::squares_of_primes(1_000),
            &[100, 1_000, 10_000],
            &opts,
        )
        .unwrap();
        assert!(r.monotone);
        assert!(r.de_sequence.iter().all(|e| e.method == Method::Exact));
        assert!(!r.flags.behrend_diagnostic);
        assert!(r.flags.thin);
    }

    #[test]
    fn primes_truncation_against_product_oracle() {
        let opts = DensityOptions {
            sample_window: 100_000,
            ..Default::default()
        };
        let r =
            davenport_erdos(&BFamily::primes(100_000), &[10, 100, 1_000, 100_000], &opts).unwrap();
        assert!(r.monotone);
        let mut free = 1.0f64;
        for p in primes_up_to(100_000) {
            free *= 1.0 - 1.0 / p as f64;
        }
        let got = approx(&r.delta_estimate);
        assert!((got - (1.0 - free)).abs() < 1e-9, "{got} vs {}", 1.0 - free);
        // at this truncation the estimate is about 0.951, well short of the 1 - 1e-3 threshold
        assert!(!r.flags.behrend_diagnostic);
        assert!(!r.flags.thin);
    }

    #[test]
    fn taut_examples() {
        let b = Budget::default();
        let v = taut_check_finite(&[4, 6], &b).unwrap();
        assert!(v.is_taut);
        assert_eq!(v.witnesses[0].without, ratio(1, 6));
        assert_eq!(v.witnesses[1].without, ratio(1, 4));
        let v = taut_check_finite(&[2], &b).unwrap();
        assert_eq!(
            (v.witnesses[0].with.clone(), v.witnesses[0].without.clone()),
            (ratio(1, 2), ratio(0, 1))
        );
        assert_eq!(
            taut_check_finite(&[2, 4], &b),
            Err(Error::NotPrimitive {
                divisor: 2,
                multiple: 4
            })
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(13), ..ProptestConfig::default() })]

        #[test]
        fn single_modulus(b in 1u64..10_000) {
            prop_assert_eq!(exact_density(&[b], &Budget::default()).unwrap(), ratio(1, b));
        }

        #[test]
        fn marking_matches_inclusion_exclusion(mods in prop::collection::vec(1u64..60, 1..=6)) {
            prop_assert_eq!(exact_density(&mods, &Budget::default()).unwrap(), ie_oracle(&mods));
        }

        #[test]
        fn primitive_families_are_taut(mods in prop::collection::vec(2u64..=50, 1..=8)) {
            let mut m = mods.clone();
            m.sort_unstable();
            m.dedup();
            let prim = primitive_part(&m);
            prop_assert!(taut_check_finite(&prim, &Budget::default()).unwrap().is_taut);
        }

        #[test]
        fn de_sequence_is_monotone(mods in prop::collection::vec(2u64..200, 1..10)) {
            let opts = DensityOptions { sample_window: 2_000, ..Default::default() };
            let r = davenport_erdos(&BFamily::explicit(mods), &[5, 20, 50, 100, 200], &opts).unwrap();
            prop_assert!(r.monotone);
        }
    }
}
