//! Families of moduli: explicit lists and bounded symbolic descriptors.
//!
//! A [`BFamily`] is immutable. Symbolic descriptors (primes, prime squares,
//! scaled blocks) always carry their own limit, so every family materialises to
//! a finite sorted list; [`BFamily::truncate`] cuts that list at a bound.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, lcm_big, primes_up_to};
use crate::error::{Error, Result};

/// How a family is presented. JSON uses an internal `type` tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Descriptor {
    Explicit {
        mods: Vec<u64>,
    },
    /// `{p^2 : p prime, p <= limit}`.
    SquaresOfPrimes {
        limit: u64,
    },
    /// `{p : p prime, p <= limit}`.
    Primes {
        limit: u64,
    },
    /// `c * base`. The flag asserts whether `base` is Behrend; it is never computed.
    Scaled {
        c: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        behrend: Option<bool>,
        base: Box<Descriptor>,
    },
    Union {
        parts: Vec<Descriptor>,
    },
    /// Elements of `base` not divisible by any entry of `avoid`.
    Sifted {
        base: Box<Descriptor>,
        avoid: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BFamily {
    descriptor: Descriptor,
}

impl BFamily {
    pub fn new(descriptor: Descriptor) -> Result<Self> {
        validate(&descriptor)?;
        Ok(BFamily { descriptor })
    }

    pub fn explicit(mods: impl Into<Vec<u64>>) -> Self {
        let mut mods = mods.into();
        assert!(mods.iter().all(|&b| b >= 1), "moduli must be positive");
        mods.sort_unstable();
        mods.dedup();
        BFamily {
            descriptor: Descriptor::Explicit { mods },
        }
    }

    pub fn squares_of_primes(limit: u64) -> Self {
        BFamily {
            descriptor: Descriptor::SquaresOfPrimes { limit },
        }
    }

    pub fn primes(limit: u64) -> Self {
        BFamily {
            descriptor: Descriptor::Primes { limit },
        }
    }

    pub fn scaled(c: u64, base: BFamily, behrend: Option<bool>) -> Self {
        assert!(c >= 1, "scale must be positive");
        BFamily {
            descriptor: Descriptor::Scaled {
                c,
                behrend,
                base: Box::new(base.descriptor),
            },
        }
    }

    pub fn union(parts: impl IntoIterator<Item = BFamily>) -> Self {
        BFamily {
            descriptor: Descriptor::Union {
                parts: parts.into_iter().map(|p| p.descriptor).collect(),
            },
        }
    }

    pub fn sifted(base: BFamily, avoid: impl Into<Vec<u64>>) -> Self {
        BFamily {
            descriptor: Descriptor::Sifted {
                base: Box::new(base.descriptor),
                avoid: avoid.into(),
            },
        }
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Descriptor =
            serde_json::from_str(text).map_err(|e| Error::Descriptor(e.to_string()))?;
        BFamily::new(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.descriptor).expect("descriptor serialises")
    }

    /// True when no symbolic (primes / prime squares / scaled) block occurs.
    pub fn is_explicit(&self) -> bool {
        fn walk(d: &Descriptor) -> bool {
            match d {
                Descriptor::Explicit { .. } => true,
                Descriptor::Union { parts } => parts.iter().all(walk),
                Descriptor::Sifted { base, .. } => walk(base),
                _ => false,
            }
        }
        walk(&self.descriptor)
    }

    /// `{b in B : b <= bound}`, sorted and deduplicated.
    pub fn truncate(&self, bound: u64) -> Vec<u64> {
        let mut out = Vec::new();
        collect(&self.descriptor, bound, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every element (descriptors are bounded, so this is finite).
    pub fn elements(&self) -> Vec<u64> {
        self.truncate(u64::MAX)
    }

    pub fn contains_one(&self) -> bool {
        self.truncate(1).contains(&1)
    }
}

fn validate(d: &Descriptor) -> Result<()> {
    match d {
        Descriptor::Explicit { mods } => {
            if mods.contains(&0) {
                return Err(Error::Descriptor("moduli must be positive".into()));
            }
        }
        Descriptor::Scaled { c, base, .. } => {
            if *c == 0 {
                return Err(Error::Descriptor("scale must be positive".into()));
            }
            validate(base)?;
        }
        Descriptor::Union { parts } => parts.iter().try_for_each(validate)?,
        Descriptor::Sifted { base, avoid } => {
            if avoid.contains(&0) {
                return Err(Error::Descriptor("sift moduli must be positive".into()));
            }
            validate(base)?;
        }
        Descriptor::SquaresOfPrimes { .. } | Descriptor::Primes { .. } => {}
    }
    Ok(())
}

fn collect(d: &Descriptor, bound: u64, out: &mut Vec<u64>) {
    match d {
        Descriptor::Explicit { mods } => out.extend(mods.iter().copied().filter(|&b| b <= bound)),
        Descriptor::Primes { limit } => out.extend(primes_up_to((*limit).min(bound))),
        Descriptor::SquaresOfPrimes { limit } => {
            let root = bound.isqrt();
            out.extend(primes_up_to((*limit).min(root)).into_iter().map(|p| p * p));
        }
        Descriptor::Scaled { c, base, .. } => {
            let mut inner = Vec::new();
            collect(base, bound / c, &mut inner);
            out.extend(inner.into_iter().map(|b| b * c));
        }
        Descriptor::Union { parts } => parts.iter().for_each(|p| collect(p, bound, out)),
        Descriptor::Sifted { base, avoid } => {
            let mut inner = Vec::new();
            collect(base, bound, &mut inner);
            out.extend(
                inner
                    .into_iter()
                    .filter(|b| avoid.iter().all(|a| b % a != 0)),
            );
        }
    }
}

/// Pairwise coprime moduli drawn from a family truncation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoprimeSubset {
    pub elements: Vec<u64>,
}

/// Removes every element that is a multiple of another one; keeps `{b <= bound}` only.
pub fn primitive_reduce(family: &BFamily, bound: u64) -> BFamily {
    BFamily::explicit(primitive_part(&family.truncate(bound)))
}

/// Primitive part of a sorted deduplicated list.
pub fn primitive_part(sorted: &[u64]) -> Vec<u64> {
    let Some(&max) = sorted.last() else {
        return Vec::new();
    };
    if sorted[0] == 1 {
        return vec![1];
    }
    let mut kept = Vec::new();
    if max <= 1 << 26 {
        let mut marked = vec![false; max as usize + 1];
        for &b in sorted {
            if marked[b as usize] {
                continue;
            }
            kept.push(b);
            let mut m = 2 * b;
            while m <= max {
                marked[m as usize] = true;
                m += b;
            }
        }
    } else {
        for &b in sorted {
            if kept.iter().all(|&a| b % a != 0) {
                kept.push(b);
            }
        }
    }
    kept
}

/// First division relation `(divisor, multiple)` in a sorted list, if any.
pub fn division_witness(sorted: &[u64]) -> Option<(u64, u64)> {
    for (i, &a) in sorted.iter().enumerate() {
        for &b in &sorted[i + 1..] {
            if b % a == 0 {
                return Some((a, b));
            }
        }
    }
    None
}

/// Greedy ascending scan: keep `b` iff it is coprime to everything kept so far.
pub fn extract_coprime_subset(family: &BFamily, bound: u64) -> Result<CoprimeSubset> {
    let mods = family.truncate(bound);
    if mods.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(CoprimeSubset {
        elements: greedy_coprime(&mods),
    })
}

pub(crate) fn greedy_coprime(sorted: &[u64]) -> Vec<u64> {
    let mut kept: Vec<u64> = Vec::new();
    for &b in sorted {
        if kept.iter().all(|&a| gcd(a, b) == 1) {
            kept.push(b);
        }
    }
    kept
}

pub fn lcm_of(family: &BFamily, bound: u64) -> Result<BigUint> {
    let mods = family.truncate(bound);
    if mods.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(lcm_big(&mods))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primitive_reduce_examples() {
        assert_eq!(
            primitive_reduce(&BFamily::explicit([2, 4, 6]), 10).elements(),
            vec![2]
        );
        assert_eq!(
            primitive_reduce(&BFamily::explicit([4, 6, 9, 25]), 30).elements(),
            vec![4, 6, 9, 25]
        );
        assert_eq!(
            primitive_reduce(&BFamily::explicit([1, 7, 9]), 30).elements(),
            vec![1]
        );
    }

    #[test]
    fn scaled_primes_without_two_and_three() {
        let base = BFamily::sifted(BFamily::primes(100), [2, 3]);
        let fam = BFamily::union([BFamily::explicit([3]), BFamily::scaled(2, base, Some(true))]);
        // oracle: generate 2p <= 20 for primes p outside {2, 3}, add 3, filter
        let mut oracle = vec![3u64];
        for p in 2..=10u64 {
            if (2..p).all(|d| p % d != 0) && p != 2 && p != 3 {
                oracle.push(2 * p);
            }
        }
        oracle.sort();
        let reduced = primitive_reduce(&fam, 20).elements();
        assert_eq!(reduced, oracle);
        assert_eq!(reduced, vec![3, 10, 14]);

        // with 2 kept in the base, 4 enters and stays (4 is not a multiple of 3)
        let fam2 = BFamily::union([
            BFamily::explicit([3]),
            BFamily::scaled(2, BFamily::sifted(BFamily::primes(100), [3]), Some(true)),
        ]);
        assert_eq!(primitive_reduce(&fam2, 20).elements(), vec![3, 4, 10, 14]);
    }

    #[test]
    fn coprime_extraction_examples() {
        let f = BFamily::explicit([4, 6, 9, 25, 35, 49]);
        assert_eq!(
            extract_coprime_subset(&f, 100).unwrap().elements,
            vec![4, 9, 25, 49]
        );
        let sq = BFamily::squares_of_primes(20);
        assert_eq!(
            extract_coprime_subset(&sq, u64::MAX).unwrap().elements,
            sq.elements()
        );
        let p = primitive_reduce(&BFamily::explicit([2, 4, 8]), 8);
        assert_eq!(extract_coprime_subset(&p, 8).unwrap().elements, vec![2]);
        assert_eq!(
            extract_coprime_subset(&BFamily::explicit([5]), 4),
            Err(Error::EmptyFamily)
        );
    }

    #[test]
    fn lcm_examples() {
        assert_eq!(
            lcm_of(&BFamily::explicit([4, 6]), 100).unwrap(),
            BigUint::from(12u32)
        );
        assert_eq!(
            lcm_of(&BFamily::explicit([2, 3, 5]), 100).unwrap(),
            BigUint::from(30u32)
        );
        assert_eq!(
            lcm_of(&BFamily::explicit([6, 20, 56]), 100).unwrap(),
            BigUint::from(840u32)
        );
        assert_eq!(lcm_of(&BFamily::explicit([6]), 5), Err(Error::EmptyFamily));
    }

    #[test]
    fn truncation_and_json() {
        let sq = BFamily::squares_of_primes(30);
        assert_eq!(sq.truncate(100), vec![4, 9, 25, 49]);
        let json = r#"{"type":"union","parts":[{"type":"explicit","mods":[3]},
            {"type":"scaled","c":2,"behrend":true,"base":{"type":"primes","limit":50}}]}"#;
        let f = BFamily::from_json(json).unwrap();
        assert_eq!(f.truncate(12), vec![3, 4, 6, 10]);
        assert_eq!(BFamily::from_json(&f.to_json()).unwrap(), f);
        assert!(BFamily::from_json(r#"{"type":"explicit","mods":[0]}"#).is_err());
        assert!(BFamily::from_json(r#"{"type":"bogus"}"#).is_err());
        assert!(!f.is_explicit());
        assert!(BFamily::explicit([4, 6]).is_explicit());
    }

    fn brute_in_m(mods: &[u64], n: u64) -> bool {
        mods.iter().any(|&b| n % b == 0)
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(7), ..ProptestConfig::default() })]

        #[test]
        fn primitive_reduce_is_idempotent_and_preserves_m(mods in prop::collection::vec(1u64..60, 1..8)) {
            let f = BFamily::explicit(mods);
            let once = primitive_reduce(&f, 60);
            let twice = primitive_reduce(&once, 60);
            prop_assert_eq!(&once, &twice);
            prop_assert!(division_witness(&once.elements()).is_none());
            let raw = f.elements();
            let red = once.elements();
            let l = lcm_big(&raw);
            let span: u64 = if l > BigUint::from(20_000u32) { 20_000 } else { 2 * u64::try_from(&l).unwrap() };
            for n in 1..=span {
                prop_assert_eq!(brute_in_m(&raw, n), brute_in_m(&red, n));
            }
        }

        #[test]
        fn coprime_subset_is_pairwise_coprime(mods in prop::collection::vec(2u64..200, 1..12)) {
            let f = BFamily::explicit(mods);
            let s = extract_coprime_subset(&f, 200).unwrap().elements;
            let all = f.elements();
            for (i, a) in s.iter().enumerate() {
                prop_assert!(all.contains(a));
                for b in &s[i + 1..] {
                    prop_assert_eq!(gcd(*a, *b), 1);
                }
            }
        }
    }
}
