//! Abundant, perfect and deficient numbers: a segmented divisor-sum sieve,
//! primitive abundant generators and run statistics.

use serde::{Deserialize, Serialize};

use crate::arith::{factorize, primes_up_to};
use crate::bset::BFamily;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::ratio::{self, Rational};
use crate::sieve::max_min_gaps;
use crate::Budget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Abundant,
    Perfect,
    Deficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliquotClass {
    pub n: u64,
    /// Sum of proper divisors.
    pub s_n: u64,
    pub class: Class,
}

fn class_of(n: u64, sigma: u64) -> Class {
    let s = sigma - n;
    match s.cmp(&n) {
        std::cmp::Ordering::Greater => Class::Abundant,
        std::cmp::Ordering::Equal => Class::Perfect,
        std::cmp::Ordering::Less => Class::Deficient,
    }
}

pub fn sigma(n: u64) -> u128 {
    factorize(n)
        .into_iter()
        .map(|(p, e)| {
            let p = p as u128;
            (p.pow(e + 1) - 1) / (p - 1)
        })
        .product()
}

pub fn classify(n: u64) -> Result<AliquotClass> {
    if n == 0 {
        return Err(Error::InvalidArgument("classify needs n >= 1".into()));
    }
    let s = sigma(n) as u64;
    Ok(AliquotClass {
        n,
        s_n: s - n,
        class: class_of(n, s),
    })
}

const SIGMA_CHUNK: u64 = 1 << 16;

/// `sigma(n)` for `n` in `[1, limit]`; index `0` holds `sigma(1)`.
pub fn sigma_sieve(limit: u64, par: Parallelism) -> Vec<u64> {
    let mut out = vec![0u64; limit as usize];
    let root = limit.isqrt();
    par::for_each_chunk_mut(par, &mut out, SIGMA_CHUNK as usize, |ci, chunk| {
        let lo = 1 + ci as u64 * SIGMA_CHUNK;
        let hi = lo + chunk.len() as u64;
        for d in 1..=root {
            let sq = d * d;
            if sq >= hi {
                break;
            }
            let first = sq.max(lo.div_ceil(d) * d);
            let mut m = first;
            while m < hi {
                let q = m / d;
                chunk[(m - lo) as usize] += if q == d { d } else { d + q };
                m += d;
            }
        }
    });
    out
}

/// Classes of `1..=limit`; index `0` is `n = 1`.
pub fn classes_up_to(limit: u64, par: Parallelism) -> Vec<Class> {
    let sig = sigma_sieve(limit, par);
    par::map_collect(par, (0..limit).collect(), |i| {
        class_of(i + 1, sig[i as usize])
    })
}

/// Abundant numbers with no abundant proper divisor, up to `limit`.
pub fn primitive_abundant_generators(limit: u64, par: Parallelism) -> Result<BFamily> {
    if limit < 12 {
        return Err(Error::InvalidArgument("limit must be at least 12".into()));
    }
    let classes = classes_up_to(limit, par);
    let mut covered = vec![false; limit as usize + 1];
    let mut gens = Vec::new();
    for n in 1..=limit {
        if classes[n as usize - 1] != Class::Abundant || covered[n as usize] {
            continue;
        }
        gens.push(n);
        let mut m = n;
        while m <= limit {
            covered[m as usize] = true;
            m += n;
        }
    }
    Ok(BFamily::explicit(gens))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDensity {
    pub limit: u64,
    pub run_length: u64,
    pub count: u64,
    pub total: u64,
    #[serde(with = "crate::ratio")]
    pub density: Rational,
}

/// Fraction of `n` in `[0, limit - run]` with `n+1, ..., n+run` all deficient.
/// Perfect numbers do not count as deficient.
pub fn deficient_run_density(limit: u64, run_length: u64, par: Parallelism) -> Result<RunDensity> {
    if run_length == 0 || run_length > limit {
        return Err(Error::InvalidArgument(
            "need 1 <= run length <= limit".into(),
        ));
    }
    let classes = classes_up_to(limit, par);
    let mut count = 0u64;
    let mut streak = 0u64;
    for c in &classes {
        streak = if *c == Class::Deficient {
            streak + 1
        } else {
            0
        };
        if streak >= run_length {
            count += 1;
        }
    }
    let total = limit - run_length + 1;
    Ok(RunDensity {
        limit,
        run_length,
        count,
        total,
        density: ratio::ratio(count, total),
    })
}

/// Gap statistic of the deficient numbers in `[1, limit]` (see `sieve::max_min_gaps`).
pub fn deficient_gap_statistics(limit: u64, k_max: usize, par: Parallelism) -> Vec<u64> {
    let classes = classes_up_to(limit, par);
    max_min_gaps(
        classes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == Class::Deficient)
            .map(|(i, _)| i as i64 + 1),
        k_max,
    )
}

/// Longest run of consecutive abundant numbers in `[1, limit]`, with its start.
pub fn longest_abundant_run(limit: u64, par: Parallelism) -> (u64, u64) {
    let classes = classes_up_to(limit, par);
    let (mut best, mut at, mut cur) = (0u64, 0u64, 0u64);
    for (i, c) in classes.iter().enumerate() {
        cur = if *c == Class::Abundant { cur + 1 } else { 0 };
        if cur > best {
            best = cur;
            at = i as u64 + 2 - cur;
        }
    }
    (best, at)
}

/// `(N, sum 1/b)` over generators `b <= N`, at powers of ten.
pub fn generator_reciprocal_sums(gens: &[u64], limit: u64) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut cut = 10u64;
    loop {
        let c = cut.min(limit);
        out.push((
            c,
            gens.iter()
                .filter(|&&b| b <= c)
                .fold(0.0, |s, &b| s + 1.0 / b as f64),
        ));
        if c == limit {
            return out;
        }
        cut = cut.saturating_mul(10);
    }
}

/// Smallest abundant number coprime to the first `k` primes.
///
/// Depth-first search over factorisations with strictly increasing primes, all
/// at least `p_{k+1}`. A branch at `n` with next prime `p_j` is cut when
/// `sigma(n)/n` times the largest possible gain of a cofactor below
/// `best / n` (the product of `q/(q-1)` over consecutive primes from `p_j`)
/// cannot exceed 2. Leaves are checked exactly.
pub fn smallest_abundant_coprime_to(k: usize, budget: &Budget) -> Result<u128> {
    let primes: Vec<u128> = primes_up_to(4_000_000)
        .into_iter()
        .map(u128::from)
        .collect();
    if k >= primes.len() {
        return Err(Error::BudgetExceeded(format!(
            "k = {k} exceeds the prime table"
        )));
    }
    let ps = &primes[k..];
    // initial bound: product of consecutive primes until the ratio passes 2
    let (mut n, mut s) = (1u128, 1u128);
    let mut i = 0;
    while s <= 2 * n {
        if i >= ps.len() {
            return Err(Error::BudgetExceeded(
                "prime table too short for the initial bound".into(),
            ));
        }
        n = n
            .checked_mul(ps[i])
            .ok_or_else(|| Error::BudgetExceeded("initial bound overflows u128".into()))?;
        s *= ps[i] + 1;
        i += 1;
    }
    let mut search = Bnb {
        ps,
        best: n,
        nodes: 0,
        limit: budget.nodes,
    };
    search.dfs(0, 1, 1)?;
    Ok(search.best)
}

struct Bnb<'a> {
    ps: &'a [u128],
    best: u128,
    nodes: u64,
    limit: u64,
}

impl Bnb<'_> {
    /// Largest `sigma(m)/m` for `m < cap` built from primes `ps[j..]`.
    fn gain_bound(&self, j: usize, cap: u128) -> Option<f64> {
        let mut prod = 1u128;
        let mut g = 1.0f64;
        for &q in &self.ps[j..] {
            match prod.checked_mul(q) {
                Some(v) if v < cap => {
                    prod = v;
                    g *= q as f64 / (q - 1) as f64;
                }
                _ => return Some(g),
            }
        }
        None
    }

    fn dfs(&mut self, j: usize, n: u128, sigma: u128) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::BudgetExceeded(format!(
                "abundant search passed {} nodes",
                self.limit
            )));
        }
        if sigma > 2 * n {
            if n < self.best {
                self.best = n;
            }
            return Ok(());
        }
        for jj in j..self.ps.len() {
            let p = self.ps[jj];
            let Some(np) = n.checked_mul(p) else { break };
            if np >= self.best {
                break;
            }
            let ratio = sigma as f64 / n as f64;
            match self.gain_bound(jj, self.best / n + 1) {
                Some(g) if ratio * g * (1.0 + 1e-12) <= 2.0 => break,
                Some(_) => {}
                None => {
                    return Err(Error::BudgetExceeded(
                        "prime table too short for the bound".into(),
                    ))
                }
            }
            let (mut pe, mut sp) = (p, 1 + p);
            loop {
                let m = n * pe;
                if m >= self.best {
                    break;
                }
                self.dfs(jj + 1, m, sigma * sp)?;
                match pe.checked_mul(p) {
                    Some(v) => {
                        pe = v;
                        sp += v;
                    }
                    None => break,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct divisor enumeration.
    fn aliquot(n: u64) -> u64 {
        (1..n).filter(|d| n % d == 0).sum()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify(12).unwrap(),
            AliquotClass {
                n: 12,
                s_n: 16,
                class: Class::Abundant
            }
        );
        assert_eq!(classify(6).unwrap().class, Class::Perfect);
        for n in 1..=5 {
            assert_eq!(classify(n).unwrap().class, Class::Deficient);
        }
        assert_eq!(classify(1).unwrap().s_n, 0);
        assert!(classify(0).is_err());
    }

    #[test]
    fn sieve_matches_enumeration() {
        let seq = Parallelism::Sequential;
        let sig = sigma_sieve(3000, seq);
        for n in 1..=3000u64 {
            assert_eq!(sig[n as usize - 1] - n, aliquot(n), "n = {n}");
        }
        let big = 200_000;
        assert_eq!(sigma_sieve(big, Parallelism::Rayon), sigma_sieve(big, seq));
    }

    #[test]
    fn generator_examples() {
        let seq = Parallelism::Sequential;
        let g = primitive_abundant_generators(100, seq).unwrap().elements();
        assert!(g.contains(&12) && g.contains(&18) && g.contains(&20));
        assert!(!g.contains(&24) && !g.contains(&36));
        let g = primitive_abundant_generators(1000, seq).unwrap().elements();
        assert!(g.contains(&945));
        let oracle_odd = (1..1000u64).step_by(2).find(|&n| aliquot(n) > n).unwrap();
        assert_eq!(oracle_odd, 945);
        assert!(primitive_abundant_generators(11, seq).is_err());
        assert!(crate::bset::division_witness(&g).is_none());
    }

    #[test]
    fn generators_generate_the_abundant_numbers() {
        let seq = Parallelism::Sequential;
        let limit = 20_000;
        let g = primitive_abundant_generators(limit, seq)
            .unwrap()
            .elements();
        let classes = classes_up_to(limit, seq);
        for n in 1..=limit {
            let in_m = g.iter().any(|&b| n % b == 0);
            assert_eq!(in_m, classes[n as usize - 1] == Class::Abundant, "n = {n}");
        }
        let sums = generator_reciprocal_sums(&g, limit);
        assert!(sums.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn multiples_of_abundant_are_abundant() {
        let limit = 100_000u64;
        let classes = classes_up_to(limit, Parallelism::Rayon);
        for n in 1..=limit {
            if classes[n as usize - 1] == Class::Abundant {
                let mut m = 2 * n;
                while m <= limit {
                    assert_eq!(classes[m as usize - 1], Class::Abundant, "{m} = k * {n}");
                    m += n;
                }
            }
        }
    }

    #[test]
    fn run_density_examples() {
        let seq = Parallelism::Sequential;
        let r = deficient_run_density(30, 5, seq).unwrap();
        // n = 0 counts: 1..5 are deficient
        let brute = (0..=25u64)
            .filter(|&n| (n + 1..=n + 5).all(|m| aliquot(m) < m))
            .count() as u64;
        assert_eq!(r.count, brute);
        assert!(r.count >= 1);
        let r1 = deficient_run_density(100_000, 1, seq).unwrap();
        let classes = classes_up_to(100_000, seq);
        let non = classes.iter().filter(|&&c| c != Class::Deficient).count() as u64;
        assert_eq!(r1.count, 100_000 - non);
        assert!(deficient_run_density(10, 0, seq).is_err());
    }

    #[test]
    fn longest_run_evidence() {
        let (len, at) = longest_abundant_run(100_000, Parallelism::Sequential);
        assert!(len >= 2);
        assert!((at..at + len).all(|n| aliquot(n) > n));
    }

    #[test]
    fn smallest_abundant_examples() {
        let b = Budget::default();
        let scan0 = (1..).find(|&n: &u64| aliquot(n) > n).unwrap();
        assert_eq!(smallest_abundant_coprime_to(0, &b).unwrap(), scan0 as u128);
        assert_eq!(smallest_abundant_coprime_to(1, &b).unwrap(), 945);
        let v = smallest_abundant_coprime_to(2, &b).unwrap();
        assert_eq!(v, 5_391_411_025);
        assert!(sigma(v as u64) > 2 * v);
        assert!(matches!(
            smallest_abundant_coprime_to(2, &Budget { nodes: 10, ..b }),
            Err(Error::BudgetExceeded(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 256, rng_seed: proptest::test_runner::RngSeed::Fixed(37), ..ProptestConfig::default() })]

        #[test]
        fn classify_matches_enumeration(n in 1u64..20_000) {
            let c = classify(n).unwrap();
            prop_assert_eq!(c.s_n, aliquot(n));
        }
    }
}
