//! Small integer helpers shared by the other modules.

use num_bigint::BigUint;
use num_integer::Integer;

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// `None` on overflow.
pub fn checked_lcm(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd(a, b)).checked_mul(b)
}

pub fn lcm_u128(a: u128, b: u128) -> Option<u128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / a.gcd(&b)).checked_mul(b)
}

pub fn lcm_big(values: &[u64]) -> BigUint {
    values.iter().fold(BigUint::from(1u32), |acc, &v| {
        let v = BigUint::from(v);
        let g = acc.gcd(&v);
        acc / g * v
    })
}

/// Returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b)`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Reduces a signed integer into `[0, m)`.
pub fn modulo(n: i128, m: u64) -> u64 {
    n.rem_euclid(m as i128) as u64
}

pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Trial-division factorisation, ascending primes with exponents.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Sorted divisors of a number given by its factorisation, capped at `cap`.
pub fn divisors_from_factors(factors: &[(u64, u32)], cap: u128) -> Vec<u128> {
    let mut divs: Vec<u128> = vec![1];
    for &(p, e) in factors {
        let mut next = Vec::with_capacity(divs.len() * (e as usize + 1));
        for &d in &divs {
            let mut v = d;
            next.push(v);
            for _ in 0..e {
                match v.checked_mul(p as u128) {
                    Some(w) if w <= cap => {
                        v = w;
                        next.push(v);
                    }
                    _ => break,
                }
            }
        }
        divs = next;
    }
    divs.sort_unstable();
    divs.dedup();
    divs
}

pub fn divisors(n: u64) -> Vec<u64> {
    divisors_from_factors(&factorize(n), n as u128)
        .into_iter()
        .map(|d| d as u64)
        .collect()
}

/// Merges the factorisations of several moduli into the factorisation of their lcm.
pub fn lcm_factorization(moduli: &[u64]) -> Vec<(u64, u32)> {
    let mut map = std::collections::BTreeMap::<u64, u32>::new();
    for &b in moduli {
        for (p, e) in factorize(b) {
            let slot = map.entry(p).or_insert(0);
            *slot = (*slot).max(e);
        }
    }
    map.into_iter().collect()
}

pub fn bit_length(n: &BigUint) -> u64 {
    n.bits()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_gcd_identity() {
        for a in -30i128..30 {
            for b in -30i128..30 {
                let (g, x, y) = ext_gcd(a, b);
                assert_eq!(a * x + b * y, g);
                assert_eq!(
                    g as u64,
                    gcd(a.unsigned_abs() as u64, b.unsigned_abs() as u64)
                );
            }
        }
    }

    #[test]
    fn divisors_of_840() {
        let d = divisors(840);
        assert_eq!(d.len(), 32);
        assert!(d.iter().all(|x| 840 % x == 0));
        assert_eq!(lcm_big(&[6, 20, 56]), BigUint::from(840u32));
    }

    #[test]
    fn primes_small() {
        assert_eq!(primes_up_to(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(
            factorize(5391411025),
            vec![
                (5, 2),
                (7, 1),
                (11, 1),
                (13, 1),
                (17, 1),
                (19, 1),
                (23, 1),
                (29, 1)
            ]
        );
    }
}
