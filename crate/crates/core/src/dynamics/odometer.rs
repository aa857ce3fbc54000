use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::admissibility::Block;
use crate::arith::modulo;
use crate::error::{Error, Result};

/// A point of the odometer at a finite level, in product coordinates
/// `g_k in [0, b_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OdometerPoint {
    pub moduli: Vec<u64>,
    pub coords: Vec<u64>,
}

impl OdometerPoint {
    pub fn new(moduli: Vec<u64>, coords: Vec<u64>) -> Result<Self> {
        if moduli.len() != coords.len() || moduli.is_empty() {
            return Err(Error::InvalidArgument(
                "level must be at least 1 with one coordinate per modulus".into(),
            ));
        }
        if let Some(i) = (0..moduli.len()).find(|&i| moduli[i] == 0 || coords[i] >= moduli[i]) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {} out of range mod {}",
                coords[i], moduli[i]
            )));
        }
        Ok(OdometerPoint { moduli, coords })
    }

    /// The image of the integer `n` (the point `n` underlined).
    pub fn from_integer(moduli: &[u64], n: i128) -> Self {
        OdometerPoint {
            moduli: moduli.to_vec(),
            coords: moduli.iter().map(|&b| modulo(n, b)).collect(),
        }
    }

    pub fn level(&self) -> usize {
        self.moduli.len()
    }

    /// `T^k`: adds `k` in every coordinate.
    pub fn rotate(&self, k: i128) -> Self {
        let coords = self
            .moduli
            .iter()
            .zip(&self.coords)
            .map(|(&b, &g)| modulo(g as i128 + k, b))
            .collect();
        OdometerPoint {
            moduli: self.moduli.clone(),
            coords,
        }
    }

    /// Tower coordinates `x_k mod lcm(b_1..b_k)`, or `None` when the product
    /// coordinates do not come from a point of the odometer.
    pub fn tower(&self) -> Option<Vec<BigUint>> {
        let mut out = Vec::with_capacity(self.level());
        let (mut x, mut m) = (BigInt::zero(), BigInt::one());
        for (&b, &g) in self.moduli.iter().zip(&self.coords) {
            (x, m) = crt_merge(&x, &m, &BigInt::from(g), &BigInt::from(b))?;
            out.push(x.to_biguint().expect("reduced residue is nonnegative"));
        }
        Some(out)
    }

    /// Inverse direction: reduces tower coordinates back to product form.
    pub fn from_tower(moduli: &[u64], tower: &[BigUint]) -> Result<Self> {
        if moduli.len() != tower.len() {
            return Err(Error::InvalidArgument(
                "tower length differs from level".into(),
            ));
        }
        let coords = moduli
            .iter()
            .zip(tower)
            .map(|(&b, t)| (t % BigUint::from(b)).to_u64().unwrap())
            .collect();
        OdometerPoint::new(moduli.to_vec(), coords)
    }
}

fn crt_merge(r1: &BigInt, m1: &BigInt, r2: &BigInt, m2: &BigInt) -> Option<(BigInt, BigInt)> {
    let e = m1.extended_gcd(m2);
    let g = e.gcd;
    let diff = r2 - r1;
    if !(&diff % &g).is_zero() {
        return None;
    }
    let l = m1 / &g * m2;
    let mut x = r1 + m1 * ((&diff / &g * e.x) % (m2 / &g));
    x = x.mod_floor(&l);
    debug_assert!(!x.is_negative());
    Some((x, l))
}

/// Bit `i` is 1 iff `start + i + g_k` is divisible by no `b_k`.
pub fn phi(point: &OdometerPoint, start: i64, len: u64) -> Block {
    let mut bits = vec![true; len as usize];
    for (&b, &g) in point.moduli.iter().zip(&point.coords) {
        let mut i = modulo(-(start as i128) - g as i128, b);
        while i < len {
            bits[i as usize] = false;
            i += b;
        }
    }
    Block::from_bits(bits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Theta {
    Point {
        point: OdometerPoint,
    },
    /// Some modulus misses several residues: candidate coordinates per modulus.
    Ambiguous {
        candidates: Vec<(u64, Vec<u64>)>,
    },
}

/// Recovers `g` from a word read at `[start, start + n)`: `g_k` is the unique
/// residue with `supp ∩ (b_k Z - g_k) = ∅`.
pub fn theta(block: &Block, start: i64, moduli: &[u64]) -> Result<Theta> {
    let support: Vec<i128> = block
        .support()
        .into_iter()
        .map(|p| start as i128 + p as i128 - 1)
        .collect();
    let mut candidates = Vec::with_capacity(moduli.len());
    let mut unique = true;
    for &b in moduli {
        let mut hit = vec![false; b as usize];
        for &p in &support {
            hit[modulo(p, b) as usize] = true;
        }
        let gs: Vec<u64> = (0..b)
            .filter(|&r| !hit[r as usize])
            .map(|r| modulo(-(r as i128), b))
            .collect();
        if gs.is_empty() {
            return Err(Error::NotInY { modulus: b });
        }
        unique &= gs.len() == 1;
        let mut gs = gs;
        gs.sort_unstable();
        candidates.push((b, gs));
    }
    if unique {
        let coords = candidates.iter().map(|c| c.1[0]).collect();
        Ok(Theta::Point {
            point: OdometerPoint::new(moduli.to_vec(), coords)?,
        })
    } else {
        Ok(Theta::Ambiguous { candidates })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bset::BFamily;
    use crate::par::Parallelism;
    use crate::sieve::sieve_window;
    use proptest::prelude::*;

    fn pt(m: &[u64], g: &[u64]) -> OdometerPoint {
        OdometerPoint::new(m.to_vec(), g.to_vec()).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&pt(&[2, 3], &[0, 0]), 0, 6).to_string(), "010001");
        assert_eq!(phi(&pt(&[2, 3], &[1, 0]), 0, 6).to_string(), "001010");
        let fam = BFamily::explicit([4, 6, 9]);
        let w = sieve_window(&fam, -40, 90, Parallelism::Sequential).unwrap();
        let mut eta = w.to_bools();
        eta[40] = false; // phi(0) also vanishes at 0
        assert_eq!(
            phi(&pt(&[4, 6, 9], &[0, 0, 0]), -40, 90).bits(),
            eta.as_slice()
        );
    }

    #[test]
    fn theta_examples() {
        let m = [2u64, 3];
        let eta = phi(&pt(&m, &[0, 0]), 1, 12);
        assert_eq!(
            theta(&eta, 1, &m).unwrap(),
            Theta::Point {
                point: pt(&m, &[0, 0])
            }
        );
        let shifted = phi(&pt(&m, &[0, 0]), 4, 12); // S^3 eta read on [1, 12]
        assert_eq!(
            theta(&shifted, 1, &m).unwrap(),
            Theta::Point {
                point: pt(&m, &[1, 0])
            }
        );
        let ones: Block = "11".parse().unwrap();
        assert_eq!(theta(&ones, 1, &[2]), Err(Error::NotInY { modulus: 2 }));
        let short: Block = "1".parse().unwrap();
        assert!(matches!(
            theta(&short, 1, &[3]).unwrap(),
            Theta::Ambiguous { .. }
        ));
    }

    #[test]
    fn tower_roundtrip_and_inconsistency() {
        let p = OdometerPoint::from_integer(&[4, 6, 10], 37);
        let t = p.tower().unwrap();
        assert_eq!(
            t,
            vec![
                BigUint::from(1u32),
                BigUint::from(1u32),
                BigUint::from(37u32)
            ]
        );
        assert_eq!(OdometerPoint::from_tower(&[4, 6, 10], &t).unwrap(), p);
        assert_eq!(pt(&[4, 6], &[1, 2]).tower(), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 10_000, rng_seed: proptest::test_runner::RngSeed::Fixed(17), ..ProptestConfig::default() })]

        #[test]
        fn tower_reduces_to_product(n in any::<i64>(), mods in prop::collection::vec(1u64..500, 1..6)) {
            let p = OdometerPoint::from_integer(&mods, n as i128);
            let t = p.tower().unwrap();
            prop_assert_eq!(OdometerPoint::from_tower(&mods, &t).unwrap(), p);
            // tower coordinates are compatible: each reduces onto the previous level
            let mut l = BigUint::one();
            for (k, &b) in mods.iter().enumerate() {
                l = l.lcm(&BigUint::from(b));
                prop_assert_eq!(&t[k], &(BigInt::from(n).mod_floor(&BigInt::from(l.clone()))).to_biguint().unwrap());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(19), ..ProptestConfig::default() })]

        #[test]
        fn phi_is_equivariant(mods in prop::collection::vec(2u64..9, 1..4)) {
            let l: u64 = crate::sieve::period_of(&mods, &crate::Budget::default()).unwrap();
            for n in 0..l as i128 {
                let g = OdometerPoint::from_integer(&mods, n);
                let a = phi(&g.rotate(1), 0, 2 * l);
                let b = phi(&g, 1, 2 * l);
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn theta_inverts_phi_on_y(mods in prop::collection::vec(2u64..9, 1..4)) {
            let l: u64 = crate::sieve::period_of(&mods, &crate::Budget::default()).unwrap();
            for n in 0..l as i128 {
                let g = OdometerPoint::from_integer(&mods, n);
                let y = phi(&g, 1, 2 * l);
                match theta(&y, 1, &mods) {
                    Ok(Theta::Point { point }) => {
                        prop_assert_eq!(&phi(&point, 1, 2 * l), &y);
                        prop_assert_eq!(point, g);
                    }
                    // a modulus whose class is covered by the others leaves several candidates
                    Ok(Theta::Ambiguous { candidates }) => {
                        for (k, (_, gs)) in candidates.iter().enumerate() {
                            prop_assert!(gs.contains(&g.coords[k]));
                        }
                    }
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }
}
