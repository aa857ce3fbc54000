//! Arithmetic progressions, congruence systems and exact union densities.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{checked_lcm, ext_gcd, gcd, modulo};
use crate::error::{Error, Result};
use crate::ratio::{self, Rational};
use crate::Budget;

/// `step * Z + offset` with `0 <= offset < step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Progression {
    pub step: u64,
    pub offset: u64,
}

impl Progression {
    pub fn new(step: u64, offset: i128) -> Self {
        assert!(step >= 1, "progression step must be positive");
        Progression {
            step,
            offset: modulo(offset, step),
        }
    }

    pub fn contains(&self, n: i128) -> bool {
        modulo(n, self.step) == self.offset
    }
}

/// Residues mod a common step; membership of `n` is `n mod step in residues`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressionSet {
    pub common_step: u64,
    pub residues: Vec<u64>,
}

impl ProgressionSet {
    pub fn contains(&self, n: i128) -> bool {
        self.residues
            .binary_search(&modulo(n, self.common_step))
            .is_ok()
    }

    pub fn density(&self) -> Rational {
        ratio::ratio(self.residues.len() as u64, self.common_step)
    }
}

/// Merges two congruences. `Ok(None)` when they are incompatible.
fn merge(a: Progression, b: Progression) -> Result<Option<Progression>> {
    let g = gcd(a.step, b.step);
    let diff = b.offset as i128 - a.offset as i128;
    if diff % g as i128 != 0 {
        return Ok(None);
    }
    let l = checked_lcm(a.step, b.step).ok_or(Error::StepOverflowBudget {
        step_bits: (a.step as u128 / g as u128 * b.step as u128).ilog2() as u64 + 1,
        budget_bits: 64,
    })?;
    let m = (b.step / g) as i128;
    let (_, inv, _) = ext_gcd((a.step / g) as i128 % m, m);
    let t = modulo(diff / g as i128, m as u64) as u128 * modulo(inv, m as u64) as u128 % m as u128;
    Ok(Some(Progression::new(
        l,
        a.offset as i128 + a.step as i128 * t as i128,
    )))
}

/// Common solutions of `m = r_i mod d_i`, or `None` if the system is unsolvable.
pub fn intersect(ps: &[Progression]) -> Result<Option<Progression>> {
    let (first, rest) = ps
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("intersect needs at least one progression".into()))?;
    let mut acc = *first;
    for &p in rest {
        match merge(acc, p)? {
            Some(q) => acc = q,
            None => return Ok(None),
        }
    }
    Ok(Some(acc))
}

/// Exact residue set of the union, by marking residues mod the common lcm.
pub fn normalize_union(ps: &[Progression], budget: &Budget) -> Result<ProgressionSet> {
    let mut l: u128 = 1;
    for p in ps {
        l = crate::arith::lcm_u128(l, p.step as u128).unwrap_or(u128::MAX);
        if l > u64::MAX as u128 || l.ilog2() >= budget.lcm_bits {
            return Err(Error::StepOverflowBudget {
                step_bits: l.ilog2() as u64 + 1,
                budget_bits: budget.lcm_bits,
            });
        }
    }
    if l > budget.table_limit as u128 {
        return Err(Error::TableTooLarge {
            size: l,
            limit: budget.table_limit,
        });
    }
    let l = l as u64;
    let mut hit = vec![false; l as usize];
    for p in ps {
        let mut r = p.offset;
        while r < l {
            hit[r as usize] = true;
            r += p.step;
        }
    }
    let residues = (0..l).filter(|&r| hit[r as usize]).collect();
    Ok(ProgressionSet {
        common_step: l,
        residues,
    })
}

/// Density of the union by inclusion-exclusion: each solvable subset system
/// contributes `(-1)^(|S|+1) / lcm(S)`.
pub fn union_density_ie(ps: &[Progression]) -> Result<Rational> {
    if ps.len() > 24 {
        return Err(Error::BudgetExceeded(format!(
            "inclusion-exclusion over {} progressions",
            ps.len()
        )));
    }
    let mut total = Rational::zero();
    // depth-first over subsets, carrying the merged progression
    fn walk(
        ps: &[Progression],
        from: usize,
        acc: Progression,
        size: usize,
        total: &mut Rational,
    ) -> Result<()> {
        for i in from..ps.len() {
            if let Some(q) = merge(acc, ps[i])? {
                let term = Rational::new(BigInt::one(), BigInt::from(q.step));
                if size % 2 == 0 {
                    *total += term;
                } else {
                    *total -= term;
                }
                walk(ps, i + 1, q, size + 1, total)?;
            }
        }
        Ok(())
    }
    walk(ps, 0, Progression::new(1, 0), 0, &mut total)?;
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RogersCheck {
    #[serde(with = "crate::ratio")]
    pub lhs: Rational,
    #[serde(with = "crate::ratio")]
    pub rhs: Rational,
    pub holds: bool,
}

/// Compares the density of `U (b_k Z + r_k)` with that of `U b_k Z`.
pub fn rogers_check(mods: &[u64], residues: &[u64]) -> Result<RogersCheck> {
    if mods.len() != residues.len() {
        return Err(Error::InvalidArgument(
            "moduli and residues differ in length".into(),
        ));
    }
    if let Some(i) = (0..mods.len()).find(|&i| mods[i] == 0 || residues[i] >= mods[i]) {
        return Err(Error::InvalidArgument(format!(
            "residue {} not reduced mod {}",
            residues[i], mods[i]
        )));
    }
    let shifted: Vec<_> = mods
        .iter()
        .zip(residues)
        .map(|(&b, &r)| Progression::new(b, r as i128))
        .collect();
    let plain: Vec<_> = mods.iter().map(|&b| Progression::new(b, 0)).collect();
    let lhs = union_density_ie(&shifted)?;
    let rhs = union_density_ie(&plain)?;
    let holds = lhs >= rhs;
    Ok(RogersCheck { lhs, rhs, holds })
}
