//! Exact rationals and their wire format (`{"num": "...", "den": "..."}`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = BigRational;

pub fn ratio(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator and denominator may both overflow f64; scale down first
        let shift = r.denom().bits().max(r.numer().bits()).saturating_sub(1000);
        let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
        let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
        n / d
    })
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

#[derive(Serialize, Deserialize)]
struct Wire {
    num: String,
    den: String,
}

pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    Wire {
        num: r.numer().to_string(),
        den: r.denom().to_string(),
    }
    .serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    let w = Wire::deserialize(d)?;
    let num: BigInt = w.num.parse().map_err(serde::de::Error::custom)?;
    let den: BigInt = w.den.parse().map_err(serde::de::Error::custom)?;
    if den.is_zero() {
        return Err(serde::de::Error::custom("zero denominator"));
    }
    Ok(Rational::new(num, den))
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => super::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super")] Rational);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}
