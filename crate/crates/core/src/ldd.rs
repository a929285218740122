//! Exact probability masses and the level-difference distribution.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::types::Coord;

/// Largest level difference a length-`s` query can produce: the deepest
/// level whose canonical intervals can still contain the query.
///
/// Returns the largest integer `kappa` with `2^kappa * s <= N`, computed
/// with integer comparisons rather than floating logarithms so boundary
/// values (`s` an exact power of two) classify correctly.
pub fn kappa_of(n_points: u64, s: &Coord) -> Result<u32> {
    let num = *s.numer();
    let den = *s.denom();
    if num < den {
        return Err(Error::ParameterRange(format!(
            "query length s={s} must be at least 1"
        )));
    }
    // s <= N  <=>  num <= N * den
    let scaled_n = (n_points as u128) * (den as u128);
    if (num as u128) > scaled_n {
        return Err(Error::ParameterRange(format!(
            "query length s={s} exceeds the dataset size N={n_points}"
        )));
    }
    // 2^k <= N/s  <=>  2^k <= floor(N*den/num) for integer 2^k.
    let q = scaled_n / (num as u128);
    debug_assert!(q >= 1);
    Ok(q.ilog2())
}

/// An exact rational probability in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Probability(BigRational);

impl Probability {
    pub fn new(value: BigRational) -> Result<Self> {
        if value.is_negative() || value > BigRational::one() {
            return Err(Error::Validation(format!(
                "probability {value} is outside [0, 1]"
            )));
        }
        Ok(Probability(value))
    }

    pub fn zero() -> Self {
        Probability(BigRational::zero())
    }

    pub fn one() -> Self {
        Probability(BigRational::one())
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_rational(&self.0, serializer)
    }
}

/// Serializes a rational as `{numerator, denominator, float}` with decimal
/// string numerator/denominator (they can exceed JSON's number range).
pub fn serialize_rational<S: Serializer>(
    value: &BigRational,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut map = serializer.serialize_map(Some(3))?;
    map.serialize_entry("numerator", &value.numer().to_string())?;
    map.serialize_entry("denominator", &value.denom().to_string())?;
    map.serialize_entry("float", &value.to_f64().unwrap_or(f64::NAN))?;
    map.end()
}

pub fn big_ratio_from_coord(c: &Coord) -> BigRational {
    BigRational::new(BigInt::from(*c.numer()), BigInt::from(*c.denom()))
}

/// Distribution of `level_cDAG(Q) - level_Tree(Q)` over `k in {0..=kappa}`.
///
/// Masses are exact rationals and must sum to exactly 1; every key in
/// `0..=kappa` is present (possibly zero) so distributions compare
/// mass-by-mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelDifferenceDistribution {
    kappa: u32,
    mass: BTreeMap<u32, Probability>,
}

impl LevelDifferenceDistribution {
    pub fn new(kappa: u32, mut mass: BTreeMap<u32, Probability>) -> Result<Self> {
        if let Some(&k) = mass.keys().next_back() {
            if k > kappa {
                return Err(Error::Validation(format!(
                    "mass at k={k} lies outside {{0..={kappa}}}"
                )));
            }
        }
        for k in 0..=kappa {
            mass.entry(k).or_insert_with(Probability::zero);
        }
        let total: BigRational = mass.values().map(|p| p.ratio().clone()).sum();
        if !total.is_one() {
            return Err(Error::Validation(format!(
                "masses sum to {total}, expected exactly 1"
            )));
        }
        Ok(LevelDifferenceDistribution { kappa, mass })
    }

    /// Point mass at `k = 0` with the given `kappa` extent.
    pub fn point_mass_at_zero(kappa: u32) -> Self {
        let mut mass = BTreeMap::new();
        mass.insert(0, Probability::one());
        Self::new(kappa, mass).expect("point mass is a valid distribution")
    }

    /// Empirical distribution from observation counts.
    pub fn from_counts(counts: &BTreeMap<u32, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::Validation(
                "cannot form a distribution from zero observations".into(),
            ));
        }
        let kappa = *counts
            .iter()
            .filter(|(_, &v)| v > 0)
            .map(|(k, _)| k)
            .max()
            .expect("total > 0 implies a nonzero count");
        let mut mass = BTreeMap::new();
        for (&k, &count) in counts {
            let p = BigRational::new(BigInt::from(count), BigInt::from(total));
            mass.insert(k, Probability::new(p)?);
        }
        Self::new(kappa, mass)
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    /// Mass at `k`; zero outside the stored support.
    pub fn mass(&self, k: u32) -> Probability {
        self.mass.get(&k).cloned().unwrap_or_else(Probability::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Probability)> {
        self.mass.iter().map(|(&k, p)| (k, p))
    }

    /// Masses as `f64`, indexed by `k` from 0 to `kappa`.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..=self.kappa).map(|k| self.mass(k).to_f64()).collect()
    }
}

impl Serialize for LevelDifferenceDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            k: u32,
            numerator: String,
            denominator: String,
            float: f64,
        }
        let mut seq = serializer.serialize_seq(Some(self.mass.len()))?;
        for (k, p) in self.iter() {
            seq.serialize_element(&Row {
                k,
                numerator: p.ratio().numer().to_string(),
                denominator: p.ratio().denom().to_string(),
                float: p.to_f64(),
            })?;
        }
        seq.end()
    }
}
