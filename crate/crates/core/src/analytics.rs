//! Closed-form level-difference distributions, expectation bounds, the
//! skewed-data fitting procedure, and entropy metrics.
//!
//! All distribution masses and expectations are exact rationals, so the
//! identities checked against the sweep oracle are equality checks, not
//! tolerance checks. Floating point appears only in derived report values
//! (L2 distances, entropy, epsilon-adjusted bounds).

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ldd::{
    big_ratio_from_coord, kappa_of, serialize_rational, LevelDifferenceDistribution, Probability,
};
use crate::types::{coord_from_u64, Coord};

/// Limit of the level-difference bound `2(c-2)/(c-1)` as `c` grows.
pub const LEVEL_DIFF_BOUND_LIMIT: f64 = 2.0;

/// Which branch of the distribution applies to a query length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `s = 1`: point queries, both structures return the same leaf.
    UnitLength,
    /// `2^(n-kappa) < s <= (c-2)/(c-1) * 2^(n-kappa+1)`.
    SmallS,
    /// `(c-2)/(c-1) * 2^(n-kappa+1) < s <= 2^(n-kappa+1)`.
    LargeS,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::UnitLength => write!(f, "s=1"),
            Regime::SmallS => write!(f, "small-s"),
            Regime::LargeS => write!(f, "large-s"),
        }
    }
}

/// `n` such that `N = 2^(n+1)`, or a theory-domain error.
pub fn theory_exponent(n_points: u64) -> Result<u32> {
    if n_points >= 2 && n_points.is_power_of_two() {
        Ok(n_points.ilog2() - 1)
    } else {
        Err(Error::TheoryDomain(format!(
            "N={n_points} is not of the form 2^(n+1)"
        )))
    }
}

/// `alpha >= 1` such that `c = 2^alpha + 1`, or a theory-domain error.
pub fn theory_alpha(c: u32) -> Result<u32> {
    if c >= 3 && (c - 1).is_power_of_two() {
        Ok((c - 1).ilog2())
    } else {
        Err(Error::TheoryDomain(format!(
            "c={c} is not of the form 2^alpha + 1"
        )))
    }
}

/// `2^e` as an exact rational; negative exponents give `1/2^|e|`.
fn pow2(e: i64) -> BigRational {
    let mag = BigInt::one() << e.unsigned_abs() as usize;
    if e >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    }
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Which regime a valid `(N, c, s)` triple falls in.
pub fn regime_of(n_points: u64, c: u32, s: &Coord) -> Result<Regime> {
    theory_exponent(n_points)?;
    theory_alpha(c)?;
    if s == &coord_from_u64(1) {
        return Ok(Regime::UnitLength);
    }
    let n = theory_exponent(n_points)? as i64;
    let kappa = kappa_of(n_points, s)? as i64;
    // (c-1) * s <= (c-2) * 2^(n-kappa+1), exactly.
    let s_big = big_ratio_from_coord(s);
    let lhs = int(c as i64 - 1) * &s_big;
    let rhs = int(c as i64 - 2) * pow2(n - kappa + 1);
    if lhs <= rhs {
        Ok(Regime::SmallS)
    } else {
        Ok(Regime::LargeS)
    }
}

/// The exact quasi-dyadic level-difference distribution for a uniform
/// dataset of `N = 2^(n+1)` points and a c-DAG with `c = 2^alpha + 1`.
pub fn theoretical_ldd(
    n_points: u64,
    c: u32,
    s: &Coord,
) -> Result<LevelDifferenceDistribution> {
    let n = theory_exponent(n_points)? as i64;
    theory_alpha(c)?;
    let kappa = kappa_of(n_points, s)?; // also validates 1 <= s <= N
    if s == &coord_from_u64(1) {
        // Point queries hit the same leaf in both structures.
        return Ok(LevelDifferenceDistribution::point_mass_at_zero(kappa));
    }
    if kappa == 0 {
        // Only the root can cover the query in either structure.
        return Ok(LevelDifferenceDistribution::point_mass_at_zero(0));
    }
    let kappa_i = kappa as i64;
    let s_big = big_ratio_from_coord(s);
    let denom = pow2(n + 1) - &s_big;
    debug_assert!(denom.is_positive());
    let cc = c as i64;

    let mut mass: BTreeMap<u32, Probability> = BTreeMap::new();
    let mut put = |k: u32, numer: BigRational| -> Result<()> {
        mass.insert(k, Probability::new(numer / &denom)?);
        Ok(())
    };

    match regime_of(n_points, c, s)? {
        Regime::UnitLength => unreachable!("handled above"),
        Regime::SmallS => {
            put(0, pow2(n + 1) - pow2(kappa_i) * &s_big)?;
            for k in 1..=kappa {
                put(k, pow2(kappa_i - k as i64) * &s_big)?;
            }
        }
        Regime::LargeS => {
            put(0, int(4 - cc) * pow2(n) + int(cc - 3) * pow2(kappa_i - 1) * &s_big)?;
            for k in 1..kappa {
                put(
                    k,
                    int(cc - 2) * pow2(n - k as i64)
                        - int(cc - 3) * pow2(kappa_i - k as i64 - 1) * &s_big,
                )?;
            }
            put(kappa, int(cc - 2) * (pow2(n - kappa_i + 1) - &s_big))?;
        }
    }
    LevelDifferenceDistribution::new(kappa, mass)
}

/// `sum_k k * mass(k)` — the expected additive search-time overhead.
pub fn expected_level_difference(dist: &LevelDifferenceDistribution) -> BigRational {
    dist.iter()
        .map(|(k, p)| int(k as i64) * p.ratio())
        .sum()
}

/// Closed form for the expected level difference on theory inputs.
pub fn expected_level_difference_closed_form(
    n_points: u64,
    c: u32,
    s: &Coord,
) -> Result<BigRational> {
    let n = theory_exponent(n_points)? as i64;
    let regime = regime_of(n_points, c, s)?;
    if regime == Regime::UnitLength {
        return Ok(BigRational::zero());
    }
    let kappa = kappa_of(n_points, s)? as i64;
    if kappa == 0 {
        // Both structures always return the root; the branch formulas
        // reduce to 0 but are singular at s = N.
        return Ok(BigRational::zero());
    }
    let s_big = big_ratio_from_coord(s);
    let denom = pow2(n + 1) - &s_big;
    let cc = c as i64;
    let numer = match regime {
        Regime::UnitLength => unreachable!(),
        Regime::SmallS => (pow2(kappa + 1) - int(kappa + 2)) * &s_big,
        Regime::LargeS => {
            int(cc - 2) * pow2(n - kappa + 1) * (pow2(kappa) - int(1))
                + &s_big * (int(3 - cc) * (pow2(kappa) - int(1)) - int(kappa))
        }
    };
    Ok(numer / denom)
}

/// The additive overhead bound `2(c-2)/(c-1)`.
pub fn level_difference_bound(c: u32) -> Result<f64> {
    Ok(level_difference_bound_exact(c)?.to_f64().expect("finite"))
}

/// Exact-rational form of the bound, for strict comparisons.
pub fn level_difference_bound_exact(c: u32) -> Result<BigRational> {
    if c < 3 {
        return Err(Error::ParameterRange(format!(
            "level-difference bound requires c >= 3, got {c}"
        )));
    }
    Ok(BigRational::new(
        BigInt::from(2 * (c as i64 - 2)),
        BigInt::from(c as i64 - 1),
    ))
}

/// `sum_k 2^k * mass(k)` — the expected FP-competitive ratio.
pub fn expected_fp_ratio(dist: &LevelDifferenceDistribution) -> BigRational {
    dist.iter()
        .map(|(k, p)| pow2(k as i64) * p.ratio())
        .sum()
}

/// Closed form for the expected FP-competitive ratio on theory inputs.
pub fn expected_fp_ratio_closed_form(n_points: u64, c: u32, s: &Coord) -> Result<BigRational> {
    let n = theory_exponent(n_points)? as i64;
    let regime = regime_of(n_points, c, s)?;
    if regime == Regime::UnitLength {
        return Ok(BigRational::one());
    }
    let kappa = kappa_of(n_points, s)? as i64;
    if kappa == 0 {
        // Point mass at k = 0, so the expected ratio is exactly 1; the
        // branch formulas reduce to 1 but are singular at s = N.
        return Ok(BigRational::one());
    }
    let s_big = big_ratio_from_coord(s);
    let denom = pow2(n + 1) - &s_big;
    let cc = c as i64;
    let numer = match regime {
        Regime::UnitLength => unreachable!(),
        Regime::SmallS => pow2(n + 1) + int(kappa - 1) * pow2(kappa) * &s_big,
        Regime::LargeS => {
            int((cc - 2) * kappa + 2) * pow2(n)
                - int((cc - 3) * kappa + 2) * pow2(kappa - 1) * &s_big
        }
    };
    Ok(numer / denom)
}

/// The multiplicative lower bound `max{1, kappa/2}`.
pub fn fp_ratio_lower_bound(n_points: u64, s: &Coord) -> Result<f64> {
    let kappa = kappa_of(n_points, s)?;
    Ok((kappa as f64 / 2.0).max(1.0))
}

/// Exact squared L2 distance between two distributions; missing `k`s count
/// as zero mass, so the supports need not match.
pub fn l2_distance_squared(
    d1: &LevelDifferenceDistribution,
    d2: &LevelDifferenceDistribution,
) -> BigRational {
    let hi = d1.kappa().max(d2.kappa());
    (0..=hi)
        .map(|k| {
            let diff = d1.mass(k).ratio() - d2.mass(k).ratio();
            &diff * &diff
        })
        .sum()
}

/// L2 distance between two distributions.
pub fn l2_distance(d1: &LevelDifferenceDistribution, d2: &LevelDifferenceDistribution) -> f64 {
    l2_distance_squared(d1, d2)
        .to_f64()
        .map(f64::sqrt)
        .unwrap_or(f64::NAN)
}

/// Outcome of fitting an empirical distribution to the closest theory
/// distribution over integer query lengths.
#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    /// Fitted query length parameter.
    pub s_star: u64,
    /// L2 distance achieved at `s_star`.
    pub epsilon: f64,
    /// `kappa` for the fitted length.
    pub kappa_star: u32,
    /// Exact squared distance, kept for deterministic comparisons.
    #[serde(serialize_with = "serialize_rational")]
    pub l2_squared: BigRational,
}

/// Scans every integer `s* in {1..=N}` and returns the length whose
/// theoretical distribution is L2-closest to `empirical`. Ties go to the
/// smaller `s*`.
pub fn fit_closest_theoretical(
    empirical: &LevelDifferenceDistribution,
    n_points: u64,
    c: u32,
) -> Result<FitResult> {
    theory_exponent(n_points)?;
    theory_alpha(c)?;
    let mut best: Option<(u64, BigRational)> = None;
    for s_star in 1..=n_points {
        let dist = theoretical_ldd(n_points, c, &coord_from_u64(s_star))?;
        let d2 = l2_distance_squared(empirical, &dist);
        let improves = match &best {
            None => true,
            Some((_, cur)) => d2 < *cur,
        };
        if improves {
            best = Some((s_star, d2));
        }
    }
    let (s_star, l2_squared) = best.expect("N >= 2 so the scan is non-empty");
    Ok(FitResult {
        s_star,
        epsilon: l2_squared.to_f64().map(f64::sqrt).unwrap_or(f64::NAN),
        kappa_star: kappa_of(n_points, &coord_from_u64(s_star))?,
        l2_squared,
    })
}

/// Theory bounds evaluated at a fitted `(s*, epsilon)`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub regime: Regime,
    /// Expected level difference of the fitted theoretical distribution.
    #[serde(serialize_with = "serialize_rational")]
    pub expected_level_diff: BigRational,
    /// `2(c-2)/(c-1) + epsilon * kappa`.
    pub level_diff_bound: f64,
    /// Expected FP-competitive ratio of the fitted distribution.
    #[serde(serialize_with = "serialize_rational")]
    pub expected_fp_ratio: BigRational,
    /// `max{1, kappa/2} - 2^(epsilon * kappa)`; may be non-positive.
    pub fp_ratio_lower_bound: f64,
    /// Set when the FP lower bound is <= 0 and therefore uninformative.
    pub vacuous_fp_bound: bool,
}

/// Applies the epsilon-adjusted bounds to a fit.
pub fn corollary_bounds(fit: &FitResult, c: u32, n_points: u64) -> Result<BoundReport> {
    let s = coord_from_u64(fit.s_star);
    let kappa = fit.kappa_star as f64;
    let dist = theoretical_ldd(n_points, c, &s)?;
    let level_diff_bound = level_difference_bound(c)? + fit.epsilon * kappa;
    let fp_lower = (kappa / 2.0).max(1.0) - (fit.epsilon * kappa).exp2();
    Ok(BoundReport {
        regime: regime_of(n_points, c, &s)?,
        expected_level_diff: expected_level_difference(&dist),
        level_diff_bound,
        expected_fp_ratio: expected_fp_ratio(&dist),
        fp_ratio_lower_bound: fp_lower,
        vacuous_fp_bound: fp_lower <= 0.0,
    })
}

/// Shannon entropy (bits) of a returned-level distribution.
///
/// The probabilities must sum to 1 within 1e-9.
pub fn shannon_entropy(level_probs: &BTreeMap<u32, f64>) -> Result<f64> {
    let total: f64 = level_probs.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "level probabilities sum to {total}, expected 1"
        )));
    }
    if level_probs.values().any(|&p| p < 0.0) {
        return Err(Error::Validation(
            "level probabilities must be non-negative".into(),
        ));
    }
    Ok(level_probs
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum())
}

/// Per-structure returned-level probabilities with their entropy.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub per_level: BTreeMap<u32, f64>,
    pub entropy_bits: f64,
    pub support_size: usize,
}

impl EntropyReport {
    pub fn from_counts(counts: &BTreeMap<u32, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::Validation(
                "cannot compute entropy of an empty histogram".into(),
            ));
        }
        let per_level: BTreeMap<u32, f64> = counts
            .iter()
            .map(|(&l, &c)| (l, c as f64 / total as f64))
            .collect();
        let entropy_bits = shannon_entropy(&per_level)?;
        let support_size = counts.values().filter(|&&c| c > 0).count();
        Ok(EntropyReport {
            per_level,
            entropy_bits,
            support_size,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn c64(v: u64) -> Coord {
        coord_from_u64(v)
    }

    #[test]
    fn theoretical_small_s_frozen() {
        let d = theoretical_ldd(16, 5, &c64(3)).unwrap();
        assert_eq!(d.mass(0).ratio(), &ratio(4, 13));
        assert_eq!(d.mass(1).ratio(), &ratio(6, 13));
        assert_eq!(d.mass(2).ratio(), &ratio(3, 13));
        assert_eq!(regime_of(16, 5, &c64(3)).unwrap(), Regime::SmallS);
    }

    #[test]
    fn theoretical_large_s_frozen() {
        let d = theoretical_ldd(16, 3, &c64(4)).unwrap();
        assert_eq!(d.mass(0).ratio(), &ratio(2, 3));
        assert_eq!(d.mass(1).ratio(), &ratio(1, 3));
        assert_eq!(d.mass(2).ratio(), &ratio(0, 1));
        assert_eq!(regime_of(16, 3, &c64(4)).unwrap(), Regime::LargeS);
    }

    #[test]
    fn theoretical_unit_length_point_mass() {
        for (n, c) in [(4u64, 3u32), (16, 5), (256, 9)] {
            let d = theoretical_ldd(n, c, &c64(1)).unwrap();
            assert!(d.mass(0).ratio().is_one());
        }
    }

    #[test]
    fn theory_domain_errors() {
        assert!(theoretical_ldd(12, 3, &c64(2)).is_err());
        assert!(theoretical_ldd(16, 4, &c64(2)).is_err());
        assert!(theoretical_ldd(1, 3, &c64(1)).is_err());
        assert!(theoretical_ldd(16, 3, &c64(17)).is_err());
    }

    #[test]
    fn expected_level_difference_frozen() {
        let d = theoretical_ldd(16, 5, &c64(3)).unwrap();
        assert_eq!(expected_level_difference(&d), ratio(12, 13));
        let d = theoretical_ldd(16, 3, &c64(4)).unwrap();
        assert_eq!(expected_level_difference(&d), ratio(1, 3));
        let point = LevelDifferenceDistribution::point_mass_at_zero(3);
        assert_eq!(expected_level_difference(&point), BigRational::zero());
    }

    #[test]
    fn closed_forms_match_sums_on_spots() {
        for (n, c, s) in [(16u64, 5u32, 3u64), (16, 3, 4), (64, 9, 7), (64, 5, 64)] {
            let d = theoretical_ldd(n, c, &c64(s)).unwrap();
            assert_eq!(
                expected_level_difference(&d),
                expected_level_difference_closed_form(n, c, &c64(s)).unwrap(),
                "E[k] n={n} c={c} s={s}"
            );
            assert_eq!(
                expected_fp_ratio(&d),
                expected_fp_ratio_closed_form(n, c, &c64(s)).unwrap(),
                "E[2^k] n={n} c={c} s={s}"
            );
        }
    }

    #[test]
    fn level_bound_values() {
        assert_eq!(level_difference_bound(3).unwrap(), 1.0);
        assert_eq!(level_difference_bound(5).unwrap(), 1.5);
        assert!(level_difference_bound(2).is_err());
        assert_eq!(LEVEL_DIFF_BOUND_LIMIT, 2.0);
    }

    #[test]
    fn fp_ratio_frozen() {
        let d = theoretical_ldd(16, 5, &c64(3)).unwrap();
        assert_eq!(expected_fp_ratio(&d), ratio(28, 13));
        let d = theoretical_ldd(16, 3, &c64(4)).unwrap();
        assert_eq!(expected_fp_ratio(&d), ratio(4, 3));
        let unit = theoretical_ldd(16, 3, &c64(1)).unwrap();
        assert_eq!(expected_fp_ratio(&unit), BigRational::one());
    }

    #[test]
    fn fp_lower_bound_values() {
        assert_eq!(fp_ratio_lower_bound(16, &c64(4)).unwrap(), 1.0);
        assert_eq!(fp_ratio_lower_bound(1 << 22, &c64(1)).unwrap(), 11.0);
        assert_eq!(fp_ratio_lower_bound(1 << 22, &c64(1 << 22)).unwrap(), 1.0);
    }

    #[test]
    fn l2_distance_cases() {
        let a = theoretical_ldd(16, 5, &c64(3)).unwrap();
        assert_eq!(l2_distance(&a, &a), 0.0);
        let p0 = LevelDifferenceDistribution::point_mass_at_zero(0);
        let mut m = BTreeMap::new();
        m.insert(1u32, Probability::one());
        let p1 = LevelDifferenceDistribution::new(1, m).unwrap();
        assert!((l2_distance(&p0, &p1) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            l2_distance_squared(&a, &p0),
            l2_distance_squared(&p0, &a)
        );
    }

    #[test]
    fn fit_self_match() {
        let d = theoretical_ldd(16, 5, &c64(3)).unwrap();
        let fit = fit_closest_theoretical(&d, 16, 5).unwrap();
        assert_eq!(fit.s_star, 3);
        assert_eq!(fit.epsilon, 0.0);
        assert_eq!(fit.kappa_star, 2);
    }

    #[test]
    fn fit_point_mass_prefers_smallest_length() {
        let p0 = LevelDifferenceDistribution::point_mass_at_zero(0);
        let fit = fit_closest_theoretical(&p0, 16, 3).unwrap();
        assert_eq!(fit.s_star, 1);
        assert_eq!(fit.epsilon, 0.0);
    }

    #[test]
    fn fit_survives_small_perturbation() {
        let d = theoretical_ldd(16, 5, &c64(3)).unwrap();
        let delta = ratio(1, 100);
        let mut mass = BTreeMap::new();
        for (k, p) in d.iter() {
            let adjusted = match k {
                0 => p.ratio() + &delta,
                1 => p.ratio() - &delta,
                _ => p.ratio().clone(),
            };
            mass.insert(k, Probability::new(adjusted).unwrap());
        }
        let perturbed = LevelDifferenceDistribution::new(d.kappa(), mass).unwrap();
        let fit = fit_closest_theoretical(&perturbed, 16, 5).unwrap();
        assert_eq!(fit.s_star, 3);
        assert!(fit.epsilon <= 0.02, "epsilon {}", fit.epsilon);
    }

    #[test]
    fn corollary_bound_substitutions() {
        // epsilon = 0, c = 3, kappa = 2.
        let fit = FitResult {
            s_star: 4,
            epsilon: 0.0,
            kappa_star: 2,
            l2_squared: BigRational::zero(),
        };
        let b = corollary_bounds(&fit, 3, 16).unwrap();
        assert_eq!(b.level_diff_bound, 1.0);
        assert_eq!(b.fp_ratio_lower_bound, 0.0);
        assert!(b.vacuous_fp_bound);

        // epsilon = 0, c = 5, kappa = 10 (N = 2^12, s* = 4 gives kappa 10).
        let fit = FitResult {
            s_star: 4,
            epsilon: 0.0,
            kappa_star: 10,
            l2_squared: BigRational::zero(),
        };
        let b = corollary_bounds(&fit, 5, 1 << 12).unwrap();
        assert_eq!(b.level_diff_bound, 1.5);
        assert_eq!(b.fp_ratio_lower_bound, 4.0);
        assert!(!b.vacuous_fp_bound);

        // epsilon = 0.1, kappa = 10, c = 3.
        let fit = FitResult {
            s_star: 4,
            epsilon: 0.1,
            kappa_star: 10,
            l2_squared: BigRational::zero(),
        };
        let b = corollary_bounds(&fit, 3, 1 << 12).unwrap();
        assert!((b.level_diff_bound - 2.0).abs() < 1e-12);
        assert!((b.fp_ratio_lower_bound - 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_cases() {
        let mut m = BTreeMap::new();
        m.insert(4u32, 1.0);
        assert_eq!(shannon_entropy(&m).unwrap(), 0.0);

        let mut m = BTreeMap::new();
        m.insert(0u32, 0.5);
        m.insert(1u32, 0.5);
        assert_eq!(shannon_entropy(&m).unwrap(), 1.0);

        let mut m = BTreeMap::new();
        m.insert(0u32, 2.0 / 3.0);
        m.insert(1u32, 1.0 / 3.0);
        assert!((shannon_entropy(&m).unwrap() - 0.9183).abs() < 1e-4);

        let mut m = BTreeMap::new();
        m.insert(0u32, 0.4);
        assert!(shannon_entropy(&m).is_err());
    }
}
