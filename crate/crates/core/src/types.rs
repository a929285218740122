//! Shared domain types: exact coordinates, intervals, queries, and node
//! records.
//!
//! Query coordinates are exact rationals (`Coord`). Dataset points are
//! integers, so interval endpoints are integers, but query starts may be
//! real-valued; keeping them rational makes every containment test and
//! every sweep segment classification unambiguous.

use num::rational::Ratio;
use num::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Exact rational coordinate.
///
/// `i128` numerators/denominators are ample for this crate's ranges:
/// domain sizes are capped at `DOMAIN_LIMIT` and parsed decimals at six
/// fractional digits, so all cross-multiplications stay far below `i128`
/// overflow.
pub type Coord = Ratio<i128>;

/// Exclusive upper bound on domain sizes (2^40). Keeps all rational
/// coordinate arithmetic comfortably inside `i128`.
pub const DOMAIN_LIMIT: u64 = 1 << 40;

/// Largest denominator accepted when parsing decimal coordinates.
const MAX_PARSE_DENOMINATOR: i128 = 1_000_000;

pub fn coord_from_u64(v: u64) -> Coord {
    Coord::from_integer(v as i128)
}

/// Parses a non-negative decimal literal ("3600", "3.5", "0.125") into an
/// exact rational. At most six fractional digits are accepted.
pub fn parse_coord(text: &str) -> Result<Coord> {
    let text = text.trim();
    let bad = |m: &str| Error::ParameterRange(format!("invalid coordinate '{text}': {m}"));
    if text.is_empty() {
        return Err(bad("empty"));
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if frac_part.len() > 6 {
        return Err(bad("more than six fractional digits"));
    }
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("no digits"));
    }
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if !digits_ok(int_part) || !digits_ok(frac_part) {
        return Err(bad("expected only digits and at most one '.'"));
    }
    let int_val: i128 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad("integer part too large"))?
    };
    if int_val as u128 >= DOMAIN_LIMIT as u128 {
        return Err(bad("exceeds the supported coordinate range"));
    }
    let mut den: i128 = 1;
    let mut frac_val: i128 = 0;
    for c in frac_part.chars() {
        den *= 10;
        frac_val = frac_val * 10 + (c as i128 - '0' as i128);
    }
    debug_assert!(den <= MAX_PARSE_DENOMINATOR * 10);
    Ok(Ratio::new(int_val * den + frac_val, den))
}

/// Floor of a non-negative coordinate as `u64`.
pub fn coord_floor_u64(v: &Coord) -> u64 {
    debug_assert!(!v.is_negative());
    v.floor().to_integer() as u64
}

pub fn coord_to_f64(v: &Coord) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// A half-open interval `[lo, hi)` in domain coordinates.
///
/// Node canonical intervals always have integer endpoints because dataset
/// points are integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Validation(format!(
                "interval [{lo}, {hi}) is empty"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    /// Does this interval fully contain the query `[x, x+s)`?
    pub fn contains_query(&self, query: &QueryRange) -> bool {
        let lo = coord_from_u64(self.lo);
        let hi = coord_from_u64(self.hi);
        query.start >= lo && query.end() <= hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// A range query `[x, x+s)` with rational start `x >= 0` and length `s > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRange {
    pub start: Coord,
    pub length: Coord,
}

impl QueryRange {
    pub fn new(start: Coord, length: Coord) -> Result<Self> {
        if start.is_negative() {
            return Err(Error::ParameterRange(format!(
                "query start {start} is negative"
            )));
        }
        if length <= Coord::zero() {
            return Err(Error::ParameterRange(format!(
                "query length {length} must be positive"
            )));
        }
        Ok(QueryRange { start, length })
    }

    /// Convenience constructor for integer-aligned queries.
    pub fn from_u64(start: u64, length: u64) -> Self {
        QueryRange {
            start: coord_from_u64(start),
            length: coord_from_u64(length),
        }
    }

    pub fn end(&self) -> Coord {
        &self.start + &self.length
    }

    /// Is the whole query inside `[0, domain_size)`?
    pub fn within_domain(&self, domain_size: u64) -> bool {
        !self.start.is_negative() && self.end() <= coord_from_u64(domain_size)
    }
}

impl std::fmt::Display for QueryRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

/// Branching configuration for an index structure.
///
/// `c = 2` denotes the plain binary tree; `c >= 3` the overlapping DAG
/// family. When `c = 2^alpha + 1` the exponent is recorded so analytics can
/// check theory preconditions without re-deriving it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DagConfig {
    pub c: u32,
    pub theory_alpha: Option<u32>,
}

impl DagConfig {
    pub fn new(c: u32) -> Result<Self> {
        if c < 2 {
            return Err(Error::Configuration(format!(
                "branching factor c={c} must be at least 2"
            )));
        }
        let theory_alpha = if c >= 3 && (c - 1).is_power_of_two() {
            Some((c - 1).trailing_zeros())
        } else {
            None
        };
        Ok(DagConfig { c, theory_alpha })
    }

    pub fn tree() -> Self {
        DagConfig {
            c: 2,
            theory_alpha: None,
        }
    }

    pub fn is_tree(&self) -> bool {
        self.c == 2
    }
}

/// One node of a built structure: a window of consecutive dataset points.
#[derive(Clone, Debug, Serialize)]
pub struct NodeRecord {
    pub id: usize,
    pub level: u32,
    pub interval: Interval,
    /// Index of the first covered point in the dataset's sorted sequence.
    pub point_offset: usize,
    /// Number of covered points, `|D_v|`.
    pub point_count: usize,
    pub children: Vec<usize>,
}

impl NodeRecord {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

pub fn ratio_one() -> Coord {
    Coord::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_coord_accepts_decimals() {
        assert_eq!(parse_coord("3600").unwrap(), coord_from_u64(3600));
        assert_eq!(parse_coord("3.5").unwrap(), Coord::new(7, 2));
        assert_eq!(parse_coord("0.125").unwrap(), Coord::new(1, 8));
    }

    #[test]
    fn parse_coord_rejects_garbage() {
        assert!(parse_coord("").is_err());
        assert!(parse_coord("-3").is_err());
        assert!(parse_coord("1.2345678").is_err());
        assert!(parse_coord("1e5").is_err());
    }

    #[test]
    fn interval_containment() {
        let iv = Interval::new(2, 6).unwrap();
        assert!(iv.contains_query(&QueryRange::from_u64(2, 4)));
        assert!(!iv.contains_query(&QueryRange::from_u64(2, 5)));
        assert!(iv.contains_query(&QueryRange {
            start: Coord::new(5, 2),
            length: Coord::new(7, 2),
        }));
    }

    #[test]
    fn dag_config_alpha_inference() {
        assert_eq!(DagConfig::new(3).unwrap().theory_alpha, Some(1));
        assert_eq!(DagConfig::new(5).unwrap().theory_alpha, Some(2));
        assert_eq!(DagConfig::new(9).unwrap().theory_alpha, Some(3));
        assert_eq!(DagConfig::new(4).unwrap().theory_alpha, None);
        assert_eq!(DagConfig::new(2).unwrap().theory_alpha, None);
        assert!(DagConfig::new(1).is_err());
    }
}
