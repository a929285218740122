//! The dataset: a sorted, deduplicated sequence of integer points over a
//! half-open domain `[0, M)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::DOMAIN_LIMIT;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Dataset {
    points: Vec<u64>,
    domain_size: u64,
}

impl Dataset {
    /// Builds a dataset, validating that `points` is strictly increasing
    /// and bounded by `domain_size`.
    pub fn new(points: Vec<u64>, domain_size: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if domain_size >= DOMAIN_LIMIT {
            return Err(Error::Capacity(format!(
                "domain size {domain_size} exceeds the supported limit {DOMAIN_LIMIT}"
            )));
        }
        for w in points.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Validation(format!(
                    "points must be strictly increasing; saw {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let max = *points.last().expect("non-empty");
        if max >= domain_size {
            return Err(Error::Validation(format!(
                "point {max} is outside the domain [0, {domain_size})"
            )));
        }
        Ok(Dataset {
            points,
            domain_size,
        })
    }

    /// Builds a dataset whose domain is `max point + 1`.
    pub fn from_points(points: Vec<u64>) -> Result<Self> {
        let domain_size = points.last().map(|&m| m + 1).unwrap_or(0);
        Dataset::new(points, domain_size)
    }

    /// Number of points, `N`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exclusive upper bound of the domain, `M`.
    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> u64 {
        self.points[index]
    }

    /// Number of points with value < `bound_num/bound_den` (exact).
    pub fn rank(&self, bound_num: i128, bound_den: i128) -> usize {
        debug_assert!(bound_den > 0);
        self.points
            .partition_point(|&p| (p as i128) * bound_den < bound_num)
    }
}
