//! Independent brute-force references used to validate the structures and
//! the closed-form analytics.
//!
//! Nothing here is a performance path: the searches scan every node, and
//! the sweep enumerates every critical query start. Test suites keep these
//! to datasets of at most 2^13 points.

use std::collections::{BTreeMap, BTreeSet};

use num::rational::BigRational;
use num::{BigInt, Zero};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ldd::{big_ratio_from_coord, kappa_of, LevelDifferenceDistribution, Probability};
use crate::structures::{IndexStructure, SearchResult};
use crate::types::{coord_from_u64, Coord, QueryRange};

/// Exact count of dataset points in `[x, x+s)`.
pub fn exact_range_answer(dataset: &Dataset, query: &QueryRange) -> u64 {
    let end = query.end();
    let hi = dataset.rank(*end.numer(), *end.denom());
    let lo = dataset.rank(*query.start.numer(), *query.start.denom());
    (hi - lo) as u64
}

/// Literal SRC search: scans every node, keeps those containing the query
/// with no containing child, and applies the same tie-break as the descent
/// (deepest level, then smallest lower endpoint, then smallest id).
pub fn brute_force_src(structure: &IndexStructure, query: &QueryRange) -> Result<SearchResult> {
    if !query.within_domain(structure.domain_size()) {
        return Err(Error::Domain(format!(
            "query {query} does not fit in [0, {})",
            structure.domain_size()
        )));
    }
    let nodes = structure.nodes();
    let mut best: Option<&crate::types::NodeRecord> = None;
    for node in nodes {
        if !node.interval.contains_query(query) {
            continue;
        }
        let minimal = node
            .children
            .iter()
            .all(|&ch| !nodes[ch].interval.contains_query(query));
        if !minimal {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                (node.level, std::cmp::Reverse(node.interval.lo), std::cmp::Reverse(node.id))
                    > (b.level, std::cmp::Reverse(b.interval.lo), std::cmp::Reverse(b.id))
            }
        };
        if better {
            best = Some(node);
        }
    }
    let node = best.expect("the root contains every in-domain query");
    Ok(SearchResult {
        node_id: node.id,
        level: node.level,
        covered_count: node.point_count,
        visited_nodes: nodes.len(),
    })
}

/// Exact level-difference measure from a sweep over query starts.
#[derive(Clone, Debug)]
pub struct ExactLdd {
    pub distribution: LevelDifferenceDistribution,
    /// Exact length of start positions producing each
    /// `(tree level, dag level)` pair. Sums to the whole span of valid
    /// starts.
    pub pair_measure: BTreeMap<(u32, u32), BigRational>,
    /// Length of the valid start span, `M - s`.
    pub span: BigRational,
}

fn eval_pair(
    tree: &IndexStructure,
    dag: &IndexStructure,
    query: &QueryRange,
) -> Result<(u32, u32)> {
    let t = tree.deepest_cover(query)?;
    let d = dag.deepest_cover(query)?;
    debug_assert!(
        d.level >= t.level,
        "the dag's node set refines the tree's, so its cover is never shallower"
    );
    Ok((t.level, d.level))
}

/// Sweeps every query start exactly and accumulates rational lengths per
/// `(tree level, dag level)` pair.
///
/// The start `x` ranges over the continuous span `[0, M-s]`; inside each
/// open segment between consecutive critical values (node endpoints and
/// endpoints shifted by `s`) the returned pair is constant, so evaluating
/// the segment midpoint classifies the whole segment. Critical points
/// themselves carry zero measure and are evaluated only as a robustness
/// check. Unit-length queries use integer starts, where both structures
/// return the leaf holding the queried point.
pub fn exact_level_measure(
    tree: &IndexStructure,
    dag: &IndexStructure,
    s: &Coord,
) -> Result<ExactLdd> {
    if !tree.shares_dataset(dag) {
        return Err(Error::Validation(
            "tree and dag must be built over the same dataset".into(),
        ));
    }
    if !tree.config().is_tree() || dag.config().c < 3 {
        return Err(Error::Validation(
            "expected a 1D-Tree and a c-DAG, in that order".into(),
        ));
    }
    let m = tree.domain_size();
    let n = tree.n_points() as u64;
    let one = coord_from_u64(1);
    let m_coord = coord_from_u64(m);
    if s < &one || s > &m_coord {
        return Err(Error::ParameterRange(format!(
            "sweep length s={s} must satisfy 1 <= s <= {m}"
        )));
    }

    // kappa extent for the distribution keys; grows if deeper differences
    // are observed (possible off the uniform grid).
    let kappa_hint = if *s <= coord_from_u64(n) {
        kappa_of(n, s)?
    } else {
        0
    };

    let mut pair_measure: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
    let mut diff_weight: BTreeMap<u32, BigRational> = BTreeMap::new();
    let span_coord = &m_coord - s;
    let span = big_ratio_from_coord(&span_coord);

    if s == &one {
        // Point queries: one query per integer start, uniformly weighted.
        if m > 1 << 20 {
            return Err(Error::Capacity(format!(
                "unit-length sweep over domain of size {m} is too large"
            )));
        }
        let starts = m; // x in {0, ..., M-1}
        let per_start = if span.is_zero() {
            BigRational::zero()
        } else {
            &span / BigRational::new(BigInt::from(starts), BigInt::from(1))
        };
        let weight = BigRational::new(BigInt::from(1), BigInt::from(starts));
        for x in 0..m {
            let q = QueryRange::from_u64(x, 1);
            let (lt, ld) = eval_pair(tree, dag, &q)?;
            *pair_measure.entry((lt, ld)).or_insert_with(BigRational::zero) += &per_start;
            *diff_weight.entry(ld - lt).or_insert_with(BigRational::zero) += &weight;
        }
    } else if span_coord.is_zero() {
        // Single valid start.
        let q = QueryRange::new(Coord::zero(), s.clone())?;
        let (lt, ld) = eval_pair(tree, dag, &q)?;
        pair_measure.insert((lt, ld), BigRational::zero());
        diff_weight.insert(ld - lt, BigRational::new(1.into(), 1.into()));
    } else {
        let mut criticals: BTreeSet<Coord> = BTreeSet::new();
        criticals.insert(Coord::zero());
        criticals.insert(span_coord.clone());
        let mut push = |v: Coord| {
            if v >= Coord::zero() && v <= span_coord {
                criticals.insert(v);
            }
        };
        for st in [tree, dag] {
            for node in st.nodes() {
                for endpoint in [node.interval.lo, node.interval.hi] {
                    let e = coord_from_u64(endpoint);
                    push(e.clone());
                    push(e - s);
                }
            }
        }
        let xs: Vec<Coord> = criticals.into_iter().collect();
        let two = coord_from_u64(2);
        for pair in xs.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let mid = (a + b) / &two;
            let q = QueryRange::new(mid, s.clone())?;
            let (lt, ld) = eval_pair(tree, dag, &q)?;
            let len = big_ratio_from_coord(&(b - a));
            *pair_measure.entry((lt, ld)).or_insert_with(BigRational::zero) += &len;
            let w = &len / &span;
            *diff_weight.entry(ld - lt).or_insert_with(BigRational::zero) += w;
        }
        // Zero-measure robustness pass over the critical points themselves.
        for x in &xs {
            let q = QueryRange::new(x.clone(), s.clone())?;
            eval_pair(tree, dag, &q)?;
        }
    }

    let total: BigRational = pair_measure.values().cloned().sum();
    debug_assert_eq!(total, span);

    let mut mass = BTreeMap::new();
    let mut kappa = kappa_hint;
    for (&k, w) in &diff_weight {
        kappa = kappa.max(k);
        mass.insert(k, Probability::new(w.clone())?);
    }
    let distribution = LevelDifferenceDistribution::new(kappa, mass)?;
    Ok(ExactLdd {
        distribution,
        pair_measure,
        span,
    })
}
