//! Builders for the 1D-Tree and the c-DAG family, plus SRC search.
//!
//! Both structures are windows of consecutive dataset points arranged in
//! levels. An internal node with `d` points splits at the empirical
//! median: the left child takes the first `floor(d/2)` points and the
//! right child the rest. The DAG variant (`c >= 3`) additionally inserts
//! `c - 2` overlapping middle children of `ceil(d/2)` consecutive points
//! at offsets `m * floor(d / (2(c-1)))`. Children whose point sets
//! coincide with an already-created node at the same level are shared,
//! which turns the structure into a DAG.
//!
//! Canonical intervals are taken leaf-up as `[first point, last point + 1)`
//! in domain coordinates; the root is widened to the full domain `[0, M)`
//! so every in-domain query has a cover.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::json;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{DagConfig, Interval, NodeRecord, QueryRange};

/// A built 1D-Tree (`c = 2`) or c-DAG (`c >= 3`), immutable after
/// construction and safe to search from many threads.
#[derive(Clone, Debug)]
pub struct IndexStructure {
    config: DagConfig,
    dataset: Arc<Dataset>,
    nodes: Vec<NodeRecord>,
    levels: Vec<Vec<usize>>,
    root: usize,
    height: u32,
    build_log: Vec<String>,
}

/// Outcome of one SRC search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub node_id: usize,
    pub level: u32,
    /// `|D_v|` of the returned node; an upper bound on the exact answer.
    pub covered_count: usize,
    /// Number of nodes whose interval was tested during the descent.
    pub visited_nodes: usize,
}

/// Builds the binary 1D-Tree over the dataset.
pub fn build_tree(dataset: Arc<Dataset>) -> Result<IndexStructure> {
    build(dataset, DagConfig::tree())
}

/// Builds a c-DAG (`config.c >= 3`) over the dataset.
pub fn build_cdag(dataset: Arc<Dataset>, config: DagConfig) -> Result<IndexStructure> {
    if config.c < 3 {
        return Err(Error::Configuration(format!(
            "c-DAG requires c >= 3, got c={}; use build_tree for the binary structure",
            config.c
        )));
    }
    build(dataset, config)
}

/// Child windows of a `d`-point node as `(relative offset, count)`,
/// sorted and deduplicated.
fn child_specs(d: usize, c: u32, level: u32, log: &mut Vec<String>) -> Vec<(usize, usize)> {
    debug_assert!(d >= 2);
    let half_lo = d / 2;
    let half_hi = d - half_lo;
    let mut specs = Vec::with_capacity(c as usize);
    specs.push((0, half_lo));
    if c >= 3 {
        let step = d / (2 * (c as usize - 1));
        for m in 1..=(c as usize - 2) {
            let off = m * step;
            let mut cnt = half_hi;
            if off + cnt > d {
                // Middle child would overrun the parent; clamp it to end
                // at the parent's last point.
                cnt = d - off;
                log.push(format!(
                    "level {level}: clamped middle child m={m} of a {d}-point node to {cnt} points"
                ));
            }
            specs.push((off, cnt));
        }
    }
    specs.push((half_lo, half_hi));
    specs.sort_unstable();
    specs.dedup();
    specs
}

fn build(dataset: Arc<Dataset>, config: DagConfig) -> Result<IndexStructure> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let points = dataset.points();
    let domain = dataset.domain_size();
    let mut build_log = Vec::new();

    let mut nodes = vec![NodeRecord {
        id: 0,
        level: 0,
        // The root covers the entire domain so every in-domain query has
        // a cover, even when the dataset does not touch the domain edges.
        interval: Interval::new(0, domain)?,
        point_offset: 0,
        point_count: n,
        children: Vec::new(),
    }];
    let mut levels: Vec<Vec<usize>> = vec![vec![0]];
    let mut current = vec![0usize];

    let mut level: u32 = 0;
    while !current.is_empty() {
        level += 1;
        let mut made: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next: Vec<usize> = Vec::new();
        for &parent in &current {
            let (p_off, p_cnt) = (nodes[parent].point_offset, nodes[parent].point_count);
            if p_cnt < 2 {
                continue;
            }
            let specs = child_specs(p_cnt, config.c, level, &mut build_log);
            for (rel, cnt) in specs {
                let off = p_off + rel;
                let id = *made.entry((off, cnt)).or_insert_with(|| {
                    let lo = points[off];
                    let hi = points[off + cnt - 1] + 1;
                    let id = nodes.len();
                    nodes.push(NodeRecord {
                        id,
                        level,
                        interval: Interval { lo, hi },
                        point_offset: off,
                        point_count: cnt,
                        children: Vec::new(),
                    });
                    next.push(id);
                    id
                });
                nodes[parent].children.push(id);
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
        current = levels.last().expect("just pushed").clone();
    }

    let height = (levels.len() - 1) as u32;
    Ok(IndexStructure {
        config,
        dataset,
        nodes,
        levels,
        root: 0,
        height,
        build_log,
    })
}

impl IndexStructure {
    pub fn config(&self) -> DagConfig {
        self.config
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn n_points(&self) -> usize {
        self.dataset.len()
    }

    pub fn domain_size(&self) -> u64 {
        self.dataset.domain_size()
    }

    /// Height `H`; the root sits at level 0.
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &NodeRecord {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn level_ids(&self, level: u32) -> &[usize] {
        &self.levels[level as usize]
    }

    pub fn build_log(&self) -> &[String] {
        &self.build_log
    }

    /// A short name like "tree", "3-dag", "5-dag" used in reports.
    pub fn name(&self) -> String {
        if self.config.is_tree() {
            "tree".to_string()
        } else {
            format!("{}-dag", self.config.c)
        }
    }

    /// Do `self` and `other` index the same dataset instance?
    pub fn shares_dataset(&self, other: &IndexStructure) -> bool {
        Arc::ptr_eq(&self.dataset, &other.dataset) || self.dataset == other.dataset
    }

    /// Total payload `sum_v |D_v|`.
    pub fn payload_size(&self) -> u64 {
        self.nodes.iter().map(|n| n.point_count as u64).sum()
    }

    /// Exact node counts per level.
    pub fn level_histogram(&self) -> std::collections::BTreeMap<u32, usize> {
        self.levels
            .iter()
            .enumerate()
            .map(|(l, ids)| (l as u32, ids.len()))
            .collect()
    }

    /// SRC search: descends from the root into the first child (by lower
    /// endpoint, then id) whose interval still contains the query, and
    /// returns the node where no child qualifies. The result is the
    /// inclusion-minimal cover selected by that tie-break.
    pub fn src_search(&self, query: &QueryRange) -> Result<SearchResult> {
        if !query.within_domain(self.domain_size()) {
            return Err(Error::Domain(format!(
                "query {query} does not fit in [0, {})",
                self.domain_size()
            )));
        }
        let mut current = self.root;
        let mut visited = 1usize;
        debug_assert!(self.nodes[current].interval.contains_query(query));
        loop {
            let mut entered = None;
            for &child in &self.nodes[current].children {
                visited += 1;
                if self.nodes[child].interval.contains_query(query) {
                    entered = Some(child);
                    break;
                }
            }
            match entered {
                Some(child) => {
                    // The descent only ever moves to a strictly smaller
                    // candidate, mirroring the size comparison of the
                    // exhaustive search it replaces.
                    debug_assert!(
                        self.nodes[child].point_count < self.nodes[current].point_count
                    );
                    current = child;
                }
                None => break,
            }
        }
        let node = &self.nodes[current];
        Ok(SearchResult {
            node_id: current,
            level: node.level,
            covered_count: node.point_count,
            visited_nodes: visited,
        })
    }

    /// Returns the deepest node containing the query, breaking ties by
    /// smallest lower endpoint, then smallest id — the same node the
    /// exhaustive scan selects.
    ///
    /// Works level by level over the set of containing nodes, so unlike
    /// the single-path descent of [`src_search`](Self::src_search) it
    /// cannot stall one level early when deep windows degenerate to
    /// two-child splits. Used by the sweep oracle; `visited_nodes` counts
    /// every distinct node tested and is not held to the descent's
    /// `c*(H+1)` cap.
    pub fn deepest_cover(&self, query: &QueryRange) -> Result<SearchResult> {
        if !query.within_domain(self.domain_size()) {
            return Err(Error::Domain(format!(
                "query {query} does not fit in [0, {})",
                self.domain_size()
            )));
        }
        let mut frontier = vec![self.root];
        let mut visited = 1usize;
        let mut seen: Vec<usize> = Vec::new();
        loop {
            let mut next: Vec<usize> = Vec::new();
            seen.clear();
            for &u in &frontier {
                for &ch in &self.nodes[u].children {
                    if seen.contains(&ch) {
                        continue;
                    }
                    seen.push(ch);
                    visited += 1;
                    if self.nodes[ch].interval.contains_query(query) {
                        next.push(ch);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        let node = frontier
            .iter()
            .map(|&id| &self.nodes[id])
            .min_by_key(|n| (n.interval.lo, n.id))
            .expect("frontier starts non-empty");
        Ok(SearchResult {
            node_id: node.id,
            level: node.level,
            covered_count: node.point_count,
            visited_nodes: visited,
        })
    }

    /// Serializes the structure to the documented JSON layout: nodes as
    /// arrays of `[id, level, lo, hi, point_offset, point_count, child ids]`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .map(|n| {
                json!([
                    n.id,
                    n.level,
                    n.interval.lo,
                    n.interval.hi,
                    n.point_offset,
                    n.point_count,
                    n.children,
                ])
            })
            .collect();
        json!({
            "c": self.config.c,
            "theory_alpha": self.config.theory_alpha,
            "n_points": self.n_points(),
            "domain_size": self.domain_size(),
            "height": self.height,
            "root": self.root,
            "nodes": nodes,
        })
    }

    /// Checks the structural invariants; used by tests and `--verify`
    /// style tooling, not on the search path.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_points() as u64;
        let root = &self.nodes[self.root];
        if root.interval.lo != 0 || root.interval.hi != self.domain_size() {
            return Err(Error::Validation(format!(
                "root interval {} does not cover the domain [0, {})",
                root.interval,
                self.domain_size()
            )));
        }
        for node in &self.nodes {
            // Point count matches the dataset points inside the interval.
            let inside = self.dataset.rank(node.interval.hi as i128, 1)
                - self.dataset.rank(node.interval.lo as i128, 1);
            if inside != node.point_count {
                return Err(Error::Validation(format!(
                    "node {} interval {} holds {} points, recorded {}",
                    node.id, node.interval, inside, node.point_count
                )));
            }
            // Median splits keep per-level counts within floor/ceil of N/2^l.
            let lo_bound = n >> node.level.min(63);
            let hi_bound = n.div_ceil(1u64 << node.level.min(63));
            if (node.point_count as u64) < lo_bound || (node.point_count as u64) > hi_bound {
                return Err(Error::Validation(format!(
                    "node {} at level {} has {} points, expected {} or {}",
                    node.id, node.level, node.point_count, lo_bound, hi_bound
                )));
            }
            if !node.children.is_empty() {
                let mut min_lo = u64::MAX;
                let mut max_hi = 0u64;
                for &ch in &node.children {
                    let child = &self.nodes[ch];
                    if child.level != node.level + 1 {
                        return Err(Error::Validation(format!(
                            "child {} of node {} is at level {}, expected {}",
                            ch,
                            node.id,
                            child.level,
                            node.level + 1
                        )));
                    }
                    if !node.interval.contains_interval(&child.interval) {
                        return Err(Error::Validation(format!(
                            "child interval {} escapes parent {}",
                            child.interval, node.interval
                        )));
                    }
                    min_lo = min_lo.min(child.interval.lo);
                    max_hi = max_hi.max(child.interval.hi);
                }
                // Children span the parent's own point range; the root may
                // be wider because it is padded to the full domain.
                let span_lo = self.dataset.point(node.point_offset);
                let span_hi = self.dataset.point(node.point_offset + node.point_count - 1) + 1;
                if min_lo != span_lo || max_hi != span_hi {
                    return Err(Error::Validation(format!(
                        "children of node {} span [{min_lo}, {max_hi}), expected [{span_lo}, {span_hi})",
                        node.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::ingest::synth_uniform;

    fn uniform(n: u64) -> Arc<Dataset> {
        Arc::new(synth_uniform(n, n).unwrap())
    }

    fn intervals_at(s: &IndexStructure, level: u32) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = s
            .level_ids(level)
            .iter()
            .map(|&id| (s.node(id).interval.lo, s.node(id).interval.hi))
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn tree_over_16_matches_dyadic_levels() {
        let t = build_tree(uniform(16)).unwrap();
        assert_eq!(t.height(), 4);
        assert_eq!(intervals_at(&t, 1), vec![(0, 8), (8, 16)]);
        assert_eq!(
            intervals_at(&t, 2),
            vec![(0, 4), (4, 8), (8, 12), (12, 16)]
        );
        t.validate().unwrap();
    }

    #[test]
    fn tree_payload_identity() {
        for n in [2u64, 4, 8, 16, 64, 256] {
            let t = build_tree(uniform(n)).unwrap();
            let h = (n as f64).log2() as u64;
            assert_eq!(t.payload_size(), n * (h + 1));
        }
    }

    #[test]
    fn single_point_dataset() {
        let t = build_tree(uniform(1)).unwrap();
        assert_eq!(t.height(), 0);
        assert_eq!(t.payload_size(), 1);
        let r = t.src_search(&QueryRange::from_u64(0, 1)).unwrap();
        assert_eq!(r.level, 0);
        assert_eq!(r.covered_count, 1);
    }

    #[test]
    fn cdag_level2_matches_published_layout() {
        let d = build_cdag(uniform(16), DagConfig::new(3).unwrap()).unwrap();
        assert_eq!(
            intervals_at(&d, 2),
            vec![(0, 4), (2, 6), (4, 8), (6, 10), (8, 12), (10, 14), (12, 16)]
        );
        d.validate().unwrap();
    }

    #[test]
    fn cdag_node_count_formula() {
        // (c-1)*2^l - (c-2) nodes at level l while windows stay large.
        for (c, n) in [(3u32, 16u64), (5, 16), (5, 64), (9, 256)] {
            let d = build_cdag(uniform(n), DagConfig::new(c).unwrap()).unwrap();
            let hist = d.level_histogram();
            for level in 0..=d.height() {
                let window = n >> level;
                if window >= 2 * (c as u64 - 1) {
                    let expect = (c as usize - 1) * (1 << level) - (c as usize - 2);
                    assert_eq!(hist[&level], expect, "c={c} n={n} level={level}");
                }
            }
        }
    }

    #[test]
    fn five_dag_level1_has_five_nodes() {
        let d = build_cdag(uniform(16), DagConfig::new(5).unwrap()).unwrap();
        assert_eq!(d.level_histogram()[&1], 5);
    }

    #[test]
    fn two_point_dataset_merges_middles() {
        for c in [3u32, 5, 9] {
            let d = build_cdag(uniform(2), DagConfig::new(c).unwrap()).unwrap();
            assert_eq!(d.level_histogram()[&1], 2);
            assert_eq!(d.node(d.root()).children.len(), 2);
        }
    }

    #[test]
    fn cdag_rejects_small_c() {
        assert!(build_cdag(uniform(4), DagConfig::tree()).is_err());
    }

    #[test]
    fn figure_queries_on_both_structures() {
        let ds = uniform(16);
        let tree = build_tree(ds.clone()).unwrap();
        let dag = build_cdag(ds, DagConfig::new(3).unwrap()).unwrap();

        let q1 = QueryRange::from_u64(2, 4); // [2, 6)
        let rt = tree.src_search(&q1).unwrap();
        assert_eq!(rt.level, 1);
        assert_eq!(tree.node(rt.node_id).interval, Interval::new(0, 8).unwrap());
        let rd = dag.src_search(&q1).unwrap();
        assert_eq!(rd.level, 2);
        assert_eq!(dag.node(rd.node_id).interval, Interval::new(2, 6).unwrap());

        let q2 = QueryRange::from_u64(11, 4); // [11, 15)
        for s in [&tree, &dag] {
            let r = s.src_search(&q2).unwrap();
            assert_eq!(r.level, 1);
            assert_eq!(s.node(r.node_id).interval, Interval::new(8, 16).unwrap());
        }
    }

    #[test]
    fn search_rejects_out_of_domain() {
        let tree = build_tree(uniform(16)).unwrap();
        assert!(tree.src_search(&QueryRange::from_u64(14, 4)).is_err());
    }

    #[test]
    fn json_dump_layout() {
        let tree = build_tree(uniform(2)).unwrap();
        let v = tree.to_json_value();
        assert_eq!(v["nodes"][0], json!([0, 0, 0, 2, 0, 2, [1, 2]]));
        assert_eq!(v["height"], json!(1));
    }
}
