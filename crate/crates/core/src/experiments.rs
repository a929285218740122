//! Query generation, the stabilization protocol, and metric accumulation.
//!
//! A run issues seeded random queries in batches against one 1D-Tree and
//! any number of c-DAGs over the same dataset, monitoring the L2 norm
//! between consecutive empirical level-difference distributions. Once
//! every DAG's norm drops below the threshold (or the query cap is hit,
//! which is flagged rather than fatal), a fixed number of extra queries
//! is added for stable statistics, and the final empirical distributions
//! are fitted against the closed-form family.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytics::{corollary_bounds, fit_closest_theoretical, BoundReport, FitResult};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ldd::LevelDifferenceDistribution;
use crate::rng::splitmix64;
use crate::structures::IndexStructure;
use crate::types::{coord_from_u64, coord_to_f64, Coord, QueryRange};

/// Default seed used when neither a flag nor `RCB_SEED` provides one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    /// Query lengths in domain units, one stabilized run per entry.
    #[serde(serialize_with = "serialize_coord_vec")]
    pub query_lengths: Vec<Coord>,
    pub batch_size: usize,
    /// L2 threshold between consecutive empirical LDDs.
    pub stabilization_threshold: f64,
    /// Hard cap on queries before stabilization is forced.
    pub max_queries: usize,
    /// Queries added after stabilization for stable statistics.
    pub extra_queries: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            query_lengths: Vec::new(),
            batch_size: 500,
            stabilization_threshold: 0.001,
            max_queries: 200_000,
            extra_queries: 120_000,
            seed: DEFAULT_SEED,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::ParameterRange("batch size must be >= 1".into()));
        }
        if !(self.stabilization_threshold > 0.0) {
            return Err(Error::ParameterRange(
                "stabilization threshold must be > 0".into(),
            ));
        }
        Ok(())
    }
}

fn serialize_coord_vec<S: serde::Serializer>(
    v: &[Coord],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(&c.to_string())?;
    }
    seq.end()
}

fn serialize_coord<S: serde::Serializer>(
    v: &Coord,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(2))?;
    map.serialize_entry("exact", &v.to_string())?;
    map.serialize_entry("float", &coord_to_f64(v))?;
    map.end()
}

/// The `index`-th query start for `(seed, s)`: uniform over the continuous
/// span `[0, M-s]`, computed exactly as `(M-s) * r / 2^64`.
pub fn query_start(domain_size: u64, s: &Coord, seed: u64, index: u64) -> Coord {
    let span = coord_from_u64(domain_size) - s;
    let r = splitmix64(seed, index);
    span * Coord::new(r as i128, 1i128 << 64)
}

/// Deterministic batch of `count` queries of length `s`.
pub fn sample_queries(
    dataset: &Dataset,
    s: &Coord,
    count: usize,
    seed: u64,
) -> Result<Vec<QueryRange>> {
    let m = dataset.domain_size();
    if s > &coord_from_u64(m) {
        return Err(Error::ParameterRange(format!(
            "query length {s} exceeds the domain span {m}"
        )));
    }
    (0..count)
        .map(|i| QueryRange::new(query_start(m, s, seed, i as u64), s.clone()))
        .collect()
}

/// Index-space query length: `floor(s / step)` with `step = M/N`, clamped
/// to at least 1. This is the length used for theoretical matching.
pub fn effective_index_length(dataset: &Dataset, s_domain: &Coord) -> u64 {
    let n = dataset.len() as i128;
    let m = dataset.domain_size() as i128;
    // floor(s * N / M) with s = num/den.
    let num = s_domain.numer() * n;
    let den = s_domain.denom() * m;
    let idx = (num / den) as u64;
    idx.max(1)
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureStats {
    pub name: String,
    pub levels: BTreeMap<u32, u64>,
    pub cdf: Vec<(u32, f64)>,
    pub root_returns: u64,
}

impl StructureStats {
    fn new(name: String) -> Self {
        StructureStats {
            name,
            levels: BTreeMap::new(),
            cdf: Vec::new(),
            root_returns: 0,
        }
    }

    fn record(&mut self, level: u32) {
        *self.levels.entry(level).or_insert(0) += 1;
        if level == 0 {
            self.root_returns += 1;
        }
    }

    fn finish(&mut self, total: u64) {
        let mut acc = 0u64;
        self.cdf = self
            .levels
            .iter()
            .map(|(&l, &c)| {
                acc += c;
                (l, acc as f64 / total as f64)
            })
            .collect();
    }
}

/// One FP-competitive observation: returned node sizes for the same query.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FpSample {
    pub tree_count: u64,
    pub dag_count: u64,
}

impl FpSample {
    pub fn ratio(&self) -> f64 {
        self.tree_count as f64 / self.dag_count as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DagOutcome {
    pub name: String,
    pub c: u32,
    pub stats: StructureStats,
    pub ldd_counts: BTreeMap<u32, u64>,
    pub empirical_ldd: LevelDifferenceDistribution,
    /// `|D_v(tree)| / |D_w(dag)|` per query, in query order.
    #[serde(skip)]
    pub fp_samples: Vec<FpSample>,
    /// Queries where the ratio fell below 1 (possible only through
    /// tie-break artifacts on skewed data); flagged, never asserted away.
    pub sub_unit_ratio_count: u64,
    pub mean_fp_ratio: f64,
    pub fit: Option<FitResult>,
    pub bounds: Option<BoundReport>,
    /// Why the fit was skipped, when it was.
    pub fit_note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub batch: usize,
    pub structure: String,
    pub l2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    #[serde(serialize_with = "serialize_coord")]
    pub s_domain: Coord,
    /// `floor(s/step)` — the index-space length theory matching uses.
    pub s_star_theory: u64,
    pub seed: u64,
    pub tree: StructureStats,
    pub dags: Vec<DagOutcome>,
    pub trace: Vec<TraceRow>,
    pub queries_at_stabilization: usize,
    pub total_queries: usize,
    /// Set when the cap fired before the L2 threshold was met.
    pub forced_stop: bool,
}

fn l2_between(prev: &BTreeMap<u32, f64>, cur: &BTreeMap<u32, f64>) -> f64 {
    let keys: std::collections::BTreeSet<u32> =
        prev.keys().chain(cur.keys()).copied().collect();
    keys.iter()
        .map(|k| {
            let a = prev.get(k).copied().unwrap_or(0.0);
            let b = cur.get(k).copied().unwrap_or(0.0);
            (a - b) * (a - b)
        })
        .sum::<f64>()
        .sqrt()
}

struct DagState<'a> {
    structure: &'a IndexStructure,
    ldd_counts: BTreeMap<u32, u64>,
    prev_dist: BTreeMap<u32, f64>,
    fp_samples: Vec<FpSample>,
    sub_unit: u64,
    stats: StructureStats,
}

/// Runs the full stabilization protocol for one query length.
pub fn run_stabilized_experiment(
    tree: &IndexStructure,
    dags: &[&IndexStructure],
    s: &Coord,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    if !tree.config().is_tree() {
        return Err(Error::Validation(
            "the baseline structure must be the 1D-Tree".into(),
        ));
    }
    if dags.is_empty() {
        return Err(Error::Validation("at least one c-DAG is required".into()));
    }
    for dag in dags {
        if dag.config().c < 3 {
            return Err(Error::Validation(format!(
                "{} is not a c-DAG",
                dag.name()
            )));
        }
        if !tree.shares_dataset(dag) {
            return Err(Error::Validation(format!(
                "{} was built over a different dataset than the tree",
                dag.name()
            )));
        }
    }
    let m = tree.domain_size();
    if s > &coord_from_u64(m) {
        return Err(Error::ParameterRange(format!(
            "query length {s} exceeds the domain span {m}"
        )));
    }

    let mut tree_stats = StructureStats::new(tree.name());
    let mut states: Vec<DagState> = dags
        .iter()
        .map(|dag| DagState {
            structure: dag,
            ldd_counts: BTreeMap::new(),
            prev_dist: BTreeMap::new(),
            fp_samples: Vec::new(),
            sub_unit: 0,
            stats: StructureStats::new(dag.name()),
        })
        .collect();
    let mut trace = Vec::new();

    let mut issued = 0usize;
    let mut batch_no = 0usize;

    let eval_one = |index: usize,
                        tree_stats: &mut StructureStats,
                        states: &mut Vec<DagState>|
     -> Result<()> {
        let x = query_start(m, s, config.seed, index as u64);
        let q = QueryRange::new(x, s.clone())?;
        let rt = tree.src_search(&q)?;
        tree_stats.record(rt.level);
        for st in states.iter_mut() {
            let rd = st.structure.src_search(&q)?;
            st.stats.record(rd.level);
            debug_assert!(rd.level >= rt.level);
            let k = rd.level - rt.level;
            *st.ldd_counts.entry(k).or_insert(0) += 1;
            if rd.covered_count > rt.covered_count {
                st.sub_unit += 1;
            }
            st.fp_samples.push(FpSample {
                tree_count: rt.covered_count as u64,
                dag_count: rd.covered_count as u64,
            });
        }
        Ok(())
    };

    // Stabilization phase.
    let mut stabilized = false;
    while issued < config.max_queries && !stabilized {
        let target = (issued + config.batch_size).min(config.max_queries);
        while issued < target {
            eval_one(issued, &mut tree_stats, &mut states)?;
            issued += 1;
        }
        batch_no += 1;
        stabilized = true;
        for st in states.iter_mut() {
            let total: u64 = st.ldd_counts.values().sum();
            let cur: BTreeMap<u32, f64> = st
                .ldd_counts
                .iter()
                .map(|(&k, &c)| (k, c as f64 / total as f64))
                .collect();
            let l2 = l2_between(&st.prev_dist, &cur);
            trace.push(TraceRow {
                batch: batch_no,
                structure: st.stats.name.clone(),
                l2,
            });
            st.prev_dist = cur;
            if l2 >= config.stabilization_threshold {
                stabilized = false;
            }
        }
    }
    let forced_stop = !stabilized;
    let queries_at_stabilization = issued;

    // Extra queries for stable statistics.
    let extra_end = issued + config.extra_queries;
    while issued < extra_end {
        let target = (issued + config.batch_size).min(extra_end);
        while issued < target {
            eval_one(issued, &mut tree_stats, &mut states)?;
            issued += 1;
        }
        batch_no += 1;
        for st in states.iter_mut() {
            let total: u64 = st.ldd_counts.values().sum();
            let cur: BTreeMap<u32, f64> = st
                .ldd_counts
                .iter()
                .map(|(&k, &c)| (k, c as f64 / total as f64))
                .collect();
            let l2 = l2_between(&st.prev_dist, &cur);
            trace.push(TraceRow {
                batch: batch_no,
                structure: st.stats.name.clone(),
                l2,
            });
            st.prev_dist = cur;
        }
    }

    tree_stats.finish(issued as u64);
    let n_points = tree.n_points() as u64;
    let s_star_theory = effective_index_length(tree.dataset(), s);

    let dags_out: Vec<DagOutcome> = states
        .into_iter()
        .map(|mut st| {
            st.stats.finish(issued as u64);
            let empirical = LevelDifferenceDistribution::from_counts(&st.ldd_counts)
                .expect("at least one query was issued");
            let c = st.structure.config().c;
            let (fit, bounds, fit_note) =
                match fit_closest_theoretical(&empirical, n_points, c) {
                    Ok(fit) => match corollary_bounds(&fit, c, n_points) {
                        Ok(b) => (Some(fit), Some(b), None),
                        Err(e) => (Some(fit), None, Some(e.to_string())),
                    },
                    Err(e) => (None, None, Some(e.to_string())),
                };
            let mean_fp_ratio = if st.fp_samples.is_empty() {
                f64::NAN
            } else {
                st.fp_samples.iter().map(FpSample::ratio).sum::<f64>()
                    / st.fp_samples.len() as f64
            };
            DagOutcome {
                name: st.stats.name.clone(),
                c,
                stats: st.stats,
                ldd_counts: st.ldd_counts,
                empirical_ldd: empirical,
                fp_samples: st.fp_samples,
                sub_unit_ratio_count: st.sub_unit,
                mean_fp_ratio,
                fit,
                bounds,
                fit_note,
            }
        })
        .collect();

    Ok(ExperimentReport {
        s_domain: s.clone(),
        s_star_theory,
        seed: config.seed,
        tree: tree_stats,
        dags: dags_out,
        trace,
        queries_at_stabilization,
        total_queries: issued,
        forced_stop,
    })
}

const MANIFEST_COMMENT: &str = "# manifest: manifest.json";

impl ExperimentReport {
    /// Writes the flat CSV outputs into `dir`:
    /// `levels.csv` (structure, level, count), `ldd.csv` (structure, k,
    /// count), `trace.csv` (batch, structure, l2), and one
    /// `fp_c<c>.csv` per DAG (query index, tree count, dag count, ratio).
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let open = |name: &str| -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
            let path = dir.join(name);
            let f = std::fs::File::create(&path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            Ok((path, std::io::BufWriter::new(f)))
        };
        let io = |path: &Path, source| Error::Io {
            path: path.to_path_buf(),
            source,
        };

        let (path, mut f) = open("levels.csv")?;
        writeln!(f, "{MANIFEST_COMMENT}\nstructure,level,count").map_err(|e| io(&path, e))?;
        for stats in std::iter::once(&self.tree).chain(self.dags.iter().map(|d| &d.stats)) {
            for (&level, &count) in &stats.levels {
                writeln!(f, "{},{},{}", stats.name, level, count).map_err(|e| io(&path, e))?;
            }
        }
        written.push(path);

        let (path, mut f) = open("ldd.csv")?;
        writeln!(f, "{MANIFEST_COMMENT}\nstructure,k,count").map_err(|e| io(&path, e))?;
        for dag in &self.dags {
            for (&k, &count) in &dag.ldd_counts {
                writeln!(f, "{},{},{}", dag.name, k, count).map_err(|e| io(&path, e))?;
            }
        }
        written.push(path);

        let (path, mut f) = open("trace.csv")?;
        writeln!(f, "{MANIFEST_COMMENT}\nbatch,structure,l2").map_err(|e| io(&path, e))?;
        for row in &self.trace {
            writeln!(f, "{},{},{}", row.batch, row.structure, row.l2).map_err(|e| io(&path, e))?;
        }
        written.push(path);

        for dag in &self.dags {
            let (path, mut f) = open(&format!("fp_c{}.csv", dag.c))?;
            writeln!(f, "{MANIFEST_COMMENT}\nquery_index,tree_count,dag_count,ratio")
                .map_err(|e| io(&path, e))?;
            for (i, sample) in dag.fp_samples.iter().enumerate() {
                writeln!(
                    f,
                    "{},{},{},{}",
                    i,
                    sample.tree_count,
                    sample.dag_count,
                    sample.ratio()
                )
                .map_err(|e| io(&path, e))?;
            }
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::synth_uniform;
    use crate::structures::{build_cdag, build_tree};
    use crate::types::DagConfig;
    use std::sync::Arc;

    #[test]
    fn sampling_is_deterministic() {
        let ds = synth_uniform(64, 64).unwrap();
        let s = coord_from_u64(5);
        let a = sample_queries(&ds, &s, 100, 7).unwrap();
        let b = sample_queries(&ds, &s, 100, 7).unwrap();
        assert_eq!(a, b);
        assert!(sample_queries(&ds, &s, 0, 7).unwrap().is_empty());
        assert!(sample_queries(&ds, &coord_from_u64(65), 1, 7).is_err());
    }

    #[test]
    fn full_span_query_starts_at_zero() {
        use num::Zero;
        let ds = synth_uniform(16, 16).unwrap();
        let qs = sample_queries(&ds, &coord_from_u64(16), 5, 3).unwrap();
        for q in qs {
            assert!(q.start.is_zero());
        }
    }

    #[test]
    fn effective_index_length_cases() {
        let gowalla_scale = synth_uniform(1 << 22, 49_626_707).unwrap();
        assert_eq!(
            effective_index_length(&gowalla_scale, &coord_from_u64(3600)),
            304
        );
        let unit = synth_uniform(128, 128).unwrap();
        assert_eq!(effective_index_length(&unit, &coord_from_u64(100)), 100);
        assert_eq!(
            effective_index_length(&gowalla_scale, &coord_from_u64(3)),
            1,
            "lengths below one step clamp to 1"
        );
    }

    fn quick_config(max: usize, extra: usize, threshold: f64) -> ExperimentConfig {
        ExperimentConfig {
            query_lengths: Vec::new(),
            batch_size: 500,
            stabilization_threshold: threshold,
            max_queries: max,
            extra_queries: extra,
            seed: 1234,
        }
    }

    #[test]
    fn uniform_run_converges_to_theory() {
        let ds = Arc::new(synth_uniform(1 << 12, 1 << 12).unwrap());
        let tree = build_tree(ds.clone()).unwrap();
        let dag = build_cdag(ds, DagConfig::new(5).unwrap()).unwrap();
        // Exactly 50k queries: unreachable threshold plus no extras.
        let config = quick_config(50_000, 0, 1e-15);
        let report =
            run_stabilized_experiment(&tree, &[&dag], &coord_from_u64(16), &config).unwrap();
        assert!(report.forced_stop);
        assert_eq!(report.total_queries, 50_000);
        let fit = report.dags[0].fit.as_ref().expect("theory-domain dataset");
        assert!(
            (15..=17).contains(&fit.s_star),
            "fitted s* {} should be near 16",
            fit.s_star
        );
        assert!(fit.epsilon < 0.02, "epsilon {}", fit.epsilon);
        // Uniform data confines the DAG to at most two adjacent levels.
        assert!(report.dags[0].stats.levels.len() <= 2);
    }

    #[test]
    fn trace_reproducible_under_seed() {
        let ds = Arc::new(synth_uniform(1 << 8, 1 << 8).unwrap());
        let tree = build_tree(ds.clone()).unwrap();
        let dag = build_cdag(ds, DagConfig::new(3).unwrap()).unwrap();
        let config = quick_config(3_000, 1_000, 0.01);
        let s = coord_from_u64(7);
        let a = run_stabilized_experiment(&tree, &[&dag], &s, &config).unwrap();
        let b = run_stabilized_experiment(&tree, &[&dag], &s, &config).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.batch, y.batch);
            assert_eq!(x.l2.to_bits(), y.l2.to_bits());
        }
        assert_eq!(a.total_queries, b.total_queries);
    }

    #[test]
    fn mismatched_datasets_rejected() {
        let a = Arc::new(synth_uniform(64, 64).unwrap());
        let b = Arc::new(synth_uniform(128, 128).unwrap());
        let tree = build_tree(a).unwrap();
        let dag = build_cdag(b, DagConfig::new(3).unwrap()).unwrap();
        let config = quick_config(1_000, 0, 0.01);
        assert!(matches!(
            run_stabilized_experiment(&tree, &[&dag], &coord_from_u64(4), &config),
            Err(Error::Validation(_))
        ));
    }
}
