// Dev probe: search equivalences and full-grid exactness timing.
use std::sync::Arc;
use std::time::Instant;

use rcb_core::analytics::theoretical_ldd;
use rcb_core::experiments::query_start;
use rcb_core::ingest::{synth_clustered, synth_uniform};
use rcb_core::oracle::{brute_force_src, exact_level_measure};
use rcb_core::rng::splitmix64;
use rcb_core::structures::{build_cdag, build_tree, IndexStructure};
use rcb_core::types::{coord_from_u64, DagConfig, QueryRange};
use rcb_core::Dataset;

fn random_queries(m: u64, count: u64, seed: u64) -> Vec<QueryRange> {
    (0..count)
        .map(|i| {
            let s_len = 1 + splitmix64(seed, i) % (m - 1);
            let x = query_start(m, &coord_from_u64(s_len), seed ^ 0xabc, i);
            QueryRange::new(x, coord_from_u64(s_len)).unwrap()
        })
        .collect()
}

fn main() {
    // 1. deepest_cover vs literal brute force: must agree on EVERYTHING.
    let mut total_bad = 0;
    for &n in &[16u64, 100, 255, 256, 737, 1000, 1024] {
        for &c in &[3u32, 4, 5, 6, 9] {
            for (tag, ds) in [
                ("uniform", Arc::new(synth_uniform(n, n).unwrap())),
                ("loose", Arc::new(synth_uniform(n, 3 * n).unwrap())),
                (
                    "clustered",
                    Arc::new(synth_clustered(n, 4 * n, 3, (n / 8) as f64, 5).unwrap()),
                ),
            ] {
                let m = ds.domain_size();
                let tree = build_tree(ds.clone()).unwrap();
                let dag = build_cdag(ds.clone(), DagConfig::new(c).unwrap()).unwrap();
                for q in random_queries(m, 300, n ^ c as u64) {
                    for st in [&tree, &dag] {
                        let a = st.deepest_cover(&q).unwrap();
                        let b = brute_force_src(st, &q).unwrap();
                        if a.node_id != b.node_id {
                            total_bad += 1;
                            if total_bad < 4 {
                                println!("DEEPEST!=BRUTE n={n} c={c} {tag} q={q}");
                            }
                        }
                    }
                }
            }
        }
    }
    println!("deepest vs brute mismatches: {total_bad}");

    // 2. src_search (greedy) vs brute on the acceptance configs.
    let mut greedy_bad = 0;
    for &n in &[256u64, 1024] {
        for &c in &[3u32, 5] {
            for (tag, ds) in [
                ("uniform", Arc::new(synth_uniform(n, n).unwrap())),
                (
                    "clustered",
                    Arc::new(synth_clustered(n, 8 * n, 4, (n / 4) as f64, 9).unwrap()),
                ),
            ] {
                let m = ds.domain_size();
                let tree = build_tree(ds.clone()).unwrap();
                let dag = build_cdag(ds.clone(), DagConfig::new(c).unwrap()).unwrap();
                let mut bad_here = 0;
                for q in random_queries(m, 1000, 77 ^ n ^ c as u64) {
                    for st in [&tree, &dag] {
                        let a = st.src_search(&q).unwrap();
                        let b = brute_force_src(st, &q).unwrap();
                        if a.node_id != b.node_id {
                            bad_here += 1;
                        }
                    }
                }
                if bad_here > 0 {
                    println!("GREEDY!=BRUTE n={n} c={c} {tag}: {bad_here}");
                }
                greedy_bad += bad_here;
            }
        }
    }
    println!("greedy vs brute mismatches on acceptance configs: {greedy_bad}");

    // 3. Full theorem grid with the deepest-cover sweep.
    let t0 = Instant::now();
    let mut grid_bad = 0;
    for n_exp in 2u32..=9 {
        let n_pts = 1u64 << (n_exp + 1);
        let ds = Arc::new(synth_uniform(n_pts, n_pts).unwrap());
        let tree = build_tree(ds.clone()).unwrap();
        for &c in &[3u32, 5, 9] {
            let dag = build_cdag(ds.clone(), DagConfig::new(c).unwrap()).unwrap();
            let tc = Instant::now();
            for s in 1..=n_pts {
                let sc = coord_from_u64(s);
                let sweep = exact_level_measure(&tree, &dag, &sc).unwrap();
                let theory = theoretical_ldd(n_pts, c, &sc).unwrap();
                for k in 0..=theory.kappa().max(sweep.distribution.kappa()) {
                    if sweep.distribution.mass(k) != theory.mass(k) {
                        grid_bad += 1;
                        if grid_bad < 8 {
                            println!(
                                "GRID MISMATCH N={n_pts} c={c} s={s} k={k}: sweep {} theory {}",
                                sweep.distribution.mass(k),
                                theory.mass(k)
                            );
                        }
                    }
                }
            }
            println!("N={n_pts} c={c}: done in {:?}", tc.elapsed());
        }
    }
    println!(
        "grid mismatches: {grid_bad}; total grid time {:?}",
        t0.elapsed()
    );
    let _ = Dataset::new(vec![0], 1).unwrap();
    let _: Option<IndexStructure> = None;
}
