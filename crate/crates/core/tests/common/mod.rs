#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topsrec_core::als::Ratings;
use topsrec_core::dataset::{ingest_readers, TopsDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sparse matrix with about `density` of cells observed.
pub fn random_sparse(
    n_wells: usize,
    n_tops: usize,
    density: f64,
    seed: u64,
) -> Ratings {
    let mut r = rng(seed);
    let mut entries = Vec::new();
    for u in 0..n_wells {
        for i in 0..n_tops {
            if r.random::<f64>() < density {
                entries.push((u, i, r.random_range(0.0..100.0)));
            }
        }
    }
    if entries.is_empty() {
        entries.push((0, 0, 1.0));
    }
    Ratings::new(n_wells, n_tops, entries).unwrap()
}

/// Dot products of explicit factor rows, computed entry by entry.
pub fn low_rank(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|ar| {
            b.iter()
                .map(|br| ar.iter().zip(br).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

pub fn random_factors(n: usize, f: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..f).map(|_| r.random_range(0.2..1.5)).collect())
        .collect()
}

/// Observation mask with exactly `n_obs` cells and at least `min_per_line`
/// observed cells in every row and column.
pub fn covering_mask(
    rows: usize,
    cols: usize,
    n_obs: usize,
    min_per_line: usize,
    r: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let mut chosen = std::collections::BTreeSet::new();
    let all_cols: Vec<usize> = (0..cols).collect();
    let all_rows: Vec<usize> = (0..rows).collect();
    for u in 0..rows {
        for &i in all_cols.choose_multiple(r, min_per_line) {
            chosen.insert((u, i));
        }
    }
    for i in 0..cols {
        for &u in all_rows.choose_multiple(r, min_per_line) {
            chosen.insert((u, i));
        }
    }
    let mut rest: Vec<(usize, usize)> = (0..rows)
        .flat_map(|u| (0..cols).map(move |i| (u, i)))
        .filter(|c| !chosen.contains(c))
        .collect();
    rest.shuffle(r);
    for c in rest {
        if chosen.len() >= n_obs {
            break;
        }
        chosen.insert(c);
    }
    chosen.into_iter().collect()
}

/// Small random dataset; some tops end up with a single pick.
pub fn random_dataset(seed: u64) -> TopsDataset {
    let mut r = rng(seed);
    let n_wells = r.random_range(4..30);
    let n_tops = r.random_range(2..10);
    let mut wells = String::from("well_id,datum_elev_m,ground_elev_m,x_m,y_m\n");
    for u in 0..n_wells {
        let ground = r.random_range(1000.0..1600.0);
        wells.push_str(&format!(
            "W{u},{},{ground},{},{}\n",
            ground + r.random_range(0.0..10.0),
            r.random_range(0.0..5000.0),
            r.random_range(0.0..5000.0)
        ));
    }
    let mut picks = String::from("well_id,top_id,md_m\n");
    let mut any = false;
    for i in 0..n_tops {
        let rate = if r.random::<f64>() < 0.3 { 0.05 } else { 0.5 };
        for u in 0..n_wells {
            if r.random::<f64>() < rate {
                picks.push_str(&format!("W{u},T{i},{}\n", 200.0 * i as f64 + r.random_range(0.0..80.0)));
                any = true;
            }
        }
    }
    if !any {
        picks.push_str("W0,T0,100\n");
    }
    TopsDataset::build(ingest_readers(wells.as_bytes(), "w", picks.as_bytes(), "p").unwrap())
        .unwrap()
}

/// Where the public datasets would live, converted to the wells/picks schema.
pub fn dataset_dir(name: &str, env: &str) -> Option<std::path::PathBuf> {
    let dir = std::env::var_os(env)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| {
            std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../data")
                .join(name)
        });
    (dir.join("wells.csv").is_file() && dir.join("picks.csv").is_file()).then_some(dir)
}

pub fn load_dir(dir: &std::path::Path) -> TopsDataset {
    TopsDataset::load(&dir.join("wells.csv"), &dir.join("picks.csv")).unwrap()
}
