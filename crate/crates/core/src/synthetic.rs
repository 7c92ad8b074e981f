//! Synthetic layer-cake fields for tests and demos.
//!
//! Tops are stacked surfaces that share one structural shape (a dome on a
//! regional dip) plus per-top offsets, per-top thickness gradients and pick
//! noise, so the subsea depth matrix is close to low rank.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{RawPick, RawTables, WellHeader};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub n_wells: usize,
    pub n_tops: usize,
    /// Probability that a given (well, top) cell is picked.
    pub pick_rate: f64,
    /// Side of the square survey area, meters.
    pub extent: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            n_wells: 120,
            n_tops: 12,
            pick_rate: 0.35,
            extent: 10_000.0,
            noise_sd: 2.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub tables: RawTables,
    /// Noise-free TVDSS of every cell, row-major wells × tops.
    pub truth: Vec<f64>,
    pub n_tops: usize,
}

pub fn layered_field(spec: &FieldSpec) -> Field {
    let mut rng = rng_from_seed(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd.max(0.0)).expect("finite sd");
    let half = spec.extent / 2.0;
    let structure = |x: f64, y: f64| {
        let r2 = ((x - half).powi(2) + (y - half).powi(2)) / (0.3 * spec.extent).powi(2);
        -250.0 * (-r2).exp() + 0.02 * x - 0.01 * y
    };
    let offsets: Vec<f64> = (0..spec.n_tops)
        .map(|k| 200.0 + 70.0 * k as f64 + rng.random_range(-15.0..15.0))
        .collect();
    let gradients: Vec<f64> = (0..spec.n_tops)
        .map(|_| rng.random_range(-0.004..0.004))
        .collect();

    let mut tables = RawTables::default();
    let mut truth = Vec::with_capacity(spec.n_wells * spec.n_tops);
    for u in 0..spec.n_wells {
        let x = rng.random_range(0.0..spec.extent);
        let y = rng.random_range(0.0..spec.extent);
        let ground = 1500.0 + 40.0 * (x / 1500.0).sin() + 25.0 * (y / 2300.0).cos();
        let datum = ground + rng.random_range(3.0..10.0);
        let id = format!("W{:04}", u + 1);
        tables.wells.push(WellHeader {
            well_id: id.clone(),
            datum_elev: datum,
            ground_elev: ground,
            x,
            y,
        });
        for k in 0..spec.n_tops {
            let tvdss = offsets[k] + structure(x, y) + gradients[k] * (x - y);
            truth.push(tvdss);
            if rng.random::<f64>() < spec.pick_rate {
                // TVDSS = MD − (datum − ground) − ground  ⇒  MD = TVDSS + datum.
                let md = (tvdss + noise.sample(&mut rng) + datum).max(0.0);
                tables.picks.push(RawPick {
                    well_id: id.clone(),
                    top_id: format!("T{:02}", k + 1),
                    md: Some(md),
                    line: 0,
                });
            }
        }
    }
    Field {
        tables,
        truth,
        n_tops: spec.n_tops,
    }
}

impl Field {
    pub fn wells_csv(&self) -> String {
        let mut s = String::from("well_id,datum_elev_m,ground_elev_m,x_m,y_m\n");
        for w in &self.tables.wells {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                w.well_id, w.datum_elev, w.ground_elev, w.x, w.y
            ));
        }
        s
    }

    pub fn picks_csv(&self) -> String {
        let mut s = String::from("well_id,top_id,md_m\n");
        for p in &self.tables.picks {
            let md = p.md.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{}\n", p.well_id, p.top_id, md));
        }
        s
    }
}
