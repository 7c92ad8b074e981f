//! Rank-f factorization of a sparse well × top matrix by alternating least
//! squares.
//!
//! The objective is
//!
//! ```text
//! L = Σ_(u,i) observed (r_ui − q_i·p_u)² + λ (Σ_active u ‖p_u‖² + Σ_active i ‖q_i‖²)
//! ```
//!
//! Each half-step solves the ridge system of one block exactly, so `L` never
//! increases. Wells and tops without training entries keep their initial
//! vectors.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::dataset::TopsDataset;
use crate::seed::rng_from_seed;

/// Diagonal jitter used when an unregularized normal matrix is singular.
pub const SINGULAR_JITTER: f64 = 1e-12;

/// A pivot below this fraction of the largest diagonal entry marks the
/// factorization as rank deficient.
const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, PartialEq)]
pub enum AlsError {
    #[error("invalid ALS configuration: {0}")]
    InvalidConfig(String),
    #[error("index ({well}, {top}) out of range for a {n_wells}×{n_tops} matrix")]
    IndexOutOfRange {
        well: usize,
        top: usize,
        n_wells: usize,
        n_tops: usize,
    },
    #[error("entry ({well}, {top}) appears more than once")]
    DuplicateEntry { well: usize, top: usize },
    #[error("entry ({well}, {top}) is not finite")]
    NonFinite { well: usize, top: usize },
    #[error("no training entries")]
    NoTrainingData,
    #[error("normal equations stayed singular after jitter")]
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    pub factors: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl AlsConfig {
    pub fn new(factors: usize, iterations: usize, lambda: f64, seed: u64) -> Self {
        Self {
            factors,
            iterations,
            lambda,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), AlsError> {
        if self.factors < 1 {
            return Err(AlsError::InvalidConfig("factors must be ≥ 1".into()));
        }
        if self.iterations < 1 {
            return Err(AlsError::InvalidConfig("iterations must be ≥ 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(AlsError::InvalidConfig(format!(
                "lambda must be finite and ≥ 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Observed training entries, indexed both by well and by top.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratings {
    n_wells: usize,
    n_tops: usize,
    entries: Vec<(usize, usize, f64)>,
    by_well: Vec<Vec<(usize, f64)>>,
    by_top: Vec<Vec<(usize, f64)>>,
}

impl Ratings {
    pub fn new<I>(n_wells: usize, n_tops: usize, entries: I) -> Result<Self, AlsError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut by_well = vec![Vec::new(); n_wells];
        let mut by_top = vec![Vec::new(); n_tops];
        let mut seen = std::collections::HashSet::new();
        let mut list = Vec::new();
        for (u, i, r) in entries {
            if u >= n_wells || i >= n_tops {
                return Err(AlsError::IndexOutOfRange {
                    well: u,
                    top: i,
                    n_wells,
                    n_tops,
                });
            }
            if !r.is_finite() {
                return Err(AlsError::NonFinite { well: u, top: i });
            }
            if !seen.insert((u, i)) {
                return Err(AlsError::DuplicateEntry { well: u, top: i });
            }
            by_well[u].push((i, r));
            by_top[i].push((u, r));
            list.push((u, i, r));
        }
        Ok(Self {
            n_wells,
            n_tops,
            entries: list,
            by_well,
            by_top,
        })
    }

    /// The picks at `indices` of `ds`, in normalized depth.
    pub fn from_picks(ds: &TopsDataset, indices: &[usize]) -> Result<Self, AlsError> {
        let picks = ds.picks();
        Self::new(
            ds.n_wells(),
            ds.n_tops(),
            indices.iter().map(|&k| {
                let p = picks[k];
                (p.well, p.top, p.depth)
            }),
        )
    }

    pub fn n_wells(&self) -> usize {
        self.n_wells
    }

    pub fn n_tops(&self) -> usize {
        self.n_tops
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn well_entries(&self, u: usize) -> &[(usize, f64)] {
        &self.by_well[u]
    }

    pub fn top_entries(&self, i: usize) -> &[(usize, f64)] {
        &self.by_top[i]
    }
}

/// Per-well and per-top latent vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    n_wells: usize,
    n_tops: usize,
    well_factors: Vec<f64>,
    top_factors: Vec<f64>,
    pub config: AlsConfig,
    /// Training loss after the last cycle; infinite until fitted.
    pub final_loss: f64,
}

impl LatentModel {
    /// Every entry i.i.d. uniform on [0, 1): wells row by row, then tops.
    pub fn init(n_wells: usize, n_tops: usize, cfg: &AlsConfig) -> Self {
        let f = cfg.factors;
        let mut rng = rng_from_seed(cfg.seed);
        let well_factors = (0..n_wells * f).map(|_| rng.random::<f64>()).collect();
        let top_factors = (0..n_tops * f).map(|_| rng.random::<f64>()).collect();
        Self {
            n_wells,
            n_tops,
            well_factors,
            top_factors,
            config: *cfg,
            final_loss: f64::INFINITY,
        }
    }

    /// Builds a model from explicit factor rows (each of length `factors`).
    pub fn from_factors(
        wells: &[Vec<f64>],
        tops: &[Vec<f64>],
        config: AlsConfig,
    ) -> Result<Self, AlsError> {
        let f = config.factors;
        if wells.iter().chain(tops).any(|row| row.len() != f) {
            return Err(AlsError::InvalidConfig(format!(
                "every factor row must have length {f}"
            )));
        }
        Ok(Self {
            n_wells: wells.len(),
            n_tops: tops.len(),
            well_factors: wells.concat(),
            top_factors: tops.concat(),
            config,
            final_loss: f64::INFINITY,
        })
    }

    pub fn factors(&self) -> usize {
        self.config.factors
    }

    pub fn n_wells(&self) -> usize {
        self.n_wells
    }

    pub fn n_tops(&self) -> usize {
        self.n_tops
    }

    pub fn well_vector(&self, u: usize) -> &[f64] {
        let f = self.factors();
        &self.well_factors[u * f..(u + 1) * f]
    }

    pub fn top_vector(&self, i: usize) -> &[f64] {
        let f = self.factors();
        &self.top_factors[i * f..(i + 1) * f]
    }

    /// Normalized depth q_i · p_u, unclamped.
    pub fn predict(&self, u: usize, i: usize) -> Result<f64, AlsError> {
        if u >= self.n_wells || i >= self.n_tops {
            return Err(AlsError::IndexOutOfRange {
                well: u,
                top: i,
                n_wells: self.n_wells,
                n_tops: self.n_tops,
            });
        }
        Ok(dot(self.top_vector(i), self.well_vector(u)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized squared error of `model` on `train`; only wells and tops that
/// appear in `train` are penalized, each once.
pub fn loss(model: &LatentModel, train: &Ratings) -> f64 {
    let lambda = model.config.lambda;
    let sq: f64 = train
        .entries()
        .iter()
        .map(|&(u, i, r)| {
            let e = r - dot(model.top_vector(i), model.well_vector(u));
            e * e
        })
        .sum();
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let wells: f64 = (0..train.n_wells())
        .filter(|&u| !train.well_entries(u).is_empty())
        .map(|u| norm2(model.well_vector(u)))
        .sum();
    let tops: f64 = (0..train.n_tops())
        .filter(|&i| !train.top_entries(i).is_empty())
        .map(|i| norm2(model.top_vector(i)))
        .sum();
    sq + lambda * (wells + tops)
}

/// Stepwise driver exposing each half-step of the alternation.
pub struct AlsSolver<'a> {
    train: &'a Ratings,
    model: LatentModel,
    jittered_solves: usize,
}

impl<'a> AlsSolver<'a> {
    pub fn new(train: &'a Ratings, cfg: &AlsConfig) -> Result<Self, AlsError> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(AlsError::NoTrainingData);
        }
        Ok(Self {
            train,
            model: LatentModel::init(train.n_wells(), train.n_tops(), cfg),
            jittered_solves: 0,
        })
    }

    /// Starts from a given model instead of a random initialization.
    pub fn from_model(train: &'a Ratings, model: LatentModel) -> Result<Self, AlsError> {
        model.config.validate()?;
        if train.is_empty() {
            return Err(AlsError::NoTrainingData);
        }
        if model.n_wells != train.n_wells() || model.n_tops != train.n_tops() {
            return Err(AlsError::InvalidConfig(
                "model shape does not match training matrix".into(),
            ));
        }
        Ok(Self {
            train,
            model,
            jittered_solves: 0,
        })
    }

    pub fn model(&self) -> &LatentModel {
        &self.model
    }

    pub fn loss(&self) -> f64 {
        loss(&self.model, self.train)
    }

    /// Number of solves that needed diagonal jitter so far.
    pub fn jittered_solves(&self) -> usize {
        self.jittered_solves
    }

    /// Holds top vectors fixed and solves each active well's ridge system.
    pub fn update_wells(&mut self) -> Result<(), AlsError> {
        let f = self.model.factors();
        let lambda = self.model.config.lambda;
        for u in 0..self.train.n_wells() {
            let obs = self.train.well_entries(u);
            if obs.is_empty() {
                continue;
            }
            let (sol, jittered) =
                solve_block(obs, |i| self.model.top_vector(i), f, lambda)?;
            self.jittered_solves += jittered as usize;
            self.model.well_factors[u * f..(u + 1) * f].copy_from_slice(sol.as_slice());
        }
        Ok(())
    }

    /// Holds well vectors fixed and solves each active top's ridge system.
    pub fn update_tops(&mut self) -> Result<(), AlsError> {
        let f = self.model.factors();
        let lambda = self.model.config.lambda;
        for i in 0..self.train.n_tops() {
            let obs = self.train.top_entries(i);
            if obs.is_empty() {
                continue;
            }
            let (sol, jittered) =
                solve_block(obs, |u| self.model.well_vector(u), f, lambda)?;
            self.jittered_solves += jittered as usize;
            self.model.top_factors[i * f..(i + 1) * f].copy_from_slice(sol.as_slice());
        }
        Ok(())
    }

    /// One full cycle: wells first, then tops.
    pub fn step(&mut self) -> Result<(), AlsError> {
        self.update_wells()?;
        self.update_tops()
    }

    pub fn finish(mut self) -> LatentModel {
        if self.jittered_solves > 0 {
            warn!(
                "{} singular normal systems at lambda = {} were solved with diagonal jitter",
                self.jittered_solves, self.model.config.lambda
            );
        }
        self.model.final_loss = loss(&self.model, self.train);
        self.model
    }
}

/// Ridge solve (Σ v vᵀ + λI) x = Σ r v over the observed partner vectors.
fn solve_block<'m>(
    obs: &[(usize, f64)],
    partner: impl Fn(usize) -> &'m [f64],
    f: usize,
    lambda: f64,
) -> Result<(DVector<f64>, bool), AlsError> {
    let mut a = DMatrix::<f64>::zeros(f, f);
    let mut b = DVector::<f64>::zeros(f);
    for &(j, r) in obs {
        let v = partner(j);
        for row in 0..f {
            b[row] += r * v[row];
            for col in 0..=row {
                a[(row, col)] += v[row] * v[col];
            }
        }
    }
    for row in 0..f {
        for col in 0..row {
            a[(col, row)] = a[(row, col)];
        }
        a[(row, row)] += lambda;
    }
    if let Some(x) = spd_solve(&a, &b) {
        return Ok((x, false));
    }
    let scale = (0..f).map(|k| a[(k, k)]).fold(1.0_f64, f64::max);
    let mut jitter = SINGULAR_JITTER * scale;
    for _ in 0..6 {
        let mut aj = a.clone();
        for k in 0..f {
            aj[(k, k)] += jitter;
        }
        if let Some(x) = spd_solve(&aj, &b) {
            return Ok((x, true));
        }
        jitter *= 100.0;
    }
    Err(AlsError::SingularSystem)
}

fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let max_diag = (0..a.nrows()).map(|k| a[(k, k)]).fold(0.0_f64, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let degenerate = (0..a.nrows()).any(|k| {
        let p = l[(k, k)] * l[(k, k)];
        !(p > PIVOT_TOLERANCE * max_diag)
    });
    if degenerate {
        return None;
    }
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Runs exactly `cfg.iterations` alternation cycles from the seeded
/// initialization.
pub fn fit(train: &Ratings, cfg: &AlsConfig) -> Result<LatentModel, AlsError> {
    let mut solver = AlsSolver::new(train, cfg)?;
    for _ in 0..cfg.iterations {
        solver.step()?;
    }
    Ok(solver.finish())
}

/// Fits once and snapshots the model after each cycle count in
/// `checkpoints`. Snapshot `k` is bit-identical to
/// `fit(train, cfg with iterations = checkpoints[k])`.
pub fn fit_with_checkpoints(
    train: &Ratings,
    cfg: &AlsConfig,
    checkpoints: &[usize],
) -> Result<Vec<LatentModel>, AlsError> {
    let mut order: Vec<usize> = (0..checkpoints.len()).collect();
    order.sort_by_key(|&k| checkpoints[k]);
    let mut out: Vec<Option<LatentModel>> = vec![None; checkpoints.len()];
    let mut solver = AlsSolver::new(train, &AlsConfig { iterations: 1, ..*cfg })?;
    let mut done = 0;
    for k in order {
        let target = checkpoints[k];
        if target < 1 {
            return Err(AlsError::InvalidConfig("iterations must be ≥ 1".into()));
        }
        while done < target {
            solver.step()?;
            done += 1;
        }
        let mut m = solver.model().clone();
        m.config.iterations = target;
        m.final_loss = loss(&m, train);
        out[k] = Some(m);
    }
    Ok(out.into_iter().map(|m| m.expect("every checkpoint visited")).collect())
}
