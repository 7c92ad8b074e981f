//! Cross-validation plans and the train-fraction sweep schedule.
//!
//! Picks of tops that have exactly one pick in the whole dataset never enter a
//! validation set; they are part of every fold's training set instead, since a
//! top with no training entry cannot be predicted.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::dataset::TopsDataset;
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_FOLDS: usize = 4;
pub const DEFAULT_RESTARTS: usize = 100;
pub const DEFAULT_FRACTIONS: [f64; 11] =
    [0.01, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.99];

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("dataset has no picks")]
    EmptyDataset,
    #[error("block size must be finite and > 0, got {0}")]
    InvalidBlockSize(f64),
    #[error("all wells share one location; spatial blocks are undefined")]
    DegenerateExtent,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("restarts must be ≥ 1")]
    NoRestarts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanKind {
    Random,
    SpatialBlock { block_size: f64 },
}

/// Role of one pick within one fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Validate,
    SingletonTrainAll,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validate => "validate",
            Role::SingletonTrainAll => "singleton_train_all",
        }
    }
}

/// Assignment of every pick of a dataset to a validation fold, or to the
/// always-train singleton set.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub kind: PlanKind,
    pub seed: u64,
    /// Validation fold of each pick; `None` for singleton-top picks.
    assignment: Vec<Option<usize>>,
}

impl FoldPlan {
    pub fn n_picks(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_of(&self, pick: usize) -> Option<usize> {
        self.assignment[pick]
    }

    pub fn singleton_picks(&self) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&k| self.assignment[k].is_none())
            .collect()
    }

    pub fn role(&self, pick: usize, fold: usize) -> Role {
        match self.assignment[pick] {
            None => Role::SingletonTrainAll,
            Some(f) if f == fold => Role::Validate,
            Some(_) => Role::Train,
        }
    }

    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&k| self.assignment[k] == Some(fold))
            .collect()
    }

    /// Training picks of `fold`, singleton picks included.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&k| self.assignment[k] != Some(fold))
            .collect()
    }

    /// Checks the plan is shaped for `ds`.
    pub fn check_against(&self, ds: &TopsDataset) -> Result<(), PlanError> {
        if self.assignment.len() != ds.n_picks() {
            return Err(PlanError::InvalidPlan(format!(
                "plan covers {} picks, dataset has {}",
                self.assignment.len(),
                ds.n_picks()
            )));
        }
        if self
            .assignment
            .iter()
            .flatten()
            .any(|&f| f >= self.n_folds)
        {
            return Err(PlanError::InvalidPlan("fold index out of range".into()));
        }
        Ok(())
    }
}

fn check_inputs(ds: &TopsDataset, n_folds: usize) -> Result<Vec<usize>, PlanError> {
    if n_folds < 2 {
        return Err(PlanError::TooFewFolds(n_folds));
    }
    if ds.n_picks() == 0 {
        return Err(PlanError::EmptyDataset);
    }
    Ok(ds.top_pick_counts())
}

/// Shuffles the picks of multi-pick tops and deals them round-robin.
pub fn random_folds(ds: &TopsDataset, n_folds: usize, seed: u64) -> Result<FoldPlan, PlanError> {
    let counts = check_inputs(ds, n_folds)?;
    let mut multi: Vec<usize> = ds
        .picks()
        .iter()
        .enumerate()
        .filter(|(_, p)| counts[p.top] >= 2)
        .map(|(k, _)| k)
        .collect();
    multi.shuffle(&mut rng_from_seed(derive_seed(seed, &[0x5EED_F01D])));
    let mut assignment = vec![None; ds.n_picks()];
    for (slot, k) in multi.into_iter().enumerate() {
        assignment[k] = Some(slot % n_folds);
    }
    Ok(FoldPlan {
        n_folds,
        kind: PlanKind::Random,
        seed,
        assignment,
    })
}

/// A quarter of the shorter side of the well bounding box, falling back to
/// the longer side when the wells are collinear along an axis.
pub fn default_block_size(ds: &TopsDataset) -> Result<f64, PlanError> {
    let (w, h) = extent(ds)?;
    let short = w.min(h);
    Ok(if short > 0.0 { short / 4.0 } else { w.max(h) / 4.0 })
}

fn extent(ds: &TopsDataset) -> Result<(f64, f64), PlanError> {
    let wells = ds.wells();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for w in wells {
        x0 = x0.min(w.x);
        x1 = x1.max(w.x);
        y0 = y0.min(w.y);
        y1 = y1.max(w.y);
    }
    if wells.is_empty() || (x1 - x0 <= 0.0 && y1 - y0 <= 0.0) {
        return Err(PlanError::DegenerateExtent);
    }
    Ok((x1 - x0, y1 - y0))
}

/// Tiles the well bounding box with square blocks of side `block_size`,
/// shuffles the occupied blocks and deals them round-robin into folds.
pub fn spatial_folds(
    ds: &TopsDataset,
    n_folds: usize,
    block_size: f64,
    seed: u64,
) -> Result<FoldPlan, PlanError> {
    let counts = check_inputs(ds, n_folds)?;
    if !(block_size.is_finite() && block_size > 0.0) {
        return Err(PlanError::InvalidBlockSize(block_size));
    }
    extent(ds)?;
    let x0 = ds.wells().iter().map(|w| w.x).fold(f64::INFINITY, f64::min);
    let y0 = ds.wells().iter().map(|w| w.y).fold(f64::INFINITY, f64::min);
    let block_of: Vec<(i64, i64)> = ds
        .wells()
        .iter()
        .map(|w| {
            (
                ((w.x - x0) / block_size).floor() as i64,
                ((w.y - y0) / block_size).floor() as i64,
            )
        })
        .collect();

    let mut blocks: Vec<(i64, i64)> = ds.picks().iter().map(|p| block_of[p.well]).collect();
    blocks.sort_unstable();
    blocks.dedup();
    if blocks.len() < n_folds {
        return Err(PlanError::InvalidPlan(format!(
            "{} occupied blocks cannot fill {n_folds} folds; a fold would lack training or validation wells",
            blocks.len()
        )));
    }
    blocks.shuffle(&mut rng_from_seed(derive_seed(seed, &[0xB10C])));
    let fold_of_block: std::collections::HashMap<(i64, i64), usize> = blocks
        .into_iter()
        .enumerate()
        .map(|(slot, b)| (b, slot % n_folds))
        .collect();

    let assignment = ds
        .picks()
        .iter()
        .map(|p| (counts[p.top] >= 2).then(|| fold_of_block[&block_of[p.well]]))
        .collect();
    Ok(FoldPlan {
        n_folds,
        kind: PlanKind::SpatialBlock { block_size },
        seed,
        assignment,
    })
}

/// One run of the train-fraction sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRun {
    pub fraction: f64,
    pub restart: usize,
    pub seed: u64,
}

/// Cross product of fractions and restarts, each with its own derived seed.
pub fn train_fraction_schedule(
    fractions: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<Vec<SweepRun>, PlanError> {
    if restarts < 1 {
        return Err(PlanError::NoRestarts);
    }
    if let Some(&bad) = fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(PlanError::InvalidFraction(bad));
    }
    let mut runs = Vec::with_capacity(fractions.len() * restarts);
    for (fi, &fraction) in fractions.iter().enumerate() {
        for restart in 0..restarts {
            runs.push(SweepRun {
                fraction,
                restart,
                seed: derive_seed(seed, &[fi as u64, restart as u64]),
            });
        }
    }
    Ok(runs)
}

/// Uniform split of `n_picks` picks: `round(fraction·n)` (at least one, at
/// most n − 1) for training, the rest for testing. Both lists are sorted.
pub fn sample_split(n_picks: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n_picks).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let n_train = ((fraction * n_picks as f64).round() as usize).clamp(1, n_picks.saturating_sub(1).max(1));
    let mut test = idx.split_off(n_train.min(n_picks));
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}
