//! Exhaustive grid search over factors × iterations × λ with k-fold scoring.
//!
//! A cell's initialization seed depends on the base seed, the factor and λ
//! ordinals, and the fold, but not on the iteration count. Cells that differ
//! only in iterations therefore lie on one ALS trajectory, and the search
//! fits each trajectory once, scoring it at every requested iteration count.
//! Each cell is still bit-identical to an isolated `fit` with its config.

use rayon::prelude::*;

use crate::als::{fit_with_checkpoints, AlsConfig, AlsError};
use crate::dataset::TopsDataset;
use crate::experiment::{fold_seed, fold_training, predict_picks};
use crate::metrics::{mae, rmse};
use crate::seed::derive_seed;
use crate::validation::FoldPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub factors: Vec<usize>,
    pub iterations: Vec<usize>,
    pub lambdas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            factors: (1..=10).collect(),
            iterations: (1..=44).map(|k| 10 * k).collect(),
            lambdas: vec![0.001, 0.01, 0.1, 1.0, 10.0],
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.factors.len() * self.iterations.len() * self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const RANKING_RULE: &str =
    "minimum fold-averaged MAE; ties broken by fewer factors, then fewer iterations, then smaller lambda";

/// Seed shared by every iteration count of one (factors, λ) pair.
pub fn trajectory_seed(base_seed: u64, factor_ord: usize, lambda_ord: usize) -> u64 {
    derive_seed(base_seed, &[factor_ord as u64, lambda_ord as u64])
}

/// Cartesian product in factors-major, then iterations, then λ order.
pub fn enumerate_grid(spec: &GridSpec, base_seed: u64) -> Result<Vec<AlsConfig>, AlsError> {
    if spec.is_empty() {
        return Err(AlsError::InvalidConfig("grid has an empty axis".into()));
    }
    let mut out = Vec::with_capacity(spec.len());
    for (fo, &factors) in spec.factors.iter().enumerate() {
        for &iterations in &spec.iterations {
            for (lo, &lambda) in spec.lambdas.iter().enumerate() {
                let cfg = AlsConfig::new(factors, iterations, lambda, trajectory_seed(base_seed, fo, lo));
                cfg.validate()?;
                out.push(cfg);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub config: AlsConfig,
    pub fold_mae: Vec<Option<f64>>,
    pub fold_rmse: Vec<Option<f64>>,
    pub avg_mae: Option<f64>,
    pub avg_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub best: usize,
    pub ranking_rule: &'static str,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    /// Zero-based rank of `cell` under the ranking rule.
    pub fn rank_of(&self, cell: usize) -> usize {
        let mut order: Vec<usize> = (0..self.cells.len()).collect();
        order.sort_by(|&a, &b| rank_cmp(&self.cells[a], &self.cells[b]));
        order.iter().position(|&c| c == cell).expect("cell in grid")
    }
}

fn rank_cmp(a: &GridCell, b: &GridCell) -> std::cmp::Ordering {
    let key = |c: &GridCell| c.avg_mae.filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);
    key(a)
        .total_cmp(&key(b))
        .then(a.config.factors.cmp(&b.config.factors))
        .then(a.config.iterations.cmp(&b.config.iterations))
        .then(a.config.lambda.total_cmp(&b.config.lambda))
}

/// Scores one (config, fold) cell in isolation.
pub fn evaluate_cell(
    ds: &TopsDataset,
    plan: &FoldPlan,
    cfg: &AlsConfig,
    fold: usize,
) -> Result<(Option<f64>, Option<f64>), AlsError> {
    let preds = crate::experiment::als_fold(ds, plan, cfg, fold)?;
    Ok(score(&preds))
}

fn score(preds: &[crate::metrics::Prediction]) -> (Option<f64>, Option<f64>) {
    let p: Vec<f64> = preds.iter().map(|x| x.predicted).collect();
    let t: Vec<f64> = preds.iter().map(|x| x.observed).collect();
    (mae(&p, &t).ok(), rmse(&p, &t).ok())
}

fn mean(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Validation MAE and RMSE of one cell on one fold.
type Score = (Option<f64>, Option<f64>);

pub fn grid_search(
    ds: &TopsDataset,
    plan: &FoldPlan,
    spec: &GridSpec,
    base_seed: u64,
) -> Result<GridResult, AlsError> {
    let configs = enumerate_grid(spec, base_seed)?;
    let n_folds = plan.n_folds;
    let n_it = spec.iterations.len();
    let n_lambda = spec.lambdas.len();
    let cell_index =
        |fo: usize, it: usize, lo: usize| (fo * n_it + it) * n_lambda + lo;

    let trajectories: Vec<(usize, usize, usize)> = (0..spec.factors.len())
        .flat_map(|fo| {
            (0..n_lambda).flat_map(move |lo| (0..n_folds).map(move |fold| (fo, lo, fold)))
        })
        .collect();

    let scored: Vec<Result<Vec<Score>, AlsError>> = trajectories
        .par_iter()
        .map(|&(fo, lo, fold)| {
            let base = configs[cell_index(fo, 0, lo)];
            let cfg = AlsConfig {
                seed: fold_seed(base.seed, fold),
                ..base
            };
            let train = fold_training(ds, plan, fold)?;
            let validate = plan.validation(fold);
            let models = fit_with_checkpoints(&train, &cfg, &spec.iterations)?;
            models
                .iter()
                .map(|m| Ok(score(&predict_picks(m, ds, &validate, fold)?)))
                .collect()
        })
        .collect();

    let mut fold_mae = vec![vec![None; n_folds]; configs.len()];
    let mut fold_rmse = vec![vec![None; n_folds]; configs.len()];
    for (&(fo, lo, fold), res) in trajectories.iter().zip(scored) {
        for (it, (m, r)) in res?.into_iter().enumerate() {
            let c = cell_index(fo, it, lo);
            fold_mae[c][fold] = m;
            fold_rmse[c][fold] = r;
        }
    }

    let cells: Vec<GridCell> = configs
        .into_iter()
        .zip(fold_mae.into_iter().zip(fold_rmse))
        .map(|(config, (fm, fr))| GridCell {
            avg_mae: mean(&fm),
            avg_rmse: mean(&fr),
            config,
            fold_mae: fm,
            fold_rmse: fr,
        })
        .collect();
    let best = (0..cells.len())
        .min_by(|&a, &b| rank_cmp(&cells[a], &cells[b]))
        .expect("non-empty grid");
    Ok(GridResult {
        cells,
        best,
        ranking_rule: RANKING_RULE,
    })
}

/// `factors,iterations,lambda,avg_mae_m,avg_rmse_m,fold1_mae,fold1_rmse,...`
pub fn write_grid<W: std::io::Write>(result: &GridResult, out: W) -> Result<(), csv::Error> {
    let n_folds = result.cells.first().map(|c| c.fold_mae.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["factors", "iterations", "lambda", "avg_mae_m", "avg_rmse_m"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for f in 1..=n_folds {
        header.push(format!("fold{f}_mae"));
        header.push(format!("fold{f}_rmse"));
    }
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &result.cells {
        let mut rec = vec![
            c.config.factors.to_string(),
            c.config.iterations.to_string(),
            c.config.lambda.to_string(),
            opt(c.avg_mae),
            opt(c.avg_rmse),
        ];
        for f in 0..n_folds {
            rec.push(opt(c.fold_mae[f]));
            rec.push(opt(c.fold_rmse[f]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
