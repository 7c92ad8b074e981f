//! Recommender runs under fold plans and the train-fraction sweep.

use rayon::prelude::*;

use crate::als::{fit, AlsConfig, AlsError, LatentModel, Ratings};
use crate::dataset::TopsDataset;
use crate::metrics::{cv_report, mae, rmse, ErrorReport, Prediction, SweepRow};
use crate::seed::derive_seed;
use crate::validation::{sample_split, FoldPlan, SweepRun};

/// Initialization seed of `fold` for a config seeded with `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, &[fold as u64])
}

pub fn fold_training(ds: &TopsDataset, plan: &FoldPlan, fold: usize) -> Result<Ratings, AlsError> {
    Ratings::from_picks(ds, &plan.training(fold))
}

/// Denormalized predictions of `picks`, tagged with `fold`.
pub fn predict_picks(
    model: &LatentModel,
    ds: &TopsDataset,
    picks: &[usize],
    fold: usize,
) -> Result<Vec<Prediction>, AlsError> {
    picks
        .iter()
        .map(|&k| {
            let p = ds.picks()[k];
            Ok(Prediction {
                pick: k,
                fold,
                predicted: ds.denormalize(model.predict(p.well, p.top)?),
                observed: ds.pick_tvdss(k),
            })
        })
        .collect()
}

/// Fits one fold and predicts its validation picks.
pub fn als_fold(
    ds: &TopsDataset,
    plan: &FoldPlan,
    cfg: &AlsConfig,
    fold: usize,
) -> Result<Vec<Prediction>, AlsError> {
    let train = fold_training(ds, plan, fold)?;
    let model = fit(
        &train,
        &AlsConfig {
            seed: fold_seed(cfg.seed, fold),
            ..*cfg
        },
    )?;
    predict_picks(&model, ds, &plan.validation(fold), fold)
}

/// Validation predictions of every fold; folds run concurrently.
pub fn als_cv_predictions(
    ds: &TopsDataset,
    plan: &FoldPlan,
    cfg: &AlsConfig,
) -> Result<Vec<Prediction>, AlsError> {
    let per_fold: Vec<_> = (0..plan.n_folds)
        .into_par_iter()
        .map(|fold| als_fold(ds, plan, cfg, fold))
        .collect();
    let mut out = Vec::new();
    for r in per_fold {
        out.extend(r?);
    }
    Ok(out)
}

pub fn als_cv(ds: &TopsDataset, plan: &FoldPlan, cfg: &AlsConfig) -> Result<ErrorReport, AlsError> {
    let preds = als_cv_predictions(ds, plan, cfg)?;
    Ok(cv_report("recommender", ds, plan, &preds))
}

/// Fits on every pick of the dataset.
pub fn fit_full(ds: &TopsDataset, cfg: &AlsConfig) -> Result<LatentModel, AlsError> {
    let all: Vec<usize> = (0..ds.n_picks()).collect();
    fit(&Ratings::from_picks(ds, &all)?, cfg)
}

/// One sweep run: uniform split, fit from a fresh initialization, score the
/// held-out picks.
pub fn sweep_run(ds: &TopsDataset, cfg: &AlsConfig, run: &SweepRun) -> Result<SweepRow, AlsError> {
    let (train_idx, test_idx) = sample_split(ds.n_picks(), run.fraction, derive_seed(run.seed, &[1]));
    let train = Ratings::from_picks(ds, &train_idx)?;
    let model = fit(
        &train,
        &AlsConfig {
            seed: derive_seed(run.seed, &[2]),
            ..*cfg
        },
    )?;
    let preds = predict_picks(&model, ds, &test_idx, 0)?;
    let p: Vec<f64> = preds.iter().map(|x| x.predicted).collect();
    let t: Vec<f64> = preds.iter().map(|x| x.observed).collect();
    let (mae_m, rmse_m) = if p.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (mae(&p, &t).expect("non-empty"), rmse(&p, &t).expect("non-empty"))
    };
    Ok(SweepRow {
        fraction: run.fraction,
        restart: run.restart,
        mae_m,
        rmse_m,
    })
}

/// Runs the whole schedule concurrently; rows come back in schedule order.
pub fn sweep(
    ds: &TopsDataset,
    cfg: &AlsConfig,
    runs: &[SweepRun],
) -> Result<Vec<SweepRow>, AlsError> {
    runs.par_iter().map(|r| sweep_run(ds, cfg, r)).collect()
}

/// Median test MAE per fraction, in order of first appearance.
pub fn median_mae_by_fraction(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut fractions: Vec<f64> = Vec::new();
    for r in rows {
        if !fractions.contains(&r.fraction) {
            fractions.push(r.fraction);
        }
    }
    fractions
        .into_iter()
        .map(|f| {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.fraction == f)
                .map(|r| r.mae_m)
                .collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let med = if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            };
            (f, med)
        })
        .collect()
}
