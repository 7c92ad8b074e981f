use std::io::Write;

use anyhow::{bail, Context, Result};
use log::{info, warn};

use topsrec_core::als::AlsConfig;
use topsrec_core::experiment::{als_cv_predictions, fit_full, median_mae_by_fraction, sweep as run_sweep};
use topsrec_core::hyperopt::{grid_search, write_grid, GridSpec};
use topsrec_core::metrics::{
    cv_report, method_difference, per_well_report, read_per_top, render_fold_table,
    write_error_map, write_fold_summary, write_per_top, write_sweep, ErrorReport, FoldKey,
    Prediction, Scope,
};
use topsrec_core::spline::spline_cv_predictions;
use topsrec_core::validation::{
    default_block_size, random_folds, spatial_folds, train_fraction_schedule, FoldPlan,
    DEFAULT_FRACTIONS,
};
use topsrec_core::TopsDataset;

use crate::output::RunDir;
use crate::{
    CvArgs, DataArgs, GridArgs, ModelArgs, ModelOnlyArgs, PlanArgs, PlanOnlyArgs, SplineArgs,
    SweepArgs,
};

fn load(data: &DataArgs) -> Result<TopsDataset> {
    let ds = TopsDataset::load(&data.wells, &data.picks)?;
    for w in ds.warnings() {
        warn!("{w}");
    }
    info!(
        "{} wells, {} tops, {} picks",
        ds.n_wells(),
        ds.n_tops(),
        ds.n_picks()
    );
    Ok(ds)
}

fn plan(ds: &TopsDataset, args: &PlanArgs, seed: u64) -> Result<FoldPlan> {
    if args.spatial {
        let block = match args.block_size {
            Some(b) => b,
            None => default_block_size(ds)?,
        };
        info!("spatial blocks of {block} m");
        Ok(spatial_folds(ds, args.folds, block, seed)?)
    } else {
        Ok(random_folds(ds, args.folds, seed)?)
    }
}

fn als_config(m: &ModelArgs, seed: u64) -> Result<AlsConfig> {
    let cfg = AlsConfig::new(m.factors, m.iterations, m.lambda, seed);
    cfg.validate()?;
    Ok(cfg)
}

fn write_reports(
    run: &mut RunDir,
    ds: &TopsDataset,
    report: &ErrorReport,
    preds: &[Prediction],
) -> Result<()> {
    run.write("fold_summary.csv", |w| Ok(write_fold_summary(report, w)?))?;
    run.write("per_top.csv", |w| Ok(write_per_top(report, w)?))?;
    let (_, map) = per_well_report(&report.method, ds, preds);
    run.write("error_map.csv", |w| Ok(write_error_map(&map, w)?))?;
    print!("{}", render_fold_table(report));
    Ok(())
}

pub fn cv(args: &CvArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let plan = plan(&ds, &args.plan, args.data.seed)?;
    let cfg = als_config(&args.model, args.data.seed)?;
    let mut run = RunDir::create(&args.data.out)?;
    let preds = als_cv_predictions(&ds, &plan, &cfg)?;
    let report = cv_report("recommender", &ds, &plan, &preds);
    write_reports(&mut run, &ds, &report, &preds)?;
    run.finish("cv", args, &args.data)
}

pub fn spline_cv(args: &SplineArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let plan = plan(&ds, &args.plan, args.data.seed)?;
    // Read the comparison before any output is produced.
    let rec = match &args.compare {
        Some(path) => {
            let f = std::fs::File::open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            Some(
                read_per_top("recommender", f)
                    .with_context(|| format!("reading {}", path.display()))?,
            )
        }
        None => None,
    };
    let mut run = RunDir::create(&args.data.out)?;
    let preds = spline_cv_predictions(&ds, &plan, args.damping)?;
    let mut report = cv_report("spline", &ds, &plan, &preds);
    if let Some(rec) = &rec {
        report = method_difference(&report, rec).with_context(|| {
            "recommender report does not match this dataset and fold count".to_string()
        })?;
        let diffs: Vec<f64> = report
            .rows_of(Scope::Top)
            .filter(|r| r.fold == FoldKey::Average)
            .filter_map(|r| r.mae_diff)
            .collect();
        if !diffs.is_empty() {
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            println!("mean MAE difference (spline - recommender): {mean:.1} m over {} tops", diffs.len());
        }
    }
    write_reports(&mut run, &ds, &report, &preds)?;
    run.finish("spline-cv", args, &args.data)
}

pub fn grid(args: &GridArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let plan = plan(&ds, &args.plan, args.data.seed)?;
    let default = GridSpec::default();
    let spec = GridSpec {
        factors: or_default(&args.factors, default.factors),
        iterations: or_default(&args.iterations, default.iterations),
        lambdas: or_default(&args.lambdas, default.lambdas),
    };
    info!("{} configurations", spec.len());
    let mut run = RunDir::create(&args.data.out)?;
    let result = grid_search(&ds, &plan, &spec, args.data.seed)?;
    run.write("grid.csv", |w| Ok(write_grid(&result, w)?))?;
    let best = result.best_cell();
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
    println!(
        "best: factors={} iterations={} lambda={} avg_mae_m={} avg_rmse_m={}",
        best.config.factors,
        best.config.iterations,
        best.config.lambda,
        cell(best.avg_mae),
        cell(best.avg_rmse)
    );
    run.finish("grid", args, &args.data)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let cfg = als_config(&args.model, args.data.seed)?;
    let fractions = if args.fractions.is_empty() {
        DEFAULT_FRACTIONS.to_vec()
    } else {
        args.fractions.clone()
    };
    let runs = train_fraction_schedule(&fractions, args.restarts, args.data.seed)?;
    let mut run = RunDir::create(&args.data.out)?;
    let rows = run_sweep(&ds, &cfg, &runs)?;
    run.write("sweep.csv", |w| Ok(write_sweep(&rows, w)?))?;
    println!("{:>8} {:>12}", "fraction", "median MAE");
    for (f, m) in median_mae_by_fraction(&rows) {
        println!("{f:>8} {m:>12.1}");
    }
    run.finish("sweep", args, &args.data)
}

pub fn dump_plan(args: &PlanOnlyArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let plan = plan(&ds, &args.plan, args.data.seed)?;
    let mut run = RunDir::create(&args.data.out)?;
    run.write("plan.csv", |w| {
        let mut rows = csv_writer(w);
        rows.write_record(["well_id", "top_id", "fold", "role"])?;
        for fold in 0..plan.n_folds {
            for (k, p) in ds.picks().iter().enumerate() {
                rows.write_record([
                    ds.wells()[p.well].well_id.as_str(),
                    ds.tops()[p.top].as_str(),
                    &(fold + 1).to_string(),
                    plan.role(k, fold).as_str(),
                ])?;
            }
        }
        rows.flush()?;
        Ok(())
    })?;
    for fold in 0..plan.n_folds {
        println!(
            "fold {}: {} validation picks",
            fold + 1,
            plan.validation(fold).len()
        );
    }
    println!("singleton-top picks: {}", plan.singleton_picks().len());
    run.finish("dump-plan", args, &args.data)
}

pub fn dump_model(args: &ModelOnlyArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let cfg = als_config(&args.model, args.data.seed)?;
    if ds.n_picks() == 0 {
        bail!("no picks to fit");
    }
    let mut run = RunDir::create(&args.data.out)?;
    let model = fit_full(&ds, &cfg)?;
    run.write("model.csv", |w| {
        let mut rows = csv_writer(w);
        let mut header = vec!["entity_kind".to_string(), "entity_id".to_string()];
        header.extend((0..model.factors()).map(|k| format!("f{k}")));
        rows.write_record(&header)?;
        for (u, well) in ds.wells().iter().enumerate() {
            let mut rec = vec!["well".to_string(), well.well_id.clone()];
            rec.extend(model.well_vector(u).iter().map(|v| v.to_string()));
            rows.write_record(&rec)?;
        }
        for (i, top) in ds.tops().iter().enumerate() {
            let mut rec = vec!["top".to_string(), top.clone()];
            rec.extend(model.top_vector(i).iter().map(|v| v.to_string()));
            rows.write_record(&rec)?;
        }
        rows.flush()?;
        Ok(())
    })?;
    let unconstrained = ds.unconstrained_tops();
    run.write("predictions.csv", |w| {
        let mut rows = csv_writer(w);
        rows.write_record([
            "well_id",
            "top_id",
            "predicted_tvdss_m",
            "observed_tvdss_m",
            "unconstrained",
        ])?;
        for (u, well) in ds.wells().iter().enumerate() {
            for (i, top) in ds.tops().iter().enumerate() {
                let predicted = ds.denormalize(model.predict(u, i)?);
                let observed = ds
                    .pick_at(u, i)
                    .map(|k| ds.pick_tvdss(k).to_string())
                    .unwrap_or_default();
                rows.write_record([
                    well.well_id.as_str(),
                    top.as_str(),
                    &predicted.to_string(),
                    &observed,
                    if unconstrained.contains(&i) { "true" } else { "false" },
                ])?;
            }
        }
        rows.flush()?;
        Ok(())
    })?;
    println!("final loss: {}", model.final_loss);
    run.finish("dump-model", args, &args.data)
}

fn or_default<T: Clone>(given: &[T], default: Vec<T>) -> Vec<T> {
    if given.is_empty() {
        default
    } else {
        given.to_vec()
    }
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(w)
}
