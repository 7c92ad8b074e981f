//! End-to-end runs on synthetic layered fields.

use topsrec_core::als::AlsConfig;
use topsrec_core::dataset::{ingest_readers, TopsDataset};
use topsrec_core::experiment::{als_cv, als_cv_predictions, median_mae_by_fraction, sweep};
use topsrec_core::hyperopt::{evaluate_cell, grid_search, GridSpec};
use topsrec_core::metrics::{
    cv_report, mae, method_difference, per_well_report, read_per_top, write_per_top, FoldKey,
    Scope,
};
use topsrec_core::spline::{spline_cv, spline_cv_predictions, DEFAULT_DAMPING};
use topsrec_core::synthetic::{layered_field, FieldSpec};
use topsrec_core::validation::{
    default_block_size, random_folds, spatial_folds, train_fraction_schedule,
};

fn field(spec: FieldSpec) -> TopsDataset {
    let f = layered_field(&spec);
    TopsDataset::build(f.tables).unwrap()
}

fn default_field() -> TopsDataset {
    field(FieldSpec::default())
}

fn dense_field() -> TopsDataset {
    field(FieldSpec {
        pick_rate: 0.8,
        ..FieldSpec::default()
    })
}

#[test]
fn synthetic_csv_round_trips_through_ingestion() {
    let f = layered_field(&FieldSpec::default());
    let direct = TopsDataset::build(f.tables.clone()).unwrap();
    let parsed = TopsDataset::build(
        ingest_readers(f.wells_csv().as_bytes(), "w", f.picks_csv().as_bytes(), "p").unwrap(),
    )
    .unwrap();
    assert_eq!(direct.n_picks(), parsed.n_picks());
    for k in 0..direct.n_picks() {
        assert!((direct.pick_tvdss(k) - parsed.pick_tvdss(k)).abs() < 1e-9);
    }
    let again = TopsDataset::build(
        ingest_readers(f.wells_csv().as_bytes(), "w", f.picks_csv().as_bytes(), "p").unwrap(),
    )
    .unwrap();
    assert_eq!(parsed, again);
}

#[test]
fn recommender_cv_report_shape() {
    let ds = dense_field();
    let plan = random_folds(&ds, 4, 1).unwrap();
    let cfg = AlsConfig::new(3, 400, 0.001, 3);
    let preds = als_cv_predictions(&ds, &plan, &cfg).unwrap();
    let n_validated: usize = (0..4).map(|f| plan.validation(f).len()).sum();
    assert_eq!(preds.len(), n_validated);

    let report = cv_report("recommender", &ds, &plan, &preds);
    assert_eq!(report, als_cv(&ds, &plan, &cfg).unwrap());
    assert_eq!(report.rows_of(Scope::Top).count(), ds.n_tops() * 5);
    for f in 0..4 {
        let fold_preds: Vec<_> = preds.iter().filter(|p| p.fold == f).collect();
        let p: Vec<f64> = fold_preds.iter().map(|p| p.predicted).collect();
        let t: Vec<f64> = fold_preds.iter().map(|p| p.observed).collect();
        let row = report.fold_summary(FoldKey::Fold(f)).unwrap();
        assert_eq!(row.mae, Some(mae(&p, &t).unwrap()));
        assert_eq!(row.n_test, fold_preds.len());
    }
    let fold_mean = (0..4)
        .map(|f| report.fold_summary(FoldKey::Fold(f)).unwrap().mae.unwrap())
        .sum::<f64>()
        / 4.0;
    assert!((report.average_mae().unwrap() - fold_mean).abs() < 1e-12);
    for r in &report.rows {
        if let (Some(m), Some(e)) = (r.mae, r.rmse) {
            assert!(e >= m - 1e-12);
        } else {
            assert!(r.mae.is_none() && r.rmse.is_none());
        }
    }
    // The field is rank 3 with 2 m pick noise.
    assert!(report.average_mae().unwrap() < 5.0, "{:?}", report.average_mae());
}

#[test]
fn spatial_blocking_hurts_the_recommender() {
    let ds = default_field();
    let cfg = AlsConfig::new(2, 100, 0.1, 3);
    let random = als_cv(&ds, &random_folds(&ds, 4, 1).unwrap(), &cfg).unwrap();
    let block = default_block_size(&ds).unwrap();
    let spatial = als_cv(&ds, &spatial_folds(&ds, 4, block, 1).unwrap(), &cfg).unwrap();
    assert!(spatial.average_mae().unwrap() > random.average_mae().unwrap());
}

#[test]
fn spline_cv_reports_missing_cells() {
    let wells = "well_id,datum_elev_m,ground_elev_m,x_m,y_m\n\
                 W1,0,0,0,0\nW2,0,0,100,0\nW3,0,0,0,100\nW4,0,0,100,100\n";
    // Top B has both picks in W1/W2; whichever fold validates both has no
    // training data for B.
    let picks = "well_id,top_id,md_m\n\
                 W1,A,10\nW2,A,11\nW3,A,12\nW4,A,13\nW1,B,50\nW2,B,52\nW3,C,70\n";
    let ds = TopsDataset::build(
        ingest_readers(wells.as_bytes(), "w", picks.as_bytes(), "p").unwrap(),
    )
    .unwrap();
    let plan = topsrec_core::validation::spatial_folds(&ds, 2, 60.0, 4);
    let plan = match plan {
        Ok(p) => p,
        Err(e) => panic!("{e}"),
    };
    let report = spline_cv(&ds, &plan, DEFAULT_DAMPING).unwrap();
    let b = ds.top_index("B").unwrap();
    let fold_b = plan.fold_of(ds.pick_at(0, b).unwrap()).unwrap();
    if plan.fold_of(ds.pick_at(1, b).unwrap()) == Some(fold_b) {
        let row = report
            .rows_of(Scope::Top)
            .find(|r| r.id == "B" && r.fold == FoldKey::Fold(fold_b))
            .unwrap();
        assert_eq!(row.n_test, 0);
        assert_eq!(row.mae, None);
    }
    // C is a singleton top: never validated.
    assert!(report
        .rows_of(Scope::Top)
        .filter(|r| r.id == "C")
        .all(|r| r.n_test == 0 && r.mae.is_none()));
}

#[test]
fn spline_single_training_pick_predicts_its_depth() {
    let wells = "well_id,datum_elev_m,ground_elev_m,x_m,y_m\nW1,0,0,0,0\nW2,0,0,500,0\n";
    let picks = "well_id,top_id,md_m\nW1,A,10\nW2,A,30\n";
    let ds = TopsDataset::build(
        ingest_readers(wells.as_bytes(), "w", picks.as_bytes(), "p").unwrap(),
    )
    .unwrap();
    let plan = random_folds(&ds, 2, 0).unwrap();
    let preds = spline_cv_predictions(&ds, &plan, 0.0).unwrap();
    assert_eq!(preds.len(), 2);
    for p in preds {
        let other = 1 - p.pick;
        assert!((p.predicted - ds.pick_tvdss(other)).abs() < 1e-9);
    }
}

#[test]
fn method_difference_and_per_top_csv() {
    let ds = default_field();
    let plan = random_folds(&ds, 4, 8).unwrap();
    let rec = als_cv(&ds, &plan, &AlsConfig::new(2, 100, 0.1, 2)).unwrap();
    let spl = spline_cv(&ds, &plan, DEFAULT_DAMPING).unwrap();

    let mut buf = Vec::new();
    write_per_top(&rec, &mut buf).unwrap();
    let rec_top = read_per_top("recommender", buf.as_slice()).unwrap();
    assert_eq!(
        rec_top.rows,
        rec.rows_of(Scope::Top).cloned().collect::<Vec<_>>()
    );

    let diff = method_difference(&spl, &rec_top).unwrap();
    for (d, (s, r)) in diff
        .rows_of(Scope::Top)
        .zip(spl.rows_of(Scope::Top).zip(rec.rows_of(Scope::Top)))
    {
        match (s.mae, r.mae) {
            (Some(a), Some(b)) => assert_eq!(d.mae_diff, Some(a - b)),
            _ => assert_eq!(d.mae_diff, None),
        }
    }
    // Fold-summary scope is absent from the per-top file and stays blank.
    assert!(diff.rows_of(Scope::FoldSummary).all(|r| r.mae_diff.is_none()));

    let full = method_difference(&spl, &rec).unwrap();
    for (d, r) in full
        .rows_of(Scope::FoldSummary)
        .zip(rec.rows_of(Scope::FoldSummary))
    {
        let s = spl.fold_summary(d.fold).unwrap();
        assert_eq!(d.id, "spline");
        assert_eq!(d.mae_diff, Some(s.mae.unwrap() - r.mae.unwrap()));
    }
}

#[test]
fn per_well_map_excludes_unvalidated_wells() {
    let ds = default_field();
    let plan = random_folds(&ds, 4, 8).unwrap();
    let preds = als_cv_predictions(&ds, &plan, &AlsConfig::new(2, 50, 0.1, 2)).unwrap();
    let (report, map) = per_well_report("recommender", &ds, &preds);
    assert_eq!(report.rows.len(), map.len());
    let counts = ds.well_pick_counts();
    for row in &map {
        let u = ds.well_index(&row.well_id).unwrap();
        assert_eq!(row.n_picks, counts[u]);
        assert!(row.rmse_m >= row.mae_m);
    }
    let validated_wells: std::collections::BTreeSet<usize> =
        preds.iter().map(|p| ds.picks()[p.pick].well).collect();
    assert_eq!(map.len(), validated_wells.len());

    let single: Vec<_> = preds.iter().take(1).copied().collect();
    let (_, one) = per_well_report("recommender", &ds, &single);
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].mae_m, one[0].rmse_m);
    assert_eq!(one[0].mae_m, (single[0].predicted - single[0].observed).abs());
}

#[test]
fn grid_cells_match_isolated_evaluation() {
    let ds = field(FieldSpec {
        n_wells: 40,
        n_tops: 6,
        ..FieldSpec::default()
    });
    let plan = random_folds(&ds, 4, 5).unwrap();
    let spec = GridSpec {
        factors: vec![1, 2],
        iterations: vec![5, 20, 40],
        lambdas: vec![0.01, 1.0],
    };
    let result = grid_search(&ds, &plan, &spec, 99).unwrap();
    assert_eq!(result.cells.len(), 12);
    for cell in result.cells.iter().step_by(5) {
        for fold in 0..4 {
            let (m, r) = evaluate_cell(&ds, &plan, &cell.config, fold).unwrap();
            assert_eq!(m, cell.fold_mae[fold]);
            assert_eq!(r, cell.fold_rmse[fold]);
        }
    }
    let best = result.best_cell().avg_mae.unwrap();
    assert!(result.cells.iter().all(|c| c.avg_mae.unwrap() >= best));
    assert_eq!(result.rank_of(result.best), 0);
    assert_eq!(result, grid_search(&ds, &plan, &spec, 99).unwrap());

    // The grid's cell equals the cv run with the same config.
    let cv = als_cv(&ds, &plan, &result.cells[3].config).unwrap();
    for fold in 0..4 {
        assert_eq!(
            cv.fold_summary(FoldKey::Fold(fold)).unwrap().mae,
            result.cells[3].fold_mae[fold]
        );
    }
}

#[test]
fn one_cell_grid_selects_it() {
    let ds = field(FieldSpec {
        n_wells: 30,
        n_tops: 5,
        ..FieldSpec::default()
    });
    let plan = random_folds(&ds, 4, 5).unwrap();
    let spec = GridSpec {
        factors: vec![2],
        iterations: vec![29],
        lambdas: vec![0.1],
    };
    let r = grid_search(&ds, &plan, &spec, 1).unwrap();
    assert_eq!(r.best, 0);
    assert_eq!(r.cells[0].config.iterations, 29);
}

#[test]
fn sweep_error_falls_with_training_fraction() {
    let ds = default_field();
    let runs = train_fraction_schedule(&[0.01, 0.10, 0.50, 0.99], 5, 3).unwrap();
    let rows = sweep(&ds, &AlsConfig::new(2, 60, 0.1, 3), &runs).unwrap();
    assert_eq!(rows.len(), 20);
    let med = median_mae_by_fraction(&rows);
    let m: Vec<f64> = med.iter().map(|x| x.1).collect();
    assert!(m[1] > m[2] && m[2] > m[3], "{med:?}");
    assert!(m[0] > m[3], "{med:?}");
    assert_eq!(rows, sweep(&ds, &AlsConfig::new(2, 60, 0.1, 3), &runs).unwrap());
}
