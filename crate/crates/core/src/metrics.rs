//! Error metrics and the report tables written by the experiments.
//!
//! All errors are in TVDSS meters. Missing cells (no held-out prediction) are
//! `None` in memory and empty fields in CSV.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::TopsDataset;
use crate::validation::FoldPlan;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no predictions to score")]
    EmptyInput,
    #[error("prediction and truth lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("report rows do not match: {0}")]
    KeyMismatch(String),
    #[error("report CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("report CSV: bad value `{value}` in column `{column}`")]
    Parse { column: String, value: String },
}

fn check(pred: &[f64], truth: &[f64]) -> Result<(), MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((total / pred.len() as f64).sqrt())
}

/// A held-out pick with its predicted and observed TVDSS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub pick: usize,
    pub fold: usize,
    pub predicted: f64,
    pub observed: f64,
}

fn score(preds: &[&Prediction]) -> (Option<f64>, Option<f64>) {
    if preds.is_empty() {
        return (None, None);
    }
    let p: Vec<f64> = preds.iter().map(|x| x.predicted).collect();
    let t: Vec<f64> = preds.iter().map(|x| x.observed).collect();
    (mae(&p, &t).ok(), rmse(&p, &t).ok())
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Top,
    Well,
    FoldSummary,
}

/// Zero-based fold, or the cross-fold average row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FoldKey {
    Fold(usize),
    Average,
}

impl FoldKey {
    /// One-based fold number or `average`, as written in CSVs.
    pub fn label(&self) -> String {
        match self {
            FoldKey::Fold(f) => (f + 1).to_string(),
            FoldKey::Average => "average".to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Self, MetricsError> {
        if s == "average" {
            return Ok(FoldKey::Average);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(FoldKey::Fold(n - 1)),
            _ => Err(MetricsError::Parse {
                column: "fold".into(),
                value: s.into(),
            }),
        }
    }
}

/// One report cell. In an `Average` top row `n_train` holds the top's total
/// pick count and `n_test` the number of scored predictions over all folds.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scope: Scope,
    pub id: String,
    pub fold: FoldKey,
    pub n_train: usize,
    pub n_test: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub avg_mae: Option<f64>,
    pub avg_rmse: Option<f64>,
    pub mae_diff: Option<f64>,
    pub rmse_diff: Option<f64>,
}

impl ReportRow {
    /// Join key across methods. Fold-summary rows carry the method name as
    /// their id, so they match on fold alone.
    fn key(&self) -> (Scope, String, FoldKey) {
        let id = match self.scope {
            Scope::FoldSummary => String::new(),
            _ => self.id.clone(),
        };
        (self.scope, id, self.fold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
}

impl ErrorReport {
    pub fn rows_of(&self, scope: Scope) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.scope == scope)
    }

    pub fn fold_summary(&self, fold: FoldKey) -> Option<&ReportRow> {
        self.rows_of(Scope::FoldSummary).find(|r| r.fold == fold)
    }

    /// Mean of per-fold MAEs (simple mean across folds).
    pub fn average_mae(&self) -> Option<f64> {
        self.fold_summary(FoldKey::Average).and_then(|r| r.mae)
    }

    pub fn average_rmse(&self) -> Option<f64> {
        self.fold_summary(FoldKey::Average).and_then(|r| r.rmse)
    }
}

/// Per-top and fold-summary rows for one method under `plan`.
///
/// Fold-summary errors are pick-weighted over the fold's predictions; the
/// average rows are simple means over folds that have predictions.
pub fn cv_report(
    method: &str,
    ds: &TopsDataset,
    plan: &FoldPlan,
    predictions: &[Prediction],
) -> ErrorReport {
    let n_folds = plan.n_folds;
    let picks = ds.picks();
    let mut n_train = vec![vec![0usize; n_folds]; ds.n_tops()];
    for (k, p) in picks.iter().enumerate() {
        for (fold, slot) in n_train[p.top].iter_mut().enumerate() {
            if plan.fold_of(k) != Some(fold) {
                *slot += 1;
            }
        }
    }
    let mut by_cell: HashMap<(usize, usize), Vec<&Prediction>> = HashMap::new();
    let mut by_fold: Vec<Vec<&Prediction>> = vec![Vec::new(); n_folds];
    for pr in predictions {
        by_cell
            .entry((picks[pr.pick].top, pr.fold))
            .or_default()
            .push(pr);
        by_fold[pr.fold].push(pr);
    }
    let top_counts = ds.top_pick_counts();

    let mut rows = Vec::new();
    for (top, top_id) in ds.tops().iter().enumerate() {
        let cells: Vec<(usize, Option<f64>, Option<f64>)> = (0..n_folds)
            .map(|fold| {
                let preds = by_cell.get(&(top, fold)).map(Vec::as_slice).unwrap_or(&[]);
                let (m, r) = score(preds);
                (preds.len(), m, r)
            })
            .collect();
        let avg_mae = mean_of(cells.iter().map(|c| c.1));
        let avg_rmse = mean_of(cells.iter().map(|c| c.2));
        for (fold, &(n_test, m, r)) in cells.iter().enumerate() {
            rows.push(ReportRow {
                scope: Scope::Top,
                id: top_id.clone(),
                fold: FoldKey::Fold(fold),
                n_train: n_train[top][fold],
                n_test,
                mae: m,
                rmse: r,
                avg_mae,
                avg_rmse,
                mae_diff: None,
                rmse_diff: None,
            });
        }
        rows.push(ReportRow {
            scope: Scope::Top,
            id: top_id.clone(),
            fold: FoldKey::Average,
            n_train: top_counts[top],
            n_test: cells.iter().map(|c| c.0).sum(),
            mae: avg_mae,
            rmse: avg_rmse,
            avg_mae,
            avg_rmse,
            mae_diff: None,
            rmse_diff: None,
        });
    }

    let fold_cells: Vec<(usize, Option<f64>, Option<f64>)> = by_fold
        .iter()
        .map(|preds| {
            let (m, r) = score(preds);
            (preds.len(), m, r)
        })
        .collect();
    let avg_mae = mean_of(fold_cells.iter().map(|c| c.1));
    let avg_rmse = mean_of(fold_cells.iter().map(|c| c.2));
    for (fold, &(n_test, m, r)) in fold_cells.iter().enumerate() {
        rows.push(ReportRow {
            scope: Scope::FoldSummary,
            id: method.to_string(),
            fold: FoldKey::Fold(fold),
            n_train: plan.training(fold).len(),
            n_test,
            mae: m,
            rmse: r,
            avg_mae,
            avg_rmse,
            mae_diff: None,
            rmse_diff: None,
        });
    }
    rows.push(ReportRow {
        scope: Scope::FoldSummary,
        id: method.to_string(),
        fold: FoldKey::Average,
        n_train: ds.n_picks(),
        n_test: predictions.len(),
        mae: avg_mae,
        rmse: avg_rmse,
        avg_mae,
        avg_rmse,
        mae_diff: None,
        rmse_diff: None,
    });

    ErrorReport {
        method: method.to_string(),
        rows,
    }
}

/// Row of the per-well error map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMapRow {
    pub well_id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub n_picks: usize,
    pub mae_m: f64,
    pub rmse_m: f64,
}

/// Per-well errors over each well's held-out picks. Wells without held-out
/// picks are left out.
pub fn per_well_report(
    method: &str,
    ds: &TopsDataset,
    predictions: &[Prediction],
) -> (ErrorReport, Vec<ErrorMapRow>) {
    let mut by_well: BTreeMap<usize, Vec<&Prediction>> = BTreeMap::new();
    for pr in predictions {
        by_well.entry(ds.picks()[pr.pick].well).or_default().push(pr);
    }
    let counts = ds.well_pick_counts();
    let mut rows = Vec::new();
    let mut map = Vec::new();
    for (well, preds) in by_well {
        let (m, r) = score(&preds);
        let (Some(m), Some(r)) = (m, r) else { continue };
        let header = &ds.wells()[well];
        rows.push(ReportRow {
            scope: Scope::Well,
            id: header.well_id.clone(),
            fold: FoldKey::Average,
            n_train: counts[well] - preds.len(),
            n_test: preds.len(),
            mae: Some(m),
            rmse: Some(r),
            avg_mae: Some(m),
            avg_rmse: Some(r),
            mae_diff: None,
            rmse_diff: None,
        });
        map.push(ErrorMapRow {
            well_id: header.well_id.clone(),
            x_m: header.x,
            y_m: header.y,
            n_picks: counts[well],
            mae_m: m,
            rmse_m: r,
        });
    }
    (
        ErrorReport {
            method: method.to_string(),
            rows,
        },
        map,
    )
}

/// Copies `spline` and fills `mae_diff = spline − recommender` (and RMSE
/// likewise) on every row. Positive values favour the recommender.
///
/// Scopes present in only one report are left without differences; within a
/// shared scope the row keys must agree exactly.
pub fn method_difference(
    spline: &ErrorReport,
    rec: &ErrorReport,
) -> Result<ErrorReport, MetricsError> {
    let rec_rows: HashMap<_, &ReportRow> = rec.rows.iter().map(|r| (r.key(), r)).collect();
    let scopes_in = |rep: &ErrorReport| {
        let mut s: Vec<Scope> = rep.rows.iter().map(|r| r.scope).collect();
        s.sort();
        s.dedup();
        s
    };
    let rec_scopes = scopes_in(rec);
    let spline_scopes = scopes_in(spline);
    for r in &rec.rows {
        if spline_scopes.contains(&r.scope)
            && !spline.rows.iter().any(|s| s.key() == r.key())
        {
            return Err(MetricsError::KeyMismatch(format!(
                "{} fold {} missing from {} report",
                r.id,
                r.fold.label(),
                spline.method
            )));
        }
    }

    let sub = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let mut out = spline.clone();
    for row in &mut out.rows {
        if !rec_scopes.contains(&row.scope) {
            continue;
        }
        let other = rec_rows.get(&row.key()).ok_or_else(|| {
            MetricsError::KeyMismatch(format!(
                "{} fold {} missing from {} report",
                row.id,
                row.fold.label(),
                rec.method
            ))
        })?;
        row.mae_diff = sub(row.mae, other.mae);
        row.rmse_diff = sub(row.rmse, other.rmse);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(column: &str, s: &str) -> Result<Option<f64>, MetricsError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| MetricsError::Parse {
        column: column.into(),
        value: s.into(),
    })
}

fn parse_num<T: std::str::FromStr>(column: &str, s: &str) -> Result<T, MetricsError> {
    s.parse::<T>().map_err(|_| MetricsError::Parse {
        column: column.into(),
        value: s.into(),
    })
}

pub const PER_TOP_HEADER: [&str; 10] = [
    "top_id",
    "fold",
    "n_train",
    "n_test",
    "mae_m",
    "rmse_m",
    "avg_mae_m",
    "avg_rmse_m",
    "mae_diff_m",
    "rmse_diff_m",
];

/// Writes the top-scope rows in full precision.
pub fn write_per_top<W: Write>(report: &ErrorReport, out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PER_TOP_HEADER)?;
    for r in report.rows_of(Scope::Top) {
        w.write_record([
            r.id.clone(),
            r.fold.label(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            fmt_opt(r.mae),
            fmt_opt(r.rmse),
            fmt_opt(r.avg_mae),
            fmt_opt(r.avg_rmse),
            fmt_opt(r.mae_diff),
            fmt_opt(r.rmse_diff),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_per_top<R: Read>(method: &str, input: R) -> Result<ErrorReport, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != PER_TOP_HEADER {
        return Err(MetricsError::KeyMismatch(format!(
            "unexpected per-top header {:?}",
            headers
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        rows.push(ReportRow {
            scope: Scope::Top,
            id: f(0).to_string(),
            fold: FoldKey::parse(f(1))?,
            n_train: parse_num("n_train", f(2))?,
            n_test: parse_num("n_test", f(3))?,
            mae: parse_opt("mae_m", f(4))?,
            rmse: parse_opt("rmse_m", f(5))?,
            avg_mae: parse_opt("avg_mae_m", f(6))?,
            avg_rmse: parse_opt("avg_rmse_m", f(7))?,
            mae_diff: parse_opt("mae_diff_m", f(8))?,
            rmse_diff: parse_opt("rmse_diff_m", f(9))?,
        });
    }
    Ok(ErrorReport {
        method: method.to_string(),
        rows,
    })
}

/// `method,fold,mae_m,rmse_m` with one row per fold and an `average` row.
pub fn write_fold_summary<W: Write>(report: &ErrorReport, out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "fold", "mae_m", "rmse_m"])?;
    for r in report.rows_of(Scope::FoldSummary) {
        w.write_record([
            report.method.clone(),
            r.fold.label(),
            fmt_opt(r.mae),
            fmt_opt(r.rmse),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Fold summary entries as `(method, fold, mae, rmse)`.
pub type FoldSummaryEntry = (String, FoldKey, Option<f64>, Option<f64>);

pub fn read_fold_summary<R: Read>(input: R) -> Result<Vec<FoldSummaryEntry>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        out.push((
            f(0).to_string(),
            FoldKey::parse(f(1))?,
            parse_opt("mae_m", f(2))?,
            parse_opt("rmse_m", f(3))?,
        ));
    }
    Ok(out)
}

pub fn write_error_map<W: Write>(rows: &[ErrorMapRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["well_id", "x_m", "y_m", "n_picks", "mae_m", "rmse_m"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_error_map<R: Read>(input: R) -> Result<Vec<ErrorMapRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Test error of one train-fraction sweep run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub restart: usize,
    pub mae_m: f64,
    pub rmse_m: f64,
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["fraction", "restart", "mae_m", "rmse_m"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Human-readable fold table at one decimal place.
pub fn render_fold_table(report: &ErrorReport) -> String {
    let mut s = format!("{:<10} {:>8} {:>8}\n", report.method, "MAE", "RMSE");
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
    for r in report.rows_of(Scope::FoldSummary) {
        let label = match r.fold {
            FoldKey::Fold(f) => format!("Fold {}", f + 1),
            FoldKey::Average => "Average".into(),
        };
        s.push_str(&format!("{:<10} {:>8} {:>8}\n", label, cell(r.mae), cell(r.rmse)));
    }
    s
}
