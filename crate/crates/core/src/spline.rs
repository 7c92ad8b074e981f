//! Biharmonic Green's-function spline, the per-top interpolation baseline.
//!
//! The surface is a sum of point forces `w_j · g(‖x − s_j‖)` with
//! `g(r) = r²(ln r − 1)`, plus a low-order trend: a constant for one or two
//! sources (or collinear sources), a plane otherwise. The weights are
//! constrained orthogonal to the trend, which keeps the bordered system
//! well-posed for a single source and makes the damped fit a proper ridge
//! problem on the space where the kernel is positive definite.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::TopsDataset;
use crate::metrics::{cv_report, ErrorReport, Prediction};
use crate::validation::FoldPlan;

pub const DEFAULT_DAMPING: f64 = 1e-10;

/// Relative tolerance for treating two depths at one location as equal.
const SAME_DEPTH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("spline needs at least one point")]
    NoPoints,
    #[error("point ({x}, {y}) is not finite")]
    NonFinite { x: f64, y: f64 },
    #[error("damping must be finite and ≥ 0, got {0}")]
    InvalidDamping(f64),
    #[error("location ({x}, {y}) has conflicting depths {a} and {b}")]
    DuplicateLocation { x: f64, y: f64, a: f64, b: f64 },
    #[error("spline system is singular")]
    SingularSystem,
}

/// Biharmonic Green's function in 2-D, `r²(ln r − 1)`, with `g(0) = 0`.
pub fn greens_fn(r: f64) -> f64 {
    if r > 0.0 {
        r * r * (r.ln() - 1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineModel {
    pub top_id: String,
    /// Source locations in the original coordinate frame.
    pub sources: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    /// Trend coefficients on (1, x̃, ỹ) in the standardized frame; length 1 or 3.
    pub trend: Vec<f64>,
    pub damping: f64,
    center: (f64, f64),
    scale: f64,
}

impl SplineModel {
    fn standardize(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.center.0) / self.scale,
            (y - self.center.1) / self.scale,
        )
    }

    pub fn predict(&self, x: f64, y: f64) -> f64 {
        let (sx, sy) = self.standardize(x, y);
        let forces: f64 = self
            .sources
            .iter()
            .zip(&self.weights)
            .map(|(&(px, py), w)| {
                let (qx, qy) = self.standardize(px, py);
                w * greens_fn((sx - qx).hypot(sy - qy))
            })
            .sum();
        let trend = match self.trend.as_slice() {
            [c] => *c,
            [c, a, b] => c + a * sx + b * sy,
            _ => unreachable!("trend has 1 or 3 terms"),
        };
        forces + trend
    }
}

/// Merges exact-duplicate locations; equal depths collapse to one point,
/// differing depths are an error.
fn dedup_points(points: &[(f64, f64, f64)]) -> Result<Vec<(f64, f64, f64)>, SplineError> {
    let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(points.len());
    for &(x, y, d) in points {
        if !(x.is_finite() && y.is_finite() && d.is_finite()) {
            return Err(SplineError::NonFinite { x, y });
        }
        match out.iter().find(|p| p.0 == x && p.1 == y) {
            Some(&(_, _, prev)) => {
                if (prev - d).abs() > SAME_DEPTH_TOLERANCE * prev.abs().max(d.abs()).max(1.0) {
                    return Err(SplineError::DuplicateLocation { x, y, a: prev, b: d });
                }
            }
            None => out.push((x, y, d)),
        }
    }
    Ok(out)
}

/// Fits the spline through `(x, y, depth)` points by solving
/// `(G + damping·I) w + P c = d`, `Pᵀ w = 0`.
pub fn spline_fit(
    points: &[(f64, f64, f64)],
    damping: f64,
    top_id: &str,
) -> Result<SplineModel, SplineError> {
    if !(damping.is_finite() && damping >= 0.0) {
        return Err(SplineError::InvalidDamping(damping));
    }
    if points.is_empty() {
        return Err(SplineError::NoPoints);
    }
    let pts = dedup_points(points)?;
    let n = pts.len();

    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let var = pts
        .iter()
        .map(|p| (p.0 - cx).powi(2) + (p.1 - cy).powi(2))
        .sum::<f64>()
        / (2 * n) as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let std_pts: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| ((p.0 - cx) / scale, (p.1 - cy) / scale))
        .collect();

    let planar = n >= 3 && !collinear(&std_pts);
    let m = if planar { 3 } else { 1 };

    let size = n + m;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    for j in 0..n {
        for k in 0..j {
            let g = greens_fn(
                (std_pts[j].0 - std_pts[k].0).hypot(std_pts[j].1 - std_pts[k].1),
            );
            a[(j, k)] = g;
            a[(k, j)] = g;
        }
        a[(j, j)] = damping;
        let basis = [1.0, std_pts[j].0, std_pts[j].1];
        for t in 0..m {
            a[(j, n + t)] = basis[t];
            a[(n + t, j)] = basis[t];
        }
        rhs[j] = pts[j].2;
    }

    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let max_pivot = (0..size).map(|k| u[(k, k)].abs()).fold(0.0, f64::max);
    let min_pivot = (0..size).map(|k| u[(k, k)].abs()).fold(f64::INFINITY, f64::min);
    if !(max_pivot > 0.0) || min_pivot <= 1e-14 * max_pivot {
        return Err(SplineError::SingularSystem);
    }
    let sol = lu.solve(&rhs).ok_or(SplineError::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(SplineError::SingularSystem);
    }

    Ok(SplineModel {
        top_id: top_id.to_string(),
        sources: pts.iter().map(|p| (p.0, p.1)).collect(),
        weights: sol.rows(0, n).iter().copied().collect(),
        trend: sol.rows(n, m).iter().copied().collect(),
        damping,
        center: (cx, cy),
        scale,
    })
}

/// Whether standardized points fail to span a plane.
fn collinear(pts: &[(f64, f64)]) -> bool {
    // Smallest eigenvalue of the 2×2 scatter matrix, relative to its trace.
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        sxx += (p.0 - mx).powi(2);
        syy += (p.1 - my).powi(2);
        sxy += (p.0 - mx) * (p.1 - my);
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = ((tr * tr) / 4.0 - det).max(0.0).sqrt();
    let lo = tr / 2.0 - disc;
    !(lo > 1e-10 * tr)
}

/// Averages the depths of training points that share a location so that
/// co-located wells (e.g. sidetracks) do not abort a fold.
fn merge_coincident(points: Vec<(f64, f64, f64)>) -> Vec<(f64, f64, f64)> {
    let mut merged: Vec<(f64, f64, f64, usize)> = Vec::with_capacity(points.len());
    for (x, y, d) in points {
        match merged.iter_mut().find(|p| p.0 == x && p.1 == y) {
            Some(p) => {
                p.2 += d;
                p.3 += 1;
            }
            None => merged.push((x, y, d, 1)),
        }
    }
    merged
        .into_iter()
        .map(|(x, y, s, c)| (x, y, s / c as f64))
        .collect()
}

/// Per-fold, per-top spline predictions of validation picks in TVDSS.
/// Tops with no training pick in a fold produce no predictions there.
pub fn spline_cv_predictions(
    ds: &TopsDataset,
    plan: &FoldPlan,
    damping: f64,
) -> Result<Vec<Prediction>, SplineError> {
    let tasks: Vec<(usize, usize)> = (0..plan.n_folds)
        .flat_map(|fold| (0..ds.n_tops()).map(move |top| (fold, top)))
        .collect();
    let per_task: Vec<Result<Vec<Prediction>, SplineError>> = tasks
        .par_iter()
        .map(|&(fold, top)| predict_top_fold(ds, plan, damping, fold, top))
        .collect();
    let mut out = Vec::new();
    for r in per_task {
        out.extend(r?);
    }
    out.sort_by_key(|p| (p.fold, p.pick));
    Ok(out)
}

fn predict_top_fold(
    ds: &TopsDataset,
    plan: &FoldPlan,
    damping: f64,
    fold: usize,
    top: usize,
) -> Result<Vec<Prediction>, SplineError> {
    let wells = ds.wells();
    let mut train = Vec::new();
    let mut validate = Vec::new();
    for (k, p) in ds.picks().iter().enumerate().filter(|(_, p)| p.top == top) {
        if plan.fold_of(k) == Some(fold) {
            validate.push(k);
        } else {
            let w = &wells[p.well];
            train.push((w.x, w.y, ds.pick_tvdss(k)));
        }
    }
    if train.is_empty() || validate.is_empty() {
        return Ok(Vec::new());
    }
    let model = spline_fit(&merge_coincident(train), damping, &ds.tops()[top])?;
    Ok(validate
        .into_iter()
        .map(|k| {
            let w = &wells[ds.picks()[k].well];
            Prediction {
                pick: k,
                fold,
                predicted: model.predict(w.x, w.y),
                observed: ds.pick_tvdss(k),
            }
        })
        .collect())
}

/// Spline cross-validation under `plan`, reported like the recommender.
pub fn spline_cv(
    ds: &TopsDataset,
    plan: &FoldPlan,
    damping: f64,
) -> Result<ErrorReport, SplineError> {
    let preds = spline_cv_predictions(ds, plan, damping)?;
    Ok(cv_report("spline", ds, plan, &preds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn kernel_values() {
        assert_eq!(greens_fn(0.0), 0.0);
        assert_eq!(greens_fn(1.0), -1.0);
        assert!(greens_fn(E).abs() < 1e-12);
        // r² ln r dominates far away.
        let r = 1e6;
        assert!((greens_fn(r) / (r * r * r.ln()) - 1.0).abs() < 0.1);
    }

    #[test]
    fn single_point_is_exact_and_flat() {
        let m = spline_fit(&[(0.0, 0.0, 5.0)], 0.0, "A").unwrap();
        assert_eq!(m.predict(0.0, 0.0), 5.0);
        assert_eq!(m.weights, vec![0.0]);
        assert_eq!(m.predict(1e5, -3e4), 5.0);
    }

    #[test]
    fn four_points_interpolated() {
        let pts = [
            (0.0, 0.0, 10.0),
            (100.0, 0.0, 12.0),
            (0.0, 100.0, 7.0),
            (80.0, 90.0, 30.0),
        ];
        let m = spline_fit(&pts, 0.0, "A").unwrap();
        assert_eq!(m.trend.len(), 3);
        for (x, y, d) in pts {
            assert!((m.predict(x, y) - d).abs() <= 1e-6 * d.abs());
        }
    }

    #[test]
    fn symmetric_pair_midpoint_is_mean() {
        let m = spline_fit(&[(0.0, 0.0, 10.0), (200.0, 0.0, 20.0)], 0.0, "A").unwrap();
        assert!((m.predict(100.0, 0.0) - 15.0).abs() < 1e-9);
        assert!((m.predict(0.0, 0.0) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn duplicates() {
        let m = spline_fit(&[(1.0, 1.0, 3.0), (1.0, 1.0, 3.0), (2.0, 5.0, 4.0)], 0.0, "A")
            .unwrap();
        assert_eq!(m.sources.len(), 2);
        assert!(matches!(
            spline_fit(&[(1.0, 1.0, 3.0), (1.0, 1.0, 4.0)], 0.0, "A"),
            Err(SplineError::DuplicateLocation { .. })
        ));
        assert_eq!(spline_fit(&[], 0.0, "A"), Err(SplineError::NoPoints));
        assert_eq!(
            spline_fit(&[(0.0, 0.0, 1.0)], -1.0, "A"),
            Err(SplineError::InvalidDamping(-1.0))
        );
    }

    #[test]
    fn collinear_points_fall_back_to_constant_trend() {
        let pts = [(0.0, 0.0, 1.0), (1.0, 1.0, 2.0), (2.0, 2.0, 4.0), (3.0, 3.0, 3.0)];
        let m = spline_fit(&pts, 0.0, "A").unwrap();
        assert_eq!(m.trend.len(), 1);
        for (x, y, d) in pts {
            assert!((m.predict(x, y) - d).abs() < 1e-8);
        }
    }

    #[test]
    fn translation_invariance() {
        let pts = [
            (0.0, 0.0, 10.0),
            (100.0, 0.0, 12.0),
            (0.0, 100.0, 7.0),
            (80.0, 90.0, 30.0),
            (40.0, 20.0, 11.0),
        ];
        let shifted: Vec<_> = pts.iter().map(|p| (p.0 + 5e5, p.1 - 3e4, p.2)).collect();
        let a = spline_fit(&pts, 1e-3, "A").unwrap();
        let b = spline_fit(&shifted, 1e-3, "A").unwrap();
        for (x, y) in [(50.0, 50.0), (-20.0, 130.0)] {
            let pa = a.predict(x, y);
            let pb = b.predict(x + 5e5, y - 3e4);
            assert!((pa - pb).abs() < 1e-8 * pa.abs().max(1.0), "{pa} vs {pb}");
        }
    }
}
