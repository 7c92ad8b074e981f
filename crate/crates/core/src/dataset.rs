//! Ingestion of well headers and formation-top picks, depth normalization,
//! and the immutable sparse well × top depth matrix.
//!
//! Depths go MD → TVD (below ground) → TVDSS (relative to sea level), and are
//! then shifted by the dataset-wide TVDSS minimum so every stored depth is
//! non-negative.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;
use thiserror::Error;

pub const WELL_COLUMNS: [&str; 5] = ["well_id", "datum_elev_m", "ground_elev_m", "x_m", "y_m"];
pub const PICK_COLUMNS: [&str; 3] = ["well_id", "top_id", "md_m"];

/// Datum may sit at most this far below ground before a header is flagged.
const DATUM_BELOW_GROUND_TOLERANCE: f64 = 50.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: malformed CSV: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file} line {line}: column `{column}` has non-finite or unparsable value `{value}`")]
    NonFiniteValue {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{file} line {line}: measured depth {md} is negative")]
    NegativeDepth { file: String, line: u64, md: f64 },
    #[error("{file} line {line}: empty `{column}`")]
    EmptyId {
        file: String,
        line: u64,
        column: String,
    },
    #[error("wells file line {line}: duplicate well `{well_id}`")]
    DuplicateWell { well_id: String, line: u64 },
    #[error("picks file line {line}: unknown well `{well_id}`")]
    UnknownWell { well_id: String, line: u64 },
    #[error("picks file line {line}: duplicate pick ({well_id}, {top_id})")]
    DuplicatePick {
        well_id: String,
        top_id: String,
        line: u64,
    },
    #[error("dataset contains no picks")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellHeader {
    pub well_id: String,
    /// Kelly bushing or drill-floor elevation.
    pub datum_elev: f64,
    pub ground_elev: f64,
    pub x: f64,
    pub y: f64,
}

/// One validated row of the picks file. `md` is `None` when the row only
/// registers a top (empty `md_m` field) without picking it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPick {
    pub well_id: String,
    pub top_id: String,
    pub md: Option<f64>,
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTables {
    pub wells: Vec<WellHeader>,
    pub picks: Vec<RawPick>,
    pub warnings: Vec<String>,
}

/// True vertical depth below ground; `datum_elev - ground_elev` is the datum
/// height above ground.
pub fn to_tvd(md: f64, datum_elev: f64, ground_elev: f64) -> f64 {
    md - (datum_elev - ground_elev)
}

pub fn to_tvdss(tvd: f64, ground_elev: f64) -> f64 {
    tvd - ground_elev
}

pub fn ingest(wells_csv: &Path, picks_csv: &Path) -> Result<RawTables, DatasetError> {
    let open = |p: &Path| {
        File::open(p).map_err(|source| DatasetError::Io {
            file: p.display().to_string(),
            source,
        })
    };
    ingest_readers(
        open(wells_csv)?,
        &wells_csv.display().to_string(),
        open(picks_csv)?,
        &picks_csv.display().to_string(),
    )
}

pub fn ingest_readers<W: Read, P: Read>(
    wells: W,
    wells_name: &str,
    picks: P,
    picks_name: &str,
) -> Result<RawTables, DatasetError> {
    let mut tables = RawTables::default();

    let (mut rdr, cols) = open_csv(wells, wells_name, &WELL_COLUMNS, &mut tables.warnings)?;
    let mut seen: HashMap<String, ()> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| csv_err(wells_name, source))?;
        let line = record_line(&rec);
        let well_id = id_field(&rec, cols[0], WELL_COLUMNS[0], wells_name, line)?;
        let num = |k: usize| number_field(&rec, cols[k], WELL_COLUMNS[k], wells_name, line);
        let header = WellHeader {
            datum_elev: num(1)?,
            ground_elev: num(2)?,
            x: num(3)?,
            y: num(4)?,
            well_id,
        };
        if seen.insert(header.well_id.clone(), ()).is_some() {
            return Err(DatasetError::DuplicateWell {
                well_id: header.well_id,
                line,
            });
        }
        if header.datum_elev < header.ground_elev - DATUM_BELOW_GROUND_TOLERANCE {
            let msg = format!(
                "well {}: datum elevation {} is more than {} m below ground elevation {}",
                header.well_id, header.datum_elev, DATUM_BELOW_GROUND_TOLERANCE, header.ground_elev
            );
            warn!("{msg}");
            tables.warnings.push(msg);
        }
        tables.wells.push(header);
    }

    let (mut rdr, cols) = open_csv(picks, picks_name, &PICK_COLUMNS, &mut tables.warnings)?;
    let mut pairs: HashMap<(String, String), ()> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| csv_err(picks_name, source))?;
        let line = record_line(&rec);
        let well_id = id_field(&rec, cols[0], PICK_COLUMNS[0], picks_name, line)?;
        let top_id = id_field(&rec, cols[1], PICK_COLUMNS[1], picks_name, line)?;
        if !seen.contains_key(&well_id) {
            return Err(DatasetError::UnknownWell { well_id, line });
        }
        let raw_md = rec.get(cols[2]).unwrap_or("").trim();
        let md = if raw_md.is_empty() {
            None
        } else {
            let md = number_field(&rec, cols[2], PICK_COLUMNS[2], picks_name, line)?;
            if md < 0.0 {
                return Err(DatasetError::NegativeDepth {
                    file: picks_name.to_string(),
                    line,
                    md,
                });
            }
            Some(md)
        };
        if pairs
            .insert((well_id.clone(), top_id.clone()), ())
            .is_some()
        {
            return Err(DatasetError::DuplicatePick {
                well_id,
                top_id,
                line,
            });
        }
        tables.picks.push(RawPick {
            well_id,
            top_id,
            md,
            line,
        });
    }
    Ok(tables)
}

fn csv_err(file: &str, source: csv::Error) -> DatasetError {
    DatasetError::Csv {
        file: file.to_string(),
        source,
    }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn open_csv<R: Read>(
    input: R,
    name: &str,
    required: &[&str],
    warnings: &mut Vec<String>,
) -> Result<(csv::Reader<R>, Vec<usize>), DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers().map_err(|e| csv_err(name, e))?.clone();
    let mut cols = Vec::with_capacity(required.len());
    for col in required {
        match headers.iter().position(|h| h == *col) {
            Some(idx) => cols.push(idx),
            None => {
                return Err(DatasetError::MissingColumn {
                    file: name.to_string(),
                    column: col.to_string(),
                })
            }
        }
    }
    for h in headers.iter().filter(|h| !required.contains(h)) {
        let msg = format!("{name}: ignoring extra column `{h}`");
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok((rdr, cols))
}

fn id_field(
    rec: &csv::StringRecord,
    idx: usize,
    column: &str,
    file: &str,
    line: u64,
) -> Result<String, DatasetError> {
    match rec.get(idx).map(str::trim) {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => Err(DatasetError::EmptyId {
            file: file.to_string(),
            line,
            column: column.to_string(),
        }),
    }
}

fn number_field(
    rec: &csv::StringRecord,
    idx: usize,
    column: &str,
    file: &str,
    line: u64,
) -> Result<f64, DatasetError> {
    let raw = rec.get(idx).unwrap_or("").trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DatasetError::NonFiniteValue {
            file: file.to_string(),
            line,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// An observed entry of the depth matrix, in normalized meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub well: usize,
    pub top: usize,
    pub depth: f64,
}

/// Immutable sparse well × top matrix of normalized depths.
#[derive(Debug, Clone, PartialEq)]
pub struct TopsDataset {
    wells: Vec<WellHeader>,
    tops: Vec<String>,
    picks: Vec<Pick>,
    tvdss: Vec<f64>,
    tvdss_min: f64,
    well_index: HashMap<String, usize>,
    top_index: HashMap<String, usize>,
    cell_index: HashMap<(usize, usize), usize>,
    warnings: Vec<String>,
}

impl TopsDataset {
    /// Normalizes picks with the dataset-wide TVDSS minimum.
    pub fn build(tables: RawTables) -> Result<Self, DatasetError> {
        let RawTables {
            wells,
            picks: raw,
            warnings,
        } = tables;
        let well_index: HashMap<String, usize> = wells
            .iter()
            .enumerate()
            .map(|(u, w)| (w.well_id.clone(), u))
            .collect();

        let mut tops = Vec::new();
        let mut top_index = HashMap::new();
        let mut cells = Vec::new();
        for rp in &raw {
            let u = *well_index
                .get(&rp.well_id)
                .ok_or_else(|| DatasetError::UnknownWell {
                    well_id: rp.well_id.clone(),
                    line: rp.line,
                })?;
            let i = *top_index.entry(rp.top_id.clone()).or_insert_with(|| {
                tops.push(rp.top_id.clone());
                tops.len() - 1
            });
            if let Some(md) = rp.md {
                let w = &wells[u];
                let tvdss = to_tvdss(to_tvd(md, w.datum_elev, w.ground_elev), w.ground_elev);
                cells.push((u, i, tvdss, rp));
            }
        }
        if cells.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let tvdss_min = cells
            .iter()
            .map(|c| c.2)
            .fold(f64::INFINITY, f64::min);

        let mut picks = Vec::with_capacity(cells.len());
        let mut tvdss = Vec::with_capacity(cells.len());
        let mut cell_index = HashMap::with_capacity(cells.len());
        for (u, i, t, rp) in cells {
            if cell_index.insert((u, i), picks.len()).is_some() {
                return Err(DatasetError::DuplicatePick {
                    well_id: rp.well_id.clone(),
                    top_id: rp.top_id.clone(),
                    line: rp.line,
                });
            }
            picks.push(Pick {
                well: u,
                top: i,
                depth: t - tvdss_min,
            });
            tvdss.push(t);
        }

        Ok(Self {
            wells,
            tops,
            picks,
            tvdss,
            tvdss_min,
            well_index,
            top_index,
            cell_index,
            warnings,
        })
    }

    pub fn load(wells_csv: &Path, picks_csv: &Path) -> Result<Self, DatasetError> {
        Self::build(ingest(wells_csv, picks_csv)?)
    }

    pub fn wells(&self) -> &[WellHeader] {
        &self.wells
    }

    pub fn tops(&self) -> &[String] {
        &self.tops
    }

    pub fn picks(&self) -> &[Pick] {
        &self.picks
    }

    pub fn n_wells(&self) -> usize {
        self.wells.len()
    }

    pub fn n_tops(&self) -> usize {
        self.tops.len()
    }

    pub fn n_picks(&self) -> usize {
        self.picks.len()
    }

    pub fn tvdss_min(&self) -> f64 {
        self.tvdss_min
    }

    /// Non-fatal ingestion flags (extra columns, suspicious datum elevations).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn normalize(&self, tvdss: f64) -> f64 {
        tvdss - self.tvdss_min
    }

    pub fn denormalize(&self, depth: f64) -> f64 {
        depth + self.tvdss_min
    }

    /// TVDSS of pick `k` exactly as computed from MD, before the min-shift.
    pub fn pick_tvdss(&self, k: usize) -> f64 {
        self.tvdss[k]
    }

    pub fn well_index(&self, well_id: &str) -> Option<usize> {
        self.well_index.get(well_id).copied()
    }

    pub fn top_index(&self, top_id: &str) -> Option<usize> {
        self.top_index.get(top_id).copied()
    }

    /// Index of the pick at (well, top), if observed.
    pub fn pick_at(&self, well: usize, top: usize) -> Option<usize> {
        self.cell_index.get(&(well, top)).copied()
    }

    pub fn top_pick_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.tops.len()];
        for p in &self.picks {
            counts[p.top] += 1;
        }
        counts
    }

    pub fn well_pick_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.wells.len()];
        for p in &self.picks {
            counts[p.well] += 1;
        }
        counts
    }

    /// Tops registered in the picks file that carry no depth at all.
    pub fn unconstrained_tops(&self) -> Vec<usize> {
        self.top_pick_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables(wells: &str, picks: &str) -> Result<RawTables, DatasetError> {
        ingest_readers(wells.as_bytes(), "wells.csv", picks.as_bytes(), "picks.csv")
    }

    const WELLS: &str = "well_id,datum_elev_m,ground_elev_m,x_m,y_m\n\
                         W1,1510,1500,0,0\n\
                         W2,1500,1500,100,50\n";

    #[test]
    fn tvd_examples() {
        assert_eq!(to_tvd(1000.0, 1510.0, 1500.0), 990.0);
        assert_eq!(to_tvd(0.0, 1500.0, 1500.0), 0.0);
        assert_eq!(to_tvd(500.0, 1498.0, 1500.0), 502.0);
    }

    #[test]
    fn tvdss_examples() {
        assert_eq!(to_tvdss(990.0, 1500.0), -510.0);
        assert_eq!(to_tvdss(1500.0, 1500.0), 0.0);
        assert_eq!(to_tvdss(2000.0, 300.0), 1700.0);
    }

    #[test]
    fn parses_small_files() {
        let t = tables(
            WELLS,
            "well_id,top_id,md_m\nW1,SSXS,1000\nW1,Niobrara,1200\nW2,SSXS,1010\n",
        )
        .unwrap();
        assert_eq!(t.wells.len(), 2);
        assert_eq!(t.picks.len(), 3);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn unknown_well_names_row() {
        let err = tables(
            WELLS,
            "well_id,top_id,md_m\nW1,A,1\nW2,A,2\nW9,A,3\n",
        )
        .unwrap_err();
        match err {
            DatasetError::UnknownWell { well_id, line } => {
                assert_eq!(well_id, "W9");
                assert_eq!(line, 4);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_pick_rejected() {
        let err = tables(WELLS, "well_id,top_id,md_m\nW1,SSXS,1\nW1,SSXS,2\n").unwrap_err();
        assert!(matches!(err, DatasetError::DuplicatePick { line: 3, .. }));
    }

    #[test]
    fn missing_column_and_bad_numbers() {
        let err = tables(WELLS, "well_id,md_m\nW1,1\n").unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn { ref column, .. } if column == "top_id"));

        let err = tables(WELLS, "well_id,top_id,md_m\nW1,A,NaN\n").unwrap_err();
        assert!(matches!(err, DatasetError::NonFiniteValue { line: 2, .. }));

        let err = tables(WELLS, "well_id,top_id,md_m\nW1,A,-3\n").unwrap_err();
        assert!(matches!(err, DatasetError::NegativeDepth { .. }));

        let err = tables(
            "well_id,datum_elev_m,ground_elev_m,x_m,y_m\nW1,1,1,inf,0\n",
            "well_id,top_id,md_m\n",
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::NonFiniteValue { ref column, .. } if column == "x_m"));
    }

    #[test]
    fn duplicate_well_rejected() {
        let err = tables(
            "well_id,datum_elev_m,ground_elev_m,x_m,y_m\nW1,1,1,0,0\nW1,1,1,0,0\n",
            "well_id,top_id,md_m\n",
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateWell { line: 3, .. }));
    }

    #[test]
    fn extra_columns_and_low_datum_warn() {
        let t = tables(
            "well_id,datum_elev_m,ground_elev_m,x_m,y_m,operator\nW1,1400,1500,0,0,acme\n",
            "well_id,top_id,md_m,interp\nW1,A,5,jp\n",
        )
        .unwrap();
        assert_eq!(t.warnings.len(), 3);
    }

    fn build(wells: &str, picks: &str) -> TopsDataset {
        TopsDataset::build(tables(wells, picks).unwrap()).unwrap()
    }

    #[test]
    fn min_shift_example() {
        // TVDSS: W1 -> 1000 - 10 - 1500 = -510; W2 -> 1500 - 0 - 1500 = 0;
        // W3 -> 2000 - 0 - 300 = 1700.
        let ds = build(
            "well_id,datum_elev_m,ground_elev_m,x_m,y_m\nW1,1510,1500,0,0\nW2,1500,1500,1,0\nW3,300,300,0,1\n",
            "well_id,top_id,md_m\nW1,A,1000\nW2,A,1500\nW3,B,2000\n",
        );
        assert_eq!(ds.tvdss_min(), -510.0);
        let stored: Vec<f64> = ds.picks().iter().map(|p| p.depth).collect();
        assert_eq!(stored, vec![0.0, 510.0, 2210.0]);
        assert_eq!(ds.denormalize(0.0), -510.0);
        for (k, p) in ds.picks().iter().enumerate() {
            assert!((ds.denormalize(p.depth) - ds.pick_tvdss(k)).abs() <= 1e-9);
        }
    }

    #[test]
    fn singleton_dataset() {
        let ds = build(
            "well_id,datum_elev_m,ground_elev_m,x_m,y_m\nW1,0,0,0,0\n",
            "well_id,top_id,md_m\nW1,A,42\n",
        );
        assert_eq!(ds.picks()[0].depth, 0.0);
        assert_eq!(ds.tvdss_min(), 42.0);
    }

    #[test]
    fn denormalize_identity_when_min_is_zero() {
        let ds = build(
            "well_id,datum_elev_m,ground_elev_m,x_m,y_m\nW1,0,0,0,0\nW2,0,0,1,1\n",
            "well_id,top_id,md_m\nW1,A,0\nW2,A,100\n",
        );
        assert_eq!(ds.denormalize(100.0), 100.0);
    }

    #[test]
    fn empty_dataset_rejected() {
        let t = tables(WELLS, "well_id,top_id,md_m\nW1,e10,\n").unwrap();
        assert!(matches!(
            TopsDataset::build(t),
            Err(DatasetError::EmptyDataset)
        ));
    }

    #[test]
    fn registries_follow_first_appearance_and_flag_unconstrained() {
        let ds = build(
            WELLS,
            "well_id,top_id,md_m\nW2,B,10\nW1,e10,\nW1,A,20\nW1,B,30\n",
        );
        assert_eq!(ds.tops(), &["B".to_string(), "e10".into(), "A".into()]);
        assert_eq!(ds.unconstrained_tops(), vec![1]);
        assert_eq!(ds.top_pick_counts(), vec![2, 0, 1]);
        assert_eq!(ds.well_pick_counts(), vec![2, 1]);
        assert_eq!(ds.pick_at(0, 2), Some(1));
        assert_eq!(ds.pick_at(1, 2), None);
        assert_eq!(ds.well_index("W2"), Some(1));
        assert_eq!(ds.top_index("A"), Some(2));
    }
}
