//! Real-data pipeline: load a trivariate CSV, move the conditioning column to
//! unit-Pareto margins, fit per-coordinate norming functions above a
//! threshold, and test the fitted residuals for independence.

mod diagnostic;
mod fit;
pub mod simplex;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diagnostic::{residual_diagnostic, residuals, write_residuals_csv, Residuals};
pub use fit::{fit_dataset, fit_norming, objective, CoordinateFit, FittedNorming, MIN_EXCEEDANCES};

/// Clean rows required before a dataset can be fitted.
pub const MIN_FIT_ROWS: usize = 100;
pub const DEFAULT_THRESHOLD_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// Cleaned numeric data: a conditioning column and two response columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Conditioning column name followed by the two response column names.
    pub columns: [String; 3],
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub source: PathBuf,
    /// Rows dropped for missing, non-numeric or non-finite entries.
    pub dropped: usize,
}

impl Dataset {
    pub fn from_columns(columns: [String; 3], x0: Vec<f64>, x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        if x0.len() != x1.len() || x0.len() != x2.len() {
            return Err(Error::domain("dataset columns must have equal length"));
        }
        if x0.iter().chain(&x1).chain(&x2).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset values must be finite"));
        }
        Ok(Self { columns, x0, x1, x2, source: PathBuf::new(), dropped: 0 })
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    pub fn response(&self, i: crate::models::Coordinate) -> &[f64] {
        match i {
            crate::models::Coordinate::One => &self.x1,
            crate::models::Coordinate::Two => &self.x2,
        }
    }

    /// Rows whose Pareto-scale conditioning value exceeds `1/(1 - p_t)`.
    pub fn exceedances(&self, p_t: f64) -> Result<Exceedances> {
        if !(p_t > 0.0 && p_t < 1.0) {
            return Err(Error::domain(format!("threshold level must lie in (0, 1), got {p_t}")));
        }
        let pareto = to_pareto_margins(&self.x0)?;
        let threshold = 1.0 / (1.0 - p_t);
        let mut out = Exceedances { threshold, x0: Vec::new(), y1: Vec::new(), y2: Vec::new() };
        for (k, &x) in pareto.iter().enumerate() {
            if x > threshold {
                out.x0.push(x);
                out.y1.push(self.x1[k]);
                out.y2.push(self.x2[k]);
            }
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        crate::simulate::io::write_columns_csv(file, &header, &[&self.x0, &self.x1, &self.x2])
    }
}

/// Exceedance rows on the Pareto conditioning scale; responses stay raw.
#[derive(Debug, Clone, PartialEq)]
pub struct Exceedances {
    pub threshold: f64,
    pub x0: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl Exceedances {
    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }
}

/// Reads the three named columns, dropping rows where any of them is missing,
/// non-numeric or non-finite. Other columns are ignored.
pub fn load_csv(path: &Path, conditioning_column: &str, value_columns: [&str; 2], opts: &CsvOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut reader = csv::ReaderBuilder::new().delimiter(opts.delimiter).flexible(true).from_reader(file);
    let header = reader.headers()?.clone();
    let names = [conditioning_column, value_columns[0], value_columns[1]];
    let mut idx = [0usize; 3];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
    }

    let (mut x0, mut x1, mut x2) = (Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0;
    let parse = |rec: &csv::StringRecord, i: usize| -> Option<f64> {
        rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite())
    };
    for rec in reader.records() {
        let rec = rec?;
        match (parse(&rec, idx[0]), parse(&rec, idx[1]), parse(&rec, idx[2])) {
            (Some(a), Some(b), Some(c)) => {
                x0.push(a);
                x1.push(b);
                x2.push(c);
            }
            _ => dropped += 1,
        }
    }
    Ok(Dataset {
        columns: names.map(str::to_owned),
        x0,
        x1,
        x2,
        source: path.to_path_buf(),
        dropped,
    })
}

/// Rank transform to unit-Pareto margins: `u = rank/(n+1)` with average ranks
/// on ties, then `x = 1/(1 - u)`.
pub fn to_pareto_margins(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { what: "rank transform".into(), needed: 2, found: n });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("rank transform input contains NaN"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    if values[order[0]] == values[order[n - 1]] {
        return Err(Error::Degenerate("all values are tied".into()));
    }
    let np1 = (n + 1) as f64;
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1..=end share their average
        let rank = (start + 1 + end) as f64 / 2.0;
        let x = np1 / (np1 - rank);
        for &k in &order[start..end] {
            out[k] = x;
        }
        start = end;
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pareto_margins_simple() {
        let x = to_pareto_margins(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(x, vec![4.0 / 3.0, 2.0, 4.0]);
        let x = to_pareto_margins(&[30.0, 10.0, 20.0]).unwrap();
        assert_eq!(x, vec![4.0, 4.0 / 3.0, 2.0]);
    }

    #[test]
    fn pareto_margins_ties() {
        assert_eq!(to_pareto_margins(&[5.0, 5.0, 1.0]).unwrap()[0], 4.0 / (4.0 - 2.5));
        // (5, 5) alone is constant
        assert!(matches!(to_pareto_margins(&[5.0, 5.0]), Err(Error::Degenerate(_))));
        let x = to_pareto_margins(&[1.0, 5.0, 5.0, 9.0]).unwrap();
        assert_eq!(x[1], x[2]);
        assert_eq!(x[1], 2.0);
    }

    #[test]
    fn pareto_margins_rejects_short_input() {
        assert!(to_pareto_margins(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn pareto_margins_rank_invariant(v in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            prop_assume!(v.iter().any(|x| *x != v[0]));
            let a = to_pareto_margins(&v).unwrap();
            let e: Vec<f64> = v.iter().map(|x| x.exp()).collect();
            prop_assert_eq!(&a, &to_pareto_margins(&e).unwrap());
            prop_assert!(a.iter().all(|&x| x > 1.0));
        }
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn load_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x0,x1,x2\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(&p, "x0", ["x1", "x2"], &CsvOptions::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dropped, 0);
        assert_eq!(d.x2, vec![3.0, 6.0, 9.0]);
    }

    #[test]
    fn load_drops_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "other;c;v1;v2\nq;1;2;3\nq;4;oops;6\nq;7;8;9\n");
        let d = load_csv(&p, "c", ["v1", "v2"], &CsvOptions { delimiter: b';' }).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dropped, 1);
        assert_eq!(d.x0, vec![1.0, 7.0]);
    }

    #[test]
    fn load_reports_missing_column_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x0,x1,x2\n1,2,3\n");
        match load_csv(&p, "x0", ["x1", "nope"], &CsvOptions::default()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "nope"),
            other => panic!("{other:?}"),
        }
        let gone = dir.path().join("gone.csv");
        assert!(matches!(load_csv(&gone, "x0", ["x1", "x2"], &CsvOptions::default()), Err(Error::MissingFile(_))));
    }

    #[test]
    fn exceedances_use_pareto_threshold() {
        let x0: Vec<f64> = (0..99).map(f64::from).collect();
        let d = Dataset::from_columns(["a".into(), "b".into(), "c".into()], x0.clone(), x0.clone(), x0).unwrap();
        // ranks 1..99, x = 100/(100 - r) > 10 iff r > 90
        let e = d.exceedances(0.9).unwrap();
        assert_eq!(e.len(), 9);
        assert_eq!(e.y1[0], 90.0);
    }
}
