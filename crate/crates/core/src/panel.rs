//! Balanced region × period panels and their CSV form.

use std::path::Path;

use crate::error::{Error, Result};

/// Balanced `N × T` panel of log-scale responses and `K` regressors.
///
/// Storage is region-major: cell `(i, t)` is at `i * T + t`, and its regressor
/// row occupies `K` consecutive values starting at `(i * T + t) * K`.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelDataset {
    n_regions: usize,
    n_periods: usize,
    k_regressors: usize,
    y: Vec<f64>,
    x: Vec<f64>,
}

impl PanelDataset {
    pub fn new(
        n_regions: usize,
        n_periods: usize,
        k_regressors: usize,
        y: Vec<f64>,
        x: Vec<f64>,
    ) -> Result<Self> {
        if n_regions == 0 || n_periods == 0 || k_regressors == 0 {
            return Err(Error::invalid(format!(
                "panel dimensions must be positive (N={n_regions}, T={n_periods}, K={k_regressors})"
            )));
        }
        let cells = n_regions * n_periods;
        if y.len() != cells {
            return Err(Error::invalid(format!(
                "y has {} values, expected {cells}",
                y.len()
            )));
        }
        if x.len() != cells * k_regressors {
            return Err(Error::invalid(format!(
                "X has {} values, expected {}",
                x.len(),
                cells * k_regressors
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite response at region {}, period {}",
                pos / n_periods,
                pos % n_periods
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let cell = pos / k_regressors;
            return Err(Error::validation(format!(
                "non-finite regressor x{} at region {}, period {}",
                pos % k_regressors + 1,
                cell / n_periods,
                cell % n_periods
            )));
        }
        Ok(Self {
            n_regions,
            n_periods,
            k_regressors,
            y,
            x,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn k_regressors(&self) -> usize {
        self.k_regressors
    }

    pub fn n_cells(&self) -> usize {
        self.n_regions * self.n_periods
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Responses of region `i`, length T.
    pub fn y_region(&self, i: usize) -> &[f64] {
        &self.y[i * self.n_periods..(i + 1) * self.n_periods]
    }

    /// Regressor row of cell `(i, t)`, length K.
    pub fn x_row(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.n_periods + t) * self.k_regressors;
        &self.x[start..start + self.k_regressors]
    }

    /// Regressor block of region `i` as T consecutive rows.
    pub fn x_region(&self, i: usize) -> &[f64] {
        let k = self.k_regressors;
        &self.x[i * self.n_periods * k..(i + 1) * self.n_periods * k]
    }

    /// `Y_it = exp(y_it)`, the observed level-scale rate.
    pub fn y_level(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.exp()).collect()
    }

    /// Relabels regions so that old region `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_regions {
            return Err(Error::invalid(
                "permutation length differs from region count",
            ));
        }
        let t = self.n_periods;
        let k = self.k_regressors;
        let mut y = vec![0.0; self.y.len()];
        let mut x = vec![0.0; self.x.len()];
        for (old, &new) in perm.iter().enumerate() {
            y[new * t..(new + 1) * t].copy_from_slice(self.y_region(old));
            x[new * t * k..(new + 1) * t * k].copy_from_slice(self.x_region(old));
        }
        Self::new(self.n_regions, t, k, y, x)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    /// Parses `region,time,y,x1,...,xK` with 0-based region and time indices.
    pub fn from_reader<R: std::io::Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let fmt_err = |line: usize, message: String| Error::Format {
            path: origin.to_path_buf(),
            line,
            message,
        };
        if headers.len() < 4
            || &headers[0] != "region"
            || &headers[1] != "time"
            || &headers[2] != "y"
        {
            return Err(fmt_err(
                1,
                "expected header `region,time,y,x1,...,xK`".into(),
            ));
        }
        let k = headers.len() - 3;
        for (idx, h) in headers.iter().skip(3).enumerate() {
            if h != format!("x{}", idx + 1) {
                return Err(fmt_err(
                    1,
                    format!(
                        "regressor column {} should be `x{}`, got `{h}`",
                        idx + 1,
                        idx + 1
                    ),
                ));
            }
        }

        let mut rows: Vec<(usize, usize, f64, Vec<f64>, usize)> = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            if rec.len() != headers.len() {
                return Err(fmt_err(
                    line,
                    format!("expected {} fields, got {}", headers.len(), rec.len()),
                ));
            }
            let region: usize = rec[0]
                .parse()
                .map_err(|_| fmt_err(line, format!("bad region `{}`", &rec[0])))?;
            let time: usize = rec[1]
                .parse()
                .map_err(|_| fmt_err(line, format!("bad time `{}`", &rec[1])))?;
            let mut vals = Vec::with_capacity(k + 1);
            for f in rec.iter().skip(2) {
                vals.push(
                    f.parse::<f64>()
                        .map_err(|_| fmt_err(line, format!("bad number `{f}`")))?,
                );
            }
            let y = vals.remove(0);
            rows.push((region, time, y, vals, line));
        }
        if rows.is_empty() {
            return Err(Error::validation(format!(
                "{}: panel has no rows",
                origin.display()
            )));
        }
        let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let t = rows.iter().map(|r| r.1).max().unwrap() + 1;
        if rows.len() != n * t {
            return Err(Error::validation(format!(
                "{}: unbalanced panel, {} rows for {n} regions × {t} periods",
                origin.display(),
                rows.len()
            )));
        }
        let mut y = vec![f64::NAN; n * t];
        let mut x = vec![0.0; n * t * k];
        let mut filled = vec![false; n * t];
        for (region, time, yv, xv, line) in rows {
            let cell = region * t + time;
            if filled[cell] {
                return Err(fmt_err(
                    line,
                    format!("duplicate cell (region {region}, time {time})"),
                ));
            }
            filled[cell] = true;
            y[cell] = yv;
            x[cell * k..(cell + 1) * k].copy_from_slice(&xv);
        }
        Self::new(n, t, k, y, x)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["region".to_string(), "time".to_string(), "y".to_string()];
        header.extend((1..=self.k_regressors).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for i in 0..self.n_regions {
            for t in 0..self.n_periods {
                let mut rec = vec![
                    i.to_string(),
                    t.to_string(),
                    fmt_full(self.y[i * self.n_periods + t]),
                ];
                rec.extend(self.x_row(i, t).iter().map(|v| fmt_full(*v)));
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn fmt_full(v: f64) -> String {
    format!("{v:?}")
}
