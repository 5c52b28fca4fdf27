//! Verification records, written as CSV.

use serde::Serialize;

use crate::laurent::{re, C64};

/// One checked quantity.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub check: String,
    pub indices: String,
    pub value_re: f64,
    pub value_im: f64,
    pub reference_re: f64,
    pub reference_im: f64,
    pub abs_err: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub records: Vec<Record>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    /// `|value − reference| ≤ tol`.
    pub fn compare(&mut self, check: &str, indices: impl Into<String>, value: C64, reference: C64, tol: f64) -> bool {
        let abs_err = (value - reference).norm();
        let pass = abs_err <= tol;
        self.records.push(Record {
            check: check.to_string(),
            indices: indices.into(),
            value_re: value.re,
            value_im: value.im,
            reference_re: reference.re,
            reference_im: reference.im,
            abs_err,
            tol,
            pass,
        });
        pass
    }

    /// A residual that should vanish.
    pub fn residual(&mut self, check: &str, indices: impl Into<String>, residual: f64, tol: f64) -> bool {
        self.compare(check, indices, re(residual), re(0.0), tol)
    }

    /// A check decided elsewhere; the value is recorded as is.
    pub fn verdict(&mut self, check: &str, indices: impl Into<String>, value: f64, pass: bool) -> bool {
        self.records.push(Record {
            check: check.to_string(),
            indices: indices.into(),
            value_re: value,
            value_im: 0.0,
            reference_re: f64::NAN,
            reference_im: f64::NAN,
            abs_err: f64::NAN,
            tol: f64::NAN,
            pass,
        });
        pass
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Per check name, in first-seen order: `(name, count, worst abs_err, all passed)`.
    pub fn summary(&self) -> Vec<(String, usize, f64, bool)> {
        let mut out: Vec<(String, usize, f64, bool)> = Vec::new();
        for r in &self.records {
            let err = if r.abs_err.is_nan() { 0.0 } else { r.abs_err };
            match out.iter_mut().find(|s| s.0 == r.check) {
                Some(s) => {
                    s.1 += 1;
                    s.2 = s.2.max(err);
                    s.3 &= r.pass;
                }
                None => out.push((r.check.clone(), 1, err, r.pass)),
            }
        }
        out
    }

    /// Worst error and overall verdict of one check.
    pub fn check(&self, name: &str) -> Option<(f64, bool)> {
        self.summary().into_iter().find(|s| s.0 == name).map(|s| (s.2, s.3))
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let mut r = Report::new();
        r.compare("x", "t^1", C64::new(0.1 + 0.2, -1.0 / 3.0), re(0.3), 1e-12);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        let row: Vec<String> = rd.records().next().unwrap().unwrap().iter().map(String::from).collect();
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(row[3].parse::<f64>().unwrap(), -1.0 / 3.0);
        assert!(!r.passed());
    }
}
