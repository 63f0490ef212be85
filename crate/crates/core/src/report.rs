//! Check rows, probe reports and their CSV serialization.
//!
//! Numbers are written with Rust's shortest round-trip `f64` formatting, so output is
//! locale independent and byte-stable; `-∞` is spelled `-inf`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::dde::Trajectory;
use crate::error::Result;
use crate::scalar::Real;

/// One sample of one check: `lhs` is compared with `rhs`, `error` with `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub sample_id: usize,
    /// Human-readable description of the sampled input, used for witnesses.
    pub input: String,
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    /// A row that passes iff `error ≤ tolerance` (NaN fails).
    pub fn new(check: &str, sample_id: usize, input: String, lhs: f64, rhs: f64, error: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            sample_id,
            input,
            lhs,
            rhs,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }

    /// `lhs ≤ rhs + tolerance`, reporting the excess as the error.
    pub fn le(check: &str, sample_id: usize, input: String, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(check, sample_id, input, lhs, rhs, (lhs - rhs).max(0.0), tolerance)
    }

    /// A row for a step that could not be evaluated.
    pub fn failed(check: &str, sample_id: usize, reason: String) -> Self {
        Self {
            check: check.to_string(),
            sample_id,
            input: reason,
            lhs: f64::NAN,
            rhs: f64::NAN,
            error: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
        }
    }

    fn severity(&self) -> f64 {
        if self.error.is_nan() || self.tolerance.is_nan() {
            f64::INFINITY
        } else if self.tolerance > 0.0 {
            self.error / self.tolerance
        } else if self.error > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// A sampled witness `(input, lhs, rhs)` of a failing row.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub input: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// All rows of one probe. `max_violation` and `tolerance` come from the row with the
/// largest `error / tolerance`, so `pass ⇔ max_violation ≤ tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probe_name: String,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
    /// Diagnostic probes are reported but never fail a suite.
    pub diagnostic: bool,
    pub rows: Vec<CheckRow>,
}

impl ProbeReport {
    pub fn from_rows(name: &str, rows: Vec<CheckRow>) -> Self {
        let worst = rows
            .iter()
            .max_by(|a, b| a.severity().total_cmp(&b.severity()));
        let (max_violation, tolerance) = worst.map_or((0.0, 0.0), |r| (r.error, r.tolerance));
        let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
        let witnesses = rows
            .iter()
            .filter(|r| !r.pass)
            .take(5)
            .map(|r| Witness {
                input: r.input.clone(),
                lhs: r.lhs,
                rhs: r.rhs,
            })
            .collect();
        Self {
            probe_name: name.to_string(),
            samples: rows.len(),
            max_violation,
            tolerance,
            pass,
            witnesses,
            diagnostic: false,
            rows,
        }
    }

    pub fn single(row: CheckRow) -> Self {
        let name = row.check.clone();
        Self::from_rows(&name, vec![row])
    }

    pub fn diagnostic(mut self) -> Self {
        self.diagnostic = true;
        self
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.pass, self.diagnostic) {
            (true, _) => "pass",
            (false, true) => "note",
            (false, false) => "FAIL",
        };
        write!(
            f,
            "{status} {:<40} samples={:<5} max_violation={:e} tolerance={:e}",
            self.probe_name, self.samples, self.max_violation, self.tolerance
        )?;
        for w in &self.witnesses {
            write!(f, "\n     witness: {} (lhs {}, rhs {})", w.input, w.lhs, w.rhs)?;
        }
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

/// Rows of every report, with columns `check_name,sample_id,lhs,rhs,error,tolerance,pass`.
pub fn write_rows<W: Write>(out: W, reports: &[ProbeReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check_name", "sample_id", "lhs", "rhs", "error", "tolerance", "pass"])?;
    for r in reports.iter().flat_map(|p| &p.rows) {
        w.write_record([
            r.check.clone(),
            r.sample_id.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.error),
            fmt_f64(r.tolerance),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per probe: `probe_name,samples,max_violation,tolerance,pass,diagnostic`.
pub fn write_summary<W: Write>(out: W, reports: &[ProbeReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["probe_name", "samples", "max_violation", "tolerance", "pass", "diagnostic"])?;
    for p in reports {
        w.write_record([
            p.probe_name.clone(),
            p.samples.to_string(),
            fmt_f64(p.max_violation),
            fmt_f64(p.tolerance),
            p.pass.to_string(),
            p.diagnostic.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory export: `time,x,c,admissible` in time order, history rows included.
pub fn write_trajectory<T: Real, W: Write>(out: W, traj: &Trajectory<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "x", "c", "admissible"])?;
    for ((t, x), c) in traj.times.iter().zip(&traj.x).zip(&traj.c) {
        let admissible = traj.admissible_until.map_or(true, |u| *t < u);
        w.write_record([
            fmt_f64(t.as_f64()),
            fmt_f64(x.as_f64()),
            fmt_f64(c.as_f64()),
            u8::from(admissible).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_summarizes_worst_row() {
        let rows = vec![
            CheckRow::new("c", 0, "a".into(), 1.0, 1.0, 0.1, 1.0),
            CheckRow::new("c", 1, "b".into(), 1.0, 3.0, 0.5, 0.1),
        ];
        let r = ProbeReport::from_rows("c", rows);
        assert!(!r.pass);
        assert_eq!(r.max_violation, 0.5);
        assert_eq!(r.tolerance, 0.1);
        assert_eq!(r.witnesses.len(), 1);
        assert_eq!(r.witnesses[0].input, "b");
    }

    #[test]
    fn csv_spells_infinities() {
        let row = CheckRow::le("v", 0, String::new(), f64::NEG_INFINITY, 1.0, 0.0);
        let mut buf = Vec::new();
        write_rows(&mut buf, &[ProbeReport::single(row)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("check_name,sample_id,lhs,rhs,error,tolerance,pass\n"));
        assert!(s.contains("v,0,-inf,1,0,0,true"));
    }

    #[test]
    fn nan_rows_fail() {
        assert!(!CheckRow::new("n", 0, String::new(), 0.0, 0.0, f64::NAN, 1.0).pass);
        assert!(!ProbeReport::from_rows("empty", Vec::new()).pass);
    }
}
