//! Length calibration: find fibre ends in field traces, compare them with the
//! design, and keep the calibrated lengths in a flat database file.
//!
//! Database format (version 1): UTF-8, LF line endings, an optional
//! `# otdr-split calibration v1` header, then one record per line:
//!
//! ```text
//! code<TAB>branch<TAB>length_km<TAB>YYYY-MM-DD
//! ```
//!
//! Lengths are written with four decimals. Lines starting with `#` are
//! comments. When a `(code, branch)` pair appears more than once, the record
//! with the latest date wins; equal dates resolve to the later line.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::model::Trace;

pub const DATABASE_HEADER: &str = "# otdr-split calibration v1";

/// Lengths are stored in units of 1e-4 km.
const LENGTH_SCALE: f64 = 1e4;

fn to_ticks(km: f64) -> i64 {
    (km * LENGTH_SCALE).round() as i64
}

fn from_ticks(ticks: i64) -> f64 {
    ticks as f64 / LENGTH_SCALE
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub code: String,
    pub branch: u32,
    pub length_km: f64,
    pub date: NaiveDate,
}

impl CalibrationRecord {
    pub fn new(code: impl Into<String>, branch: u32, length_km: f64, date: NaiveDate) -> Result<Self> {
        let code = code.into();
        if code.is_empty() || code.contains(['\t', '\n', '\r']) {
            return Err(Error::Calibration(format!("invalid record code {code:?}")));
        }
        if !(length_km.is_finite() && length_km > 0.0) {
            return Err(Error::Calibration(format!(
                "{code}: length must be positive, got {length_km} km"
            )));
        }
        Ok(CalibrationRecord {
            code,
            branch,
            length_km: from_ticks(to_ticks(length_km)),
            date,
        })
    }

    fn to_line(&self) -> String {
        format!(
            "{}\t{:02}\t{:.4}\t{}\n",
            self.code,
            self.branch,
            self.length_km,
            self.date.format("%Y-%m-%d")
        )
    }

    fn from_line(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [code, branch, length, date] = fields[..] else {
            return Err(Error::format(
                line_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        };
        let branch = branch
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid branch {branch:?}")))?;
        let length = length
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid length {length:?}")))?;
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|_| Error::format(line_no, format!("invalid date {date:?}")))?;
        CalibrationRecord::new(code, branch, length, date).map_err(|e| Error::format(line_no, e.to_string()))
    }
}

/// Measured-versus-design length of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDiff {
    pub code: String,
    pub measured_km: f64,
    pub design_km: f64,
    /// `measured - design` on the 4-decimal grid.
    pub diff_km: f64,
}

impl CalibrationDiff {
    pub fn is_zero(&self) -> bool {
        to_ticks(self.diff_km) == 0
    }
}

pub fn compare(field: &CalibrationRecord, design: &CalibrationRecord) -> Result<CalibrationDiff> {
    if field.code != design.code || field.branch != design.branch {
        return Err(Error::Calibration(format!(
            "cannot compare {}/{:02} with {}/{:02}",
            field.code, field.branch, design.code, design.branch
        )));
    }
    let ticks = to_ticks(field.length_km) - to_ticks(design.length_km);
    Ok(CalibrationDiff {
        code: field.code.clone(),
        measured_km: field.length_km,
        design_km: design.length_km,
        diff_km: from_ticks(ticks),
    })
}

/// Appends records to the database, writing the header into a new file.
pub fn store(records: &[CalibrationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    if fresh {
        out.push_str(DATABASE_HEADER);
        out.push('\n');
    }
    for r in records {
        out.push_str(&r.to_line());
    }
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<CalibrationRecord>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text =
        std::str::from_utf8(&bytes).map_err(|e| Error::format(1, format!("database is not UTF-8: {e}")))?;
    parse_database(text)
}

pub fn parse_database(text: &str) -> Result<Vec<CalibrationRecord>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let mut records: Vec<CalibrationRecord> = Vec::new();
    let mut slot: HashMap<(String, u32), usize> = HashMap::new();
    for (i, line) in body.split('\n').enumerate() {
        if line.starts_with('#') {
            continue;
        }
        let record = CalibrationRecord::from_line(line, i + 1)?;
        let key = (record.code.clone(), record.branch);
        match slot.get(&key) {
            Some(&at) => {
                if record.date >= records[at].date {
                    records[at] = record;
                }
            }
            None => {
                slot.insert(key, records.len());
                records.push(record);
            }
        }
    }
    Ok(records)
}

/// Fibre-end detector settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndDetector {
    /// Rise above the extrapolated baseline, in dB.
    pub min_rise: f64,
    /// Samples used for the baseline line fit.
    pub baseline_window: usize,
    /// Samples skipped after a detection.
    pub dead_zone_samples: usize,
}

impl Default for EndDetector {
    fn default() -> Self {
        EndDetector {
            min_rise: 10.5,
            baseline_window: 50,
            dead_zone_samples: 15,
        }
    }
}

/// Least-squares line through `(k, y[k])`; returns the value at `at`.
fn extrapolate(first_index: usize, ys: &[f64], at: usize) -> f64 {
    if ys.len() == 1 {
        return ys[0];
    }
    let n = ys.len() as f64;
    let mean_x = (ys.len() - 1) as f64 / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    mean_y + slope * ((at - first_index) as f64 - mean_x)
}

impl EndDetector {
    /// Distances (km) of the last sample before each reflective fibre end
    /// found after `splitter_km`.
    ///
    /// A sample is an end when it sits at least `min_rise` above the line
    /// fitted to the preceding baseline window while its predecessor does
    /// not. The window never reaches back past the splitter or into the dead
    /// zone of the previous detection.
    pub fn detect(&self, trace: &Trace, splitter_km: f64) -> Result<Vec<f64>> {
        if self.baseline_window == 0 || !self.min_rise.is_finite() || self.min_rise <= 0.0 {
            return Err(Error::Parameter(
                "detector needs a positive window and rise".into(),
            ));
        }
        let s = trace.samples();
        let offset_km = splitter_km - trace.start_km();
        if offset_km < 0.0 {
            return Err(Error::Range("splitter lies before the trace start".into()));
        }
        let first = (offset_km * 1000.0 / trace.resolution_m()).round() as usize + 1;
        let mut floor = first;
        let mut ends = Vec::new();
        let mut k = first + 1;
        while k < s.len() {
            let lo = floor.max(k.saturating_sub(self.baseline_window));
            let window = &s[lo..k];
            if window.iter().all(|v| v.is_finite()) && s[k].is_finite() {
                let rise = s[k] - extrapolate(lo, window, k);
                let previous_high = k - 1 > lo && {
                    let prev_window = &s[lo..k - 1];
                    s[k - 1] - extrapolate(lo, prev_window, k - 1) >= self.min_rise
                };
                if rise >= self.min_rise && !previous_high {
                    ends.push(trace.distance_at(k - 1));
                    floor = k + self.dead_zone_samples;
                    k = floor + 1;
                    continue;
                }
            }
            k += 1;
        }
        Ok(ends)
    }
}

/// [`EndDetector::detect`] with the default window and dead zone.
pub fn detect_fiber_end(trace: &Trace, splitter_km: f64, min_rise: f64) -> Result<Vec<f64>> {
    EndDetector {
        min_rise,
        ..EndDetector::default()
    }
    .detect(trace, splitter_km)
}
