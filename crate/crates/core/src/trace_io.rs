//! Trace files.
//!
//! Canonical format: one `distance_km,power_db` record per line, LF
//! terminated, no header, `.` as decimal separator. Distances carry nine
//! fractional digits; powers are printed with the shortest representation
//! that parses back to the same `f64`, padded to at least six fractional
//! digits. The disconnected sentinel is written as `-inf`.
//!
//! The reader also accepts CRLF line endings, any number of fractional digits
//! and a single non-numeric header line.
//!
//! Overlay format: a header row `distance_km,<series>...` followed by one row
//! per sample, the same number formatting as above.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Trace, DISCONNECTED};

/// Allowed deviation between consecutive spacings, in km.
pub const SPACING_TOLERANCE_KM: f64 = 1e-6;

fn format_power(out: &mut String, p: f64) {
    if p == DISCONNECTED {
        out.push_str("-inf");
        return;
    }
    let start = out.len();
    write!(out, "{p}").expect("writing to a String");
    let text = &out[start..];
    match text.find('.') {
        None => out.push_str(".000000"),
        Some(dot) => {
            let frac = text.len() - dot - 1;
            for _ in frac..6 {
                out.push('0');
            }
        }
    }
}

fn format_distance(out: &mut String, d: f64) {
    write!(out, "{d:.9}").expect("writing to a String");
}

pub fn write_csv(trace: &Trace) -> Result<Vec<u8>> {
    if trace.len() < 2 {
        return Err(Error::InvalidInput(
            "a trace file needs at least two samples to define its spacing".into(),
        ));
    }
    let mut out = String::with_capacity(trace.len() * 24);
    for (k, &p) in trace.samples().iter().enumerate() {
        format_distance(&mut out, trace.distance_at(k));
        out.push(',');
        format_power(&mut out, p);
        out.push('\n');
    }
    Ok(out.into_bytes())
}

fn parse_power(field: &str) -> Option<f64> {
    if field == "-inf" {
        return Some(DISCONNECTED);
    }
    let v: f64 = field.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_distance(field: &str) -> Option<f64> {
    let v: f64 = field.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_record(line: &str) -> std::result::Result<(f64, f64), String> {
    let mut fields = line.split(',');
    let (Some(d), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(format!("expected 2 comma-separated fields in {line:?}"));
    };
    let d = parse_distance(d.trim()).ok_or_else(|| format!("invalid distance {d:?}"))?;
    let p = parse_power(p.trim()).ok_or_else(|| format!("invalid power {p:?}"))?;
    Ok((d, p))
}

pub fn parse_csv(bytes: &[u8]) -> Result<Trace> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(1, format!("file is not UTF-8: {e}")))?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(Error::format(1, "empty file"));
    }

    let mut distances = Vec::new();
    let mut powers = Vec::new();
    let mut step = None;
    for (i, raw) in body.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let (d, p) = match parse_record(line) {
            Ok(r) => r,
            Err(_) if line_no == 1 => continue,
            Err(msg) => return Err(Error::format(line_no, msg)),
        };
        if let Some(&prev) = distances.last() {
            let gap: f64 = d - prev;
            match step {
                None => {
                    if gap <= 0.0 {
                        return Err(Error::format(line_no, "distances must be strictly increasing"));
                    }
                    step = Some(gap);
                }
                Some(s) if (gap - s).abs() > SPACING_TOLERANCE_KM => {
                    return Err(Error::format(
                        line_no,
                        format!(
                            "non-uniform spacing: {:.4} m after {:.4} m",
                            gap * 1000.0,
                            s * 1000.0
                        ),
                    ));
                }
                Some(_) => {}
            }
        }
        distances.push(d);
        powers.push(p);
    }
    let n = distances.len();
    if n < 2 {
        return Err(Error::format(
            1,
            "need at least two records to infer the resolution",
        ));
    }
    let span_m = (distances[n - 1] - distances[0]) * 1000.0;
    // micrometre grid: the writer prints distances to 1e-9 km
    let resolution_m = (span_m / (n - 1) as f64 * 1e6).round() / 1e6;
    Trace::new(distances[0], resolution_m, powers).map_err(|e| Error::format(1, e.to_string()))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&bytes)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &Trace) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_csv(trace)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Wide CSV of named series sharing one grid.
pub fn overlay_csv(series: &[(&str, &Trace)]) -> Result<Vec<u8>> {
    let Some(&(_, first)) = series.first() else {
        return Err(Error::InvalidInput("no series to export".into()));
    };
    for (name, t) in series {
        if !t.same_grid(first) {
            return Err(Error::Grid(format!("series {name:?} is on a different grid")));
        }
        if name.contains(',') || name.contains('\n') {
            return Err(Error::InvalidInput(format!("series name {name:?}")));
        }
    }
    let mut out = String::from("distance_km");
    for (name, _) in series {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..first.len() {
        format_distance(&mut out, first.distance_at(k));
        for (_, t) in series {
            out.push(',');
            format_power(&mut out, t.samples()[k]);
        }
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// Measured, fitted and separated channels side by side; channel columns are
/// named `channel_<id>`.
pub fn export_overlay(
    path: impl AsRef<Path>,
    measured: &Trace,
    fitted: &Trace,
    channels: &[(u32, Trace)],
) -> Result<()> {
    let path = path.as_ref();
    let names: Vec<String> = channels.iter().map(|(id, _)| format!("channel_{id}")).collect();
    let mut series: Vec<(&str, &Trace)> = vec![("measured", measured), ("fitted", fitted)];
    series.extend(
        names
            .iter()
            .map(String::as_str)
            .zip(channels.iter().map(|(_, t)| t)),
    );
    let bytes = overlay_csv(&series)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
