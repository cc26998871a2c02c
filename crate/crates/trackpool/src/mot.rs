//! MOT-Challenge CSV files: `frame,id,bb_left,bb_top,bb_width,bb_height,conf[,x,y,z]`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use trackpool_core::record::MotRecord;
use trackpool_core::BBox;

use crate::error::{read_to_string, Error, Result};

fn parse_int(field: &str, line: usize, name: &str) -> Result<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    // some tools write integral columns as floats
    match field.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(Error::parse(line, format!("{name}: `{field}` is not an integer"))),
    }
}

fn parse_float(field: &str, line: usize, name: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("{name}: `{field}` is not a finite number"))),
    }
}

/// Parses one line; `line` is used for error messages only.
pub fn parse_line(text: &str, line: usize) -> Result<MotRecord> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(Error::parse(line, format!("expected at least 7 fields, found {}", fields.len())));
    }
    if fields.len() > 10 {
        return Err(Error::parse(line, format!("expected at most 10 fields, found {}", fields.len())));
    }
    let frame = parse_int(fields[0], line, "frame")?;
    let frame = u32::try_from(frame)
        .ok()
        .filter(|f| *f >= 1)
        .ok_or_else(|| Error::parse(line, format!("frame must be at least 1, got {frame}")))?;
    let id = parse_int(fields[1], line, "id")?;
    let mut v = [0.0; 5];
    for (k, name) in ["bb_left", "bb_top", "bb_width", "bb_height", "conf"].iter().enumerate() {
        v[k] = parse_float(fields[2 + k], line, name)?;
    }
    if !(v[2] > 0.0 && v[3] > 0.0) {
        return Err(Error::parse(line, "box width and height must be positive"));
    }
    let mut rec = MotRecord::new(frame, id, BBox::new(v[0], v[1], v[2], v[3]), v[4]);
    let extra = [&mut rec.x, &mut rec.y, &mut rec.z];
    for (slot, (k, name)) in extra.into_iter().zip([(7, "x"), (8, "y"), (9, "z")]) {
        if let Some(f) = fields.get(k) {
            *slot = parse_float(f, line, name)?;
        }
    }
    Ok(rec)
}

/// Parses a whole file. Blank lines are skipped; records keep file order.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| parse_line(l, k + 1))
        .collect()
}

pub fn read_mot(path: &Path) -> Result<Vec<MotRecord>> {
    parse_mot(&read_to_string(path)?).map_err(|e| e.in_file(path))
}

/// One line without the newline. Floats use the shortest representation
/// that parses back to the same value.
pub fn format_record(r: &MotRecord) -> String {
    let b = r.bbox;
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.frame, r.id, b.left, b.top, b.width, b.height, r.conf, r.x, r.y, r.z
    )
}

/// Renders records sorted by `(frame, id)`; ties keep their input order.
pub fn write_mot(records: &[MotRecord]) -> String {
    let mut sorted: Vec<&MotRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.id));
    let mut out = String::new();
    for r in sorted {
        let _ = writeln!(out, "{}", format_record(r));
    }
    out
}

/// Writes records in the order given, for streaming output.
pub struct MotWriter<W: Write> {
    inner: W,
}

impl<W: Write> MotWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write(&mut self, r: &MotRecord) -> std::io::Result<()> {
        writeln!(self.inner, "{}", format_record(r))
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_mapping() {
        let r = parse_line("1,-1,10,20,30,60,0.9,-1,-1,-1", 1).unwrap();
        assert_eq!((r.frame, r.id), (1, -1));
        assert_eq!(r.bbox, BBox::new(10.0, 20.0, 30.0, 60.0));
        assert_eq!(r.conf, 0.9);
    }

    #[test]
    fn seven_fields_are_enough() {
        let r = parse_line("3,4,1.5,2,3,4,1", 1).unwrap();
        assert_eq!((r.x, r.y, r.z), (-1.0, -1.0, -1.0));
        assert!(parse_line("3,4,1.5,2,3,4", 1).is_err());
    }
}
