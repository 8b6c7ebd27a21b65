//! Fixed-step simulation traces and their CSV form.
//!
//! Column order: `t_s`, `drive_speed_m_s`, then for each platform
//! `cafe{i}_x_m`, `cafe{i}_z_m`, `cafe{i}_zdot_m_s`, `cafe{i}_clamp`,
//! `cafe{i}_slip`, then `seg{j}_tension_N` for every segment left to right.
//! Numbers are written in scientific notation with nine significant digits.

use std::io::{self, Write};

use crate::model::ClampState;

#[derive(Debug, Clone, PartialEq)]
pub struct CafeSample {
    pub x: f64,
    pub z: f64,
    pub z_dot: f64,
    pub clamp: ClampState,
    pub slip: bool,
    /// Signed distance carried by the drive since the start, m.
    pub travel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub drive_speed: f64,
    pub cafes: Vec<CafeSample>,
    /// Per-cable segment tension magnitudes, left to right, N.
    pub tensions: Vec<f64>,
}

pub fn header(cafes: usize, segments: usize) -> String {
    let mut cols = vec!["t_s".to_string(), "drive_speed_m_s".to_string()];
    for i in 0..cafes {
        cols.push(format!("cafe{i}_x_m"));
        cols.push(format!("cafe{i}_z_m"));
        cols.push(format!("cafe{i}_zdot_m_s"));
        cols.push(format!("cafe{i}_clamp"));
        cols.push(format!("cafe{i}_slip"));
    }
    for j in 0..segments {
        cols.push(format!("seg{j}_tension_N"));
    }
    cols.join(",")
}

pub fn num(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn format_row(row: &TraceRow) -> String {
    let mut s = String::with_capacity(32 * (2 + 5 * row.cafes.len() + row.tensions.len()));
    s.push_str(&num(row.t));
    s.push(',');
    s.push_str(&num(row.drive_speed));
    for c in &row.cafes {
        for v in [c.x, c.z, c.z_dot] {
            s.push(',');
            s.push_str(&num(v));
        }
        s.push(',');
        s.push_str(c.clamp.label());
        s.push(',');
        s.push(if c.slip { '1' } else { '0' });
    }
    for t in &row.tensions {
        s.push(',');
        s.push_str(&num(*t));
    }
    s
}

/// A complete in-memory trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let (c, s) = self
            .rows
            .first()
            .map_or((0, 0), |r| (r.cafes.len(), r.tensions.len()));
        let mut w = CsvTraceWriter::new(out, c, s)?;
        for r in &self.rows {
            w.write(r)?;
        }
        w.finish()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is ASCII")
    }
}

/// Streams rows to any writer.
pub struct CsvTraceWriter<W: Write> {
    out: io::BufWriter<W>,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W, cafes: usize, segments: usize) -> io::Result<Self> {
        let mut out = io::BufWriter::new(out);
        writeln!(out, "{}", header(cafes, segments))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &TraceRow) -> io::Result<()> {
        writeln!(self.out, "{}", format_row(row))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
