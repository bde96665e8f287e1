//! Event data types, CSV/binary file I/O, and temporal scale normalization.
//!
//! An event is a brightness-change detection `(x, y, t)` from a dynamic
//! vision sensor pixel. Polarity is not modeled. Files carry an optional
//! ground-truth label column (`1` = real, `0` = noise, absent = unknown).

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"EVD1";
const LABEL_REAL: u8 = 1;
const LABEL_NOISE: u8 = 0;
const LABEL_UNKNOWN: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Label {
    Real,
    Noise,
    #[default]
    Unknown,
}

impl Label {
    fn to_byte(self) -> u8 {
        match self {
            Label::Real => LABEL_REAL,
            Label::Noise => LABEL_NOISE,
            Label::Unknown => LABEL_UNKNOWN,
        }
    }

    fn from_byte(b: u8) -> Option<Label> {
        match b {
            LABEL_REAL => Some(Label::Real),
            LABEL_NOISE => Some(Label::Noise),
            LABEL_UNKNOWN => Some(Label::Unknown),
            _ => None,
        }
    }
}

/// A single event. Timestamps are 64-bit real seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: f64,
    pub label: Label,
}

/// An event stream sorted by timestamp (stable; ties keep insertion order).
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    sensor_width: u16,
    sensor_height: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Binary,
}

/// Time unit of the `t` column in a CSV file; converted to seconds on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeUnit {
    #[default]
    Seconds,
    Microseconds,
}

impl EventStream {
    /// Builds a stream, sorting events stably by timestamp.
    pub fn new(mut events: Vec<Event>, sensor_width: u16, sensor_height: u16) -> Result<Self> {
        for e in &events {
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "timestamp {} is not finite and non-negative",
                    e.t
                )));
            }
            if sensor_width > 0 && e.x >= sensor_width {
                return Err(Error::InvalidInput(format!(
                    "x={} exceeds sensor width {}",
                    e.x, sensor_width
                )));
            }
            if sensor_height > 0 && e.y >= sensor_height {
                return Err(Error::InvalidInput(format!(
                    "y={} exceeds sensor height {}",
                    e.y, sensor_height
                )));
            }
        }
        events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        Ok(EventStream {
            events,
            sensor_width,
            sensor_height,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn sensor_width(&self) -> u16 {
        self.sensor_width
    }

    pub fn sensor_height(&self) -> u16 {
        self.sensor_height
    }

    pub fn t_min(&self) -> f64 {
        self.events.first().map_or(0.0, |e| e.t)
    }

    pub fn t_max(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t)
    }

    /// Replaces every label, preserving coordinates and order.
    pub fn with_labels(&self, labels: impl IntoIterator<Item = Label>) -> Result<Self> {
        let labels: Vec<Label> = labels.into_iter().collect();
        if labels.len() != self.events.len() {
            return Err(Error::DimensionMismatch {
                expected: self.events.len(),
                got: labels.len(),
            });
        }
        let events = self
            .events
            .iter()
            .zip(labels)
            .map(|(e, label)| Event { label, ..*e })
            .collect();
        Ok(EventStream {
            events,
            sensor_width: self.sensor_width,
            sensor_height: self.sensor_height,
        })
    }
}

/// Event coordinates with the time axis scaled by `beta`, as an N x 3 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledEvents {
    pub coords: Vec<[f64; 3]>,
    pub beta: f64,
}

impl ScaledEvents {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Scales the time coordinate by `beta`, leaving x and y untouched.
pub fn scale_time(stream: &EventStream, beta: f64) -> Result<ScaledEvents> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let coords = stream
        .events
        .iter()
        .map(|e| [f64::from(e.x), f64::from(e.y), beta * e.t])
        .collect();
    Ok(ScaledEvents { coords, beta })
}

pub fn load_events(path: &Path, format: FileFormat) -> Result<EventStream> {
    load_events_with(path, format, TimeUnit::Seconds)
}

pub fn load_events_with(path: &Path, format: FileFormat, unit: TimeUnit) -> Result<EventStream> {
    match format {
        FileFormat::Csv => load_csv(path, unit),
        FileFormat::Binary => load_binary(path),
    }
}

pub fn save_events(stream: &EventStream, path: &Path, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Csv => save_csv(stream, path),
        FileFormat::Binary => save_binary(stream, path),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn load_csv(path: &Path, unit: TimeUnit) -> Result<EventStream> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file, expected header"))?;
    let has_label = match header.trim() {
        "x,y,t" => false,
        "x,y,t,label" => true,
        other => {
            return Err(parse_err(
                path,
                1,
                format!("expected header `x,y,t[,label]`, got `{other}`"),
            ))
        }
    };

    let scale = match unit {
        TimeUnit::Seconds => 1.0,
        TimeUnit::Microseconds => 1e-6,
    };

    let mut events = Vec::new();
    let mut max_x: u32 = 0;
    let mut max_y: u32 = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if has_label { 4 } else { 3 };
        if fields.len() != expected {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {expected} fields, got {}", fields.len()),
            ));
        }
        let x: u16 = fields[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad x: {e}")))?;
        let y: u16 = fields[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad y: {e}")))?;
        let t: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad t: {e}")))?;
        if !t.is_finite() || t < 0.0 {
            return Err(parse_err(path, lineno, format!("bad t: {t}")));
        }
        let label = if has_label {
            let b: u8 = fields[3]
                .trim()
                .parse()
                .map_err(|e| parse_err(path, lineno, format!("bad label: {e}")))?;
            Label::from_byte(b)
                .ok_or_else(|| parse_err(path, lineno, format!("bad label value: {b}")))?
        } else {
            Label::Unknown
        };
        max_x = max_x.max(u32::from(x));
        max_y = max_y.max(u32::from(y));
        events.push(Event {
            x,
            y,
            t: t * scale,
            label,
        });
    }

    // CSV carries no sensor dimensions; infer the tightest fit.
    let (w, h) = if events.is_empty() {
        (0, 0)
    } else {
        ((max_x + 1) as u16, (max_y + 1) as u16)
    };
    EventStream::new(events, w, h)
}

fn save_csv(stream: &EventStream, path: &Path) -> Result<()> {
    let has_label = stream.events.iter().any(|e| e.label != Label::Unknown);
    let mut out = String::new();
    out.push_str(if has_label { "x,y,t,label\n" } else { "x,y,t\n" });
    for e in &stream.events {
        if has_label {
            let _ = writeln!(out, "{},{},{},{}", e.x, e.y, e.t, e.label.to_byte());
        } else {
            let _ = writeln!(out, "{},{},{}", e.x, e.y, e.t);
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn save_binary(stream: &EventStream, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let n = u32::try_from(stream.events.len())
        .map_err(|_| Error::InvalidInput("stream too large for binary format".into()))?;
    let write = |w: &mut BufWriter<fs::File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| io_err(path, e))
    };
    write(&mut w, BINARY_MAGIC)?;
    write(&mut w, &n.to_le_bytes())?;
    write(&mut w, &stream.sensor_width.to_le_bytes())?;
    write(&mut w, &stream.sensor_height.to_le_bytes())?;
    for e in &stream.events {
        write(&mut w, &e.x.to_le_bytes())?;
        write(&mut w, &e.y.to_le_bytes())?;
        write(&mut w, &e.t.to_le_bytes())?;
        write(&mut w, &[e.label.to_byte()])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn load_binary(path: &Path) -> Result<EventStream> {
    let data = fs::read(path).map_err(|e| io_err(path, e))?;
    if data.len() < 12 || &data[0..4] != BINARY_MAGIC {
        return Err(parse_err(path, 0, "missing EVD1 magic"));
    }
    let n = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let width = u16::from_le_bytes(data[8..10].try_into().unwrap());
    let height = u16::from_le_bytes(data[10..12].try_into().unwrap());
    const REC: usize = 2 + 2 + 8 + 1;
    if data.len() != 12 + n * REC {
        return Err(parse_err(
            path,
            0,
            format!("expected {} bytes for {n} records, got {}", 12 + n * REC, data.len()),
        ));
    }
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let off = 12 + i * REC;
        let rec = &data[off..off + REC];
        let x = u16::from_le_bytes(rec[0..2].try_into().unwrap());
        let y = u16::from_le_bytes(rec[2..4].try_into().unwrap());
        let t = f64::from_le_bytes(rec[4..12].try_into().unwrap());
        let label = Label::from_byte(rec[12])
            .ok_or_else(|| parse_err(path, 0, format!("bad label byte {} in record {i}", rec[12])))?;
        if !t.is_finite() || t < 0.0 {
            return Err(parse_err(path, 0, format!("bad t {t} in record {i}")));
        }
        events.push(Event { x, y, t, label });
    }
    EventStream::new(events, width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn ev(x: u16, y: u16, t: f64) -> Event {
        Event {
            x,
            y,
            t,
            label: Label::Unknown,
        }
    }

    #[test]
    fn csv_single_row() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "x,y,t\n3,4,0.5\n").unwrap();
        let s = load_events(&p, FileFormat::Csv).unwrap();
        assert_eq!(s.events(), &[ev(3, 4, 0.5)]);
    }

    #[test]
    fn csv_header_only_is_empty_stream() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "x,y,t\n").unwrap();
        let s = load_events(&p, FileFormat::Csv).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.t_min(), 0.0);
        assert_eq!(s.t_max(), 0.0);
    }

    #[test]
    fn csv_malformed_row_reports_line() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "x,y,t\n1,2,0.1\n1,zzz,0.2\n").unwrap();
        match load_events(&p, FileFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_microseconds_converted() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "x,y,t\n1,2,500000\n").unwrap();
        let s = load_events_with(&p, FileFormat::Csv, TimeUnit::Microseconds).unwrap();
        assert_eq!(s.events()[0].t, 0.5);
    }

    #[test]
    fn non_monotone_timestamps_resorted_stably() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "x,y,t\n5,0,0.3\n1,0,0.1\n2,0,0.3\n").unwrap();
        let s = load_events(&p, FileFormat::Csv).unwrap();
        let xs: Vec<u16> = s.events().iter().map(|e| e.x).collect();
        assert_eq!(xs, vec![1, 5, 2]);
    }

    #[test]
    fn scale_time_beta_one_is_identity() {
        let s = EventStream::new(vec![ev(3, 4, 0.5)], 10, 10).unwrap();
        let sc = scale_time(&s, 1.0).unwrap();
        assert_eq!(sc.coords, vec![[3.0, 4.0, 0.5]]);
    }

    #[test]
    fn scale_time_default_beta() {
        let s = EventStream::new(vec![ev(0, 0, 0.1)], 1, 1).unwrap();
        let sc = scale_time(&s, 50.0).unwrap();
        assert_eq!(sc.coords[0][2], 5.0);
    }

    #[test]
    fn scale_time_rejects_nonpositive_beta() {
        let s = EventStream::new(vec![ev(0, 0, 0.1)], 1, 1).unwrap();
        assert!(scale_time(&s, 0.0).is_err());
        assert!(scale_time(&s, -2.0).is_err());
    }

    #[test]
    fn scale_time_composes_multiplicatively() {
        let s = EventStream::new(vec![ev(1, 2, 0.25), ev(3, 4, 0.75)], 10, 10).unwrap();
        let twice = {
            let once = scale_time(&s, 2.0).unwrap();
            // Rebuild a stream from the scaled times and scale again.
            let evs: Vec<Event> = once
                .coords
                .iter()
                .map(|c| ev(c[0] as u16, c[1] as u16, c[2]))
                .collect();
            let s2 = EventStream::new(evs, 10, 10).unwrap();
            scale_time(&s2, 2.0).unwrap()
        };
        let quad = scale_time(&s, 4.0).unwrap();
        assert_eq!(twice.coords, quad.coords);
    }

    proptest! {
        #[test]
        fn binary_round_trip(evs in proptest::collection::vec(
            (0u16..640, 0u16..480, 0f64..100.0, 0u8..3), 0..200)
        ) {
            let events: Vec<Event> = evs.iter().map(|&(x, y, t, l)| Event {
                x, y, t,
                label: match l { 0 => Label::Noise, 1 => Label::Real, _ => Label::Unknown },
            }).collect();
            let s = EventStream::new(events, 640, 480).unwrap();
            let dir = tempdir().unwrap();
            let p = dir.path().join("e.bin");
            save_events(&s, &p, FileFormat::Binary).unwrap();
            let back = load_events(&p, FileFormat::Binary).unwrap();
            prop_assert_eq!(&s, &back);
        }

        #[test]
        fn csv_round_trip_events(evs in proptest::collection::vec(
            (0u16..640, 0u16..480, 0f64..100.0, 0u8..3), 1..100)
        ) {
            let events: Vec<Event> = evs.iter().map(|&(x, y, t, l)| Event {
                x, y, t,
                label: match l { 0 => Label::Noise, 1 => Label::Real, _ => Label::Unknown },
            }).collect();
            let s = EventStream::new(events, 640, 480).unwrap();
            let dir = tempdir().unwrap();
            let p = dir.path().join("e.csv");
            save_events(&s, &p, FileFormat::Csv).unwrap();
            let back = load_events(&p, FileFormat::Csv).unwrap();
            prop_assert_eq!(s.events(), back.events());
        }
    }

    #[test]
    fn binary_round_trip_1000_random_events_bit_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let events: Vec<Event> = (0..1000)
            .map(|_| Event {
                x: rng.random_range(0..1024),
                y: rng.random_range(0..768),
                t: rng.random::<f64>() * 1e3,
                label: match rng.random_range(0..3) {
                    0 => Label::Noise,
                    1 => Label::Real,
                    _ => Label::Unknown,
                },
            })
            .collect();
        let s = EventStream::new(events, 1024, 768).unwrap();
        let dir = tempdir().unwrap();
        let p = dir.path().join("e.bin");
        save_events(&s, &p, FileFormat::Binary).unwrap();
        let back = load_events(&p, FileFormat::Binary).unwrap();
        assert_eq!(s, back);
        for (a, b) in s.events().iter().zip(back.events()) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
        }
    }
}
