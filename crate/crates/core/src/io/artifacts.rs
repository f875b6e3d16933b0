use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::detector::DetectionReport;
use crate::frame::MeasurementFrame;

pub const SCHEMA_VERSION: u32 = 1;

/// First line of every artifact: what it is and which config produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub koopwatch: String,
    pub schema: u32,
    pub config_sha256: String,
}

impl ArtifactHeader {
    pub fn new(kind: &str, config_sha256: &str) -> Self {
        Self {
            koopwatch: kind.to_string(),
            schema: SCHEMA_VERSION,
            config_sha256: config_sha256.to_string(),
        }
    }

    fn csv_line(&self) -> String {
        format!("# koopwatch {} schema={} config_sha256={}", self.koopwatch, self.schema, self.config_sha256)
    }

    fn parse_csv_line(path: &Path, line: &str) -> Result<Self, IoError> {
        let bad = |m: &str| format_err(path, 1, m);
        let rest = line.strip_prefix("# koopwatch ").ok_or_else(|| bad("missing `# koopwatch` header"))?;
        let mut parts = rest.split(' ');
        let kind = parts.next().filter(|k| !k.is_empty()).ok_or_else(|| bad("missing artifact kind"))?;
        let mut schema = None;
        let mut hash = None;
        for part in parts {
            match part.split_once('=') {
                Some(("schema", v)) => schema = v.parse().ok(),
                Some(("config_sha256", v)) => hash = Some(v.to_string()),
                _ => return Err(bad(&format!("unexpected header field `{part}`"))),
            }
        }
        let header = Self {
            koopwatch: kind.to_string(),
            schema: schema.ok_or_else(|| bad("missing schema"))?,
            config_sha256: hash.ok_or_else(|| bad("missing config_sha256"))?,
        };
        header.check(path)?;
        Ok(header)
    }

    fn check(&self, path: &Path) -> Result<(), IoError> {
        if self.schema != SCHEMA_VERSION {
            return Err(format_err(path, 1, &format!("schema {} is not supported (expected {SCHEMA_VERSION})", self.schema)));
        }
        Ok(())
    }
}

fn format_err(path: &Path, line: usize, message: &str) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| IoError::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| IoError::file(path, e))
}

fn read(path: &Path) -> Result<String, IoError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(IoError::MissingArtifact(path.to_path_buf())),
        Err(e) => Err(IoError::file(path, e)),
    }
}

fn column_header(p: usize) -> String {
    let mut s = String::from("t");
    for i in 0..p {
        let _ = write!(s, ",s{i}");
    }
    s
}

/// `t,s0,...` rows; floats use the shortest round-trip representation.
pub fn write_stream_csv(path: &Path, header: &ArtifactHeader, frames: &[MeasurementFrame]) -> Result<(), IoError> {
    let p = frames.first().map_or(0, |f| f.dim());
    let mut out = format!("{}\n{}\n", header.csv_line(), column_header(p));
    for f in frames {
        let _ = write!(out, "{:?}", f.t);
        for v in &f.values {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn parse_table(path: &Path) -> Result<(ArtifactHeader, Vec<(usize, Vec<f64>)>), IoError> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => ArtifactHeader::parse_csv_line(path, l)?,
        None => return Err(format_err(path, 1, "empty file")),
    };
    let width = match lines.next() {
        Some((_, l)) if l.starts_with('t') => l.split(',').count(),
        _ => return Err(format_err(path, 2, "missing column header")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format_err(path, i + 1, &e.to_string()))?;
        if values.len() != width {
            return Err(format_err(path, i + 1, &format!("expected {width} columns, found {}", values.len())));
        }
        rows.push((i + 1, values));
    }
    Ok((header, rows))
}

pub fn read_stream_csv(path: &Path) -> Result<(ArtifactHeader, Vec<MeasurementFrame>), IoError> {
    let (header, rows) = parse_table(path)?;
    let frames = rows
        .into_iter()
        .map(|(_, mut v)| {
            let t = v.remove(0);
            MeasurementFrame::new(t, v)
        })
        .collect();
    Ok((header, frames))
}

/// One 0/1 row per sample: 1 where the sensor is under attack.
pub fn write_labels_csv(
    path: &Path,
    header: &ArtifactHeader,
    times: &[f64],
    labels: &[Vec<usize>],
    p: usize,
) -> Result<(), IoError> {
    let mut out = format!("{}\n{}\n", header.csv_line(), column_header(p));
    for (t, attacked) in times.iter().zip(labels) {
        let _ = write!(out, "{t:?}");
        for s in 0..p {
            out.push_str(if attacked.contains(&s) { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_labels_csv(path: &Path) -> Result<(ArtifactHeader, Vec<(f64, Vec<usize>)>), IoError> {
    let (header, rows) = parse_table(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, v) in rows {
        let mut attacked = Vec::new();
        for (s, &x) in v[1..].iter().enumerate() {
            match x {
                x if x == 1.0 => attacked.push(s),
                x if x == 0.0 => {}
                _ => return Err(format_err(path, line, "labels must be 0 or 1")),
            }
        }
        out.push((v[0], attacked));
    }
    Ok((header, out))
}

/// A JSON header line followed by one report per line.
pub fn write_reports_jsonl(path: &Path, header: &ArtifactHeader, reports: &[DetectionReport]) -> Result<(), IoError> {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_reports_jsonl(path: &Path) -> Result<(ArtifactHeader, Vec<DetectionReport>), IoError> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
    let header: ArtifactHeader = match lines.next() {
        Some((_, l)) => serde_json::from_str(l).map_err(|e| format_err(path, 1, &e.to_string()))?,
        None => return Err(format_err(path, 1, "empty file")),
    };
    header.check(path)?;
    let reports = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format_err(path, i + 1, &e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, reports))
}
