use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::artifacts::{read_labels_csv, read_reports_jsonl, read_stream_csv};
use super::pipeline::ARTIFACT_FILES;
use super::IoError;

/// Long-format tables for external plotting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `t,sensor,true,received,attacked`
    Timeseries,
    /// `t,sensor,cluster,m0,...`
    ModeSpread,
    /// `t,sensor,cluster,candidate,flagged`
    Clusters,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::Timeseries, PlotKind::ModeSpread, PlotKind::Clusters];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Timeseries => "timeseries",
            PlotKind::ModeSpread => "mode_spread",
            PlotKind::Clusters => "clusters",
        }
    }
}

impl FromStr for PlotKind {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        PlotKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = PlotKind::ALL.iter().map(|k| k.name()).collect();
            IoError::validation("kind", format!("unknown plot kind `{s}`; valid kinds: {}", names.join(", ")))
        })
    }
}

/// Builds the requested table from the artifacts of a finished run.
pub fn emit_plot_data(kind: PlotKind, run_dir: &Path) -> Result<String, IoError> {
    let mut out = String::new();
    match kind {
        PlotKind::Timeseries => {
            let (_, truth) = read_stream_csv(&run_dir.join(ARTIFACT_FILES[0]))?;
            let (_, received) = read_stream_csv(&run_dir.join(ARTIFACT_FILES[1]))?;
            let (_, labels) = read_labels_csv(&run_dir.join(ARTIFACT_FILES[2]))?;
            out.push_str("t,sensor,true,received,attacked\n");
            for ((y, r), (_, l)) in truth.iter().zip(&received).zip(&labels) {
                for s in 0..y.dim() {
                    let _ = writeln!(out, "{:?},{s},{:?},{:?},{}", y.t, y.values[s], r.values[s], u8::from(l.contains(&s)));
                }
            }
        }
        PlotKind::ModeSpread => {
            let (_, reports) = read_reports_jsonl(&run_dir.join(ARTIFACT_FILES[3]))?;
            let width = reports.iter().flat_map(|r| r.mode_spread.first()).map(Vec::len).max().unwrap_or(0);
            out.push_str("t,sensor,cluster");
            for j in 0..width {
                let _ = write!(out, ",m{j}");
            }
            out.push('\n');
            for r in &reports {
                for (s, row) in r.mode_spread.iter().enumerate() {
                    let _ = write!(out, "{:?},{s},{}", r.t, r.labels[s]);
                    for v in row {
                        let _ = write!(out, ",{v:?}");
                    }
                    out.push('\n');
                }
            }
        }
        PlotKind::Clusters => {
            let (_, reports) = read_reports_jsonl(&run_dir.join(ARTIFACT_FILES[3]))?;
            out.push_str("t,sensor,cluster,candidate,flagged\n");
            for r in &reports {
                for (s, c) in r.labels.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{:?},{s},{c},{},{}",
                        r.t,
                        u8::from(r.candidates.contains(&s)),
                        u8::from(r.flagged.contains(&s))
                    );
                }
            }
        }
    }
    Ok(out)
}
