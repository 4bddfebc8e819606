//! Decode-trace records and their CSV, JSON and SVG heatmap exports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// One token position at one decoding step.
///
/// `step` counts forward passes across the whole decode and `position` is the
/// offset within the generated region. `conf` and `fused` are absent for
/// positions that were already committed when the step ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub position: usize,
    pub ell: f64,
    pub conf: Option<f64>,
    pub beta: f64,
    pub fused: Option<f64>,
    pub selected: bool,
    pub committed_token: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
    SvgHeatmap,
}

impl FromStr for TraceFormat {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "json" => Ok(TraceFormat::Json),
            "svg" | "svg_heatmap" => Ok(TraceFormat::SvgHeatmap),
            other => Err(AnalysisError::UnknownFormat(other.to_string())),
        }
    }
}

impl TraceFormat {
    /// Format implied by a file extension, if any.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

pub const CSV_HEADER: &str = "step,position,ell,conf,beta,fused,selected,token";

pub fn export_trace(trace: &[TraceRecord], format: TraceFormat) -> Result<Vec<u8>, AnalysisError> {
    if trace.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    Ok(match format {
        TraceFormat::Csv => to_csv(trace).into_bytes(),
        TraceFormat::Json => {
            let mut s = serde_json::to_string_pretty(trace).expect("trace serializes");
            s.push('\n');
            s.into_bytes()
        }
        TraceFormat::SvgHeatmap => to_svg(trace).into_bytes(),
    })
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn to_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in trace {
        // f64 Display is the shortest string that parses back to the same value.
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.step,
            r.position,
            r.ell,
            opt(&r.conf),
            r.beta,
            opt(&r.fused),
            r.selected,
            opt(&r.committed_token)
        )
        .expect("write to string");
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRecord>, AnalysisError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(AnalysisError::Parse {
                line: 1,
                reason: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let err = |reason: String| AnalysisError::Parse {
            line: line_no,
            reason,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err(format!("expected 8 fields, got {}", f.len())));
        }
        fn req<T: FromStr>(s: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("cannot parse `{s}`"))
        }
        fn maybe<T: FromStr>(s: &str) -> Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                req(s).map(Some)
            }
        }
        out.push(TraceRecord {
            step: req(f[0]).map_err(err)?,
            position: req(f[1]).map_err(err)?,
            ell: req(f[2]).map_err(err)?,
            conf: maybe(f[3]).map_err(err)?,
            beta: req(f[4]).map_err(err)?,
            fused: maybe(f[5]).map_err(err)?,
            selected: req(f[6]).map_err(err)?,
            committed_token: maybe(f[7]).map_err(err)?,
        });
    }
    Ok(out)
}

pub fn parse_json(text: &str) -> Result<Vec<TraceRecord>, AnalysisError> {
    serde_json::from_str(text).map_err(|e| AnalysisError::Parse {
        line: e.line(),
        reason: e.to_string(),
    })
}

const CELL: usize = 12;
const MARGIN: usize = 40;

// Linear ramp from near-white to dark blue; each channel is monotone in ell.
fn ramp(ell: f64) -> (u8, u8, u8) {
    let x = if ell.is_finite() {
        ell.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * x).round() as u8;
    (lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

fn star_points(cx: f64, cy: f64, outer: f64) -> String {
    let inner = outer * 0.45;
    let mut pts = Vec::with_capacity(10);
    for i in 0..10 {
        let r = if i % 2 == 0 { outer } else { inner };
        let a = std::f64::consts::PI * (i as f64) / 5.0 - std::f64::consts::FRAC_PI_2;
        pts.push(format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin()));
    }
    pts.join(" ")
}

/// Steps run down the rows, positions across the columns. Each record is one
/// cell shaded by `ell`; a star marks the step at which a position was
/// committed.
fn to_svg(trace: &[TraceRecord]) -> String {
    let steps = trace.iter().map(|r| r.step).max().unwrap_or(0) + 1;
    let positions = trace.iter().map(|r| r.position).max().unwrap_or(0) + 1;
    let width = MARGIN + positions * CELL + 8;
    let height = MARGIN + steps * CELL + 8;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="14" font-family="monospace" font-size="10">position →</text>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="4" y="{}" font-family="monospace" font-size="10">step ↓</text>"#,
        MARGIN - 4
    )
    .unwrap();
    s.push_str("<g class=\"cells\">\n");
    for r in trace {
        let (cr, cg, cb) = ramp(r.ell);
        writeln!(
            s,
            r##"<rect class="cell" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#{cr:02x}{cg:02x}{cb:02x}"><title>step {} position {} ell {}</title></rect>"##,
            MARGIN + r.position * CELL,
            MARGIN + r.step * CELL,
            r.step,
            r.position,
            r.ell
        )
        .unwrap();
    }
    s.push_str("</g>\n<g class=\"stars\">\n");
    for r in trace.iter().filter(|r| r.selected) {
        let cx = (MARGIN + r.position * CELL) as f64 + CELL as f64 / 2.0;
        let cy = (MARGIN + r.step * CELL) as f64 + CELL as f64 / 2.0;
        writeln!(
            s,
            r##"<polygon class="star" points="{}" fill="#e31a1c" stroke="#67000d" stroke-width="0.5"/>"##,
            star_points(cx, cy, CELL as f64 * 0.42)
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, position: usize, selected: bool) -> TraceRecord {
        TraceRecord {
            step,
            position,
            ell: 0.1 + position as f64 / 3.0,
            conf: Some(0.7),
            beta: 0.5,
            fused: Some(0.7 + 0.5 * (0.1 + position as f64 / 3.0)),
            selected,
            committed_token: selected.then_some(42),
        }
    }

    #[test]
    fn csv_has_header_plus_one_line_per_record() {
        let t = vec![rec(0, 0, true), rec(0, 1, false)];
        let csv = String::from_utf8(export_trace(&t, TraceFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(parse_csv(&csv).unwrap(), t);
    }

    #[test]
    fn csv_absent_fields_are_empty() {
        let mut r = rec(1, 0, false);
        r.conf = None;
        r.fused = None;
        let csv = String::from_utf8(export_trace(&[r.clone()], TraceFormat::Csv).unwrap()).unwrap();
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
        assert_eq!(parse_csv(&csv).unwrap(), vec![r]);
    }

    #[test]
    fn json_roundtrips() {
        let t = vec![rec(0, 0, true), rec(0, 1, false)];
        let json = String::from_utf8(export_trace(&t, TraceFormat::Json).unwrap()).unwrap();
        assert_eq!(parse_json(&json).unwrap(), t);
    }

    #[test]
    fn svg_counts_cells_and_stars() {
        let t = vec![rec(0, 0, true), rec(0, 1, false), rec(1, 1, true)];
        let svg = String::from_utf8(export_trace(&t, TraceFormat::SvgHeatmap).unwrap()).unwrap();
        assert_eq!(svg.matches("class=\"cell\"").count(), 3);
        assert_eq!(svg.matches("class=\"star\"").count(), 2);
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn ramp_is_monotone() {
        let mut prev = ramp(0.0);
        for i in 1..=100 {
            let c = ramp(i as f64 / 100.0);
            assert!(c.0 <= prev.0 && c.1 <= prev.1 && c.2 <= prev.2);
            prev = c;
        }
        assert_eq!(ramp(0.0), (247, 251, 255));
        assert_eq!(ramp(1.0), (8, 48, 107));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            export_trace(&[], TraceFormat::Csv),
            Err(AnalysisError::EmptyTrace)
        ));
        assert!(matches!(
            "png".parse::<TraceFormat>(),
            Err(AnalysisError::UnknownFormat(_))
        ));
        assert!(parse_csv("nope\n").is_err());
    }
}
