use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{hex_color, OutputError};
use crate::imaging::Rgb;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelStats {
    pub color: Rgb,
    pub points: usize,
    pub tour_length: f64,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub max_join_curvature: f64,
    pub handle_scale: f64,
    /// Pen-down length on paper (mm).
    pub drawing_length_mm: f64,
    pub stipple_seconds: f64,
    pub tsp_seconds: f64,
    pub optimize_seconds: f64,
}

impl ChannelStats {
    /// Fraction of tour vertices removed by simplification.
    pub fn simplification_ratio(&self) -> f64 {
        if self.vertices_before == 0 {
            0.0
        } else {
            1.0 - self.vertices_after as f64 / self.vertices_before as f64
        }
    }
}

/// Summable per-channel quantities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsTotals {
    pub points: usize,
    pub tour_length: f64,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub drawing_length_mm: f64,
    pub stipple_seconds: f64,
    pub tsp_seconds: f64,
    pub optimize_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub canvas_width_mm: f64,
    pub canvas_height_mm: f64,
    pub tiles: usize,
    pub channels: Vec<ChannelStats>,
}

impl StatsReport {
    pub fn totals(&self) -> StatsTotals {
        let mut t = StatsTotals::default();
        for c in &self.channels {
            t.points += c.points;
            t.tour_length += c.tour_length;
            t.vertices_before += c.vertices_before;
            t.vertices_after += c.vertices_after;
            t.drawing_length_mm += c.drawing_length_mm;
            t.stipple_seconds += c.stipple_seconds;
            t.tsp_seconds += c.tsp_seconds;
            t.optimize_seconds += c.optimize_seconds;
        }
        t
    }

    /// `key = value` lines: document fields, one block per channel, then
    /// the totals.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# stats v1\n");
        let _ = writeln!(s, "canvas_width_mm = {}", self.canvas_width_mm);
        let _ = writeln!(s, "canvas_height_mm = {}", self.canvas_height_mm);
        let _ = writeln!(s, "tiles = {}", self.tiles);
        let _ = writeln!(s, "channels = {}", self.channels.len());
        for (i, c) in self.channels.iter().enumerate() {
            let _ = writeln!(s, "channel.{i}.color = {}", hex_color(c.color));
            let _ = writeln!(s, "channel.{i}.points = {}", c.points);
            let _ = writeln!(s, "channel.{i}.tour_length = {}", c.tour_length);
            let _ = writeln!(s, "channel.{i}.vertices_before = {}", c.vertices_before);
            let _ = writeln!(s, "channel.{i}.vertices_after = {}", c.vertices_after);
            let _ = writeln!(s, "channel.{i}.simplification_ratio = {}", c.simplification_ratio());
            let _ = writeln!(s, "channel.{i}.max_join_curvature = {}", c.max_join_curvature);
            let _ = writeln!(s, "channel.{i}.handle_scale = {}", c.handle_scale);
            let _ = writeln!(s, "channel.{i}.drawing_length_mm = {}", c.drawing_length_mm);
            let _ = writeln!(s, "channel.{i}.stipple_seconds = {}", c.stipple_seconds);
            let _ = writeln!(s, "channel.{i}.tsp_seconds = {}", c.tsp_seconds);
            let _ = writeln!(s, "channel.{i}.optimize_seconds = {}", c.optimize_seconds);
        }
        let t = self.totals();
        let _ = writeln!(s, "total.points = {}", t.points);
        let _ = writeln!(s, "total.tour_length = {}", t.tour_length);
        let _ = writeln!(s, "total.vertices_before = {}", t.vertices_before);
        let _ = writeln!(s, "total.vertices_after = {}", t.vertices_after);
        let _ = writeln!(s, "total.drawing_length_mm = {}", t.drawing_length_mm);
        let _ = writeln!(s, "total.stipple_seconds = {}", t.stipple_seconds);
        let _ = writeln!(s, "total.tsp_seconds = {}", t.tsp_seconds);
        let _ = writeln!(s, "total.optimize_seconds = {}", t.optimize_seconds);
        s
    }
}

/// Reads `key = value` lines; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, OutputError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| OutputError::StatsParse {
            line: n + 1,
            reason: "expected `key = value`".into(),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_sum_channels() {
        let report = StatsReport {
            canvas_width_mm: 400.0,
            canvas_height_mm: 350.0,
            tiles: 1,
            channels: vec![
                ChannelStats {
                    points: 100,
                    tour_length: 1.5,
                    ..Default::default()
                },
                ChannelStats {
                    points: 200,
                    tour_length: 2.5,
                    ..Default::default()
                },
                ChannelStats::default(),
            ],
        };
        let kv = parse_key_values(&report.to_text()).unwrap();
        assert_eq!(kv["total.points"], "300");
        assert_eq!(kv["total.tour_length"], "4");
        assert_eq!(kv["channel.2.points"], "0");
        assert_eq!(kv["channels"], "3");
    }

    #[test]
    fn simplification_counts_reported() {
        let c = ChannelStats {
            vertices_before: 21_664,
            vertices_after: 16_720,
            ..Default::default()
        };
        assert!((c.simplification_ratio() - 0.2282).abs() < 1e-4);
        let text = StatsReport {
            channels: vec![c],
            ..Default::default()
        }
        .to_text();
        assert!(text.contains("channel.0.vertices_before = 21664\n"));
        assert!(text.contains("channel.0.vertices_after = 16720\n"));
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(matches!(parse_key_values("a = 1\nnope\n"), Err(OutputError::StatsParse { line: 2, .. })));
    }
}
