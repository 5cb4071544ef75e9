use std::fmt::Write as _;

use super::{hex_color, OutputError};
use crate::geom::Point;
use crate::imaging::Palette;
use crate::pathopt::{CubicBezier, SplinePath};

/// Document geometry: path coordinates live in a `view_width × view_height`
/// box (image pixels) rendered at `width_mm × height_mm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgLayout {
    pub view_width: f64,
    pub view_height: f64,
    pub width_mm: f64,
    pub height_mm: f64,
    pub stroke_width_mm: f64,
}

fn write_path(out: &mut String, path: &SplinePath) {
    let Some(first) = path.segments.first() else {
        return;
    };
    let _ = write!(out, "<path d=\"M {} {}", first.p0.x, first.p0.y);
    for c in &path.segments {
        let _ = write!(out, " C {} {} {} {} {} {}", c.p1.x, c.p1.y, c.p2.x, c.p2.y, c.p3.x, c.p3.y);
    }
    if path.closed {
        out.push_str(" Z");
    }
    out.push_str("\"/>\n");
}

/// Layered SVG: one group per channel in palette order, each holding the
/// channel's paths as cubic `C` commands. Output is byte-deterministic.
pub fn emit_svg(channels: &[Vec<SplinePath>], palette: &Palette, layout: &SvgLayout) -> Result<String, OutputError> {
    if channels.is_empty() {
        return Err(OutputError::NoChannels);
    }
    if channels.len() != palette.len() {
        return Err(OutputError::PaletteMismatch {
            channels: channels.len(),
            colors: palette.len(),
        });
    }
    let stroke = layout.stroke_width_mm * layout.view_width / layout.width_mm;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}mm\" height=\"{}mm\" viewBox=\"0 0 {} {}\">",
        layout.width_mm, layout.height_mm, layout.view_width, layout.view_height
    );
    for (i, (paths, color)) in channels.iter().zip(palette.colors()).enumerate() {
        let _ = writeln!(
            out,
            "<g id=\"channel-{i}\" stroke=\"{}\" stroke-width=\"{stroke}\" stroke-linecap=\"round\" stroke-linejoin=\"round\" fill=\"none\">",
            hex_color(*color)
        );
        for p in paths {
            write_path(&mut out, p);
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// A channel group read back from an emitted SVG.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgGroup {
    pub stroke: String,
    pub paths: Vec<(Vec<CubicBezier>, bool)>,
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=\"");
    let start = tag.find(&key)? + key.len();
    let len = tag[start..].find('"')?;
    Some(&tag[start..start + len])
}

fn parse_d(d: &str) -> Result<(Vec<CubicBezier>, bool), OutputError> {
    let bad = |why: &str| OutputError::SvgParse(format!("{why} in path data `{d}`"));
    let mut tokens = d.split_whitespace().peekable();
    let num = |tokens: &mut std::iter::Peekable<std::str::SplitWhitespace>| -> Result<f64, OutputError> {
        tokens
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| bad("expected a number"))
    };
    if tokens.next() != Some("M") {
        return Err(bad("missing M"));
    }
    let mut cur = Point::new(num(&mut tokens)?, num(&mut tokens)?);
    let mut segments = Vec::new();
    let mut closed = false;
    while let Some(cmd) = tokens.next() {
        match cmd {
            "C" => {
                let mut p = [Point::default(); 3];
                for q in &mut p {
                    *q = Point::new(num(&mut tokens)?, num(&mut tokens)?);
                }
                segments.push(CubicBezier::new(cur, p[0], p[1], p[2]));
                cur = p[2];
            }
            "Z" => closed = true,
            other => return Err(bad(&format!("unsupported command `{other}`"))),
        }
    }
    Ok((segments, closed))
}

/// Reads back the groups and cubic paths written by [`emit_svg`].
pub fn parse_svg(text: &str) -> Result<Vec<SvgGroup>, OutputError> {
    let mut groups: Vec<SvgGroup> = Vec::new();
    for piece in text.split('<').skip(1) {
        let tag = piece.split('>').next().unwrap_or("");
        if tag.starts_with("g ") {
            let stroke = attr(tag, "stroke").ok_or_else(|| OutputError::SvgParse("group without stroke".into()))?;
            groups.push(SvgGroup {
                stroke: stroke.to_string(),
                paths: Vec::new(),
            });
        } else if tag.starts_with("path ") {
            let d = attr(tag, "d").ok_or_else(|| OutputError::SvgParse("path without d".into()))?;
            let group = groups
                .last_mut()
                .ok_or_else(|| OutputError::SvgParse("path outside a group".into()))?;
            group.paths.push(parse_d(d)?);
        }
    }
    Ok(groups)
}
