//! Intermediate files written by each stage.
//!
//! | file | contents |
//! |------|----------|
//! | `channels.txt` | image size, color mode and palette (`key = value`) |
//! | `channel_<i>.png` | 16-bit gray separation, white = no ink |
//! | `stipples_<i>.csv` | `x,y` per stipple, image px |
//! | `tour_<i>.txt` | stipple indices in visiting order |
//! | `path_<i>.txt` | cubic control points, image px |
//! | `layout.txt` | drawing extent and tiling (`key = value`) |
//! | `<stage>.stats.txt` | per-stage statistics fragment |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma};

use crate::imaging::{DensityField, Palette, PaletteOrigin, Rgb};
use crate::output::parse_key_values;
use crate::pathopt::SplinePath;

pub const CHANNELS_FILE: &str = "channels.txt";
pub const LAYOUT_FILE: &str = "layout.txt";
pub const SVG_FILE: &str = "drawing.svg";
pub const PREVIEW_FILE: &str = "preview.png";
pub const PROGRAM_FILE: &str = "program.txt";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REACHABILITY_FILE: &str = "reachability.csv";
pub const STATS_FILE: &str = "stats.txt";

pub fn channel_png(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("channel_{i}.png"))
}

pub fn stipples_csv(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("stipples_{i}.csv"))
}

pub fn tour_txt(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("tour_{i}.txt"))
}

pub fn path_txt(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("path_{i}.txt"))
}

pub fn fragment_txt(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{stage}.stats.txt"))
}

/// Number of consecutive files `f(dir, 0)`, `f(dir, 1)`, ... present.
pub fn count_channels(dir: &Path, f: fn(&Path, usize) -> PathBuf) -> usize {
    (0..).take_while(|&i| f(dir, i).is_file()).count()
}

/// Image size and palette shared by all stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelsHeader {
    pub width: usize,
    pub height: usize,
    pub palette: Palette,
}

impl ChannelsHeader {
    pub fn to_text(&self) -> String {
        let mode = match self.palette.origin() {
            PaletteOrigin::Cmyk => "cmyk",
            PaletteOrigin::Kmeans => "kmeans",
        };
        let mut s = String::from("# channels v1\n");
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let _ = writeln!(s, "count = {}", self.palette.len());
        for (i, c) in self.palette.colors().iter().enumerate() {
            let _ = writeln!(s, "channel.{i}.color = {} {} {}", c[0], c[1], c[2]);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let kv = parse_key_values(text).map_err(|e| e.to_string())?;
        let origin = match get(&kv, "mode")? {
            "cmyk" => PaletteOrigin::Cmyk,
            "kmeans" => PaletteOrigin::Kmeans,
            other => return Err(format!("field mode: unknown `{other}`")),
        };
        let width = get_num(&kv, "width")?;
        let height = get_num(&kv, "height")?;
        let count: usize = get_num(&kv, "count")?;
        let mut colors = Vec::with_capacity(count);
        for i in 0..count {
            let key = format!("channel.{i}.color");
            let parts: Vec<f64> = get(&kv, &key)?
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| format!("field {key}: not three numbers"))?;
            let c: Rgb = parts
                .try_into()
                .map_err(|_| format!("field {key}: not three numbers"))?;
            colors.push(c);
        }
        let palette = Palette::new(colors, origin).ok_or("field count: palette empty or repeated")?;
        Ok(Self { width, height, palette })
    }
}

pub fn get<'a>(kv: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str, String> {
    kv.get(key).map(String::as_str).ok_or_else(|| format!("field {key}: missing"))
}

pub fn get_num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T, String> {
    get(kv, key)?.parse().map_err(|_| format!("field {key}: not a number"))
}

/// Ink stored inverted so the file looks like the separation it encodes.
pub fn encode_field_png(field: &DensityField) -> Result<Vec<u8>, String> {
    let data: Vec<u16> = field
        .values
        .iter()
        .map(|v| 65535 - (v * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(field.width as u32, field.height as u32, data).ok_or("field buffer size")?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}

pub fn decode_field_png(bytes: &[u8], color: Rgb, index: usize) -> Result<DensityField, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| e.to_string())?
        .into_luma16();
    let values = img.pixels().map(|p| (65535 - p.0[0]) as f64 / 65535.0).collect();
    DensityField::new(img.width() as usize, img.height() as usize, values, color, index).map_err(|e| e.to_string())
}

/// `None` is stored as a path without segments.
pub fn path_to_text(path: Option<&SplinePath>) -> String {
    match path {
        Some(p) => p.to_text(),
        None => "# path v1 segments=0 closed=false\n".into(),
    }
}

pub fn parse_path_text(text: &str) -> Result<Option<SplinePath>, String> {
    let has_segments = text
        .lines()
        .any(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    if !has_segments {
        return Ok(None);
    }
    SplinePath::parse_text(text).map(Some).map_err(|e| e.to_string())
}

/// Drawing placement decided by planning and needed for rendering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    /// Image px.
    pub view_width: f64,
    pub view_height: f64,
    /// mm per image px.
    pub scale: f64,
    pub tiles: usize,
}

impl Layout {
    pub fn width_mm(&self) -> f64 {
        self.view_width * self.scale
    }

    pub fn height_mm(&self) -> f64 {
        self.view_height * self.scale
    }

    pub fn to_text(&self) -> String {
        format!(
            "# layout v1\nview_width = {}\nview_height = {}\nscale = {}\ntiles = {}\n",
            self.view_width, self.view_height, self.scale, self.tiles
        )
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let kv = parse_key_values(text).map_err(|e| e.to_string())?;
        Ok(Self {
            view_width: get_num(&kv, "view_width")?,
            view_height: get_num(&kv, "view_height")?,
            scale: get_num(&kv, "scale")?,
            tiles: get_num(&kv, "tiles")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::pathopt::CubicBezier;

    #[test]
    fn header_round_trip() {
        let palette = Palette::new(vec![[0.1, 0.2, 1.0 / 3.0], [0.9, 0.8, 0.7]], PaletteOrigin::Kmeans).unwrap();
        let h = ChannelsHeader {
            width: 30,
            height: 20,
            palette,
        };
        assert_eq!(ChannelsHeader::parse(&h.to_text()).unwrap(), h);
        let err = ChannelsHeader::parse("mode = cmyk\nwidth = 3\n").unwrap_err();
        assert!(err.contains("height"), "{err}");
    }

    #[test]
    fn field_png_is_exact_after_quantization() {
        let mut f = DensityField::from_fn(7, 5, |x, y| (x * 0.137 + y * 0.071).fract());
        f.quantize_u16();
        let back = decode_field_png(&encode_field_png(&f).unwrap(), f.channel_color, 0).unwrap();
        assert_eq!(back.values, f.values);
    }

    #[test]
    fn empty_path_round_trip() {
        assert_eq!(parse_path_text(&path_to_text(None)).unwrap(), None);
        let (a, b) = (Point::new(0.0, 0.0), Point::new(3.0, 1.0));
        let p = SplinePath::new(vec![CubicBezier::new(a, a.lerp(b, 0.3), a.lerp(b, 0.7), b)], false).unwrap();
        assert_eq!(parse_path_text(&path_to_text(Some(&p))).unwrap(), Some(p));
    }

    #[test]
    fn layout_round_trip() {
        let l = Layout {
            view_width: 512.0,
            view_height: 384.0,
            scale: 0.1 + 0.2,
            tiles: 3,
        };
        assert_eq!(Layout::parse(&l.to_text()).unwrap(), l);
    }
}
