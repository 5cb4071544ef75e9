//! Raster loading and color separation into per-channel ink densities.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;

pub type Rgb = [f64; 3];

pub const CYAN: Rgb = [0.0, 1.0, 1.0];
pub const MAGENTA: Rgb = [1.0, 0.0, 1.0];
pub const YELLOW: Rgb = [1.0, 1.0, 0.0];
pub const BLACK: Rgb = [0.0, 0.0, 0.0];

/// k-means stops after this many Lloyd iterations even without convergence.
pub const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("image has zero width or height")]
    ZeroDimension,
    #[error("pixel buffer holds {got} pixels, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("pixel component out of [0,1] at index {0}")]
    ComponentRange(usize),
    #[error("k = {k} exceeds the pixel count {pixels}")]
    TooManyClusters { k: usize, pixels: usize },
    #[error("k = {k} exceeds the number of distinct colors ({distinct})")]
    TooFewColors { k: usize, distinct: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("point ({x}, {y}) lies outside the {width}x{height} field")]
    OutOfBounds { x: f64, y: f64, width: usize, height: usize },
}

/// Row-major sRGB image with components in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimension);
        }
        if pixels.len() != width * height {
            return Err(ImagingError::BufferSize {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(i) = pixels
            .iter()
            .position(|p| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(ImagingError::ComponentRange(i));
        }
        Ok(Self { width, height, pixels })
    }

    /// Constant-color image.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    /// Box-filter downscale so that neither side exceeds `max_dim`.
    /// Returns a clone when the image already fits.
    pub fn downscale_to(&self, max_dim: usize) -> RasterImage {
        let max_dim = max_dim.max(1);
        let longest = self.width.max(self.height);
        if longest <= max_dim {
            return self.clone();
        }
        let scale = max_dim as f64 / longest as f64;
        let nw = ((self.width as f64 * scale).round() as usize).clamp(1, max_dim);
        let nh = ((self.height as f64 * scale).round() as usize).clamp(1, max_dim);
        let mut out = Vec::with_capacity(nw * nh);
        for oy in 0..nh {
            let y0 = oy * self.height / nh;
            let y1 = ((oy + 1) * self.height / nh).max(y0 + 1);
            for ox in 0..nw {
                let x0 = ox * self.width / nw;
                let x1 = ((ox + 1) * self.width / nw).max(x0 + 1);
                let mut acc = [0.0; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = self.pixel(x, y);
                        for c in 0..3 {
                            acc[c] += p[c];
                        }
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                out.push(acc.map(|v| (v / n).clamp(0.0, 1.0)));
            }
        }
        RasterImage {
            width: nw,
            height: nh,
            pixels: out,
        }
    }
}

/// Per-channel ink density, 1 = full ink.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub channel_color: Rgb,
    pub channel_index: usize,
}

impl DensityField {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        channel_color: Rgb,
        channel_index: usize,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::ZeroDimension);
        }
        if values.len() != width * height {
            return Err(ImagingError::BufferSize {
                expected: width * height,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(ImagingError::ComponentRange(i));
        }
        Ok(Self {
            width,
            height,
            values,
            channel_color,
            channel_index,
        })
    }

    /// Builds a field by evaluating `f` at every pixel center.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x as f64 + 0.5, y as f64 + 0.5).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            values,
            channel_color: BLACK,
            channel_index: 0,
        }
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn total_ink(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Rounds every value to the nearest multiple of 1/65535, the precision
    /// of the 16-bit channel dumps.
    pub fn quantize_u16(&mut self) {
        for v in &mut self.values {
            *v = (*v * 65535.0).round() / 65535.0;
        }
    }

    /// Bilinear lookup with pixel centers at half-integer coordinates.
    /// Queries in the outer half pixel clamp to the edge samples.
    pub fn density_at(&self, p: Point) -> Result<f64, ImagingError> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h) {
            return Err(ImagingError::OutOfBounds {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            });
        }
        let fx = (p.x - 0.5).clamp(0.0, w - 1.0);
        let fy = (p.y - 0.5).clamp(0.0, h - 1.0);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let top = self.value(x0, y0) * (1.0 - tx) + self.value(x1, y0) * tx;
        let bottom = self.value(x0, y1) * (1.0 - tx) + self.value(x1, y1) * tx;
        Ok((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteOrigin {
    Cmyk,
    Kmeans,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    colors: Vec<Rgb>,
    origin: PaletteOrigin,
}

impl Palette {
    /// Fails with `None` on an empty list or duplicate colors.
    pub fn new(colors: Vec<Rgb>, origin: PaletteOrigin) -> Option<Self> {
        if colors.is_empty() {
            return None;
        }
        for i in 0..colors.len() {
            for j in 0..i {
                if colors[i] == colors[j] {
                    return None;
                }
            }
        }
        Some(Self { colors, origin })
    }

    pub fn cmyk() -> Self {
        Self {
            colors: vec![CYAN, MAGENTA, YELLOW, BLACK],
            origin: PaletteOrigin::Cmyk,
        }
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn origin(&self) -> PaletteOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage, ImagingError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ImagingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_image(&bytes)
}

/// Decodes PNG or JPEG bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage, ImagingError> {
    let format = image::guess_format(bytes)
        .map_err(|e| ImagingError::UnsupportedFormat(e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(ImagingError::UnsupportedFormat(format!("{format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| ImagingError::UnsupportedFormat(e.to_string()))?;
    let rgb = decoded.to_rgb32f();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(ImagingError::ZeroDimension);
    }
    let pixels = rgb
        .pixels()
        .map(|p| p.0.map(|c| (c as f64).clamp(0.0, 1.0)))
        .collect();
    RasterImage::new(w as usize, h as usize, pixels)
}

/// (C, M, Y, K) for one sRGB pixel; no under-color removal.
pub fn rgb_to_cmyk(rgb: Rgb) -> [f64; 4] {
    let [r, g, b] = rgb;
    let k = 1.0 - r.max(g).max(b);
    if k >= 1.0 {
        return [0.0, 0.0, 0.0, 1.0];
    }
    let inv = 1.0 - k;
    [
        ((1.0 - r - k) / inv).clamp(0.0, 1.0),
        ((1.0 - g - k) / inv).clamp(0.0, 1.0),
        ((1.0 - b - k) / inv).clamp(0.0, 1.0),
        k,
    ]
}

pub fn cmyk_to_rgb(cmyk: [f64; 4]) -> Rgb {
    let [c, m, y, k] = cmyk;
    [(1.0 - c) * (1.0 - k), (1.0 - m) * (1.0 - k), (1.0 - y) * (1.0 - k)]
}

/// Separates the image into fields ordered C, M, Y, K.
pub fn split_cmyk(img: &RasterImage) -> Vec<DensityField> {
    let n = img.pixels.len();
    let mut planes = vec![Vec::with_capacity(n); 4];
    for &p in &img.pixels {
        for (plane, v) in planes.iter_mut().zip(rgb_to_cmyk(p)) {
            plane.push(v);
        }
    }
    planes
        .into_iter()
        .zip([CYAN, MAGENTA, YELLOW, BLACK])
        .enumerate()
        .map(|(i, (values, color))| DensityField {
            width: img.width,
            height: img.height,
            values,
            channel_color: color,
            channel_index: i,
        })
        .collect()
}

/// Rec. 709 weights applied to the stored (nonlinear) components.
pub fn luminance(c: Rgb) -> f64 {
    0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]
}

fn color_dist_sq(a: Rgb, b: Rgb) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Index of the closest center, ties to the lowest index.
pub fn nearest_center(c: Rgb, centers: &[Rgb]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &m) in centers.iter().enumerate() {
        let d = color_dist_sq(c, m);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Seeded k-means++ seeding over pixel colors.
pub fn kmeans_plus_plus(colors: &[Rgb], k: usize, seed: u64) -> Result<Vec<Rgb>, ImagingError> {
    if k == 0 {
        return Err(ImagingError::ZeroClusters);
    }
    if k > colors.len() {
        return Err(ImagingError::TooManyClusters {
            k,
            pixels: colors.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![colors[rng.random_range(0..colors.len())]];
    let mut d2: Vec<f64> = colors.iter().map(|&c| color_dist_sq(c, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(ImagingError::TooFewColors {
                k,
                distinct: centers.len(),
            });
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = colors.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 && target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        // Float round-off can run off the end; fall back to the last candidate with weight.
        if d2[pick] <= 0.0 {
            pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
        }
        let c = colors[pick];
        centers.push(c);
        for (d, &col) in d2.iter_mut().zip(colors) {
            *d = d.min(color_dist_sq(col, c));
        }
    }
    Ok(centers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Rgb>,
    pub labels: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd iterations from the given centers until no label changes or the
/// iteration cap. Empty clusters keep their previous center.
pub fn kmeans_from(colors: &[Rgb], mut centers: Vec<Rgb>, max_iterations: usize) -> KMeansResult {
    let mut labels: Vec<usize> = colors.iter().map(|&c| nearest_center(c, &centers)).collect();
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut sums = vec![[0.0; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&c, &l) in colors.iter().zip(&labels) {
            counts[l] += 1;
            for ch in 0..3 {
                sums[l][ch] += c[ch];
            }
        }
        for (i, center) in centers.iter_mut().enumerate() {
            if counts[i] > 0 {
                *center = sums[i].map(|s| s / counts[i] as f64);
            }
        }
        let mut changed = false;
        for (l, &c) in labels.iter_mut().zip(colors) {
            let nl = nearest_center(c, &centers);
            if nl != *l {
                *l = nl;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    KMeansResult {
        centers,
        labels,
        iterations,
    }
}

pub fn kmeans(colors: &[Rgb], k: usize, seed: u64) -> Result<KMeansResult, ImagingError> {
    let init = kmeans_plus_plus(colors, k, seed)?;
    Ok(kmeans_from(colors, init, KMEANS_MAX_ITERATIONS))
}

/// Learned-palette separation: one field per k-means cluster, weighted by
/// the pixel's darkness relative to its cluster center.
pub fn split_kmeans(
    img: &RasterImage,
    k: usize,
    seed: u64,
) -> Result<(Palette, Vec<DensityField>), ImagingError> {
    let km = kmeans(&img.pixels, k, seed)?;
    let fields = kmeans_fields(img, &km);
    let palette = Palette::new(km.centers.clone(), PaletteOrigin::Kmeans).ok_or(
        ImagingError::TooFewColors {
            k,
            distinct: dedup_count(&km.centers),
        },
    )?;
    Ok((palette, fields))
}

fn dedup_count(centers: &[Rgb]) -> usize {
    let mut v: Vec<Rgb> = Vec::new();
    for c in centers {
        if !v.contains(c) {
            v.push(*c);
        }
    }
    v.len()
}

/// Fields for a finished clustering. A cluster whose center is white carries
/// no ink.
pub fn kmeans_fields(img: &RasterImage, km: &KMeansResult) -> Vec<DensityField> {
    let center_ink: Vec<f64> = km.centers.iter().map(|&c| 1.0 - luminance(c)).collect();
    (0..km.centers.len())
        .map(|i| {
            let values = img
                .pixels
                .iter()
                .zip(&km.labels)
                .map(|(&p, &l)| {
                    if l != i || center_ink[i] <= 1e-9 {
                        0.0
                    } else {
                        ((1.0 - luminance(p)) / center_ink[i]).clamp(0.0, 1.0)
                    }
                })
                .collect();
            DensityField {
                width: img.width,
                height: img.height,
                values,
                channel_color: km.centers[i],
                channel_index: i,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const RED: Rgb = [1.0, 0.0, 0.0];
    const BLUE: Rgb = [0.0, 0.0, 1.0];

    fn png_bytes(w: u32, h: u32, data: &[u8]) -> Vec<u8> {
        let img = image::RgbImage::from_raw(w, h, data.to_vec()).unwrap();
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
        buf.into_inner()
    }

    #[test]
    fn decodes_white_pixel() {
        let img = decode_image(&png_bytes(1, 1, &[255, 255, 255])).unwrap();
        assert_eq!((img.width(), img.height()), (1, 1));
        assert_eq!(img.pixels(), &[[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn decodes_black_and_red() {
        let img = decode_image(&png_bytes(2, 1, &[0, 0, 0, 255, 0, 0])).unwrap();
        assert_eq!(img.pixels(), &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn corrupt_bytes_are_unsupported() {
        let err = decode_image(b"definitely not an image").unwrap_err();
        assert!(err.to_string().starts_with("unsupported format"), "{err}");
        let mut png = png_bytes(2, 2, &[0; 12]);
        png.truncate(30);
        assert!(matches!(decode_image(&png), Err(ImagingError::UnsupportedFormat(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_image("/nonexistent/x.png"), Err(ImagingError::Io { .. })));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(RasterImage::new(0, 3, vec![]), Err(ImagingError::ZeroDimension)));
    }

    #[test]
    fn cmyk_reference_colors() {
        assert_eq!(rgb_to_cmyk(RED), [0.0, 1.0, 1.0, 0.0]);
        assert_eq!(rgb_to_cmyk([1.0, 1.0, 1.0]), [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(rgb_to_cmyk([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cmyk_fields_are_ordered() {
        let img = RasterImage::filled(2, 2, RED).unwrap();
        let fields = split_cmyk(&img);
        assert_eq!(fields.len(), 4);
        let colors: Vec<Rgb> = fields.iter().map(|f| f.channel_color).collect();
        assert_eq!(colors, vec![CYAN, MAGENTA, YELLOW, BLACK]);
        assert_eq!(fields[1].values, vec![1.0; 4]);
        assert_eq!(fields[0].values, vec![0.0; 4]);
    }

    proptest! {
        #[test]
        fn cmyk_round_trip(r in 0.0..=1.0f64, g in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let back = cmyk_to_rgb(rgb_to_cmyk([r, g, b]));
            prop_assert!((back[0] - r).abs() < 1e-6);
            prop_assert!((back[1] - g).abs() < 1e-6);
            prop_assert!((back[2] - b).abs() < 1e-6);
        }
    }

    #[test]
    fn kmeans_separates_two_colors() {
        let pixels: Vec<Rgb> = (0..20).map(|i| if i % 3 == 0 { RED } else { BLUE }).collect();
        let img = RasterImage::new(5, 4, pixels.clone()).unwrap();
        let (palette, fields) = split_kmeans(&img, 2, 7).unwrap();
        let mut colors = palette.colors().to_vec();
        colors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(colors, vec![BLUE, RED]);
        for f in &fields {
            for (v, p) in f.values.iter().zip(&pixels) {
                let expect = if *p == f.channel_color { 1.0 } else { 0.0 };
                assert_eq!(*v, expect);
            }
        }
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let pixels = vec![[0.2, 0.4, 0.6], [0.4, 0.6, 0.8], [0.0, 0.2, 0.4], [0.6, 0.8, 1.0]];
        let img = RasterImage::new(2, 2, pixels).unwrap();
        let (palette, fields) = split_kmeans(&img, 1, 1).unwrap();
        assert_eq!(fields.len(), 1);
        let m = palette.colors()[0];
        for (got, want) in m.iter().zip([0.3, 0.5, 0.7]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(fields[0].values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn kmeans_errors() {
        let img = RasterImage::filled(2, 1, RED).unwrap();
        assert!(matches!(split_kmeans(&img, 3, 0), Err(ImagingError::TooManyClusters { .. })));
        assert!(matches!(split_kmeans(&img, 2, 0), Err(ImagingError::TooFewColors { .. })));
        assert!(matches!(split_kmeans(&img, 0, 0), Err(ImagingError::ZeroClusters)));
    }

    /// Plain Lloyd loop written independently of `kmeans_from`.
    fn lloyd_oracle(colors: &[Rgb], mut centers: Vec<Rgb>) -> Vec<usize> {
        let k = centers.len();
        let assign = |centers: &[Rgb]| -> Vec<usize> {
            colors
                .iter()
                .map(|c| {
                    let mut best = 0;
                    for j in 1..k {
                        if color_dist_sq(*c, centers[j]) < color_dist_sq(*c, centers[best]) {
                            best = j;
                        }
                    }
                    best
                })
                .collect()
        };
        let mut labels = assign(&centers);
        loop {
            for (j, center) in centers.iter_mut().enumerate() {
                let members: Vec<&Rgb> = colors.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(c, _)| c).collect();
                if !members.is_empty() {
                    for ch in 0..3 {
                        center[ch] = members.iter().map(|m| m[ch]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
            let next = assign(&centers);
            if next == labels {
                return labels;
            }
            labels = next;
        }
    }

    #[test]
    fn kmeans_matches_lloyd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bases = [[0.9, 0.1, 0.1], [0.1, 0.8, 0.2], [0.2, 0.2, 0.9]];
        let colors: Vec<Rgb> = (0..100)
            .map(|i| bases[i % 3].map(|c: f64| (c + rng.random_range(-0.15..0.15)).clamp(0.0, 1.0)))
            .collect();
        let init = kmeans_plus_plus(&colors, 3, 5).unwrap();
        let got = kmeans_from(&colors, init.clone(), KMEANS_MAX_ITERATIONS);
        assert_eq!(got.labels, lloyd_oracle(&colors, init));
    }

    #[test]
    fn kmeans_partitions_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pixels: Vec<Rgb> = (0..64).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let img = RasterImage::new(8, 8, pixels).unwrap();
        let a = kmeans(img.pixels(), 4, 99).unwrap();
        let b = kmeans(img.pixels(), 4, 99).unwrap();
        assert_eq!(a, b);
        let (pa, fa) = split_kmeans(&img, 4, 99).unwrap();
        let (pb, fb) = split_kmeans(&img, 4, 99).unwrap();
        assert_eq!((pa, fa.clone()), (pb, fb));
        for (i, &l) in a.labels.iter().enumerate() {
            for (j, f) in fa.iter().enumerate() {
                if j != l {
                    assert_eq!(f.values[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn bilinear_lookup() {
        let f = DensityField::new(2, 1, vec![0.0, 1.0], BLACK, 0).unwrap();
        assert_eq!(f.density_at(Point::new(0.5, 0.5)).unwrap(), 0.0);
        assert_eq!(f.density_at(Point::new(1.5, 0.5)).unwrap(), 1.0);
        assert!((f.density_at(Point::new(1.0, 0.5)).unwrap() - 0.5).abs() < 1e-12);
        let c = DensityField::new(3, 3, vec![0.25; 9], BLACK, 0).unwrap();
        assert_eq!(c.density_at(Point::new(0.0, 0.0)).unwrap(), 0.25);
        assert_eq!(c.density_at(Point::new(3.0, 3.0)).unwrap(), 0.25);
        assert!(matches!(c.density_at(Point::new(3.1, 0.0)), Err(ImagingError::OutOfBounds { .. })));
    }

    #[test]
    fn downscale_box_filter() {
        let pixels: Vec<Rgb> = (0..16).map(|i| if i % 2 == 0 { [1.0; 3] } else { [0.0; 3] }).collect();
        let img = RasterImage::new(4, 4, pixels).unwrap();
        let small = img.downscale_to(2);
        assert_eq!((small.width(), small.height()), (2, 2));
        assert!(small.pixels().iter().all(|p| (p[0] - 0.5).abs() < 1e-12));
        assert_eq!(img.downscale_to(4), img);
    }
}
