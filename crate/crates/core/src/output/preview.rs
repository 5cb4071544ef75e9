use image::{ImageBuffer, ImageFormat, Rgb as PngRgb};

use super::OutputError;
use crate::geom::{point_segment_distance, Point};
use crate::imaging::{RasterImage, Rgb};
use crate::pathopt::{sample_path, SplinePath};

/// Smallest preview width accepted.
pub const MIN_PREVIEW_WIDTH: usize = 16;

/// One pen's strokes in source units. A single-point stroke is a dot.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub color: Rgb,
    pub strokes: Vec<Vec<Point>>,
}

impl Layer {
    /// Samples every spline at `spacing` source units.
    pub fn from_paths(color: Rgb, paths: &[SplinePath], spacing: f64) -> Self {
        Self {
            color,
            strokes: paths.iter().map(|p| sample_path(p, spacing).vertices).collect(),
        }
    }

    pub fn from_dots(color: Rgb, points: &[Point]) -> Self {
        Self {
            color,
            strokes: points.iter().map(|&p| vec![p]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreviewSpec {
    /// Source extent that maps onto the raster.
    pub source_width: f64,
    pub source_height: f64,
    pub width_px: usize,
    /// Stroke (or dot) diameter in output pixels.
    pub stroke_px: f64,
}

fn splat_segment(cov: &mut [f64], w: usize, h: usize, a: Point, b: Point, radius: f64) {
    let pad = radius + 1.0;
    let x0 = (a.x.min(b.x) - pad).floor().max(0.0) as usize;
    let y0 = (a.y.min(b.y) - pad).floor().max(0.0) as usize;
    let x1 = ((a.x.max(b.x) + pad).ceil().max(0.0) as usize).min(w);
    let y1 = ((a.y.max(b.y) + pad).ceil().max(0.0) as usize).min(h);
    for y in y0..y1 {
        for x in x0..x1 {
            let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            // Linear falloff over one pixel approximates box-filtered area.
            let a_px = (radius + 0.5 - point_segment_distance(c, a, b)).clamp(0.0, 1.0);
            let slot = &mut cov[y * w + x];
            *slot = slot.max(a_px);
        }
    }
}

/// Anti-aliased raster preview. Layers composite multiplicatively over
/// white: each pixel is scaled by `1 - coverage × (1 - color)` per layer.
pub fn render_preview(layers: &[Layer], spec: &PreviewSpec) -> Result<RasterImage, OutputError> {
    if spec.width_px < MIN_PREVIEW_WIDTH {
        return Err(OutputError::PreviewTooSmall(spec.width_px));
    }
    if !(spec.source_width > 0.0 && spec.source_height > 0.0) {
        return Err(OutputError::InvalidParams("preview source extent must be positive".into()));
    }
    let w = spec.width_px;
    let scale = w as f64 / spec.source_width;
    let h = ((spec.source_height * scale).round() as usize).max(1);
    let radius = spec.stroke_px.max(0.0) / 2.0;
    let mut pixels = vec![[1.0; 3]; w * h];
    let mut cov = vec![0.0; w * h];
    for layer in layers {
        cov.iter_mut().for_each(|c| *c = 0.0);
        for stroke in &layer.strokes {
            let pts: Vec<Point> = stroke.iter().map(|&p| p * scale).collect();
            match pts.len() {
                0 => {}
                1 => splat_segment(&mut cov, w, h, pts[0], pts[0], radius),
                _ => pts.windows(2).for_each(|s| splat_segment(&mut cov, w, h, s[0], s[1], radius)),
            }
        }
        for (px, &c) in pixels.iter_mut().zip(&cov) {
            for k in 0..3 {
                px[k] *= 1.0 - c * (1.0 - layer.color[k]);
            }
        }
    }
    Ok(RasterImage::new(w, h, pixels).expect("dimensions are positive and components in range"))
}

/// 8-bit RGB PNG bytes.
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>, OutputError> {
    let buf: ImageBuffer<PngRgb<u8>, Vec<u8>> = ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let p = img.pixel(x as usize, y as usize);
        PngRgb(p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
    });
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| OutputError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{decode_image, BLACK, CYAN, MAGENTA};

    fn spec() -> PreviewSpec {
        PreviewSpec {
            source_width: 64.0,
            source_height: 64.0,
            width_px: 64,
            stroke_px: 2.0,
        }
    }

    #[test]
    fn empty_is_white() {
        let img = render_preview(&[], &spec()).unwrap();
        assert!(img.pixels().iter().all(|p| *p == [1.0; 3]));
        assert!(matches!(
            render_preview(&[], &PreviewSpec { width_px: 8, ..spec() }),
            Err(OutputError::PreviewTooSmall(8))
        ));
    }

    #[test]
    fn diagonal_band_only() {
        let layer = Layer {
            color: BLACK,
            strokes: vec![vec![Point::new(0.0, 0.0), Point::new(64.0, 64.0)]],
        };
        let img = render_preview(&[layer], &spec()).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let off = (x as f64 - y as f64).abs() / 2f64.sqrt();
                let v = img.pixel(x, y)[0];
                if off > 2.5 {
                    assert_eq!(v, 1.0, "({x},{y})");
                }
                if x == y {
                    assert!(v < 0.05);
                }
            }
        }
    }

    #[test]
    fn overlap_is_darker() {
        let line = |c| Layer {
            color: c,
            strokes: vec![vec![Point::new(0.0, 32.0), Point::new(64.0, 32.0)]],
        };
        let cross = Layer {
            color: MAGENTA,
            strokes: vec![vec![Point::new(32.0, 0.0), Point::new(32.0, 64.0)]],
        };
        let img = render_preview(&[line(CYAN), cross], &spec()).unwrap();
        let lum = |p: Rgb| p.iter().sum::<f64>();
        let both = lum(img.pixel(32, 32));
        assert!(both < lum(img.pixel(10, 32)) && both < lum(img.pixel(32, 10)));
    }

    #[test]
    fn png_round_trip() {
        let layer = Layer::from_dots(BLACK, &[Point::new(10.5, 10.5)]);
        let img = render_preview(&[layer], &spec()).unwrap();
        let back = decode_image(&encode_png(&img).unwrap()).unwrap();
        assert_eq!((back.width(), back.height()), (64, 64));
        assert!(back.pixel(10, 10)[0] < 0.1 && back.pixel(40, 40)[0] == 1.0);
    }
}
