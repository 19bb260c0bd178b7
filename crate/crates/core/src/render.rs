//! Grayscale rasterization of weighted point sets, quadtree overlays and
//! binary PGM output.

use std::io::{self, Write};

use thiserror::Error;

use crate::system::{PointBuffer, Region};

/// Intensity of the faintest drawn point.
pub const MIN_INTENSITY: u8 = 64;
pub const MAX_INTENSITY: u8 = 255;
/// Intensity of quadtree cell borders.
pub const OVERLAY_INTENSITY: u8 = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("degenerate drawing region or zero-sized image")]
    DegenerateRegion,
    #[error("malformed tree dump at line {line}: {message}")]
    MalformedDump { line: usize, message: String },
}

/// How point weights become intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// `p` in `(0, p_max]` maps linearly to `[64, 255]`; `p <= 0` is skipped.
    Classic,
    /// `p` in `[p_min, 0]` maps linearly to `[64, 255]`; `-inf` is skipped.
    Idempotent,
    /// Every point at full intensity.
    Attractor,
}

/// Row-major 8-bit image; row 0 is the top (largest `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub region: Region,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, region: Region) -> Result<Self, RenderError> {
        if width == 0 || height == 0 || !region.is_well_formed() {
            return Err(RenderError::DegenerateRegion);
        }
        Ok(ImageGrid {
            width,
            height,
            pixels: vec![0; width * height],
            region,
        })
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    fn raise(&mut self, col: usize, row: usize, value: u8) {
        let px = &mut self.pixels[row * self.width + col];
        *px = (*px).max(value);
    }

    pub fn column_of(&self, x: f64) -> usize {
        let r = &self.region;
        scale(x - r.a, r.b - r.a, self.width)
    }

    pub fn row_of(&self, y: f64) -> usize {
        let r = &self.region;
        scale(r.d - y, r.d - r.c, self.height)
    }

    pub fn lit_pixels(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0).count()
    }
}

fn scale(offset: f64, extent: f64, size: usize) -> usize {
    let t = (offset / extent * size as f64).floor();
    if t.is_nan() || t < 0.0 {
        0
    } else {
        (t as usize).min(size - 1)
    }
}

fn lerp_intensity(t: f64) -> u8 {
    let span = f64::from(MAX_INTENSITY - MIN_INTENSITY);
    let v = f64::from(MIN_INTENSITY) + (t.clamp(0.0, 1.0) * span).round();
    v as u8
}

/// Draws every point of `buffer` into a fresh `width x height` image of
/// `region`. Points outside the region are clamped to the border; when
/// several points share a pixel the brightest wins.
pub fn rasterize(
    buffer: &PointBuffer,
    region: Region,
    width: usize,
    height: usize,
    mode: RenderMode,
) -> Result<ImageGrid, RenderError> {
    let mut image = ImageGrid::new(width, height, region)?;
    let finite = |p: &&crate::system::WeightedPoint| p.x.is_finite() && p.y.is_finite();

    let intensity: Box<dyn Fn(f64) -> Option<u8>> = match mode {
        RenderMode::Attractor => Box::new(|_| Some(MAX_INTENSITY)),
        RenderMode::Classic => {
            let p_max = buffer
                .iter()
                .filter(finite)
                .map(|p| p.p)
                .filter(|p| *p > 0.0)
                .fold(0.0f64, f64::max);
            Box::new(move |p| (p > 0.0).then(|| lerp_intensity(p / p_max)))
        }
        RenderMode::Idempotent => {
            let p_min = buffer
                .iter()
                .filter(finite)
                .map(|p| p.p)
                .filter(|p| p.is_finite())
                .fold(0.0f64, f64::min);
            Box::new(move |p| {
                if p.is_nan() || p == f64::NEG_INFINITY {
                    None
                } else if p_min == 0.0 {
                    Some(MAX_INTENSITY)
                } else {
                    Some(lerp_intensity((p - p_min) / -p_min))
                }
            })
        }
    };

    for point in buffer.iter().filter(finite) {
        if let Some(v) = intensity(point.p) {
            let (col, row) = (image.column_of(point.x), image.row_of(point.y));
            image.raise(col, row, v);
        }
    }
    Ok(image)
}

/// Draws the border of every rectangle listed in a tree dump (lines
/// `depth path a b c d n_points`) and returns the number drawn.
pub fn overlay_quadtree(image: &mut ImageGrid, dump: &str) -> Result<usize, RenderError> {
    let mut rects = Vec::new();
    for (i, line) in dump.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: &str| RenderError::MalformedDump {
            line: line_no,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(bad(&format!("expected 7 fields, found {}", fields.len())));
        }
        fields[0].parse::<u32>().map_err(|_| bad("bad depth"))?;
        if !fields[1].starts_with('R') || !fields[1][1..].bytes().all(|b| (b'0'..=b'3').contains(&b)) {
            return Err(bad("bad node path"));
        }
        let mut coords = [0.0; 4];
        for (slot, field) in coords.iter_mut().zip(&fields[2..6]) {
            *slot = field.parse::<f64>().map_err(|_| bad("bad coordinate"))?;
        }
        fields[6].parse::<u64>().map_err(|_| bad("bad point count"))?;
        let [a, b, c, d] = coords;
        if !(a <= b && c <= d) {
            return Err(bad("inverted rectangle"));
        }
        rects.push(coords);
    }

    for &[a, b, c, d] in &rects {
        let (left, right) = (image.column_of(a), image.column_of(b));
        let (top, bottom) = (image.row_of(d), image.row_of(c));
        for col in left..=right {
            image.raise(col, top, OVERLAY_INTENSITY);
            image.raise(col, bottom, OVERLAY_INTENSITY);
        }
        for row in top..=bottom {
            image.raise(left, row, OVERLAY_INTENSITY);
            image.raise(right, row, OVERLAY_INTENSITY);
        }
    }
    Ok(rects.len())
}

/// Binary PGM (`P5`, maxval 255).
pub fn write_pgm<W: Write>(image: &ImageGrid, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    write!(out, "P5\n{} {}\n255\n", image.width, image.height)?;
    out.write_all(&image.pixels)?;
    out.flush()
}
