//! Binary masks, polygon rasterization and PGM/CSV ingestion.
//!
//! Pixel `(col, row)` covers the unit square whose centre is
//! `(col + 0.5, row + 0.5)` in pixel coordinates.

use std::io::Write;

use super::PoseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(col, row));
            }
        }
        Mask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        col < self.width && row < self.height && self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, on: bool) {
        assert!(col < self.width && row < self.height, "pixel ({col}, {row}) out of bounds");
        self.bits[row * self.width + col] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels as `(col, row)`, row-major.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Copy shifted by whole pixels onto a canvas enlarged to fit.
    pub fn translated(&self, dx: usize, dy: usize) -> Mask {
        let mut out = Mask::new(self.width + dx, self.height + dy);
        for (c, r) in self.foreground() {
            out.set(c + dx, r + dy, true);
        }
        out
    }

    /// Point reflection through the canvas centre.
    pub fn rotated_180(&self) -> Mask {
        Mask::from_fn(self.width, self.height, |c, r| {
            self.get(self.width - 1 - c, self.height - 1 - r)
        })
    }

    /// Binary PGM (P5). Pixels at or above half intensity are foreground.
    pub fn from_pgm(data: &[u8]) -> Result<Mask, PoseError> {
        let mut pos = 0;
        let magic = pgm_token(data, &mut pos)?;
        if magic != b"P5" {
            return Err(PoseError::Format("not a binary PGM (P5)".into()));
        }
        let width = pgm_number(data, &mut pos)?;
        let height = pgm_number(data, &mut pos)?;
        let maxval = pgm_number(data, &mut pos)?;
        if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
            return Err(PoseError::Format(format!(
                "bad PGM header {width}x{height} maxval {maxval}"
            )));
        }
        // exactly one whitespace byte before the raster
        pos += 1;
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let need = width * height * bytes_per;
        let raster = data
            .get(pos..pos + need)
            .ok_or_else(|| PoseError::Format("truncated PGM raster".into()))?;
        let threshold = 128.0 / 255.0 * maxval as f64;
        let bits = (0..width * height)
            .map(|i| {
                let v = if bytes_per == 1 {
                    raster[i] as usize
                } else {
                    ((raster[2 * i] as usize) << 8) | raster[2 * i + 1] as usize
                };
                v as f64 >= threshold
            })
            .collect();
        Ok(Mask { width, height, bits })
    }

    /// 8-bit P5 with foreground 255 and background 0.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bits.len() + 32);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("write to vec");
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }
}

fn pgm_skip(data: &[u8], pos: &mut usize) {
    while *pos < data.len() {
        match data[*pos] {
            b'#' => {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn pgm_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8], PoseError> {
    pgm_skip(data, pos);
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(PoseError::Format("truncated PGM header".into()));
    }
    Ok(&data[start..*pos])
}

fn pgm_number(data: &[u8], pos: &mut usize) -> Result<usize, PoseError> {
    let tok = pgm_token(data, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PoseError::Format("bad number in PGM header".into()))
}

/// Parses `x,y` lines; blank lines, `#` comments and a non-numeric header are skipped.
pub fn parse_contour_csv(text: &str) -> Result<Vec<[f64; 2]>, PoseError> {
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(PoseError::Format(format!("line {}: expected `x,y`", n + 1)));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => pts.push([x, y]),
            _ if pts.is_empty() && n == 0 => continue,
            _ => return Err(PoseError::Format(format!("line {}: bad coordinates", n + 1))),
        }
    }
    Ok(pts)
}

/// Rasterizes a closed polygon with the even-odd rule, sampling pixel centres.
///
/// `scale` is pixels per contour unit. The canvas spans `[0, ceil(max * scale)]`
/// on each axis; parts of the polygon at negative coordinates are clipped.
pub fn mask_from_contour(points: &[[f64; 2]], scale: f64) -> Result<Mask, PoseError> {
    if points.len() < 3 {
        return Err(PoseError::DegeneratePolygon(format!("{} point(s)", points.len())));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(PoseError::Format(format!("scale must be positive, got {scale}")));
    }
    let area2: f64 = points
        .iter()
        .zip(points.iter().cycle().skip(1))
        .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
        .sum();
    let extent = points.iter().fold(0.0_f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    if area2.abs() <= 1e-12 * extent.max(1.0).powi(2) {
        return Err(PoseError::DegeneratePolygon("zero area (collinear points)".into()));
    }

    let px: Vec<[f64; 2]> = points.iter().map(|p| [p[0] * scale, p[1] * scale]).collect();
    let max_x = px.iter().map(|p| p[0]).fold(0.0, f64::max);
    let max_y = px.iter().map(|p| p[1]).fold(0.0, f64::max);
    let width = (max_x.ceil() as usize).max(1);
    let height = (max_y.ceil() as usize).max(1);
    let mut mask = Mask::new(width, height);

    let mut xs = Vec::new();
    for row in 0..height {
        let yc = row as f64 + 0.5;
        xs.clear();
        for (a, b) in px.iter().zip(px.iter().cycle().skip(1)) {
            // half-open in y so shared vertices count once
            if (a[1] <= yc) != (b[1] <= yc) {
                let t = (yc - a[1]) / (b[1] - a[1]);
                xs.push(a[0] + t * (b[0] - a[0]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            // pixel centres c + 0.5 in [x0, x1)
            let first = (span[0] - 0.5).ceil().max(0.0) as usize;
            let last = (span[1] - 0.5).ceil().min(width as f64);
            let last = if last < 0.0 { 0 } else { last as usize };
            for col in first..last {
                mask.set(col, row, true);
            }
        }
    }
    Ok(mask)
}
