//! Minimal PNG line plots for training curves and benchmark bars.
//! No text rendering; series are distinguished by a fixed palette with
//! legend swatches in the top-right corner.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::BenchError;

pub const PALETTE: [[u8; 3]; 6] = [
    [214, 69, 65],
    [31, 119, 180],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [23, 190, 207],
];

const MARGIN: u32 = 40;
const BG: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([30, 30, 30]);

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn of(points: Vec<(f64, f64)>) -> Self {
        Series { points }
    }

    pub fn from_ys(ys: &[f64]) -> Self {
        Series {
            points: ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect(),
        }
    }
}

fn draw_line(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), color: Rgb<u8>) {
    let (mut x0, mut y0) = a;
    let (x1, y1) = b;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x0 >= 0 && y0 >= 0 && (x0 as u32) < img.width() && (y0 as u32) < img.height() {
            img.put_pixel(x0 as u32, y0 as u32, color);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            xr = (xr.0.min(x), xr.1.max(x));
            yr = (yr.0.min(y), yr.1.max(y));
        }
    }
    if xr.0 == xr.1 {
        xr = (xr.0 - 0.5, xr.1 + 0.5);
    }
    if yr.0 == yr.1 {
        yr = (yr.0 - 0.5, yr.1 + 0.5);
    }
    (xr, yr)
}

/// Render `series` as polylines into a `width`×`height` PNG.
pub fn render_lines(series: &[Series], width: u32, height: u32) -> Result<RgbImage, BenchError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(BenchError::Empty("plot needs at least one point"));
    }
    assert!(width > 2 * MARGIN && height > 2 * MARGIN, "plot too small");
    let mut img = RgbImage::from_pixel(width, height, BG);
    let (xr, yr) = bounds(series);
    let w = (width - 2 * MARGIN) as f64;
    let h = (height - 2 * MARGIN) as f64;
    let to_px = |x: f64, y: f64| -> (i64, i64) {
        let px = MARGIN as f64 + (x - xr.0) / (xr.1 - xr.0) * w;
        let py = (height - MARGIN) as f64 - (y - yr.0) / (yr.1 - yr.0) * h;
        (px.round() as i64, py.round() as i64)
    };

    let origin = (MARGIN as i64, (height - MARGIN) as i64);
    draw_line(&mut img, origin, ((width - MARGIN) as i64, origin.1), AXIS);
    draw_line(&mut img, origin, (origin.0, MARGIN as i64), AXIS);

    for (si, s) in series.iter().enumerate() {
        let color = Rgb(PALETTE[si % PALETTE.len()]);
        for pair in s.points.windows(2) {
            draw_line(&mut img, to_px(pair[0].0, pair[0].1), to_px(pair[1].0, pair[1].1), color);
        }
        if s.points.len() == 1 {
            let (px, py) = to_px(s.points[0].0, s.points[0].1);
            draw_line(&mut img, (px - 2, py), (px + 2, py), color);
        }
        // Legend swatch.
        let x0 = width - MARGIN - 18;
        let y0 = 10 + 10 * si as u32;
        for dx in 0..12u32 {
            for dy in 0..6u32 {
                img.put_pixel(x0 + dx, y0 + dy, color);
            }
        }
    }
    Ok(img)
}

pub fn save_lines(
    series: &[Series],
    width: u32,
    height: u32,
    path: &Path,
) -> Result<(), BenchError> {
    let img = render_lines(series, width, height)?;
    img.save(path)?;
    Ok(())
}
