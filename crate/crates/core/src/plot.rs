//! Minimal raster plotting on top of the `image` crate: heatmaps with a
//! fixed diverging color scale, scatter plots, and line charts. Figures are
//! glance aids; the numeric truth always lives in a CSV written next to
//! them, so the renderer favors determinism over typography.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::ArrayView2;

use crate::{Error, Result};

/// 5x7 bitmap glyphs; bit 4 of each row byte is the leftmost column.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '+' => [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        '%' => [0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13],
        '/' => [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        ' ' => [0x00; 7],
        _ => [0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F],
    }
}

pub const GLYPH_W: u32 = 6;
pub const GLYPH_H: u32 = 8;

/// Render `text` with the top-left corner at (x, y); pixels outside the
/// image are silently dropped.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for (ci, c) in text.chars().enumerate() {
        let rows = glyph(c);
        let gx = x + ci as i64 * GLYPH_W as i64;
        for (ry, row) in rows.iter().enumerate() {
            for cx in 0..5i64 {
                if row & (0x10 >> cx) != 0 {
                    let (px, py) = (gx + cx, y + ry as i64);
                    if px >= 0 && px < w && py >= 0 && py < h {
                        img.put_pixel(px as u32, py as u32, Rgb(color));
                    }
                }
            }
        }
    }
}

pub fn text_width(text: &str) -> u32 {
    text.chars().count() as u32 * GLYPH_W
}

/// Blue-white-red diverging map over [vmin, vmax]; values clamp to the ends
/// and the high end is red.
pub fn diverging_color(v: f64, vmin: f64, vmax: f64) -> [u8; 3] {
    let lo = [59.0, 76.0, 192.0];
    let mid = [245.0, 245.0, 245.0];
    let hi = [180.0, 4.0, 38.0];
    let t = if vmax > vmin {
        ((v - vmin) / (vmax - vmin)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let (a, b, u) = if t < 0.5 {
        (lo, mid, t * 2.0)
    } else {
        (mid, hi, (t - 0.5) * 2.0)
    };
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = (a[i] + (b[i] - a[i]) * u).round() as u8;
    }
    out
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    img.save(path)
        .map_err(|e| Error::Run(format!("cannot write image {}: {e}", path.display())))
}

fn draw_line(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && x < w && y >= 0 && y < h {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn fill_rect(img: &mut RgbImage, x: i64, y: i64, w: i64, h: i64, color: [u8; 3]) {
    let (iw, ih) = (img.width() as i64, img.height() as i64);
    for py in y.max(0)..(y + h).min(ih) {
        for px in x.max(0)..(x + w).min(iw) {
            img.put_pixel(px as u32, py as u32, Rgb(color));
        }
    }
}

/// Compact tick label: plain decimal in a sane range, scientific outside it.
pub fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Square heatmap of `values` on the fixed scale [vmin, vmax], red high.
/// `boundaries` are row/column indices before which a separator line is
/// drawn (group edges in a sorted similarity matrix).
pub fn save_heatmap(
    path: &Path,
    values: ArrayView2<f64>,
    vmin: f64,
    vmax: f64,
    boundaries: &[usize],
) -> Result<()> {
    let (nr, nc) = values.dim();
    if nr == 0 || nc == 0 {
        return Err(Error::Input("heatmap needs a nonempty matrix".into()));
    }
    let cell = (600 / nr.max(nc)).clamp(1, 16) as u32;
    let margin = 24u32;
    let w = nc as u32 * cell + 2 * margin;
    let h = nr as u32 * cell + 2 * margin;
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    for r in 0..nr {
        for c in 0..nc {
            let color = diverging_color(values[[r, c]], vmin, vmax);
            fill_rect(
                &mut img,
                (margin + c as u32 * cell) as i64,
                (margin + r as u32 * cell) as i64,
                cell as i64,
                cell as i64,
                color,
            );
        }
    }
    for &b in boundaries {
        if b == 0 || b >= nr.max(nc) {
            continue;
        }
        let off = (margin + b as u32 * cell) as i64;
        fill_rect(&mut img, off, margin as i64, 1, (nr as u32 * cell) as i64, [0, 0, 0]);
        fill_rect(&mut img, margin as i64, off, (nc as u32 * cell) as i64, 1, [0, 0, 0]);
    }
    draw_text(&mut img, margin as i64, 8, &format!("SCALE {} TO {} (RED HIGH)", fmt_tick(vmin), fmt_tick(vmax)), [0, 0, 0]);
    save_png(&img, path)
}

#[derive(Debug, Clone, Copy)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

fn nice_range(values: impl Iterator<Item = f64>) -> AxisRange {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return AxisRange { min: 0.0, max: 1.0 };
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = (hi - lo) * 0.05;
    AxisRange { min: lo - pad, max: hi + pad }
}

struct Frame {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
    xr: AxisRange,
    yr: AxisRange,
}

impl Frame {
    fn px(&self, x: f64) -> i64 {
        let t = (x - self.xr.min) / (self.xr.max - self.xr.min);
        self.x0 + (t * (self.x1 - self.x0) as f64).round() as i64
    }

    fn py(&self, y: f64) -> i64 {
        let t = (y - self.yr.min) / (self.yr.max - self.yr.min);
        self.y1 - (t * (self.y1 - self.y0) as f64).round() as i64
    }
}

fn draw_frame(img: &mut RgbImage, frame: &Frame, title: &str, x_label: &str, y_label: &str) {
    let black = [0u8, 0, 0];
    draw_line(img, frame.x0, frame.y1, frame.x1, frame.y1, black);
    draw_line(img, frame.x0, frame.y0, frame.x0, frame.y1, black);
    draw_text(img, frame.x0, 4, title, black);
    draw_text(img, frame.x0, 16, y_label, [90, 90, 90]);
    let xl_w = text_width(x_label) as i64;
    draw_text(img, (frame.x0 + frame.x1 - xl_w) / 2, frame.y1 + 20, x_label, [90, 90, 90]);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.xr.min + t * (frame.xr.max - frame.xr.min);
        let yv = frame.yr.min + t * (frame.yr.max - frame.yr.min);
        let (xp, yp) = (frame.px(xv), frame.py(yv));
        draw_line(img, xp, frame.y1, xp, frame.y1 + 3, black);
        draw_text(img, xp - 8, frame.y1 + 6, &fmt_tick(xv), black);
        draw_line(img, frame.x0 - 3, yp, frame.x0, yp, black);
        let lbl = fmt_tick(yv);
        draw_text(img, frame.x0 - 5 - text_width(&lbl) as i64, yp - 3, &lbl, black);
    }
}

/// Cycle of distinguishable series colors.
pub fn series_color(i: usize) -> [u8; 3] {
    const CYCLE: [[u8; 3]; 8] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
    ];
    CYCLE[i % CYCLE.len()]
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub color: [u8; 3],
}

fn plot_canvas(xr: AxisRange, yr: AxisRange) -> (RgbImage, Frame) {
    let (w, h) = (640u32, 440u32);
    let img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    let frame = Frame {
        x0: 64,
        y0: 30,
        x1: w as i64 - 16,
        y1: h as i64 - 34,
        xr,
        yr,
    };
    (img, frame)
}

/// Multi-series line chart; points within a series are connected in order.
pub fn save_line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(Error::Input("line plot needs at least one point".into()));
    }
    let xr = nice_range(series.iter().flat_map(|s| s.x.iter().copied()));
    let yr = nice_range(series.iter().flat_map(|s| s.y.iter().copied()));
    let (mut img, frame) = plot_canvas(xr, yr);
    draw_frame(&mut img, &frame, title, x_label, y_label);
    for (si, s) in series.iter().enumerate() {
        if s.x.len() != s.y.len() {
            return Err(Error::Input(format!(
                "series {:?} has {} x values but {} y values",
                s.label,
                s.x.len(),
                s.y.len()
            )));
        }
        for i in 1..s.x.len() {
            draw_line(
                &mut img,
                frame.px(s.x[i - 1]),
                frame.py(s.y[i - 1]),
                frame.px(s.x[i]),
                frame.py(s.y[i]),
                s.color,
            );
        }
        for i in 0..s.x.len() {
            fill_rect(&mut img, frame.px(s.x[i]) - 1, frame.py(s.y[i]) - 1, 3, 3, s.color);
        }
        let ly = frame.y0 + 4 + 10 * si as i64;
        fill_rect(&mut img, frame.x1 - 120, ly, 8, 8, s.color);
        draw_text(&mut img, frame.x1 - 108, ly, &s.label, [0, 0, 0]);
    }
    save_png(&img, path)
}

#[derive(Debug, Clone, Copy)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub color: [u8; 3],
}

/// Scatter plot of individually colored points.
pub fn save_scatter_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[ScatterPoint],
) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Input("scatter plot needs at least one point".into()));
    }
    let xr = nice_range(points.iter().map(|p| p.x));
    let yr = nice_range(points.iter().map(|p| p.y));
    let (mut img, frame) = plot_canvas(xr, yr);
    draw_frame(&mut img, &frame, title, x_label, y_label);
    for p in points {
        fill_rect(&mut img, frame.px(p.x) - 2, frame.py(p.y) - 2, 4, 4, p.color);
    }
    save_png(&img, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diverging_scale_hits_blue_white_red() {
        assert_eq!(diverging_color(-1.0, -1.0, 1.0), [59, 76, 192]);
        assert_eq!(diverging_color(0.0, -1.0, 1.0), [245, 245, 245]);
        assert_eq!(diverging_color(1.0, -1.0, 1.0), [180, 4, 38]);
        // Clamping at both ends.
        assert_eq!(diverging_color(9.0, -1.0, 1.0), diverging_color(1.0, -1.0, 1.0));
        assert_eq!(diverging_color(-9.0, -1.0, 1.0), diverging_color(-1.0, -1.0, 1.0));
    }

    #[test]
    fn tick_formatting_is_compact() {
        assert_eq!(fmt_tick(0.0), "0");
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(-0.25), "-0.25");
        assert_eq!(fmt_tick(3.0), "3");
        assert_eq!(fmt_tick(1234.5), "1234.5");
        assert_eq!(fmt_tick(123456.78), "1.2e5");
        assert_eq!(fmt_tick(0.00001), "1.0e-5");
    }

    #[test]
    fn heatmap_renders_with_boundaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hm.png");
        let m = array![[1.0, -1.0], [-1.0, 1.0]];
        save_heatmap(&path, m.view(), -1.0, 1.0, &[1]).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        // 2x2 cells at 16 px plus margins.
        assert_eq!((img.width(), img.height()), (80, 80));
        // Top-left cell is the red end, its right neighbor the blue end.
        assert_eq!(img.get_pixel(28, 28).0, [180, 4, 38]);
        assert_eq!(img.get_pixel(28 + 16, 28).0, [59, 76, 192]);
        // The boundary line is black.
        assert_eq!(img.get_pixel(40, 30).0, [0, 0, 0]);
    }

    #[test]
    fn line_and_scatter_plots_save() {
        let dir = tempfile::tempdir().unwrap();
        let lp = dir.path().join("line.png");
        save_line_plot(
            &lp,
            "accuracy",
            "step",
            "acc",
            &[Series {
                label: "ID".into(),
                x: vec![0.0, 1.0, 2.0],
                y: vec![0.1, 0.6, 0.9],
                color: series_color(0),
            }],
        )
        .unwrap();
        assert!(image::open(&lp).is_ok());

        let sp = dir.path().join("scatter.png");
        let pts: Vec<ScatterPoint> = (0..10)
            .map(|i| ScatterPoint {
                x: i as f64,
                y: (i * i) as f64,
                color: series_color(i),
            })
            .collect();
        save_scatter_plot(&sp, "uni vs ood", "uni", "ood", &pts).unwrap();
        assert!(image::open(&sp).is_ok());
    }

    #[test]
    fn degenerate_plots_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(save_scatter_plot(&dir.path().join("x.png"), "t", "x", "y", &[]).is_err());
        assert!(save_line_plot(&dir.path().join("y.png"), "t", "x", "y", &[]).is_err());
        let empty = ndarray::Array2::<f64>::zeros((0, 0));
        assert!(save_heatmap(&dir.path().join("z.png"), empty.view(), -1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn text_rendering_clips_at_image_edges() {
        let mut img = RgbImage::from_pixel(20, 10, Rgb([255, 255, 255]));
        draw_text(&mut img, -4, -3, "EDGE CASE 0.5%", [0, 0, 0]);
        draw_text(&mut img, 18, 8, "OVERFLOW", [0, 0, 0]);
        // Some ink landed inside the canvas.
        assert!(img.pixels().any(|p| p.0 == [0, 0, 0]));
    }
}
