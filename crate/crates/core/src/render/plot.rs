//! Minimal deterministic raster plotter: 1D filled step plots and 2D
//! heatmaps with contour lines, written as PNG.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use font8x8::UnicodeFonts;

use super::colormap::Colormap;
use super::contour::marching_squares;
use crate::binning::{Grid, GridKind};
use crate::error::{Error, Result};
use crate::regions::RegionThresholds;

const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];
const AXIS_GRAY: [u8; 3] = [64, 64, 64];
const GLYPH: i64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub width: u32,
    pub height: u32,
    /// Defaults to the x variable name.
    pub xlabel: Option<String>,
    /// Defaults to the y variable name (2D) or the value kind (1D).
    pub ylabel: Option<String>,
    pub colormap: Colormap,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            width: 800,
            height: 600,
            xlabel: None,
            ylabel: None,
            colormap: Colormap::default(),
        }
    }
}

/// Pixel rectangle of the data area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlotArea {
    pub left: u32,
    pub top: u32,
    pub width: u32,
    pub height: u32,
}

impl PlotArea {
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.left as i64
            && y >= self.top as i64
            && x < (self.left + self.width) as i64
            && y < (self.top + self.height) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderReport {
    /// Threshold levels drawn as contour (2D) or level (1D) lines.
    pub levels_drawn: usize,
    /// Line segments per drawn level, parallel to the thresholds.
    pub segments_per_level: Vec<usize>,
    pub warnings: Vec<String>,
}

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
    pub plot_area: PlotArea,
}

impl Raster {
    fn new(width: u32, height: u32, plot_area: PlotArea) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&WHITE);
        }
        Raster {
            width,
            height,
            pixels,
            plot_area,
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y * self.width + x) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn set(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
        for y in y0..y1 {
            for x in x0..x1 {
                self.set(x, y, color);
            }
        }
    }

    /// Line between fractional pixel positions, clipped to `clip`.
    fn line(&mut self, a: (f64, f64), b: (f64, f64), color: [u8; 3], clip: PlotArea) {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as i64;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let x = (a.0 + t * dx).floor() as i64;
            let y = (a.1 + t * dy).floor() as i64;
            if clip.contains(x, y) {
                self.set(x, y, color);
            }
        }
    }

    fn text(&mut self, x: i64, y: i64, text: &str, color: [u8; 3]) {
        for (n, ch) in text.chars().enumerate() {
            let glyph = font8x8::BASIC_FONTS
                .get(ch)
                .or_else(|| font8x8::BASIC_FONTS.get('?'))
                .unwrap();
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits & (1 << col) != 0 {
                        self.set(x + n as i64 * GLYPH + col, y + row as i64, color);
                    }
                }
            }
        }
    }

    /// Text rotated a quarter turn counter-clockwise, starting at the bottom.
    fn text_vertical(&mut self, x: i64, y: i64, text: &str, color: [u8; 3]) {
        for (n, ch) in text.chars().enumerate() {
            let glyph = font8x8::BASIC_FONTS
                .get(ch)
                .or_else(|| font8x8::BASIC_FONTS.get('?'))
                .unwrap();
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits & (1 << col) != 0 {
                        self.set(x + row as i64, y - n as i64 * GLYPH - col, color);
                    }
                }
            }
        }
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
        let mut writer = encoder.write_header().map_err(to_io)?;
        writer.write_image_data(&self.pixels).map_err(to_io)?;
        writer.finish().map_err(to_io)
    }
}

/// Value range used for the color or height scale.
fn value_range(grid: &Grid) -> Option<(f64, f64)> {
    let finite = grid.values.iter().copied().filter(|v| v.is_finite());
    let max = finite.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let min = match grid.kind {
        GridKind::Posterior => 0.0,
        GridKind::Profile => finite.fold(f64::INFINITY, f64::min),
    };
    Some((min, max))
}

/// True when the grid has no finite values or they are all equal.
fn is_degenerate(grid: &Grid) -> bool {
    let finite = grid.values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi <= lo
}

fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let norm = raw / magnitude;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = nice_step(hi - lo, 5);
    let decimals = (-step.log10().floor()).clamp(0.0, 8.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    let ticks = (first..=last).map(|k| k as f64 * step).collect();
    (ticks, decimals)
}

fn tick_label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

fn short_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_owned()
    } else {
        format!("{v:.2e}")
    }
}

struct Frame {
    area: PlotArea,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let a = self.area;
        (
            a.left as f64 + (x - self.xlo) / (self.xhi - self.xlo) * a.width as f64,
            (a.top + a.height) as f64 - (y - self.ylo) / (self.yhi - self.ylo) * a.height as f64,
        )
    }

    fn x_at(&self, px: u32) -> f64 {
        let t = (px - self.area.left) as f64 + 0.5;
        self.xlo + t / self.area.width as f64 * (self.xhi - self.xlo)
    }

    fn y_at(&self, py: u32) -> f64 {
        let t = (self.area.top + self.area.height - py) as f64 - 0.5;
        self.ylo + t / self.area.height as f64 * (self.yhi - self.ylo)
    }

    fn axes(&self, img: &mut Raster, xlabel: &str, ylabel: &str) {
        let a = self.area;
        let (l, t) = (a.left as i64, a.top as i64);
        let (r, b) = (l + a.width as i64, t + a.height as i64);
        img.fill_rect(l - 1, t - 1, r + 1, t, AXIS_GRAY);
        img.fill_rect(l - 1, b, r + 1, b + 1, AXIS_GRAY);
        img.fill_rect(l - 1, t - 1, l, b + 1, AXIS_GRAY);
        img.fill_rect(r, t - 1, r + 1, b + 1, AXIS_GRAY);

        let (xt, xd) = ticks(self.xlo, self.xhi);
        for v in xt {
            let px = self.to_pixel(v, self.ylo).0.floor() as i64;
            img.fill_rect(px, b + 1, px + 1, b + 6, AXIS_GRAY);
            let label = tick_label(v, xd);
            img.text(px - GLYPH * label.len() as i64 / 2, b + 9, &label, BLACK);
        }
        let (yt, yd) = ticks(self.ylo, self.yhi);
        for v in yt {
            let py = self.to_pixel(self.xlo, v).1.floor() as i64;
            img.fill_rect(l - 6, py, l - 1, py + 1, AXIS_GRAY);
            let label = tick_label(v, yd);
            img.text(l - 9 - GLYPH * label.len() as i64, py - 4, &label, BLACK);
        }

        let cx = l + a.width as i64 / 2;
        img.text(
            cx - GLYPH * xlabel.chars().count() as i64 / 2,
            b + 26,
            xlabel,
            BLACK,
        );
        let cy = t + a.height as i64 / 2;
        img.text_vertical(
            8,
            cy + GLYPH * ylabel.chars().count() as i64 / 2,
            ylabel,
            BLACK,
        );
    }
}

fn layout(options: &PlotOptions, colorbar: bool) -> Result<PlotArea> {
    if options.width < 200 || options.height < 150 {
        return Err(Error::Invalid(format!(
            "plot size {}x{} too small (minimum 200x150)",
            options.width, options.height
        )));
    }
    let (left, right, top, bottom) = (80, if colorbar { 100 } else { 24 }, 16, 48);
    Ok(PlotArea {
        left,
        top,
        width: options.width - left - right,
        height: options.height - top - bottom,
    })
}

/// Renders `grid` into an in-memory image.
pub fn render_image(
    grid: &Grid,
    thresholds: Option<&RegionThresholds>,
    options: &PlotOptions,
) -> Result<(Raster, RenderReport)> {
    match grid.dimensions() {
        1 => render_1d(grid, thresholds, options),
        _ => render_2d(grid, thresholds, options),
    }
}

/// Renders `grid` and writes it to `path` as PNG.
pub fn render_plot(
    grid: &Grid,
    thresholds: Option<&RegionThresholds>,
    path: impl AsRef<Path>,
    options: &PlotOptions,
) -> Result<RenderReport> {
    let (image, report) = render_image(grid, thresholds, options)?;
    image.write_png(path.as_ref())?;
    Ok(report)
}

fn render_1d(
    grid: &Grid,
    thresholds: Option<&RegionThresholds>,
    options: &PlotOptions,
) -> Result<(Raster, RenderReport)> {
    let area = layout(options, false)?;
    let mut img = Raster::new(options.width, options.height, area);
    let mut report = RenderReport::default();
    let spec = grid.x_spec();

    let (mut vmin, vmax) = match value_range(grid) {
        Some(r) => r,
        None => {
            report.warnings.push("grid has no finite values".into());
            (0.0, 1.0)
        }
    };
    if vmax <= vmin {
        if grid.kind == GridKind::Profile {
            vmin = vmax - 1.0;
        } else {
            report.warnings.push("all bins are zero".into());
        }
    }
    let top = if vmax > vmin {
        vmax + 0.05 * (vmax - vmin)
    } else {
        vmin + 1.0
    };
    let frame = Frame {
        area,
        xlo: spec.lo,
        xhi: spec.hi,
        ylo: vmin,
        yhi: top,
    };

    let fill = options.colormap.sample(0.55);
    let bottom = (area.top + area.height) as i64;
    let mut previous: Option<i64> = None;
    for px in area.left..area.left + area.width {
        let bin = spec.bin_index(frame.x_at(px))?.unwrap_or(spec.nbins - 1);
        let value = grid.values[bin];
        let bar_top = if value.is_finite() {
            frame.to_pixel(spec.lo, value).1.floor() as i64
        } else {
            bottom
        };
        let x = px as i64;
        img.fill_rect(x, bar_top.max(area.top as i64), x + 1, bottom, fill);
        if value.is_finite() {
            img.set(x, bar_top, BLACK);
        }
        if let Some(prev) = previous {
            let (a, b) = (prev.min(bar_top), prev.max(bar_top));
            img.fill_rect(x, a, x + 1, b.min(bottom), BLACK);
        }
        previous = Some(bar_top);
    }

    if let Some(t) = thresholds {
        for &level in &t.thresholds {
            let py = frame.to_pixel(spec.lo, level).1.floor() as i64;
            let mut drawn = 0;
            for x in (area.left as i64..(area.left + area.width) as i64).step_by(8) {
                for dx in 0..5 {
                    if area.contains(x + dx, py) {
                        img.set(x + dx, py, BLACK);
                        drawn = 1;
                    }
                }
            }
            report.segments_per_level.push(drawn);
        }
        report.levels_drawn = t.thresholds.len();
    }

    let xlabel = options
        .xlabel
        .clone()
        .unwrap_or_else(|| spec.variable.clone());
    let ylabel = options.ylabel.clone().unwrap_or_else(|| match grid.kind {
        GridKind::Posterior => "posterior".into(),
        GridKind::Profile => "profile ln L".into(),
    });
    frame.axes(&mut img, &xlabel, &ylabel);
    Ok((img, report))
}

fn render_2d(
    grid: &Grid,
    thresholds: Option<&RegionThresholds>,
    options: &PlotOptions,
) -> Result<(Raster, RenderReport)> {
    let area = layout(options, true)?;
    let mut img = Raster::new(options.width, options.height, area);
    let mut report = RenderReport::default();
    let xs = grid.x_spec();
    let ys = grid.y_spec().expect("2D grid");
    let (nx, ny) = grid.shape();
    let frame = Frame {
        area,
        xlo: xs.lo,
        xhi: xs.hi,
        ylo: ys.lo,
        yhi: ys.hi,
    };

    let range = value_range(grid);
    let degenerate = is_degenerate(grid);
    let (vmin, vmax) = range.unwrap_or((0.0, 0.0));
    let scale = |v: f64| {
        if degenerate {
            0.0
        } else {
            (v - vmin) / (vmax - vmin)
        }
    };

    for py in area.top..area.top + area.height {
        let iy = ys.bin_index(frame.y_at(py))?.unwrap_or(ny - 1);
        for px in area.left..area.left + area.width {
            let ix = xs.bin_index(frame.x_at(px))?.unwrap_or(nx - 1);
            let v = grid.value(ix, iy);
            if v.is_finite() {
                img.set(px as i64, py as i64, options.colormap.sample(scale(v)));
            }
        }
    }

    if let Some(t) = thresholds.filter(|t| !t.is_empty()) {
        if degenerate {
            let msg = "grid values are all equal; contours skipped".to_owned();
            log::warn!("{msg}");
            report.warnings.push(msg);
        } else if nx < 2 || ny < 2 {
            let msg = "contours need at least 2 bins per axis; skipped".to_owned();
            log::warn!("{msg}");
            report.warnings.push(msg);
        } else {
            let lowest = t.thresholds.iter().copied().fold(vmin, f64::min);
            let floor = lowest - (vmax - vmin) - 1.0;
            let field: Vec<f64> = grid
                .values
                .iter()
                .map(|&v| if v.is_finite() { v } else { floor })
                .collect();
            let xc = xs.centers();
            let yc = ys.centers();
            let lattice =
                |(i, j): (f64, f64)| frame.to_pixel(xc[0] + i * xs.width(), yc[0] + j * ys.width());
            for &level in &t.thresholds {
                let segments = marching_squares(&field, nx, ny, level);
                for s in &segments {
                    img.line(lattice(s[0]), lattice(s[1]), BLACK, area);
                }
                report.segments_per_level.push(segments.len());
            }
            report.levels_drawn = t.thresholds.len();
        }
    }

    draw_colorbar(&mut img, options.colormap, range, thresholds, degenerate);

    let xlabel = options
        .xlabel
        .clone()
        .unwrap_or_else(|| xs.variable.clone());
    let ylabel = options
        .ylabel
        .clone()
        .unwrap_or_else(|| ys.variable.clone());
    frame.axes(&mut img, &xlabel, &ylabel);
    Ok((img, report))
}

fn draw_colorbar(
    img: &mut Raster,
    cmap: Colormap,
    range: Option<(f64, f64)>,
    thresholds: Option<&RegionThresholds>,
    degenerate: bool,
) {
    let area = img.plot_area;
    let x0 = (area.left + area.width + 16) as i64;
    let (top, height) = (area.top as i64, area.height as i64);
    for k in 0..height {
        let t = 1.0 - (k as f64 + 0.5) / height as f64;
        img.fill_rect(x0, top + k, x0 + 14, top + k + 1, cmap.sample(t));
    }
    img.fill_rect(x0 - 1, top - 1, x0 + 15, top, AXIS_GRAY);
    img.fill_rect(x0 - 1, top + height, x0 + 15, top + height + 1, AXIS_GRAY);
    img.fill_rect(x0 - 1, top, x0, top + height, AXIS_GRAY);
    img.fill_rect(x0 + 14, top, x0 + 15, top + height, AXIS_GRAY);

    let Some((vmin, vmax)) = range else { return };
    img.text(x0 + 18, top, &short_number(vmax), BLACK);
    img.text(x0 + 18, top + height - 8, &short_number(vmin), BLACK);
    if degenerate {
        return;
    }
    if let Some(t) = thresholds {
        for &level in &t.thresholds {
            let frac = (level - vmin) / (vmax - vmin);
            if (0.0..=1.0).contains(&frac) {
                let y = top + ((1.0 - frac) * height as f64).floor() as i64;
                img.fill_rect(x0, y, x0 + 14, y + 1, BLACK);
            }
        }
    }
}
