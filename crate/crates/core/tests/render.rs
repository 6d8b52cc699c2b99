mod common;

use chainforge::binning::{Axes, BinSpec1D, BinSpec2D, Grid, GridKind};
use chainforge::regions::{hpd_thresholds, wilks_thresholds};
use chainforge::render::{
    export_grid, grid_to_csv, import_grid, render_image, render_plot, ExportFormat, GridDocument,
    PlotOptions, Raster,
};
use proptest::prelude::*;

const BLACK: [u8; 3] = [0, 0, 0];

fn axes_2d(nx: usize, ny: usize) -> Axes {
    Axes::Two(
        BinSpec2D::new(
            BinSpec1D::new("x", -1.0, 1.0, nx).unwrap(),
            BinSpec1D::new("y", -1.0, 1.0, ny).unwrap(),
        )
        .unwrap(),
    )
}

/// Isotropic Gaussian bump centred in a square grid.
fn gaussian_grid(n: usize, sigma: f64) -> Grid {
    let axes = axes_2d(n, n);
    let mut g = Grid::empty(axes, GridKind::Posterior);
    let (xc, yc) = (g.x_spec().centers(), g.y_spec().unwrap().centers());
    for (i, x) in xc.iter().enumerate() {
        for (j, y) in yc.iter().enumerate() {
            g.values[i * n + j] = (-0.5 * (x * x + y * y) / (sigma * sigma)).exp();
        }
    }
    g.total_weight = g.values.iter().sum();
    g
}

/// Black pixels strictly inside the plot area, away from the frame.
fn contour_pixels(img: &Raster) -> Vec<(u32, u32)> {
    let a = img.plot_area;
    let mut out = Vec::new();
    for y in a.top + 3..a.top + a.height - 3 {
        for x in a.left + 3..a.left + a.width - 3 {
            if img.get(x, y) == BLACK {
                out.push((x, y));
            }
        }
    }
    out
}

fn grid_strategy() -> impl Strategy<Value = Grid> {
    let value = prop_oneof![
        8 => -1e300..1e300f64,
        1 => Just(f64::NEG_INFINITY),
        1 => Just(0.0f64),
    ];
    (
        1usize..6,
        0usize..6,
        any::<bool>(),
        -1e6..1e6f64,
        1e-9..1e6f64,
    )
        .prop_flat_map(move |(nx, ny, profile, lo, span)| {
            let n = nx * ny.max(1);
            (
                Just((nx, ny, profile, lo, span)),
                prop::collection::vec(value.clone(), n),
                0u64..1000,
                0.0..1e3f64,
            )
        })
        .prop_map(|((nx, ny, profile, lo, span), values, outside, ow)| {
            let x = BinSpec1D::new("a", lo, lo + span, nx).unwrap();
            let axes = if ny == 0 {
                Axes::One(x)
            } else {
                let y = BinSpec1D::new("b b", -span, span, ny).unwrap();
                Axes::Two(BinSpec2D::new(x, y).unwrap())
            };
            let kind = if profile {
                GridKind::Profile
            } else {
                GridKind::Posterior
            };
            let mut g = Grid::empty(axes, kind);
            // Posterior bins are weight sums: finite and non-negative.
            g.values = match kind {
                GridKind::Posterior => values
                    .into_iter()
                    .map(|v| if v.is_finite() { v.abs() } else { 0.0 })
                    .collect(),
                GridKind::Profile => values,
            };
            g.outside_count = outside;
            g.outside_weight = ow;
            g.total_weight = ow + 1.0;
            if profile {
                g.lnl_max = g.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            g
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_document_round_trips_losslessly(grid in grid_strategy()) {
        let doc = GridDocument::new(&grid, None);
        let back = GridDocument::from_json(&doc.to_json()).unwrap().to_grid().unwrap();
        prop_assert!(common::grids_bit_identical(&grid, &back));
    }

    #[test]
    fn csv_values_reparse_exactly(grid in grid_strategy()) {
        let csv = grid_to_csv(&grid);
        let parsed: Vec<f64> = csv
            .lines()
            .map(|l| {
                let v = l.rsplit(',').next().unwrap();
                if v.is_empty() { f64::NEG_INFINITY } else { v.parse().unwrap() }
            })
            .collect();
        prop_assert_eq!(parsed.len(), grid.values.len());
        for (a, b) in parsed.iter().zip(&grid.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn json_file_round_trip_keeps_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gaussian_grid(30, 0.3);
    let t = hpd_thresholds(&grid, &[0.95, 0.68]).unwrap();
    let path = dir.path().join("g.json");
    export_grid(&grid, Some(&t), ExportFormat::Json, &path).unwrap();
    let (back, back_t) = import_grid(&path).unwrap();
    assert!(common::grids_bit_identical(&grid, &back));
    assert_eq!(back_t.as_ref(), Some(&t));
}

#[test]
fn csv_layout_is_x_major_centres() {
    let mut g = Grid::empty(axes_2d(2, 2), GridKind::Posterior);
    g.values = vec![1.0, 2.0, 3.0, 0.25];
    assert_eq!(
        grid_to_csv(&g),
        "-0.5,-0.5,1\n-0.5,0.5,2\n0.5,-0.5,3\n0.5,0.5,0.25\n"
    );
}

#[test]
fn rendering_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let grid = gaussian_grid(30, 0.3);
    let t = hpd_thresholds(&grid, &[0.95, 0.68]).unwrap();
    let opts = PlotOptions::default();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    render_plot(&grid, Some(&t), &a, &opts).unwrap();
    render_plot(&grid, Some(&t), &b, &opts).unwrap();
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(a.starts_with(b"\x89PNG\r\n\x1a\n"));
    assert_eq!(a, b);
}

#[test]
fn two_credible_levels_give_two_nested_contours() {
    let grid = gaussian_grid(30, 0.3);
    let t = hpd_thresholds(&grid, &[0.95, 0.68]).unwrap();
    let (img, report) = render_image(&grid, Some(&t), &PlotOptions::default()).unwrap();
    assert_eq!(report.levels_drawn, 2);
    assert!(report.warnings.is_empty());
    assert!(report.segments_per_level.iter().all(|&n| n > 0));

    // Along the middle row, the outer (95%) contour crossings bracket the inner ones.
    let a = img.plot_area;
    let mid = a.top + a.height / 2;
    let xs: Vec<u32> = (a.left + 3..a.left + a.width - 3)
        .filter(|&x| img.get(x, mid) == BLACK)
        .collect();
    let runs = xs.windows(2).filter(|w| w[1] > w[0] + 1).count() + 1;
    assert_eq!(runs, 4, "expected 4 crossings, got pixels {xs:?}");
    // The inner contour sits at the larger (68%) threshold, nearer the peak.
    assert!(t.thresholds[0] < t.thresholds[1]);
}

#[test]
fn symmetric_grid_gives_mirror_symmetric_contours() {
    let grid = gaussian_grid(30, 0.3);
    let t = hpd_thresholds(&grid, &[0.95, 0.68]).unwrap();
    let opts = PlotOptions {
        width: 640,
        height: 640,
        ..PlotOptions::default()
    };
    let (img, _) = render_image(&grid, Some(&t), &opts).unwrap();
    let a = img.plot_area;
    let pixels = contour_pixels(&img);
    assert!(!pixels.is_empty());
    let set: std::collections::HashSet<(i64, i64)> =
        pixels.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    // Mirror about the vertical centre line of the plot area.
    let axis2 = 2 * a.left as i64 + a.width as i64 - 1;
    for &(x, y) in &pixels {
        let mx = axis2 - x as i64;
        let found = (-1..=1).any(|dx| (-1..=1).any(|dy| set.contains(&(mx + dx, y as i64 + dy))));
        assert!(found, "pixel ({x},{y}) has no mirror near ({mx},{y})");
    }
}

#[test]
fn degenerate_grid_skips_contours_with_warning() {
    let mut grid = Grid::empty(axes_2d(10, 10), GridKind::Posterior);
    grid.values.iter_mut().for_each(|v| *v = 1.0);
    grid.total_weight = 100.0;
    let t = hpd_thresholds(&grid, &[0.68]).unwrap();
    let (_, report) = render_image(&grid, Some(&t), &PlotOptions::default()).unwrap();
    assert_eq!(report.levels_drawn, 0);
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn single_bin_1d_plot_is_a_filled_rectangle() {
    let spec = BinSpec1D::new("x", 0.0, 1.0, 1).unwrap();
    let mut grid = Grid::empty(Axes::One(spec), GridKind::Posterior);
    grid.values = vec![2.0];
    grid.total_weight = 2.0;
    let opts = PlotOptions::default();
    let (img, _) = render_image(&grid, None, &opts).unwrap();
    let a = img.plot_area;
    let fill = opts.colormap.sample(0.55);
    // Bar reaches ~95% of the plot height; sample well inside it.
    let y0 = a.top + a.height / 10;
    for y in (y0..a.top + a.height - 2).step_by(7) {
        for x in (a.left + 2..a.left + a.width - 2).step_by(5) {
            assert_eq!(img.get(x, y), fill, "pixel ({x},{y})");
        }
    }
}

#[test]
fn profile_plot_with_confidence_levels_renders() {
    let mut grid = gaussian_grid(20, 0.4);
    grid.kind = GridKind::Profile;
    grid.values.iter_mut().for_each(|v| *v = v.ln());
    grid.values[0] = f64::NEG_INFINITY;
    grid.lnl_max = grid
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let t = wilks_thresholds(&grid, &[0.95, 0.68]).unwrap();
    let (_, report) = render_image(&grid, Some(&t), &PlotOptions::default()).unwrap();
    assert_eq!(report.levels_drawn, 2);
    assert!(report.segments_per_level.iter().all(|&n| n > 0));
}

#[test]
fn too_small_canvas_is_rejected() {
    let grid = gaussian_grid(4, 0.3);
    let opts = PlotOptions {
        width: 50,
        height: 50,
        ..PlotOptions::default()
    };
    assert!(render_image(&grid, None, &opts).is_err());
}
