mod common;

use chainforge::binning::{
    bin_store, marginalize_1d, marginalize_2d, merge_grids, profile_1d, profile_2d, Axes,
    BinSpec1D, BinSpec2D, Grid, GridKind, Reduction,
};
use chainforge::regions::{chi2_quantile, hpd_thresholds, wilks_thresholds};
use proptest::prelude::*;

use common::{
    grids_bit_identical, oracle_grid, oracle_hpd, profiles_match, rel_close, rng, Dataset,
};

fn spec(var: &str, lo: f64, hi: f64, n: usize) -> BinSpec1D {
    BinSpec1D::new(var, lo, hi, n).unwrap()
}

#[test]
fn bin_index_agrees_with_edge_scan_on_example_axes() {
    for s in [
        spec("x", 0.0, 3.0, 30),
        spec("y", 0.0, 0.2, 30),
        spec("z", -1.7, 2.3, 17),
    ] {
        let edges = common::oracle_edges(s.lo, s.hi, s.nbins);
        assert_eq!(s.edges(), edges);
        let mut r = rng(3);
        for k in 0..20_000 {
            let v = if k % 4 == 0 {
                // Exactly on an edge, or one ulp either side.
                let e = edges[k / 4 % edges.len()];
                match k % 3 {
                    0 => e,
                    1 => f64::from_bits(e.to_bits() + 1),
                    _ => f64::from_bits(e.to_bits().saturating_sub(1)),
                }
            } else {
                use rand::Rng;
                r.random_range(s.lo - 0.1..s.hi + 0.1)
            };
            assert_eq!(
                s.bin_index(v).unwrap(),
                common::oracle_bin(&edges, v),
                "value {v:e}"
            );
        }
    }
}

#[test]
fn example_axes_give_expected_shapes() {
    let mut r = rng(1);
    let mut ds = Dataset::random(&mut r, 1000, 2);
    ds.names = vec!["log(m_{\\chi})".into(), "Omega_{\\chi}h^2".into()];
    let dir = tempfile::tempdir().unwrap();
    let store = ds.write_store(&dir.path().join("s"), 100);
    let x = spec("log(m_{\\chi})", 0.0, 3.0, 30);
    let y = spec("Omega_{\\chi}h^2", 0.0, 0.2, 30);
    assert_eq!(marginalize_1d(&store, &x).unwrap().values.len(), 30);
    let g = marginalize_2d(&store, &BinSpec2D::new(x, y).unwrap()).unwrap();
    assert_eq!(g.shape(), (30, 30));
    assert_eq!(g.values.len(), 900);
}

#[test]
fn two_d_axis_sums_match_one_d_grids() {
    let mut r = rng(17);
    let ds = Dataset::random(&mut r, 20_000, 3);
    let dir = tempfile::tempdir().unwrap();
    let store = ds.write_store(&dir.path().join("s"), 777);
    let range = |c: &[f64]| {
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (y0, y1) = range(ds.column("p1"));
    let (x0, x1) = range(ds.column("p0"));

    // y covers every sample, so 2D row sums see the same points as 1D on x.
    let xs = spec("p0", -1.0, 1.5, 13);
    let g2 = marginalize_2d(
        &store,
        &BinSpec2D::new(xs.clone(), spec("p1", y0, y1, 9)).unwrap(),
    )
    .unwrap();
    let g1 = marginalize_1d(&store, &xs).unwrap();
    for (a, b) in g2.marginal_x().iter().zip(&g1.values) {
        assert!(rel_close(*a, *b, 1e-12), "{a} vs {b}");
    }

    let ys = spec("p1", -0.5, 2.0, 11);
    let g2 = marginalize_2d(
        &store,
        &BinSpec2D::new(spec("p0", x0, x1, 7), ys.clone()).unwrap(),
    )
    .unwrap();
    let g1 = marginalize_1d(&store, &ys).unwrap();
    for (a, b) in g2.marginal_y().iter().zip(&g1.values) {
        assert!(rel_close(*a, *b, 1e-12), "{a} vs {b}");
    }
}

#[test]
fn profile_of_union_is_max_of_profiles() {
    let mut r = rng(23);
    let ds = Dataset::random(&mut r, 5000, 2);
    let (a, b) = ds.split_at(1234);
    let dir = tempfile::tempdir().unwrap();
    let whole = ds.write_store(&dir.path().join("all"), 500);
    let sa = a.write_store(&dir.path().join("a"), 500);
    let sb = b.write_store(&dir.path().join("b"), 500);
    let s2 = BinSpec2D::new(spec("p0", -2.0, 2.0, 20), spec("p1", -1.0, 3.0, 15)).unwrap();
    let merged = merge_grids(
        &profile_2d(&sa, &s2).unwrap(),
        &profile_2d(&sb, &s2).unwrap(),
    )
    .unwrap();
    let direct = profile_2d(&whole, &s2).unwrap();
    assert!(profiles_match(&merged, &direct));
    let max = direct
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(max, direct.lnl_max);
}

#[test]
fn parallel_reduction_is_reproducible() {
    let mut r = rng(29);
    let ds = Dataset::random(&mut r, 30_000, 2);
    let dir = tempfile::tempdir().unwrap();
    let store = ds.write_store(&dir.path().join("s"), 1000);
    let axes =
        Axes::Two(BinSpec2D::new(spec("p0", -2.0, 2.0, 20), spec("p1", -1.0, 3.0, 15)).unwrap());
    let a = bin_store(
        &store,
        axes.clone(),
        GridKind::Posterior,
        Reduction::Parallel,
    )
    .unwrap();
    let b = bin_store(
        &store,
        axes.clone(),
        GridKind::Posterior,
        Reduction::Parallel,
    )
    .unwrap();
    assert!(grids_bit_identical(&a, &b));
    let seq = bin_store(&store, axes, GridKind::Posterior, Reduction::Sequential).unwrap();
    for (x, y) in a.values.iter().zip(&seq.values) {
        assert!(rel_close(*x, *y, 1e-12));
    }
}

fn small_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..400, 2usize..4, any::<u64>())
        .prop_map(|(n, p, seed)| Dataset::random(&mut rng(seed), n, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn chunked_binning_equals_in_memory_oracle(
        ds in small_dataset(),
        nx in 1usize..25,
        ny in 1usize..25,
        lo in -3.0f64..0.0,
        width in 0.5f64..5.0,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let base = ds.write_store(&dir.path().join("s"), 1000);
        let xs = spec("p0", lo, lo + width, nx);
        let ys = spec("p1", lo * 0.5, lo * 0.5 + width, ny);
        let axes = [
            Axes::One(xs.clone()),
            Axes::Two(BinSpec2D::new(xs, ys).unwrap()),
        ];
        for chunk_rows in [1, 3, 1000, ds.len()] {
            let store = base.with_chunk_rows(chunk_rows).unwrap();
            for a in &axes {
                for kind in [GridKind::Posterior, GridKind::Profile] {
                    let got = bin_store(&store, a.clone(), kind, Reduction::Sequential).unwrap();
                    let want = oracle_grid(&ds, a, kind);
                    prop_assert!(grids_bit_identical(&got, &want), "chunk_rows={} {:?}", chunk_rows, kind);
                    if kind == GridKind::Posterior {
                        prop_assert!(got.values.iter().all(|&v| v >= 0.0));
                        prop_assert!(rel_close(got.binned_mass() + got.outside_weight, got.total_weight, 1e-12));
                    } else {
                        prop_assert!(got.values.iter().all(|&v| v <= got.lnl_max));
                    }
                }
            }
        }
    }

    #[test]
    fn row_order_does_not_matter(ds in small_dataset(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let shuffled = ds.permuted(&mut rng(seed));
        let a = ds.write_store(&dir.path().join("a"), 17);
        let b = shuffled.write_store(&dir.path().join("b"), 17);
        let s1 = spec("p0", -2.0, 2.0, 9);
        let s2 = BinSpec2D::new(s1.clone(), spec("p1", -3.0, 3.0, 7)).unwrap();

        prop_assert!(profiles_match(&profile_1d(&a, &s1).unwrap(), &profile_1d(&b, &s1).unwrap()));
        prop_assert!(profiles_match(&profile_2d(&a, &s2).unwrap(), &profile_2d(&b, &s2).unwrap()));
        let (pa, pb) = (marginalize_2d(&a, &s2).unwrap(), marginalize_2d(&b, &s2).unwrap());
        for (x, y) in pa.values.iter().zip(&pb.values) {
            prop_assert!(rel_close(*x, *y, 1e-12));
        }
        prop_assert!(rel_close(pa.total_weight, pb.total_weight, 1e-12));
    }

    #[test]
    fn profile_merge_is_idempotent(ds in small_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let store = ds.write_store(&dir.path().join("s"), 50);
        let g = profile_2d(&store, &BinSpec2D::new(spec("p0", -2.0, 2.0, 6), spec("p1", -2.0, 2.0, 5)).unwrap()).unwrap();
        let twice = merge_grids(&g, &g).unwrap();
        prop_assert_eq!(&twice.values, &g.values);
        prop_assert_eq!(twice.lnl_max, g.lnl_max);
    }

    #[test]
    fn hpd_is_tight_and_matches_enumeration(
        raw in prop::collection::vec(0u32..6, 1..=12),
        scale in 1e-6f64..1e3,
        p in 0.01f64..0.99,
    ) {
        let values: Vec<f64> = raw.iter().map(|&k| k as f64 * scale).collect();
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let g = posterior_grid(&values);
        let t = hpd_thresholds(&g, &[p]).unwrap().thresholds[0];
        prop_assert_eq!(t, oracle_hpd(&values, p));

        let mut desc = values.clone();
        desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total = desc.iter().fold(0.0, |a, v| a + v);
        let inside = desc.iter().filter(|&&v| v >= t).fold(0.0, |a, v| a + v);
        let above = desc.iter().filter(|&&v| v > t).fold(0.0, |a, v| a + v);
        prop_assert!(inside >= p * total);
        prop_assert!(above < p * total);
        prop_assert!(values.contains(&t) && t > 0.0);

        // Scaling the grid scales the threshold and keeps the region.
        let c = 7.25;
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        let ts = hpd_thresholds(&posterior_grid(&scaled), &[p]).unwrap().thresholds[0];
        let region: Vec<bool> = values.iter().map(|&v| v >= t).collect();
        let region_scaled: Vec<bool> = scaled.iter().map(|&v| v >= ts).collect();
        prop_assert_eq!(region, region_scaled);
    }

    #[test]
    fn thresholds_are_monotone_in_level(
        values in prop::collection::vec(0.0f64..1.0, 1..40),
        levels in prop::collection::vec(0.001f64..0.999, 1..6),
    ) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let r = hpd_thresholds(&posterior_grid(&values), &levels).unwrap();
        prop_assert!(r.requested.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.thresholds.windows(2).all(|w| w[0] <= w[1]));
        let max = values.iter().copied().fold(0.0, f64::max);
        prop_assert!(r.thresholds.iter().all(|&t| t <= max));

        let mut prof = posterior_grid(&values);
        prof.kind = GridKind::Profile;
        prof.lnl_max = max;
        let w = wilks_thresholds(&prof, &levels).unwrap();
        prop_assert!(w.thresholds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn wilks_depends_only_on_best_fit_and_dimension(
        values in prop::collection::vec(-50.0f64..0.0, 2..30),
        other in prop::collection::vec(-50.0f64..0.0, 2..30),
        p in 0.01f64..0.999,
    ) {
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut a = posterior_grid(&values);
        a.kind = GridKind::Profile;
        a.lnl_max = best;
        let mut b = posterior_grid(&other);
        b.kind = GridKind::Profile;
        b.lnl_max = best;
        let ta = wilks_thresholds(&a, &[p]).unwrap().thresholds[0];
        let tb = wilks_thresholds(&b, &[p]).unwrap().thresholds[0];
        prop_assert_eq!(ta, tb);
        prop_assert_eq!(ta, best - 0.5 * chi2_quantile(p, 1).unwrap());
    }
}

fn posterior_grid(values: &[f64]) -> Grid {
    let mut g = Grid::empty(
        Axes::One(spec("x", 0.0, 1.0, values.len())),
        GridKind::Posterior,
    );
    g.values = values.to_vec();
    g.total_weight = values.iter().sum();
    g
}
