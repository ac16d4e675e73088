mod common;

use std::collections::BTreeSet;

use mvgcn::mapseg::{
    agglomerate, average_ranks, bresenham, count_components_8, dilate, label_regions, rasterize_roads, spearman, thin,
    BBox, BinaryGrid, GeoPoint,
};
use proptest::prelude::*;

fn bbox() -> BBox {
    BBox::new(39.8, 116.2, 40.0, 116.5).unwrap()
}

fn grid_strategy(max: usize) -> impl Strategy<Value = BinaryGrid> {
    (1..=max, 1..=max, 0.05f64..0.7).prop_flat_map(|(h, w, p)| {
        prop::collection::vec(prop::bool::weighted(p), h * w)
            .prop_map(move |cells| BinaryGrid::from_cells(h, w, cells.into_iter().map(u8::from).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(80))]

    #[test]
    fn labels_match_flood_fill(g in grid_strategy(24)) {
        let rs = label_regions(&g, bbox());
        let mut got: Vec<Vec<(usize, usize)>> = rs.regions.iter().map(|r| r.cells.clone()).collect();
        got.sort();
        prop_assert_eq!(got, common::flood_components(&g, 0, false));
        for (i, r) in rs.regions.iter().enumerate() {
            prop_assert_eq!(r.id, i);
        }
    }

    #[test]
    fn regions_partition_blank_cells(g in grid_strategy(20)) {
        let rs = label_regions(&g, bbox());
        let map = rs.label_map();
        for r in 0..g.height() {
            for c in 0..g.width() {
                prop_assert_eq!(map[r * g.width() + c].is_some(), g.get(r, c) == 0);
            }
        }
    }

    #[test]
    fn thinning_is_safe(g in grid_strategy(28), iters in 0usize..3) {
        let thick = dilate(&g, iters);
        let thin_g = thin(&thick);
        prop_assert!(thin_g.is_subset_of(&thick));
        prop_assert_eq!(count_components_8(&thin_g), count_components_8(&thick));
        prop_assert_eq!(count_components_8(&thick), common::flood_components(&thick, 1, true).len());
        prop_assert_eq!(thin(&thin_g), thin_g.clone());
    }

    #[test]
    fn dilation_grows(g in grid_strategy(16)) {
        let d = dilate(&g, 1);
        prop_assert!(g.is_subset_of(&d));
        prop_assert_eq!(dilate(&g, 0), g);
    }

    #[test]
    fn spearman_matches_rank_pearson(
        pairs in prop::collection::vec((0i32..8, -50.0f64..50.0), 3..40)
    ) {
        // small integer range on x forces ties
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(average_ranks(&x), common::counting_ranks(&x));
        let rx = common::counting_ranks(&x);
        let ry = common::counting_ranks(&y);
        match spearman(&x, &y) {
            Ok(r) => prop_assert!((r - common::pearson(&rx, &ry)).abs() < 1e-12),
            Err(_) => prop_assert!(x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0])),
        }
    }

    #[test]
    fn spearman_is_rank_invariant(x in prop::collection::vec(-10.0f64..10.0, 3..30)) {
        prop_assume!(x.iter().any(|v| *v != x[0]));
        let cubed: Vec<f64> = x.iter().map(|v| v.powi(3) + 1.0).collect();
        prop_assert!((spearman(&x, &cubed).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn agglomerate_reaches_target_on_a_chain(
        profiles in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 2..10),
        frac in 0.0f64..1.0,
    ) {
        let n = profiles.len();
        let target = 1 + ((n - 1) as f64 * frac) as usize;
        let adj: Vec<BTreeSet<usize>> = (0..n)
            .map(|i| [i.checked_sub(1), (i + 1 < n).then_some(i + 1)].into_iter().flatten().collect())
            .collect();
        let sizes = vec![1; n];
        let (assign, merged) = agglomerate(&sizes, &profiles, &adj, target).unwrap();
        prop_assert_eq!(merged.len(), target);
        let ids: BTreeSet<usize> = assign.iter().copied().collect();
        prop_assert_eq!(ids, (0..target).collect::<BTreeSet<_>>());
        // clusters on a chain stay contiguous
        for w in assign.windows(2) {
            prop_assert!(w[1] == w[0] || w[1] > w[0] || !assign[..].contains(&w[1]));
        }
        for id in 0..target {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == id).collect();
            prop_assert_eq!(members.len(), members[members.len() - 1] - members[0] + 1);
        }
    }

    #[test]
    fn bresenham_is_connected(a in (0usize..30, 0usize..30), b in (0usize..30, 0usize..30)) {
        let line = bresenham(a, b);
        prop_assert_eq!(line[0], a);
        prop_assert_eq!(*line.last().unwrap(), b);
        for w in line.windows(2) {
            let dr = (w[0].0 as isize - w[1].0 as isize).abs();
            let dc = (w[0].1 as isize - w[1].1 as isize).abs();
            prop_assert!(dr <= 1 && dc <= 1 && dr + dc > 0);
        }
    }
}

#[test]
fn agglomerate_rejects_disconnected_targets() {
    let profiles = vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
    let adj = vec![BTreeSet::new(), BTreeSet::new()];
    assert!(agglomerate(&[1, 1], &profiles, &adj, 1).is_err());
    assert!(agglomerate(&[1, 1], &profiles, &adj, 3).is_err());
}

#[test]
fn road_cross_splits_box_into_four() {
    let b = bbox();
    let mid_lat = (b.min_lat + b.max_lat) / 2.0;
    let mid_lon = (b.min_lon + b.max_lon) / 2.0;
    let roads = vec![
        vec![GeoPoint::new(b.min_lat, mid_lon), GeoPoint::new(b.max_lat, mid_lon)],
        vec![GeoPoint::new(mid_lat, b.min_lon), GeoPoint::new(mid_lat, b.max_lon)],
    ];
    let raster = rasterize_roads(&roads, b, 40, 40).unwrap();
    let rs = mvgcn::mapseg::segment(&roads, b, 40, 40, 1).unwrap();
    assert_eq!(rs.len(), 4);
    assert_eq!(label_regions(&raster, b).len(), 4);
    let total: usize = rs.regions.iter().map(|r| r.cells.len()).sum();
    assert!(total > 4 * 300);
}
