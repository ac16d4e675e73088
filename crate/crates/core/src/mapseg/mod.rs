//! Map segmentation: road raster → dilation → thinning → blank-area labeling
//! → correlation-driven clustering into high-level regions.

mod cluster;
mod grid;
pub mod io;
mod label;
mod thin;

pub use cluster::{
    agglomerate, average_ranks, cluster_regions, cluster_regions_with, knn_adjacency, merge_small_regions, spearman,
};
pub use grid::{bresenham, dilate, rasterize_roads, BBox, BinaryGrid, GeoPoint};
pub use label::{label_regions, region_adjacency, Region, RegionSet};
pub use thin::{count_components_8, thin};

/// Default raster extent per side.
pub const DEFAULT_RASTER: usize = 2400;
pub const DEFAULT_DILATE_ITERATIONS: usize = 2;
/// Neighbours per station when clustering point stations.
pub const DEFAULT_STATION_NEIGHBOURS: usize = 8;
pub const DEFAULT_MIN_REGION_CELLS: usize = 4;

/// Copy of `g` grown by `pad` cells on every side, each new cell taking the
/// value of the nearest original cell.
fn pad_replicate(g: &BinaryGrid, pad: usize) -> BinaryGrid {
    let (h, w) = (g.height(), g.width());
    let mut out = BinaryGrid::zeros(h + 2 * pad, w + 2 * pad);
    for r in 0..h + 2 * pad {
        for c in 0..w + 2 * pad {
            let sr = r.saturating_sub(pad).min(h - 1);
            let sc = c.saturating_sub(pad).min(w - 1);
            out.set(r, c, g.get(sr, sc));
        }
    }
    out
}

fn crop(g: &BinaryGrid, pad: usize, h: usize, w: usize) -> BinaryGrid {
    let mut out = BinaryGrid::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            out.set(r, c, g.get(r + pad, c + pad));
        }
    }
    out
}

/// Raster → dilate → thin → label, the full segmentation chain. Thinning runs
/// on an edge-replicated margin so roads that leave the box keep reaching its
/// border instead of retracting from it.
pub fn segment(
    roads: &[Vec<GeoPoint>],
    bbox: BBox,
    height: usize,
    width: usize,
    dilate_iterations: usize,
) -> crate::Result<RegionSet> {
    let raster = rasterize_roads(roads, bbox, height, width)?;
    let pad = dilate_iterations + 2;
    let thick = pad_replicate(&dilate(&raster, dilate_iterations), pad);
    let skeleton = crop(&thin(&thick), pad, height, width);
    Ok(label_regions(&skeleton, bbox))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roads_to_the_border_still_split() {
        let b = BBox::new(39.8, 116.2, 40.0, 116.5).unwrap();
        let (mid_lat, mid_lon) = ((b.min_lat + b.max_lat) / 2.0, (b.min_lon + b.max_lon) / 2.0);
        let roads = vec![
            vec![GeoPoint::new(b.min_lat, mid_lon), GeoPoint::new(b.max_lat, mid_lon)],
            vec![GeoPoint::new(mid_lat, b.min_lon), GeoPoint::new(mid_lat, b.max_lon)],
        ];
        for size in [12, 40] {
            assert_eq!(segment(&roads, b, size, size, 1).unwrap().len(), 4);
        }
    }

    #[test]
    fn padding_roundtrips() {
        let g = BinaryGrid::from_ascii(&["#..", ".#.", "..#"]);
        let p = pad_replicate(&g, 2);
        assert_eq!(p.height(), 7);
        assert_eq!(p.get(0, 0), 1);
        assert_eq!(p.get(6, 0), 0);
        assert_eq!(crop(&p, 2, 3, 3), g);
    }
}
