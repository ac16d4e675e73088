//! Connected-component labeling of blank cells into regions.

use std::collections::BTreeSet;

use super::grid::{BBox, BinaryGrid, GeoPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    /// Member cells as `(row, col)`, in scan order.
    pub cells: Vec<(usize, usize)>,
    pub centroid: GeoPoint,
}

/// Disjoint regions over a raster, labelled `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    pub bbox: BBox,
    pub height: usize,
    pub width: usize,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn positions(&self) -> Vec<GeoPoint> {
        self.regions.iter().map(|r| r.centroid).collect()
    }

    /// Per-cell region id, `None` for road cells.
    pub fn label_map(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.height * self.width];
        for reg in &self.regions {
            for &(r, c) in &reg.cells {
                map[r * self.width + c] = Some(reg.id);
            }
        }
        map
    }

    /// Region containing a geographic point, if it falls on a blank cell.
    pub fn locate(&self, p: GeoPoint, map: &[Option<usize>]) -> Option<usize> {
        let (r, c) = self.bbox.cell_of(p, self.height, self.width)?;
        map[r * self.width + c]
    }

    /// Builds a region set from per-region cell lists, recomputing centroids and
    /// assigning ids in list order.
    pub fn from_cell_groups(groups: Vec<Vec<(usize, usize)>>, bbox: BBox, height: usize, width: usize) -> Self {
        let regions = groups
            .into_iter()
            .enumerate()
            .map(|(id, mut cells)| {
                cells.sort_unstable();
                let centroid = centroid_of(&cells, &bbox, height, width);
                Region { id, cells, centroid }
            })
            .collect();
        RegionSet {
            regions,
            bbox,
            height,
            width,
        }
    }
}

pub(crate) fn centroid_of(cells: &[(usize, usize)], bbox: &BBox, height: usize, width: usize) -> GeoPoint {
    let n = cells.len().max(1) as f64;
    let (mut lat, mut lon) = (0.0, 0.0);
    for &(r, c) in cells {
        let p = bbox.cell_center(r, c, height, width);
        lat += p.lat;
        lon += p.lon;
    }
    GeoPoint::new(lat / n, lon / n)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind { parent: Vec::new() }
    }

    fn make(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Labels maximal 4-connected groups of blank (0) cells, numbering them in
/// scan order. A grid without blank cells yields an empty set.
pub fn label_regions(g: &BinaryGrid, bbox: BBox) -> RegionSet {
    let (h, w) = (g.height(), g.width());
    let mut provisional = vec![usize::MAX; h * w];
    let mut uf = UnionFind::new();
    for r in 0..h {
        for c in 0..w {
            if g.get(r, c) == 1 {
                continue;
            }
            let up = (r > 0 && g.get(r - 1, c) == 0).then(|| provisional[(r - 1) * w + c]);
            let left = (c > 0 && g.get(r, c - 1) == 0).then(|| provisional[r * w + c - 1]);
            provisional[r * w + c] = match (up, left) {
                (None, None) => uf.make(),
                (Some(a), None) | (None, Some(a)) => a,
                (Some(a), Some(b)) => {
                    uf.union(a, b);
                    a.min(b)
                }
            };
        }
    }

    // Final ids follow the first cell of each component in scan order.
    let mut final_id = vec![usize::MAX; uf.parent.len()];
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let p = provisional[r * w + c];
            if p == usize::MAX {
                continue;
            }
            let root = uf.find(p);
            if final_id[root] == usize::MAX {
                final_id[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[final_id[root]].push((r, c));
        }
    }
    if groups.is_empty() {
        log::warn!("label_regions: raster has no blank cells");
    }
    RegionSet::from_cell_groups(groups, bbox, h, w)
}

/// Region pairs separated by a single road cell: two regions are adjacent when
/// both appear in the 8-neighbourhood of one road cell, or when their cells
/// touch diagonally.
pub fn region_adjacency(rs: &RegionSet) -> Vec<BTreeSet<usize>> {
    let (h, w) = (rs.height, rs.width);
    let map = rs.label_map();
    let at = |r: isize, c: isize| -> Option<usize> {
        if r < 0 || c < 0 || r as usize >= h || c as usize >= w {
            None
        } else {
            map[r as usize * w + c as usize]
        }
    };
    let mut adj = vec![BTreeSet::new(); rs.len()];
    let mut seen = Vec::with_capacity(9);
    for r in 0..h as isize {
        for c in 0..w as isize {
            seen.clear();
            for dr in -1..=1 {
                for dc in -1..=1 {
                    if let Some(id) = at(r + dr, c + dc) {
                        if !seen.contains(&id) {
                            seen.push(id);
                        }
                    }
                }
            }
            for i in 0..seen.len() {
                for j in i + 1..seen.len() {
                    adj[seen[i]].insert(seen[j]);
                    adj[seen[j]].insert(seen[i]);
                }
            }
        }
    }
    adj
}
