//! Rank correlation and greedy agglomerative merging of adjacent regions.

use std::collections::{BTreeMap, BTreeSet};

use super::grid::GeoPoint;
use super::label::RegionSet;
use crate::error::{Error, Result};

/// Average (fractional) ranks, 1-based.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("spearman needs at least two observations".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Symmetric k-nearest-neighbour adjacency by straight-line distance in degrees,
/// used where regions come from point stations rather than a raster.
pub fn knn_adjacency(positions: &[GeoPoint], k: usize) -> Vec<BTreeSet<usize>> {
    let n = positions.len();
    let mut adj = vec![BTreeSet::new(); n];
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dlat = positions[i].lat - positions[j].lat;
                let dlon = positions[i].lon - positions[j].lon;
                (dlat * dlat + dlon * dlon, j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    adj
}

/// Merge state over clusters identified by their smallest original label.
struct Agglomeration {
    members: BTreeMap<usize, Vec<usize>>,
    size: BTreeMap<usize, f64>,
    profile: BTreeMap<usize, Vec<f64>>,
    adj: BTreeMap<usize, BTreeSet<usize>>,
}

impl Agglomeration {
    fn new(sizes: &[usize], profiles: &[Vec<f64>], adjacency: &[BTreeSet<usize>]) -> Self {
        let n = sizes.len();
        Agglomeration {
            members: (0..n).map(|i| (i, vec![i])).collect(),
            size: (0..n).map(|i| (i, sizes[i] as f64)).collect(),
            profile: (0..n).map(|i| (i, profiles[i].clone())).collect(),
            adj: (0..n)
                .map(|i| (i, adjacency[i].iter().copied().filter(|&j| j != i).collect()))
                .collect(),
        }
    }

    /// Undefined correlations (constant profiles) rank below every defined one.
    fn score(&self, a: usize, b: usize) -> f64 {
        spearman(&self.profile[&a], &self.profile[&b]).unwrap_or(f64::NEG_INFINITY)
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (keep, gone) = (a.min(b), a.max(b));
        let (sk, sg) = (self.size[&keep], self.size[&gone]);
        let pg = self.profile.remove(&gone).expect("live cluster");
        let pk = self.profile.get_mut(&keep).expect("live cluster");
        for (x, y) in pk.iter_mut().zip(&pg) {
            *x = (*x * sk + y * sg) / (sk + sg);
        }
        self.size.insert(keep, sk + sg);
        self.size.remove(&gone);
        let mut moved = self.members.remove(&gone).expect("live cluster");
        self.members.get_mut(&keep).expect("live cluster").append(&mut moved);
        let gone_adj = self.adj.remove(&gone).unwrap_or_default();
        for n in gone_adj {
            if n == keep {
                continue;
            }
            if let Some(s) = self.adj.get_mut(&n) {
                s.remove(&gone);
                s.insert(keep);
            }
            self.adj.get_mut(&keep).expect("live cluster").insert(n);
        }
        let ka = self.adj.get_mut(&keep).expect("live cluster");
        ka.remove(&gone);
        ka.remove(&keep);
    }

    /// Most correlated adjacent pair; ties go to the lexicographically smaller pair.
    fn best_pair(&self, cache: &mut BTreeMap<(usize, usize), f64>) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&a, ns) in &self.adj {
            for &b in ns.range(a + 1..) {
                let s = *cache.entry((a, b)).or_insert_with(|| self.score(a, b));
                let better = match best {
                    None => true,
                    Some((_, bs)) => s > bs,
                };
                if better {
                    best = Some(((a, b), s));
                }
            }
        }
        best.map(|(p, _)| p)
    }

    fn invalidate(cache: &mut BTreeMap<(usize, usize), f64>, a: usize, b: usize) {
        cache.retain(|&(x, y), _| x != a && y != a && x != b && y != b);
    }
}

/// Greedy agglomeration of adjacent regions by descending Spearman correlation
/// of their profiles until `target` regions remain.
///
/// Returns, for every input region, the index of the output cluster it joined
/// (clusters numbered by their smallest member), and the merged profiles.
pub fn agglomerate(
    sizes: &[usize],
    profiles: &[Vec<f64>],
    adjacency: &[BTreeSet<usize>],
    target: usize,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let n = sizes.len();
    if target < 1 {
        return Err(Error::InvalidArgument("target region count must be at least 1".into()));
    }
    if target > n {
        return Err(Error::InvalidArgument(format!("target {target} exceeds current count {n}")));
    }
    if profiles.len() != n || adjacency.len() != n {
        return Err(Error::shape("agglomerate", "sizes, profiles and adjacency disagree"));
    }
    if let Some(first) = profiles.first() {
        if profiles.iter().any(|p| p.len() != first.len()) {
            return Err(Error::InvalidArgument("profiles must share one length".into()));
        }
    }
    let mut st = Agglomeration::new(sizes, profiles, adjacency);
    let mut cache = BTreeMap::new();
    while st.members.len() > target {
        let (a, b) = st.best_pair(&mut cache).ok_or(Error::Disconnected {
            target,
            remaining: st.members.len(),
        })?;
        st.merge(a, b);
        Agglomeration::invalidate(&mut cache, a, b);
    }
    Ok(finish(st, n))
}

fn finish(st: Agglomeration, n: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut assign = vec![0; n];
    let mut profiles = Vec::with_capacity(st.members.len());
    for (new_id, (root, members)) in st.members.iter().enumerate() {
        for &m in members {
            assign[m] = new_id;
        }
        profiles.push(st.profile[root].clone());
    }
    (assign, profiles)
}

fn regroup(rs: &RegionSet, assign: &[usize], clusters: usize) -> RegionSet {
    let mut groups = vec![Vec::new(); clusters];
    for (i, reg) in rs.regions.iter().enumerate() {
        groups[assign[i]].extend_from_slice(&reg.cells);
    }
    RegionSet::from_cell_groups(groups, rs.bbox, rs.height, rs.width)
}

/// Clusters raster regions down to `target` using road-shared adjacency.
pub fn cluster_regions(rs: &RegionSet, profiles: &[Vec<f64>], target: usize) -> Result<(RegionSet, Vec<Vec<f64>>)> {
    let adjacency = super::label::region_adjacency(rs);
    cluster_regions_with(rs, profiles, target, &adjacency)
}

pub fn cluster_regions_with(
    rs: &RegionSet,
    profiles: &[Vec<f64>],
    target: usize,
    adjacency: &[BTreeSet<usize>],
) -> Result<(RegionSet, Vec<Vec<f64>>)> {
    if target == rs.len() {
        return Ok((rs.clone(), profiles.to_vec()));
    }
    let sizes: Vec<usize> = rs.regions.iter().map(|r| r.cells.len()).collect();
    let (assign, merged) = agglomerate(&sizes, profiles, adjacency, target)?;
    Ok((regroup(rs, &assign, merged.len()), merged))
}

/// Folds every region smaller than `min_cells` into its most correlated
/// neighbour (ties to the lower label). Isolated small regions are kept.
pub fn merge_small_regions(rs: &RegionSet, profiles: &[Vec<f64>], min_cells: usize) -> Result<(RegionSet, Vec<Vec<f64>>)> {
    if profiles.len() != rs.len() {
        return Err(Error::shape("merge_small_regions", "one profile per region required"));
    }
    let adjacency = super::label::region_adjacency(rs);
    let sizes: Vec<usize> = rs.regions.iter().map(|r| r.cells.len()).collect();
    let mut st = Agglomeration::new(&sizes, profiles, &adjacency);
    loop {
        let small = st
            .size
            .iter()
            .find(|(id, &s)| (s as usize) < min_cells && !st.adj[id].is_empty())
            .map(|(&id, _)| id);
        let Some(a) = small else { break };
        let mut best: Option<(usize, f64)> = None;
        for &b in &st.adj[&a] {
            let s = st.score(a, b);
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((b, s));
            }
        }
        let (b, _) = best.expect("non-empty adjacency");
        st.merge(a, b);
    }
    let (assign, merged) = finish(st, rs.len());
    Ok((regroup(rs, &assign, merged.len()), merged))
}
