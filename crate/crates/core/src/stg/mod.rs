//! Spatio-temporal graph construction: transition-count adjacency, Gaussian
//! distance weights, the weighted adjacency, and the symmetric-normalised
//! propagation matrix shared by every graph convolution.

pub mod io;
mod transitions;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mapseg::GeoPoint;
use crate::numkit::{CsrMatrix, Tensor};

pub use transitions::{count_transitions, RegionLookup, TransitionCube, Trip, TripEnd};
pub(crate) use transitions::slice_of;

/// Validity threshold on per-slice transition counts.
pub const DEFAULT_ALPHA: u32 = 3;
/// Threshold on the fraction of valid slices.
pub const DEFAULT_BETA: f64 = 0.1;

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Distance used by the spatial kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Great-circle distance in kilometres.
    Haversine,
    /// Plain Euclidean distance on the raw coordinates.
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            Metric::Haversine => haversine_km(a, b),
            Metric::Euclidean => ((a.lat - b.lat).powi(2) + (a.lon - b.lon).powi(2)).sqrt(),
        }
    }
}

pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Places an undirected edge between `i` and `j` when the fraction of slices
/// whose symmetrised count `c[i][j] + c[j][i]` exceeds `alpha` is itself above
/// `beta`. Diagonal counts are ignored.
pub fn build_adjacency(cube: &TransitionCube, alpha: u32, beta: f64) -> Result<Tensor> {
    if cube.slices() == 0 {
        return Err(Error::EmptyCube);
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, 1], got {beta}")));
    }
    let n = cube.nodes();
    let mut valid = vec![0usize; n * n];
    for t in 0..cube.slices() {
        for i in 0..n {
            for j in i + 1..n {
                if cube.get(t, i, j) as u64 + cube.get(t, j, i) as u64 > alpha as u64 {
                    valid[i * n + j] += 1;
                }
            }
        }
    }
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in i + 1..n {
            let ratio = valid[i * n + j] as f64 / cube.slices() as f64;
            if ratio > beta {
                a.set2(i, j, 1.0);
                a.set2(j, i, 1.0);
            }
        }
    }
    Ok(a)
}

/// Thresholded Gaussian kernel: `exp(−d²/(2θ²))` for `d ≤ κ`, else 0.
pub fn spatial_weights(positions: &[GeoPoint], theta: f64, kappa: f64, metric: Metric) -> Result<Tensor> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    let n = positions.len();
    let mut w = Tensor::zeros(&[n, n]);
    for i in 0..n {
        w.set2(i, i, 1.0);
        for j in i + 1..n {
            let d = metric.distance(positions[i], positions[j]);
            let v = if d <= kappa {
                (-(d * d) / (2.0 * theta * theta)).exp()
            } else {
                0.0
            };
            w.set2(i, j, v);
            w.set2(j, i, v);
        }
    }
    Ok(w)
}

/// Hadamard mask `A ⊙ ω`.
pub fn modify_adjacency(a: &Tensor, omega: &Tensor) -> Result<Tensor> {
    a.check_same_dims(omega, "modify_adjacency")?;
    crate::numkit::hadamard(a, omega)
}

/// `Q^{-1/2} (S + I) Q^{-1/2}` with `Q = diag(rowsum(S + I))`, stored sparse.
pub fn propagation_matrix(s: &Tensor) -> Result<CsrMatrix> {
    let (n, m) = s.shape2()?;
    if n != m {
        return Err(Error::shape("propagation_matrix", format!("{n}×{m} is not square")));
    }
    if s.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("modified adjacency must be nonnegative".into()));
    }
    let mut tilde = s.clone();
    for i in 0..n {
        let v = tilde.get2(i, i) + 1.0;
        tilde.set2(i, i, v);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let q: f64 = (0..n).map(|j| tilde.get2(i, j)).sum();
            1.0 / q.sqrt()
        })
        .collect();
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = tilde.get2(i, j);
            if v != 0.0 {
                trip.push((i, j, inv_sqrt[i] * v * inv_sqrt[j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Scale and cutoff of the spatial kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub theta: f64,
    pub kappa: f64,
}

/// Default kernel: θ is the sample standard deviation of edge distances and κ
/// their 80th percentile (linear interpolation).
pub fn default_kernel(a: &Tensor, positions: &[GeoPoint], metric: Metric) -> KernelParams {
    let n = positions.len();
    let mut d = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if a.get2(i, j) != 0.0 {
                d.push(metric.distance(positions[i], positions[j]));
            }
        }
    }
    if d.is_empty() {
        return KernelParams {
            theta: 1.0,
            kappa: f64::INFINITY,
        };
    }
    d.sort_by(f64::total_cmp);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let std = if d.len() > 1 {
        (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let theta = if std > 0.0 {
        std
    } else if mean > 0.0 {
        mean
    } else {
        1.0
    };
    let pos = 0.8 * (d.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let kappa = d[lo] + (d[hi] - d[lo]) * (pos - lo as f64);
    KernelParams {
        theta,
        kappa: if kappa > 0.0 { kappa } else { f64::INFINITY },
    }
}

/// The assembled graph, immutable once built.
#[derive(Debug, Clone)]
pub struct STGraph {
    pub n: usize,
    pub adjacency: Tensor,
    pub omega: Tensor,
    pub modified: Tensor,
    pub prop: Arc<CsrMatrix>,
    pub positions: Vec<GeoPoint>,
    pub kernel: KernelParams,
    pub alpha: u32,
    pub beta: f64,
}

/// Options for [`STGraph::from_cube`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub alpha: u32,
    pub beta: f64,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
    pub metric: Metric,
    /// When false, ω is all ones and the propagation reduces to the plain
    /// self-loop normalisation of `A`.
    pub geospatial: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            theta: None,
            kappa: None,
            metric: Metric::Haversine,
            geospatial: true,
        }
    }
}

impl STGraph {
    pub fn from_cube(cube: &TransitionCube, positions: &[GeoPoint], opts: GraphOptions) -> Result<Self> {
        let a = build_adjacency(cube, opts.alpha, opts.beta)?;
        Self::from_adjacency(a, positions, opts)
    }

    pub fn from_adjacency(adjacency: Tensor, positions: &[GeoPoint], opts: GraphOptions) -> Result<Self> {
        let (n, m) = adjacency.shape2()?;
        if n != m || n != positions.len() {
            return Err(Error::shape(
                "STGraph",
                format!("adjacency {n}×{m} with {} positions", positions.len()),
            ));
        }
        let defaults = default_kernel(&adjacency, positions, opts.metric);
        let kernel = KernelParams {
            theta: opts.theta.unwrap_or(defaults.theta),
            kappa: opts.kappa.unwrap_or(defaults.kappa),
        };
        let omega = if opts.geospatial {
            spatial_weights(positions, kernel.theta, kernel.kappa, opts.metric)?
        } else {
            Tensor::filled(&[n, n], 1.0)
        };
        let modified = modify_adjacency(&adjacency, &omega)?;
        let prop = Arc::new(propagation_matrix(&modified)?);
        Ok(STGraph {
            n,
            adjacency,
            omega,
            modified,
            prop,
            positions: positions.to_vec(),
            kernel,
            alpha: opts.alpha,
            beta: opts.beta,
        })
    }

    /// Same graph with ω replaced by all ones.
    pub fn without_geospatial(&self) -> Result<Self> {
        let omega = Tensor::filled(&[self.n, self.n], 1.0);
        let modified = modify_adjacency(&self.adjacency, &omega)?;
        let prop = Arc::new(propagation_matrix(&modified)?);
        Ok(STGraph {
            omega,
            modified,
            prop,
            ..self.clone()
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.data().iter().filter(|&&v| v != 0.0).count() / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_from(slices: usize, n: usize, entries: &[(usize, usize, usize, u32)]) -> TransitionCube {
        let mut c = TransitionCube::zeros(slices, n);
        for &(t, i, j, v) in entries {
            c.set(t, i, j, v);
        }
        c
    }

    #[test]
    fn all_zero_cube_is_edgeless() {
        let a = build_adjacency(&TransitionCube::zeros(5, 4), 3, 0.1).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.0));
        assert!(matches!(build_adjacency(&TransitionCube::zeros(0, 4), 3, 0.1), Err(Error::EmptyCube)));
    }

    #[test]
    fn threshold_is_strict() {
        let entries: Vec<_> = (0..10).map(|t| (t, 0, 1, 3)).collect();
        let a = build_adjacency(&cube_from(10, 2, &entries), 3, 0.1).unwrap();
        assert_eq!(a.get2(0, 1), 0.0);
    }

    #[test]
    fn two_valid_slices_of_ten_make_an_edge() {
        let a = build_adjacency(&cube_from(10, 3, &[(2, 0, 1, 5), (7, 0, 1, 5)]), 3, 0.1).unwrap();
        assert_eq!(a.get2(0, 1), 1.0);
        assert_eq!(a.get2(1, 0), 1.0);
        assert_eq!(a.get2(0, 2), 0.0);
        // one valid slice of ten is exactly beta: no edge
        let a = build_adjacency(&cube_from(10, 2, &[(2, 0, 1, 5)]), 3, 0.1).unwrap();
        assert_eq!(a.get2(0, 1), 0.0);
    }

    #[test]
    fn counts_are_symmetrised_and_diagonal_ignored() {
        let a = build_adjacency(&cube_from(2, 2, &[(0, 0, 1, 2), (0, 1, 0, 2), (1, 0, 0, 50)]), 3, 0.1).unwrap();
        assert_eq!(a.get2(0, 1), 1.0);
        assert_eq!(a.get2(0, 0), 0.0);
    }

    #[test]
    fn kernel_values() {
        let p = [GeoPoint::new(0.0, 0.0), GeoPoint::new(3.0, 4.0), GeoPoint::new(30.0, 40.0)];
        let theta = 5.0 / 2f64.sqrt();
        let w = spatial_weights(&p, theta, 10.0, Metric::Euclidean).unwrap();
        assert_eq!(w.get2(0, 0), 1.0);
        assert!((w.get2(0, 1) - (-1f64).exp()).abs() < 1e-12);
        assert_eq!(w.get2(0, 2), 0.0);
        assert!(spatial_weights(&p, 0.0, 1.0, Metric::Euclidean).is_err());
    }

    #[test]
    fn hadamard_mask() {
        let mut a = Tensor::zeros(&[3, 3]);
        a.set2(0, 1, 1.0);
        a.set2(1, 0, 1.0);
        let w = Tensor::filled(&[3, 3], 0.5);
        let s = modify_adjacency(&a, &w).unwrap();
        assert_eq!(s.data().iter().filter(|&&v| v != 0.0).count(), 2);
        assert_eq!(s.get2(0, 1), 0.5);
        assert_eq!(s.get2(1, 0), 0.5);
        assert!(modify_adjacency(&a, &Tensor::zeros(&[2, 2])).is_err());
    }

    #[test]
    fn two_node_propagation_is_all_half() {
        let s = Tensor::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let p = propagation_matrix(&s).unwrap().to_dense();
        assert!(p.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let id = propagation_matrix(&Tensor::zeros(&[4, 4])).unwrap();
        assert_eq!(id, CsrMatrix::identity(4));
    }

    #[test]
    fn haversine_one_degree_of_latitude() {
        let d = haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 0.0));
        assert!((d - 111.195).abs() < 0.01, "{d}");
    }

    #[test]
    fn default_kernel_on_known_distances() {
        let p = [GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 1.0), GeoPoint::new(0.0, 3.0)];
        let mut a = Tensor::zeros(&[3, 3]);
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            a.set2(i, j, 1.0);
            a.set2(j, i, 1.0);
        }
        let k = default_kernel(&a, &p, Metric::Euclidean);
        // distances 1, 2, 3: std 1, 80th percentile 2.6
        assert!((k.theta - 1.0).abs() < 1e-12);
        assert!((k.kappa - 2.6).abs() < 1e-12);
    }

    #[test]
    fn geospatial_off_equals_plain_normalisation() {
        let p = [GeoPoint::new(39.9, 116.3), GeoPoint::new(39.95, 116.35), GeoPoint::new(40.0, 116.5)];
        let mut a = Tensor::zeros(&[3, 3]);
        for (i, j) in [(0, 1), (1, 2)] {
            a.set2(i, j, 1.0);
            a.set2(j, i, 1.0);
        }
        let g = STGraph::from_adjacency(a.clone(), &p, GraphOptions::default()).unwrap();
        let off = g.without_geospatial().unwrap();
        assert_eq!(*off.prop, propagation_matrix(&a).unwrap());
        let built_off = STGraph::from_adjacency(a, &p, GraphOptions { geospatial: false, ..Default::default() }).unwrap();
        assert_eq!(*built_off.prop, *off.prop);
    }
}
