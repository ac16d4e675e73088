//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use mvgcn::dataprep::{FlowSeries, TrainingInstance};
use mvgcn::mapseg::BinaryGrid;
use mvgcn::model::{forward_batch, loss_and_gradients, Batch, ModelConfig, ModelParams, PropCache};
use mvgcn::numkit::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize, p_road: f64) -> BinaryGrid {
    let cells = (0..h * w).map(|_| u8::from(rng.gen_bool(p_road))).collect();
    BinaryGrid::from_cells(h, w, cells).unwrap()
}

/// Connected groups of cells equal to `value` by breadth-first flood fill,
/// each sorted, the list sorted by first cell.
pub fn flood_components(g: &BinaryGrid, value: u8, eight: bool) -> Vec<Vec<(usize, usize)>> {
    let (h, w) = (g.height(), g.width());
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let steps: &[(isize, isize)] = if eight {
        &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    } else {
        &[(-1, 0), (1, 0), (0, -1), (0, 1)]
    };
    for r in 0..h {
        for c in 0..w {
            if seen[r * w + c] || g.get(r, c) != value {
                continue;
            }
            let mut comp = Vec::new();
            let mut q = VecDeque::from([(r, c)]);
            seen[r * w + c] = true;
            while let Some((a, b)) = q.pop_front() {
                comp.push((a, b));
                for &(dr, dc) in steps {
                    let (na, nb) = (a as isize + dr, b as isize + dc);
                    if na < 0 || nb < 0 || na >= h as isize || nb >= w as isize {
                        continue;
                    }
                    let (na, nb) = (na as usize, nb as usize);
                    if !seen[na * w + nb] && g.get(na, nb) == value {
                        seen[na * w + nb] = true;
                        q.push_back((na, nb));
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
    }
    out.sort();
    out
}

/// Ranks by counting: `#{x_j < x_i} + (#{x_j == x_i} + 1) / 2`.
pub fn counting_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Direct enumeration of view timesteps: recent `t − h + 1 − i` for
/// `i = 1..l_r`, periodic `t − j·p` for `j = 1..l`.
pub fn enumerate_views(t: usize, lengths: [usize; 5], periods: [usize; 4], horizon: usize) -> [Vec<usize>; 5] {
    let mut out: [Vec<usize>; 5] = Default::default();
    for i in 1..=lengths[0] {
        out[0].push(t + 1 - horizon - i);
    }
    for v in 1..5 {
        for j in 1..=lengths[v] {
            out[v].push(t - j * periods[v - 1]);
        }
    }
    out
}

/// `D^{-1/2} (S + I) D^{-1/2}` computed densely.
pub fn dense_propagation(s: &Tensor) -> Tensor {
    let n = s.dims()[0];
    let mut m = s.clone();
    for i in 0..n {
        m.set2(i, i, m.get2(i, i) + 1.0);
    }
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.get2(i, j)).sum()).collect();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.set2(i, j, m.get2(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    out
}

/// Random symmetric 0/1 adjacency with zero diagonal.
pub fn random_adjacency(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Tensor {
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                a.set2(i, j, 1.0);
                a.set2(j, i, 1.0);
            }
        }
    }
    a
}

pub fn series_from(values: Vec<f64>, len: usize, n: usize, c: usize) -> FlowSeries {
    let start = chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    FlowSeries {
        n,
        c,
        len,
        values,
        start,
        interval_secs: 3600,
    }
}

pub fn random_series(rng: &mut ChaCha8Rng, len: usize, n: usize, c: usize) -> FlowSeries {
    let values = (0..len * n * c).map(|_| rng.gen_range(0.0..100.0f64).round()).collect();
    series_from(values, len, n, c)
}

pub fn brute_rmse(p: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - y[i]) * (p[i] - y[i]);
    }
    (s / p.len() as f64).sqrt()
}

pub fn brute_mae(p: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - y[i]).abs();
    }
    s / p.len() as f64
}

/// Random supervised instances with `N × (C·l_v)` views.
pub fn random_instances(
    rng: &mut ChaCha8Rng,
    n: usize,
    c: usize,
    lengths: [usize; 5],
    ext_width: usize,
    meta_width: usize,
    count: usize,
) -> Vec<TrainingInstance> {
    let mat = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    };
    (0..count)
        .map(|t| TrainingInstance {
            t,
            views: lengths.map(|l| mat(n, c * l, rng)),
            ext: (0..ext_width).map(|_| rng.gen_range(0.0..1.0)).collect(),
            meta: (0..meta_width).map(|_| f64::from(u8::from(rng.gen_bool(0.3)))).collect(),
            target: mat(n, c, rng),
        })
        .collect()
}

/// Sum of `½e²` for `|e| ≤ δ`, `δ(|e| − δ/2)` beyond.
pub fn huber_total(pred: &[f64], target: &[f64], delta: f64) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, y)| {
            let e = (p - y).abs();
            if e <= delta {
                0.5 * e * e
            } else {
                delta * (e - 0.5 * delta)
            }
        })
        .sum()
}

pub struct GradCheck {
    pub entries: usize,
    pub max_rel: f64,
    pub worst: String,
    /// Largest relative gap between the forward and backward one-sided
    /// differences. A gap of order one means a kink lies within `h`.
    pub max_jump: f64,
}

/// Central differences of the forward-plus-Huber loss against the tape's
/// gradients for every parameter entry. Relative error is
/// `|a − n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    params: &ModelParams,
    batch: &Batch,
    props: &mut PropCache,
    cfg: &ModelConfig,
    h: f64,
    floor: f64,
) -> GradCheck {
    let (_, grads) = loss_and_gradients(params, batch, props, cfg).unwrap();
    let mut work = params.clone();
    let mut loss = |p: &ModelParams| {
        let pred = forward_batch(p, batch, props, cfg).unwrap();
        huber_total(pred.data(), batch.target.data(), cfg.delta)
    };
    let base = loss(params);
    let mut out = GradCheck {
        entries: 0,
        max_rel: 0.0,
        worst: String::new(),
        max_jump: 0.0,
    };
    for k in 0..params.tensors.len() {
        for e in 0..params.tensors[k].len() {
            let orig = params.tensors[k].data()[e];
            work.tensors[k].data_mut()[e] = orig + h;
            let up = loss(&work);
            work.tensors[k].data_mut()[e] = orig - h;
            let down = loss(&work);
            work.tensors[k].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let (fwd, bwd) = ((up - base) / h, (base - down) / h);
            out.max_jump = out.max_jump.max((fwd - bwd).abs() / fwd.abs().max(bwd.abs()).max(floor));
            let analytic = grads[k].data()[e];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            out.entries += 1;
            if rel > out.max_rel {
                out.max_rel = rel;
                out.worst = format!("{}[{e}] analytic {analytic:e} numeric {numeric:e}", params.names[k]);
            }
        }
    }
    out
}
