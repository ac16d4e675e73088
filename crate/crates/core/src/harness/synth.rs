//! Seeded synthetic city: region positions, hourly inflow/outflow with daily
//! and weekly cycles, a spatially correlated latent field that diffuses along
//! nearby transition edges, holiday and storm shocks, externals, and a
//! transition cube whose row sums equal each region's outflow.

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataprep::{ExternalRecord, FlowSeries, CHANNELS, INFLOW, OUTFLOW};
use crate::error::{Error, Result};
use crate::mapseg::GeoPoint;
use crate::numkit::{spmm, Tensor};
use crate::stg::{haversine_km, GraphOptions, Metric, STGraph, TransitionCube};

/// Weather codes emitted by the generator.
pub const WEATHER_VOCAB: usize = 4;
pub const WEATHER_CLEAR: usize = 0;
pub const WEATHER_CLOUDY: usize = 1;
pub const WEATHER_RAIN: usize = 2;
pub const WEATHER_STORM: usize = 3;

const CENTER: GeoPoint = GeoPoint { lat: 39.9, lon: 116.4 };
/// Share of a region's outflow sent along its long-range edge.
const LONG_RANGE_SHARE: f64 = 0.2;
/// Shares of the stochastic variance: white observation noise, and the
/// day-to-day drift of each hour's level. The latent field takes the rest.
const OBSERVATION_SHARE: f64 = 0.03;
const DRIFT_SHARE: f64 = 0.45;
/// Correlation of an hour's drift with the same hour one day earlier.
const DRIFT_PERSISTENCE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub weeks: usize,
    /// RMS of the daily cycle relative to a region's base level.
    pub daily_amplitude: f64,
    /// RMS of the weekday/weekend modulation relative to base level.
    pub weekly_amplitude: f64,
    /// Fraction of the latent field mixed from graph neighbours each step.
    pub diffusion: f64,
    /// Hourly autocorrelation of the latent field.
    pub persistence: f64,
    /// Per-day probability of a holiday, and separately of a storm.
    pub shock_prob: f64,
    pub shock_magnitude: f64,
    /// Standard deviation of the stochastic part relative to base level.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 20,
            weeks: 12,
            daily_amplitude: 0.4,
            weekly_amplitude: 0.15,
            diffusion: 0.5,
            persistence: 0.995,
            shock_prob: 0.04,
            shock_magnitude: 1.0,
            noise: 0.3,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 {
            return bad(format!("synthetic city needs at least 2 regions, got {}", self.n));
        }
        if self.weeks < 10 {
            return bad(format!("synthetic series needs at least 10 weeks, got {}", self.weeks));
        }
        let mags = [
            self.daily_amplitude,
            self.weekly_amplitude,
            self.diffusion,
            self.persistence,
            self.shock_prob,
            self.shock_magnitude,
            self.noise,
        ];
        if mags.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return bad("synthetic magnitudes must be finite and nonnegative".into());
        }
        if self.diffusion > 1.0 || self.persistence >= 1.0 || self.shock_prob > 1.0 {
            return bad("diffusion and shock probability must be ≤ 1, persistence < 1".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weeks * 168
    }

    pub fn is_empty(&self) -> bool {
        self.weeks == 0
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub series: FlowSeries,
    pub cube: TransitionCube,
    pub externals: Vec<(NaiveDateTime, ExternalRecord)>,
    pub positions: Vec<GeoPoint>,
    /// Transition edges the generator routes trips along.
    pub adjacency: Tensor,
    /// Flow values raised to 0 before rounding.
    pub clamped: usize,
}

pub fn synth_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Zero-mean, unit-RMS copy of `v`; an all-constant input stays zero.
fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let rms = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in v.iter_mut() {
        *x = if rms > 0.0 { (*x - mean) / rms } else { 0.0 };
    }
}

fn bump(hour: f64, peak: f64, width: f64) -> f64 {
    let d = (hour - peak).rem_euclid(24.0);
    let d = d.min(24.0 - d);
    (-(d * d) / (2.0 * width * width)).exp()
}

/// Symmetric k-nearest-neighbour edges plus roughly one long-range edge per
/// four regions, each joining a region to one beyond the median distance.
fn transition_graph(positions: &[GeoPoint], rng: &mut ChaCha8Rng) -> (Tensor, Vec<(usize, usize)>) {
    let n = positions.len();
    let k = 3.min(n - 1);
    let dist = |i: usize, j: usize| haversine_km(positions[i], positions[j]);
    let mut a = Tensor::zeros(&[n, n]);
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&x, &y| dist(i, x).total_cmp(&dist(i, y)).then(x.cmp(&y)));
        for &j in &others[..k] {
            a.set2(i, j, 1.0);
            a.set2(j, i, 1.0);
        }
    }
    let mut all: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist(i, j)).collect();
    all.sort_by(f64::total_cmp);
    let median = all[all.len() / 2];
    let mut long = Vec::new();
    for _ in 0..(n / 4).max(1) {
        for _attempt in 0..50 {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i != j && a.get2(i, j) == 0.0 && dist(i, j) > median {
                a.set2(i, j, 1.0);
                a.set2(j, i, 1.0);
                long.push((i.min(j), i.max(j)));
                break;
            }
        }
    }
    (a, long)
}

/// Per-node scale making the stationary variance of
/// `z ← M z + sqrt(1 − ρ²) ε` equal to one.
fn stationary_scale(m: &Tensor, rho: f64) -> Vec<f64> {
    let n = m.dims()[0];
    let q = 1.0 - rho * rho;
    let mut sigma = Tensor::zeros(&[n, n]);
    for _ in 0..2000 {
        let ms = crate::numkit::matmul(m, &sigma).expect("square");
        let mut next = crate::numkit::matmul(&ms, &m.transpose().expect("rank 2")).expect("square");
        for i in 0..n {
            let v = next.get2(i, i) + q;
            next.set2(i, i, v);
        }
        let done = next.max_abs_diff(&sigma) < 1e-13;
        sigma = next;
        if done {
            break;
        }
    }
    (0..n).map(|i| 1.0 / sigma.get2(i, i).sqrt().max(1e-12)).collect()
}

/// Splits `total` over `weights` (summing to 1) by largest remainder; ties go
/// to the lower index.
fn allocate(total: u32, weights: &[(usize, f64)]) -> Vec<(usize, u32)> {
    let raw: Vec<f64> = weights.iter().map(|&(_, w)| w * total as f64).collect();
    let mut out: Vec<(usize, u32)> = weights.iter().zip(&raw).map(|(&(j, _), r)| (j, r.floor() as u32)).collect();
    let assigned: u32 = out.iter().map(|o| o.1).sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&x, &y| (raw[y] - raw[y].floor()).total_cmp(&(raw[x] - raw[x].floor())).then(x.cmp(&y)));
    for &k in order.iter().take((total - assigned) as usize) {
        out[k].1 += 1;
    }
    out
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, len) = (cfg.n, cfg.len());

    let positions: Vec<GeoPoint> = (0..n)
        .map(|_| GeoPoint::new(CENTER.lat + rng.gen_range(-0.12..0.12), CENTER.lon + rng.gen_range(-0.16..0.16)))
        .collect();
    let (adjacency, long_edges) = transition_graph(&positions, &mut rng);
    let graph = STGraph::from_adjacency(adjacency.clone(), &positions, GraphOptions::default())?;

    // Region character: downtown share decays with distance from the centre.
    let downtown: Vec<f64> = positions
        .iter()
        .map(|&p| (-(haversine_km(p, CENTER).powi(2)) / (2.0 * 6.0f64.powi(2))).exp())
        .collect();
    let base: Vec<f64> = downtown.iter().map(|u| 25.0 + 45.0 * u + rng.gen_range(0.0..10.0)).collect();

    // Daily profiles per channel: morning and evening peaks mixed by downtown share.
    let mut daily = vec![[[0.0; 24]; CHANNELS]; n];
    for i in 0..n {
        let u = downtown[i];
        for h in 0..24 {
            let hf = h as f64;
            daily[i][INFLOW][h] = u * bump(hf, 9.0, 2.0) + (1.0 - u) * bump(hf, 18.5, 2.5) + 0.3 * bump(hf, 13.0, 3.0);
            daily[i][OUTFLOW][h] = u * bump(hf, 18.0, 2.0) + (1.0 - u) * bump(hf, 8.0, 2.5) + 0.3 * bump(hf, 13.0, 3.0);
        }
        for c in 0..CHANNELS {
            standardize(&mut daily[i][c]);
        }
    }
    let mut weekly = [0.0; 168];
    for (h, w) in weekly.iter_mut().enumerate() {
        let weekend = h / 24 >= 5;
        *w = if weekend { -1.0 } else { 0.4 } + 0.2 * bump((h % 24) as f64, 20.0, 2.0) * f64::from(u8::from(h / 24 == 4));
    }
    standardize(&mut weekly);

    // Latent field: z ← ρ((1 − s) z + s P z) + sqrt(1 − ρ²) ε, with P the
    // geo-weighted propagation of the transition graph.
    let (rho, s) = (cfg.persistence, cfg.diffusion);
    let p_dense = graph.prop.to_dense();
    let mut m = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 - s } else { 0.0 };
            m.set2(i, j, rho * (id + s * p_dense.get2(i, j)));
        }
    }
    let scale = stationary_scale(&m, rho);
    let lat_sd = cfg.noise * (1.0 - OBSERVATION_SHARE - DRIFT_SHARE).sqrt();
    let obs_sd = cfg.noise * OBSERVATION_SHARE.sqrt();
    let drift_sd = cfg.noise * DRIFT_SHARE.sqrt();
    let drift_innov = (1.0 - DRIFT_PERSISTENCE * DRIFT_PERSISTENCE).sqrt();
    let mut drift: Vec<[[f64; 24]; CHANNELS]> = (0..n)
        .map(|_| {
            let mut d = [[0.0; 24]; CHANNELS];
            for row in d.iter_mut() {
                for v in row.iter_mut() {
                    *v = normal(&mut rng);
                }
            }
            d
        })
        .collect();
    let innov = (1.0 - rho * rho).sqrt();

    // Shock calendar.
    let days = len / 24;
    let mut holiday = vec![false; days];
    let mut storm = vec![false; len];
    for d in 0..days {
        holiday[d] = rng.gen_bool(cfg.shock_prob);
        if rng.gen_bool(cfg.shock_prob) {
            let start = d * 24 + rng.gen_range(7..18);
            let dur = rng.gen_range(3..=5);
            for t in start..(start + dur).min(len) {
                storm[t] = true;
            }
        }
    }
    let holiday_factor = 1.0 - 0.25 * cfg.shock_magnitude.min(2.0);
    let storm_factor = 0.4 / (1.0 + cfg.shock_magnitude);

    let start = synth_start();
    let mut series = FlowSeries::zeros(len, n, CHANNELS, start, 3600);
    let mut externals = Vec::with_capacity(len);
    let mut z = vec![0.0; n];
    let mut weather = WEATHER_CLEAR;
    let mut clamped = 0;
    for t in 0..len {
        // latent update
        let zt = Tensor::new(vec![n, 1], z.clone())?;
        let pz = spmm(&graph.prop, &zt)?;
        let eps: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        for i in 0..n {
            z[i] = rho * ((1.0 - s) * z[i] + s * pz.data()[i]) + innov * eps[i];
        }

        if storm[t] {
            weather = WEATHER_STORM;
        } else if weather == WEATHER_STORM || rng.gen_bool(0.08) {
            weather = match rng.gen_range(0..10) {
                0..=5 => WEATHER_CLEAR,
                6..=8 => WEATHER_CLOUDY,
                _ => WEATHER_RAIN,
            };
        }
        let hour = t % 24;
        let day = t / 24;
        let mut factor = 1.0;
        if holiday[day] {
            factor *= holiday_factor;
        }
        if storm[t] {
            factor *= storm_factor;
        }
        for i in 0..n {
            for c in 0..CHANNELS {
                let periodic = 1.0 + cfg.daily_amplitude * daily[i][c][hour] + cfg.weekly_amplitude * weekly[t % 168];
                if t >= 24 {
                    drift[i][c][hour] = DRIFT_PERSISTENCE * drift[i][c][hour] + drift_innov * normal(&mut rng);
                }
                let stochastic = lat_sd * scale[i] * z[i] + drift_sd * drift[i][c][hour] + obs_sd * normal(&mut rng);
                let v = base[i] * (periodic + stochastic) * factor;
                if v < 0.0 {
                    clamped += 1;
                }
                series.set(t, i, c, v.max(0.0).round());
            }
        }
        let temp = 8.0 + 7.0 * ((hour as f64 - 9.0) / 24.0 * std::f64::consts::TAU).sin() + 2.0 * normal(&mut rng);
        let wind = 2.0 + 1.5 * normal(&mut rng).abs() + if storm[t] { 9.0 } else { 0.0 };
        externals.push((
            series.timestamp(t),
            ExternalRecord {
                weather: Some(weather),
                holiday: Some(holiday[day]),
                temperature: Some((temp * 10.0).round() / 10.0),
                wind: Some((wind * 10.0).round() / 10.0),
            },
        ));
    }

    // Route each region's outflow over its transition edges.
    let mut routes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let long: Vec<usize> = long_edges
            .iter()
            .filter_map(|&(a, b)| if a == i { Some(b) } else if b == i { Some(a) } else { None })
            .collect();
        let near: Vec<usize> = (0..n).filter(|&j| adjacency.get2(i, j) != 0.0 && !long.contains(&j)).collect();
        let near_share = if long.is_empty() { 1.0 } else { 1.0 - LONG_RANGE_SHARE };
        let mut w: Vec<(usize, f64)> = near.iter().map(|&j| (j, near_share / near.len() as f64)).collect();
        w.extend(long.iter().map(|&j| (j, LONG_RANGE_SHARE / long.len() as f64)));
        w.sort_by_key(|x| x.0);
        routes.push(w);
    }
    let mut cube = TransitionCube::zeros(len, n);
    for t in 0..len {
        for i in 0..n {
            let total = series.get(t, i, OUTFLOW) as u32;
            for (j, cnt) in allocate(total, &routes[i]) {
                cube.set(t, i, j, cnt);
            }
        }
    }
    if clamped > 0 {
        log::info!("synth: clamped {clamped} negative flow values to 0");
    }
    Ok(SynthOutput {
        series,
        cube,
        externals,
        positions,
        adjacency,
        clamped,
    })
}

/// Graph options matching the generator's distance metric.
pub fn synth_graph_options() -> GraphOptions {
    GraphOptions {
        metric: Metric::Haversine,
        ..GraphOptions::default()
    }
}
