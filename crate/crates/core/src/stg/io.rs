//! Trip input and graph edge-list files.

use std::path::Path;
use std::sync::Arc;

use super::{propagation_matrix, KernelParams, STGraph, Trip, TripEnd};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_timestamp, write_atomic};
use crate::mapseg::GeoPoint;
use crate::numkit::Tensor;

fn parse_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    }
}

/// Reads trips in either the coordinate layout
/// `start_ts, end_ts, start_lat, start_lon, end_lat, end_lon` or the pre-mapped
/// layout `start_ts, end_ts, origin_region, dest_region`, picked by header.
pub fn read_trips(path: &Path) -> Result<Vec<Trip>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let start_ts = col("start_ts").ok_or_else(|| parse_err(path, 1, "missing start_ts column"))?;
    let end_ts = col("end_ts").ok_or_else(|| parse_err(path, 1, "missing end_ts column"))?;
    let mapped = match (col("origin_region"), col("dest_region")) {
        (Some(o), Some(d)) => Some((o, d)),
        _ => None,
    };
    let coords = match (col("start_lat"), col("start_lon"), col("end_lat"), col("end_lon")) {
        (Some(a), Some(b), Some(c), Some(d)) => Some([a, b, c, d]),
        _ => None,
    };
    if mapped.is_none() && coords.is_none() {
        return Err(parse_err(path, 1, "need origin_region/dest_region or start/end lat/lon columns"));
    }

    let mut trips = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let ts = |i: usize| parse_timestamp(field(i)).ok_or_else(|| parse_err(path, line, format!("bad timestamp `{}`", field(i))));
        let start = ts(start_ts)?;
        let end = ts(end_ts)?;
        let (origin, dest) = if let Some((o, d)) = mapped {
            let id = |i: usize| {
                field(i)
                    .parse::<usize>()
                    .map_err(|e| parse_err(path, line, format!("bad region id `{}`: {e}", field(i))))
            };
            (TripEnd::Region(id(o)?), TripEnd::Region(id(d)?))
        } else {
            let c = coords.expect("checked above");
            let num = |i: usize| {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, line, format!("bad coordinate `{}`: {e}", field(i))))
            };
            (
                TripEnd::Point(GeoPoint::new(num(c[0])?, num(c[1])?)),
                TripEnd::Point(GeoPoint::new(num(c[2])?, num(c[3])?)),
            )
        };
        trips.push(Trip { start, end, origin, dest });
    }
    Ok(trips)
}

/// Writes a pre-mapped trip file.
pub fn write_trips(path: &Path, trips: &[Trip]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["start_ts", "end_ts", "origin_region", "dest_region"])?;
    for t in trips {
        let (TripEnd::Region(o), TripEnd::Region(d)) = (t.origin, t.dest) else {
            return Err(Error::InvalidArgument("write_trips expects region-mapped trips".into()));
        };
        w.write_record([
            crate::io::format_timestamp(t.start),
            crate::io::format_timestamp(t.end),
            o.to_string(),
            d.to_string(),
        ])?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

/// Edge list `i, j, a_ij, omega_ij, s_ij` over every pair `i < j` with a
/// nonzero `a_ij` or `omega_ij`, preceded by a `# n=.. theta=..` comment line.
pub fn write_graph(path: &Path, g: &STGraph) -> Result<()> {
    let mut buf = format!(
        "# n={} theta={} kappa={} alpha={} beta={}\n",
        g.n,
        fmt_f64(g.kernel.theta),
        fmt_f64(g.kernel.kappa),
        g.alpha,
        fmt_f64(g.beta)
    )
    .into_bytes();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["i", "j", "a_ij", "omega_ij", "s_ij"])?;
    for i in 0..g.n {
        for j in i + 1..g.n {
            let (a, o) = (g.adjacency.get2(i, j), g.omega.get2(i, j));
            if a != 0.0 || o != 0.0 {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    fmt_f64(a),
                    fmt_f64(o),
                    fmt_f64(g.modified.get2(i, j)),
                ])?;
            }
        }
    }
    buf.extend(w.into_inner().map_err(|e| Error::Io(e.into_error()))?);
    write_atomic(path, &buf)
}

/// Reads a graph written by [`write_graph`]. `positions` must have one entry
/// per node.
pub fn read_graph(path: &Path, positions: &[GeoPoint]) -> Result<STGraph> {
    let text = std::fs::read_to_string(path)?;
    let header = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| parse_err(path, 1, "missing `# n=...` header"))?;
    let mut n = None;
    let (mut theta, mut kappa, mut alpha, mut beta) = (None, None, None, None);
    for kv in header.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(path, 1, format!("bad header field `{kv}`")))?;
        let bad = |_| parse_err(path, 1, format!("bad value for {k}: `{v}`"));
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "theta" => theta = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "kappa" => kappa = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "alpha" => alpha = Some(v.parse::<u32>().map_err(|e| bad(e.to_string()))?),
            "beta" => beta = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            _ => {}
        }
    }
    let n = n.ok_or_else(|| parse_err(path, 1, "header lacks n"))?;
    if positions.len() != n {
        return Err(Error::shape("read_graph", format!("graph has {n} nodes, {} positions given", positions.len())));
    }

    let mut a = Tensor::zeros(&[n, n]);
    let mut omega = Tensor::eye(n);
    let mut s = Tensor::zeros(&[n, n]);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for row in rdr.deserialize() {
        let (i, j, aij, oij, sij): (usize, usize, f64, f64, f64) = row?;
        if i >= n || j >= n || i == j {
            return Err(parse_err(path, 0, format!("edge ({i}, {j}) invalid for n={n}")));
        }
        for (m, v) in [(&mut a, aij), (&mut omega, oij), (&mut s, sij)] {
            m.set2(i, j, v);
            m.set2(j, i, v);
        }
    }
    let prop = Arc::new(propagation_matrix(&s)?);
    Ok(STGraph {
        n,
        adjacency: a,
        omega,
        modified: s,
        prop,
        positions: positions.to_vec(),
        kernel: KernelParams {
            theta: theta.unwrap_or(1.0),
            kappa: kappa.unwrap_or(f64::INFINITY),
        },
        alpha: alpha.unwrap_or(super::DEFAULT_ALPHA),
        beta: beta.unwrap_or(super::DEFAULT_BETA),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stg::{GraphOptions, STGraph};

    #[test]
    fn graph_roundtrip() {
        let p = [GeoPoint::new(39.9, 116.3), GeoPoint::new(39.95, 116.35), GeoPoint::new(40.0, 116.5)];
        let mut a = Tensor::zeros(&[3, 3]);
        for (i, j) in [(0, 1), (1, 2)] {
            a.set2(i, j, 1.0);
            a.set2(j, i, 1.0);
        }
        let g = STGraph::from_adjacency(a, &p, GraphOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.csv");
        write_graph(&path, &g).unwrap();
        let back = read_graph(&path, &p).unwrap();
        assert_eq!(back.adjacency, g.adjacency);
        assert_eq!(back.omega, g.omega);
        assert_eq!(back.modified, g.modified);
        assert_eq!(*back.prop, *g.prop);
        assert_eq!(back.kernel, g.kernel);
    }

    #[test]
    fn both_trip_layouts_parse() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "start_ts,end_ts,origin_region,dest_region\n2024-01-01T00:10:00,2024-01-01T00:40:00,0,2\n").unwrap();
        let t = read_trips(&a).unwrap();
        assert_eq!(t[0].dest, TripEnd::Region(2));
        let b = dir.path().join("b.csv");
        std::fs::write(
            &b,
            "start_ts,end_ts,start_lat,start_lon,end_lat,end_lon\n2024-01-01 00:10:00,2024-01-01 00:40:00,1.5,2.5,3.5,4.5\n",
        )
        .unwrap();
        let t = read_trips(&b).unwrap();
        assert_eq!(t[0].origin, TripEnd::Point(GeoPoint::new(1.5, 2.5)));
        let c = dir.path().join("c.csv");
        std::fs::write(&c, "start_ts,end_ts,origin_region,dest_region\nyesterday,2024-01-01T00:40:00,0,2\n").unwrap();
        assert!(matches!(read_trips(&c), Err(Error::Parse { .. })));
    }
}
