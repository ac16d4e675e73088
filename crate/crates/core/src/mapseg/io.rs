//! Road input and region output files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{BBox, GeoPoint};
use super::label::RegionSet;
use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Deserialize)]
struct RoadRow {
    #[allow(dead_code)]
    segment_id: String,
    lat1: f64,
    lon1: f64,
    lat2: f64,
    lon2: f64,
}

/// Reads `segment_id, lat1, lon1, lat2, lon2` rows; each row is one road edge.
pub fn read_roads(path: &Path) -> Result<Vec<Vec<GeoPoint>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: RoadRow = row?;
        out.push(vec![GeoPoint::new(r.lat1, r.lon1), GeoPoint::new(r.lat2, r.lon2)]);
    }
    Ok(out)
}

/// One line of the region table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub region_id: usize,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
    pub cell_count: usize,
}

pub fn region_rows(rs: &RegionSet) -> Vec<RegionRow> {
    rs.regions
        .iter()
        .map(|r| RegionRow {
            region_id: r.id,
            centroid_lat: r.centroid.lat,
            centroid_lon: r.centroid.lon,
            cell_count: r.cells.len(),
        })
        .collect()
}

pub fn write_region_table(path: &Path, rows: &[RegionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

pub fn read_region_table(path: &Path) -> Result<Vec<RegionRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r?);
    }
    Ok(rows)
}

/// Writes `row, col, region_id` with a leading `# bbox=... dims=H,W` comment.
pub fn write_membership(path: &Path, rs: &RegionSet) -> Result<()> {
    let b = rs.bbox;
    let mut buf = format!(
        "# bbox={:?},{:?},{:?},{:?} dims={},{}\n",
        b.min_lat, b.min_lon, b.max_lat, b.max_lon, rs.height, rs.width
    )
    .into_bytes();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "col", "region_id"])?;
    for reg in &rs.regions {
        for &(r, c) in &reg.cells {
            w.write_record([r.to_string(), c.to_string(), reg.id.to_string()])?;
        }
    }
    buf.extend(w.into_inner().map_err(|e| Error::Io(e.into_error()))?);
    write_atomic(path, &buf)
}

pub fn read_membership(path: &Path) -> Result<RegionSet> {
    let text = std::fs::read_to_string(path)?;
    let perr = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let header = text.lines().next().ok_or_else(|| perr("empty file"))?;
    let rest = header.strip_prefix("# bbox=").ok_or_else(|| perr("missing bbox header"))?;
    let (bbox_s, dims_s) = rest.split_once(" dims=").ok_or_else(|| perr("missing dims"))?;
    let bb: Vec<f64> = bbox_s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| perr("bad bbox"))?;
    let dims: Vec<usize> = dims_s
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| perr("bad dims"))?;
    if bb.len() != 4 || dims.len() != 2 {
        return Err(perr("malformed header"));
    }
    let bbox = BBox::new(bb[0], bb[1], bb[2], bb[3])?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for rec in rdr.deserialize() {
        let (r, c, id): (usize, usize, usize) = rec?;
        if r >= dims[0] || c >= dims[1] {
            return Err(perr("cell outside raster"));
        }
        if groups.len() <= id {
            groups.resize(id + 1, Vec::new());
        }
        groups[id].push((r, c));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(perr("region ids are not contiguous"));
    }
    Ok(RegionSet::from_cell_groups(groups, bbox, dims[0], dims[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapseg::{label_regions, BinaryGrid};

    #[test]
    fn membership_roundtrip() {
        let g = BinaryGrid::from_ascii(&["..#..", "..#..", "#####", "....."]);
        let rs = label_regions(&g, BBox::new(39.9, 116.3, 40.0, 116.4).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_membership(&p, &rs).unwrap();
        let back = read_membership(&p).unwrap();
        assert_eq!(back, rs);
        let t = dir.path().join("r.csv");
        write_region_table(&t, &region_rows(&rs)).unwrap();
        assert_eq!(read_region_table(&t).unwrap(), region_rows(&rs));
    }

    #[test]
    fn road_csv_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("roads.csv");
        std::fs::write(&p, "segment_id,lat1,lon1,lat2,lon2\nA, 39.9, 116.3, 39.95, 116.35\nB,40,116.4,40,116.3\n").unwrap();
        let roads = read_roads(&p).unwrap();
        assert_eq!(roads.len(), 2);
        assert_eq!(roads[1][0], GeoPoint::new(40.0, 116.4));
    }
}
