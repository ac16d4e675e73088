use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::mapseg::{GeoPoint, RegionSet};
use crate::numkit::Tensor;

/// Per-slice `N × N` trip counts, origin-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCube {
    slices: usize,
    n: usize,
    counts: Vec<u32>,
}

impl TransitionCube {
    pub fn zeros(slices: usize, n: usize) -> Self {
        TransitionCube {
            slices,
            n,
            counts: vec![0; slices * n * n],
        }
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize, j: usize) -> u32 {
        self.counts[(t * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, j: usize, v: u32) {
        self.counts[(t * self.n + i) * self.n + j] = v;
    }

    #[inline]
    pub fn increment(&mut self, t: usize, i: usize, j: usize) {
        self.counts[(t * self.n + i) * self.n + j] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Dense `(T, N, N)` tensor of the counts.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.slices, self.n, self.n], self.counts.iter().map(|&c| f64::from(c)).collect())
            .expect("dims match counts")
    }

    /// Inverse of [`to_tensor`](Self::to_tensor); entries must be nonnegative integers.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let &[slices, n, m] = t.dims() else {
            return Err(Error::shape("transition cube", format!("expected rank 3, got {:?}", t.dims())));
        };
        if n != m {
            return Err(Error::shape("transition cube", format!("slices are {n}×{m}")));
        }
        let counts = t
            .data()
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                    Ok(v as u32)
                } else {
                    Err(Error::InvalidArgument(format!("transition count {v} is not a nonnegative integer")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(TransitionCube { slices, n, counts })
    }
}

/// Trip endpoint: either raw coordinates or an already-mapped region id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TripEnd {
    Point(GeoPoint),
    Region(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub origin: TripEnd,
    pub dest: TripEnd,
}

/// Maps trip endpoints to region ids.
#[derive(Debug, Clone)]
pub struct RegionLookup {
    regions: Option<(RegionSet, Vec<Option<usize>>)>,
    n: usize,
}

impl RegionLookup {
    /// Resolves coordinates through the raster label map.
    pub fn from_regions(rs: &RegionSet) -> Self {
        RegionLookup {
            n: rs.len(),
            regions: Some((rs.clone(), rs.label_map())),
        }
    }

    /// Accepts only pre-mapped region ids below `n`.
    pub fn ids_only(n: usize) -> Self {
        RegionLookup { regions: None, n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn resolve(&self, end: TripEnd) -> Option<usize> {
        match end {
            TripEnd::Region(id) => (id < self.n).then_some(id),
            TripEnd::Point(p) => {
                let (rs, map) = self.regions.as_ref()?;
                rs.locate(p, map)
            }
        }
    }
}

/// Slice index of `ts` relative to `start`, if it falls inside `slices` slices.
pub(crate) fn slice_of(ts: NaiveDateTime, start: NaiveDateTime, interval_secs: i64, slices: usize) -> Option<usize> {
    let dt = (ts - start).num_seconds();
    if dt < 0 {
        return None;
    }
    let s = (dt / interval_secs) as usize;
    (s < slices).then_some(s)
}

/// Tallies trips into the slice of their start time. Returns the cube and the
/// number of trips skipped because an endpoint resolved to no region or the
/// start fell outside the span.
pub fn count_transitions(
    trips: &[Trip],
    lookup: &RegionLookup,
    start: NaiveDateTime,
    interval_secs: i64,
    slices: usize,
) -> Result<(TransitionCube, usize)> {
    if interval_secs <= 0 {
        return Err(Error::InvalidArgument(format!("interval must be positive, got {interval_secs}s")));
    }
    let mut cube = TransitionCube::zeros(slices, lookup.len());
    let mut rejects = 0;
    for trip in trips {
        let (Some(a), Some(b), Some(t)) = (
            lookup.resolve(trip.origin),
            lookup.resolve(trip.dest),
            slice_of(trip.start, start, interval_secs, slices),
        ) else {
            rejects += 1;
            continue;
        };
        cube.increment(t, a, b);
    }
    if rejects > 0 {
        log::warn!("count_transitions: skipped {rejects} of {} trips", trips.len());
    }
    Ok((cube, rejects))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap() + chrono::Duration::hours(h as i64)
    }

    fn trip(h: u32, a: usize, b: usize) -> Trip {
        Trip {
            start: at(h),
            end: at(h + 1),
            origin: TripEnd::Region(a),
            dest: TripEnd::Region(b),
        }
    }

    #[test]
    fn cube_tensor_roundtrip() {
        let (cube, _) = count_transitions(&[trip(1, 0, 2), trip(1, 0, 2)], &RegionLookup::ids_only(3), at(0), 3600, 2).unwrap();
        let t = cube.to_tensor();
        assert_eq!(t.dims(), &[2, 3, 3]);
        assert_eq!(TransitionCube::from_tensor(&t).unwrap(), cube);
        assert!(TransitionCube::from_tensor(&Tensor::filled(&[1, 2, 2], 0.5)).is_err());
    }

    #[test]
    fn single_trip_lands_in_its_slice() {
        let (cube, rej) = count_transitions(&[trip(7, 1, 2)], &RegionLookup::ids_only(3), at(0), 3600, 10).unwrap();
        assert_eq!(rej, 0);
        assert_eq!(cube.get(7, 1, 2), 1);
        assert_eq!(cube.total(), 1);
    }

    #[test]
    fn empty_and_rejected() {
        let (cube, _) = count_transitions(&[], &RegionLookup::ids_only(3), at(0), 3600, 4).unwrap();
        assert_eq!(cube.total(), 0);
        let trips = [trip(1, 0, 9), trip(20, 0, 1), trip(2, 2, 2)];
        let (cube, rej) = count_transitions(&trips, &RegionLookup::ids_only(3), at(0), 3600, 4).unwrap();
        assert_eq!(rej, 2);
        assert_eq!(cube.get(2, 2, 2), 1);
        assert!(count_transitions(&trips, &RegionLookup::ids_only(3), at(0), 0, 4).is_err());
    }
}
