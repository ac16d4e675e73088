use crate::error::{Error, Result};

/// Geographic position in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoPoint { lat, lon }
    }
}

/// Axis-aligned latitude/longitude box, mapped equirectangularly onto the raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self> {
        let b = BBox {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        };
        if !(max_lat > min_lat && max_lon > min_lon) || ![min_lat, min_lon, max_lat, max_lon].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!("degenerate bounding box {b:?}")));
        }
        Ok(b)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    /// Cell `(row, col)` holding `p`; row 0 is the northern edge.
    pub fn cell_of(&self, p: GeoPoint, height: usize, width: usize) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let fr = (self.max_lat - p.lat) / (self.max_lat - self.min_lat) * height as f64;
        let fc = (p.lon - self.min_lon) / (self.max_lon - self.min_lon) * width as f64;
        let r = (fr.floor() as usize).min(height - 1);
        let c = (fc.floor() as usize).min(width - 1);
        Some((r, c))
    }

    pub fn cell_center(&self, row: usize, col: usize, height: usize, width: usize) -> GeoPoint {
        let lat = self.max_lat - (row as f64 + 0.5) * (self.max_lat - self.min_lat) / height as f64;
        let lon = self.min_lon + (col as f64 + 0.5) * (self.max_lon - self.min_lon) / width as f64;
        GeoPoint { lat, lon }
    }
}

/// Raster of road (1) and blank (0) cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    height: usize,
    width: usize,
    cells: Vec<u8>,
}

impl BinaryGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        BinaryGrid {
            height,
            width,
            cells: vec![0; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        BinaryGrid {
            height,
            width,
            cells: vec![1; height * width],
        }
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(Error::shape(
                "BinaryGrid::from_cells",
                format!("{height}×{width} needs {} cells, got {}", height * width, cells.len()),
            ));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::InvalidArgument("grid cells must be 0 or 1".into()));
        }
        Ok(BinaryGrid { height, width, cells })
    }

    /// Parses rows of `'#'`/`'1'` (road) and `'.'`/`'0'` (blank). Handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(height * width);
        for r in rows {
            assert_eq!(r.len(), width, "ragged ascii grid");
            cells.extend(r.bytes().map(|b| u8::from(b == b'#' || b == b'1')));
        }
        BinaryGrid { height, width, cells }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.cells[r * self.width + c]
    }

    /// Out-of-bounds reads as 0.
    #[inline]
    pub fn get_signed(&self, r: isize, c: isize) -> u8 {
        if r < 0 || c < 0 || r as usize >= self.height || c as usize >= self.width {
            0
        } else {
            self.cells[r as usize * self.width + c as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.cells[r * self.width + c] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// True when every road cell of `self` is also a road cell of `other`.
    pub fn is_subset_of(&self, other: &BinaryGrid) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| a <= b)
    }

    pub fn to_ascii(&self) -> Vec<String> {
        (0..self.height)
            .map(|r| {
                (0..self.width)
                    .map(|c| if self.get(r, c) == 1 { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }
}

/// Burns polylines into a fresh `height × width` raster with integer line drawing.
pub fn rasterize_roads(segments: &[Vec<GeoPoint>], bbox: BBox, height: usize, width: usize) -> Result<BinaryGrid> {
    let bbox = BBox::new(bbox.min_lat, bbox.min_lon, bbox.max_lat, bbox.max_lon)?;
    if height < 2 || width < 2 {
        return Err(Error::InvalidArgument(format!("raster must be at least 2×2, got {height}×{width}")));
    }
    let mut grid = BinaryGrid::zeros(height, width);
    for line in segments {
        let mut cells = Vec::with_capacity(line.len());
        for &p in line {
            let cell = bbox
                .cell_of(p, height, width)
                .ok_or(Error::OutsideBbox { lat: p.lat, lon: p.lon })?;
            cells.push(cell);
        }
        if let [only] = cells.as_slice() {
            grid.set(only.0, only.1, 1);
        }
        for pair in cells.windows(2) {
            for (r, c) in bresenham(pair[0], pair[1]) {
                grid.set(r, c, 1);
            }
        }
    }
    Ok(grid)
}

/// Cells on the integer line between two cells, endpoints included.
pub fn bresenham(from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut r, mut c) = (from.0 as isize, from.1 as isize);
    let (r1, c1) = (to.0 as isize, to.1 as isize);
    let dr = (r1 - r).abs();
    let dc = -(c1 - c).abs();
    let sr = if r < r1 { 1 } else { -1 };
    let sc = if c < c1 { 1 } else { -1 };
    let mut err = dr + dc;
    let mut out = Vec::with_capacity((dr - dc + 1) as usize);
    loop {
        out.push((r as usize, c as usize));
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
    out
}

/// Binary dilation with a full 3×3 structuring element, applied `iterations` times.
pub fn dilate(g: &BinaryGrid, iterations: usize) -> BinaryGrid {
    let mut cur = g.clone();
    for _ in 0..iterations {
        let mut next = cur.clone();
        for r in 0..cur.height {
            for c in 0..cur.width {
                if cur.get(r, c) == 1 {
                    continue;
                }
                let hit = (-1..=1).any(|dr| {
                    (-1..=1).any(|dc| cur.get_signed(r as isize + dr, c as isize + dc) == 1)
                });
                if hit {
                    next.set(r, c, 1);
                }
            }
        }
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}
