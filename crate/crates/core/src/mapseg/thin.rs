//! Zhang–Suen skeletonization.
//!
//! Each sub-iteration selects deletion candidates against a snapshot, as in the
//! classic two-pass scheme. Candidates are then removed in scan order, and a
//! candidate is kept if, given the removals already made, it is no longer a
//! simple point (one 0→1 transition around it and 2..=6 road neighbours).
//! Without that re-check, parallel removal erases 2×2 blocks and two-cell-wide
//! diagonals outright.

use super::grid::BinaryGrid;

/// Neighbours `P2..P9`, clockwise from north.
const RING: [(isize, isize); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

#[inline]
fn ring(g: &BinaryGrid, r: usize, c: usize) -> [u8; 8] {
    let mut p = [0u8; 8];
    for (k, (dr, dc)) in RING.iter().enumerate() {
        p[k] = g.get_signed(r as isize + dr, c as isize + dc);
    }
    p
}

#[inline]
fn transitions(p: &[u8; 8]) -> usize {
    (0..8).filter(|&k| p[k] == 0 && p[(k + 1) % 8] == 1).count()
}

#[inline]
fn is_simple(p: &[u8; 8]) -> bool {
    let b: u8 = p.iter().sum();
    (2..=6).contains(&b) && transitions(p) == 1
}

/// Thins road cells to a one-cell-wide skeleton; output ⊆ input and the number
/// of 8-connected road components is preserved.
pub fn thin(g: &BinaryGrid) -> BinaryGrid {
    let mut cur = g.clone();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut candidates = Vec::new();
            for r in 0..cur.height() {
                for c in 0..cur.width() {
                    if cur.get(r, c) == 0 {
                        continue;
                    }
                    let p = ring(&cur, r, c);
                    if !is_simple(&p) {
                        continue;
                    }
                    // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
                    let ok = if pass == 0 {
                        p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0
                    } else {
                        p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0
                    };
                    if ok {
                        candidates.push((r, c));
                    }
                }
            }
            for (r, c) in candidates {
                if is_simple(&ring(&cur, r, c)) {
                    cur.set(r, c, 0);
                    changed = true;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

/// Number of 8-connected road components.
pub fn count_components_8(g: &BinaryGrid) -> usize {
    let (h, w) = (g.height(), g.width());
    let mut seen = vec![false; h * w];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if g.cells()[start] == 0 || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if g.get_signed(nr, nc) == 1 {
                        let j = nr as usize * w + nc as usize;
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    count
}
