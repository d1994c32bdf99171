//! Current interpolation and the local ocean hull.
//!
//! A position is surrounded by the 2x2 stencil of cell centers that encloses
//! it. The ocean hull around the position is the convex hull of the ocean
//! cells in that stencil: the full square when all four are ocean, a triangle,
//! a segment or a single point otherwise. Interpolation is bilinear on a full
//! square and linear (barycentric) on the reduced shapes.

use crate::grid::{Cell, GridSpec, Mask, VectorFieldSeries};

const EDGE_EPS: f64 = 1e-9;

/// Interpolation weights over ocean cells of the enclosing stencil.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    cells: [Cell; 4],
    weights: [f64; 4],
    len: usize,
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        self.cells[..self.len]
            .iter()
            .copied()
            .zip(self.weights[..self.len].iter().copied())
    }
}

/// The position lies outside the local ocean hull.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HullExit;

fn snap(f: f64) -> f64 {
    let r = f.round();
    if (f - r).abs() < EDGE_EPS {
        r
    } else {
        f
    }
}

/// Lower stencil index and fractional offset along one axis.
fn axis(f: f64, n: usize) -> Option<(usize, f64)> {
    let f = snap(f);
    if f < 0.0 || f > (n - 1) as f64 {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let i0 = (f.floor() as usize).min(n - 2);
    Some((i0, f - i0 as f64))
}

/// Ocean stencil around (lon, lat), or `HullExit` if the position is outside
/// the convex hull of the stencil's ocean cells.
pub fn stencil(mask: &Mask, lon: f64, lat: f64) -> Result<Stencil, HullExit> {
    let spec: &GridSpec = mask.spec();
    let (fx, fy) = spec.fractional(lon, lat);
    let (i0, tx) = axis(fx, spec.nlon).ok_or(HullExit)?;
    let (j0, ty) = axis(fy, spec.nlat).ok_or(HullExit)?;
    let i1 = (i0 + 1).min(spec.nlon - 1);
    let j1 = (j0 + 1).min(spec.nlat - 1);
    // corner order: (0,0), (1,0), (0,1), (1,1) in (x, y) stencil coordinates
    let corners = [(i0, j0), (i1, j0), (i0, j1), (i1, j1)];
    let pos = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
    let mut ocean = [false; 4];
    for k in 0..4 {
        ocean[k] = mask.is_ocean_at(corners[k].0, corners[k].1);
    }
    // degenerate axes have a single distinct corner; fold duplicates away
    if spec.nlon == 1 {
        ocean[1] = false;
        ocean[3] = false;
    }
    if spec.nlat == 1 {
        ocean[2] = false;
        ocean[3] = false;
    }
    let n_ocean = ocean.iter().filter(|&&o| o).count();
    let mut weights = [0.0; 4];
    let inside = match n_ocean {
        4 => {
            weights = [
                (1.0 - tx) * (1.0 - ty),
                tx * (1.0 - ty),
                (1.0 - tx) * ty,
                tx * ty,
            ];
            true
        }
        3 => {
            let missing = ocean.iter().position(|&o| !o).expect("one land corner");
            // barycentric coordinates on the triangle of the other three corners
            let (a, b, c) = match missing {
                3 => (0, 1, 2),
                0 => (3, 2, 1),
                1 => (2, 3, 0),
                _ => (1, 0, 3),
            };
            // right angle at `a`; b and c are its neighbours along the axes
            let (ax, ay) = pos[a];
            let (bx, by) = pos[b];
            let (cx, cy) = pos[c];
            let det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
            let wb = ((tx - ax) * (cy - ay) - (cx - ax) * (ty - ay)) / det;
            let wc = ((bx - ax) * (ty - ay) - (tx - ax) * (by - ay)) / det;
            let wa = 1.0 - wb - wc;
            weights[a] = wa;
            weights[b] = wb;
            weights[c] = wc;
            wa >= -EDGE_EPS && wb >= -EDGE_EPS && wc >= -EDGE_EPS
        }
        2 => {
            let idx: Vec<usize> = (0..4).filter(|&k| ocean[k]).collect();
            let (p, q) = (pos[idx[0]], pos[idx[1]]);
            let (dx, dy) = (q.0 - p.0, q.1 - p.1);
            let len2 = dx * dx + dy * dy;
            let s = ((tx - p.0) * dx + (ty - p.1) * dy) / len2;
            let (ex, ey) = (p.0 + s * dx - tx, p.1 + s * dy - ty);
            weights[idx[0]] = 1.0 - s;
            weights[idx[1]] = s;
            (ex * ex + ey * ey).sqrt() <= EDGE_EPS && (-EDGE_EPS..=1.0 + EDGE_EPS).contains(&s)
        }
        1 => {
            let k = ocean.iter().position(|&o| o).expect("one ocean corner");
            weights[k] = 1.0;
            (tx - pos[k].0).abs() <= EDGE_EPS && (ty - pos[k].1).abs() <= EDGE_EPS
        }
        _ => false,
    };
    if !inside {
        return Err(HullExit);
    }
    let mut out = Stencil {
        cells: [Cell(0); 4],
        weights: [0.0; 4],
        len: 0,
    };
    for k in 0..4 {
        if ocean[k] && weights[k] != 0.0 {
            out.cells[out.len] = spec.cell(corners[k].0, corners[k].1);
            out.weights[out.len] = weights[k].clamp(0.0, 1.0);
            out.len += 1;
        }
    }
    if out.len == 0 {
        // every ocean weight underflowed to zero; fall back to the first ocean corner
        let k = ocean.iter().position(|&o| o).expect("ocean corner");
        out.cells[0] = spec.cell(corners[k].0, corners[k].1);
        out.weights[0] = 1.0;
        out.len = 1;
    }
    Ok(out)
}

pub fn in_ocean_hull(mask: &Mask, lon: f64, lat: f64) -> bool {
    stencil(mask, lon, lat).is_ok()
}

/// Current (u, v) at a position on a day index.
pub fn interpolate_current(
    field: &VectorFieldSeries,
    day: usize,
    lon: f64,
    lat: f64,
) -> Result<(f64, f64), HullExit> {
    let st = stencil(field.mask(), lon, lat)?;
    let (mut u, mut v) = (0.0, 0.0);
    for (cell, w) in st.iter() {
        let (cu, cv) = field.vector(day, cell).expect("stencil cells are ocean");
        u += w * cu;
        v += w * cv;
    }
    Ok((u, v))
}
