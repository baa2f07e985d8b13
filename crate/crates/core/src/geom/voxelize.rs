//! Cell-center occupancy by parity ray casting along +X.
//!
//! Each triangle is rasterized onto the YZ lattice of ray origins it can
//! hit; crossings are collected per ray and the parity sweep fills cells.
//! A ray that grazes an edge or vertex is recast from a slightly offset
//! origin against all triangles.

use super::grid::{GridFrame, VoxelGrid};
use super::mesh::{Point3, TriMesh};
use crate::error::{Error, Result};

// Offset (in cells) applied to grazing rays. Irrational ratios keep the
// nudged ray off the half-cell lattice that contour vertices live on.
const NUDGE_Y: f64 = 1.0e-4 * std::f64::consts::SQRT_2;
const NUDGE_Z: f64 = 1.0e-4 * 1.732_050_807_568_877_2;
const GRAZE_EPS: f64 = 1e-9;

/// Voxelizes a closed mesh into a cubic grid that spans its bounding box
/// with `resolution` cells along the longest side.
pub fn voxelize(mesh: &TriMesh, resolution: usize) -> Result<VoxelGrid> {
    if resolution < 2 {
        return Err(Error::invalid(format!("resolution must be >= 2, got {resolution}")));
    }
    check_closed(mesh)?;
    let (lo, hi) = mesh
        .bounding_box()
        .ok_or_else(|| Error::EmptyShape("mesh has no vertices".into()))?;
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if !(extent > 0.0) {
        return Err(Error::Degenerate("mesh has zero extent".into()));
    }
    let voxel_size = extent / resolution as f64;
    let mut dims = [1usize; 3];
    for a in 0..3 {
        dims[a] = (((hi[a] - lo[a]) / voxel_size) - 1e-9).ceil().max(1.0) as usize;
    }
    let frame = GridFrame::new(dims, voxel_size, lo)?;
    Ok(voxelize_into(mesh, &frame))
}

/// Errors unless every edge is shared by exactly two triangles.
pub fn check_closed(mesh: &TriMesh) -> Result<()> {
    if mesh.is_empty() {
        return Err(Error::NonWatertight("mesh has no triangles".into()));
    }
    if !mesh.is_watertight() {
        return Err(Error::NonWatertight("some edges are not shared by exactly two triangles".into()));
    }
    Ok(())
}

/// Voxelizes into an existing frame without watertightness checks; an empty
/// mesh yields an empty grid.
pub fn voxelize_into(mesh: &TriMesh, frame: &GridFrame) -> VoxelGrid {
    let mut grid = VoxelGrid::empty(*frame);
    if mesh.is_empty() {
        return grid;
    }
    let [nx, ny, nz] = frame.dims;
    // Triangles in cell coordinates; ray (j, k) starts at y = j + 0.5, z = k + 0.5.
    let tris: Vec<[Point3; 3]> = (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            [frame.to_cell_coords(a), frame.to_cell_coords(b), frame.to_cell_coords(c)]
        })
        .collect();

    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); ny * nz];
    let mut grazing = vec![false; ny * nz];
    for tri in &tris {
        let ymin = tri.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let ymax = tri.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let zmin = tri.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
        let zmax = tri.iter().map(|p| p[2]).fold(f64::NEG_INFINITY, f64::max);
        let j0 = ((ymin - 0.5).ceil().max(0.0)) as usize;
        let j1 = (ymax - 0.5).floor();
        let k0 = ((zmin - 0.5).ceil().max(0.0)) as usize;
        let k1 = (zmax - 0.5).floor();
        if j1 < 0.0 || k1 < 0.0 {
            continue;
        }
        let j1 = (j1 as usize).min(ny - 1);
        let k1 = (k1 as usize).min(nz - 1);
        for j in j0..=j1 {
            for k in k0..=k1 {
                let ray = j * nz + k;
                if grazing[ray] {
                    continue;
                }
                match ray_hit(tri, j as f64 + 0.5, k as f64 + 0.5) {
                    Hit::Miss => {}
                    Hit::Cross(x) => crossings[ray].push(x),
                    Hit::Graze => grazing[ray] = true,
                }
            }
        }
    }

    for j in 0..ny {
        for k in 0..nz {
            let ray = j * nz + k;
            let mut xs = if grazing[ray] {
                recast(&tris, j as f64 + 0.5 + NUDGE_Y, k as f64 + 0.5 + NUDGE_Z)
            } else {
                std::mem::take(&mut crossings[ray])
            };
            xs.sort_by(f64::total_cmp);
            fill_parity(&mut grid, &xs, j, k, nx);
        }
    }
    grid
}

fn recast(tris: &[[Point3; 3]], y: f64, z: f64) -> Vec<f64> {
    tris.iter()
        .filter_map(|t| match ray_hit(t, y, z) {
            Hit::Cross(x) => Some(x),
            // A second graze is vanishingly unlikely; count it as a crossing.
            Hit::Graze => ray_x(t, y, z),
            Hit::Miss => None,
        })
        .collect()
}

fn fill_parity(grid: &mut VoxelGrid, xs: &[f64], j: usize, k: usize, nx: usize) {
    // Cell i is inside iff an odd number of crossings lie left of its center.
    let mut c = 0usize;
    for i in 0..nx {
        let xc = i as f64 + 0.5;
        while c < xs.len() && xs[c] < xc {
            c += 1;
        }
        if c % 2 == 1 {
            grid.set([i, j, k], true);
        }
    }
}

enum Hit {
    Miss,
    Cross(f64),
    Graze,
}

/// Intersects the line `{(t, y, z)}` with a triangle via its YZ projection.
fn ray_hit(tri: &[Point3; 3], y: f64, z: f64) -> Hit {
    let [a, b, c] = *tri;
    let e = |p: Point3, q: Point3| (q[1] - p[1]) * (z - p[2]) - (q[2] - p[2]) * (y - p[1]);
    let w0 = e(b, c);
    let w1 = e(c, a);
    let w2 = e(a, b);
    let area = w0 + w1 + w2;
    if area.abs() < 1e-15 {
        // Triangle is edge-on to the ray direction.
        return Hit::Miss;
    }
    let (w0, w1, w2) = if area < 0.0 { (-w0, -w1, -w2) } else { (w0, w1, w2) };
    let scale = area.abs();
    if w0 < -GRAZE_EPS * scale || w1 < -GRAZE_EPS * scale || w2 < -GRAZE_EPS * scale {
        return Hit::Miss;
    }
    if w0 <= GRAZE_EPS * scale || w1 <= GRAZE_EPS * scale || w2 <= GRAZE_EPS * scale {
        return Hit::Graze;
    }
    let x = (w0 * a[0] + w1 * b[0] + w2 * c[0]) / scale;
    Hit::Cross(x)
}

fn ray_x(tri: &[Point3; 3], y: f64, z: f64) -> Option<f64> {
    let [a, b, c] = *tri;
    let e = |p: Point3, q: Point3| (q[1] - p[1]) * (z - p[2]) - (q[2] - p[2]) * (y - p[1]);
    let (w0, w1, w2) = (e(b, c), e(c, a), e(a, b));
    let area = w0 + w1 + w2;
    (area.abs() > 1e-15).then(|| (w0 * a[0] + w1 * b[0] + w2 * c[0]) / area)
}
