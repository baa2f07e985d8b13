//! Evaluation metrics: volume IoU, dilated-shell surface IoU, Chamfer-L1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grid::{check_same_dims, VoxelGrid};
use super::mesh::{Point3, TriMesh};
use crate::error::{Error, Result};

/// Seed used for surface sampling by [`chamfer_l1`].
pub const CHAMFER_SEED: u64 = 0x5EED_C4A3;

/// |A ∩ B| / |A ∪ B|; two empty grids score 1.0.
pub fn volume_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    check_same_dims(a, b)?;
    let (mut inter, mut uni) = (0usize, 0usize);
    for (&x, &y) in a.occupancy().iter().zip(b.occupancy()) {
        inter += (x && y) as usize;
        uni += (x || y) as usize;
    }
    Ok(if uni == 0 { 1.0 } else { inter as f64 / uni as f64 })
}

/// Occupied cells with at least one empty or out-of-bounds 6-neighbor.
pub fn shell(grid: &VoxelGrid) -> VoxelGrid {
    let mut out = VoxelGrid::empty(*grid.frame());
    for idx in grid.iter_occupied() {
        let s = [idx[0] as isize, idx[1] as isize, idx[2] as isize];
        let exposed = (0..3).any(|a| {
            [-1isize, 1].iter().any(|&d| {
                let mut n = s;
                n[a] += d;
                !grid.get_signed(n)
            })
        });
        if exposed {
            out.set(idx, true);
        }
    }
    out
}

/// Dilation by one cell over the 26-neighborhood.
pub fn dilate(grid: &VoxelGrid) -> VoxelGrid {
    let d = grid.dims();
    let mut out = VoxelGrid::empty(*grid.frame());
    for idx in grid.iter_occupied() {
        for i in idx[0].saturating_sub(1)..=(idx[0] + 1).min(d[0] - 1) {
            for j in idx[1].saturating_sub(1)..=(idx[1] + 1).min(d[1] - 1) {
                for k in idx[2].saturating_sub(1)..=(idx[2] + 1).min(d[2] - 1) {
                    out.set([i, j, k], true);
                }
            }
        }
    }
    out
}

/// IoU of the one-cell-dilated surface shells of `a` and `b`.
pub fn surface_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    check_same_dims(a, b)?;
    volume_iou(&dilate(&shell(a)), &dilate(&shell(b)))
}

/// Symmetric Chamfer-L1 with `samples` area-uniform points per mesh, both
/// drawn with [`CHAMFER_SEED`].
pub fn chamfer_l1(a: &TriMesh, b: &TriMesh, samples: usize) -> Result<f64> {
    chamfer_l1_seeded(a, b, samples, CHAMFER_SEED, CHAMFER_SEED)
}

pub fn chamfer_l1_seeded(
    a: &TriMesh,
    b: &TriMesh,
    samples: usize,
    seed_a: u64,
    seed_b: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("chamfer needs at least one sample"));
    }
    let pa = a.sample_surface(samples, &mut ChaCha8Rng::seed_from_u64(seed_a))?;
    let pb = b.sample_surface(samples, &mut ChaCha8Rng::seed_from_u64(seed_b))?;
    Ok(chamfer_l1_points(&pa, &pb))
}

/// Symmetric mean nearest-neighbor L1 distance between two point sets.
pub fn chamfer_l1_points(pa: &[Point3], pb: &[Point3]) -> f64 {
    let ia = SweepIndex::new(pb);
    let ib = SweepIndex::new(pa);
    let da: f64 = pa.iter().map(|p| ia.nearest_l1(*p)).sum::<f64>() / pa.len() as f64;
    let db: f64 = pb.iter().map(|p| ib.nearest_l1(*p)).sum::<f64>() / pb.len() as f64;
    0.5 * da + 0.5 * db
}

/// Points sorted by x; a query scans outward and stops once |dx| alone
/// exceeds the best L1 distance found.
struct SweepIndex {
    pts: Vec<Point3>,
}

impl SweepIndex {
    fn new(points: &[Point3]) -> Self {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        SweepIndex { pts }
    }

    fn nearest_l1(&self, q: Point3) -> f64 {
        let l1 = |p: &Point3| (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs();
        let start = self.pts.partition_point(|p| p[0] < q[0]);
        let mut best = f64::INFINITY;
        for p in &self.pts[start..] {
            if p[0] - q[0] >= best {
                break;
            }
            best = best.min(l1(p));
        }
        for p in self.pts[..start].iter().rev() {
            if q[0] - p[0] >= best {
                break;
            }
            best = best.min(l1(p));
        }
        best
    }
}
