//! Voxelize a sphere mesh, then compare it with a slightly smaller sphere
//! using the three evaluation metrics.

use sliceparse::geom::{chamfer_l1, surface_iou, volume_iou, voxelize, voxelize_into, TriMesh};

pub fn run_example() -> sliceparse::Result<()> {
    let big = TriMesh::icosphere([0.5; 3], 0.45, 3);
    let small = TriMesh::icosphere([0.5; 3], 0.40, 3);
    // The grid spans the big sphere's bounding box; the small one shares it.
    let a = voxelize(&big, 32)?;
    let b = voxelize_into(&small, a.frame());
    let fill = a.count() as f64 / 32f64.powi(3);
    println!("sphere at 32^3: {} cells, fill {fill:.4} (ball in its cube {:.4})", a.count(), std::f64::consts::PI / 6.0);
    println!("volume IoU   {:.4}", volume_iou(&a, &b)?);
    println!("surface IoU  {:.4}", surface_iou(&a, &b)?);
    println!("chamfer L1   {:.4}", chamfer_l1(&big, &small, 4000)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
