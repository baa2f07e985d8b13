//! Surface a cylinder from ten circular cross-sections and check the mesh
//! against the voxel solid. Writes `cylinder.obj` and the contours CSV to
//! the temp directory.

use sliceparse::geom::{slice_layers, surface_iou, voxelize_into, Axis};
use sliceparse::shapes;
use sliceparse::surfacer::{reconstruct_part, write_contours_csv, CorrespondParams, PartSlices};

pub fn run_example() -> sliceparse::Result<()> {
    let solid = shapes::cylinder(32, 0.3, 0.125, 0.875);
    let planes = slice_layers(32, 10)?;
    let slices = PartSlices::from_grid(&solid, Axis::Z, &planes);
    let mesh = reconstruct_part(&slices, &CorrespondParams::default())?;
    let back = voxelize_into(&mesh, solid.frame());
    println!(
        "{} vertices, {} triangles, watertight {}, volume {:.5} (cells {:.5})",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.is_watertight(),
        mesh.signed_volume(),
        solid.count() as f64 / 32f64.powi(3)
    );
    println!("surface IoU vs solid {:.4}", surface_iou(&back, &solid)?);
    let dir = std::env::temp_dir().join("sliceparse-example");
    std::fs::create_dir_all(&dir)?;
    mesh.save_obj(&dir.join("cylinder.obj"))?;
    write_contours_csv(&slices, std::fs::File::create(dir.join("cylinder_contours.csv"))?)?;
    println!("wrote {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
