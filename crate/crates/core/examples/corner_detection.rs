//! Harris corners on the three silhouettes of an L-shaped solid.

use sliceparse::corners::{detect_corners, HarrisParams};
use sliceparse::geom::{project, View};
use sliceparse::shapes;

pub fn run_example() -> sliceparse::Result<()> {
    let solid = shapes::named("l", 32)?;
    let params = HarrisParams::default();
    for view in View::ALL {
        let img = project(&solid, view);
        let set = detect_corners(&img, &params)?;
        let pts: Vec<String> = set.points.iter().map(|c| format!("({},{})", c.row, c.col)).collect();
        println!("{:<5} {} corners: {}", view.name(), set.len(), pts.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sliceparse::Result<()> {
    run_example()
}
