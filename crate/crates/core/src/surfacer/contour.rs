use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::components::label_image;
use crate::geom::Mask2D;

pub type Point2 = [f64; 2];

/// Offset applied to the two visits of a pinch vertex (where a component
/// touches itself diagonally) so the traced polygon stays simple.
const PINCH_OFFSET: f64 = 1e-3;

/// Closed counter-clockwise polyline in slice pixel coordinates: `[u, v]`
/// where `u` runs along image rows and pixel `(r, c)` covers
/// `[r, r+1] x [c, c+1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<Point2>,
    pub plane_index: usize,
    pub centroid: Point2,
    pub area: f64,
}

impl Contour {
    /// Builds a contour from a CCW point loop, computing area and centroid.
    pub fn new(points: Vec<Point2>, plane_index: usize) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate(format!("contour needs >= 3 points, got {}", points.len())));
        }
        let (area, centroid) = area_centroid(&points);
        if !(area > 0.0) {
            return Err(Error::Degenerate(format!("contour is not counter-clockwise (area {area})")));
        }
        Ok(Contour {
            points,
            plane_index,
            centroid,
            area,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n).map(|i| dist(self.points[i], self.points[(i + 1) % n])).sum()
    }
}

#[inline]
pub(crate) fn dist(a: Point2, b: Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Signed shoelace area and centroid.
pub fn area_centroid(points: &[Point2]) -> (f64, Point2) {
    let n = points.len();
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        let cr = p[0] * q[1] - q[0] * p[1];
        a2 += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    let area = 0.5 * a2;
    if a2.abs() < 1e-300 {
        let m = points.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        return (area, [m[0] / n as f64, m[1] / n as f64]);
    }
    (area, [cx / (3.0 * a2), cy / (3.0 * a2)])
}

/// Outer boundaries of the 4-connected components of `mask`, in the
/// component order of [`crate::geom::connected_components`]. Holes are
/// filled.
pub fn extract_contours(mask: &Mask2D, plane_index: usize) -> Vec<Contour> {
    let labels = label_image(mask);
    let cols = mask.cols();
    let n = labels.iter().flatten().map(|&l| l + 1).max().unwrap_or(0);
    let mut size = vec![0usize; n];
    let mut first: Vec<Option<(usize, usize)>> = vec![None; n];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            size[l] += 1;
            first[l].get_or_insert((i / cols, i % cols));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(first[a].cmp(&first[b])));
    order
        .into_iter()
        .map(|l| {
            let start = first[l].expect("component has a first pixel");
            let inside = |r: isize, c: isize| {
                r >= 0
                    && c >= 0
                    && (r as usize) < mask.rows()
                    && (c as usize) < cols
                    && labels[r as usize * cols + c as usize] == Some(l)
            };
            let pts = trace_boundary(start, inside);
            Contour::new(pts, plane_index).expect("traced boundary is a CCW loop")
        })
        .collect()
}

/// Crack-following trace of the outer boundary with the component on the
/// left. `start` must be the raster-first pixel of the component.
fn trace_boundary(start: (usize, usize), inside: impl Fn(isize, isize) -> bool) -> Vec<Point2> {
    let left = |d: (isize, isize)| (-d.1, d.0);
    // Pixel containing the point `q + d/2 + side/2`.
    let pixel = |q: (isize, isize), d: (isize, isize), side: (isize, isize)| {
        let u2 = 2 * q.0 + d.0 + side.0;
        let v2 = 2 * q.1 + d.1 + side.1;
        (u2.div_euclid(2), v2.div_euclid(2))
    };

    let p0 = (start.0 as isize, start.1 as isize + 1);
    let d0 = (0isize, -1isize);
    let mut q = p0;
    let mut d = d0;
    // (vertex, incoming dir, outgoing dir) at every turn.
    let mut turns: Vec<((isize, isize), (isize, isize), (isize, isize))> = Vec::new();
    loop {
        let next = (q.0 + d.0, q.1 + d.1);
        let l = left(d);
        let al = pixel(next, d, l);
        let ar = pixel(next, d, (-l.0, -l.1));
        let new_d = if !inside(al.0, al.1) {
            l
        } else if inside(ar.0, ar.1) {
            (-l.0, -l.1)
        } else {
            d
        };
        if new_d != d {
            turns.push((next, d, new_d));
        }
        q = next;
        d = new_d;
        if q == p0 && d == d0 {
            break;
        }
    }
    let mut counts = std::collections::HashMap::new();
    for t in &turns {
        *counts.entry(t.0).or_insert(0usize) += 1;
    }
    turns
        .into_iter()
        .map(|(v, din, dout)| {
            let mut p = [v.0 as f64, v.1 as f64];
            if counts[&v] > 1 {
                let li = left(din);
                let lo = left(dout);
                p[0] += PINCH_OFFSET * (li.0 + lo.0) as f64;
                p[1] += PINCH_OFFSET * (li.1 + lo.1) as f64;
            }
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_has_four_corners() {
        let m = Mask2D::from_fn(10, 12, |r, c| (2..7).contains(&r) && (3..11).contains(&c));
        let cs = extract_contours(&m, 4);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.len(), 4);
        assert_eq!(c.plane_index, 4);
        assert!((c.area - 40.0).abs() < 1e-12);
        assert!((c.centroid[0] - 4.5).abs() < 1e-12 && (c.centroid[1] - 7.0).abs() < 1e-12);
        let mut pts = c.points.clone();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![[2.0, 3.0], [2.0, 11.0], [7.0, 3.0], [7.0, 11.0]]);
    }

    #[test]
    fn empty_mask_no_contours_and_two_blobs() {
        assert!(extract_contours(&Mask2D::new(5, 5), 0).is_empty());
        let m = Mask2D::from_fn(8, 8, |r, c| (r < 2 && c < 2) || (r > 4 && c > 3));
        let cs = extract_contours(&m, 0);
        assert_eq!(cs.len(), 2);
        assert!(cs[0].area > cs[1].area);
    }

    #[test]
    fn area_equals_pixel_count_for_hole_free_blobs() {
        let m = Mask2D::from_fn(12, 12, |r, c| {
            let (dr, dc) = (r as f64 - 5.5, c as f64 - 5.5);
            dr * dr + dc * dc < 20.0 || (r == 0 && c < 4)
        });
        let cs = extract_contours(&m, 0);
        let pixels: usize = crate::geom::connected_components(&m).iter().map(|c| c.len()).sum();
        let area: f64 = cs.iter().map(|c| c.area).sum();
        assert!((area - pixels as f64).abs() < 1e-9);
    }

    #[test]
    fn holes_are_filled() {
        let m = Mask2D::from_fn(7, 7, |r, c| (1..6).contains(&r) && (1..6).contains(&c) && !(r == 3 && c == 3));
        let cs = extract_contours(&m, 0);
        assert_eq!(cs.len(), 1);
        assert!((cs[0].area - 25.0).abs() < 1e-12);
    }

    #[test]
    fn pinch_vertex_is_split() {
        // Two squares touching at a corner, joined through a bridge.
        let m = Mask2D::from_fn(6, 6, |r, c| {
            (r < 2 && c < 2) || ((2..4).contains(&r) && (2..4).contains(&c)) || (c == 0 && r < 4) || (r == 3 && c < 4)
        });
        let cs = extract_contours(&m, 0);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                assert!(dist(c.points[i], c.points[j]) > 1e-6);
            }
        }
    }
}
