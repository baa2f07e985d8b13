//! Surfacing of one cut part: trace contours on each slice plane, match
//! contours between consecutive planes, loft matched pairs and cap every
//! open end.
//!
//! Each contour owns the slab between the mid-planes to its neighbours;
//! the first and last contours of a chain are extruded to the part's extent
//! (or to the mid-plane where the chain stops) and capped. Every chain thus
//! becomes a closed generalised cylinder.

pub mod contour;
pub mod correspond;
pub mod loft;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use contour::{extract_contours, Contour, Point2};
pub use correspond::{correspond, match_cost, CorrespondParams, Correspondence};
pub use loft::{align, cap, loft, resample, Strip};

use crate::error::{Error, Result};
use crate::geom::{Axis, GridFrame, TriMesh, VoxelGrid};

/// Contours found on one slice plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicePlane {
    /// Cell layer index along the part axis; the plane sits at its centre.
    pub index: usize,
    pub contours: Vec<Contour>,
}

impl SlicePlane {
    pub fn height(&self) -> f64 {
        self.index as f64 + 0.5
    }
}

/// The slices of one part, with the part's extent along `axis` in cell
/// coordinates (`lower` and `upper` are cell faces).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartSlices {
    pub axis: Axis,
    pub frame: GridFrame,
    pub lower: f64,
    pub upper: f64,
    pub planes: Vec<SlicePlane>,
}

impl PartSlices {
    pub fn new(axis: Axis, frame: GridFrame, lower: f64, upper: f64, planes: Vec<SlicePlane>) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::invalid(format!("bad part extent [{lower}, {upper}]")));
        }
        for w in planes.windows(2) {
            if w[0].index >= w[1].index {
                return Err(Error::invalid("slice planes must be strictly increasing"));
            }
        }
        let (ua, va) = axis.perpendicular();
        let (du, dv) = (frame.dims[ua.index()] as f64, frame.dims[va.index()] as f64);
        for p in &planes {
            if p.height() <= lower || p.height() >= upper {
                return Err(Error::invalid(format!("plane {} outside part extent [{lower}, {upper}]", p.index)));
            }
            let outside = p.contours.iter().flat_map(|c| &c.points).any(|q| {
                q[0] < -1e-9 || q[1] < -1e-9 || q[0] > du + 1e-9 || q[1] > dv + 1e-9
            });
            if outside {
                return Err(Error::invalid(format!("contour on plane {} leaves the grid", p.index)));
            }
        }
        Ok(PartSlices {
            axis,
            frame,
            lower,
            upper,
            planes,
        })
    }

    /// Slices `part` at those of `plane_indices` that fall inside its
    /// occupied extent along `axis`.
    pub fn from_grid(part: &VoxelGrid, axis: Axis, plane_indices: &[usize]) -> Self {
        let frame = *part.frame();
        let Some(bb) = part.bounding_box() else {
            return PartSlices {
                axis,
                frame,
                lower: 0.0,
                upper: 0.0,
                planes: Vec::new(),
            };
        };
        let a = axis.index();
        let (lo, hi) = (bb.min[a], bb.max[a]);
        let mut idx: Vec<usize> = plane_indices.iter().copied().filter(|&j| j >= lo && j <= hi).collect();
        idx.sort_unstable();
        idx.dedup();
        let planes = idx
            .into_iter()
            .map(|j| SlicePlane {
                index: j,
                contours: extract_contours(&part.layer(axis, j), j),
            })
            .collect();
        PartSlices {
            axis,
            frame,
            lower: lo as f64,
            upper: (hi + 1) as f64,
            planes,
        }
    }

    pub fn slice_diagonal(&self) -> f64 {
        let (ua, va) = self.axis.perpendicular();
        let (du, dv) = (self.frame.dims[ua.index()] as f64, self.frame.dims[va.index()] as f64);
        (du * du + dv * dv).sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.iter().all(|p| p.contours.is_empty())
    }
}

/// A run of matched contours on consecutive planes: `(plane position,
/// contour index)` plus the extent its end caps are pushed to.
#[derive(Clone, Debug, PartialEq)]
struct Chain {
    rings: Vec<(usize, usize)>,
    lower: f64,
    upper: f64,
}

fn build_chains(slices: &PartSlices, params: &CorrespondParams) -> Vec<Chain> {
    let diag = slices.slice_diagonal();
    let mut chains: Vec<Chain> = Vec::new();
    // Chain id for each contour of the previous plane.
    let mut prev: Vec<usize> = Vec::new();
    for (p, plane) in slices.planes.iter().enumerate() {
        let s = plane.height();
        let mut cur = vec![usize::MAX; plane.contours.len()];
        if p == 0 {
            for (j, c) in cur.iter_mut().enumerate() {
                *c = chains.len();
                chains.push(Chain {
                    rings: vec![(p, j)],
                    lower: slices.lower,
                    upper: slices.upper,
                });
            }
        } else {
            let before = &slices.planes[p - 1];
            let mid = 0.5 * (before.height() + s);
            let m = correspond(&before.contours, &plane.contours, diag, params);
            for &(i, j, _) in &m.pairs {
                cur[j] = prev[i];
                chains[prev[i]].rings.push((p, j));
            }
            for &i in &m.unmatched_a {
                chains[prev[i]].upper = mid;
            }
            for &j in &m.unmatched_b {
                cur[j] = chains.len();
                chains.push(Chain {
                    rings: vec![(p, j)],
                    lower: mid,
                    upper: slices.upper,
                });
            }
        }
        prev = cur;
    }
    chains
}

/// Closed mesh of one part in world coordinates. Parts without any contour
/// give an empty (zero-triangle) mesh.
pub fn reconstruct_part(slices: &PartSlices, params: &CorrespondParams) -> Result<TriMesh> {
    let (ua, va) = slices.axis.perpendicular();
    let a = slices.axis.index();
    let flip = !slices.axis.image_frame_is_right_handed();
    let mut mesh = TriMesh {
        closed: true,
        ..TriMesh::default()
    };

    for chain in build_chains(slices, params) {
        let n = chain
            .rings
            .iter()
            .map(|&(p, j)| slices.planes[p].contours[j].len())
            .max()
            .expect("chains are never empty");
        // (points, height) from bottom to top.
        let mut rings: Vec<(Vec<Point2>, f64)> = Vec::with_capacity(chain.rings.len() + 2);
        for &(p, j) in &chain.rings {
            let pts = resample(&slices.planes[p].contours[j].points, n)?;
            let pts = match rings.last() {
                Some((r, _)) => align(r, &pts),
                None => pts,
            };
            rings.push((pts, slices.planes[p].height()));
        }
        let (first_h, last_h) = (rings[0].1, rings[rings.len() - 1].1);
        if chain.lower < first_h - 1e-9 {
            rings.insert(0, (rings[0].0.clone(), chain.lower));
        }
        if chain.upper > last_h + 1e-9 {
            let top = rings[rings.len() - 1].0.clone();
            rings.push((top, chain.upper));
        }
        // A ring identical to both neighbours lies on a straight wall.
        let mut k = 1;
        while k + 1 < rings.len() {
            if rings[k].0 == rings[k - 1].0 && rings[k].0 == rings[k + 1].0 {
                rings.remove(k);
            } else {
                k += 1;
            }
        }
        if rings.len() < 2 {
            return Err(Error::Degenerate("part has zero thickness".into()));
        }

        let base = mesh.vertices.len();
        for (pts, h) in &rings {
            for q in pts {
                let mut c = [0.0; 3];
                c[ua.index()] = q[0];
                c[va.index()] = q[1];
                c[a] = *h;
                mesh.vertices.push(slices.frame.to_world(c));
            }
        }
        let mut push = |t: [usize; 3]| {
            let t = [(base + t[0]) as u32, (base + t[1]) as u32, (base + t[2]) as u32];
            mesh.triangles.push(if flip { [t[0], t[2], t[1]] } else { t });
        };
        let strip = loft::strip_triangles(n);
        for r in 0..rings.len() - 1 {
            for t in &strip {
                push([t[0] + r * n, t[1] + r * n, t[2] + r * n]);
            }
        }
        let fan = cap(&rings[0].0)?;
        for t in &fan {
            push([t[0], t[2], t[1]]);
        }
        let last = &rings[rings.len() - 1].0;
        // Single-contour chains have identical end rings.
        let top_fan = if *last == rings[0].0 { fan } else { cap(last)? };
        let top = (rings.len() - 1) * n;
        for t in &top_fan {
            push([t[0] + top, t[1] + top, t[2] + top]);
        }
    }
    Ok(mesh)
}

/// Writes `plane,contour,point,u,v` rows.
pub fn write_contours_csv<W: Write>(slices: &PartSlices, mut w: W) -> Result<()> {
    writeln!(w, "plane,contour,point,u,v")?;
    for p in &slices.planes {
        for (ci, c) in p.contours.iter().enumerate() {
            for (k, q) in c.points.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", p.index, ci, k, q[0], q[1])?;
            }
        }
    }
    Ok(())
}
