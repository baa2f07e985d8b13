//! Synthetic test solids built from unions of boxes (plus a cylinder),
//! with every feature a fixed fraction of the grid size.

use crate::error::{Error, Result};
use crate::geom::{GridFrame, VoxelGrid};

/// Half-open box `[lo, hi)` in fractions of the grid edge.
pub type FracBox = ([f64; 3], [f64; 3]);

/// Cells whose centres fall inside any of the boxes.
pub fn union_of_boxes(n: usize, boxes: &[FracBox]) -> VoxelGrid {
    let h = 1.0 / n as f64;
    VoxelGrid::from_fn(GridFrame::unit(n), |idx| {
        let c = idx.map(|i| (i as f64 + 0.5) * h);
        boxes
            .iter()
            .any(|(lo, hi)| (0..3).all(|a| c[a] >= lo[a] && c[a] < hi[a]))
    })
}

/// Relabels axes: local axis `a` becomes grid axis `perm[a]`.
pub fn permute(boxes: &[FracBox], perm: [usize; 3]) -> Vec<FracBox> {
    boxes
        .iter()
        .map(|(lo, hi)| {
            let mut l = [0.0; 3];
            let mut h = [0.0; 3];
            for a in 0..3 {
                l[perm[a]] = lo[a];
                h[perm[a]] = hi[a];
            }
            (l, h)
        })
        .collect()
}

pub fn box_boxes() -> Vec<FracBox> {
    vec![([0.25, 0.1875, 0.15625], [0.75, 0.8125, 0.84375])]
}

pub fn l_boxes(arm: f64) -> Vec<FracBox> {
    vec![
        ([0.125, 0.125, 0.25], [0.875, 0.125 + arm, 0.75]),
        ([0.875 - arm, 0.125 + arm, 0.25], [0.875, 0.875, 0.75]),
    ]
}

pub fn t_boxes(arm: f64) -> Vec<FracBox> {
    let (s0, s1) = (0.5 - arm / 2.0, 0.5 + arm / 2.0);
    vec![
        ([0.125, s0, 0.25], [0.875 - arm, s1, 0.75]),
        ([0.875 - arm, 0.125, 0.25], [0.875, 0.875, 0.75]),
    ]
}

pub fn plus_boxes(arm: f64) -> Vec<FracBox> {
    let (s0, s1) = (0.5 - arm / 2.0, 0.5 + arm / 2.0);
    vec![
        ([s0, 0.0625, 0.25], [s1, 0.9375, 0.75]),
        ([0.0625, s0, 0.25], [0.9375, s1, 0.75]),
    ]
}

pub fn u_boxes() -> Vec<FracBox> {
    vec![
        ([0.125, 0.125, 0.25], [0.875, 0.375, 0.75]),
        ([0.125, 0.625, 0.25], [0.875, 0.875, 0.75]),
        ([0.625, 0.375, 0.25], [0.875, 0.625, 0.75]),
    ]
}

/// Two lobes along local X joined by a square neck.
pub fn dumbbell_boxes(lobe: f64, neck: f64) -> Vec<FracBox> {
    let (n0, n1) = (0.5 - neck / 2.0, 0.5 + neck / 2.0);
    vec![
        ([0.0625, 0.25, 0.25], [0.0625 + lobe, 0.75, 0.75]),
        ([0.9375 - lobe, 0.25, 0.25], [0.9375, 0.75, 0.75]),
        ([0.0625 + lobe, n0, n0], [0.9375 - lobe, n1, n1]),
    ]
}

/// Cylinder along Z through the grid centre.
pub fn cylinder(n: usize, radius: f64, z0: f64, z1: f64) -> VoxelGrid {
    let h = 1.0 / n as f64;
    VoxelGrid::from_fn(GridFrame::unit(n), |[i, j, k]| {
        let (x, y, z) = ((i as f64 + 0.5) * h - 0.5, (j as f64 + 0.5) * h - 0.5, (k as f64 + 0.5) * h);
        x * x + y * y <= radius * radius && z >= z0 && z < z1
    })
}

/// Names accepted by [`named`].
pub const NAMES: [&str; 7] = ["box", "l", "t", "plus", "u", "dumbbell", "cylinder"];

/// A built-in solid at resolution `n`. A suffix `@yxz`-style permutation
/// (e.g. `l@xzy`) reorients it: the i-th letter is the grid axis that local
/// axis i maps to.
pub fn named(name: &str, n: usize) -> Result<VoxelGrid> {
    if n < 8 {
        return Err(Error::invalid(format!("synthetic shapes need resolution >= 8, got {n}")));
    }
    let (base, perm) = match name.split_once('@') {
        Some((b, p)) => (b, parse_perm(p)?),
        None => (name, [0, 1, 2]),
    };
    let boxes = match base {
        "box" => box_boxes(),
        "l" => l_boxes(0.25),
        "t" => t_boxes(0.25),
        "plus" => plus_boxes(0.25),
        "u" => u_boxes(),
        "dumbbell" => dumbbell_boxes(0.25, 0.125),
        "cylinder" => {
            if perm != [0, 1, 2] {
                return Err(Error::invalid("cylinder cannot be reoriented"));
            }
            return Ok(cylinder(n, 0.3, 0.125, 0.875));
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown shape {other:?}; expected one of {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(union_of_boxes(n, &permute(&boxes, perm)))
}

fn parse_perm(s: &str) -> Result<[usize; 3]> {
    let mut out = [0usize; 3];
    let chars: Vec<char> = s.chars().collect();
    if chars.len() != 3 {
        return Err(Error::invalid(format!("bad axis permutation {s:?}")));
    }
    for (a, ch) in chars.iter().enumerate() {
        out[a] = match ch {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            _ => return Err(Error::invalid(format!("bad axis permutation {s:?}"))),
        };
    }
    let mut seen = out;
    seen.sort_unstable();
    if seen != [0, 1, 2] {
        return Err(Error::invalid(format!("bad axis permutation {s:?}")));
    }
    Ok(out)
}

/// The ten-shape set of L, T, plus and dumbbell variants used by the
/// ordering experiment.
pub fn ordering_set(n: usize) -> Vec<(String, VoxelGrid)> {
    let specs: Vec<(&str, Vec<FracBox>)> = vec![
        ("l", l_boxes(0.25)),
        ("l-thick@xzy", permute(&l_boxes(0.3125), [0, 2, 1])),
        ("t", t_boxes(0.25)),
        ("t@zyx", permute(&t_boxes(0.25), [2, 1, 0])),
        ("plus", plus_boxes(0.25)),
        ("plus-thin@xzy", permute(&plus_boxes(0.1875), [0, 2, 1])),
        ("dumbbell", dumbbell_boxes(0.25, 0.125)),
        ("dumbbell@zyx", permute(&dumbbell_boxes(0.25, 0.125), [2, 1, 0])),
        ("dumbbell-wide@yxz", permute(&dumbbell_boxes(0.3125, 0.1875), [1, 0, 2])),
        ("l-long@yxz", permute(&l_boxes(0.1875), [1, 0, 2])),
    ];
    specs
        .into_iter()
        .map(|(name, b)| (name.to_string(), union_of_boxes(n, &b)))
        .collect()
}
