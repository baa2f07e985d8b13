//! The corner-pairing heuristic used to produce demonstrations.
//!
//! Every detected corner is paired with its nearest neighbour in the same
//! silhouette. Segments whose erasure splits the silhouette are scored by how
//! cleanly the smaller piece fills its bounding box, and the cleanest one
//! becomes the cut.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{resolve_cut, run_episode, CutAction, EnvConfig, EpisodeMetrics, ParseState, Policy};
use crate::error::Result;
use crate::geom::components::label_image;
use crate::geom::{bresenham, count_components, Mask2D, View, VoxelGrid};
use crate::trainer::Transition;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSegment {
    pub view: View,
    /// `(row, col)` of the two corners.
    pub p1: (usize, usize),
    pub p2: (usize, usize),
    /// Components gained when the segment is erased (set by
    /// [`filter_separating`]).
    pub component_count_delta: i64,
    /// Pixels inside the smaller piece's bounding box that belong to other
    /// pieces (set by [`score_segments`]).
    pub leak_area: f64,
}

impl CandidateSegment {
    pub fn length(&self) -> f64 {
        let dr = self.p1.0 as f64 - self.p2.0 as f64;
        let dc = self.p1.1 as f64 - self.p2.1 as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

/// Each corner paired with its nearest distinct corner (ties: stronger
/// response, then smaller `(row, col)`); unordered duplicates removed.
pub fn candidate_segments(state: &ParseState) -> Vec<CandidateSegment> {
    let mut out = Vec::new();
    for (v, set) in state.corners.iter().enumerate() {
        let view = View::from_plane_id(v).expect("three views");
        let pts = &set.points;
        let mut seen: Vec<((usize, usize), (usize, usize))> = Vec::new();
        for (i, a) in pts.iter().enumerate() {
            let best = pts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .min_by(|(_, p), (_, q)| {
                    let dp = (p.row as f64 - a.row as f64).powi(2) + (p.col as f64 - a.col as f64).powi(2);
                    let dq = (q.row as f64 - a.row as f64).powi(2) + (q.col as f64 - a.col as f64).powi(2);
                    dp.total_cmp(&dq)
                        .then(q.response.total_cmp(&p.response))
                        .then((p.row, p.col).cmp(&(q.row, q.col)))
                });
            let Some((_, b)) = best else { continue };
            let (p1, p2) = ((a.row, a.col), (b.row, b.col));
            let key = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            out.push(CandidateSegment {
                view,
                p1: key.0,
                p2: key.1,
                component_count_delta: 0,
                leak_area: 0.0,
            });
        }
    }
    out
}

fn erase(mask: &Mask2D, seg: &CandidateSegment) -> Mask2D {
    let mut m = mask.clone();
    for (r, c) in bresenham(seg.p1, seg.p2) {
        if r < m.rows() && c < m.cols() {
            m.set(r, c, false);
        }
    }
    m
}

/// Keeps segments whose one-pixel line, erased from the silhouette, raises
/// its 4-connected component count.
pub fn filter_separating(segments: &[CandidateSegment], state: &ParseState) -> Vec<CandidateSegment> {
    segments
        .iter()
        .filter_map(|s| {
            let mask = &state.projection(s.view).mask;
            let before = count_components(mask) as i64;
            let after = count_components(&erase(mask, s)) as i64;
            (after > before).then(|| CandidateSegment {
                component_count_delta: after - before,
                ..*s
            })
        })
        .collect()
}

/// Leak area of a separating segment: take the smallest piece touching the
/// erased line, and count the pixels of other pieces inside its
/// axis-aligned bounding box.
pub fn leak_area(seg: &CandidateSegment, state: &ParseState) -> f64 {
    let mask = erase(&state.projection(seg.view).mask, seg);
    let labels = label_image(&mask);
    let cols = mask.cols();
    let n = labels.iter().flatten().map(|&l| l + 1).max().unwrap_or(0);
    let mut size = vec![0usize; n];
    for l in labels.iter().flatten() {
        size[*l] += 1;
    }
    let mut touching = vec![false; n];
    for (r, c) in bresenham(seg.p1, seg.p2) {
        for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1), (0, 0)] {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr >= 0 && nc >= 0 && (nr as usize) < mask.rows() && (nc as usize) < cols {
                if let Some(l) = labels[nr as usize * cols + nc as usize] {
                    touching[l] = true;
                }
            }
        }
    }
    let Some(small) = (0..n).filter(|&l| touching[l]).min_by_key(|&l| (size[l], l)) else {
        return 0.0;
    };
    let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
    for (i, l) in labels.iter().enumerate() {
        if *l == Some(small) {
            let (r, c) = (i / cols, i % cols);
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r);
            c1 = c1.max(c);
        }
    }
    let mut leak = 0usize;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let l = labels[r * cols + c];
            if l.is_some() && l != Some(small) {
                leak += 1;
            }
        }
    }
    leak as f64
}

/// Sorted by leak area, then segment length, view, and endpoints.
pub fn score_segments(segments: &[CandidateSegment], state: &ParseState) -> Vec<CandidateSegment> {
    let mut out: Vec<CandidateSegment> = segments
        .iter()
        .map(|s| CandidateSegment {
            leak_area: leak_area(s, state),
            ..*s
        })
        .collect();
    out.sort_by(|a, b| {
        a.leak_area
            .total_cmp(&b.leak_area)
            .then(a.length().total_cmp(&b.length()))
            .then(a.view.cmp(&b.view))
            .then((a.p1, a.p2).cmp(&(b.p1, b.p2)))
    });
    out
}

/// Best separating segment, or a balanced fallback cut.
pub fn expert_action(state: &ParseState) -> CutAction {
    let sorted = score_segments(&filter_separating(&candidate_segments(state), state), state);
    if let Some(best) = sorted.first() {
        let (rows, cols) = state.projection(best.view).mask.dims();
        let p = |q: (usize, usize)| (q.0 as f64, q.1 as f64);
        return CutAction::from_pixels(best.view, p(best.p1), p(best.p2), rows, cols);
    }
    fallback_action(state)
}

/// Fraction of silhouette pixels on the smaller side of boundary `b`.
fn balance(counts: &[usize], b: usize) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let low: usize = counts[..b.min(counts.len())].iter().sum();
    low.min(total - low) as f64 / total as f64
}

fn keep_best(best: &mut Option<(f64, CutAction)>, score: f64, a: CutAction) {
    if score > 0.0 && best.map_or(true, |(s, _)| score > s) {
        *best = Some((score, a));
    }
}

/// Cut that splits the silhouettes as evenly as possible. Corner pairs are
/// tried first, since the environment snaps endpoints to corners; the raw
/// centre line of the best-balanced silhouette is used when no pair cuts
/// the region at all.
pub fn fallback_action(state: &ParseState) -> CutAction {
    let mut best: Option<(f64, CutAction)> = None;
    for (v, set) in state.corners.iter().enumerate() {
        let view = View::from_plane_id(v).expect("three views");
        let mask = &state.projections[v].mask;
        let (rows, cols) = mask.dims();
        for (i, a) in set.points.iter().enumerate() {
            for b in &set.points[i + 1..] {
                let act = CutAction::from_pixels(
                    view,
                    (a.row as f64, a.col as f64),
                    (b.row as f64, b.col as f64),
                    rows,
                    cols,
                );
                let cut = resolve_cut(state, &act, true);
                let counts = if cut.axis == view.axis().perpendicular().0 {
                    mask.row_counts()
                } else {
                    mask.col_counts()
                };
                keep_best(&mut best, balance(&counts, cut.coord), act);
            }
        }
    }
    if let Some((_, a)) = best {
        return a;
    }
    // Raw centre lines through each silhouette's bounding box.
    for (v, img) in state.projections.iter().enumerate() {
        let view = View::from_plane_id(v).expect("three views");
        let Some((r0, c0, r1, c1)) = img.mask.bounding_box() else { continue };
        let (rows, cols) = img.mask.dims();
        let rm = (r0 + r1 + 1) / 2;
        let cm = (c0 + c1 + 1) / 2;
        let horiz = CutAction::from_pixels(view, (rm as f64 - 0.5, c0 as f64), (rm as f64 - 0.5, c1 as f64), rows, cols);
        let vert = CutAction::from_pixels(view, (r0 as f64, cm as f64 - 0.5), (r1 as f64, cm as f64 - 0.5), rows, cols);
        for act in [horiz, vert] {
            let cut = resolve_cut(state, &act, false);
            let counts = if cut.axis == view.axis().perpendicular().0 {
                img.mask.row_counts()
            } else {
                img.mask.col_counts()
            };
            keep_best(&mut best, balance(&counts, cut.coord), act);
        }
    }
    best.map_or(CutAction::new(0.5, 0.5, 0.5, 0.5, 0.5), |(_, a)| a)
}

/// The expert as a [`Policy`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpertPolicy;

impl Policy for ExpertPolicy {
    fn act(&mut self, state: &ParseState) -> Result<CutAction> {
        Ok(expert_action(state))
    }
}

/// One expert episode on one shape.
#[derive(Clone, Debug)]
pub struct Demonstration {
    pub shape: String,
    pub transitions: Vec<Transition>,
    pub total_return: f64,
    pub metrics: EpisodeMetrics,
}

/// Expert episodes on every shape, `n_episodes` each; shapes run in
/// parallel, output order follows the input.
pub fn generate_demonstrations(
    shapes: &[(String, VoxelGrid)],
    config: &EnvConfig,
    n_episodes: usize,
) -> Result<Vec<Demonstration>> {
    let per_shape: Vec<Result<Vec<Demonstration>>> = shapes
        .par_iter()
        .map(|(name, grid)| {
            (0..n_episodes)
                .map(|_| {
                    let ep = run_episode(grid, config, &mut ExpertPolicy, None)?;
                    let transitions = ep
                        .steps
                        .iter()
                        .map(|s| Transition {
                            state: s.state.clone(),
                            action: s.action,
                            reward: s.reward,
                            next_state: s.next_state.clone(),
                            done: s.done,
                            expert_action: Some(s.action),
                        })
                        .collect();
                    Ok(Demonstration {
                        shape: name.clone(),
                        transitions,
                        total_return: ep.total_reward,
                        metrics: ep.metrics,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_shape {
        out.extend(r?);
    }
    Ok(out)
}
