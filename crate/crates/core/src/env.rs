//! The sequential-cut environment.
//!
//! Each step maps a five-number action to a segment in one of the three
//! silhouettes of the remaining region, snaps its endpoints to detected
//! corners, turns it into an axis-aligned plane, and splits the remaining
//! region's bounding cuboid there. The side with fewer occupied cells becomes
//! the next part; it is surfaced from its slices and rewarded for coverage
//! and reconstruction fidelity.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corners::{detect_all, nearest_corner, CornerSet, HarrisParams};
use crate::error::{Error, Result};
use crate::geom::{
    chamfer_l1, clip, project, slice_layers, surface_iou, volume_iou, voxelize_into, Axis, Cuboid,
    ProjectionImage, TriMesh, View, VoxelGrid,
};
use crate::surfacer::{reconstruct_part, CorrespondParams, PartSlices};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub max_steps: usize,
    /// Weight of the reconstruction term in the reward.
    pub lambda: f64,
    pub coverage_stop: f64,
    /// Used when a mesh is voxelized for the environment.
    pub grid_resolution: usize,
    pub slice_axis: Axis,
    pub slice_count: usize,
    /// Reward for a cut whose smaller side holds no remaining cells.
    pub empty_penalty: f64,
    /// Snap action endpoints to detected corners. Off for the
    /// no-projection baseline.
    pub snap_to_corners: bool,
    pub chamfer_samples: usize,
    pub harris: HarrisParams,
    pub correspond: CorrespondParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            max_steps: 10,
            lambda: 1.0,
            coverage_stop: 0.98,
            grid_resolution: 32,
            slice_axis: Axis::Z,
            slice_count: 12,
            empty_penalty: 0.1,
            snap_to_corners: true,
            chamfer_samples: 2000,
            harris: HarrisParams::default(),
            correspond: CorrespondParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be >= 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.coverage_stop > 0.0 && self.coverage_stop <= 1.0) {
            return Err(Error::invalid(format!("coverage_stop must be in (0, 1], got {}", self.coverage_stop)));
        }
        if self.grid_resolution < 3 || self.slice_count == 0 || self.chamfer_samples == 0 {
            return Err(Error::invalid("grid_resolution >= 3, slice_count >= 1 and chamfer_samples >= 1 required"));
        }
        if !(self.empty_penalty >= 0.0) {
            return Err(Error::invalid("empty_penalty must be >= 0"));
        }
        self.harris.validate()
    }

    /// Upper bound of a single step's reward.
    pub fn max_reward(&self) -> f64 {
        1.0 + self.lambda
    }
}

/// Five-number cut action; every component lies in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutAction {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub c: f64,
}

fn unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

impl CutAction {
    pub const DIM: usize = 5;

    /// Clamps every component to `[0, 1]`; NaN becomes 0.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, c: f64) -> Self {
        CutAction {
            x1: unit(x1),
            y1: unit(y1),
            x2: unit(x2),
            y2: unit(y2),
            c: unit(c),
        }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        CutAction::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x1, self.y1, self.x2, self.y2, self.c]
    }

    pub fn view(&self) -> View {
        let id = ((3.0 * self.c).floor() as usize).min(2);
        View::from_plane_id(id).expect("plane id is clamped")
    }

    /// Action selecting `view` with endpoints given as pixel `(row, col)`.
    pub fn from_pixels(view: View, p1: (f64, f64), p2: (f64, f64), rows: usize, cols: usize) -> Self {
        let nr = (rows.max(2) - 1) as f64;
        let nc = (cols.max(2) - 1) as f64;
        CutAction::new(p1.1 / nc, p1.0 / nr, p2.1 / nc, p2.0 / nr, (view.plane_id() as f64 + 0.5) / 3.0)
    }
}

/// What the policy sees: silhouettes and corners of the remaining region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseState {
    pub projections: [ProjectionImage; 3],
    pub corners: [CornerSet; 3],
    pub step_index: usize,
    pub max_steps: usize,
    pub max_corners: usize,
}

pub const CORNER_SENTINEL: (f64, f64) = (-1.0, -1.0);

impl ParseState {
    pub fn of_region(remaining: &VoxelGrid, step_index: usize, config: &EnvConfig) -> Result<Self> {
        let projections = View::ALL.map(|v| project(remaining, v));
        let corners = detect_all(&projections, &config.harris)?;
        Ok(ParseState {
            projections,
            corners,
            step_index,
            max_steps: config.max_steps,
            max_corners: config.harris.max_corners,
        })
    }

    /// Per view, exactly `max_corners` `(row, col)` pairs normalised to
    /// `[0, 1]`, padded with [`CORNER_SENTINEL`].
    pub fn corner_lists(&self) -> [Vec<(f64, f64)>; 3] {
        std::array::from_fn(|v| {
            let set = &self.corners[v];
            let nr = (set.rows.max(2) - 1) as f64;
            let nc = (set.cols.max(2) - 1) as f64;
            let mut out: Vec<(f64, f64)> = set
                .points
                .iter()
                .take(self.max_corners)
                .map(|p| (p.row as f64 / nr, p.col as f64 / nc))
                .collect();
            out.resize(self.max_corners, CORNER_SENTINEL);
            out
        })
    }

    pub fn step_fraction(&self) -> f64 {
        self.step_index as f64 / self.max_steps as f64
    }

    pub fn projection(&self, view: View) -> &ProjectionImage {
        &self.projections[view.plane_id()]
    }
}

/// One separated part: its cuboid, its cells and its surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Part {
    pub cuboid: Cuboid,
    pub cells: VoxelGrid,
    pub mesh: TriMesh,
    /// `mesh` voxelized into the shape's frame.
    pub voxels: VoxelGrid,
    /// surface IoU of `voxels` against `cells`.
    pub fidelity: f64,
    /// True for the part that covers what is left when the episode ends.
    pub implicit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub action: [f64; 5],
    pub view: usize,
    /// Endpoints `(row, col)` after snapping.
    pub snapped_points: [[usize; 2]; 2],
    pub cut_axis: Axis,
    /// Cells with coordinate `< cut_coord` along `cut_axis` form one side.
    pub cut_coord: usize,
    pub reward: f64,
    pub remaining_cells: usize,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub reward: f64,
    pub next_state: Arc<ParseState>,
    pub done: bool,
    /// Cuboid of the separated part; `None` when the cut missed the region.
    pub part: Option<Cuboid>,
    pub part_mesh: TriMesh,
    pub trace: TraceRecord,
}

/// Where an action cuts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutPlane {
    pub view: View,
    pub p1: (usize, usize),
    pub p2: (usize, usize),
    pub axis: Axis,
    pub coord: usize,
}

pub struct ParseEnv {
    config: EnvConfig,
    shape: Option<VoxelGrid>,
    slice_planes: Vec<usize>,
    remaining: Option<VoxelGrid>,
    parts: Vec<Part>,
    state: Option<Arc<ParseState>>,
    done: bool,
}

impl ParseEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(ParseEnv {
            config,
            shape: None,
            slice_planes: Vec::new(),
            remaining: None,
            parts: Vec::new(),
            state: None,
            done: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn reset(&mut self, shape: &VoxelGrid) -> Result<Arc<ParseState>> {
        if shape.is_empty() {
            return Err(Error::EmptyShape("shape has no occupied cells".into()));
        }
        if shape.dims().iter().any(|&d| d < 3) {
            return Err(Error::invalid(format!("grid dims {:?} too small (need >= 3)", shape.dims())));
        }
        let n = shape.dims()[self.config.slice_axis.index()];
        self.slice_planes = slice_layers(n, self.config.slice_count.min(n))?;
        let state = Arc::new(ParseState::of_region(shape, 0, &self.config)?);
        self.shape = Some(shape.clone());
        self.remaining = Some(shape.clone());
        self.parts.clear();
        self.state = Some(state.clone());
        self.done = false;
        Ok(state)
    }

    fn shape_ref(&self) -> Result<&VoxelGrid> {
        self.shape.as_ref().ok_or_else(|| Error::invalid("environment not reset"))
    }

    pub fn shape(&self) -> Option<&VoxelGrid> {
        self.shape.as_ref()
    }

    pub fn remaining(&self) -> Option<&VoxelGrid> {
        self.remaining.as_ref()
    }

    pub fn state(&self) -> Option<&Arc<ParseState>> {
        self.state.as_ref()
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn slice_planes(&self) -> &[usize] {
        &self.slice_planes
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Fraction of the shape's cells already assigned to parts.
    pub fn coverage(&self) -> f64 {
        match (&self.shape, &self.remaining) {
            (Some(s), Some(r)) => 1.0 - r.count() as f64 / s.count() as f64,
            _ => 0.0,
        }
    }

    /// Where `action` would cut in the current state.
    pub fn resolve_cut(&self, action: &CutAction) -> Result<CutPlane> {
        let state = self.state.as_ref().ok_or_else(|| Error::invalid("environment not reset"))?;
        Ok(resolve_cut(state, action, self.config.snap_to_corners))
    }

    /// The part a cut would separate: the side of the remaining region's
    /// bounding cuboid with fewer occupied cells (ties: lower side). `None`
    /// if the plane misses the cuboid.
    pub fn split_region(&self, axis: Axis, coord: usize) -> Result<Option<Cuboid>> {
        let remaining = self.remaining.as_ref().ok_or_else(|| Error::invalid("environment not reset"))?;
        Ok(split_region(remaining, axis, coord))
    }

    fn surface(&self, cells: &VoxelGrid) -> Result<(TriMesh, VoxelGrid, f64)> {
        let slices = PartSlices::from_grid(cells, self.config.slice_axis, &self.slice_planes);
        let mesh = reconstruct_part(&slices, &self.config.correspond)?;
        let voxels = voxelize_into(&mesh, cells.frame());
        let fidelity = surface_iou(&voxels, cells)?;
        Ok((mesh, voxels, fidelity))
    }

    pub fn step(&mut self, action: &CutAction) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let shape = self.shape_ref()?.clone();
        let cut = self.resolve_cut(action)?;
        let part = self.split_region(cut.axis, cut.coord)?;
        let remaining = self.remaining.as_mut().expect("reset checked");
        let cells = match part {
            Some(cb) => clip(remaining, &cb)?,
            None => VoxelGrid::empty(*remaining.frame()),
        };

        let (reward, part_mesh) = if cells.is_empty() {
            (-self.config.empty_penalty, TriMesh::default())
        } else {
            let (mesh, voxels, fidelity) = self.surface(&cells)?;
            let reward = volume_iou(&cells, &shape)? + self.config.lambda * fidelity;
            let remaining = self.remaining.as_mut().expect("reset checked");
            *remaining = remaining.difference(&cells)?;
            self.parts.push(Part {
                cuboid: part.expect("nonempty cells come from a cuboid"),
                cells,
                mesh: mesh.clone(),
                voxels,
                fidelity,
                implicit: false,
            });
            (reward, mesh)
        };

        let step_index = self.state.as_ref().map_or(0, |s| s.step_index) + 1;
        self.done = self.coverage() >= self.config.coverage_stop || step_index >= self.config.max_steps;
        let remaining = self.remaining.as_ref().expect("reset checked").clone();
        if self.done && !remaining.is_empty() {
            let cuboid = remaining.bounding_box().expect("nonempty");
            let (mesh, voxels, fidelity) = self.surface(&remaining)?;
            self.parts.push(Part {
                cuboid,
                cells: remaining.clone(),
                mesh,
                voxels,
                fidelity,
                implicit: true,
            });
            self.remaining = Some(VoxelGrid::empty(*remaining.frame()));
        }
        let remaining_cells = self.remaining.as_ref().expect("reset checked").count();
        // The final state keeps the silhouettes of what the cuts left, so a
        // learner sees a consistent last observation.
        let next_state = Arc::new(ParseState::of_region(&remaining, step_index, &self.config)?);
        self.state = Some(next_state.clone());
        let trace = TraceRecord {
            step: step_index - 1,
            action: action.to_array(),
            view: cut.view.plane_id(),
            snapped_points: [[cut.p1.0, cut.p1.1], [cut.p2.0, cut.p2.1]],
            cut_axis: cut.axis,
            cut_coord: cut.coord,
            reward,
            remaining_cells,
        };
        Ok(StepResult {
            reward,
            next_state,
            done: self.done,
            part,
            part_mesh,
            trace,
        })
    }

    /// Concatenation of all part meshes.
    pub fn final_mesh(&self) -> TriMesh {
        let mut m = TriMesh::merged(self.parts.iter().map(|p| &p.mesh));
        m.closed = self.parts.iter().all(|p| p.mesh.closed);
        m
    }

    /// Union of the voxelized part surfaces.
    pub fn reconstruction_voxels(&self) -> Result<VoxelGrid> {
        let shape = self.shape_ref()?;
        let mut acc = VoxelGrid::empty(*shape.frame());
        for p in &self.parts {
            acc = acc.union(&p.voxels)?;
        }
        Ok(acc)
    }
}

/// Maps the action to pixels, snaps, and axis-aligns the segment.
pub fn resolve_cut(state: &ParseState, action: &CutAction, snap: bool) -> CutPlane {
    let view = action.view();
    let img = state.projection(view);
    let set = &state.corners[view.plane_id()];
    let (rows, cols) = img.mask.dims();
    let to_px = |x: f64, y: f64| -> (usize, usize) {
        let (pc, pr) = (x * (cols - 1) as f64, y * (rows - 1) as f64);
        let snapped = if snap { nearest_corner((pc, pr), set) } else { None };
        snapped.unwrap_or((pr.round() as usize, pc.round() as usize))
    };
    let p1 = to_px(action.x1, action.y1);
    let p2 = to_px(action.x2, action.y2);
    let (ua, va) = view.axis().perpendicular();
    let drow = (p1.0 as f64 - p2.0 as f64).abs();
    let dcol = (p1.1 as f64 - p2.1 as f64).abs();
    let (axis, line, counts) = if dcol >= drow {
        (ua, 0.5 * (p1.0 + p2.0) as f64, img.mask.row_counts())
    } else {
        (va, 0.5 * (p1.1 + p2.1) as f64, img.mask.col_counts())
    };
    let coord = refine_boundary(line.round() as usize, &counts);
    CutPlane {
        view,
        p1,
        p2,
        axis,
        coord,
    }
}

/// Picks the cell boundary for a cut through pixel line `r`: among the
/// boundaries `r-1 ..= r+2` that separate two occupied lines, the one with
/// the largest change in silhouette width (ties: closest to the line centre
/// `r + 0.5`, then lower). Corners sit on either side of the boundary they
/// mark, so this recovers the intended boundary from either pixel. Without
/// such a boundary the plane goes through `r + 1` and may miss the region.
pub fn refine_boundary(r: usize, counts: &[usize]) -> usize {
    let lo = counts.iter().position(|&c| c > 0);
    let hi = counts.iter().rposition(|&c| c > 0);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return r + 1;
    };
    let centre = r as f64 + 0.5;
    let mut best: Option<(usize, usize)> = None;
    for b in r.saturating_sub(1)..=r + 2 {
        if b < lo + 1 || b > hi {
            continue;
        }
        let jump = counts[b].abs_diff(counts[b - 1]);
        let better = match best {
            None => true,
            Some((bj, bb)) => {
                jump > bj || (jump == bj && (b as f64 - centre).abs() < (bb as f64 - centre).abs())
            }
        };
        if better {
            best = Some((jump, b));
        }
    }
    best.map_or(r + 1, |(_, b)| b)
}

pub fn split_region(remaining: &VoxelGrid, axis: Axis, coord: usize) -> Option<Cuboid> {
    let bb = remaining.bounding_box()?;
    let (low, high) = bb.split(axis, coord)?;
    let a = axis.index();
    let (mut n_low, mut n_high) = (0usize, 0usize);
    for idx in remaining.iter_occupied() {
        if idx[a] < coord {
            n_low += 1;
        } else {
            n_high += 1;
        }
    }
    Some(if n_high < n_low { high } else { low })
}

/// Anything that maps a state to an action.
pub trait Policy {
    fn act(&mut self, state: &ParseState) -> Result<CutAction>;
}

impl<F: FnMut(&ParseState) -> CutAction> Policy for F {
    fn act(&mut self, state: &ParseState) -> Result<CutAction> {
        Ok(self(state))
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeStep {
    pub state: Arc<ParseState>,
    pub action: CutAction,
    pub reward: f64,
    pub next_state: Arc<ParseState>,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub surface_iou: f64,
    /// `None` when the reconstruction has no surface to sample.
    pub chamfer_l1: Option<f64>,
    pub parts: usize,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub parts: Vec<Part>,
    pub steps: Vec<EpisodeStep>,
    pub trace: Vec<TraceRecord>,
    pub total_reward: f64,
    pub final_mesh: TriMesh,
    pub metrics: EpisodeMetrics,
}

/// Plays one episode. `ground_truth` defaults to the shape's voxel boundary
/// mesh.
pub fn run_episode(
    shape: &VoxelGrid,
    config: &EnvConfig,
    policy: &mut dyn Policy,
    ground_truth: Option<&TriMesh>,
) -> Result<EpisodeResult> {
    let mut env = ParseEnv::new(config.clone())?;
    let mut state = env.reset(shape)?;
    let mut steps = Vec::new();
    let mut trace = Vec::new();
    let mut total_reward = 0.0;
    loop {
        let action = policy.act(&state)?;
        let r = env.step(&action)?;
        total_reward += r.reward;
        steps.push(EpisodeStep {
            state: state.clone(),
            action,
            reward: r.reward,
            next_state: r.next_state.clone(),
            done: r.done,
        });
        trace.push(r.trace);
        state = r.next_state;
        if r.done {
            break;
        }
    }
    let final_mesh = env.final_mesh();
    let recon = env.reconstruction_voxels()?;
    let gt_owned;
    let gt = match ground_truth {
        Some(m) => m,
        None => {
            gt_owned = TriMesh::from_voxels(shape);
            &gt_owned
        }
    };
    let chamfer = if final_mesh.surface_area() > 0.0 && gt.surface_area() > 0.0 {
        Some(chamfer_l1(&final_mesh, gt, config.chamfer_samples)?)
    } else {
        None
    };
    let metrics = EpisodeMetrics {
        surface_iou: surface_iou(&recon, shape)?,
        chamfer_l1: chamfer,
        parts: env.parts().len(),
        steps: steps.len(),
    };
    Ok(EpisodeResult {
        parts: env.parts().to_vec(),
        steps,
        trace,
        total_reward,
        final_mesh,
        metrics,
    })
}

/// One JSON object per line.
pub fn write_trace<W: Write>(records: &[TraceRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
