use std::fmt;

use serde::{Deserialize, Serialize};

use super::image::Mask2D;
use crate::error::{Error, Result};

/// A coordinate axis of the voxel grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    /// The two remaining axes in increasing order; they are the (row, col)
    /// axes of any image taken perpendicular to `self`.
    #[inline]
    pub fn perpendicular(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    /// Whether `(row axis, col axis, self)` forms a right-handed frame.
    pub fn image_frame_is_right_handed(self) -> bool {
        !matches!(self, Axis::Y)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::invalid(format!("unknown axis {other:?}"))),
        }
    }
}

/// One of the three orthographic views. The plane id used by cut actions is
/// the view's position in [`View::ALL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    /// Looks along Y; image rows are X, columns are Z.
    Front,
    /// Looks along Z; image rows are X, columns are Y.
    Top,
    /// Looks along X; image rows are Y, columns are Z.
    End,
}

impl View {
    pub const ALL: [View; 3] = [View::Front, View::Top, View::End];

    #[inline]
    pub fn axis(self) -> Axis {
        match self {
            View::Front => Axis::Y,
            View::Top => Axis::Z,
            View::End => Axis::X,
        }
    }

    #[inline]
    pub fn plane_id(self) -> usize {
        match self {
            View::Front => 0,
            View::Top => 1,
            View::End => 2,
        }
    }

    pub fn from_plane_id(id: usize) -> Option<View> {
        View::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Top => "top",
            View::End => "end",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Placement of a voxel grid in world space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub origin: [f64; 3],
}

impl GridFrame {
    pub fn new(dims: [usize; 3], voxel_size: f64, origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::invalid(format!("voxel size must be positive, got {voxel_size}")));
        }
        Ok(GridFrame {
            dims,
            voxel_size,
            origin,
        })
    }

    /// Unit-cube frame with `n` cells per side.
    pub fn unit(n: usize) -> Self {
        GridFrame {
            dims: [n, n, n],
            voxel_size: 1.0 / n as f64,
            origin: [0.0; 3],
        }
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn cell_center(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + (idx[0] as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (idx[1] as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (idx[2] as f64 + 0.5) * self.voxel_size,
        ]
    }

    /// World point to continuous cell coordinates (cell `i` spans `[i, i+1)`).
    #[inline]
    pub fn to_cell_coords(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.voxel_size,
            (p[1] - self.origin[1]) / self.voxel_size,
            (p[2] - self.origin[2]) / self.voxel_size,
        ]
    }

    /// Continuous cell coordinates to a world point.
    #[inline]
    pub fn to_world(&self, c: [f64; 3]) -> [f64; 3] {
        [
            self.origin[0] + c[0] * self.voxel_size,
            self.origin[1] + c[1] * self.voxel_size,
            self.origin[2] + c[2] * self.voxel_size,
        ]
    }

    /// Index of the cell containing `p`, or `None` outside the grid.
    pub fn world_to_index(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let c = self.to_cell_coords(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = c[a].floor();
            if !(f >= 0.0 && (f as usize) < self.dims[a]) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }
}

/// Binary occupancy model of a solid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    frame: GridFrame,
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn empty(frame: GridFrame) -> Self {
        VoxelGrid {
            occupancy: vec![false; frame.cell_count()],
            frame,
        }
    }

    pub fn full(frame: GridFrame) -> Self {
        VoxelGrid {
            occupancy: vec![true; frame.cell_count()],
            frame,
        }
    }

    pub fn from_fn(frame: GridFrame, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let mut occupancy = Vec::with_capacity(frame.cell_count());
        let [nx, ny, nz] = frame.dims;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    occupancy.push(f([i, j, k]));
                }
            }
        }
        VoxelGrid { frame, occupancy }
    }

    /// Builds a grid from a raw buffer laid out as `(i * ny + j) * nz + k`.
    pub fn from_occupancy(frame: GridFrame, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != frame.cell_count() {
            return Err(Error::DimensionMismatch(format!(
                "occupancy length {} does not match dims {:?}",
                occupancy.len(),
                frame.dims
            )));
        }
        Ok(VoxelGrid { frame, occupancy })
    }

    #[inline]
    pub fn frame(&self) -> &GridFrame {
        &self.frame
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.frame.dims
    }

    #[inline]
    pub fn voxel_size(&self) -> f64 {
        self.frame.voxel_size
    }

    #[inline]
    pub fn origin(&self) -> [f64; 3] {
        self.frame.origin
    }

    #[inline]
    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        let [_, ny, nz] = self.frame.dims;
        (idx[0] * ny + idx[1]) * nz + idx[2]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.occupancy[self.linear_index(idx)]
    }

    /// Out-of-bounds cells read as empty.
    #[inline]
    pub fn get_signed(&self, idx: [isize; 3]) -> bool {
        let d = self.frame.dims;
        if (0..3).any(|a| idx[a] < 0 || idx[a] as usize >= d[a]) {
            return false;
        }
        self.get([idx[0] as usize, idx[1] as usize, idx[2] as usize])
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 3], value: bool) {
        let li = self.linear_index(idx);
        self.occupancy[li] = value;
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupancy.iter().any(|&b| b)
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [_, ny, nz] = self.frame.dims;
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(li, _)| [li / (ny * nz), (li / nz) % ny, li % nz])
    }

    pub fn same_dims(&self, other: &VoxelGrid) -> bool {
        self.frame.dims == other.frame.dims
    }

    /// Tight bounding cuboid of the occupied cells.
    pub fn bounding_box(&self) -> Option<Cuboid> {
        let mut min = [usize::MAX; 3];
        let mut max = [0usize; 3];
        let mut any = false;
        for idx in self.iter_occupied() {
            any = true;
            for a in 0..3 {
                min[a] = min[a].min(idx[a]);
                max[a] = max[a].max(idx[a]);
            }
        }
        any.then_some(Cuboid { min, max })
    }

    /// Cells occupied in both grids.
    pub fn intersection(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.zip_with(other, |a, b| a && b)
    }

    /// Cells of `self` not occupied in `other`.
    pub fn difference(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn union(&self, other: &VoxelGrid) -> Result<VoxelGrid> {
        self.zip_with(other, |a, b| a || b)
    }

    fn zip_with(&self, other: &VoxelGrid, f: impl Fn(bool, bool) -> bool) -> Result<VoxelGrid> {
        check_same_dims(self, other)?;
        Ok(VoxelGrid {
            frame: self.frame,
            occupancy: self
                .occupancy
                .iter()
                .zip(&other.occupancy)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// The cell layer `index` perpendicular to `axis`, as an image whose rows
    /// and columns follow [`Axis::perpendicular`].
    pub fn layer(&self, axis: Axis, index: usize) -> Mask2D {
        let (ua, va) = axis.perpendicular();
        let d = self.frame.dims;
        Mask2D::from_fn(d[ua.index()], d[va.index()], |u, v| {
            let mut idx = [0usize; 3];
            idx[axis.index()] = index;
            idx[ua.index()] = u;
            idx[va.index()] = v;
            self.get(idx)
        })
    }
}

pub(crate) fn check_same_dims(a: &VoxelGrid, b: &VoxelGrid) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "grid dims {:?} vs {:?}",
            a.dims(),
            b.dims()
        )))
    }
}

/// Axis-aligned box of cells, both corners inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cuboid {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl Cuboid {
    pub fn new(min: [usize; 3], max: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| min[a] > max[a]) {
            return Err(Error::invalid(format!("cuboid min {min:?} exceeds max {max:?}")));
        }
        Ok(Cuboid { min, max })
    }

    /// The whole extent of a grid.
    pub fn of_dims(dims: [usize; 3]) -> Self {
        Cuboid {
            min: [0; 3],
            max: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    #[inline]
    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.min[a] && idx[a] <= self.max[a])
    }

    pub fn fits_in(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|a| self.max[a] < dims[a])
    }

    pub fn extent(&self, axis: Axis) -> usize {
        self.max[axis.index()] - self.min[axis.index()] + 1
    }

    pub fn volume(&self) -> usize {
        Axis::ALL.iter().map(|&a| self.extent(a)).product()
    }

    /// Splits at the cell boundary `at` along `axis`: cells with coordinate
    /// `< at` go left. `at` must lie strictly inside the box.
    pub fn split(&self, axis: Axis, at: usize) -> Option<(Cuboid, Cuboid)> {
        let a = axis.index();
        if at <= self.min[a] || at > self.max[a] {
            return None;
        }
        let mut lo = *self;
        let mut hi = *self;
        lo.max[a] = at - 1;
        hi.min[a] = at;
        Some((lo, hi))
    }
}

/// A planar cross-section of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub axis: Axis,
    pub plane_index: usize,
    pub mask: Mask2D,
}

/// An orthographic silhouette.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjectionImage {
    pub view: View,
    pub mask: Mask2D,
}

/// Layer indices of `count` uniformly spaced slices over `n` layers.
pub fn slice_layers(n: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::invalid("slice count must be >= 1"));
    }
    if count > n {
        return Err(Error::invalid(format!(
            "slice count {count} exceeds {n} layers along the axis"
        )));
    }
    Ok((0..count)
        .map(|i| {
            let pos = (i as f64 + 0.5) * n as f64 / count as f64;
            (pos.floor() as usize).min(n - 1)
        })
        .collect())
}

/// Uniformly spaced cross-sections along `axis`.
pub fn extract_slices(grid: &VoxelGrid, axis: Axis, count: usize) -> Result<Vec<CrossSection>> {
    let n = grid.dims()[axis.index()];
    Ok(slice_layers(n, count)?
        .into_iter()
        .map(|k| CrossSection {
            axis,
            plane_index: k,
            mask: grid.layer(axis, k),
        })
        .collect())
}

/// Orthographic silhouette along the view axis.
pub fn project(grid: &VoxelGrid, view: View) -> ProjectionImage {
    let axis = view.axis();
    let (ua, va) = axis.perpendicular();
    let d = grid.dims();
    let mut mask = Mask2D::new(d[ua.index()], d[va.index()]);
    for idx in grid.iter_occupied() {
        mask.set(idx[ua.index()], idx[va.index()], true);
    }
    ProjectionImage { view, mask }
}

/// Zeroes every cell outside `bounds`.
pub fn clip(grid: &VoxelGrid, bounds: &Cuboid) -> Result<VoxelGrid> {
    if !bounds.fits_in(grid.dims()) {
        return Err(Error::invalid(format!(
            "cuboid {bounds:?} exceeds grid dims {:?}",
            grid.dims()
        )));
    }
    let mut out = VoxelGrid::empty(*grid.frame());
    for idx in grid.iter_occupied() {
        if bounds.contains(idx) {
            out.set(idx, true);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(n: usize) -> GridFrame {
        GridFrame::unit(n)
    }

    #[test]
    fn full_cube_slices_at_odd_layers() {
        let g = VoxelGrid::full(frame(8));
        let s = extract_slices(&g, Axis::Z, 4).unwrap();
        let idx: Vec<_> = s.iter().map(|c| c.plane_index).collect();
        assert_eq!(idx, vec![1, 3, 5, 7]);
        assert!(s.iter().all(|c| c.mask.count() == 64));
    }

    #[test]
    fn empty_grid_slices_are_empty() {
        let g = VoxelGrid::empty(frame(6));
        for axis in Axis::ALL {
            let s = extract_slices(&g, axis, 2).unwrap();
            assert_eq!(s.len(), 2);
            assert!(s.iter().all(|c| c.mask.is_empty()));
        }
    }

    #[test]
    fn slice_count_errors() {
        let g = VoxelGrid::empty(frame(4));
        assert!(extract_slices(&g, Axis::X, 0).is_err());
        assert!(extract_slices(&g, Axis::X, 5).is_err());
    }

    #[test]
    fn l_solid_slices_match_layers() {
        let g = VoxelGrid::from_fn(frame(10), |[i, j, k]| {
            (i < 4 && j < 8 && k < 9) || (i < 9 && j < 3 && k < 4)
        });
        let s = extract_slices(&g, Axis::Z, 8).unwrap();
        for cs in &s {
            for i in 0..10 {
                for j in 0..10 {
                    assert_eq!(cs.mask.get(i, j), g.get([i, j, cs.plane_index]));
                }
            }
        }
    }

    #[test]
    fn single_voxel_top_projection() {
        let mut g = VoxelGrid::empty(frame(5));
        g.set([1, 3, 4], true);
        let p = project(&g, View::Top);
        assert_eq!(p.mask.count(), 1);
        assert!(p.mask.get(1, 3));
    }

    #[test]
    fn full_projection_is_full() {
        let g = VoxelGrid::full(frame(4));
        for v in View::ALL {
            assert_eq!(project(&g, v).mask.count(), 16);
        }
    }

    #[test]
    fn clip_to_half_and_identity() {
        let g = VoxelGrid::full(frame(4));
        let half = Cuboid::new([0, 0, 0], [1, 3, 3]).unwrap();
        assert_eq!(clip(&g, &half).unwrap().count(), 32);
        assert_eq!(clip(&g, &Cuboid::of_dims([4, 4, 4])).unwrap(), g);
        assert!(clip(&g, &Cuboid::new([0; 3], [4, 0, 0]).unwrap()).is_err());
    }

    #[test]
    fn world_index_round_trip() {
        let f = GridFrame::new([3, 4, 5], 0.25, [1.0, -2.0, 0.5]).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..5 {
                    assert_eq!(f.world_to_index(f.cell_center([i, j, k])), Some([i, j, k]));
                }
            }
        }
        assert_eq!(f.world_to_index([0.9, 0.0, 1.0]), None);
    }

    #[test]
    fn cuboid_split() {
        let c = Cuboid::new([0, 0, 0], [7, 3, 3]).unwrap();
        let (a, b) = c.split(Axis::X, 3).unwrap();
        assert_eq!(a.max[0], 2);
        assert_eq!(b.min[0], 3);
        assert!(c.split(Axis::X, 0).is_none());
        assert!(c.split(Axis::X, 8).is_none());
        assert_eq!(a.volume() + b.volume(), c.volume());
    }
}
