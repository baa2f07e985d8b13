//! Harris corner detection on binary silhouettes.
//!
//! Silhouettes are treated as sitting on an infinite background: pixels
//! outside the image read as empty, so a shape touching the image border
//! still has corners there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mask2D, ProjectionImage, View};

/// Response threshold: a fixed value, or a fraction of the image maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    Absolute(f64),
    Relative(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarrisParams {
    pub k: f64,
    pub window_radius: usize,
    pub threshold: Threshold,
    pub nms_radius: usize,
    pub max_corners: usize,
    /// 3x3 box blur before differentiation. Off by default: on exact binary
    /// silhouettes the blur and a wider window pull the response peak about
    /// 1.5 px inside the true vertex.
    pub smooth: bool,
}

impl Default for HarrisParams {
    fn default() -> Self {
        HarrisParams {
            k: 0.05,
            window_radius: 1,
            threshold: Threshold::Relative(0.01),
            nms_radius: 3,
            max_corners: 32,
            smooth: false,
        }
    }
}

impl HarrisParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius == 0 || self.nms_radius == 0 || self.max_corners == 0 {
            return Err(Error::invalid(
                "window_radius, nms_radius and max_corners must be >= 1",
            ));
        }
        match self.threshold {
            Threshold::Absolute(t) | Threshold::Relative(t) if !(t > 0.0) => {
                return Err(Error::invalid(format!("threshold must be > 0, got {t}")))
            }
            _ => {}
        }
        if !(0.01..=0.25).contains(&self.k) {
            log::warn!("harris k = {} outside the usual [0.01, 0.25] range", self.k);
        }
        Ok(())
    }
}

/// Per-pixel corner response.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ResponseMap {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub row: usize,
    pub col: usize,
    pub response: f64,
}

/// Detected corners of one view, strongest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerSet {
    pub view: View,
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<Corner>,
}

impl CornerSet {
    pub fn empty(view: View, rows: usize, cols: usize) -> Self {
        CornerSet {
            view,
            rows,
            cols,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// CSV with header `view,row,col,response`, one line per corner.
pub fn write_corners_csv<W: std::io::Write>(sets: &[CornerSet], mut w: W) -> Result<()> {
    writeln!(w, "view,row,col,response")?;
    for set in sets {
        for p in &set.points {
            writeln!(w, "{},{},{},{:.9e}", set.view.name(), p.row, p.col, p.response)?;
        }
    }
    Ok(())
}

/// Float image with a zero border of `pad` pixels on every side.
struct Padded {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Padded {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

fn padded_input(mask: &Mask2D, pad: usize, smooth: bool) -> Padded {
    let rows = mask.rows() + 2 * pad;
    let cols = mask.cols() + 2 * pad;
    let mut data = vec![0.0; rows * cols];
    for (r, c) in mask.iter_true() {
        data[(r + pad) * cols + c + pad] = 1.0;
    }
    let raw = Padded { rows, cols, data };
    if !smooth {
        return raw;
    }
    let mut out = vec![0.0; rows * cols];
    for r in 1..rows - 1 {
        for c in 1..cols - 1 {
            let mut s = 0.0;
            for dr in 0..3 {
                for dc in 0..3 {
                    s += raw.at(r + dr - 1, c + dc - 1);
                }
            }
            out[r * cols + c] = s / 9.0;
        }
    }
    Padded { rows, cols, data: out }
}

/// `det(M) - k * trace(M)^2` with `M` the box-windowed structure tensor of
/// central-difference gradients.
pub fn harris_response(mask: &Mask2D, params: &HarrisParams) -> Result<ResponseMap> {
    if mask.rows() < 3 || mask.cols() < 3 {
        return Err(Error::invalid(format!(
            "image must be at least 3x3, got {}x{}",
            mask.rows(),
            mask.cols()
        )));
    }
    let w = params.window_radius;
    let pad = w + 2;
    let img = padded_input(mask, pad, params.smooth);
    let (pr, pc) = (img.rows, img.cols);

    // Summed-area tables of the gradient products, one extra row/col of zeros.
    let sat_cols = pc + 1;
    let mut sxx = vec![0.0; (pr + 1) * sat_cols];
    let mut syy = vec![0.0; (pr + 1) * sat_cols];
    let mut sxy = vec![0.0; (pr + 1) * sat_cols];
    for r in 0..pr {
        for c in 0..pc {
            let (ix, iy) = if r == 0 || c == 0 || r == pr - 1 || c == pc - 1 {
                (0.0, 0.0)
            } else {
                (
                    0.5 * (img.at(r, c + 1) - img.at(r, c - 1)),
                    0.5 * (img.at(r + 1, c) - img.at(r - 1, c)),
                )
            };
            let i = (r + 1) * sat_cols + c + 1;
            let up = r * sat_cols + c + 1;
            let left = (r + 1) * sat_cols + c;
            let diag = r * sat_cols + c;
            sxx[i] = ix * ix + sxx[up] + sxx[left] - sxx[diag];
            syy[i] = iy * iy + syy[up] + syy[left] - syy[diag];
            sxy[i] = ix * iy + sxy[up] + sxy[left] - sxy[diag];
        }
    }
    let box_sum = |t: &[f64], r0: usize, c0: usize, r1: usize, c1: usize| {
        t[(r1 + 1) * sat_cols + c1 + 1] - t[r0 * sat_cols + c1 + 1] - t[(r1 + 1) * sat_cols + c0]
            + t[r0 * sat_cols + c0]
    };

    let (rows, cols) = mask.dims();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (cr, cc) = (r + pad, c + pad);
            let (r0, r1, c0, c1) = (cr - w, cr + w, cc - w, cc + w);
            let a = box_sum(&sxx, r0, c0, r1, c1);
            let b = box_sum(&syy, r0, c0, r1, c1);
            let x = box_sum(&sxy, r0, c0, r1, c1);
            let det = a * b - x * x;
            let tr = a + b;
            data.push(det - params.k * tr * tr);
        }
    }
    Ok(ResponseMap { rows, cols, data })
}

/// Strict priority order: larger response wins, then smaller `(row, col)`.
#[inline]
fn outranks(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Thresholded, non-maximum-suppressed Harris corners.
pub fn detect_corners(img: &ProjectionImage, params: &HarrisParams) -> Result<CornerSet> {
    detect_corners_in(&img.mask, img.view, params)
}

pub fn detect_corners_in(mask: &Mask2D, view: View, params: &HarrisParams) -> Result<CornerSet> {
    params.validate()?;
    let resp = harris_response(mask, params)?;
    let (rows, cols) = (resp.rows, resp.cols);
    let peak = resp.max();
    let thr = match params.threshold {
        Threshold::Absolute(t) => t,
        Threshold::Relative(f) => f * peak,
    };
    let mut set = CornerSet::empty(view, rows, cols);
    if !(peak > 0.0) {
        return Ok(set);
    }
    let rad = params.nms_radius as isize - 1;
    let mut candidates = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = resp.get(r, c);
            if !(v > thr && v > 0.0) {
                continue;
            }
            let me = (v, r, c);
            let mut is_max = true;
            'nbr: for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if (dr == 0 && dc == 0)
                        || nr < 0
                        || nc < 0
                        || nr as usize >= rows
                        || nc as usize >= cols
                    {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if outranks((resp.get(nr, nc), nr, nc), me) {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                candidates.push(Corner { row: r, col: c, response: v });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
    for cand in candidates {
        if set.points.len() >= params.max_corners {
            break;
        }
        let spaced = set.points.iter().all(|p| {
            let d = (p.row as isize - cand.row as isize)
                .abs()
                .max((p.col as isize - cand.col as isize).abs());
            d >= params.nms_radius as isize
        });
        if spaced {
            set.points.push(cand);
        }
    }
    Ok(set)
}

/// The corner closest to `(x, y)` (x along columns, y along rows); ties go to
/// the stronger response, then the smaller `(row, col)`. `None` when the set
/// is empty, in which case callers round the raw point.
pub fn nearest_corner(p: (f64, f64), corners: &CornerSet) -> Option<(usize, usize)> {
    let (x, y) = p;
    corners
        .points
        .iter()
        .min_by(|a, b| {
            let da = (a.col as f64 - x).powi(2) + (a.row as f64 - y).powi(2);
            let db = (b.col as f64 - x).powi(2) + (b.row as f64 - y).powi(2);
            da.total_cmp(&db)
                .then(b.response.total_cmp(&a.response))
                .then((a.row, a.col).cmp(&(b.row, b.col)))
        })
        .map(|c| (c.row, c.col))
}

/// Corners of all three views of a set of projections.
pub fn detect_all(projections: &[ProjectionImage; 3], params: &HarrisParams) -> Result<[CornerSet; 3]> {
    Ok([
        detect_corners(&projections[0], params)?,
        detect_corners(&projections[1], params)?,
        detect_corners(&projections[2], params)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(rows: usize, cols: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> Mask2D {
        Mask2D::from_fn(rows, cols, |r, c| r >= r0 && r < r1 && c >= c0 && c < c1)
    }

    /// Direct per-pixel evaluation of the windowed structure tensor.
    fn brute_response(mask: &Mask2D, p: &HarrisParams) -> Vec<f64> {
        let f = |r: isize, c: isize| -> f64 {
            if p.smooth {
                let mut s = 0.0;
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        s += mask.get_or_false(r + dr, c + dc) as u8 as f64;
                    }
                }
                s / 9.0
            } else {
                mask.get_or_false(r, c) as u8 as f64
            }
        };
        let w = p.window_radius as isize;
        let mut out = Vec::new();
        for r in 0..mask.rows() as isize {
            for c in 0..mask.cols() as isize {
                let (mut a, mut b, mut x) = (0.0, 0.0, 0.0);
                for wr in r - w..=r + w {
                    for wc in c - w..=c + w {
                        let ix = 0.5 * (f(wr, wc + 1) - f(wr, wc - 1));
                        let iy = 0.5 * (f(wr + 1, wc) - f(wr - 1, wc));
                        a += ix * ix;
                        b += iy * iy;
                        x += ix * iy;
                    }
                }
                out.push(a * b - x * x - p.k * (a + b) * (a + b));
            }
        }
        out
    }

    #[test]
    fn blank_image_has_zero_response_and_no_corners() {
        let m = Mask2D::new(12, 12);
        let r = harris_response(&m, &HarrisParams::default()).unwrap();
        assert!(r.data.iter().all(|&v| v == 0.0));
        let set = detect_corners_in(&m, View::Top, &HarrisParams::default()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn full_image_has_four_corners_at_image_corners() {
        let m = Mask2D::filled(16, 16, true);
        let set = detect_corners_in(&m, View::Top, &HarrisParams::default()).unwrap();
        assert_eq!(set.len(), 4);
        for p in &set.points {
            assert!(p.row == 0 || p.row == 15);
            assert!(p.col == 0 || p.col == 15);
        }
    }

    #[test]
    fn edge_interior_is_not_a_corner() {
        let m = rect(20, 20, 4, 4, 16, 16);
        let r = harris_response(&m, &HarrisParams::default()).unwrap();
        for row in 3..=4 {
            assert!(r.get(row, 10) <= 1e-12, "{}", r.get(row, 10));
        }
    }

    #[test]
    fn response_matches_brute_force() {
        let m = rect(16, 16, 4, 4, 12, 12);
        for (smooth, window_radius) in [(false, 1), (true, 1), (false, 2), (true, 2)] {
            let p = HarrisParams { smooth, window_radius, ..HarrisParams::default() };
            let fast = harris_response(&m, &p).unwrap();
            let slow = brute_response(&m, &p);
            for (a, b) in fast.data.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn too_small_image_errors() {
        assert!(harris_response(&Mask2D::new(2, 5), &HarrisParams::default()).is_err());
    }

    #[test]
    fn nearest_corner_ties_prefer_response() {
        let set = CornerSet {
            view: View::Top,
            rows: 10,
            cols: 10,
            points: vec![
                Corner { row: 2, col: 2, response: 1.0 },
                Corner { row: 2, col: 6, response: 2.0 },
            ],
        };
        assert_eq!(nearest_corner((4.0, 2.0), &set), Some((2, 6)));
        assert_eq!(nearest_corner((2.0, 2.0), &set), Some((2, 2)));
        assert_eq!(nearest_corner((0.0, 0.0), &CornerSet::empty(View::Top, 3, 3)), None);
    }
}
