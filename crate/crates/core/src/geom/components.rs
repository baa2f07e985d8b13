use super::image::Mask2D;

/// Pixel set of one connected component, row-major sorted.
pub type Component = Vec<(usize, usize)>;

/// 4-connected components of the true pixels, largest first; equal sizes
/// are ordered by their smallest `(row, col)` member.
pub fn connected_components(mask: &Mask2D) -> Vec<Component> {
    let labels = label_image(mask);
    let n = labels.iter().flatten().map(|&l| l + 1).max().unwrap_or(0);
    let mut comps: Vec<Component> = vec![Vec::new(); n];
    for r in 0..mask.rows() {
        for c in 0..mask.cols() {
            if let Some(l) = labels[r * mask.cols() + c] {
                comps[l].push((r, c));
            }
        }
    }
    // Members are pushed in row-major order, so comp[0] is the minimum.
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    comps
}

/// Number of 4-connected components.
pub fn count_components(mask: &Mask2D) -> usize {
    label_image(mask).iter().flatten().map(|&l| l + 1).max().unwrap_or(0)
}

/// Two-pass union-find labeling; labels are dense and ordered by first
/// appearance in raster order.
pub fn label_image(mask: &Mask2D) -> Vec<Option<usize>> {
    let (rows, cols) = mask.dims();
    let mut parent: Vec<usize> = Vec::new();
    let mut provisional = vec![usize::MAX; rows * cols];

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for r in 0..rows {
        for c in 0..cols {
            if !mask.get(r, c) {
                continue;
            }
            let up = (r > 0 && mask.get(r - 1, c)).then(|| provisional[(r - 1) * cols + c]);
            let left = (c > 0 && mask.get(r, c - 1)).then(|| provisional[r * cols + c - 1]);
            let label = match (up, left) {
                (None, None) => {
                    parent.push(parent.len());
                    parent.len() - 1
                }
                (Some(a), None) | (None, Some(a)) => a,
                (Some(a), Some(b)) => {
                    let ra = find(&mut parent, a);
                    let rb = find(&mut parent, b);
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                    lo
                }
            };
            provisional[r * cols + c] = label;
        }
    }

    let mut dense = vec![usize::MAX; parent.len()];
    let mut next = 0;
    provisional
        .iter()
        .map(|&p| {
            if p == usize::MAX {
                return None;
            }
            let root = find(&mut parent, p);
            if dense[root] == usize::MAX {
                dense[root] = next;
                next += 1;
            }
            Some(dense[root])
        })
        .collect()
}

/// Pixels of the Bresenham line between two pixel positions, inclusive.
pub fn bresenham(p0: (usize, usize), p1: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut r, mut c) = (p0.0 as isize, p0.1 as isize);
    let (r1, c1) = (p1.0 as isize, p1.1 as isize);
    let dr = (r1 - r).abs();
    let dc = -(c1 - c).abs();
    let sr = if r < r1 { 1 } else { -1 };
    let sc = if c < c1 { 1 } else { -1 };
    let mut err = dr + dc;
    let mut out = Vec::new();
    loop {
        out.push((r as usize, c as usize));
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_squares_two_components() {
        let m = Mask2D::from_fn(10, 10, |r, c| (r < 3 && c < 3) || (r >= 5 && c >= 5 && r < 9));
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 20);
        assert_eq!(comps[1].len(), 9);
    }

    #[test]
    fn full_image_one_component() {
        let m = Mask2D::filled(7, 5, true);
        assert_eq!(connected_components(&m).len(), 1);
        assert_eq!(connected_components(&Mask2D::new(3, 3)).len(), 0);
    }

    #[test]
    fn diagonal_pixels_are_separate() {
        let m = Mask2D::from_fn(2, 2, |r, c| r == c);
        assert_eq!(count_components(&m), 2);
    }

    #[test]
    fn equal_sizes_tie_break_on_first_pixel() {
        let m = Mask2D::from_fn(5, 5, |r, c| (r == 4 && c == 0) || (r == 0 && c == 4));
        let comps = connected_components(&m);
        assert_eq!(comps[0], vec![(0, 4)]);
        assert_eq!(comps[1], vec![(4, 0)]);
    }

    #[test]
    fn u_shape_merges_late() {
        let m = Mask2D::from_fn(4, 5, |r, c| c == 0 || c == 4 || r == 3);
        assert_eq!(count_components(&m), 1);
    }

    #[test]
    fn bresenham_endpoints_and_connectivity() {
        let line = bresenham((2, 1), (7, 12));
        assert_eq!(line.first(), Some(&(2, 1)));
        assert_eq!(line.last(), Some(&(7, 12)));
        for w in line.windows(2) {
            let dr = (w[0].0 as isize - w[1].0 as isize).abs();
            let dc = (w[0].1 as isize - w[1].1 as isize).abs();
            assert!(dr <= 1 && dc <= 1);
        }
        assert_eq!(bresenham((3, 3), (3, 3)), vec![(3, 3)]);
    }
}
