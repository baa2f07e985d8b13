use super::contour::{dist, Point2};
use crate::error::{Error, Result};

/// Side wall between two rings with equal vertex counts. Indices `0..n`
/// refer to `ring_a`, `n..2n` to `ring_b`; triangles face outward when
/// `ring_a` lies below `ring_b` in a right-handed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Strip {
    pub ring_a: Vec<Point2>,
    pub ring_b: Vec<Point2>,
    pub height_a: f64,
    pub height_b: f64,
    pub triangles: Vec<[usize; 3]>,
}

/// Inserts points along the longest edges until the ring has `n` vertices.
/// Original vertices are kept, so sharp corners survive; the inserted points
/// split each edge into equal pieces, which keeps spacing close to uniform in
/// arc length.
pub fn resample(ring: &[Point2], n: usize) -> Result<Vec<Point2>> {
    let m = ring.len();
    if m < 3 {
        return Err(Error::Degenerate(format!("ring needs >= 3 points, got {m}")));
    }
    if n < m {
        return Err(Error::invalid(format!("cannot resample {m} points down to {n}")));
    }
    let len: Vec<f64> = (0..m).map(|i| dist(ring[i], ring[(i + 1) % m])).collect();
    let mut pieces = vec![1usize; m];
    for _ in m..n {
        // Edge whose current pieces are longest; first one on ties.
        let mut best = 0;
        for i in 1..m {
            if len[i] * pieces[best] as f64 > len[best] * pieces[i] as f64 {
                best = i;
            }
        }
        pieces[best] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..m {
        let (p, q) = (ring[i], ring[(i + 1) % m]);
        for s in 0..pieces[i] {
            let t = s as f64 / pieces[i] as f64;
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    Ok(out)
}

/// Cyclic shift of `ring` minimising the summed squared distance to
/// `reference` (both of the same length). Returns the shifted ring.
pub fn align(reference: &[Point2], ring: &[Point2]) -> Vec<Point2> {
    let n = ring.len();
    debug_assert_eq!(reference.len(), n);
    let mut best = (f64::INFINITY, 0);
    for shift in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            let (p, q) = (reference[i], ring[(i + shift) % n]);
            s += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if s >= best.0 {
                break;
            }
        }
        if s < best.0 {
            best = (s, shift);
        }
    }
    (0..n).map(|i| ring[(i + best.1) % n]).collect()
}

pub(crate) fn strip_triangles(n: usize) -> Vec<[usize; 3]> {
    let mut t = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        t.push([i, j, n + j]);
        t.push([i, n + j, n + i]);
    }
    t
}

/// Lofts two CCW contours: both are resampled to the larger vertex count,
/// `b` is rotated to best match `a`, and the rings are joined by a closed
/// strip.
pub fn loft(a: &[Point2], b: &[Point2], height_a: f64, height_b: f64) -> Result<Strip> {
    if !(height_a.is_finite() && height_b.is_finite()) {
        return Err(Error::invalid("loft heights must be finite"));
    }
    if height_a == height_b {
        return Err(Error::Degenerate("zero gap between loft rings".into()));
    }
    let n = a.len().max(b.len());
    let ring_a = resample(a, n)?;
    let ring_b = align(&ring_a, &resample(b, n)?);
    Ok(Strip {
        ring_a,
        ring_b,
        height_a,
        height_b,
        triangles: strip_triangles(n),
    })
}

#[inline]
fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Ear-clipping triangulation of a simple CCW polygon. Output triangles are
/// CCW and index into `poly`; there are exactly `n − 2` of them. An ear is
/// accepted only if its tip is strictly convex and no other remaining vertex
/// lies inside it or on its boundary, so collinear runs never produce slivers
/// or T-junctions.
pub fn cap(poly: &[Point2]) -> Result<Vec<[usize; 3]>> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("cap needs >= 3 points, got {n}")));
    }
    let scale = poly
        .iter()
        .flat_map(|p| [p[0].abs(), p[1].abs()])
        .fold(1.0f64, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    let mut start = 0;
    while idx.len() > 3 {
        let m = idx.len();
        let mut found = None;
        for k in 0..m {
            let t = (start + k) % m;
            let (ip, ic, inx) = (idx[(t + m - 1) % m], idx[t], idx[(t + 1) % m]);
            let (a, b, c) = (poly[ip], poly[ic], poly[inx]);
            if cross(a, b, c) <= eps {
                continue;
            }
            let blocked = idx.iter().any(|&o| {
                o != ip
                    && o != ic
                    && o != inx
                    && cross(a, b, poly[o]) >= -eps
                    && cross(b, c, poly[o]) >= -eps
                    && cross(c, a, poly[o]) >= -eps
            });
            if !blocked {
                found = Some(t);
                break;
            }
        }
        let t = found.ok_or_else(|| Error::Degenerate("no ear found; polygon is not simple".into()))?;
        out.push([idx[(t + m - 1) % m], idx[t], idx[(t + 1) % m]]);
        idx.remove(t);
        start = t % idx.len();
    }
    if cross(poly[idx[0]], poly[idx[1]], poly[idx[2]]) <= eps {
        return Err(Error::Degenerate("final cap triangle has no area".into()));
    }
    out.push([idx[0], idx[1], idx[2]]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_area(p: &[Point2], t: [usize; 3]) -> f64 {
        0.5 * cross(p[t[0]], p[t[1]], p[t[2]])
    }

    #[test]
    fn convex_polygon_gives_n_minus_two() {
        let p: Vec<Point2> = (0..7)
            .map(|i| {
                let t = i as f64 / 7.0 * std::f64::consts::TAU;
                [t.cos(), t.sin()]
            })
            .collect();
        let tris = cap(&p).unwrap();
        assert_eq!(tris.len(), 5);
        assert!(tris.iter().all(|&t| tri_area(&p, t) > 0.0));
    }

    #[test]
    fn l_polygon_area_is_preserved() {
        let p = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 1.0], [1.0, 1.0], [1.0, 3.0], [0.0, 3.0]];
        let tris = cap(&p).unwrap();
        assert_eq!(tris.len(), 4);
        let area: f64 = tris.iter().map(|&t| tri_area(&p, t)).sum();
        assert!((area - 6.0).abs() < 1e-6);
        assert!(tris.iter().all(|&t| tri_area(&p, t) > 0.0));
    }

    #[test]
    fn collinear_runs_are_triangulated() {
        let p = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [3.0, 1.0], [0.0, 1.0]];
        let tris = cap(&p).unwrap();
        assert_eq!(tris.len(), 4);
        let area: f64 = tris.iter().map(|&t| tri_area(&p, t)).sum();
        assert!((area - 3.0).abs() < 1e-12);
        assert!(tris.iter().all(|&t| tri_area(&p, t) > 1e-9));
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(cap(&[[0.0, 0.0], [1.0, 0.0]]).is_err());
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(loft(&sq, &sq, 1.0, 1.0).is_err());
    }

    #[test]
    fn resample_keeps_originals_and_evens_spacing() {
        let sq = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let r = resample(&sq, 8).unwrap();
        assert_eq!(r.len(), 8);
        for p in &sq {
            assert!(r.contains(p));
        }
        // Long edges get more of the new points.
        assert_eq!(r[1], [2.0 / 3.0, 0.0]);
    }

    #[test]
    fn align_recovers_rotation() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let rot = vec![sq[2], sq[3], sq[0], sq[1]];
        assert_eq!(align(&sq, &rot), sq);
    }

    #[test]
    fn identical_squares_give_prism_sides() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let s = loft(&sq, &sq, 0.0, 2.0).unwrap();
        assert_eq!(s.triangles.len(), 8);
        assert_eq!(s.ring_a, s.ring_b);
    }
}
