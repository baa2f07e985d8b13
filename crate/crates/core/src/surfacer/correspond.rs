use serde::{Deserialize, Serialize};

use super::contour::{dist, Contour};

/// Weights of the matching cost, both as fractions of the slice diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrespondParams {
    pub area_weight: f64,
    pub cutoff: f64,
}

impl Default for CorrespondParams {
    fn default() -> Self {
        CorrespondParams {
            area_weight: 0.25,
            cutoff: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Correspondence {
    /// `(index in a, index in b, cost)` in the order they were accepted.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

/// `‖centroid_a − centroid_b‖ + w·|area_a − area_b| / max(area_a, area_b)`.
pub fn match_cost(a: &Contour, b: &Contour, area_weight: f64) -> f64 {
    let amax = a.area.max(b.area);
    let rel = if amax > 0.0 { (a.area - b.area).abs() / amax } else { 0.0 };
    dist(a.centroid, b.centroid) + area_weight * rel
}

/// Greedy cheapest-first matching between the contours of two consecutive
/// planes. Ties are broken by `(index a, index b)`.
pub fn correspond(a: &[Contour], b: &[Contour], slice_diagonal: f64, params: &CorrespondParams) -> Correspondence {
    let w = params.area_weight * slice_diagonal;
    let cutoff = params.cutoff * slice_diagonal;
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            let c = match_cost(ca, cb, w);
            if c <= cutoff {
                cand.push((c, i, j));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (c, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j, c));
        }
    }
    Correspondence {
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&j| !used_b[j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(cx: f64, cy: f64, r: f64) -> Contour {
        let pts = (0..24)
            .map(|i| {
                let t = i as f64 / 24.0 * std::f64::consts::TAU;
                [cx + r * t.cos(), cy + r * t.sin()]
            })
            .collect();
        Contour::new(pts, 0).unwrap()
    }

    #[test]
    fn identical_sets_match_identically() {
        let a = vec![circle(5.0, 5.0, 2.0), circle(20.0, 8.0, 3.0), circle(10.0, 25.0, 1.5)];
        let m = correspond(&a, &a, 45.0, &CorrespondParams::default());
        let mut p: Vec<_> = m.pairs.iter().map(|&(i, j, c)| (i, j, c)).collect();
        p.sort_by_key(|x| x.0);
        assert_eq!(p.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>(), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(p.iter().all(|x| x.2.abs() < 1e-12));
    }

    #[test]
    fn one_versus_none_is_unmatched() {
        let a = vec![circle(5.0, 5.0, 2.0)];
        let m = correspond(&a, &[], 45.0, &CorrespondParams::default());
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_a, vec![0]);
        let m = correspond(&[], &a, 45.0, &CorrespondParams::default());
        assert_eq!(m.unmatched_b, vec![0]);
    }

    #[test]
    fn far_contours_stay_unmatched() {
        let a = vec![circle(2.0, 2.0, 1.0)];
        let b = vec![circle(40.0, 40.0, 1.0)];
        let m = correspond(&a, &b, 45.0, &CorrespondParams::default());
        assert!(m.pairs.is_empty());
    }
}
