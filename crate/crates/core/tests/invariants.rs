use proptest::prelude::*;

use sliceparse::geom::dump::{read_grid, write_grid};
use sliceparse::geom::{
    bresenham, clip, connected_components, count_components, project, surface_iou, volume_iou, Cuboid, GridFrame,
    Mask2D, View, VoxelGrid,
};
use sliceparse::surfacer::{correspond, Contour, CorrespondParams};
use sliceparse::trainer::{BufferKind, ReplayBuffer};

const N: usize = 8;

fn grid() -> impl Strategy<Value = VoxelGrid> {
    proptest::collection::vec(any::<bool>(), N * N * N)
        .prop_map(|occ| VoxelGrid::from_occupancy(GridFrame::unit(N), occ).unwrap())
}

fn mask() -> impl Strategy<Value = Mask2D> {
    (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
        proptest::collection::vec(any::<bool>(), r * c).prop_map(move |v| Mask2D::from_vec(r, c, v).unwrap())
    })
}

fn cuboid() -> impl Strategy<Value = Cuboid> {
    (prop::array::uniform3(0usize..N), prop::array::uniform3(0usize..N)).prop_map(|(a, b)| {
        Cuboid::new(std::array::from_fn(|i| a[i].min(b[i])), std::array::from_fn(|i| a[i].max(b[i]))).unwrap()
    })
}

fn circle(cx: f64, cy: f64, r: f64) -> Contour {
    let pts = (0..16)
        .map(|i| {
            let t = i as f64 / 16.0 * std::f64::consts::TAU;
            [cx + r * t.cos(), cy + r * t.sin()]
        })
        .collect();
    Contour::new(pts, 0).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #[test]
    fn iou_is_symmetric_bounded_and_reflexive(a in grid(), b in grid()) {
        for f in [volume_iou, surface_iou] {
            let ab = f(&a, &b).unwrap();
            prop_assert_eq!(ab, f(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(f(&a, &a).unwrap(), 1.0);
        }
    }

    #[test]
    fn clipped_silhouette_is_inside_original(g in grid(), c in cuboid()) {
        let clipped = clip(&g, &c).unwrap();
        prop_assert!(clipped.count() <= g.count());
        for view in View::ALL {
            let (small, big) = (project(&clipped, view).mask, project(&g, view).mask);
            prop_assert!(small.iter_true().all(|(r, col)| big.get(r, col)));
        }
    }

    #[test]
    fn components_partition_the_mask(m in mask()) {
        let comps = connected_components(&m);
        prop_assert_eq!(comps.len(), count_components(&m));
        let mut seen = Mask2D::new(m.rows(), m.cols());
        for c in &comps {
            for &(r, col) in c {
                prop_assert!(m.get(r, col) && !seen.get(r, col));
                seen.set(r, col, true);
            }
        }
        prop_assert_eq!(seen, m.clone());
        // No two components touch.
        for (i, c) in comps.iter().enumerate() {
            for (j, d) in comps.iter().enumerate().skip(i + 1) {
                let touch = c.iter().any(|&(r, col)| d.iter().any(|&(r2, c2)| r.abs_diff(r2) + col.abs_diff(c2) == 1));
                prop_assert!(!touch, "components {} and {} are adjacent", i, j);
            }
        }
    }

    #[test]
    fn bresenham_is_an_eight_connected_path(a in (0usize..40, 0usize..40), b in (0usize..40, 0usize..40)) {
        let line = bresenham(a, b);
        prop_assert_eq!(line[0], a);
        prop_assert_eq!(*line.last().unwrap(), b);
        prop_assert_eq!(line.len(), a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) + 1);
        for w in line.windows(2) {
            prop_assert!(w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1);
        }
    }

    #[test]
    fn grid_dump_and_pgm_round_trip(g in grid(), m in mask()) {
        let mut buf = Vec::new();
        write_grid(&g, &mut buf).unwrap();
        prop_assert_eq!(read_grid(&buf[..], 1.0 / N as f64, [0.0; 3]).unwrap(), g);
        let mut pgm = Vec::new();
        m.write_pgm(&mut pgm).unwrap();
        prop_assert_eq!(Mask2D::read_pgm(&pgm).unwrap(), m);
    }

    #[test]
    fn replay_buffers_respect_capacity(cap in 1usize..20, n in 0usize..60) {
        let mut agent = ReplayBuffer::new(BufferKind::Agent, cap).unwrap();
        let mut demo = ReplayBuffer::new(BufferKind::Demo, cap).unwrap();
        for i in 0..n {
            prop_assert!(agent.push(i));
            prop_assert_eq!(demo.push(i), i < cap);
        }
        prop_assert_eq!(agent.len(), n.min(cap));
        prop_assert_eq!(demo.len(), n.min(cap));
        // Agent keeps the newest, demo keeps the oldest.
        prop_assert!(agent.iter().copied().eq(n.saturating_sub(cap)..n));
        prop_assert!(demo.iter().copied().eq(0..n.min(cap)));
    }

    /// Small translations of well-separated circles: greedy matching must
    /// agree with the brute-force cheapest assignment.
    #[test]
    fn correspondence_matches_brute_force_assignment(
        k in 1usize..=4,
        radii in prop::array::uniform4(1.0f64..3.0),
        shift in (-1.5f64..1.5, -1.5f64..1.5),
        perm_seed in 0usize..24,
    ) {
        let a: Vec<Contour> = (0..k).map(|i| circle(10.0 * i as f64, 0.0, radii[i])).collect();
        let perms = permutations(k);
        let order = &perms[perm_seed % perms.len()];
        let b: Vec<Contour> = order
            .iter()
            .map(|&i| circle(10.0 * i as f64 + shift.0, shift.1, radii[i] * 1.1))
            .collect();
        let params = CorrespondParams::default();
        let diag = 60.0;
        let got = correspond(&a, &b, diag, &params);
        let w = params.area_weight * diag;
        let cost = |p: &[usize]| -> f64 {
            p.iter().enumerate().map(|(i, &j)| sliceparse::surfacer::match_cost(&a[i], &b[j], w)).sum()
        };
        let best = perms.iter().min_by(|x, y| cost(x).total_cmp(&cost(y))).unwrap();
        let mut pairs: Vec<(usize, usize)> = got.pairs.iter().map(|p| (p.0, p.1)).collect();
        pairs.sort_unstable();
        let want: Vec<(usize, usize)> = best.iter().enumerate().map(|(i, &j)| (i, j)).collect();
        prop_assert_eq!(pairs, want);
        prop_assert!(got.unmatched_a.is_empty() && got.unmatched_b.is_empty());
    }
}
