//! Per-frame isolation of significant moving regions.
//!
//! Trajectory points are grouped by DBSCAN, minor clusters are discarded,
//! cluster boundaries are trimmed by shrinking a Chebyshev radius, and each
//! surviving cluster is fitted with a square action box.

/// A group of moving points in one frame.
#[derive(Debug, Clone)]
pub struct PointCluster {
    pub points: Vec<(f64, f64)>,
    pub centroid: (f64, f64),
    pub frame_index: usize,
}

impl PointCluster {
    pub fn from_points(points: Vec<(f64, f64)>, frame_index: usize) -> Self {
        let centroid = centroid_of(&points);
        Self {
            points,
            centroid,
            frame_index,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn centroid_of(points: &[(f64, f64)]) -> (f64, f64) {
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
    (sx / n, sy / n)
}

/// Square region of significant motion: top-left corner, side length, frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ActionBox {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub f: usize,
}

impl ActionBox {
    pub fn centroid(&self) -> (f64, f64) {
        (self.x + self.r / 2.0, self.y + self.r / 2.0)
    }

    pub fn centroid_distance(&self, other: &ActionBox) -> f64 {
        let (ax, ay) = self.centroid();
        let (bx, by) = other.centroid();
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }
}

/// Clustering and box-fitting knobs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_points: usize,
    pub min_box_side: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps: 8.0,
            min_points: 10,
            min_box_side: 8.0,
        }
    }
}

/// Density-based clustering with Euclidean eps-neighborhoods (a point's
/// neighborhood includes itself). Returns clusters and noise; together they
/// partition the input.
pub fn dbscan(
    points: &[(f64, f64)],
    frame_index: usize,
    eps: f64,
    min_points: usize,
) -> (Vec<PointCluster>, Vec<(f64, f64)>) {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_points >= 1, "min_points must be >= 1");
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let (xi, yi) = points[i];
        (0..n)
            .filter(|&j| {
                let (xj, yj) = points[j];
                (xi - xj).powi(2) + (yi - yj).powi(2) <= eps2
            })
            .collect()
    };

    let mut visited = vec![false; n];
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut cluster_count = 0usize;

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seed_neighbors = neighbors(i);
        if seed_neighbors.len() < min_points {
            continue; // noise unless later claimed as a border point
        }
        let c = cluster_count;
        cluster_count += 1;
        label[i] = Some(c);
        let mut queue: std::collections::VecDeque<usize> = seed_neighbors.into();
        while let Some(j) = queue.pop_front() {
            if !visited[j] {
                visited[j] = true;
                let nj = neighbors(j);
                if nj.len() >= min_points {
                    queue.extend(nj);
                }
            }
            if label[j].is_none() {
                label[j] = Some(c);
            }
        }
    }

    let mut clusters: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cluster_count];
    let mut noise = Vec::new();
    for i in 0..n {
        match label[i] {
            Some(c) => clusters[c].push(points[i]),
            None => noise.push(points[i]),
        }
    }
    // A cluster can end up below min_points when an earlier cluster claimed
    // some of its border points first; demote such runts to noise so every
    // emitted cluster satisfies the size invariant.
    let clusters = clusters
        .into_iter()
        .filter_map(|pts| {
            if pts.len() < min_points {
                noise.extend(pts);
                None
            } else {
                Some(PointCluster::from_points(pts, frame_index))
            }
        })
        .collect();
    (clusters, noise)
}

/// Keeps clusters that are at least half the size of the largest one.
pub fn filter_significant(clusters: Vec<PointCluster>) -> Vec<PointCluster> {
    let max = clusters.iter().map(|c| c.len()).max().unwrap_or(0);
    clusters
        .into_iter()
        .filter(|c| 2 * c.len() >= max)
        .collect()
}

/// Result of boundary trimming: the surviving points (centroid recomputed),
/// the final Chebyshev radius, and whether the degenerate guard fired.
#[derive(Debug, Clone)]
pub struct TrimmedCluster {
    pub cluster: PointCluster,
    pub radius: f64,
    pub degenerate: bool,
}

/// Shrinks the Chebyshev radius around the cluster centroid in unit steps,
/// starting from the observed maximum distance, until fewer than 80% of the
/// points remain; those survivors are returned. If shrinking would empty the
/// cluster (all points equidistant, e.g. collocated), the whole cluster is
/// returned flagged degenerate so box fitting still has input.
pub fn trim_boundary(cluster: &PointCluster) -> TrimmedCluster {
    assert!(!cluster.is_empty(), "trim_boundary requires a nonempty cluster");
    let center = cluster.centroid;
    let dist = |&(x, y): &(f64, f64)| -> f64 { (x - center.0).abs().max((y - center.1).abs()) };
    let dists: Vec<f64> = cluster.points.iter().map(dist).collect();
    let initial = dists.iter().cloned().fold(0.0, f64::max);
    let total = cluster.points.len();

    let retained = |m_d: f64| -> Vec<(f64, f64)> {
        cluster
            .points
            .iter()
            .zip(&dists)
            .filter(|&(_, d)| *d <= m_d)
            .map(|(&p, _)| p)
            .collect()
    };

    let mut m_d = initial;
    let mut current = retained(m_d);
    loop {
        // Exit on strictly fewer than 80% (5*count < 4*total avoids float 0.8).
        if current.len() * 5 < total * 4 {
            if current.is_empty() {
                return TrimmedCluster {
                    cluster: cluster.clone(),
                    radius: initial,
                    degenerate: true,
                };
            }
            return TrimmedCluster {
                cluster: PointCluster::from_points(current, cluster.frame_index),
                radius: m_d,
                degenerate: false,
            };
        }
        m_d -= 1.0;
        current = retained(m_d);
    }
}

/// Fits the square box implied by the trimmed Chebyshev ball: side
/// `2 * radius` clamped to `[min_box_side, min(frame dims)]`, centered on the
/// trimmed centroid and shifted (never shrunk) to stay inside the frame.
pub fn fit_action_box(
    trimmed: &TrimmedCluster,
    frame_width: usize,
    frame_height: usize,
    min_box_side: f64,
) -> ActionBox {
    let frame_side = (frame_width.min(frame_height)) as f64;
    let r = (2.0 * trimmed.radius).clamp(min_box_side.min(frame_side), frame_side);
    let (cx, cy) = trimmed.cluster.centroid;
    let x = (cx - r / 2.0).clamp(0.0, frame_width as f64 - r);
    let y = (cy - r / 2.0).clamp(0.0, frame_height as f64 - r);
    ActionBox {
        x,
        y,
        r,
        f: trimmed.cluster.frame_index,
    }
}

/// Filter, trim, and fit in one step for one frame's clusters.
pub fn boxes_for_frame(
    clusters: Vec<PointCluster>,
    frame_width: usize,
    frame_height: usize,
    params: &ClusterParams,
) -> Vec<ActionBox> {
    filter_significant(clusters)
        .iter()
        .map(|c| {
            let trimmed = trim_boundary(c);
            fit_action_box(&trimmed, frame_width, frame_height, params.min_box_side)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent DBSCAN oracle: recursive density expansion with fresh
    /// neighborhood queries, written without the queue optimization.
    fn dbscan_oracle(
        points: &[(f64, f64)],
        eps: f64,
        min_points: usize,
    ) -> Vec<Option<usize>> {
        let n = points.len();
        let eps2 = eps * eps;
        let nbrs = |i: usize| -> Vec<usize> {
            (0..n)
                .filter(|&j| {
                    (points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2)
                        <= eps2
                })
                .collect()
        };
        let mut label = vec![None; n];
        let mut visited = vec![false; n];
        let mut c = 0;
        for i in 0..n {
            if visited[i] {
                continue;
            }
            visited[i] = true;
            if nbrs(i).len() < min_points {
                continue;
            }
            let mut stack = vec![i];
            label[i] = Some(c);
            while let Some(j) = stack.pop() {
                for k in nbrs(j) {
                    if !visited[k] {
                        visited[k] = true;
                        if nbrs(k).len() >= min_points && label[k].is_none() {
                            label[k] = Some(c);
                            stack.push(k);
                        }
                    }
                    if label[k].is_none() {
                        label[k] = Some(c);
                    }
                }
            }
            c += 1;
        }
        label
    }

    /// Canonical form: sorted list of sorted member lists, plus sorted noise.
    fn canonical(
        clusters: &[PointCluster],
        noise: &[(f64, f64)],
    ) -> (Vec<Vec<(u64, u64)>>, Vec<(u64, u64)>) {
        let key = |&(x, y): &(f64, f64)| (x.to_bits(), y.to_bits());
        let mut cl: Vec<Vec<(u64, u64)>> = clusters
            .iter()
            .map(|c| {
                let mut v: Vec<_> = c.points.iter().map(key).collect();
                v.sort();
                v
            })
            .collect();
        cl.sort();
        let mut nz: Vec<_> = noise.iter().map(key).collect();
        nz.sort();
        (cl, nz)
    }

    fn blob(cx: f64, cy: f64, n: usize, spread: f64) -> Vec<(f64, f64)> {
        // Deterministic ring layout, radius <= spread.
        (0..n)
            .map(|i| {
                let a = i as f64 * 2.39996; // golden angle keeps points spread
                let r = spread * (i as f64 + 1.0) / n as f64;
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect()
    }

    #[test]
    fn tight_dozen_forms_one_cluster() {
        let pts = blob(50.0, 50.0, 12, 3.0); // all pairwise within eps = 8
        let (clusters, noise) = dbscan(&pts, 0, 8.0, 10);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].len(), 12);
        assert!(noise.is_empty());
    }

    #[test]
    fn isolated_points_are_noise() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64 * 100.0, 0.0)).collect();
        let (clusters, noise) = dbscan(&pts, 0, 8.0, 10);
        assert!(clusters.is_empty());
        assert_eq!(noise.len(), 5);
    }

    #[test]
    fn two_separated_blobs_match_oracle() {
        let mut pts = blob(20.0, 20.0, 15, 4.0);
        pts.extend(blob(80.0, 80.0, 15, 4.0));
        let (clusters, noise) = dbscan(&pts, 0, 8.0, 10);
        assert_eq!(clusters.len(), 2);
        assert!(noise.is_empty());

        let labels = dbscan_oracle(&pts, 8.0, 10);
        let mut oracle_clusters: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 2];
        let mut oracle_noise = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            match l {
                Some(c) => oracle_clusters[*c].push(pts[i]),
                None => oracle_noise.push(pts[i]),
            }
        }
        let oracle_pc: Vec<PointCluster> = oracle_clusters
            .into_iter()
            .map(|p| PointCluster::from_points(p, 0))
            .collect();
        assert_eq!(canonical(&clusters, &noise), canonical(&oracle_pc, &oracle_noise));
    }

    #[test]
    fn empty_input_is_empty_output() {
        let (clusters, noise) = dbscan(&[], 0, 8.0, 10);
        assert!(clusters.is_empty() && noise.is_empty());
    }

    proptest! {
        #[test]
        fn dbscan_partitions_input(
            pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 0..60),
            eps in 2.0f64..12.0,
            min_points in 1usize..8,
        ) {
            let (clusters, noise) = dbscan(&pts, 0, eps, min_points);
            let mut all: Vec<(u64, u64)> = noise.iter().map(|&(x, y)| (x.to_bits(), y.to_bits())).collect();
            for c in &clusters {
                prop_assert!(c.len() >= min_points);
                all.extend(c.points.iter().map(|&(x, y)| (x.to_bits(), y.to_bits())));
            }
            let mut input: Vec<(u64, u64)> = pts.iter().map(|&(x, y)| (x.to_bits(), y.to_bits())).collect();
            all.sort();
            input.sort();
            prop_assert_eq!(all, input);
        }

        #[test]
        fn dbscan_order_invariant_on_separated_blobs(perm_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut pts = blob(15.0, 15.0, 14, 4.0);
            pts.extend(blob(70.0, 15.0, 12, 4.0));
            pts.extend(blob(40.0, 80.0, 16, 4.0));
            let base = dbscan(&pts, 0, 8.0, 10);
            let mut shuffled = pts.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
            shuffled.shuffle(&mut rng);
            let permuted = dbscan(&shuffled, 0, 8.0, 10);
            prop_assert_eq!(canonical(&base.0, &base.1), canonical(&permuted.0, &permuted.1));
        }
    }

    #[test]
    fn significance_threshold_is_inclusive() {
        let mk = |n: usize| PointCluster::from_points(vec![(0.0, 0.0); n], 0);
        let kept = filter_significant(vec![mk(100), mk(49)]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].len(), 100);

        let kept = filter_significant(vec![mk(100), mk(50)]);
        assert_eq!(kept.len(), 2);

        let kept = filter_significant(vec![mk(7)]);
        assert_eq!(kept.len(), 1);

        assert!(filter_significant(vec![]).is_empty());
    }

    /// Direct transcription of the radius-shrinking loop, kept independent of
    /// the implementation above.
    fn trim_oracle(points: &[(f64, f64)]) -> (Vec<(f64, f64)>, f64, bool) {
        let c = centroid_of(points);
        let d = |p: &(f64, f64)| (p.0 - c.0).abs().max((p.1 - c.1).abs());
        let mut m_d = points.iter().map(d).fold(0.0, f64::max);
        let initial = m_d;
        let total = points.len();
        let mut current: Vec<(f64, f64)> = points.to_vec();
        loop {
            if (current.len() as f64) * 5.0 < (total as f64) * 4.0 {
                if current.is_empty() {
                    return (points.to_vec(), initial, true);
                }
                return (current, m_d, false);
            }
            m_d -= 1.0;
            current = points.iter().filter(|p| d(p) <= m_d).cloned().collect();
        }
    }

    #[test]
    fn collocated_points_hit_degenerate_guard() {
        let cluster = PointCluster::from_points(vec![(5.0, 5.0); 10], 3);
        let t = trim_boundary(&cluster);
        assert!(t.degenerate);
        assert_eq!(t.cluster.len(), 10);
        assert_eq!(t.radius, 0.0);
        let (o_pts, o_rad, o_deg) = trim_oracle(&cluster.points);
        assert_eq!(o_pts.len(), 10);
        assert_eq!(o_rad, 0.0);
        assert!(o_deg);
    }

    #[test]
    fn far_outliers_are_trimmed() {
        // Compact core at varied distances plus two far outliers placed so the
        // centroid stays at (1, 1). The exit set excludes the outliers.
        let mut pts = vec![
            (1.0, 1.0),
            (0.5, 1.0),
            (1.5, 1.0),
            (1.0, 0.5),
            (1.0, 1.5),
            (0.4, 0.4),
            (2.6, 1.0),
            (1.0, 2.6),
        ];
        pts.push((31.0, 0.5));
        pts.push((-30.0, 0.5));
        let cluster = PointCluster::from_points(pts.clone(), 0);
        assert!((cluster.centroid.0 - 1.0).abs() < 1e-9);
        assert!((cluster.centroid.1 - 1.0).abs() < 1e-9);

        let t = trim_boundary(&cluster);
        let (o_pts, o_rad, o_deg) = trim_oracle(&pts);
        assert!(!t.degenerate && !o_deg);
        assert_eq!(t.cluster.len(), o_pts.len());
        assert_eq!(t.radius, o_rad);
        // Frozen from the oracle: the radius walks 31 -> 1, exiting with the
        // six core points (Chebyshev <= 0.6); both far outliers are gone.
        assert_eq!(t.cluster.len(), 6);
        assert_eq!(t.radius, 1.0);
        assert!(t.cluster.points.iter().all(|&(x, _)| x.abs() < 5.0));
    }

    #[test]
    fn uniform_grid_matches_oracle() {
        let pts: Vec<(f64, f64)> = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x as f64, y as f64)))
            .collect();
        let cluster = PointCluster::from_points(pts.clone(), 0);
        let t = trim_boundary(&cluster);
        let (o_pts, o_rad, _) = trim_oracle(&pts);
        assert_eq!(t.cluster.len(), o_pts.len());
        assert_eq!(t.radius, o_rad);
        // Frozen from the oracle: radius shrinks 4.5 -> 3.5, keeping the
        // 8x8 interior block of 64 points (the first set under 80).
        assert_eq!(t.cluster.len(), 64);
        assert_eq!(t.radius, 3.5);
        assert!(t.cluster.len() * 5 < 100 * 4);
        let c = t.cluster.centroid;
        for &(x, y) in &t.cluster.points {
            assert!((x - c.0).abs().max((y - c.1).abs()) <= t.radius + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn trim_never_keeps_farther_than_discarded(
            pts in proptest::collection::vec((0.0f64..60.0, 0.0f64..60.0), 1..50)
        ) {
            let cluster = PointCluster::from_points(pts.clone(), 0);
            let t = trim_boundary(&cluster);
            prop_assert!(t.cluster.len() <= cluster.len());
            if !t.degenerate {
                let c = cluster.centroid; // distances measured from original centroid
                let d = |p: &(f64, f64)| (p.0 - c.0).abs().max((p.1 - c.1).abs());
                let max_kept = t.cluster.points.iter().map(d).fold(0.0, f64::max);
                let kept: std::collections::HashSet<_> = t
                    .cluster
                    .points
                    .iter()
                    .map(|&(x, y)| (x.to_bits(), y.to_bits()))
                    .collect();
                for p in &pts {
                    if !kept.contains(&(p.0.to_bits(), p.1.to_bits())) {
                        prop_assert!(d(p) >= max_kept - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn fitted_boxes_satisfy_invariants(
            pts in proptest::collection::vec((0.0f64..64.0, 0.0f64..64.0), 1..40)
        ) {
            let cluster = PointCluster::from_points(pts, 2);
            let t = trim_boundary(&cluster);
            let b = fit_action_box(&t, 64, 64, 8.0);
            prop_assert!(b.r >= 8.0);
            prop_assert!(b.r <= 64.0);
            prop_assert!(b.x >= 0.0 && b.x + b.r <= 64.0);
            prop_assert!(b.y >= 0.0 && b.y + b.r <= 64.0);
            prop_assert_eq!(b.f, 2);
        }
    }

    #[test]
    fn box_construction_examples() {
        let mk = |cx: f64, cy: f64, radius: f64| TrimmedCluster {
            cluster: PointCluster {
                points: vec![(cx, cy)],
                centroid: (cx, cy),
                frame_index: 0,
            },
            radius,
            degenerate: false,
        };
        // Direct construction: centroid (50,50), radius 10 -> x=40,y=40,r=20.
        let b = fit_action_box(&mk(50.0, 50.0, 10.0), 100, 100, 8.0);
        assert_eq!((b.x, b.y, b.r), (40.0, 40.0, 20.0));
        // Radius 2 clamps up to the minimum side.
        let b = fit_action_box(&mk(50.0, 50.0, 2.0), 100, 100, 8.0);
        assert_eq!(b.r, 8.0);
        // Near the left edge the box shifts instead of shrinking.
        let b = fit_action_box(&mk(2.0, 50.0, 10.0), 100, 100, 8.0);
        assert_eq!((b.x, b.r), (0.0, 20.0));
    }
}
