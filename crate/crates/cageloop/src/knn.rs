//! Uniform-grid nearest-neighbor index over a fixed point set.
//!
//! Queries return indices ordered by distance, ties broken by point index, so
//! results are deterministic for a given input ordering.

use crate::Point;
use std::collections::BinaryHeap;

/// Total-order wrapper for f64 heap keys.
#[derive(Clone, Copy, PartialEq, Debug)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub struct NeighborIndex {
    points: Vec<Point>,
    origin: Point,
    cell: f64,
    dims: [i64; 3],
    buckets: Vec<Vec<u32>>,
}

impl NeighborIndex {
    pub fn build(points: &[Point]) -> Self {
        assert!(!points.is_empty(), "neighbor index over empty point set");
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let ext = hi - lo;
        let volume = ext.x.max(1e-12) * ext.y.max(1e-12) * ext.z.max(1e-12);
        // ~2 points per cell on average; the max-extent floor keeps flat or
        // collinear clouds from exploding the bucket count.
        let mut cell = (2.0 * volume / points.len() as f64)
            .cbrt()
            .max(ext.max() / 64.0);
        if !cell.is_finite() || cell <= 0.0 {
            cell = 1.0;
        }
        let dims = [
            ((ext.x / cell).floor() as i64 + 1).max(1),
            ((ext.y / cell).floor() as i64 + 1).max(1),
            ((ext.z / cell).floor() as i64 + 1).max(1),
        ];
        let mut buckets = vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p, &lo, cell, &dims);
            buckets[bucket_index(c, &dims)].push(i as u32);
        }
        NeighborIndex {
            points: points.to_vec(),
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    /// Index and distance of the closest point to `q`.
    pub fn nearest(&self, q: &Point) -> (usize, f64) {
        let best = self.k_nearest(q, 1);
        let i = best[0];
        (i, (self.points[i] - q).norm())
    }

    /// Indices of the `k` closest points to `q`, nearest first.
    /// Returns fewer than `k` only when the set itself is smaller.
    pub fn k_nearest(&self, q: &Point, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        // Unclamped cell coordinates keep the ring lower bound valid for
        // queries outside the indexed bounding box.
        let qc = [
            ((q.x - self.origin.x) / self.cell).floor() as i64,
            ((q.y - self.origin.y) / self.cell).floor() as i64,
            ((q.z - self.origin.z) / self.cell).floor() as i64,
        ];
        // Max-heap of the best k seen so far, keyed by (distance, index).
        let mut best: BinaryHeap<(OrdF64, u32)> = BinaryHeap::new();
        let max_ring = (0..3)
            .map(|a| qc[a].max(self.dims[a] - 1 - qc[a]))
            .max()
            .unwrap()
            .max(0);
        for ring in 0..=max_ring {
            if best.len() == k {
                let bound = (ring - 1).max(0) as f64 * self.cell;
                if bound > best.peek().unwrap().0 .0 {
                    break;
                }
            }
            self.for_ring_cells(qc, ring, |bucket| {
                for &i in bucket {
                    let d = (self.points[i as usize] - q).norm();
                    let key = (OrdF64(d), i);
                    if best.len() < k {
                        best.push(key);
                    } else if key < *best.peek().unwrap() {
                        best.pop();
                        best.push(key);
                    }
                }
            });
        }
        let mut out: Vec<(OrdF64, u32)> = best.into_vec();
        out.sort();
        out.into_iter().map(|(_, i)| i as usize).collect()
    }

    /// Visit buckets whose Chebyshev cell-distance from `qc` is exactly `ring`.
    /// Shell membership is judged in unclamped cell space, so each in-grid
    /// cell belongs to exactly one ring even for queries outside the box.
    fn for_ring_cells(&self, qc: [i64; 3], ring: i64, mut f: impl FnMut(&[u32])) {
        let lo = [qc[0] - ring, qc[1] - ring, qc[2] - ring];
        let hi = [qc[0] + ring, qc[1] + ring, qc[2] + ring];
        let in_z = |z: i64| z >= 0 && z < self.dims[2];
        for x in lo[0].max(0)..=hi[0].min(self.dims[0] - 1) {
            for y in lo[1].max(0)..=hi[1].min(self.dims[1] - 1) {
                let on_shell_xy =
                    x == lo[0] || x == hi[0] || y == lo[1] || y == hi[1];
                if on_shell_xy {
                    for z in lo[2].max(0)..=hi[2].min(self.dims[2] - 1) {
                        f(&self.buckets[bucket_index([x, y, z], &self.dims)]);
                    }
                } else {
                    // x and y interior: only the two z shell faces qualify
                    if in_z(lo[2]) {
                        f(&self.buckets[bucket_index([x, y, lo[2]], &self.dims)]);
                    }
                    if hi[2] != lo[2] && in_z(hi[2]) {
                        f(&self.buckets[bucket_index([x, y, hi[2]], &self.dims)]);
                    }
                }
            }
        }
    }
}

fn cell_of(p: &Point, origin: &Point, cell: f64, dims: &[i64; 3]) -> [i64; 3] {
    let mut c = [0i64; 3];
    for a in 0..3 {
        c[a] = (((p[a] - origin[a]) / cell).floor() as i64).clamp(0, dims[a] - 1);
    }
    c
}

fn bucket_index(c: [i64; 3], dims: &[i64; 3]) -> usize {
    (c[0] + dims[0] * (c[1] + dims[1] * c[2])) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn brute_k_nearest(points: &[Point], q: &Point, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            let da = (points[a] - q).norm();
            let db = (points[b] - q).norm();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        order.truncate(k);
        order
    }

    fn random_cloud(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        let points = random_cloud(400, 7);
        let index = NeighborIndex::build(&points);
        let queries = random_cloud(50, 8);
        for q in &queries {
            for k in [1, 4, 12] {
                assert_eq!(index.k_nearest(q, k), brute_k_nearest(&points, q, k));
            }
        }
    }

    #[test]
    fn queries_outside_bbox() {
        let points = random_cloud(100, 9);
        let index = NeighborIndex::build(&points);
        let q = Point::new(10.0, -10.0, 3.0);
        assert_eq!(index.k_nearest(&q, 5), brute_k_nearest(&points, &q, 5));
        let (i, d) = index.nearest(&q);
        assert_eq!(i, brute_k_nearest(&points, &q, 1)[0]);
        assert!((d - (points[i] - q).norm()).abs() < 1e-15);
    }

    #[test]
    fn handles_coincident_and_collinear_points() {
        let mut points = vec![Point::new(0.0, 0.0, 0.0); 5];
        for (i, p) in points.iter_mut().enumerate() {
            p.x = i as f64 * 0.25;
        }
        points.push(Point::new(0.25, 0.0, 0.0)); // duplicate of index 1
        let index = NeighborIndex::build(&points);
        let got = index.k_nearest(&Point::new(0.26, 0.0, 0.0), 3);
        assert_eq!(got, brute_k_nearest(&points, &Point::new(0.26, 0.0, 0.0), 3));
        // tie between 1 and 5 resolves to the lower index first
        assert_eq!(got[0], 1);
        assert_eq!(got[1], 5);
    }

    #[test]
    fn k_larger_than_set() {
        let points = random_cloud(6, 3);
        let index = NeighborIndex::build(&points);
        let got = index.k_nearest(&Point::origin(), 20);
        assert_eq!(got.len(), 6);
        assert_eq!(got, brute_k_nearest(&points, &Point::origin(), 6));
    }

    /// k = n forces the ring sweep across every boundary of the bucket grid;
    /// rings whose z-faces fall outside the grid must still terminate.
    #[test]
    fn full_expansion_past_boundaries() {
        let points = random_cloud(300, 11);
        let index = NeighborIndex::build(&points);
        for q in [
            Point::new(0.0, 0.0, 0.0),
            Point::new(0.9, 0.4, 1.9),
            Point::new(-3.0, 2.0, -5.0),
        ] {
            assert_eq!(index.k_nearest(&q, 300), brute_k_nearest(&points, &q, 300));
        }
    }
}
