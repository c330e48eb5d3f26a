//! Normal estimation for unoriented point sets.
//!
//! Per-point directions come from a local plane fit (smallest covariance
//! eigenvector). Orientation is made consistent by flipping along a minimum
//! spanning tree of the k-NN graph (edge weight 1 − |nᵢ·nⱼ|), then each
//! connected component is flipped outward by majority vote against its own
//! centroid.

use crate::error::{Error, Result};
use crate::knn::{NeighborIndex, OrdF64};
use crate::{Point, Vec3};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

pub const DEFAULT_K: usize = 12;

pub fn estimate_normals(points: &[Point], k: usize) -> Result<Vec<Vec3>> {
    if points.len() < 4 {
        return Err(Error::DegenerateInput(format!(
            "{} points; need at least 4 to estimate normals",
            points.len()
        )));
    }
    let k = k.clamp(3, points.len() - 1);
    let index = NeighborIndex::build(points);
    let neighborhoods: Vec<Vec<usize>> = points
        .iter()
        .map(|p| index.k_nearest(p, k + 1)) // includes the point itself
        .collect();

    let mut normals = Vec::with_capacity(points.len());
    for (i, nb) in neighborhoods.iter().enumerate() {
        normals.push(plane_normal(points, nb).ok_or_else(|| {
            Error::DegenerateInput(format!(
                "neighborhood of point {i} is collinear; cannot re-estimate normals"
            ))
        })?);
    }

    orient(points, &neighborhoods, &mut normals);
    Ok(normals)
}

/// Unit normal of the best-fit plane through the listed points, `None` when
/// they are (numerically) collinear.
fn plane_normal(points: &[Point], members: &[usize]) -> Option<Vec3> {
    let mean: Vec3 =
        members.iter().map(|&j| points[j].coords).sum::<Vec3>() / members.len() as f64;
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for &j in members {
        let d = points[j].coords - mean;
        cov += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    // eigenvalues ascending by manual argsort; nalgebra does not order them
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (order[0], order[1], order[2]);
    if eig.eigenvalues[mid] <= 1e-12 * eig.eigenvalues[hi].max(1e-300) {
        return None;
    }
    Some(eig.eigenvectors.column(lo).normalize())
}

fn orient(points: &[Point], neighborhoods: &[Vec<usize>], normals: &mut [Vec3]) {
    let n = points.len();
    // symmetric adjacency from the k-NN lists
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, nb) in neighborhoods.iter().enumerate() {
        for &j in nb {
            if j != i {
                adj[i].push(j as u32);
                adj[j].push(i as u32);
            }
        }
    }
    let mut in_tree = vec![false; n];
    for root in 0..n {
        if in_tree[root] {
            continue;
        }
        // Prim's MST over this component; alignment flips propagate from the
        // tree edge that discovered each vertex.
        let mut component = vec![root];
        in_tree[root] = true;
        let mut heap: BinaryHeap<Reverse<(OrdF64, u32, u32)>> = BinaryHeap::new();
        let push_edges = |from: usize,
                          heap: &mut BinaryHeap<Reverse<(OrdF64, u32, u32)>>,
                          normals: &[Vec3],
                          in_tree: &[bool]| {
            for &to in &adj[from] {
                if !in_tree[to as usize] {
                    let w = 1.0 - normals[from].dot(&normals[to as usize]).abs();
                    heap.push(Reverse((OrdF64(w), from as u32, to)));
                }
            }
        };
        push_edges(root, &mut heap, normals, &in_tree);
        while let Some(Reverse((_, from, to))) = heap.pop() {
            let (from, to) = (from as usize, to as usize);
            if in_tree[to] {
                continue;
            }
            in_tree[to] = true;
            if normals[from].dot(&normals[to]) < 0.0 {
                normals[to] = -normals[to];
            }
            component.push(to);
            push_edges(to, &mut heap, normals, &in_tree);
        }
        // outward by majority vote against the component centroid
        let centroid: Vec3 =
            component.iter().map(|&i| points[i].coords).sum::<Vec3>() / component.len() as f64;
        let outward_votes = component
            .iter()
            .filter(|&&i| normals[i].dot(&(points[i].coords - centroid)) > 0.0)
            .count();
        if outward_votes * 2 < component.len() {
            for &i in &component {
                normals[i] = -normals[i];
            }
        }
    }
}
