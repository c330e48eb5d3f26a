//! Loop shortening, plausibility filters, dedup and ranking.
//!
//! Traced loops follow voxel centers, so they are jagged and noticeably
//! longer than the curve they approximate. Relaxation pulls every vertex
//! toward the midpoint of its neighbors, rejecting moves that leave grasping
//! space; on a loop that genuinely cages something this converges onto a
//! taut curve hugging the offset surface, while a loop that only existed
//! because the distance field was capped keeps contracting until it falls
//! below the collapse floor and is discarded. The surviving loops are
//! filtered by gripper reach and by a local-shortest test at the base,
//! scored, de-duplicated by Hausdorff distance, and ranked.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::{Label, VoxelGrid};
use crate::gripper::GripperSpec;
use crate::morse::CagingLoop;
use crate::pose::fit_plane;
use crate::{Point, Vec3};

/// Convergence cutoff: stop when one relaxation sweep shortens the loop by
/// less than this fraction of the voxel spacing.
pub const CONVERGE_SPACING_FRAC: f64 = 1e-4;
/// Loops shorter than this many voxel spacings have contracted to grid noise.
pub const COLLAPSE_FLOOR_VOXELS: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
pub struct RelaxParams {
    pub iters: usize,
    /// fraction of the way toward the neighbor midpoint each move takes
    pub step: f64,
    /// re-spread vertices to uniform arclength every this many sweeps
    pub resample_every: usize,
}

impl Default for RelaxParams {
    fn default() -> Self {
        RelaxParams {
            iters: 200,
            step: 0.5,
            resample_every: 20,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResidualParams {
    /// extra window-restricted sweeps
    pub iters: usize,
    /// window size as a fraction of the loop's arclength, centered on the base
    pub window_frac: f64,
}

impl Default for ResidualParams {
    fn default() -> Self {
        ResidualParams {
            iters: 50,
            window_frac: 0.10,
        }
    }
}

/// Ranking weights; all four score terms are dimensionless and lower-is-better.
#[derive(Debug, Clone, Copy)]
pub struct RankWeights {
    pub centroid: f64,
    pub horizontality: f64,
    pub length: f64,
    pub residual: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        RankWeights {
            centroid: 0.4,
            horizontality: 0.3,
            length: 0.2,
            residual: 0.1,
        }
    }
}

/// Where a ranked loop came from, for reports and reproducibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub base_voxel: usize,
    pub critical_voxel: usize,
}

/// Final candidate set: loops plus a ranking (indices into `loops`, best
/// first) and per-loop provenance.
#[derive(Debug, Clone)]
pub struct LoopCandidateSet {
    pub loops: Vec<CagingLoop>,
    pub provenance: Vec<Provenance>,
    pub ranking: Vec<usize>,
}

/// Length of a closed polyline (closing edge included).
pub fn closed_length(v: &[Point]) -> f64 {
    let m = v.len();
    (0..m).map(|i| (v[(i + 1) % m] - v[i]).norm()).sum()
}

/// One midpoint move on vertex `i`, cancelled if it would leave grasping
/// space. Returns whether the vertex moved.
fn midpoint_move(v: &mut [Point], i: usize, grid: &VoxelGrid, step: f64) -> bool {
    let m = v.len();
    let prev = v[(i + m - 1) % m];
    let next = v[(i + 1) % m];
    let mid = Point::from((prev.coords + next.coords) * 0.5);
    let pull = (mid - v[i]) * step;
    let cand = v[i] + pull;
    if grid.label_at(&cand) == Some(Label::Grasping) {
        v[i] = cand;
        return true;
    }
    // Containment projection. A blocked pull points down the implicit field
    // (into the band); its level-set component is still a legal direction.
    // Without it, a contractible loop resting on a convex bump freezes in
    // place — every chord pull aims through the bump — and masquerades as
    // locally shortest forever. Sliding lets it creep off and collapse,
    // while a taut loop's pull is purely radial and projects to nothing.
    let Some(g) = grid.field_gradient_at(&v[i]) else {
        return false;
    };
    let gn = g.norm();
    if gn < 1e-12 {
        return false;
    }
    let down = pull.dot(&g) / gn;
    if down >= 0.0 {
        return false;
    }
    let cand = v[i] + (pull - (g / gn) * down);
    // the guard keeps the sweep monotone: accept only non-lengthening slides
    let before = (v[i] - prev).norm() + (v[i] - next).norm();
    let after = (cand - prev).norm() + (cand - next).norm();
    if after <= before && grid.label_at(&cand) == Some(Label::Grasping) {
        v[i] = cand;
        true
    } else {
        false
    }
}

/// Re-spreads the vertices to uniform arclength along the current polyline.
/// All-or-nothing: interpolated positions can cut voxel corners, so the
/// uniform version is kept only if every new vertex is still in grasping
/// space.
fn resample_uniform(v: &mut Vec<Point>, grid: &VoxelGrid) {
    let m = v.len();
    let mut cum = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for i in 0..m {
        acc += (v[(i + 1) % m] - v[i]).norm();
        cum.push(acc);
    }
    if acc <= 0.0 {
        return;
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let s = acc * k as f64 / m as f64;
        while cum[seg + 1] < s {
            seg += 1;
        }
        let t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]).max(f64::MIN_POSITIVE);
        let a = v[seg];
        let b = v[(seg + 1) % m];
        out.push(a + (b - a) * t);
    }
    if out
        .iter()
        .all(|p| grid.label_at(p) == Some(Label::Grasping))
    {
        *v = out;
    }
}

/// Iteratively shortens the loop while keeping every vertex in grasping
/// space. No vertex is pinned — the base is free to slide like the rest.
///
/// Each accepted move strictly shortens the two edges it touches (the edge
/// sum is convex with its minimum on the chord), so the total length is
/// non-increasing sweep over sweep. Errors with [`Error::CollapsedLoop`]
/// once the loop falls below [`COLLAPSE_FLOOR_VOXELS`] spacings — the mark
/// of a contractible curve that never caged anything.
pub fn relax_loop(lp: &CagingLoop, grid: &VoxelGrid, params: &RelaxParams) -> Result<CagingLoop> {
    let floor = COLLAPSE_FLOOR_VOXELS * grid.spacing;
    let mut v = lp.vertices.clone();
    let mut prev_len = closed_length(&v);
    for iter in 1..=params.iters {
        for i in 0..v.len() {
            midpoint_move(&mut v, i, grid, params.step);
        }
        let len = closed_length(&v);
        debug_assert!(len <= prev_len * (1.0 + 1e-9));
        if len < floor {
            return Err(Error::CollapsedLoop { len, floor });
        }
        let converged = prev_len - len < CONVERGE_SPACING_FRAC * grid.spacing;
        prev_len = len;
        if converged {
            break;
        }
        if iter % params.resample_every == 0 {
            resample_uniform(&mut v, grid);
            prev_len = closed_length(&v);
        }
    }
    let mut out = lp.clone();
    out.vertices = v;
    out.recompute_length();
    Ok(out)
}

/// Reach gate: a hand with finger length h closes loops shorter than 4h.
pub fn filter_length(lp: &CagingLoop, gripper: &GripperSpec) -> bool {
    lp.length < gripper.max_loop_len()
}

/// How much an arc around the base still wants to shrink, as a fraction of
/// the loop length.
///
/// A loop that genuinely wraps the object is locally shortest near its base:
/// extra relaxation confined to a short window there barely moves it. A loop
/// that merely records where the capped distance field stopped growing keeps
/// shortening. The pipeline keeps loops whose residual stays below the
/// configured maximum (0.02 by default).
pub fn local_shortest_residual(
    lp: &CagingLoop,
    grid: &VoxelGrid,
    params: &ResidualParams,
) -> f64 {
    let m = lp.vertices.len();
    let ib = (0..m)
        .min_by(|&a, &b| {
            let da = (lp.vertices[a] - lp.base).norm_squared();
            let db = (lp.vertices[b] - lp.base).norm_squared();
            da.partial_cmp(&db).unwrap_or(Ordering::Equal)
        })
        .expect("loop has vertices");
    // vertices are near-uniform after relaxation, so an index window is an
    // arclength window
    let half = ((0.5 * params.window_frac * m as f64).ceil() as usize).max(1);
    let mut v = lp.vertices.clone();
    let before = closed_length(&v);
    if before <= 0.0 {
        return 0.0;
    }
    for _ in 0..params.iters {
        for off in -(half as isize)..=(half as isize) {
            let i = (ib as isize + off).rem_euclid(m as isize) as usize;
            midpoint_move(&mut v, i, grid, 0.5);
        }
    }
    ((before - closed_length(&v)) / before).max(0.0)
}

fn point_segment_dist(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn directed_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let m = b.len();
    a.iter()
        .map(|p| {
            (0..m)
                .map(|i| point_segment_dist(p, &b[i], &b[(i + 1) % m]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two closed polylines, measured
/// vertex-to-polyline both ways.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Fills every score component and the weighted total.
///
/// * `centroid_dist`: loop center to object centroid, over the grid diagonal
///   (loops around the bulk of the object beat loops around an appendage);
/// * `horizontality`: 1 − |n̂·ĝ| for the fitted plane normal (a horizontal
///   loop resists gravity best);
/// * `length`: loop length over the 4h reach bound (shorter is safer);
/// * `residual`: the local-shortest residual recorded by the filter stage.
pub fn score_loops(
    loops: &mut [CagingLoop],
    grid: &VoxelGrid,
    gravity: &Vec3,
    gripper: &GripperSpec,
    weights: &RankWeights,
) {
    let volume_center = grid.center(grid.num_voxels() / 2);
    let centroid = grid.centroid_of_object().unwrap_or(volume_center);
    let diag = grid.spacing
        * ((grid.dims[0] * grid.dims[0] + grid.dims[1] * grid.dims[1]
            + grid.dims[2] * grid.dims[2]) as f64)
            .sqrt();
    let g = gravity.normalize();
    for lp in loops.iter_mut() {
        lp.scores.centroid_dist = (lp.center() - centroid).norm() / diag;
        lp.scores.horizontality = match fit_plane(&lp.vertices, &g) {
            Ok((n, _)) => 1.0 - n.dot(&g).abs(),
            Err(_) => 1.0,
        };
        lp.scores.length_fit = lp.length / gripper.max_loop_len();
        lp.scores.total = weights.centroid * lp.scores.centroid_dist
            + weights.horizontality * lp.scores.horizontality
            + weights.length * lp.scores.length_fit
            + weights.residual * lp.scores.residual;
    }
}

/// Total order on scored loops: score, then length, then provenance. The
/// provenance tie-breaks keep runs reproducible when scores coincide.
fn cmp_by_score(a: &CagingLoop, b: &CagingLoop) -> Ordering {
    a.scores
        .total
        .partial_cmp(&b.scores.total)
        .unwrap_or(Ordering::Equal)
        .then(
            a.length
                .partial_cmp(&b.length)
                .unwrap_or(Ordering::Equal),
        )
        .then(a.base_voxel.cmp(&b.base_voxel))
        .then(a.source.voxel.cmp(&b.source.voxel))
}

/// Greedy near-duplicate removal: walk the loops best-score-first and drop
/// any loop within `tau` symmetric Hausdorff distance of an already-kept
/// one. Returns keeper indices in score order.
pub fn dedup(loops: &[CagingLoop], tau: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..loops.len()).collect();
    order.sort_by(|&a, &b| cmp_by_score(&loops[a], &loops[b]));
    let boxes: Vec<(Point, Point)> = loops.iter().map(|lp| vertex_bbox(&lp.vertices)).collect();
    let mut keep: Vec<usize> = Vec::new();
    'outer: for &i in &order {
        for &k in &keep {
            // Hausdorff < tau forces the bounding boxes within tau of each
            // other, so most pairs are settled without touching vertices
            if boxes_apart(&boxes[i], &boxes[k], tau) {
                continue;
            }
            if within_hausdorff(&loops[i].vertices, &loops[k].vertices, tau) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

fn vertex_bbox(v: &[Point]) -> (Point, Point) {
    let mut lo = v[0];
    let mut hi = v[0];
    for p in v {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

fn boxes_apart(a: &(Point, Point), b: &(Point, Point), tau: f64) -> bool {
    (0..3).any(|ax| a.0[ax] - b.1[ax] >= tau || b.0[ax] - a.1[ax] >= tau)
}

/// `hausdorff(a, b) < tau`, but bails on the first vertex that settles it.
fn within_hausdorff(a: &[Point], b: &[Point], tau: f64) -> bool {
    let covered = |xs: &[Point], ys: &[Point]| {
        let m = ys.len();
        xs.iter().all(|p| {
            (0..m).any(|i| point_segment_dist(p, &ys[i], &ys[(i + 1) % m]) < tau)
        })
    };
    covered(a, b) && covered(b, a)
}

/// Orders scored loops into a [`LoopCandidateSet`], best first.
pub fn rank(loops: Vec<CagingLoop>) -> LoopCandidateSet {
    let mut ranking: Vec<usize> = (0..loops.len()).collect();
    ranking.sort_by(|&a, &b| cmp_by_score(&loops[a], &loops[b]));
    let provenance = loops
        .iter()
        .map(|lp| Provenance {
            base_voxel: lp.base_voxel,
            critical_voxel: lp.source.voxel,
        })
        .collect();
    LoopCandidateSet {
        loops,
        provenance,
        ranking,
    }
}
