//! Gripper pose synthesis on a caging loop.
//!
//! A pose is an origin vertex on the loop plus an orthogonal frame: `dir1`
//! points from the loop center out through the origin (the line along which
//! the palm retreats), `dir2` spans the finger spread, and `normal` is the
//! loop's fitted plane normal. The origin is the vertex with the widest
//! approach cone — the deepest a fan of straight finger rays can dip below
//! the local tangent plane without penetrating the object — and a candidate
//! pose is accepted only if the swept gripper body (three fingers and a palm
//! disc) stays clear of the object.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Label, VoxelGrid};
use crate::gripper::GripperSpec;
use crate::morse::CagingLoop;
use crate::{Point, Vec3};

/// Sampling and acceptance parameters for pose synthesis.
#[derive(Debug, Clone, Copy)]
pub struct PoseParams {
    /// directions per dip ring when sampling the approach cone
    pub azimuths: usize,
    /// dip stations between the tangent plane and the candidate angle
    pub rings: usize,
    /// bisection resolution of the opening angle, radians
    pub angle_tol: f64,
    /// origins whose opening angle is below this are not worth approaching
    pub min_angle: f64,
    /// tilt of each finger away from the inward approach axis, degrees
    pub spread_deg: f64,
    /// palm center sits this fraction of the finger length behind the origin
    pub palm_offset_frac: f64,
}

impl Default for PoseParams {
    fn default() -> Self {
        PoseParams {
            azimuths: 64,
            rings: 8,
            angle_tol: 0.01,
            min_angle: 0.15,
            spread_deg: 60.0,
            palm_offset_frac: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GraspPose {
    pub origin: Point,
    /// unit vector from the loop center out through the origin
    pub dir1: Vec3,
    /// unit finger-spread direction, orthogonal to `dir1` and to the plane
    /// normal
    pub dir2: Vec3,
    /// unit normal of the loop's fitted plane, oriented against gravity
    pub normal: Vec3,
    pub opening_angle: f64,
    /// set by the interference check; a written pose can be invalid
    pub valid: bool,
}

/// Least-squares plane through `vertices`: returns the unit normal n and
/// offset b with n·x = b for the fitted plane.
///
/// The normal is the smallest-eigenvalue direction of the vertex covariance,
/// oriented so n·gravity ≤ 0 (ties broken toward lexicographically positive
/// n). Errors with [`Error::CollinearLoop`] when the vertices span less than
/// a plane.
pub fn fit_plane(vertices: &[Point], gravity: &Vec3) -> Result<(Vec3, f64)> {
    if vertices.len() < 3 {
        return Err(Error::CollinearLoop);
    }
    let centroid = Point::from(
        vertices.iter().map(|p| p.coords).sum::<Vec3>() / vertices.len() as f64,
    );
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for p in vertices {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
    });
    let [lo, mid, hi] = order;
    // rank ≤ 1 means the vertices sit on a line (or a point)
    if eig.eigenvalues[mid] <= 1e-12 * eig.eigenvalues[hi].max(f64::MIN_POSITIVE) {
        return Err(Error::CollinearLoop);
    }
    let mut n = eig.eigenvectors.column(lo).into_owned().normalize();
    let down = n.dot(gravity);
    if down > 0.0 {
        n = -n;
    } else if down == 0.0 {
        let first = if n.x != 0.0 {
            n.x
        } else if n.y != 0.0 {
            n.y
        } else {
            n.z
        };
        if first < 0.0 {
            n = -n;
        }
    }
    Ok((n, n.dot(&centroid.coords)))
}

/// Any unit pair orthogonal to `w` (which must be unit).
fn tangent_basis(w: &Vec3) -> (Vec3, Vec3) {
    let pick = if w.x.abs() <= w.y.abs() && w.x.abs() <= w.z.abs() {
        Vec3::x()
    } else if w.y.abs() <= w.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = w.cross(&pick).normalize();
    let v = w.cross(&u);
    (u, v)
}

/// True when the open segment `(a, b]`-ish crosses an OBJECT voxel.
/// Amanatides–Woo traversal: visits exactly the voxels the segment passes
/// through, so thin walls cannot slip between samples. Both endpoints must
/// already lie inside the grid box (clip first).
fn segment_hits_object(grid: &VoxelGrid, a: &Point, b: &Point) -> bool {
    let inv = 1.0 / grid.spacing;
    let eps = 1e-9;
    let mut c = [0isize; 3];
    let mut cend = [0isize; 3];
    for ax in 0..3 {
        let hi = grid.dims[ax] as isize - 1;
        c[ax] = (((a[ax] - grid.origin[ax]) * inv).floor() as isize).clamp(0, hi);
        cend[ax] = (((b[ax] - grid.origin[ax]) * inv).floor() as isize).clamp(0, hi);
    }
    let d = b - a;
    let mut step = [0isize; 3];
    let mut tmax = [f64::INFINITY; 3];
    let mut tdelta = [f64::INFINITY; 3];
    for ax in 0..3 {
        if d[ax] > eps {
            step[ax] = 1;
            let next = grid.origin[ax] + (c[ax] + 1) as f64 * grid.spacing;
            tmax[ax] = (next - a[ax]) / d[ax];
            tdelta[ax] = grid.spacing / d[ax];
        } else if d[ax] < -eps {
            step[ax] = -1;
            let next = grid.origin[ax] + c[ax] as f64 * grid.spacing;
            tmax[ax] = (next - a[ax]) / d[ax];
            tdelta[ax] = -grid.spacing / d[ax];
        }
    }
    let budget = grid.dims[0] + grid.dims[1] + grid.dims[2] + 3;
    for _ in 0..budget {
        let idx = c[0] as usize + grid.dims[0] * (c[1] as usize + grid.dims[1] * c[2] as usize);
        if grid.labels[idx] == Label::Object {
            return true;
        }
        if c == cend {
            return false;
        }
        let ax = if tmax[0] <= tmax[1] && tmax[0] <= tmax[2] {
            0
        } else if tmax[1] <= tmax[2] {
            1
        } else {
            2
        };
        c[ax] += step[ax];
        if c[ax] < 0 || c[ax] >= grid.dims[ax] as isize {
            return false;
        }
        tmax[ax] += tdelta[ax];
    }
    false
}

/// Widest dip below the local tangent plane that finger rays rooted at
/// `apex` can reach without penetrating the object.
///
/// The tested body is a fan of straight rays from `apex`: at candidate angle
/// θ the fan covers `rings` dip stations between the plane orthogonal to
/// `axis` and dip θ, each with `azimuths` directions; a ray extends until
/// its lateral reach from the axis hits `depth` (capped at 2·depth for
/// near-axial rays) and is traversed voxel-exactly. The angle is the
/// smallest per-azimuth limit, each found by bisection over [0, π/2] to
/// `angle_tol`; an azimuth already clear at the running minimum cannot
/// lower it and costs a single test.
///
/// Rays are blocked by OBJECT voxels only: loop vertices hug the offset
/// band, and treating the band as an obstacle would quantize every angle
/// down to grid noise. The apex itself must clear the band — a vertex
/// inside it leaves no room for the palm line and scores 0.
///
/// For an apex at height d over a flat obstacle this reproduces the exact
/// cone-plane tangency θ = arctan(d / depth) whenever d < √3·depth.
pub fn opening_angle(
    apex: &Point,
    axis: &Vec3,
    grid: &VoxelGrid,
    depth: f64,
    params: &PoseParams,
) -> f64 {
    opening_angle_floor(apex, axis, grid, depth, params, 0.0).0
}

/// [`opening_angle`] with a pruning floor: once the running minimum over
/// azimuths drops to `floor` the exact value cannot matter to the caller,
/// so the scan aborts. Returns `(value, aborted)` — when aborted the value
/// is an upper bound on the true angle, not the angle itself.
fn opening_angle_floor(
    apex: &Point,
    axis: &Vec3,
    grid: &VoxelGrid,
    depth: f64,
    params: &PoseParams,
    floor: f64,
) -> (f64, bool) {
    if grid.blocked_at(apex) {
        return (0.0, false);
    }
    if axis.norm() < 1e-12 {
        return (0.0, false);
    }
    let w = axis.normalize();
    let (u, v) = tangent_basis(&w);
    // everything off-grid is free space, so march only the in-grid span
    let clip = |dir: &Vec3, reach: f64| -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = reach;
        for a in 0..3 {
            let lo = grid.origin[a];
            let hi = grid.origin[a] + grid.dims[a] as f64 * grid.spacing;
            if dir[a].abs() < 1e-15 {
                if apex[a] < lo || apex[a] > hi {
                    return None;
                }
            } else {
                let ta = (lo - apex[a]) / dir[a];
                let tb = (hi - apex[a]) / dir[a];
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        (t0 < t1).then_some((t0, t1))
    };
    let sector_clear = |cphi: f64, sphi: f64, theta: f64| -> bool {
        for ring in 1..=params.rings {
            let dip = theta * ring as f64 / params.rings as f64;
            let (sd, cd) = dip.sin_cos();
            let reach = depth / cd.max(0.5);
            let dir = (u * cphi + v * sphi) * cd - w * sd;
            let Some((t0, t1)) = clip(&dir, reach) else {
                continue;
            };
            if segment_hits_object(grid, &(apex + dir * t0), &(apex + dir * t1)) {
                return false;
            }
        }
        true
    };
    let mut best = FRAC_PI_2;
    for az in 0..params.azimuths {
        let phi = TAU * az as f64 / params.azimuths as f64;
        let (sphi, cphi) = phi.sin_cos();
        if sector_clear(cphi, sphi, best) {
            continue;
        }
        let (mut lo, mut hi) = (0.0f64, best);
        if floor > 0.0 && floor < best {
            // one probe settles which side of the floor this azimuth is on
            if sector_clear(cphi, sphi, floor) {
                lo = floor;
            } else {
                return (floor, true);
            }
        }
        while hi - lo > params.angle_tol {
            let mid = 0.5 * (lo + hi);
            if sector_clear(cphi, sphi, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = lo;
        if best <= params.angle_tol {
            return (0.0, false);
        }
        if best <= floor {
            return (best, true);
        }
    }
    (best, false)
}

/// Opening angle of every loop vertex, widest first. The per-vertex cone
/// axis is the direction from the loop center out through the vertex. Ties
/// go to the vertex nearest the hull boundary, then to the lower index, so
/// the order is reproducible.
pub fn vertex_angles(
    lp: &CagingLoop,
    grid: &VoxelGrid,
    depth: f64,
    params: &PoseParams,
) -> Vec<(usize, f64)> {
    let c = lp.center();
    let mut angles: Vec<(usize, f64)> = lp
        .vertices
        .par_iter()
        .enumerate()
        .map(|(i, p)| (i, opening_angle(p, &(p - c), grid, depth, params)))
        .collect();
    let boundary_dist = |i: usize| match &grid.hull {
        Some(h) => h.margin(&lp.vertices[i]).abs(),
        None => 0.0,
    };
    angles.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(
                boundary_dist(a.0)
                    .partial_cmp(&boundary_dist(b.0))
                    .unwrap_or(Ordering::Equal),
            )
            .then(a.0.cmp(&b.0))
    });
    angles
}

/// A vertex candidate for the pose origin: `angle` is exact when `exact`,
/// otherwise an upper bound from a floor-pruned scan.
struct OriginCandidate {
    idx: usize,
    angle: f64,
    exact: bool,
}

fn sort_candidates(list: &mut [OriginCandidate], lp: &CagingLoop, grid: &VoxelGrid) {
    let boundary_dist = |i: usize| match &grid.hull {
        Some(h) => h.margin(&lp.vertices[i]).abs(),
        None => 0.0,
    };
    list.sort_by(|a, b| {
        b.angle
            .partial_cmp(&a.angle)
            .unwrap_or(Ordering::Equal)
            .then(
                boundary_dist(a.idx)
                    .partial_cmp(&boundary_dist(b.idx))
                    .unwrap_or(Ordering::Equal),
            )
            .then(a.idx.cmp(&b.idx))
    });
}

/// Origin candidates widest-first, most of them priced with one probe.
///
/// Scans vertices with a floor that trails the running maximum by `angle_tol`
/// (never below `min_angle`, where a vertex stops mattering at all), so only
/// contenders for the top spot pay for a full bisection. Vertices within
/// `angle_tol` of the maximum stay exact, which keeps the argmax and its
/// boundary-distance tie-break identical to an exhaustive scan. Pruned
/// entries carry an upper bound; callers walking past the top must refine
/// them before trusting the order.
fn ranked_origins(
    lp: &CagingLoop,
    grid: &VoxelGrid,
    depth: f64,
    params: &PoseParams,
) -> Vec<OriginCandidate> {
    let c = lp.center();
    let mut floor = params.min_angle;
    let mut list: Vec<OriginCandidate> = lp
        .vertices
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (angle, aborted) =
                opening_angle_floor(p, &(p - c), grid, depth, params, floor);
            if !aborted {
                floor = floor.max(angle - params.angle_tol);
            }
            OriginCandidate {
                idx: i,
                angle,
                exact: !aborted,
            }
        })
        .collect();
    sort_candidates(&mut list, lp, grid);
    list
}

/// Advances `pos` to the next candidate with an exact angle at or above
/// `min_angle`, refining pruned entries in place (and re-sorting the tail)
/// as they surface. Returns `None` once every remaining bound is below the
/// threshold.
fn next_origin(
    list: &mut Vec<OriginCandidate>,
    pos: usize,
    lp: &CagingLoop,
    grid: &VoxelGrid,
    depth: f64,
    params: &PoseParams,
) -> Option<(usize, f64)> {
    let c = lp.center();
    loop {
        let cand = list.get(pos)?;
        if cand.angle < params.min_angle {
            return None; // sorted by bound: everything after is narrower
        }
        if cand.exact {
            return Some((cand.idx, cand.angle));
        }
        let i = cand.idx;
        let p = &lp.vertices[i];
        let (angle, _) = opening_angle_floor(p, &(p - c), grid, depth, params, 0.0);
        list[pos] = OriginCandidate {
            idx: i,
            angle,
            exact: true,
        };
        sort_candidates(&mut list[pos..], lp, grid);
    }
}

/// True when the point's voxel or one of its 26 neighbors is a band voxel —
/// the grid-level test for "this vertex lies on the offset surface".
fn near_band(grid: &VoxelGrid, p: &Point) -> bool {
    match grid.voxel_at(p) {
        Some(idx) => {
            grid.label(idx) == Label::Band
                || grid.neighbors26(idx).any(|j| grid.label(j) == Label::Band)
        }
        None => false,
    }
}

/// Builds the frame at vertex `o_idx`.
///
/// On the offset surface the approach line is radial: dir1 = (o − c)/‖o − c‖.
/// Off the surface that line is ill-defined, so dir1 = t × n (loop tangent
/// cross plane normal), signed away from the loop center. dir2 completes the
/// frame as dir1 × n, renormalized; {dir1, dir2, dir2 × dir1} is orthonormal
/// even when the fitted normal is slightly out of square with dir1.
fn frame_at(lp: &CagingLoop, grid: &VoxelGrid, o_idx: usize, n: &Vec3, angle: f64) -> GraspPose {
    let m = lp.vertices.len();
    let o = lp.vertices[o_idx];
    let c = lp.center();
    let radial = o - c;
    let surface = near_band(grid, &o) && radial.norm() > 1e-12;
    let dir1 = if surface {
        radial.normalize()
    } else {
        let t = lp.vertices[(o_idx + 1) % m] - lp.vertices[(o_idx + m - 1) % m];
        let mut d = t.cross(n);
        if d.norm() < 1e-12 {
            d = radial;
        }
        if d.norm() < 1e-12 {
            d = tangent_basis(n).0;
        }
        let mut d = d.normalize();
        if d.dot(&radial) < 0.0 {
            d = -d;
        }
        d
    };
    let mut spread = dir1.cross(n);
    if spread.norm() < 1e-9 {
        spread = tangent_basis(&dir1).0;
    }
    let dir2 = spread.normalize();
    GraspPose {
        origin: o,
        dir1,
        dir2,
        normal: *n,
        opening_angle: angle,
        valid: false,
    }
}

/// Frame at the vertex with the widest approach cone.
///
/// Errors with [`Error::NoValidOrigin`] when no vertex clears
/// `params.min_angle`. The returned pose has not been interference-checked;
/// see [`synthesize_pose`] for the full search.
pub fn make_pose(
    lp: &CagingLoop,
    grid: &VoxelGrid,
    gripper: &GripperSpec,
    gravity: &Vec3,
    params: &PoseParams,
) -> Result<GraspPose> {
    let (n, _) = fit_plane(&lp.vertices, gravity)?;
    let mut list = ranked_origins(lp, grid, gripper.approach_depth, params);
    match next_origin(&mut list, 0, lp, grid, gripper.approach_depth, params) {
        Some((best, angle)) => Ok(frame_at(lp, grid, best, &n, angle)),
        None => Err(Error::NoValidOrigin {
            min_angle: params.min_angle,
        }),
    }
}

/// Tests the swept gripper body against the object and its band.
///
/// The body is a palm disc of radius 2r centered `palm_offset_frac`·h behind
/// the origin along dir1, plus three straight fingers of length h rooted at
/// the palm center: two tilted the spread angle toward ±dir2, one thumb
/// tilted the same amount to the −normal side. Fingers are sampled along their
/// centerlines at half-voxel pitch — the band is exactly the r-inflation of
/// the object, so a centerline clear of OBJECT∪BAND keeps a radius-r finger
/// from penetrating the surface, and sampling the tube boundary too would
/// charge the clearance twice. The pose is clear when no sample lands in an
/// object or band voxel.
pub fn check_interference(
    pose: &GraspPose,
    grid: &VoxelGrid,
    gripper: &GripperSpec,
    params: &PoseParams,
) -> bool {
    let step = 0.5 * grid.spacing;
    let root = pose.origin + pose.dir1 * (params.palm_offset_frac * gripper.h);

    // palm disc, radius 2r, normal dir1
    let (pu, pv) = tangent_basis(&pose.dir1);
    if grid.blocked_at(&root) {
        return false;
    }
    let disc_r = 2.0 * gripper.r;
    let radial_steps = (disc_r / step).ceil().max(1.0) as usize;
    for j in 1..=radial_steps {
        let rad = disc_r * j as f64 / radial_steps as f64;
        let count = 8 * j;
        for a in 0..count {
            let phi = TAU * a as f64 / count as f64;
            let p = root + (pu * phi.cos() + pv * phi.sin()) * rad;
            if grid.blocked_at(&p) {
                return false;
            }
        }
    }

    // three fingers, each tilted the full spread angle away from the inward
    // axis so the pair straddles the caged part instead of stabbing it
    let sigma = params.spread_deg.to_radians().clamp(0.0, FRAC_PI_2);
    let fwd = -pose.dir1;
    let np = pose.dir2.cross(&pose.dir1); // projected plane normal, unit
    let fingers = [
        fwd * sigma.cos() + pose.dir2 * sigma.sin(),
        fwd * sigma.cos() - pose.dir2 * sigma.sin(),
        fwd * sigma.cos() - np * sigma.sin(),
    ];
    let along_steps = (gripper.h / step).ceil().max(1.0) as usize;
    for dir in fingers {
        for s in 1..=along_steps {
            let center = root + dir * (gripper.h * s as f64 / along_steps as f64);
            if grid.blocked_at(&center) {
                return false;
            }
        }
    }
    true
}

/// Best non-interfering pose on the loop.
///
/// Vertices are tried widest-opening-angle first; the first pose whose swept
/// body stays clear is returned with `valid = true`. If every candidate
/// interferes, the widest-angle pose is returned with `valid = false` so
/// callers can still report it. Errors with [`Error::NoValidOrigin`] when no
/// vertex clears the minimum opening angle at all.
pub fn synthesize_pose(
    lp: &CagingLoop,
    grid: &VoxelGrid,
    gripper: &GripperSpec,
    gravity: &Vec3,
    params: &PoseParams,
) -> Result<GraspPose> {
    let (n, _) = fit_plane(&lp.vertices, gravity)?;
    let mut list = ranked_origins(lp, grid, gripper.approach_depth, params);
    let mut fallback: Option<GraspPose> = None;
    let mut pos = 0;
    while let Some((idx, angle)) =
        next_origin(&mut list, pos, lp, grid, gripper.approach_depth, params)
    {
        let mut pose = frame_at(lp, grid, idx, &n, angle);
        if check_interference(&pose, grid, gripper, params) {
            pose.valid = true;
            return Ok(pose);
        }
        if fallback.is_none() {
            fallback = Some(pose);
        }
        pos += 1;
    }
    fallback.ok_or(Error::NoValidOrigin {
        min_angle: params.min_angle,
    })
}
