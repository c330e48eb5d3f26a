//! End-to-end synthesis: cloud → implicit surface → grid → distance fields →
//! loops → poses, with per-stage bookkeeping.
//!
//! Determinism contract: for a fixed (input, config, seed) triple the stages
//! iterate in fixed order — base points come from a seeded farthest-point
//! sweep, per-base work is merged back in base order, and every tie-break
//! downstream is total — so `loops.txt` and `poses.txt` reproduce
//! byte-identically. `report.txt` carries wall-clock timings and is exempt.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::dfield::compute_field;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Label, VoxelGrid};
use crate::morse::{find_critical_points, trace_loops, CagingLoop};
use crate::pose::{synthesize_pose, GraspPose};
use crate::rbf::fit_rbf;
use crate::refine::{
    closed_length, dedup, filter_length, local_shortest_residual, rank, relax_loop, score_loops,
    LoopCandidateSet,
};
use crate::shape::{estimate_curvatures, PointCloud};
use crate::{Point, Vec3};

/// How far past the offset band the base-point mapping probes, in voxel
/// spacings along the surface normal.
const BASE_PROBE_VOXELS: f64 = 6.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct StageCounts {
    pub cloud_points: usize,
    /// cloud points surviving the curvature gate
    pub base_candidates: usize,
    /// distinct grasping voxels the samples mapped to
    pub base_voxels: usize,
    pub critical_points: usize,
    pub traced: usize,
    pub degenerate: usize,
    pub collapsed: usize,
    pub over_length: usize,
    pub not_locally_shortest: usize,
    pub duplicates: usize,
    pub retained: usize,
    pub poses_total: usize,
    pub poses_valid: usize,
}

#[derive(Debug)]
pub struct RunReport {
    pub counts: StageCounts,
    /// per-stage wall time, seconds
    pub timings: Vec<(&'static str, f64)>,
    /// which stage emptied the candidate set, when one did
    pub empty_stage: Option<&'static str>,
    /// the config file, byte for byte
    pub config_echo: String,
    pub grid_dims: [usize; 3],
    pub grid_spacing: f64,
    pub label_counts: [usize; 4],
    pub loops: LoopCandidateSet,
    /// one entry per ranking slot; `None` when no origin qualified
    pub poses: Vec<Option<GraspPose>>,
}

impl RunReport {
    pub fn has_valid_pose(&self) -> bool {
        self.counts.poses_valid > 0
    }
}

/// Seeded farthest-point sample of base points, mapped onto grasping voxels.
///
/// Convex-neighborhood points (both principal curvatures negative) are
/// dropped first when `curvature_filter` is on — bases on bulges trace loops
/// that slide off — then `n` spread-out survivors are picked starting from a
/// seeded index, and each is pushed outward along its normal until its voxel
/// is labeled GRASPING (clearing the offset band). Distinct voxels are
/// returned in pick order.
pub fn sample_base_points(
    cloud: &PointCloud,
    grid: &VoxelGrid,
    n: usize,
    seed: u64,
    curvature_filter: bool,
) -> Result<Vec<usize>> {
    let candidates: Vec<usize> = if curvature_filter {
        let samples = estimate_curvatures(cloud, crate::shape::curvature::DEFAULT_K)?;
        (0..cloud.len())
            .filter(|&i| !(samples[i].k1 < 0.0 && samples[i].k2 < 0.0))
            .collect()
    } else {
        (0..cloud.len()).collect()
    };
    if candidates.is_empty() {
        return Err(Error::NoBasePoints);
    }

    // farthest-point sweep over the candidate positions
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = n.min(candidates.len());
    let mut picked = Vec::with_capacity(budget);
    let mut min_d2 = vec![f64::INFINITY; candidates.len()];
    let mut cur = rng.random_range(0..candidates.len());
    for _ in 0..budget {
        picked.push(candidates[cur]);
        let p = cloud.points[candidates[cur]];
        let mut best = 0;
        let mut best_d2 = -1.0;
        for (j, &cj) in candidates.iter().enumerate() {
            let d2 = (cloud.points[cj] - p).norm_squared().min(min_d2[j]);
            min_d2[j] = d2;
            if d2 > best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        cur = best;
    }

    // map each pick outward along its normal into grasping space
    let mut seen = HashSet::new();
    let mut voxels = Vec::new();
    for i in picked {
        let start = grid.offset_radius;
        let step = 0.5 * grid.spacing;
        let steps = (BASE_PROBE_VOXELS * grid.spacing / step).ceil() as usize;
        for k in 0..=steps {
            let q = cloud.points[i] + cloud.normals[i] * (start + step * k as f64);
            if let Some(v) = grid.voxel_at(&q) {
                if grid.label(v) == Label::Grasping {
                    if seen.insert(v) {
                        voxels.push(v);
                    }
                    break;
                }
            }
        }
    }
    if voxels.is_empty() {
        return Err(Error::NoBasePoints);
    }
    Ok(voxels)
}

/// Runs the whole pipeline on a loaded cloud.
///
/// Always returns a report when the stages themselves succeed, even if the
/// candidate set emptied along the way — `empty_stage` and `poses_valid`
/// tell the caller what happened. Hard failures (degenerate input, singular
/// fit, empty grasping space) surface as errors.
pub fn run(cloud: &PointCloud, cfg: &PipelineConfig, raw_cfg: &str) -> Result<RunReport> {
    let gripper = cfg.gripper_spec()?;
    let gravity = cfg.gravity_vec();
    let mut counts = StageCounts {
        cloud_points: cloud.len(),
        ..StageCounts::default()
    };
    let mut timings: Vec<(&'static str, f64)> = Vec::new();

    let t = Instant::now();
    let surface = fit_rbf(cloud, cfg.offset)?;
    timings.push(("fit-surface", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let grid = build_grid(&surface, cloud, cfg.resolution, cfg.margin)?;
    timings.push(("voxelize", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    if cfg.curvature_filter {
        let samples = estimate_curvatures(cloud, crate::shape::curvature::DEFAULT_K)?;
        counts.base_candidates = samples
            .iter()
            .filter(|s| !(s.k1 < 0.0 && s.k2 < 0.0))
            .count();
    } else {
        counts.base_candidates = cloud.len();
    }
    let bases = sample_base_points(cloud, &grid, cfg.samples, cfg.seed, cfg.curvature_filter)?;
    counts.base_voxels = bases.len();
    timings.push(("sample-bases", t.elapsed().as_secs_f64()));

    // one distance field per base; results merged in base order
    let t = Instant::now();
    let per_base: Vec<(usize, usize, Vec<CagingLoop>)> = bases
        .par_iter()
        .map(|&b| {
            let field = compute_field(&grid, b, gripper.sweep_cap())?;
            let crits = find_critical_points(&field, &grid);
            let mut loops = Vec::new();
            let mut degenerate = 0;
            for q in &crits {
                for traced in trace_loops(&field, &grid, q) {
                    match traced {
                        Ok(lp) => loops.push(lp),
                        Err(_) => degenerate += 1,
                    }
                }
            }
            Ok((crits.len(), degenerate, loops))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut traced: Vec<CagingLoop> = Vec::new();
    for (ncrit, ndeg, loops) in per_base {
        counts.critical_points += ncrit;
        counts.degenerate += ndeg;
        traced.extend(loops);
    }
    counts.traced = traced.len();
    timings.push(("trace-loops", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let relax_params = cfg.relax_params();
    let relaxed: Vec<CagingLoop> = traced
        .par_iter()
        .filter_map(|lp| relax_loop(lp, &grid, &relax_params).ok())
        .collect();
    counts.collapsed = counts.traced - relaxed.len();
    timings.push(("relax", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let within_reach: Vec<CagingLoop> = relaxed
        .into_iter()
        .filter(|lp| filter_length(lp, &gripper))
        .collect();
    counts.over_length = counts.traced - counts.collapsed - within_reach.len();

    let residual_params = cfg.residual_params();
    let mut shortest: Vec<CagingLoop> = within_reach
        .into_par_iter()
        .filter_map(|mut lp| {
            let r = local_shortest_residual(&lp, &grid, &residual_params);
            lp.scores.residual = r;
            (r < cfg.filter.residual_max).then_some(lp)
        })
        .collect();
    counts.not_locally_shortest =
        counts.traced - counts.collapsed - counts.over_length - shortest.len();
    timings.push(("filter", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    score_loops(&mut shortest, &grid, &gravity, &gripper, &cfg.rank_weights());
    let keep = dedup(&shortest, cfg.dedup.tau_voxels * grid.spacing);
    counts.duplicates = shortest.len() - keep.len();
    let kept: Vec<CagingLoop> = keep.iter().map(|&i| shortest[i].clone()).collect();
    let set = rank(kept);
    counts.retained = set.loops.len();
    timings.push(("rank", t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let pose_params = cfg.pose_params();
    let poses: Vec<Option<GraspPose>> = set
        .ranking
        .par_iter()
        .map(|&li| synthesize_pose(&set.loops[li], &grid, &gripper, &gravity, &pose_params).ok())
        .collect();
    for p in poses.iter().flatten() {
        counts.poses_total += 1;
        if p.valid {
            counts.poses_valid += 1;
        }
    }
    timings.push(("poses", t.elapsed().as_secs_f64()));

    let empty_stage = if counts.traced == 0 {
        Some("trace")
    } else if counts.traced == counts.collapsed {
        Some("relax")
    } else if counts.retained == 0 && counts.over_length > 0 && counts.not_locally_shortest == 0 {
        Some("length-filter")
    } else if counts.retained == 0 {
        Some("local-shortest-filter")
    } else if counts.poses_total == 0 {
        Some("opening-angle")
    } else if counts.poses_valid == 0 {
        Some("interference")
    } else {
        None
    };

    Ok(RunReport {
        counts,
        timings,
        empty_stage,
        config_echo: raw_cfg.to_string(),
        grid_dims: grid.dims,
        grid_spacing: grid.spacing,
        label_counts: grid.counts(),
        loops: set,
        poses,
    })
}

/// Writes `loops.txt`, `poses.txt` and `report.txt` into `dir`.
///
/// The loop and pose files are deterministic for a fixed (input, config,
/// seed); the report carries timings and is not.
pub fn write_outputs(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut loops_txt = String::from("# cageloop loops v1\n");
    for (rk, &li) in report.loops.ranking.iter().enumerate() {
        let lp = &report.loops.loops[li];
        writeln!(
            loops_txt,
            "loop {rk} score {} length {} base {} {} {} vertices {}",
            lp.scores.total,
            lp.length,
            lp.base.x,
            lp.base.y,
            lp.base.z,
            lp.vertices.len()
        )
        .expect("string write");
        for v in &lp.vertices {
            writeln!(loops_txt, "v {} {} {}", v.x, v.y, v.z).expect("string write");
        }
    }
    std::fs::write(dir.join("loops.txt"), loops_txt)?;

    let mut poses_txt = String::from("# cageloop poses v1\n");
    for (rk, pose) in report.poses.iter().enumerate() {
        match pose {
            Some(p) => writeln!(
                poses_txt,
                "pose {rk} origin {} {} {} dir1 {} {} {} dir2 {} {} {} normal {} {} {} angle {} valid {}",
                p.origin.x, p.origin.y, p.origin.z,
                p.dir1.x, p.dir1.y, p.dir1.z,
                p.dir2.x, p.dir2.y, p.dir2.z,
                p.normal.x, p.normal.y, p.normal.z,
                p.opening_angle, p.valid
            )
            .expect("string write"),
            None => writeln!(poses_txt, "pose {rk} none").expect("string write"),
        }
    }
    std::fs::write(dir.join("poses.txt"), poses_txt)?;

    let c = &report.counts;
    let mut rep = String::from("# cageloop report\n");
    let _ = writeln!(rep, "input points: {}", c.cloud_points);
    let _ = writeln!(
        rep,
        "grid: {}x{}x{} spacing {}",
        report.grid_dims[0], report.grid_dims[1], report.grid_dims[2], report.grid_spacing
    );
    let _ = writeln!(
        rep,
        "labels: object {} band {} grasping {} outside {}",
        report.label_counts[0],
        report.label_counts[1],
        report.label_counts[2],
        report.label_counts[3]
    );
    let _ = writeln!(rep, "base candidates: {}", c.base_candidates);
    let _ = writeln!(rep, "base voxels: {}", c.base_voxels);
    let _ = writeln!(rep, "critical points: {}", c.critical_points);
    let _ = writeln!(rep, "traced: {} degenerate: {}", c.traced, c.degenerate);
    let _ = writeln!(rep, "collapsed: {}", c.collapsed);
    let _ = writeln!(rep, "over-length: {}", c.over_length);
    let _ = writeln!(rep, "not-locally-shortest: {}", c.not_locally_shortest);
    let _ = writeln!(rep, "duplicates: {}", c.duplicates);
    let _ = writeln!(rep, "retained: {}", c.retained);
    let _ = writeln!(rep, "poses: {} valid: {}", c.poses_total, c.poses_valid);
    let _ = writeln!(
        rep,
        "empty-stage: {}",
        report.empty_stage.unwrap_or("none")
    );
    let _ = writeln!(rep, "timings:");
    for (name, secs) in &report.timings {
        let _ = writeln!(rep, "  {name} {secs:.3}s");
    }
    rep.push_str("-- config --\n");
    rep.push_str(&report.config_echo);
    std::fs::write(dir.join("report.txt"), rep)?;
    Ok(())
}

/// A loop block parsed back from `loops.txt`.
#[derive(Debug)]
pub struct ParsedLoop {
    pub rank: usize,
    pub score: f64,
    pub length: f64,
    pub base: Point,
    pub vertices: Vec<Point>,
}

/// A pose line parsed back from `poses.txt` (`None` body for "pose N none").
#[derive(Debug)]
pub struct ParsedPose {
    pub rank: usize,
    pub body: Option<(Point, Vec3, Vec3, Vec3, f64, bool)>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_loops(path: &Path) -> Result<Vec<ParsedLoop>> {
    let text = std::fs::read_to_string(path)?;
    let mut out: Vec<ParsedLoop> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok[0] {
            "loop" => {
                if tok.len() != 12
                    || tok[2] != "score"
                    || tok[4] != "length"
                    || tok[6] != "base"
                    || tok[10] != "vertices"
                {
                    return Err(parse_err(path, ln, "malformed loop header"));
                }
                let num = |s: &str| -> Result<f64> {
                    s.parse()
                        .map_err(|_| parse_err(path, ln, format!("bad number {s:?}")))
                };
                out.push(ParsedLoop {
                    rank: tok[1]
                        .parse()
                        .map_err(|_| parse_err(path, ln, "bad rank"))?,
                    score: num(tok[3])?,
                    length: num(tok[5])?,
                    base: Point::new(num(tok[7])?, num(tok[8])?, num(tok[9])?),
                    vertices: Vec::new(),
                });
            }
            "v" => {
                if tok.len() != 4 {
                    return Err(parse_err(path, ln, "malformed vertex line"));
                }
                let num = |s: &str| -> Result<f64> {
                    s.parse()
                        .map_err(|_| parse_err(path, ln, format!("bad number {s:?}")))
                };
                let v = Point::new(num(tok[1])?, num(tok[2])?, num(tok[3])?);
                out.last_mut()
                    .ok_or_else(|| parse_err(path, ln, "vertex before any loop header"))?
                    .vertices
                    .push(v);
            }
            other => return Err(parse_err(path, ln, format!("unexpected record {other:?}"))),
        }
    }
    Ok(out)
}

pub fn parse_poses(path: &Path) -> Result<Vec<ParsedPose>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok[0] != "pose" {
            return Err(parse_err(path, ln, format!("unexpected record {:?}", tok[0])));
        }
        let rank: usize = tok[1]
            .parse()
            .map_err(|_| parse_err(path, ln, "bad rank"))?;
        if tok.len() == 3 && tok[2] == "none" {
            out.push(ParsedPose { rank, body: None });
            continue;
        }
        if tok.len() != 22
            || tok[2] != "origin"
            || tok[6] != "dir1"
            || tok[10] != "dir2"
            || tok[14] != "normal"
            || tok[18] != "angle"
            || tok[20] != "valid"
        {
            return Err(parse_err(path, ln, "malformed pose line"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| parse_err(path, ln, format!("bad number {s:?}")))
        };
        let valid = match tok[21] {
            "true" => true,
            "false" => false,
            other => return Err(parse_err(path, ln, format!("bad valid flag {other:?}"))),
        };
        out.push(ParsedPose {
            rank,
            body: Some((
                Point::new(num(tok[3])?, num(tok[4])?, num(tok[5])?),
                Vec3::new(num(tok[7])?, num(tok[8])?, num(tok[9])?),
                Vec3::new(num(tok[11])?, num(tok[12])?, num(tok[13])?),
                Vec3::new(num(tok[15])?, num(tok[16])?, num(tok[17])?),
                num(tok[19])?,
                valid,
            )),
        });
    }
    Ok(out)
}

/// Structural invariant suite over a result directory. Returns one message
/// per violation; an empty list means the directory is consistent.
pub fn validate_outputs(dir: &Path) -> Result<Vec<String>> {
    let loops = parse_loops(&dir.join("loops.txt"))?;
    let poses = parse_poses(&dir.join("poses.txt"))?;
    let mut problems = Vec::new();

    for (i, lp) in loops.iter().enumerate() {
        if lp.rank != i {
            problems.push(format!("loop rank {} at position {i}", lp.rank));
        }
        if lp.vertices.len() < 8 {
            problems.push(format!("loop {i} has only {} vertices", lp.vertices.len()));
        }
        let len = closed_length(&lp.vertices);
        if (len - lp.length).abs() > 1e-9 * lp.length.max(1.0) {
            problems.push(format!(
                "loop {i} states length {} but its vertices sum to {len}",
                lp.length
            ));
        }
        if i > 0 && lp.score < loops[i - 1].score {
            problems.push(format!(
                "loop {i} score {} breaks the ranking order",
                lp.score
            ));
        }
    }

    if poses.len() != loops.len() {
        problems.push(format!(
            "{} pose lines for {} loops",
            poses.len(),
            loops.len()
        ));
    }
    for (i, ps) in poses.iter().enumerate() {
        if ps.rank != i {
            problems.push(format!("pose rank {} at position {i}", ps.rank));
        }
        let Some((origin, dir1, dir2, normal, angle, _valid)) = &ps.body else {
            continue;
        };
        for (name, v) in [("dir1", dir1), ("dir2", dir2), ("normal", normal)] {
            if (v.norm() - 1.0).abs() > 1e-6 {
                problems.push(format!("pose {i} {name} is not unit length"));
            }
        }
        if dir1.dot(dir2).abs() > 1e-6 {
            problems.push(format!("pose {i} dir1 and dir2 are not orthogonal"));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-9).contains(angle) {
            problems.push(format!("pose {i} opening angle {angle} out of range"));
        }
        if let Some(lp) = loops.get(i) {
            let on_loop = lp
                .vertices
                .iter()
                .any(|v| (v - origin).norm() <= 1e-9);
            if !on_loop {
                problems.push(format!("pose {i} origin is not a vertex of loop {i}"));
            }
        }
    }
    Ok(problems)
}
