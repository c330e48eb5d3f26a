//! Discrete Morse analysis of a distance field and loop tracing.
//!
//! Each voxel with finite distance is classified by the signs of its six
//! face neighbors ('+' = neighbor has a higher value, '−' otherwise, ties
//! broken by voxel index). A saddle — the '−' set a union of one or two
//! complete opposite pairs — or a maximum (all '−') witnesses two shortest
//! paths leaving in opposite directions; stitching them together through the
//! base point yields a caging-loop candidate.
//!
//! Sign conventions at the domain boundary: a neighbor outside the grid or
//! outside the GRASPING region has no higher value, so it counts '−'. This
//! matters: the grasping shell is often only one or two voxels thick, and
//! with wall neighbors '−' the radial pair is auto-complete, so the
//! classification degenerates to 2D Morse theory of the field restricted to
//! the shell — a distance maximum hugging the hull still classifies as
//! MAXIMUM. Descent into a wall is impossible anyway: tracing only accepts
//! pairs whose neighbors both carry finite distances. A voxel with an
//! unreached GRASPING face neighbor is REGULAR by fiat (the sweep frontier is
//! not trustworthy terrain).

use crate::dfield::{DistanceField, NO_PRED};
use crate::error::{Error, Result};
use crate::grid::{Label, VoxelGrid};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Saddle,
    Maximum,
    Minimum,
    Regular,
}

/// Face-neighbor order for the sign bits: −x, +x, −y, +y, −z, +z.
/// Bit set ⇔ '+'. Axis a owns bits 2a and 2a+1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub voxel: usize,
    pub kind: CriticalKind,
    pub signs: u8,
    pub value: f64,
}

/// Per-loop score components filled by the refinement stage; `total` is the
/// weighted sum used for ranking (lower is better).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoopScores {
    pub centroid_dist: f64,
    pub horizontality: f64,
    pub length_fit: f64,
    pub residual: f64,
    pub total: f64,
}

/// Closed polyline in embedding space (first vertex implicitly follows the
/// last). `base` is the base point p the loop is anchored at; `source` the
/// critical point that generated it.
#[derive(Debug, Clone)]
pub struct CagingLoop {
    pub vertices: Vec<Point>,
    pub base: Point,
    pub base_voxel: usize,
    pub source: CriticalPoint,
    pub length: f64,
    pub scores: LoopScores,
}

impl CagingLoop {
    /// Sum of consecutive vertex distances including the closing edge.
    pub fn computed_length(&self) -> f64 {
        let m = self.vertices.len();
        (0..m)
            .map(|i| (self.vertices[(i + 1) % m] - self.vertices[i]).norm())
            .sum()
    }

    pub fn recompute_length(&mut self) {
        self.length = self.computed_length();
    }

    /// Centroid of the loop vertices.
    pub fn center(&self) -> Point {
        let sum: crate::Vec3 = self.vertices.iter().map(|v| v.coords).sum();
        Point::from(sum / self.vertices.len() as f64)
    }

    /// True when no two non-adjacent segments come within `tol`.
    pub fn is_simple(&self, tol: f64) -> bool {
        let m = self.vertices.len();
        for i in 0..m {
            for j in (i + 1)..m {
                // skip adjacent segments (sharing a vertex), incl. the wrap
                if j == i + 1 || (i == 0 && j == m - 1) {
                    continue;
                }
                let d = segment_distance(
                    &self.vertices[i],
                    &self.vertices[(i + 1) % m],
                    &self.vertices[j],
                    &self.vertices[(j + 1) % m],
                );
                if d < tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Minimum distance between segments [a0,a1] and [b0,b1].
fn segment_distance(a0: &Point, a1: &Point, b0: &Point, b1: &Point) -> f64 {
    let u = a1 - a0;
    let v = b1 - b0;
    let w = a0 - b0;
    let (a, b, c, d, e) = (u.dot(&u), u.dot(&v), v.dot(&v), u.dot(&w), v.dot(&w));
    let denom = a * c - b * b;
    let s0 = if denom > 1e-30 {
        ((b * e - c * d) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let t = if c > 1e-30 {
        ((b * s0 + e) / c).clamp(0.0, 1.0)
    } else {
        0.0
    };
    // one re-projection pass tightens s against the clamped t
    let s = if a > 1e-30 {
        ((b * t - d) / a).clamp(0.0, 1.0)
    } else {
        s0
    };
    ((a0 + s * u) - (b0 + t * v)).norm()
}

/// (dist, index) lexicographic comparison: is voxel `a` lower than `b`?
fn lower(field: &DistanceField, a: usize, b: usize) -> bool {
    match field.dist[a].partial_cmp(&field.dist[b]) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Greater) => false,
        _ => a < b,
    }
}

pub fn classify(field: &DistanceField, grid: &VoxelGrid, voxel: usize) -> CriticalPoint {
    let value = field.dist[voxel];
    let mut signs: u8 = 0;
    if !value.is_finite() {
        return CriticalPoint {
            voxel,
            kind: CriticalKind::Regular,
            signs,
            value,
        };
    }
    let [x, y, z] = grid.coords(voxel);
    let dims = grid.dims;
    let offsets: [(isize, isize, isize); 6] = [
        (-1, 0, 0),
        (1, 0, 0),
        (0, -1, 0),
        (0, 1, 0),
        (0, 0, -1),
        (0, 0, 1),
    ];
    for (bit, &(dx, dy, dz)) in offsets.iter().enumerate() {
        let (qx, qy, qz) = (x as isize + dx, y as isize + dy, z as isize + dz);
        let inside = qx >= 0
            && qy >= 0
            && qz >= 0
            && qx < dims[0] as isize
            && qy < dims[1] as isize
            && qz < dims[2] as isize;
        if !inside {
            continue; // no value out there: '−'
        }
        let nb = (qx as usize) + dims[0] * ((qy as usize) + dims[1] * (qz as usize));
        if grid.label(nb) != Label::Grasping {
            continue; // wall: no higher value, '−'
        }
        if !field.dist[nb].is_finite() {
            // unswept terrain adjacent: not classifiable
            return CriticalPoint {
                voxel,
                kind: CriticalKind::Regular,
                signs: 0,
                value,
            };
        }
        if lower(field, voxel, nb) {
            signs |= 1 << bit;
        }
    }
    CriticalPoint {
        voxel,
        kind: kind_of(signs),
        signs,
        value,
    }
}

/// Classification truth table over the 64 sign patterns.
pub fn kind_of(signs: u8) -> CriticalKind {
    let minus = !signs & 0x3F;
    if minus == 0x3F {
        return CriticalKind::Maximum;
    }
    if minus == 0 {
        return CriticalKind::Minimum;
    }
    // saddle ⇔ the '−' set is a union of complete opposite pairs
    let pairs_complete = (0..3).all(|a| {
        let pair = (minus >> (2 * a)) & 0b11;
        pair == 0b00 || pair == 0b11
    });
    if pairs_complete {
        CriticalKind::Saddle
    } else {
        CriticalKind::Regular
    }
}

/// Axes (0 = x, 1 = y, 2 = z) whose opposite neighbors are both '−'.
pub fn minus_pairs(signs: u8) -> Vec<usize> {
    let minus = !signs & 0x3F;
    (0..3)
        .filter(|a| (minus >> (2 * a)) & 0b11 == 0b11)
        .collect()
}

/// All saddles and maxima of the field, ascending voxel index.
pub fn find_critical_points(field: &DistanceField, grid: &VoxelGrid) -> Vec<CriticalPoint> {
    (0..grid.num_voxels())
        .filter(|&v| field.dist[v].is_finite())
        .map(|v| classify(field, grid, v))
        .filter(|cp| matches!(cp.kind, CriticalKind::Saddle | CriticalKind::Maximum))
        .collect()
}

/// One traced loop per qualifying '−/−' pair of `q` (saddles can carry two).
pub fn trace_loops(
    field: &DistanceField,
    grid: &VoxelGrid,
    q: &CriticalPoint,
) -> Vec<Result<CagingLoop>> {
    let no_pair = || {
        vec![Err(Error::DegenerateLoop {
            voxel: q.voxel,
            msg: "no traceable descent pair".into(),
        })]
    };
    let axes: Vec<usize> = match q.kind {
        CriticalKind::Saddle => minus_pairs(q.signs)
            .into_iter()
            .filter(|&a| traceable_axis(field, grid, q.voxel, a))
            .collect(),
        CriticalKind::Maximum => {
            // steepest descent: the traceable pair with the smallest dist sum
            (0..3)
                .filter(|&a| traceable_axis(field, grid, q.voxel, a))
                .min_by(|&a, &b| {
                    let sa = pair_sum(field, grid, q.voxel, a);
                    let sb = pair_sum(field, grid, q.voxel, b);
                    sa.total_cmp(&sb)
                })
                .into_iter()
                .collect()
        }
        _ => {
            debug_assert!(false, "tracing from a non-critical point");
            return Vec::new();
        }
    };
    if axes.is_empty() {
        return no_pair();
    }
    axes.into_iter()
        .map(|axis| trace_axis(field, grid, q, axis))
        .collect()
}

/// The first (or only) traced loop for `q`.
pub fn trace_loop(field: &DistanceField, grid: &VoxelGrid, q: &CriticalPoint) -> Result<CagingLoop> {
    trace_loops(field, grid, q)
        .into_iter()
        .next()
        .unwrap_or_else(|| {
            Err(Error::DegenerateLoop {
                voxel: q.voxel,
                msg: "no qualifying descent pair".into(),
            })
        })
}

/// Both axis neighbors exist, lie in GRASPING, and were reached by the sweep.
fn traceable_axis(field: &DistanceField, grid: &VoxelGrid, voxel: usize, axis: usize) -> bool {
    let c = grid.coords(voxel);
    if c[axis] == 0 || c[axis] + 1 >= grid.dims[axis] {
        return false;
    }
    axis_neighbors(grid, voxel, axis)
        .iter()
        .all(|&n| grid.label(n) == Label::Grasping && field.dist[n].is_finite())
}

fn pair_sum(field: &DistanceField, grid: &VoxelGrid, voxel: usize, axis: usize) -> f64 {
    let [a, b] = axis_neighbors(grid, voxel, axis);
    field.dist[a] + field.dist[b]
}

fn axis_neighbors(grid: &VoxelGrid, voxel: usize, axis: usize) -> [usize; 2] {
    let c = grid.coords(voxel);
    let stride = match axis {
        0 => 1,
        1 => grid.dims[0],
        _ => grid.dims[0] * grid.dims[1],
    };
    debug_assert!(c[axis] > 0 && c[axis] + 1 < grid.dims[axis]);
    [voxel - stride, voxel + stride]
}

fn trace_axis(
    field: &DistanceField,
    grid: &VoxelGrid,
    q: &CriticalPoint,
    axis: usize,
) -> Result<CagingLoop> {
    let [n1, n2] = axis_neighbors(grid, q.voxel, axis);
    let path1 = pred_path(field, n1, q.voxel)?;
    let path2 = pred_path(field, n2, q.voxel)?;
    // the two descents must stay disjoint until the base (q counts: a fake
    // saddle whose "descent" neighbor actually ascends routes back through q)
    let mut on1: std::collections::HashSet<usize> =
        path1.iter().copied().filter(|&v| v != field.base).collect();
    on1.insert(q.voxel);
    if let Some(&m) = path2.iter().find(|&&v| v != field.base && on1.contains(&v)) {
        return Err(Error::DegenerateLoop {
            voxel: q.voxel,
            msg: format!("descent paths merge at voxel {m} before the base"),
        });
    }
    // vertex cycle: base … n1, q, n2 … (closing edge back to base implied)
    let mut voxels: Vec<usize> = path1.iter().rev().copied().collect(); // base … n1
    voxels.push(q.voxel);
    voxels.extend(path2.iter().copied().filter(|&v| v != field.base)); // n2 …
    if voxels.len() < 8 {
        return Err(Error::DegenerateLoop {
            voxel: q.voxel,
            msg: format!("{} vertices (< 8)", voxels.len()),
        });
    }
    let vertices: Vec<Point> = voxels.iter().map(|&v| grid.center(v)).collect();
    let mut lp = CagingLoop {
        base: grid.center(field.base),
        base_voxel: field.base,
        source: *q,
        length: 0.0,
        scores: LoopScores::default(),
        vertices,
    };
    lp.recompute_length();
    Ok(lp)
}

/// Pred chain `start → … → base`, inclusive.
fn pred_path(field: &DistanceField, start: usize, origin: usize) -> Result<Vec<usize>> {
    if !field.dist[start].is_finite() {
        return Err(Error::DegenerateLoop {
            voxel: origin,
            msg: "descent neighbor unreached".into(),
        });
    }
    let mut path = vec![start];
    let mut cur = start;
    while cur != field.base {
        let p = field.pred[cur];
        debug_assert_ne!(p, NO_PRED, "finite voxel without predecessor");
        cur = p as usize;
        path.push(cur);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfield::tests::free_grid;
    use crate::dfield::{compute_field, DistanceField, NO_PRED};
    use crate::grid::VoxelGrid;
    use crate::Vec3;

    #[test]
    fn truth_table_64_patterns() {
        // independent statement of the table: '−' masks that are exactly a
        // union of complete opposite pairs
        let saddle_minus: [u8; 6] = [0b000011, 0b001100, 0b110000, 0b001111, 0b110011, 0b111100];
        for signs in 0u8..64 {
            let minus = !signs & 0x3F;
            let expect = if minus == 0x3F {
                CriticalKind::Maximum
            } else if minus == 0 {
                CriticalKind::Minimum
            } else if saddle_minus.contains(&minus) {
                CriticalKind::Saddle
            } else {
                CriticalKind::Regular
            };
            assert_eq!(kind_of(signs), expect, "signs {signs:06b}");
        }
        let n_saddle = (0u8..64)
            .filter(|&s| kind_of(s) == CriticalKind::Saddle)
            .count();
        assert_eq!(n_saddle, 6);
    }

    /// 3×3×3 all-GRASPING grid with a hand-built field putting the chosen
    /// sign pattern at the center voxel.
    fn synthetic_center_field(signs: u8) -> (VoxelGrid, DistanceField, usize) {
        let grid = free_grid(3, 1.0);
        let center = grid.index(1, 1, 1);
        let mut dist = vec![5.0; 27];
        dist[center] = 3.0;
        let offsets = [
            (0usize, -1isize, 0isize, 0isize),
            (1, 1, 0, 0),
            (2, 0, -1, 0),
            (3, 0, 1, 0),
            (4, 0, 0, -1),
            (5, 0, 0, 1),
        ];
        for (bit, dx, dy, dz) in offsets {
            let v = grid.index(
                (1 + dx) as usize,
                (1 + dy) as usize,
                (1 + dz) as usize,
            );
            dist[v] = if signs & (1 << bit) != 0 { 4.0 } else { 2.0 };
        }
        let field = DistanceField {
            base: 0,
            dist,
            pred: vec![NO_PRED; 27],
            cap: f64::INFINITY,
        };
        (grid, field, center)
    }

    #[test]
    fn classify_reads_signs_from_field() {
        // x pair '−', rest '+': saddle along x
        let (grid, field, center) = synthetic_center_field(0b111100);
        let cp = classify(&field, &grid, center);
        assert_eq!(cp.kind, CriticalKind::Saddle);
        assert_eq!(cp.signs, 0b111100);
        assert_eq!(minus_pairs(cp.signs), vec![0]);

        let (grid, field, center) = synthetic_center_field(0b000000);
        assert_eq!(classify(&field, &grid, center).kind, CriticalKind::Maximum);

        let (grid, field, center) = synthetic_center_field(0b111111);
        assert_eq!(classify(&field, &grid, center).kind, CriticalKind::Minimum);

        // lone '−' at −x: regular
        let (grid, field, center) = synthetic_center_field(0b111110);
        assert_eq!(classify(&field, &grid, center).kind, CriticalKind::Regular);
    }

    #[test]
    fn exact_ties_break_by_voxel_index() {
        let grid = free_grid(3, 1.0);
        let center = grid.index(1, 1, 1);
        let field = DistanceField {
            base: 0,
            dist: vec![3.0; 27], // everything equal: index decides
            pred: vec![NO_PRED; 27],
            cap: f64::INFINITY,
        };
        let cp = classify(&field, &grid, center);
        // lower-index neighbors (−x, −y, −z) count '−'; higher count '+'
        assert_eq!(cp.signs, 0b101010);
        assert_eq!(cp.kind, CriticalKind::Regular);
    }

    #[test]
    fn unreached_grasping_neighbor_forces_regular() {
        let (grid, mut field, center) = synthetic_center_field(0b000000);
        field.dist[grid.index(0, 1, 1)] = f64::INFINITY;
        assert_eq!(classify(&field, &grid, center).kind, CriticalKind::Regular);
    }

    #[test]
    fn free_space_has_no_critical_points() {
        let grid = free_grid(15, 1.0);
        let base = grid.index(7, 7, 7);
        // cap inside the grid: everything swept is interior, nothing critical
        let field = compute_field(&grid, base, 4.0).unwrap();
        let cps = find_critical_points(&field, &grid);
        assert!(cps.is_empty(), "critical points inside free ball: {cps:?}");
        // full sweep: grid-boundary voxels may classify (walls count '−'),
        // but the radially increasing interior stays free of criticals and
        // boundary artifacts never yield a traceable pair
        let field = compute_field(&grid, base, 1e9).unwrap();
        for cp in find_critical_points(&field, &grid) {
            let [x, y, z] = grid.coords(cp.voxel);
            assert!(
                [x, y, z].iter().any(|&c| c == 0 || c == 14),
                "interior critical point {cp:?}"
            );
            assert!(trace_loops(&field, &grid, &cp)
                .iter()
                .all(|r| matches!(r, Err(Error::DegenerateLoop { .. }))));
        }
    }

    /// Synthetic spherical shell: GRASPING between radii, OBJECT inside.
    fn shell_grid(n: usize) -> VoxelGrid {
        let mut labels = vec![crate::grid::Label::OutsideHull; n * n * n];
        let grid = VoxelGrid::from_parts(Point::origin(), 1.0, [n; 3], labels.clone());
        let c = grid.center(grid.index(n / 2, n / 2, n / 2));
        let r_in = n as f64 * 0.30;
        let r_out = n as f64 * 0.42;
        for v in 0..grid.num_voxels() {
            let rho = (grid.center(v) - c).norm();
            labels[v] = if rho < r_in {
                crate::grid::Label::Object
            } else if rho <= r_out {
                crate::grid::Label::Grasping
            } else {
                crate::grid::Label::OutsideHull
            };
        }
        VoxelGrid::from_parts(Point::origin(), 1.0, [n; 3], labels)
    }

    #[test]
    fn spherical_shell_has_maximum_near_antipode() {
        let n = 21;
        let grid = shell_grid(n);
        let mid = n / 2;
        // base on the +x side of the shell, mid-thickness
        let base = grid.index(mid + (n as f64 * 0.36) as usize, mid, mid);
        assert_eq!(grid.label(base), crate::grid::Label::Grasping);
        let field = compute_field(&grid, base, 1e9).unwrap();
        let cps = find_critical_points(&field, &grid);
        let c = grid.center(grid.index(mid, mid, mid));
        let bdir = (grid.center(base) - c).normalize();
        let maxima: Vec<&CriticalPoint> = cps
            .iter()
            .filter(|cp| cp.kind == CriticalKind::Maximum)
            .collect();
        assert!(!maxima.is_empty(), "no maxima found");
        assert!(maxima.iter().any(|cp| {
            let dir = (grid.center(cp.voxel) - c).normalize();
            dir.dot(&bdir) < -0.8 // within ~37° of the antipode
        }));
    }

    #[test]
    fn traced_loop_on_shell_passes_base_and_critical_point() {
        let n = 21;
        let grid = shell_grid(n);
        let mid = n / 2;
        let base = grid.index(mid + (n as f64 * 0.36) as usize, mid, mid);
        let field = compute_field(&grid, base, 1e9).unwrap();
        let cps = find_critical_points(&field, &grid);
        let mut traced = 0;
        for cp in &cps {
            for lp in trace_loops(&field, &grid, cp).into_iter().flatten() {
                traced += 1;
                assert_eq!(lp.vertices[0], grid.center(base));
                assert!(lp.vertices.contains(&grid.center(cp.voxel)));
                assert!((lp.length - lp.computed_length()).abs() < 1e-9);
                assert!(lp.length >= 2.0 * field.dist[cp.voxel] - 2.0 * 3f64.sqrt());
                assert!(lp.length <= 2.0 * field.cap.min(1e8));
                for v in &lp.vertices {
                    let idx = grid.voxel_at(v).unwrap();
                    assert_eq!(grid.label(idx), crate::grid::Label::Grasping);
                }
                assert!(lp.is_simple(0.5));
            }
        }
        assert!(traced >= 1, "no loop traced on the shell");
    }

    #[test]
    fn saddle_adjacent_to_base_is_degenerate() {
        let grid = free_grid(5, 1.0);
        let base = grid.index(2, 2, 2);
        let field = compute_field(&grid, base, 1e9).unwrap();
        // fake a saddle right next to the base: tracing must refuse it
        let q = CriticalPoint {
            voxel: grid.index(3, 2, 2),
            kind: CriticalKind::Saddle,
            signs: 0b111100,
            value: field.dist[grid.index(3, 2, 2)],
        };
        let results = trace_loops(&field, &grid, &q);
        assert!(results
            .iter()
            .all(|r| matches!(r, Err(Error::DegenerateLoop { .. }))));
    }

    #[test]
    fn two_pair_saddle_emits_two_loops() {
        let n = 21;
        let grid = shell_grid(n);
        let mid = n / 2;
        let base = grid.index(mid + (n as f64 * 0.36) as usize, mid, mid);
        let field = compute_field(&grid, base, 1e9).unwrap();
        // pick a voxel whose x and y pairs are both traceable and force a
        // two-pair sign pattern: the tracer must attempt both axes
        let v = (0..grid.num_voxels())
            .find(|&v| {
                field.dist[v].is_finite()
                    && v != base
                    && traceable_axis(&field, &grid, v, 0)
                    && traceable_axis(&field, &grid, v, 1)
            })
            .expect("no interior voxel in the shell");
        let fake = CriticalPoint {
            voxel: v,
            kind: CriticalKind::Saddle,
            signs: 0b110000, // '−' pairs on x and y
            value: field.dist[v],
        };
        let results = trace_loops(&field, &grid, &fake);
        assert_eq!(results.len(), 2);
    }

    #[test]
    fn saddle_with_wall_pair_is_untraceable() {
        let n = 21;
        let grid = shell_grid(n);
        let mid = n / 2;
        let base = grid.index(mid + (n as f64 * 0.36) as usize, mid, mid);
        let field = compute_field(&grid, base, 1e9).unwrap();
        // a shell voxel with a wall on some axis: force the '−' pair there
        let (v, axis) = (0..grid.num_voxels())
            .filter(|&v| field.dist[v].is_finite())
            .find_map(|v| {
                (0..3)
                    .find(|&a| !traceable_axis(&field, &grid, v, a))
                    .map(|a| (v, a))
            })
            .unwrap();
        let fake = CriticalPoint {
            voxel: v,
            kind: CriticalKind::Saddle,
            signs: !(0b11 << (2 * axis)) & 0x3F,
            value: field.dist[v],
        };
        let results = trace_loops(&field, &grid, &fake);
        assert!(matches!(
            results.as_slice(),
            [Err(Error::DegenerateLoop { .. })]
        ));
    }

    #[test]
    fn great_circle_loop_length_on_offset_sphere() {
        use crate::grid::build_grid;
        use crate::rbf::fit_rbf;
        use crate::shape::{generate_shape, ShapeKind};
        let (big_r, r) = (0.1, 0.02);
        let cloud = generate_shape(ShapeKind::Sphere { radius: big_r }, 500, 7).unwrap();
        let surf = fit_rbf(&cloud, r).unwrap();
        let grid = build_grid(&surf, &cloud, 50, 0.15).unwrap();
        // base: a grasping voxel near (0.12, 0, 0)
        let base = grid
            .voxel_at(&Point::new(big_r + r + 0.5 * grid.spacing, 0.0, 0.0))
            .filter(|&v| grid.label(v) == crate::grid::Label::Grasping)
            .unwrap_or_else(|| {
                (0..grid.num_voxels())
                    .filter(|&v| grid.label(v) == crate::grid::Label::Grasping)
                    .min_by(|&a, &b| {
                        let pa = (grid.center(a) - Point::new(0.12, 0.0, 0.0)).norm();
                        let pb = (grid.center(b) - Point::new(0.12, 0.0, 0.0)).norm();
                        pa.total_cmp(&pb)
                    })
                    .unwrap()
            });
        let field = compute_field(&grid, base, 1e9).unwrap();
        let cps = find_critical_points(&field, &grid);
        let maxima: Vec<_> = cps
            .iter()
            .filter(|c| c.kind == CriticalKind::Maximum)
            .collect();
        assert!(!maxima.is_empty());
        // the deepest maximum sits near the antipode; its loop is a great circle
        let top = maxima
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap();
        let antipode = Point::new(-(big_r + r), 0.0, 0.0);
        assert!((grid.center(top.voxel) - antipode).norm() < 4.0 * grid.spacing + 0.5 * r);
        let lp = trace_loop(&field, &grid, top).unwrap();
        let expect = std::f64::consts::TAU * (big_r + r);
        assert!(
            (lp.length / expect - 1.0).abs() < 0.10,
            "length {} vs great circle {expect}",
            lp.length
        );
        let _ = Vec3::zeros();
    }
}
