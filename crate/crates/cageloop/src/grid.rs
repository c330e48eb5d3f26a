//! Labeled voxelization of the embedding space.
//!
//! A cubic grid over the (margin-expanded) cloud bounding box, each voxel
//! center classified by the implicit value f and the convex hull of the
//! offset points:
//!
//! - `Object`      f < 0 — inside the target
//! - `Band`        0 ≤ f < r — the exclusion shell swept by a finger of radius r
//! - `Grasping`    f ≥ r and inside the hull — where loops may live
//! - `OutsideHull` everything else
//!
//! Hull membership allows an absolute slack of `HULL_SLACK_FRAC`·r: the hull
//! of finitely many offset points is inscribed in the offset surface, so for
//! convex objects the f = r level set (exactly where loops must hug the
//! object) would otherwise fall outside it. An r-proportional slack keeps the
//! grasping shell's physical volume stable under grid refinement.

use crate::error::{Error, Result};
use crate::hull::ConvexHull;
use crate::rbf::ImplicitSurface;
use crate::shape::PointCloud;
use crate::{Point, Vec3};
use rayon::prelude::*;

#[repr(u8)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Object = 0,
    Band = 1,
    Grasping = 2,
    OutsideHull = 3,
}

/// Hull membership slack as a fraction of the offset radius.
pub const HULL_SLACK_FRAC: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    /// minimum corner of the grid volume
    pub origin: Point,
    pub spacing: f64,
    pub dims: [usize; 3],
    /// one label per voxel, x-fastest: index = x + nx·(y + ny·z)
    pub labels: Vec<Label>,
    /// implicit values at voxel centers, same layout as `labels`; empty when
    /// the grid was assembled from labels alone
    pub values: Vec<f64>,
    pub offset_radius: f64,
    pub hull: Option<ConvexHull>,
    /// 26-connected components of the GRASPING region, and how many of them
    /// touch the hull boundary (more than one flags a suspect fit)
    pub grasping_components: usize,
    pub hull_touching_components: usize,
}

pub fn build_grid(
    surface: &ImplicitSurface,
    cloud: &PointCloud,
    resolution: usize,
    margin: f64,
) -> Result<VoxelGrid> {
    if resolution < 16 {
        return Err(Error::BadParams(format!(
            "resolution {resolution} < 16"
        )));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::BadParams(format!("margin {margin} must be ≥ 0")));
    }
    let r = surface.offset_radius();
    let (lo, hi) = cloud.bbox();
    let pad = margin * (hi - lo).norm();
    let side = (hi - lo).max() + 2.0 * pad;
    let center = Point::from((lo.coords + hi.coords) / 2.0);
    let origin = center - Vec3::repeat(side / 2.0);
    let spacing = side / resolution as f64;
    let dims = [resolution; 3];
    let n_voxels = resolution * resolution * resolution;

    let centers: Vec<Point> = (0..n_voxels)
        .map(|idx| center_of(idx, &origin, spacing, &dims))
        .collect();
    let values = surface.eval_many(&centers);

    let hull = ConvexHull::build(&cloud.offset_points(r))?;
    let slack = HULL_SLACK_FRAC * r;

    // Per-(y,z) column, intersect the hull's half-spaces with the x-line to
    // get the inside-interval directly; O(planes) per column instead of
    // O(planes) per voxel.
    let nx = dims[0];
    let columns: Vec<(usize, usize)> = (0..dims[1] * dims[2])
        .into_par_iter()
        .map(|col| {
            let y = origin.y + ((col % dims[1]) as f64 + 0.5) * spacing;
            let z = origin.z + ((col / dims[1]) as f64 + 0.5) * spacing;
            let mut xlo = f64::NEG_INFINITY;
            let mut xhi = f64::INFINITY;
            for (n, b) in &hull.planes {
                let t = b + slack - n.y * y - n.z * z;
                if n.x > 1e-12 {
                    xhi = xhi.min(t / n.x);
                } else if n.x < -1e-12 {
                    xlo = xlo.max(t / n.x);
                } else if t < 0.0 {
                    return (1, 0); // empty interval
                }
            }
            if xlo > xhi {
                return (1, 0);
            }
            let ilo = ((xlo - origin.x) / spacing - 0.5).ceil().max(0.0) as usize;
            let ihi = (((xhi - origin.x) / spacing - 0.5).floor() as isize)
                .min(nx as isize - 1);
            if ihi < ilo as isize {
                (1, 0)
            } else {
                (ilo, ihi as usize)
            }
        })
        .collect();

    let labels: Vec<Label> = (0..n_voxels)
        .map(|idx| {
            let f = values[idx];
            if f < 0.0 {
                Label::Object
            } else if f < r {
                Label::Band
            } else {
                let x = idx % nx;
                let (ilo, ihi) = columns[idx / nx];
                if x >= ilo && x <= ihi {
                    Label::Grasping
                } else {
                    Label::OutsideHull
                }
            }
        })
        .collect();

    let mut grid = VoxelGrid {
        origin,
        spacing,
        dims,
        labels,
        values,
        offset_radius: r,
        hull: Some(hull),
        grasping_components: 0,
        hull_touching_components: 0,
    };
    if grid.count(Label::Grasping) == 0 {
        return Err(Error::EmptyGraspingSpace {
            offset: r,
            resolution,
        });
    }
    let (comps, touching) = grid.grasping_component_census();
    grid.grasping_components = comps;
    grid.hull_touching_components = touching;
    Ok(grid)
}

fn center_of(idx: usize, origin: &Point, spacing: f64, dims: &[usize; 3]) -> Point {
    let x = idx % dims[0];
    let y = (idx / dims[0]) % dims[1];
    let z = idx / (dims[0] * dims[1]);
    Point::new(
        origin.x + (x as f64 + 0.5) * spacing,
        origin.y + (y as f64 + 0.5) * spacing,
        origin.z + (z as f64 + 0.5) * spacing,
    )
}

impl VoxelGrid {
    /// Test constructor: labels only, no hull or implicit function attached.
    pub fn from_parts(origin: Point, spacing: f64, dims: [usize; 3], labels: Vec<Label>) -> Self {
        assert_eq!(labels.len(), dims[0] * dims[1] * dims[2]);
        let mut grid = VoxelGrid {
            origin,
            spacing,
            dims,
            labels,
            values: Vec::new(),
            offset_radius: 0.0,
            hull: None,
            grasping_components: 0,
            hull_touching_components: 0,
        };
        let (comps, touching) = grid.grasping_component_census();
        grid.grasping_components = comps;
        grid.hull_touching_components = touching;
        grid
    }

    pub fn num_voxels(&self) -> usize {
        self.labels.len()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.dims[0] && y < self.dims[1] && z < self.dims[2]);
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        [
            idx % self.dims[0],
            (idx / self.dims[0]) % self.dims[1],
            idx / (self.dims[0] * self.dims[1]),
        ]
    }

    pub fn center(&self, idx: usize) -> Point {
        center_of(idx, &self.origin, self.spacing, &self.dims)
    }

    pub fn label(&self, idx: usize) -> Label {
        self.labels[idx]
    }

    /// Voxel containing `p`, if inside the grid volume.
    pub fn voxel_at(&self, p: &Point) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let t = (p[a] - self.origin[a]) / self.spacing;
            if t < 0.0 || t >= self.dims[a] as f64 {
                return None;
            }
            c[a] = t as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    pub fn label_at(&self, p: &Point) -> Option<Label> {
        self.voxel_at(p).map(|i| self.labels[i])
    }

    /// True when `p` lies in a voxel a finger must not enter.
    pub fn blocked_at(&self, p: &Point) -> bool {
        matches!(self.label_at(p), Some(Label::Object) | Some(Label::Band))
    }

    /// Central-difference gradient of the stored implicit values at the
    /// voxel containing `p`. `None` off-grid, on the grid boundary, or when
    /// no field is attached (label-only grids).
    pub fn field_gradient_at(&self, p: &Point) -> Option<Vec3> {
        if self.values.len() != self.labels.len() {
            return None;
        }
        let idx = self.voxel_at(p)?;
        let c = self.coords(idx);
        for a in 0..3 {
            if c[a] == 0 || c[a] + 1 >= self.dims[a] {
                return None;
            }
        }
        let stride = [1, self.dims[0], self.dims[0] * self.dims[1]];
        let mut g = Vec3::zeros();
        for a in 0..3 {
            g[a] = (self.values[idx + stride[a]] - self.values[idx - stride[a]])
                / (2.0 * self.spacing);
        }
        g.iter().all(|x| x.is_finite()).then_some(g)
    }

    pub fn count(&self, which: Label) -> usize {
        self.labels.iter().filter(|&&l| l == which).count()
    }

    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0usize; 4];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    /// Mean of OBJECT voxel centers (uniform-density assumption).
    pub fn centroid_of_object(&self) -> Result<Point> {
        let mut sum = Vec3::zeros();
        let mut count = 0usize;
        for (idx, &l) in self.labels.iter().enumerate() {
            if l == Label::Object {
                sum += self.center(idx).coords;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::NoObjectVoxels);
        }
        Ok(Point::from(sum / count as f64))
    }

    /// The 26 in-grid neighbors of `idx`.
    pub fn neighbors26(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let [x, y, z] = self.coords(idx);
        let (nx, ny, nz) = (self.dims[0] as isize, self.dims[1] as isize, self.dims[2] as isize);
        (0..27).filter_map(move |k| {
            if k == 13 {
                return None;
            }
            let dx = (k % 3) as isize - 1;
            let dy = ((k / 3) % 3) as isize - 1;
            let dz = (k / 9) as isize - 1;
            let (qx, qy, qz) = (x as isize + dx, y as isize + dy, z as isize + dz);
            if qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz {
                None
            } else {
                Some((qx + nx * (qy + ny * qz)) as usize)
            }
        })
    }

    /// (total components, components touching the hull/grid boundary) of the
    /// GRASPING region under 26-connectivity.
    fn grasping_component_census(&self) -> (usize, usize) {
        let mut seen = vec![false; self.labels.len()];
        let mut comps = 0;
        let mut touching = 0;
        for start in 0..self.labels.len() {
            if seen[start] || self.labels[start] != Label::Grasping {
                continue;
            }
            comps += 1;
            let mut touches = false;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                let [x, y, z] = self.coords(v);
                if x == 0
                    || y == 0
                    || z == 0
                    || x == self.dims[0] - 1
                    || y == self.dims[1] - 1
                    || z == self.dims[2] - 1
                {
                    touches = true;
                }
                for nb in self.neighbors26(v) {
                    match self.labels[nb] {
                        Label::Grasping if !seen[nb] => {
                            seen[nb] = true;
                            stack.push(nb);
                        }
                        Label::OutsideHull => touches = true,
                        _ => {}
                    }
                }
            }
            if touches {
                touching += 1;
            }
        }
        (comps, touching)
    }

    /// Debug export: text header, then one ASCII digit per voxel (x-fastest),
    /// wrapped per x-row.
    pub fn write_debug(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(
            w,
            "voxelgrid origin {} {} {} spacing {} dims {} {} {}",
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.spacing,
            self.dims[0],
            self.dims[1],
            self.dims[2]
        )?;
        for (i, &l) in self.labels.iter().enumerate() {
            w.write_all(&[b'0' + l as u8])?;
            if (i + 1) % self.dims[0] == 0 {
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbf::fit_rbf;
    use crate::shape::{generate_shape, ShapeKind};

    fn sphere_grid(resolution: usize) -> VoxelGrid {
        let cloud = generate_shape(ShapeKind::Sphere { radius: 0.1 }, 500, 7).unwrap();
        let surf = fit_rbf(&cloud, 0.02).unwrap();
        build_grid(&surf, &cloud, resolution, 0.15).unwrap()
    }

    #[test]
    fn sphere_labels_match_analytic_radii() {
        let grid = sphere_grid(50);
        let counts = grid.counts();
        assert_eq!(counts.iter().sum::<usize>(), 50 * 50 * 50);
        let slack = HULL_SLACK_FRAC * 0.02;
        for idx in 0..grid.num_voxels() {
            let rho = grid.center(idx).coords.norm();
            match grid.label(idx) {
                // f is only an approximation of the signed distance, so give
                // each analytic radius test one voxel of slop
                Label::Object => assert!(rho < 0.1 + grid.spacing),
                Label::Band => {
                    assert!(rho > 0.1 - grid.spacing && rho < 0.12 + grid.spacing)
                }
                Label::Grasping => {
                    assert!(rho > 0.12 - grid.spacing);
                    assert!(rho < 0.12 + slack + grid.spacing * 1.5);
                }
                Label::OutsideHull => assert!(rho > 0.12 - grid.spacing),
            }
        }
        // the grasping shell is thin but forms one closed component
        assert!(grid.count(Label::Grasping) > 1000);
        assert_eq!(grid.grasping_components, 1);
    }

    #[test]
    fn torus_hole_is_grasping_space() {
        let cloud =
            generate_shape(ShapeKind::Torus { major: 0.08, minor: 0.025 }, 1000, 3).unwrap();
        let surf = fit_rbf(&cloud, 0.01).unwrap();
        let grid = build_grid(&surf, &cloud, 50, 0.15).unwrap();
        // voxel at the ring center: inside the hull, far from the tube
        let hole = grid.voxel_at(&Point::origin()).unwrap();
        assert_eq!(grid.label(hole), Label::Grasping);
        // inside the tube: object
        let tube = grid.voxel_at(&Point::new(0.08, 0.0, 0.0)).unwrap();
        assert_eq!(grid.label(tube), Label::Object);
    }

    #[test]
    fn grasping_volume_stable_under_refinement() {
        let v32 = {
            let g = sphere_grid(32);
            g.count(Label::Grasping) as f64 * g.spacing.powi(3)
        };
        let v64 = {
            let g = sphere_grid(64);
            g.count(Label::Grasping) as f64 * g.spacing.powi(3)
        };
        let rel = (v64 - v32).abs() / v32;
        assert!(rel < 0.15, "volume changed by {:.1}%", rel * 100.0);
    }

    #[test]
    fn centroid_of_sphere_is_origin() {
        let grid = sphere_grid(50);
        let c = grid.centroid_of_object().unwrap();
        assert!(c.coords.norm() < grid.spacing);
    }

    #[test]
    fn centroid_of_unequal_dumbbell_leans_to_larger_ball() {
        // two balls: R1 = 0.06 at −x, R2 = 0.03 at +x, 0.2 apart
        let (r1, r2, d) = (0.06, 0.03, 0.1);
        let a = generate_shape(ShapeKind::Sphere { radius: r1 }, 500, 1).unwrap();
        let b = generate_shape(ShapeKind::Sphere { radius: r2 }, 500, 2).unwrap();
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for (p, n) in a.points.iter().zip(&a.normals) {
            points.push(p + Vec3::new(-d, 0.0, 0.0));
            normals.push(*n);
        }
        for (p, n) in b.points.iter().zip(&b.normals) {
            points.push(p + Vec3::new(d, 0.0, 0.0));
            normals.push(*n);
        }
        let cloud = PointCloud::new(points, normals).unwrap();
        let surf = fit_rbf(&cloud, 0.01).unwrap();
        let grid = build_grid(&surf, &cloud, 64, 0.15).unwrap();
        let c = grid.centroid_of_object().unwrap();
        // closed-form volume-weighted centroid of the two balls
        let (v1, v2) = (r1.powi(3), r2.powi(3));
        let expect = (v1 * -d + v2 * d) / (v1 + v2);
        assert!(
            (c.x - expect).abs() < 2.0 * grid.spacing,
            "centroid {} vs analytic {}",
            c.x,
            expect
        );
        assert!(c.y.abs() < 2.0 * grid.spacing && c.z.abs() < 2.0 * grid.spacing);
    }

    #[test]
    fn grasping_voxels_respect_their_invariants() {
        let cloud =
            generate_shape(ShapeKind::Torus { major: 0.08, minor: 0.025 }, 800, 3).unwrap();
        let surf = fit_rbf(&cloud, 0.01).unwrap();
        let grid = build_grid(&surf, &cloud, 40, 0.15).unwrap();
        let hull = grid.hull.as_ref().unwrap();
        let slack = HULL_SLACK_FRAC * 0.01;
        for idx in 0..grid.num_voxels() {
            let v = grid.center(idx);
            match grid.label(idx) {
                Label::Grasping => {
                    assert!(surf.eval(&v) >= 0.01);
                    assert!(hull.contains(&v, slack + 1e-9));
                }
                Label::Object => assert!(surf.eval(&v) < 0.0),
                _ => {}
            }
        }
    }

    #[test]
    fn low_resolution_rejected() {
        let cloud = generate_shape(ShapeKind::Sphere { radius: 0.1 }, 300, 7).unwrap();
        let surf = fit_rbf(&cloud, 0.02).unwrap();
        assert!(matches!(
            build_grid(&surf, &cloud, 15, 0.15),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn debug_export_shape() {
        let grid = sphere_grid(32);
        let mut buf = Vec::new();
        grid.write_debug(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("voxelgrid origin"));
        assert_eq!(lines.clone().count(), 32 * 32);
        assert!(lines.all(|l| l.len() == 32 && l.bytes().all(|b| (b'0'..=b'3').contains(&b))));
    }
}
