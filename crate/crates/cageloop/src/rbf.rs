//! Biharmonic RBF implicit surface fitted to an oriented cloud.
//!
//! f(x) = Σ wⱼ‖x − cⱼ‖ + p₀ + p₁x + p₂y + p₃z, with interpolation
//! constraints f(xᵢ) = 0 on the surface samples and f(xᵢ + r·nᵢ) = r on the
//! outward offsets, plus the four side conditions Σw = Σwx = Σwy = Σwz = 0.
//! The level set f = 0 approximates the surface and f = r its r-offset, so
//! downstream labeling reads f directly: negative inside, ≥ r in free space.

use crate::error::{Error, Result};
use crate::shape::PointCloud;
use crate::Point;
use faer::prelude::Solve;
use faer::Mat;
use rayon::prelude::*;

/// Largest cloud accepted by the dense solve: (2·4000 + 4)² doubles ≈ 0.5 GB.
pub const DEFAULT_POINT_CAP: usize = 4000;

/// Interpolation residual bound, relative to the offset radius.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ImplicitSurface {
    centers: Vec<Point>,
    weights: Vec<f64>,
    poly: [f64; 4],
    offset_radius: f64,
}

pub fn fit_rbf(cloud: &PointCloud, offset_radius: f64) -> Result<ImplicitSurface> {
    fit_rbf_capped(cloud, offset_radius, DEFAULT_POINT_CAP)
}

pub fn fit_rbf_capped(
    cloud: &PointCloud,
    offset_radius: f64,
    cap: usize,
) -> Result<ImplicitSurface> {
    if !(offset_radius > 0.0 && offset_radius.is_finite()) {
        return Err(Error::BadParams(format!(
            "offset radius {offset_radius} must be positive"
        )));
    }
    let n = cloud.len();
    if n > cap {
        return Err(Error::TooManyPoints { n, cap });
    }
    let mut centers = cloud.points.clone();
    centers.extend(cloud.offset_points(offset_radius));
    let m = 2 * n;
    let dim = m + 4;

    let a = Mat::from_fn(dim, dim, |i, j| match (i < m, j < m) {
        (true, true) => (centers[i] - centers[j]).norm(),
        (true, false) => poly_term(&centers[i], j - m),
        (false, true) => poly_term(&centers[j], i - m),
        (false, false) => 0.0,
    });
    let rhs = Mat::from_fn(dim, 1, |i, _| {
        if i >= n && i < m {
            offset_radius
        } else {
            0.0
        }
    });
    let lu = a.partial_piv_lu();
    let sol = lu.solve(&rhs);

    let surface = ImplicitSurface {
        weights: (0..m).map(|i| sol[(i, 0)]).collect(),
        poly: [sol[(m, 0)], sol[(m + 1, 0)], sol[(m + 2, 0)], sol[(m + 3, 0)]],
        centers,
        offset_radius,
    };

    // Interpolation residual doubles as the singularity check: coincident
    // constraint points produce unusable solutions here.
    let tol = RESIDUAL_TOL * offset_radius;
    let mut worst = 0.0f64;
    for (i, c) in surface.centers.iter().enumerate() {
        let want = if i < n { 0.0 } else { offset_radius };
        let r = (surface.eval(c) - want).abs();
        worst = worst.max(r);
        if !(r <= tol) {
            return Err(Error::SingularSystem(format!(
                "constraint residual {r:.3e} at point {} exceeds {tol:.3e}; \
                 input likely contains coincident or offset-coincident points",
                i % n
            )));
        }
    }
    let _ = worst;
    Ok(surface)
}

fn poly_term(p: &Point, k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => p.x,
        2 => p.y,
        _ => p.z,
    }
}

impl ImplicitSurface {
    pub fn eval(&self, p: &Point) -> f64 {
        let mut acc = self.poly[0] + self.poly[1] * p.x + self.poly[2] * p.y + self.poly[3] * p.z;
        for (c, w) in self.centers.iter().zip(&self.weights) {
            acc += w * (p - c).norm();
        }
        acc
    }

    /// Parallel evaluation preserving input order.
    pub fn eval_many(&self, points: &[Point]) -> Vec<f64> {
        points.par_iter().map(|p| self.eval(p)).collect()
    }

    pub fn offset_radius(&self) -> f64 {
        self.offset_radius
    }

    /// The 2n constraint centers: surface samples first, then offsets.
    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{generate_shape, ShapeKind};
    use crate::Vec3;

    fn sphere_surface() -> (PointCloud, ImplicitSurface) {
        let cloud = generate_shape(ShapeKind::Sphere { radius: 0.1 }, 400, 7).unwrap();
        let surf = fit_rbf(&cloud, 0.02).unwrap();
        (cloud, surf)
    }

    #[test]
    fn signs_inside_on_and_beyond_the_surface() {
        let (_, surf) = sphere_surface();
        assert!(surf.eval(&Point::origin()) < 0.0);
        // at the offset shell f ≈ r, outside it f stays ≥ r − slack
        for dir in [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0).normalize()] {
            let on = Point::from(dir * 0.1);
            let shell = Point::from(dir * 0.12);
            let far = Point::from(dir * 0.2);
            assert!(surf.eval(&on).abs() < 2e-3, "f(on) = {}", surf.eval(&on));
            assert!((surf.eval(&shell) - 0.02).abs() < 5e-3);
            assert!(surf.eval(&far) > 0.02);
        }
    }

    #[test]
    fn constraints_interpolated_to_tolerance() {
        let (cloud, surf) = sphere_surface();
        let r = 0.02;
        for (i, p) in cloud.points.iter().enumerate() {
            assert!(surf.eval(p).abs() <= RESIDUAL_TOL * r);
            let off = p + r * cloud.normals[i];
            assert!((surf.eval(&off) - r).abs() <= RESIDUAL_TOL * r);
        }
    }

    #[test]
    fn side_conditions_hold() {
        let (_, surf) = sphere_surface();
        let w_sum: f64 = surf.weights().iter().sum();
        let mut moment = Vec3::zeros();
        for (c, w) in surf.centers().iter().zip(surf.weights()) {
            moment += *w * c.coords;
        }
        assert!(w_sum.abs() < 1e-8, "Σw = {w_sum:e}");
        assert!(moment.norm() < 1e-8, "Σw·c = {moment:?}");
    }

    #[test]
    fn too_many_points_rejected() {
        let cloud = generate_shape(ShapeKind::Sphere { radius: 0.1 }, 200, 7).unwrap();
        assert!(matches!(
            fit_rbf_capped(&cloud, 0.02, 100),
            Err(Error::TooManyPoints { n: 200, cap: 100 })
        ));
    }

    #[test]
    fn offset_coincident_point_is_singular() {
        let mut cloud = generate_shape(ShapeKind::Sphere { radius: 0.1 }, 200, 7).unwrap();
        let r = 0.02;
        // place point 1 exactly on point 0's offset location with the same
        // normal: two constraint centers coincide and the system degenerates
        cloud.points[1] = cloud.points[0] + r * cloud.normals[0];
        cloud.normals[1] = cloud.normals[0];
        assert!(matches!(
            fit_rbf(&cloud, r),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn deterministic_weights() {
        let cloud = generate_shape(ShapeKind::Torus { major: 0.08, minor: 0.025 }, 300, 3).unwrap();
        let a = fit_rbf(&cloud, 0.01).unwrap();
        let b = fit_rbf(&cloud, 0.01).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.poly, b.poly);
    }

    #[test]
    fn torus_hole_is_outside_the_object() {
        let cloud = generate_shape(ShapeKind::Torus { major: 0.08, minor: 0.025 }, 600, 3).unwrap();
        let surf = fit_rbf(&cloud, 0.01).unwrap();
        // center of the hole is free space: f well above 0
        assert!(surf.eval(&Point::origin()) > 0.0);
        // inside the tube is object
        assert!(surf.eval(&Point::new(0.08, 0.0, 0.0)) < 0.0);
    }
}
