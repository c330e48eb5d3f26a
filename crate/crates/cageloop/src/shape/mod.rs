//! Target-shape input: point clouds, analytic generators, normal and
//! curvature estimation, file I/O.

use crate::error::{Error, Result};
use crate::knn::NeighborIndex;
use crate::{Point, Vec3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub mod curvature;
pub mod generate;
pub mod io;
pub mod normals;

pub use curvature::estimate_curvatures;
pub use generate::{generate_shape, ShapeKind};
pub use io::{load_shape, save_points, ShapeFormat};
pub use normals::estimate_normals;

/// Oriented point samples of the target surface.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub normals: Vec<Vec3>,
}

/// A cloud point annotated with principal curvatures, k1 ≥ k2.
/// Sign convention: both negative on locally convex exterior regions.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSamplePoint {
    pub position: Point,
    pub normal: Vec3,
    pub k1: f64,
    pub k2: f64,
}

/// Two points closer than this are considered coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;
/// Normals must be unit length to within this.
pub const UNIT_NORMAL_EPS: f64 = 1e-6;

impl PointCloud {
    /// Validates the invariants: ≥ 4 points, matching unit normals, no
    /// coincident points.
    pub fn new(points: Vec<Point>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::DegenerateInput(format!(
                "{} points; need at least 4",
                points.len()
            )));
        }
        if normals.len() != points.len() {
            return Err(Error::DegenerateInput(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        for (i, n) in normals.iter().enumerate() {
            if (n.norm() - 1.0).abs() > UNIT_NORMAL_EPS {
                return Err(Error::DegenerateInput(format!(
                    "normal {i} has length {:.3e}",
                    n.norm()
                )));
            }
        }
        let index = NeighborIndex::build(&points);
        for (i, p) in points.iter().enumerate() {
            let two = index.k_nearest(p, 2);
            let other = if two[0] == i { two[1] } else { two[0] };
            if (points[other] - p).norm() < COINCIDENT_EPS {
                return Err(Error::DegenerateInput(format!(
                    "points {other} and {i} coincide"
                )));
            }
        }
        Ok(PointCloud { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box (min corner, max corner).
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    pub fn centroid(&self) -> Point {
        let sum: Vec3 = self.points.iter().map(|p| p.coords).sum();
        Point::from(sum / self.points.len() as f64)
    }

    /// Points pushed outward along their normals by `r`.
    pub fn offset_points(&self, r: f64) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.normals)
            .map(|(p, n)| p + r * n)
            .collect()
    }
}

/// Displaces every point by isotropic Gaussian noise with standard deviation
/// `sigma` × bounding-box diagonal, then re-estimates normals from the noisy
/// positions. `sigma = 0` returns the cloud unchanged.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..=0.1).contains(&sigma) {
        return Err(Error::BadParams(format!(
            "noise sigma {sigma} outside [0, 0.1]"
        )));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let dev = sigma * cloud.bbox_diagonal();
    let normal = Normal::new(0.0, dev).expect("positive std dev");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = cloud
        .points
        .iter()
        .map(|p| {
            let d = Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
            p + d
        })
        .collect();
    let normals = normals::estimate_normals(&points, normals::DEFAULT_K)?;
    PointCloud::new(points, normals)
}
