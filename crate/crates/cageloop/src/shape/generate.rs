//! Seeded analytic test-shape generators.
//!
//! All generators place points exactly on the analytic surface with exact
//! normals, use low-discrepancy lattices (plus a seeded offset / rotation)
//! for quasi-uniform coverage, and are bit-deterministic per (params, n, seed).

use super::PointCloud;
use crate::error::{Error, Result};
use crate::{Point, Vec3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    Sphere { radius: f64 },
    Cylinder { radius: f64, height: f64 },
    Torus { major: f64, minor: f64 },
    /// Two equal tori with rings in the z = 0 plane, ring centers at
    /// x = ±separation/2, welded where the tubes overlap.
    Genus2 { major: f64, minor: f64, separation: f64 },
    /// L-shaped prism: an s × s square slab of thickness s/2 with the
    /// (+x, +y) quadrant removed, centered on the origin.
    BlockyL { size: f64 },
}

const GOLDEN: f64 = 0.618_033_988_749_894_9; // 1/φ

fn frac(x: f64) -> f64 {
    x - x.floor()
}

pub fn generate_shape(kind: ShapeKind, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 100 {
        return Err(Error::BadParams(format!("sample count {n} < 100")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, normals) = match kind {
        ShapeKind::Sphere { radius } => {
            positive(&[("radius", radius)])?;
            sphere(radius, n, &mut rng)
        }
        ShapeKind::Cylinder { radius, height } => {
            positive(&[("radius", radius), ("height", height)])?;
            cylinder(radius, height, n, &mut rng)
        }
        ShapeKind::Torus { major, minor } => {
            check_torus(major, minor)?;
            torus(Point::origin(), major, minor, n, &mut rng)
        }
        ShapeKind::Genus2 {
            major,
            minor,
            separation,
        } => {
            check_torus(major, minor)?;
            positive(&[("separation", separation)])?;
            if (separation / 2.0 - major).abs() >= minor {
                return Err(Error::BadParams(format!(
                    "separation {separation} leaves the tubes disjoint; need |separation/2 − major| < minor"
                )));
            }
            genus2(major, minor, separation, n, &mut rng)
        }
        ShapeKind::BlockyL { size } => {
            positive(&[("size", size)])?;
            blocky_l(size, n, &mut rng)
        }
    };
    PointCloud::new(points, normals)
}

fn positive(params: &[(&str, f64)]) -> Result<()> {
    for (name, v) in params {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::BadParams(format!("{name} = {v} must be positive")));
        }
    }
    Ok(())
}

fn check_torus(major: f64, minor: f64) -> Result<()> {
    positive(&[("major", major), ("minor", minor)])?;
    if minor >= major {
        return Err(Error::BadParams(format!(
            "minor radius {minor} must be smaller than major radius {major}"
        )));
    }
    Ok(())
}

fn sphere(radius: f64, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, Vec<Vec3>) {
    // Fibonacci spiral under a uniform random rotation.
    let rot = random_rotation(rng);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let theta = std::f64::consts::TAU * frac(i as f64 * GOLDEN);
        let rho = (1.0 - z * z).sqrt();
        let dir = rot * Vec3::new(rho * theta.cos(), rho * theta.sin(), z);
        points.push(Point::from(radius * dir));
        normals.push(dir);
    }
    (points, normals)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Rotation3<f64> {
    // Uniform rotation from a normalized 4-Gaussian quaternion.
    let q = nalgebra::Quaternion::new(
        gauss(rng),
        gauss(rng),
        gauss(rng),
        gauss(rng),
    );
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::StandardNormal;
    rng.sample(StandardNormal)
}

fn cylinder(radius: f64, height: f64, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, Vec<Vec3>) {
    let lateral_area = std::f64::consts::TAU * radius * height;
    let cap_area = std::f64::consts::PI * radius * radius;
    let total = lateral_area + 2.0 * cap_area;
    let n_lat = ((n as f64) * lateral_area / total).round() as usize;
    let n_top = (n - n_lat) / 2;
    let n_bot = n - n_lat - n_top;
    let offs = rng.random::<f64>();
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n_lat {
        let z = height * ((i as f64 + 0.5) / n_lat as f64 - 0.5);
        let theta = std::f64::consts::TAU * frac(i as f64 * GOLDEN + offs);
        let dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
        points.push(Point::new(radius * dir.x, radius * dir.y, z));
        normals.push(dir);
    }
    for (count, z, nz) in [(n_top, height / 2.0, 1.0), (n_bot, -height / 2.0, -1.0)] {
        let offs = rng.random::<f64>();
        for i in 0..count {
            // sunflower layout: radius ∝ √u keeps density uniform on the disc
            let rho = radius * (((i as f64 + 0.5) / count as f64).sqrt()) * 0.999;
            let theta = std::f64::consts::TAU * frac(i as f64 * GOLDEN + offs);
            points.push(Point::new(rho * theta.cos(), rho * theta.sin(), z));
            normals.push(Vec3::new(0.0, 0.0, nz));
        }
    }
    (points, normals)
}

/// Signed distance to a z-axis-aligned torus with ring center `center`
/// (center must lie in the plane of the ring).
pub fn torus_signed_distance(p: &Point, center: &Point, major: f64, minor: f64) -> f64 {
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    let dz = p.z - center.z;
    let rho = (dx * dx + dy * dy).sqrt();
    ((rho - major).powi(2) + dz * dz).sqrt() - minor
}

fn torus_lattice(
    center: Point,
    major: f64,
    minor: f64,
    n: usize,
    offs: (f64, f64),
) -> (Vec<Point>, Vec<Vec3>) {
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let theta = std::f64::consts::TAU * frac(i as f64 * GOLDEN + offs.0);
        // minor angle via inverse CDF of the area element R + r·cos(ψ)
        let t = frac((i as f64 + 0.5) / n as f64 + offs.1);
        let psi = invert_minor_cdf(major, minor, t);
        let ring_dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
        let q = center + major * ring_dir;
        let nrm = psi.cos() * ring_dir + psi.sin() * Vec3::z();
        points.push(q + minor * nrm);
        normals.push(nrm);
    }
    (points, normals)
}

/// Solves R·ψ + r·sin(ψ) = 2πR·t for ψ by Newton iteration.
fn invert_minor_cdf(major: f64, minor: f64, t: f64) -> f64 {
    let target = std::f64::consts::TAU * major * t;
    let mut psi = std::f64::consts::TAU * t;
    for _ in 0..12 {
        let f = major * psi + minor * psi.sin() - target;
        let df = major + minor * psi.cos();
        psi -= f / df;
    }
    psi
}

fn torus(center: Point, major: f64, minor: f64, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, Vec<Vec3>) {
    let offs = (rng.random::<f64>(), rng.random::<f64>());
    torus_lattice(center, major, minor, n, offs)
}

fn genus2(
    major: f64,
    minor: f64,
    separation: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Point>, Vec<Vec3>) {
    let centers = [
        Point::new(-separation / 2.0, 0.0, 0.0),
        Point::new(separation / 2.0, 0.0, 0.0),
    ];
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (which, &c) in centers.iter().enumerate() {
        let offs = (rng.random::<f64>(), rng.random::<f64>());
        let (p, nr) = torus_lattice(c, major, minor, n, offs);
        let other = centers[1 - which];
        for (pt, nm) in p.into_iter().zip(nr) {
            // drop samples buried inside the other tube
            if torus_signed_distance(&pt, &other, major, minor) >= 0.0 {
                points.push(pt);
                normals.push(nm);
            }
        }
    }
    // stride down to exactly n, keeping both lobes represented
    let m = points.len();
    debug_assert!(m >= n, "weld removed more than half the samples");
    let mut out_p = Vec::with_capacity(n);
    let mut out_n = Vec::with_capacity(n);
    for j in 0..n {
        let i = j * m / n;
        out_p.push(points[i]);
        out_n.push(normals[i]);
    }
    (out_p, out_n)
}

fn blocky_l(size: f64, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, Vec<Vec3>) {
    let s = size;
    let h = s / 2.0;
    // prism over the L polygon (0,0)(s,0)(s,h)(h,h)(h,s)(0,s), z ∈ [0,h],
    // then recentered so the bbox midpoint is the origin.
    let shift = Vec3::new(-s / 2.0, -s / 2.0, -h / 2.0);
    let cap_area = s * s - h * h;
    // (edge start, edge end, outward normal, area) for the six walls
    let walls = [
        (Point::new(0.0, 0.0, 0.0), Point::new(s, 0.0, 0.0), -Vec3::y()),
        (Point::new(s, 0.0, 0.0), Point::new(s, h, 0.0), Vec3::x()),
        (Point::new(s, h, 0.0), Point::new(h, h, 0.0), Vec3::y()),
        (Point::new(h, h, 0.0), Point::new(h, s, 0.0), Vec3::x()),
        (Point::new(h, s, 0.0), Point::new(0.0, s, 0.0), Vec3::y()),
        (Point::new(0.0, s, 0.0), Point::new(0.0, 0.0, 0.0), -Vec3::x()),
    ];
    let wall_areas: Vec<f64> = walls.iter().map(|(a, b, _)| (b - a).norm() * h).collect();
    let total = 2.0 * cap_area + wall_areas.iter().sum::<f64>();

    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut budget: Vec<usize> = Vec::new();
    let mut acc = 0.0;
    let mut assigned = 0;
    for area in std::iter::once(cap_area)
        .chain(std::iter::once(cap_area))
        .chain(wall_areas.iter().copied())
    {
        acc += area;
        let upto = ((acc / total) * n as f64).round() as usize;
        budget.push(upto - assigned);
        assigned = upto;
    }

    // caps: L = [0,s]×[0,h] ∪ [0,h]×[h,s]
    let rect1_area = s * h;
    for (cap, z, nz) in [(0usize, h, 1.0), (1usize, 0.0, -1.0)] {
        for _ in 0..budget[cap] {
            let u: f64 = rng.random();
            let (x, y) = if u * cap_area < rect1_area {
                (rng.random::<f64>() * s, rng.random::<f64>() * h)
            } else {
                (rng.random::<f64>() * h, h + rng.random::<f64>() * h)
            };
            points.push(Point::new(x, y, z) + shift);
            normals.push(Vec3::new(0.0, 0.0, nz));
        }
    }
    for (w, (a, b, nrm)) in walls.iter().enumerate() {
        for _ in 0..budget[2 + w] {
            let t: f64 = rng.random();
            let z: f64 = rng.random::<f64>() * h;
            let p = a + t * (b - a) + Vec3::new(0.0, 0.0, z);
            points.push(p + shift);
            normals.push(*nrm);
        }
    }
    (points, normals)
}
