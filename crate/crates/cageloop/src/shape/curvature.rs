//! Principal-curvature estimation by quadric fitting.
//!
//! For each point a height field z = ax² + bxy + cy² + dx + ey + f is fitted
//! over the tangent plane of its k nearest neighbors, with z measured along
//! the outward normal; the curvatures are the eigenvalues of the shape
//! operator of that graph. Convex exterior regions therefore report both
//! curvatures negative (sphere of radius R → −1/R), while the inner side of
//! a concavity reports a positive curvature.

use super::{PointCloud, SurfaceSamplePoint};
use crate::error::{Error, Result};
use crate::knn::NeighborIndex;
use crate::Vec3;
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_K: usize = 16;

/// Relative singular-value cutoff below which a neighborhood counts as
/// rank-deficient; such points keep curvatures (0, 0).
const RANK_EPS: f64 = 1e-8;

pub fn estimate_curvatures(cloud: &PointCloud, k: usize) -> Result<Vec<SurfaceSamplePoint>> {
    if k < 6 {
        return Err(Error::BadParams(format!(
            "curvature fit needs k ≥ 6 neighbors, got {k}"
        )));
    }
    let k = k.min(cloud.len() - 1);
    let index = NeighborIndex::build(&cloud.points);
    let mut out = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points.iter().enumerate() {
        let n = cloud.normals[i];
        let (u, v) = tangent_basis(&n);
        let members = index.k_nearest(p, k + 1);

        // local coordinates, rescaled by the neighborhood radius for conditioning
        let mut rows = Vec::with_capacity(members.len());
        let mut scale: f64 = 0.0;
        for &j in &members {
            let d = cloud.points[j] - p;
            rows.push((d.dot(&u), d.dot(&v), d.dot(&n)));
            scale = scale.max(d.norm());
        }
        let (k1, k2) = fit_quadric_curvatures(&rows, scale).unwrap_or((0.0, 0.0));
        out.push(SurfaceSamplePoint {
            position: *p,
            normal: n,
            k1,
            k2,
        });
    }
    Ok(out)
}

fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let pick = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&pick).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Least-squares quadric fit in scaled coordinates, then principal curvatures
/// from the first and second fundamental forms. `None` if rank-deficient.
fn fit_quadric_curvatures(rows: &[(f64, f64, f64)], scale: f64) -> Option<(f64, f64)> {
    if scale <= 0.0 || rows.len() < 6 {
        return None;
    }
    let m = rows.len();
    let mut a = DMatrix::<f64>::zeros(m, 6);
    let mut z = DVector::<f64>::zeros(m);
    for (r, &(x, y, h)) in rows.iter().enumerate() {
        let (x, y, h) = (x / scale, y / scale, h / scale);
        a[(r, 0)] = x * x;
        a[(r, 1)] = x * y;
        a[(r, 2)] = y * y;
        a[(r, 3)] = x;
        a[(r, 4)] = y;
        a[(r, 5)] = 1.0;
        z[r] = h;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= RANK_EPS * smax {
        return None;
    }
    let coef = svd.solve(&z, RANK_EPS * smax).ok()?;
    // undo the scaling: quadratic terms pick up 1/scale, linear terms none
    let (qa, qb, qc) = (coef[0] / scale, coef[1] / scale, coef[2] / scale);
    let (gd, ge) = (coef[3], coef[4]);

    let e1 = 1.0 + gd * gd;
    let f1 = gd * ge;
    let g1 = 1.0 + ge * ge;
    let denom = (1.0 + gd * gd + ge * ge).sqrt();
    let l2 = 2.0 * qa / denom;
    let m2 = qb / denom;
    let n2 = 2.0 * qc / denom;
    let det1 = e1 * g1 - f1 * f1;
    let mean = (e1 * n2 - 2.0 * f1 * m2 + g1 * l2) / (2.0 * det1);
    let gauss = (l2 * n2 - m2 * m2) / det1;
    let disc = (mean * mean - gauss).max(0.0).sqrt();
    Some((mean + disc, mean - disc))
}
