//! Shape file I/O.
//!
//! Two formats:
//! - `Mesh`: ASCII OFF triangle/polygon soup. Vertices become the cloud;
//!   per-vertex normals are accumulated area-weighted face normals and the
//!   faces are then discarded.
//! - `OrientedPoints`: one point per line, `x y z` or `x y z nx ny nz`,
//!   `#` comments allowed. Clouds without normal columns get normals from
//!   the plane-fit estimator.

use super::{normals, PointCloud};
use crate::error::{Error, Result};
use crate::{Point, Vec3};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFormat {
    Mesh,
    OrientedPoints,
}

impl ShapeFormat {
    /// Guess from the file extension: `.off` is a mesh, anything else points.
    pub fn from_path(path: &Path) -> ShapeFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("off") => ShapeFormat::Mesh,
            _ => ShapeFormat::OrientedPoints,
        }
    }
}

pub fn load_shape(path: &Path, format: ShapeFormat) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    match format {
        ShapeFormat::Mesh => parse_off(&name, &text),
        ShapeFormat::OrientedPoints => parse_points(&name, &text),
    }
}

/// Writes `x y z nx ny nz` lines; floats use Rust's shortest-roundtrip
/// formatting, so save → load reproduces the cloud bit-exactly.
pub fn save_points(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(cloud.len() * 64);
    out.push_str("# x y z nx ny nz\n");
    for (p, n) in cloud.points.iter().zip(&cloud.normals) {
        out.push_str(&format!("{} {} {} {} {} {}\n", p.x, p.y, p.z, n.x, n.y, n.z));
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct Tokens<'a> {
    path: &'a str,
    lines: Vec<(usize, Vec<&'a str>)>,
    line_pos: usize,
    tok_pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(path: &'a str, text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                (i + 1, l.split_whitespace().collect::<Vec<_>>())
            })
            .filter(|(_, toks)| !toks.is_empty())
            .collect();
        Tokens {
            path,
            lines,
            line_pos: 0,
            tok_pos: 0,
        }
    }

    fn line(&self) -> usize {
        self.lines
            .get(self.line_pos)
            .or_else(|| self.lines.last())
            .map_or(0, |(n, _)| *n)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line: self.line(),
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        while self.line_pos < self.lines.len() {
            let (_, toks) = &self.lines[self.line_pos];
            if self.tok_pos < toks.len() {
                let t = toks[self.tok_pos];
                self.tok_pos += 1;
                return Ok(t);
            }
            self.line_pos += 1;
            self.tok_pos = 0;
        }
        Err(self.err("unexpected end of file"))
    }

    fn next_usize(&mut self) -> Result<usize> {
        let t = self.next()?;
        t.parse().map_err(|_| self.err(format!("expected integer, got '{t}'")))
    }

    fn next_f64(&mut self) -> Result<f64> {
        let t = self.next()?;
        t.parse().map_err(|_| self.err(format!("expected number, got '{t}'")))
    }
}

fn parse_off(path: &str, text: &str) -> Result<PointCloud> {
    let mut tk = Tokens::new(path, text);
    if tk.lines.is_empty() {
        return Err(Error::DegenerateInput(format!("{path} is empty")));
    }
    let magic = tk.next()?;
    if magic != "OFF" {
        return Err(tk.err(format!("expected OFF header, got '{magic}'")));
    }
    let nv = tk.next_usize()?;
    let nf = tk.next_usize()?;
    let _ne = tk.next_usize()?;
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        points.push(Point::new(tk.next_f64()?, tk.next_f64()?, tk.next_f64()?));
    }
    let mut vnormals = vec![Vec3::zeros(); nv];
    for _ in 0..nf {
        let k = tk.next_usize()?;
        if k < 3 {
            return Err(tk.err(format!("face with {k} vertices")));
        }
        let mut face = Vec::with_capacity(k);
        for _ in 0..k {
            let idx = tk.next_usize()?;
            if idx >= nv {
                return Err(tk.err(format!("vertex index {idx} out of range (nv = {nv})")));
            }
            face.push(idx);
        }
        // Newell's method: robust polygon normal with magnitude 2·area
        let mut fnormal = Vec3::zeros();
        for i in 0..k {
            let a = points[face[i]];
            let b = points[face[(i + 1) % k]];
            fnormal.x += (a.y - b.y) * (a.z + b.z);
            fnormal.y += (a.z - b.z) * (a.x + b.x);
            fnormal.z += (a.x - b.x) * (a.y + b.y);
        }
        for &vi in &face {
            vnormals[vi] += fnormal;
        }
    }
    finish_normals(points, vnormals)
}

fn parse_points(path: &str, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut file_normals = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_string(),
            line: lineno + 1,
            msg,
        };
        let w = *width.get_or_insert(if toks.len() >= 6 { 6 } else { 3 });
        if toks.len() != w {
            return Err(err(format!("expected {w} fields, got {}", toks.len())));
        }
        let mut vals = [0.0f64; 6];
        for (i, t) in toks.iter().enumerate() {
            vals[i] = t
                .parse()
                .map_err(|_| err(format!("expected number, got '{t}'")))?;
        }
        points.push(Point::new(vals[0], vals[1], vals[2]));
        if w == 6 {
            file_normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    if points.is_empty() {
        return Err(Error::DegenerateInput(format!("{path} contains no points")));
    }
    if file_normals.is_empty() {
        let est = normals::estimate_normals(&points, normals::DEFAULT_K)?;
        PointCloud::new(points, est)
    } else {
        finish_normals(points, file_normals)
    }
}

/// Normalizes accumulated/raw normals; if any are zero-length, falls back to
/// re-estimating all normals from positions so orientation stays consistent.
/// Vectors already unit-length are kept verbatim (normalizing a unit vector
/// perturbs its last bit, which would break save → load bit-exactness).
fn finish_normals(points: Vec<Point>, raw: Vec<Vec3>) -> Result<PointCloud> {
    let any_zero = raw.iter().any(|n| n.norm() < 1e-12);
    let normals = if any_zero {
        normals::estimate_normals(&points, normals::DEFAULT_K)?
    } else {
        raw.iter()
            .map(|n| {
                let len = n.norm();
                if (len - 1.0).abs() <= 1e-9 {
                    *n
                } else {
                    n / len
                }
            })
            .collect()
    };
    PointCloud::new(points, normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::generate::{generate_shape, ShapeKind};
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("cageloop_io_{}_{name}", std::process::id()))
    }

    const CUBE_OFF: &str = "OFF
8 6 12
-1 -1 -1
 1 -1 -1
 1  1 -1
-1  1 -1
-1 -1  1
 1 -1  1
 1  1  1
-1  1  1
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 2 3 7 6
4 1 2 6 5
4 0 4 7 3
";

    #[test]
    fn cube_mesh_normals_point_away_from_centroid() {
        let path = tmp("cube.off");
        std::fs::write(&path, CUBE_OFF).unwrap();
        let cloud = load_shape(&path, ShapeFormat::Mesh).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(cloud.len(), 8);
        for (p, n) in cloud.points.iter().zip(&cloud.normals) {
            assert!(n.dot(&(p - Point::origin())) > 0.0);
            // corner normals are the normalized corner diagonals
            assert!((n - p.coords.normalize()).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_file_is_degenerate() {
        let path = tmp("empty.xyz");
        std::fs::write(&path, "# nothing\n\n").unwrap();
        let r = load_shape(&path, ShapeFormat::OrientedPoints);
        std::fs::remove_file(&path).unwrap();
        assert!(matches!(r, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn malformed_mesh_reports_line() {
        let path = tmp("bad.off");
        std::fs::write(&path, "OFF\n3 1 0\n0 0 0\n1 0 nope\n0 1 0\n3 0 1 2\n").unwrap();
        let r = load_shape(&path, ShapeFormat::Mesh);
        std::fs::remove_file(&path).unwrap();
        match r {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn points_roundtrip_is_bit_exact() {
        let cloud = generate_shape(ShapeKind::Torus { major: 0.08, minor: 0.025 }, 300, 7).unwrap();
        let path = tmp("torus.xyz");
        save_points(&cloud, &path).unwrap();
        let back = load_shape(&path, ShapeFormat::OrientedPoints).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(cloud.points, back.points);
        assert_eq!(cloud.normals, back.normals);
    }

    #[test]
    fn points_without_normals_get_estimated_outward() {
        let cloud = generate_shape(ShapeKind::Sphere { radius: 0.1 }, 1000, 7).unwrap();
        let path = tmp("sphere_bare.xyz");
        let mut text = String::new();
        for p in &cloud.points {
            text.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        std::fs::write(&path, text).unwrap();
        let loaded = load_shape(&path, ShapeFormat::OrientedPoints).unwrap();
        std::fs::remove_file(&path).unwrap();
        let good = loaded
            .points
            .iter()
            .zip(&loaded.normals)
            .filter(|(p, n)| n.dot(&p.coords.normalize()).acos().to_degrees() <= 5.0)
            .count();
        assert!(good as f64 >= 0.99 * loaded.len() as f64);
    }

    #[test]
    fn format_detection() {
        assert_eq!(ShapeFormat::from_path(Path::new("a/b.off")), ShapeFormat::Mesh);
        assert_eq!(ShapeFormat::from_path(Path::new("a/b.OFF")), ShapeFormat::Mesh);
        assert_eq!(
            ShapeFormat::from_path(Path::new("a/b.xyz")),
            ShapeFormat::OrientedPoints
        );
    }
}
