//! 3D convex hull (quickhull) and point-membership queries.
//!
//! The hull of the offset cloud bounds the region searched for caging loops.
//! Faces keep consistent outward winding, so each face plane satisfies
//! n·x ≤ b for every hull point.

use crate::error::{Error, Result};
use crate::{Point, Vec3};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct ConvexHull {
    /// Hull corner positions (referenced by `faces`).
    pub vertices: Vec<Point>,
    /// Triangles as indices into `vertices`, outward winding.
    pub faces: Vec<[u32; 3]>,
    /// One outward plane (unit normal, offset) per triangle: inside ⇔ n·x ≤ b.
    pub planes: Vec<(Vec3, f64)>,
}

impl ConvexHull {
    pub fn build(points: &[Point]) -> Result<ConvexHull> {
        let mut qh = QuickHull::new(points)?;
        qh.run();
        Ok(qh.finish(points))
    }

    /// True when `p` is inside or within `tol` of every face plane.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.planes
            .iter()
            .all(|(n, b)| n.dot(&p.coords) <= b + tol)
    }

    /// Smallest plane clearance: positive inside, negative outside. For inner
    /// points this lower-bounds the distance to the hull boundary.
    pub fn margin(&self, p: &Point) -> f64 {
        self.planes
            .iter()
            .map(|(n, b)| b - n.dot(&p.coords))
            .fold(f64::INFINITY, f64::min)
    }
}

struct Face {
    v: [usize; 3],
    n: Vec3,
    b: f64,
    /// nb[i] = face across edge (v[i], v[i+1])
    nb: [usize; 3],
    alive: bool,
    /// conflict list: input points strictly outside this face
    pts: Vec<usize>,
}

struct QuickHull<'a> {
    points: &'a [Point],
    faces: Vec<Face>,
    eps: f64,
}

impl<'a> QuickHull<'a> {
    fn new(points: &'a [Point]) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::DegenerateInput(format!(
                "convex hull needs ≥ 4 points, got {}",
                points.len()
            )));
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let scale = (hi - lo).norm().max(1e-300);
        let eps = 1e-9 * scale;

        // initial simplex from extreme points
        let (mut e0, mut e1, mut best) = (0, 0, -1.0);
        for a in 0..3 {
            let i = (0..points.len())
                .min_by(|&x, &y| points[x][a].total_cmp(&points[y][a]))
                .unwrap();
            let j = (0..points.len())
                .max_by(|&x, &y| points[x][a].total_cmp(&points[y][a]))
                .unwrap();
            let d = (points[j] - points[i]).norm();
            if d > best {
                (e0, e1, best) = (i, j, d);
            }
        }
        if best <= eps {
            return Err(Error::DegenerateInput("all hull points coincide".into()));
        }
        let dir = (points[e1] - points[e0]).normalize();
        let e2 = (0..points.len())
            .max_by(|&x, &y| {
                let dx = ((points[x] - points[e0]) - (points[x] - points[e0]).dot(&dir) * dir).norm();
                let dy = ((points[y] - points[e0]) - (points[y] - points[e0]).dot(&dir) * dir).norm();
                dx.total_cmp(&dy)
            })
            .unwrap();
        let off2 =
            ((points[e2] - points[e0]) - (points[e2] - points[e0]).dot(&dir) * dir).norm();
        if off2 <= eps {
            return Err(Error::DegenerateInput("hull points are collinear".into()));
        }
        let n0 = (points[e1] - points[e0])
            .cross(&(points[e2] - points[e0]))
            .normalize();
        let e3 = (0..points.len())
            .max_by(|&x, &y| {
                let dx = (points[x] - points[e0]).dot(&n0).abs();
                let dy = (points[y] - points[e0]).dot(&n0).abs();
                dx.total_cmp(&dy)
            })
            .unwrap();
        if (points[e3] - points[e0]).dot(&n0).abs() <= eps {
            return Err(Error::DegenerateInput("hull points are coplanar".into()));
        }

        let mut qh = QuickHull {
            points,
            faces: Vec::new(),
            eps,
        };
        // orient the tetrahedron faces outward from its centroid
        let centroid = Point::from(
            (points[e0].coords + points[e1].coords + points[e2].coords + points[e3].coords) / 4.0,
        );
        let tets = [[e0, e1, e2], [e0, e1, e3], [e0, e2, e3], [e1, e2, e3]];
        for t in tets {
            qh.add_face_oriented(t, &centroid);
        }
        qh.rebuild_adjacency();
        // initial conflict lists
        for i in 0..points.len() {
            if i == e0 || i == e1 || i == e2 || i == e3 {
                continue;
            }
            for f in 0..qh.faces.len() {
                if qh.dist(f, i) > qh.eps {
                    qh.faces[f].pts.push(i);
                    break;
                }
            }
        }
        Ok(qh)
    }

    fn dist(&self, f: usize, p: usize) -> f64 {
        self.faces[f].n.dot(&self.points[p].coords) - self.faces[f].b
    }

    fn add_face_oriented(&mut self, mut v: [usize; 3], inside: &Point) {
        let mut n = (self.points[v[1]] - self.points[v[0]])
            .cross(&(self.points[v[2]] - self.points[v[0]]))
            .normalize();
        if n.dot(&(inside - self.points[v[0]])) > 0.0 {
            v.swap(1, 2);
            n = -n;
        }
        let b = n.dot(&self.points[v[0]].coords);
        self.faces.push(Face {
            v,
            n,
            b,
            nb: [usize::MAX; 3],
            alive: true,
            pts: Vec::new(),
        });
    }

    /// Recomputes neighbor links of all alive faces from scratch.
    fn rebuild_adjacency(&mut self) {
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let ids: Vec<usize> = (0..self.faces.len()).filter(|&f| self.faces[f].alive).collect();
        for &f in &ids {
            for s in 0..3 {
                let a = self.faces[f].v[s];
                let b = self.faces[f].v[(s + 1) % 3];
                let key = (a.min(b), a.max(b));
                match edges.remove(&key) {
                    None => {
                        edges.insert(key, (f, s));
                    }
                    Some((g, t)) => {
                        self.faces[f].nb[s] = g;
                        self.faces[g].nb[t] = f;
                    }
                }
            }
        }
        debug_assert!(edges.is_empty(), "open hull boundary");
    }

    fn run(&mut self) {
        loop {
            let Some(f0) = (0..self.faces.len())
                .find(|&f| self.faces[f].alive && !self.faces[f].pts.is_empty())
            else {
                break;
            };
            // farthest conflict point of f0
            let &apex = self.faces[f0]
                .pts
                .iter()
                .max_by(|&&x, &&y| self.dist(f0, x).total_cmp(&self.dist(f0, y)))
                .unwrap();

            // visible region via flood fill
            let mut visible = vec![f0];
            let mut seen: HashMap<usize, ()> = HashMap::from([(f0, ())]);
            let mut stack = vec![f0];
            while let Some(f) = stack.pop() {
                for s in 0..3 {
                    let g = self.faces[f].nb[s];
                    if !seen.contains_key(&g) && self.faces[g].alive && self.dist(g, apex) > self.eps
                    {
                        seen.insert(g, ());
                        visible.push(g);
                        stack.push(g);
                    }
                }
            }
            // horizon: edges of visible faces whose neighbor is hidden,
            // directed as they appear in the hidden (kept) face
            let mut horizon: Vec<(usize, usize, usize)> = Vec::new(); // (u, v, hidden face)
            for &f in &visible {
                for s in 0..3 {
                    let g = self.faces[f].nb[s];
                    if !seen.contains_key(&g) {
                        let a = self.faces[f].v[s];
                        let b = self.faces[f].v[(s + 1) % 3];
                        // directed (a → b) as in the visible face; the hidden
                        // face g holds the reverse (b → a)
                        horizon.push((a, b, g));
                    }
                }
            }
            // collect orphaned conflict points and retire visible faces
            let mut orphans: Vec<usize> = Vec::new();
            for &f in &visible {
                orphans.append(&mut self.faces[f].pts);
                self.faces[f].alive = false;
            }
            // fan of new faces around the apex; keeping the visible face's
            // edge direction (a → b) preserves consistent outward winding
            let first_new = self.faces.len();
            let mut starts: HashMap<usize, usize> = HashMap::with_capacity(horizon.len());
            let mut simple_horizon = true;
            for &(a, b, hidden) in &horizon {
                let n = (self.points[b] - self.points[a])
                    .cross(&(self.points[apex] - self.points[a]))
                    .normalize();
                let off = n.dot(&self.points[a].coords);
                let f = self.faces.len();
                simple_horizon &= starts.insert(a, f).is_none();
                self.faces.push(Face {
                    v: [a, b, apex],
                    n,
                    b: off,
                    nb: [hidden, usize::MAX, usize::MAX],
                    alive: true,
                    pts: Vec::new(),
                });
                // relink the hidden neighbor's slot for edge (b → a) to f
                let s = (0..3)
                    .find(|&s| {
                        self.faces[hidden].v[s] == b && self.faces[hidden].v[(s + 1) % 3] == a
                    })
                    .expect("horizon edge missing from hidden face");
                self.faces[hidden].nb[s] = f;
            }
            // fan faces meet along (b, apex) edges; on a simple horizon loop
            // the fan face starting at b is the neighbor across slot 1
            if simple_horizon {
                for f in first_new..self.faces.len() {
                    let b = self.faces[f].v[1];
                    let g = starts[&b];
                    self.faces[f].nb[1] = g;
                    self.faces[g].nb[2] = f;
                }
            } else {
                // a pinched horizon (vertex reused) is rare; relink everything
                self.rebuild_adjacency();
            }
            for p in orphans {
                if p == apex {
                    continue;
                }
                for f in first_new..self.faces.len() {
                    if self.dist(f, p) > self.eps {
                        self.faces[f].pts.push(p);
                        break;
                    }
                }
            }
        }
    }

    fn finish(self, points: &[Point]) -> ConvexHull {
        let mut remap: HashMap<usize, u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut planes = Vec::new();
        for f in self.faces.iter().filter(|f| f.alive) {
            let tri: Vec<u32> = f
                .v
                .iter()
                .map(|&vi| {
                    *remap.entry(vi).or_insert_with(|| {
                        vertices.push(points[vi]);
                        (vertices.len() - 1) as u32
                    })
                })
                .collect();
            faces.push([tri[0], tri[1], tri[2]]);
            planes.push((f.n, f.b));
        }
        ConvexHull {
            vertices,
            faces,
            planes,
        }
    }
}
