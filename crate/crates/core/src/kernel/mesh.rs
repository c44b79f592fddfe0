use std::collections::HashMap;

use serde::Serialize;

use crate::model::Vec3;

/// Indexed triangle mesh; triangles wind counter-clockwise seen from outside.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolidMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// Summary measurements of a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeshMetrics {
    pub volume: f64,
    pub surface_area: f64,
    pub aabb_min: Vec3,
    pub aabb_max: Vec3,
    pub is_manifold: bool,
    pub euler_characteristic: i64,
    pub vertices: usize,
    pub triangles: usize,
}

impl SolidMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn triangles_iter(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        (0..self.triangles.len()).map(|t| self.triangle(t))
    }

    /// Signed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.triangles_iter().map(|[a, b, c]| a.dot(b.cross(c))).sum::<f64>() / 6.0
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles_iter().map(|[a, b, c]| (b - a).cross(c - a).norm() * 0.5).sum()
    }

    /// Centroid of the enclosed volume; falls back to the vertex mean for
    /// meshes without volume.
    pub fn centroid(&self) -> Vec3 {
        let mut acc = Vec3::ZERO;
        let mut vol = 0.0;
        for [a, b, c] in self.triangles_iter() {
            let v = a.dot(b.cross(c)) / 6.0;
            acc += (a + b + c) * (v / 4.0);
            vol += v;
        }
        if vol.abs() > 1e-300 {
            acc / vol
        } else if self.vertices.is_empty() {
            Vec3::ZERO
        } else {
            self.vertices.iter().fold(Vec3::ZERO, |s, &v| s + v) / self.vertices.len() as f64
        }
    }

    /// Bounds of the referenced vertices.
    pub fn aabb(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.triangles.iter().flat_map(|t| t.iter()).map(|&i| self.vertices[i as usize]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> SolidMesh {
        SolidMesh { vertices: self.vertices.iter().map(|&v| f(v)).collect(), triangles: self.triangles.clone() }
    }

    /// Reverses every triangle.
    pub fn flipped(&self) -> SolidMesh {
        SolidMesh { vertices: self.vertices.clone(), triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect() }
    }

    /// Disjoint union of two meshes (no boolean).
    pub fn append(&mut self, other: &SolidMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + off)));
    }

    /// Welds a triangle soup at `tol` and drops triangles that collapse.
    pub fn from_soup(soup: &[[Vec3; 3]], tol: f64) -> SolidMesh {
        let mut welder = Welder::new(tol);
        let mut triangles = Vec::with_capacity(soup.len());
        for t in soup {
            let ids = t.map(|v| welder.id(v));
            if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] {
                triangles.push(ids);
            }
        }
        SolidMesh { vertices: welder.into_vertices(), triangles }
    }

    /// Drops vertices no triangle references, keeping order.
    pub fn compact(&self) -> SolidMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = self
            .triangles
            .iter()
            .map(|t| {
                t.map(|i| {
                    let r = &mut remap[i as usize];
                    if *r == u32::MAX {
                        *r = vertices.len() as u32;
                        vertices.push(self.vertices[i as usize]);
                    }
                    *r
                })
            })
            .collect();
        SolidMesh { vertices, triangles }
    }

    /// Every undirected edge used by exactly two triangles, once in each direction.
    pub fn is_edge_manifold(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = edges.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        edges.values().all(|&(f, r)| f == 1 && r == 1)
    }

    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// Smallest triangle area.
    pub fn min_triangle_area(&self) -> f64 {
        self.triangles_iter().map(|[a, b, c]| (b - a).cross(c - a).norm() * 0.5).fold(f64::INFINITY, f64::min)
    }

    /// Point-in-solid by ray parity along +z.
    pub fn contains(&self, p: Vec3) -> bool {
        classify_grid(self, &[p.x], &[p.y], &[p.z])[0]
    }
}

/// Exact formulas over the mesh; the Euler characteristic counts referenced vertices.
pub fn mesh_metrics(mesh: &SolidMesh) -> MeshMetrics {
    let (lo, hi) = mesh.aabb().unwrap_or((Vec3::ZERO, Vec3::ZERO));
    let used = {
        let mut seen = vec![false; mesh.vertices.len()];
        for t in &mesh.triangles {
            for &i in t {
                seen[i as usize] = true;
            }
        }
        seen.into_iter().filter(|&s| s).count()
    };
    let e = mesh.edge_count();
    MeshMetrics {
        volume: mesh.volume(),
        surface_area: mesh.surface_area(),
        aabb_min: lo,
        aabb_max: hi,
        is_manifold: mesh.is_edge_manifold(),
        euler_characteristic: used as i64 - e as i64 + mesh.triangles.len() as i64,
        vertices: used,
        triangles: mesh.triangles.len(),
    }
}

/// Spatial-hash vertex welding: points within `tol` of an existing vertex reuse it.
pub(crate) struct Welder {
    tol: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
    vertices: Vec<Vec3>,
}

impl Welder {
    pub(crate) fn new(tol: f64) -> Self {
        Self { tol, cells: HashMap::new(), vertices: Vec::new() }
    }

    fn key(&self, v: Vec3) -> (i64, i64, i64) {
        let q = |x: f64| (x / self.tol).floor() as i64;
        (q(v.x), q(v.y), q(v.z))
    }

    pub(crate) fn id(&mut self, v: Vec3) -> u32 {
        let (kx, ky, kz) = self.key(v);
        let mut best: Option<(u32, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &i in ids {
                            let d = self.vertices[i as usize].distance(v);
                            if d <= self.tol && best.is_none_or(|(_, bd)| d < bd) {
                                best = Some((i, d));
                            }
                        }
                    }
                }
            }
        }
        if let Some((i, _)) = best {
            return i;
        }
        let i = self.vertices.len() as u32;
        self.vertices.push(v);
        self.cells.entry((kx, ky, kz)).or_default().push(i);
        i
    }

    pub(crate) fn into_vertices(self) -> Vec<Vec3> {
        self.vertices
    }
}

/// Edge function with operands in canonical order so that two triangles
/// sharing an edge evaluate it to exact negatives of each other.
fn edge_fn(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    sign * ((hi.0 - lo.0) * (p.1 - lo.1) - (hi.1 - lo.1) * (p.0 - lo.0))
}

fn top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    // counter-clockwise triangle: left edges go down, top edges go left
    (b.1 < a.1) || (b.1 == a.1 && b.0 < a.0)
}

/// Inside/outside for every grid point `(xs[i], ys[j], zs[k])`, flattened
/// as `(i * ys.len() + j) * zs.len() + k`, by counting +z ray crossings
/// per grid column.
pub fn classify_grid(mesh: &SolidMesh, xs: &[f64], ys: &[f64], zs: &[f64]) -> Vec<bool> {
    let (nx, ny, nz) = (xs.len(), ys.len(), zs.len());
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); nx * ny];
    let lower = |v: &[f64], x: f64| v.partition_point(|&s| s < x);
    let upper = |v: &[f64], x: f64| v.partition_point(|&s| s <= x);
    let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    let (xs_sorted, ys_sorted) = (sorted(xs), sorted(ys));
    for [a, b, c] in mesh.triangles_iter() {
        let (mut pa, mut pb, pc) = ((a.x, a.y), (b.x, b.y), (c.x, c.y));
        let (mut za, mut zb, zc) = (a.z, b.z, c.z);
        let area = edge_fn(pa, pb, pc);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            std::mem::swap(&mut pa, &mut pb);
            std::mem::swap(&mut za, &mut zb);
        }
        let area = area.abs();
        let (x0, x1) = (pa.0.min(pb.0).min(pc.0), pa.0.max(pb.0).max(pc.0));
        let (y0, y1) = (pa.1.min(pb.1).min(pc.1), pa.1.max(pb.1).max(pc.1));
        let (ix0, ix1) = if xs_sorted { (lower(xs, x0), upper(xs, x1)) } else { (0, nx) };
        let (iy0, iy1) = if ys_sorted { (lower(ys, y0), upper(ys, y1)) } else { (0, ny) };
        for i in ix0..ix1 {
            for j in iy0..iy1 {
                let p = (xs[i], ys[j]);
                let w0 = edge_fn(pb, pc, p);
                let w1 = edge_fn(pc, pa, p);
                let w2 = edge_fn(pa, pb, p);
                let inside = |w: f64, s: (f64, f64), e: (f64, f64)| w > 0.0 || (w == 0.0 && top_left(s, e));
                if inside(w0, pb, pc) && inside(w1, pc, pa) && inside(w2, pa, pb) {
                    let z = (w0 * za + w1 * zb + w2 * zc) / area;
                    hits[i * ny + j].push(z);
                }
            }
        }
    }
    let mut out = vec![false; nx * ny * nz];
    for (col, h) in hits.iter_mut().enumerate() {
        if h.is_empty() {
            continue;
        }
        h.sort_by(f64::total_cmp);
        for (k, &z) in zs.iter().enumerate() {
            let below = h.partition_point(|&hz| hz < z);
            out[col * nz + k] = (h.len() - below) % 2 == 1;
        }
    }
    out
}
